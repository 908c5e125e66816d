"""Kodak test images: download, conversion to PPM and a SHA-256 manifest.

The images are not shipped with the package. The first fetch records the checksum of
every converted PPM in the manifest; later fetches verify against it.
"""

from __future__ import annotations

from hashlib import sha256
from io import BytesIO
from pathlib import Path
from typing import TYPE_CHECKING

from ..core.exception import ContractError, FormatError
from ..core.image import RasterImage, save_ppm
from ..tools.files import atomic_write_bytes, atomic_write_text
from ..tools.logger import INFO1, logger

if TYPE_CHECKING:
    from collections.abc import Callable, Sequence

KODAK_URL = "https://r0k.us/graphics/kodak/kodak/{name}.png"
KODAK_NAMES = tuple(f"kodim{index:02d}" for index in range(1, 25))
MANIFEST = "SHA256SUMS"


def sha256_hex(data: bytes) -> str:
    return sha256(data).hexdigest()


def read_manifest(filename: Path | str) -> dict[str, str]:
    """`<hex digest>  <file name>` lines, as written by sha256sum."""
    checksums = {}
    for lineno, line in enumerate(Path(filename).read_text().splitlines(), start=1):
        if not (line := line.strip()) or line.startswith("#"):
            continue
        try:
            digest, name = line.split(maxsplit=1)
        except ValueError as exc:
            raise FormatError(f"Invalid manifest line {lineno} in {filename}") from exc
        checksums[name.lstrip("*")] = digest.lower()
    return checksums


def write_manifest(filename: Path | str, checksums: dict[str, str]) -> None:
    text = "".join(f"{digest}  {name}\n" for name, digest in sorted(checksums.items()))
    atomic_write_text(filename, text)


def download(url: str, *, timeout: float = 60.0) -> bytes:
    import requests

    logger.log(INFO1, f"Download: {url}")
    response = requests.get(url, allow_redirects=True, timeout=timeout)
    response.raise_for_status()
    return response.content


def convert_to_ppm(data: bytes) -> bytes:
    """Any image Pillow can read, as binary RGB PPM bytes."""
    from numpy import asarray
    from PIL import Image

    with Image.open(BytesIO(data)) as img:
        pixels = asarray(img.convert("RGB"))
    return save_ppm(RasterImage.from_pixels(pixels))


def fetch_kodak(
    dest: Path | str,
    *,
    names: Sequence[str] = KODAK_NAMES,
    checksums: Path | str | None = None,
    fetch: Callable[[str], bytes] = download,
) -> list[Path]:
    """Make `dest/<name>.ppm` available for every name, verified against the manifest.

    Existing files that match their checksum are kept. The manifest defaults to
    `dest/SHA256SUMS` and gains an entry for every file fetched without one.
    """
    dest = Path(dest)
    dest.mkdir(parents=True, exist_ok=True)
    manifest = Path(checksums) if checksums is not None else dest / MANIFEST
    known = read_manifest(manifest) if manifest.exists() else {}
    unknown = [name for name in names if name not in KODAK_NAMES]
    if unknown:
        raise ContractError(f"Not a Kodak image: {', '.join(unknown)}")

    recorded = dict(known)
    paths = []
    for name in names:
        filename = f"{name}.ppm"
        path = dest / filename
        expected = known.get(filename)
        if path.exists() and expected == sha256_hex(path.read_bytes()):
            logger.log(INFO1, f"Keep: {path}")
            paths.append(path)
            continue

        data = convert_to_ppm(fetch(KODAK_URL.format(name=name)))
        digest = sha256_hex(data)
        if expected is not None and digest != expected:
            raise FormatError(f"Checksum mismatch for {filename}: {digest} != {expected}")
        if expected is None:
            logger.warning(f"No recorded checksum for {filename}, recording {digest}")
            recorded[filename] = digest
        atomic_write_bytes(path, data)
        paths.append(path)

    if recorded != known:
        write_manifest(manifest, recorded)
    return paths
