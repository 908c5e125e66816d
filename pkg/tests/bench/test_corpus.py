from io import BytesIO

from numpy import arange, uint8
from PIL import Image
from pytest import raises

from rjip_colour.bench.corpus import (
    KODAK_NAMES,
    KODAK_URL,
    MANIFEST,
    convert_to_ppm,
    fetch_kodak,
    read_manifest,
    sha256_hex,
    write_manifest,
)
from rjip_colour.core.exception import ContractError, FormatError
from rjip_colour.core.image import load_ppm


def _png(seed: int) -> bytes:
    pixels = ((arange(8 * 6 * 3).reshape(6, 8, 3) * (seed + 1)) % 256).astype(uint8)
    buffer = BytesIO()
    Image.fromarray(pixels).save(buffer, format="PNG")
    return buffer.getvalue()


class FakeServer:
    def __init__(self, seed: int = 0):
        self.seed = seed
        self.urls = []

    def __call__(self, url: str) -> bytes:
        self.urls.append(url)
        return _png(self.seed)


def test_convert_to_ppm_01():
    image = load_ppm(convert_to_ppm(_png(0)))
    assert (image.width, image.height) == (8, 6)
    assert image.planes[:, 0, 1].tolist() == [3.0, 4.0, 5.0]


def test_manifest_01(tmp_path):
    filename = tmp_path / MANIFEST
    write_manifest(filename, {"b.ppm": "22", "a.ppm": "11"})
    assert filename.read_text() == "11  a.ppm\n22  b.ppm\n"
    filename.write_text("# comment\n\nAB *c.ppm\n" + filename.read_text())
    assert read_manifest(filename) == {"a.ppm": "11", "b.ppm": "22", "c.ppm": "ab"}

    filename.write_text("deadbeef\n")
    with raises(FormatError):
        read_manifest(filename)


def test_fetch_kodak_01(tmp_path):
    """The first fetch records checksums, later ones verify them"""
    dest = tmp_path / "kodak"
    server = FakeServer()
    paths = fetch_kodak(dest, names=("kodim07", "kodim13"), fetch=server)
    assert [path.name for path in paths] == ["kodim07.ppm", "kodim13.ppm"]
    assert server.urls == [KODAK_URL.format(name="kodim07"), KODAK_URL.format(name="kodim13")]
    manifest = read_manifest(dest / MANIFEST)
    assert manifest == {
        "kodim07.ppm": sha256_hex(paths[0].read_bytes()),
        "kodim13.ppm": sha256_hex(paths[1].read_bytes()),
    }
    assert not list(dest.glob(".*.tmp"))

    # verified files are kept
    again = FakeServer()
    fetch_kodak(dest, names=("kodim07", "kodim13"), fetch=again)
    assert again.urls == []

    # a damaged file is fetched anew and verified
    paths[0].write_bytes(b"damaged")
    fetch_kodak(dest, names=("kodim07",), fetch=again)
    assert len(again.urls) == 1
    assert sha256_hex(paths[0].read_bytes()) == manifest["kodim07.ppm"]

    # different content from the server
    paths[1].unlink()
    with raises(FormatError):
        fetch_kodak(dest, names=("kodim13",), fetch=FakeServer(seed=5))
    assert not paths[1].exists()


def test_fetch_kodak_02(tmp_path):
    checksums = tmp_path / "sums.txt"
    server = FakeServer()
    fetch_kodak(tmp_path / "a", names=KODAK_NAMES[:1], checksums=checksums, fetch=server)
    assert list(read_manifest(checksums)) == ["kodim01.ppm"]
    assert not (tmp_path / "a" / MANIFEST).exists()

    with raises(ContractError):
        fetch_kodak(tmp_path / "b", names=("lena",), fetch=server)
