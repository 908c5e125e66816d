from __future__ import annotations

from contextlib import suppress
from os import replace
from pathlib import Path
from tempfile import NamedTemporaryFile

from .logger import INFO1, logger


def atomic_write_bytes(filename: Path | str, data: bytes) -> None:
    """Write through a temporary file in the same folder and move it into place.

    A failed write never leaves a partial file behind.
    """
    filename = Path(filename)
    filename.parent.mkdir(parents=True, exist_ok=True)
    with NamedTemporaryFile(
        dir=filename.parent, prefix=f".{filename.name}.", suffix=".tmp", delete=False
    ) as tmp:
        tmpname = Path(tmp.name)
        try:
            tmp.write(data)
        except BaseException:
            tmp.close()
            with suppress(OSError):
                tmpname.unlink()
            raise
    replace(tmpname, filename)
    logger.log(INFO1, f"Write: {filename}")


def atomic_write_text(filename: Path | str, text: str) -> None:
    atomic_write_bytes(filename, text.encode("utf-8"))
