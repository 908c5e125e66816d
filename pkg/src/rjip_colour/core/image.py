from __future__ import annotations

from enum import IntEnum
from pathlib import Path
from typing import TYPE_CHECKING, NamedTuple

from numpy import array, asarray, clip, float64, frombuffer, log10, rint, uint8, unique
from numpy.linalg import inv

from ..tools.logger import INFO1, logger
from .exception import ContractError, FormatError

if TYPE_CHECKING:
    from numpy.typing import ArrayLike, NDArray


class ColourSpace(IntEnum):
    RGB = 0
    YCbCr = 1


class PixelCoord(NamedTuple):
    x: int
    y: int


# Full-range BT.601 (JPEG convention)
_RGB_TO_YCBCR = array(
    [
        [0.299, 0.587, 0.114],
        [-0.168736, -0.331264, 0.5],
        [0.5, -0.418688, -0.081312],
    ]
)
_YCBCR_OFFSET = array([0.0, 128.0, 128.0])
_YCBCR_TO_RGB = inv(_RGB_TO_YCBCR)


class RasterImage:
    """Three planes of real-valued tonal samples in [0, 255].

    The planes are kept as one read-only float64 array of shape `(3, height, width)`.
    Plane 0 is R for `ColourSpace.RGB` and Y for `ColourSpace.YCbCr`.
    """

    __slots__ = ("_planes", "_space")

    _planes: NDArray
    _space: ColourSpace

    def __init__(self, planes: ArrayLike, space: ColourSpace = ColourSpace.RGB):
        planes = array(planes, dtype=float64)
        if planes.ndim != 3 or planes.shape[0] != 3:
            raise ContractError(f"Expect planes of shape (3, height, width), got {planes.shape}")
        if planes.shape[1] < 1 or planes.shape[2] < 1:
            raise ContractError(f"Empty image of shape {planes.shape}")
        if planes.min() < 0.0 or planes.max() > 255.0:
            raise ContractError(
                f"Samples must lie in [0, 255], got [{planes.min()}, {planes.max()}]"
            )
        planes.flags.writeable = False
        self._planes = planes
        self._space = ColourSpace(space)

    @classmethod
    def from_pixels(cls, pixels: ArrayLike, space: ColourSpace = ColourSpace.RGB) -> RasterImage:
        """Build from an interleaved `(height, width, 3)` array."""
        pixels = asarray(pixels)
        if pixels.ndim != 3 or pixels.shape[2] != 3:
            raise ContractError(f"Expect pixels of shape (height, width, 3), got {pixels.shape}")
        return cls(pixels.transpose(2, 0, 1), space)

    @property
    def planes(self) -> NDArray:
        return self._planes

    @property
    def space(self) -> ColourSpace:
        return self._space

    @property
    def width(self) -> int:
        return self._planes.shape[2]

    @property
    def height(self) -> int:
        return self._planes.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.height, self.width

    def pixels(self) -> NDArray:
        """Interleaved `(height, width, 3)` view."""
        return self._planes.transpose(1, 2, 0)

    def with_planes(self, planes: ArrayLike, space: ColourSpace | None = None) -> RasterImage:
        return RasterImage(planes, self._space if space is None else space)

    def __eq__(self, other) -> bool:
        if not isinstance(other, RasterImage):
            return NotImplemented
        return (
            self._space == other._space
            and self._planes.shape == other._planes.shape
            and bool((self._planes == other._planes).all())
        )

    def __repr__(self) -> str:
        return f"RasterImage({self.width}x{self.height}, {self._space.name})"


def to_uint8(image: RasterImage) -> NDArray:
    """Rounded and clipped 8-bit copy of the planes, shape `(3, height, width)`."""
    return clip(rint(image.planes), 0, 255).astype(uint8)


#
# PPM
#
_WHITESPACE = b" \t\n\r\v\f"


def _read_token(data: bytes, pos: int) -> tuple[bytes, int]:
    """Skip whitespace and comments, return the next header token and the position after it."""
    size = len(data)
    while pos < size:
        if data[pos] in _WHITESPACE:
            pos += 1
        elif data[pos] == ord("#"):
            while pos < size and data[pos] not in b"\r\n":
                pos += 1
        else:
            break
    start = pos
    while pos < size and data[pos] not in _WHITESPACE and data[pos] != ord("#"):
        pos += 1
    if start == pos:
        raise FormatError("Unexpected end of PPM header", offset=start)
    return data[start:pos], pos


def _read_int(data: bytes, pos: int, what: str) -> tuple[int, int]:
    token, end = _read_token(data, pos)
    if not token.isdigit():
        raise FormatError(f"Invalid PPM {what} {token!r}", offset=end - len(token))
    return int(token), end


def load_ppm(data: bytes) -> RasterImage:
    """Parse a binary P6 PPM with maxval 255."""
    data = bytes(data)
    magic, pos = _read_token(data, 0)
    if magic != b"P6":
        raise FormatError(f"Expect P6 magic, got {magic[:8]!r}", offset=0)
    width, pos = _read_int(data, pos, "width")
    height, pos = _read_int(data, pos, "height")
    maxval, pos = _read_int(data, pos, "maxval")
    if width < 1 or height < 1:
        raise FormatError(f"Invalid PPM dimensions {width}x{height}", offset=pos)
    if maxval != 255:
        raise FormatError(f"Only maxval 255 is supported, got {maxval}", offset=pos)
    if pos >= len(data) or data[pos] not in _WHITESPACE:
        raise FormatError("Expect a single whitespace after maxval", offset=pos)
    pos += 1

    nbytes = 3 * width * height
    available = len(data) - pos
    if available < nbytes:
        raise FormatError(
            f"Truncated PPM payload: expect {nbytes} bytes, got {available}", offset=len(data)
        )
    if available > nbytes:
        logger.warning(f"Ignore {available - nbytes} trailing bytes after the PPM payload")

    pixels = frombuffer(data, dtype=uint8, count=nbytes, offset=pos).reshape(height, width, 3)
    return RasterImage.from_pixels(pixels)


def save_ppm(image: RasterImage) -> bytes:
    if image.space != ColourSpace.RGB:
        raise ContractError(f"PPM stores RGB images only, got {image.space.name}")
    header = f"P6\n{image.width} {image.height}\n255\n".encode("ascii")
    return header + to_uint8(image).transpose(1, 2, 0).tobytes()


def read_ppm(filename: Path | str) -> RasterImage:
    data = Path(filename).read_bytes()
    logger.log(INFO1, f"Read: {filename}")
    return load_ppm(data)


def write_ppm(filename: Path | str, image: RasterImage) -> None:
    Path(filename).write_bytes(save_ppm(image))
    logger.log(INFO1, f"Write: {filename}")


def read_image(filename: Path | str) -> RasterImage:
    """Read a PPM directly or any other format through Pillow."""
    filename = Path(filename)
    if filename.suffix.lower() in {".ppm", ".pnm"}:
        return read_ppm(filename)

    from PIL import Image

    with Image.open(filename) as img:
        pixels = asarray(img.convert("RGB"))
    logger.log(INFO1, f"Read: {filename}")
    return RasterImage.from_pixels(pixels)


#
# Colour spaces
#
def _check_space(image: RasterImage, space: ColourSpace) -> None:
    if image.space != space:
        raise ContractError(f"Expect a {space.name} image, got {image.space.name}")


def rgb_to_ycbcr(image: RasterImage) -> RasterImage:
    _check_space(image, ColourSpace.RGB)
    planes = _RGB_TO_YCBCR @ image.planes.reshape(3, -1) + _YCBCR_OFFSET[:, None]
    planes = clip(planes, 0.0, 255.0).reshape(image.planes.shape)
    return RasterImage(planes, ColourSpace.YCbCr)


def ycbcr_to_rgb(image: RasterImage) -> RasterImage:
    _check_space(image, ColourSpace.YCbCr)
    planes = _YCBCR_TO_RGB @ (image.planes.reshape(3, -1) - _YCBCR_OFFSET[:, None])
    planes = clip(planes, 0.0, 255.0).reshape(image.planes.shape)
    return RasterImage(planes, ColourSpace.RGB)


#
# Metrics
#
def _check_comparable(a: RasterImage, b: RasterImage) -> None:
    if a.shape != b.shape:
        raise ContractError(f"Dimension mismatch: {a.width}x{a.height} vs {b.width}x{b.height}")
    _check_space(a, ColourSpace.RGB)
    _check_space(b, ColourSpace.RGB)


def mse(a: RasterImage, b: RasterImage) -> float:
    """Mean squared error over all 3·m·n RGB samples."""
    _check_comparable(a, b)
    diff = a.planes - b.planes
    return float((diff * diff).sum() / diff.size)


def psnr(a: RasterImage, b: RasterImage) -> float:
    error = mse(a, b)
    if error == 0.0:
        return float("inf")
    return float(10.0 * log10(255.0**2 / error))


def distinct_colours(colours: RasterImage | ArrayLike) -> int:
    """Number of distinct 8-bit colour triples of an image or of an `(n, 3)` array."""
    if isinstance(colours, RasterImage):
        triples = to_uint8(colours).reshape(3, -1).T
    else:
        triples = clip(rint(asarray(colours, dtype=float64)), 0, 255).astype(uint8)
        if triples.ndim != 2 or triples.shape[1] != 3:
            raise ContractError(f"Expect colours of shape (n, 3), got {triples.shape}")
    if triples.shape[0] == 0:
        return 0
    return int(unique(triples, axis=0).shape[0])
