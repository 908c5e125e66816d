from __future__ import annotations

from typing import TYPE_CHECKING

from numpy import arange, geomspace, int64, repeat, tile

from ..core.exception import ContractError, FormatError
from ..core.image import PixelCoord

if TYPE_CHECKING:
    from numpy.typing import NDArray

# h is stored as an unsigned 16-bit number with 8 fractional bits
H_FRACTION_BITS = 8
H_SCALE = 1 << H_FRACTION_BITS
H_FIXED_MIN = H_SCALE
H_FIXED_MAX = (1 << 16) - 1


def quantize_h(h: float) -> int:
    """Nearest 8.8 fixed-point representation of the grid spacing."""
    return int(round(h * H_SCALE))


def _count_along(length: int, h_fixed: int) -> int:
    # number of i >= 0 with (i·h_fixed + 128) // 256 < length
    return (H_SCALE * length - H_SCALE // 2 + h_fixed - 1) // h_fixed


def _coordinates_along(length: int, h_fixed: int) -> NDArray:
    steps = arange(_count_along(length, h_fixed), dtype=int64)
    return (steps * h_fixed + H_SCALE // 2) // H_SCALE


class RegularGrid:
    """Regular mask with spacing h given in 8.8 fixed point.

    Grid point (i, j) sits at pixel `(round(i·h), round(j·h))`, rounding half up.
    Points are enumerated row by row; this is the coding order of the codec.
    """

    __slots__ = ("_h_fixed", "_width", "_height", "_xs", "_ys")

    _h_fixed: int
    _width: int
    _height: int
    _xs: NDArray
    _ys: NDArray

    def __init__(self, h_fixed: int, width: int, height: int):
        if width < 1 or height < 1:
            raise ContractError(f"Invalid image dimensions {width}x{height}")
        if not (H_FIXED_MIN <= h_fixed <= H_FIXED_MAX):
            raise ContractError(f"h={h_fixed / H_SCALE} is not representable in 8.8 fixed point")
        if h_fixed > H_SCALE * min(width, height):
            raise ContractError(
                f"h={h_fixed / H_SCALE} exceeds the smaller image side {min(width, height)}"
            )
        self._h_fixed = h_fixed
        self._width = width
        self._height = height
        self._xs = _coordinates_along(width, h_fixed)
        self._ys = _coordinates_along(height, h_fixed)

    @classmethod
    def from_h(cls, h: float, width: int, height: int) -> RegularGrid:
        if not (1.0 <= h <= min(width, height)):
            raise ContractError(f"h={h} must lie in [1, {min(width, height)}]")
        return cls(quantize_h(h), width, height)

    @classmethod
    def from_bytes(cls, data: bytes, width: int, height: int, offset: int = 0) -> RegularGrid:
        if len(data) < offset + 2:
            raise FormatError("Truncated grid spacing", offset=len(data))
        h_fixed = int.from_bytes(data[offset : offset + 2], "big")
        try:
            return cls(h_fixed, width, height)
        except ContractError as exc:
            raise FormatError(str(exc), offset=offset) from exc

    def to_bytes(self) -> bytes:
        return self._h_fixed.to_bytes(2, "big")

    @property
    def h(self) -> float:
        return self._h_fixed / H_SCALE

    @property
    def h_fixed(self) -> int:
        return self._h_fixed

    @property
    def width(self) -> int:
        return self._width

    @property
    def height(self) -> int:
        return self._height

    @property
    def rows(self) -> int:
        return self._ys.size

    @property
    def cols(self) -> int:
        return self._xs.size

    @property
    def shape(self) -> tuple[int, int]:
        return self.rows, self.cols

    @property
    def size(self) -> int:
        return self.rows * self.cols

    def positions(self) -> tuple[NDArray, NDArray]:
        """Column and row indices of all grid points in row-major grid order."""
        return tile(self._xs, self.rows), repeat(self._ys, self.cols)

    def __eq__(self, other) -> bool:
        if not isinstance(other, RegularGrid):
            return NotImplemented
        return (self._h_fixed, self._width, self._height) == (
            other._h_fixed,
            other._width,
            other._height,
        )

    def __hash__(self) -> int:
        return hash((self._h_fixed, self._width, self._height))

    def __repr__(self) -> str:
        return f"RegularGrid(h={self.h:g}, {self.cols}x{self.rows} points)"


def build_regular_mask(width: int, height: int, h: float) -> list[PixelCoord]:
    grid = RegularGrid.from_h(h, width, height)
    xs, ys = grid.positions()
    return [PixelCoord(int(x), int(y)) for x, y in zip(xs, ys)]


def mask_size_for(width: int, height: int, h: float) -> int:
    if width < 1 or height < 1:
        raise ContractError(f"Invalid image dimensions {width}x{height}")
    if not (1.0 <= h <= min(width, height)):
        raise ContractError(f"h={h} must lie in [1, {min(width, height)}]")
    h_fixed = quantize_h(h)
    return _count_along(width, h_fixed) * _count_along(height, h_fixed)


def candidate_h_values(
    h_min: float, h_max: float, samples: int, width: int, height: int
) -> list[int]:
    """Geometrically spaced spacings as distinct fixed-point values, coarse ones last."""
    upper = min(h_max, float(min(width, height)))
    lower = min(max(h_min, 1.0), upper)
    values = {quantize_h(h) for h in geomspace(lower, upper, samples)}
    return sorted(value for value in values if H_FIXED_MIN <= value <= H_FIXED_MAX)
