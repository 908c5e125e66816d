from __future__ import annotations

from functools import lru_cache
from math import ceil, pi, sqrt
from typing import TYPE_CHECKING, Literal

from numba import njit
from numpy import (
    arange,
    asarray,
    clip,
    empty,
    errstate,
    exp,
    float64,
    int64,
    unique,
    where,
    zeros,
)

from ..core.exception import ContractError
from ..core.global_parameters import (
    FALLBACK_VALUE,
    NUMBA_CACHE_ENABLE,
    SIGMA_DECIMALS,
    TRUNCATION_FACTOR,
)
from ..core.image import ColourSpace, PixelCoord, RasterImage

if TYPE_CHECKING:
    from collections.abc import Callable, Sequence

    from numpy.typing import ArrayLike, NDArray

KernelType = Literal["python", "numba"]


def compute_sigma(width: int, height: int, mask_size: int) -> float:
    """Standard deviation of the Shepard Gaussian tied to the mask density."""
    if mask_size < 1:
        raise ContractError(f"Mask size must be positive, got {mask_size}")
    return sqrt((width * height) / (pi * mask_size))


class ShepardWeights:
    """Truncated Gaussian on the integer offset lattice.

    `window[dy + half, dx + half]` holds `exp(-(dx²+dy²)/(2σ²))` for offsets within
    `TRUNCATION_FACTOR·σ` and exactly zero beyond.
    """

    __slots__ = ("_sigma", "_radius", "_half", "_window")

    _sigma: float
    _radius: float
    _half: int
    _window: NDArray

    def __init__(self, sigma: float):
        if not sigma > 0.0:
            raise ContractError(f"σ must be positive, got {sigma}")
        self._sigma = sigma
        self._radius = TRUNCATION_FACTOR * sigma
        self._half = max(int(ceil(self._radius)), 0)
        offsets = arange(-self._half, self._half + 1, dtype=float64)
        dist2 = offsets[None, :] ** 2 + offsets[:, None] ** 2
        window = exp(-dist2 / (2.0 * sigma * sigma))
        window[dist2 > self._radius * self._radius] = 0.0
        window.flags.writeable = False
        self._window = window

    @property
    def sigma(self) -> float:
        return self._sigma

    @property
    def radius(self) -> float:
        return self._radius

    @property
    def half(self) -> int:
        return self._half

    @property
    def window(self) -> NDArray:
        return self._window

    def weight(self, dx: int, dy: int) -> float:
        if abs(dx) > self._half or abs(dy) > self._half:
            return 0.0
        return float(self._window[dy + self._half, dx + self._half])

    def __repr__(self) -> str:
        return f"ShepardWeights(σ={self._sigma:.6f}, half={self._half})"


@lru_cache(maxsize=64)
def _cached_weights(key: int) -> ShepardWeights:
    return ShepardWeights(key / 10**SIGMA_DECIMALS)


def shepard_weights(sigma: float) -> ShepardWeights:
    """Weights for σ rounded to 1e-6; cached so repeated encodes share the window."""
    key = int(round(sigma * 10**SIGMA_DECIMALS))
    if key < 1:
        raise ContractError(f"σ={sigma} is too small")
    return _cached_weights(key)


class KnownPixels:
    """Mask positions and the per-channel values stored there."""

    __slots__ = ("_xs", "_ys", "_values")

    _xs: NDArray
    _ys: NDArray
    _values: NDArray

    def __init__(self, xs: ArrayLike, ys: ArrayLike, values: ArrayLike):
        xs = asarray(xs, dtype=int64)
        ys = asarray(ys, dtype=int64)
        values = asarray(values, dtype=float64)
        if values.ndim == 1:
            values = values[:, None]
        if xs.ndim != 1 or xs.shape != ys.shape or values.shape[0] != xs.size:
            raise ContractError(
                f"Inconsistent known pixels: {xs.shape}, {ys.shape}, {values.shape}"
            )
        if xs.size == 0:
            raise ContractError("The inpainting mask is empty")
        if values.min() < 0.0 or values.max() > 255.0:
            raise ContractError("Known values must lie in [0, 255]")
        self._xs = xs
        self._ys = ys
        self._values = values

    @classmethod
    def from_coords(
        cls, positions: Sequence[PixelCoord], values: ArrayLike
    ) -> KnownPixels:
        xs = [pos.x for pos in positions]
        ys = [pos.y for pos in positions]
        return cls(xs, ys, values)

    @property
    def xs(self) -> NDArray:
        return self._xs

    @property
    def ys(self) -> NDArray:
        return self._ys

    @property
    def values(self) -> NDArray:
        return self._values

    @property
    def nchannels(self) -> int:
        return self._values.shape[1]

    def __len__(self) -> int:
        return self._xs.size

    def check(self, width: int, height: int) -> None:
        if self._xs.min() < 0 or self._xs.max() >= width:
            raise ContractError(f"Known pixel outside of the image width {width}")
        if self._ys.min() < 0 or self._ys.max() >= height:
            raise ContractError(f"Known pixel outside of the image height {height}")
        if unique(self._ys * width + self._xs).size != self._xs.size:
            raise ContractError("Known pixel positions are not unique")


#
# Kernels
#
@njit(cache=NUMBA_CACHE_ENABLE, inline="always")
def _add_pixel(
    v: NDArray, weight_sum: NDArray, window: NDArray, half: int, x0: int, y0: int, value: NDArray
) -> None:
    nchannels, height, width = v.shape
    ylo, yhi = max(y0 - half, 0), min(y0 + half + 1, height)
    xlo, xhi = max(x0 - half, 0), min(x0 + half + 1, width)
    for y in range(ylo, yhi):
        wrow = y - y0 + half
        for x in range(xlo, xhi):
            w = window[wrow, x - x0 + half]
            if w == 0.0:
                continue
            weight_sum[y, x] += w
            for c in range(nchannels):
                v[c, y, x] += w * value[c]


@njit(cache=NUMBA_CACHE_ENABLE, inline="always")
def _patch_pixel(v: NDArray, window: NDArray, half: int, x0: int, y0: int, delta: NDArray) -> None:
    nchannels, height, width = v.shape
    ylo, yhi = max(y0 - half, 0), min(y0 + half + 1, height)
    xlo, xhi = max(x0 - half, 0), min(x0 + half + 1, width)
    for y in range(ylo, yhi):
        wrow = y - y0 + half
        for x in range(xlo, xhi):
            w = window[wrow, x - x0 + half]
            if w == 0.0:
                continue
            for c in range(nchannels):
                if delta[c] != 0.0:
                    v[c, y, x] += w * delta[c]


@njit(cache=NUMBA_CACHE_ENABLE, inline="always")
def _predict(
    v: NDArray, weight_sum: NDArray, x: int, y: int, fallback: float, out: NDArray
) -> None:
    wsum = weight_sum[y, x]
    for c in range(v.shape[0]):
        out[c] = v[c, y, x] / wsum if wsum > 0.0 else fallback


def _accumulate_python(
    v: NDArray,
    weight_sum: NDArray,
    window: NDArray,
    half: int,
    xs: NDArray,
    ys: NDArray,
    values: NDArray,
) -> None:
    for k in range(xs.size):
        _add_pixel(v, weight_sum, window, half, xs[k], ys[k], values[k])


_accumulate_numba: Callable = njit(cache=NUMBA_CACHE_ENABLE)(_accumulate_python)

_accumulate_kernels: dict[str, Callable] = {
    "python": _accumulate_python,
    "numba": _accumulate_numba,
}


class AccumulatorField:
    """Running numerator `v` and denominator `W` of the Shepard average.

    Adding known pixels in any order yields the same field; `predict_at` evaluates
    the partial inpainting of whatever has been added so far.
    """

    __slots__ = ("_v", "_weight_sum", "_weights", "_accumulate")

    _v: NDArray
    _weight_sum: NDArray
    _weights: ShepardWeights
    _accumulate: Callable

    def __init__(
        self,
        nchannels: int,
        width: int,
        height: int,
        weights: ShepardWeights,
        *,
        function: KernelType = "numba",
    ):
        if nchannels < 1 or width < 1 or height < 1:
            raise ContractError(f"Invalid accumulator shape ({nchannels}, {height}, {width})")
        self._v = zeros((nchannels, height, width), dtype=float64)
        self._weight_sum = zeros((height, width), dtype=float64)
        self._weights = weights
        try:
            self._accumulate = _accumulate_kernels[function]
        except KeyError as exc:
            raise ContractError(f"Unknown kernel {function}") from exc

    @property
    def v(self) -> NDArray:
        return self._v

    @property
    def weight_sum(self) -> NDArray:
        return self._weight_sum

    @property
    def weights(self) -> ShepardWeights:
        return self._weights

    @property
    def nchannels(self) -> int:
        return self._v.shape[0]

    @property
    def width(self) -> int:
        return self._v.shape[2]

    @property
    def height(self) -> int:
        return self._v.shape[1]

    def add_known_pixel(self, pos: PixelCoord, value: ArrayLike) -> AccumulatorField:
        value = asarray(value, dtype=float64).reshape(self.nchannels)
        _add_pixel(
            self._v,
            self._weight_sum,
            self._weights.window,
            self._weights.half,
            int(pos.x),
            int(pos.y),
            value,
        )
        return self

    def add_known_pixels(self, known: KnownPixels) -> AccumulatorField:
        if known.nchannels != self.nchannels:
            raise ContractError(
                f"Expect {self.nchannels} channels, got {known.nchannels}"
            )
        self._accumulate(
            self._v,
            self._weight_sum,
            self._weights.window,
            self._weights.half,
            known.xs,
            known.ys,
            known.values,
        )
        return self

    def patch_value(self, pos: PixelCoord, delta: ArrayLike) -> AccumulatorField:
        """Account for a change of an already added value; W stays unchanged."""
        delta = asarray(delta, dtype=float64).reshape(self.nchannels)
        _patch_pixel(
            self._v, self._weights.window, self._weights.half, int(pos.x), int(pos.y), delta
        )
        return self

    def predict_at(self, pos: PixelCoord) -> NDArray:
        out = empty(self.nchannels, dtype=float64)
        _predict(self._v, self._weight_sum, int(pos.x), int(pos.y), FALLBACK_VALUE, out)
        return out

    def normalised(self) -> NDArray:
        """`v/W` everywhere, the fallback where nothing contributes.

        A convex combination of values in [0, 255]; the clip only removes rounding excess.
        """
        with errstate(divide="ignore", invalid="ignore"):
            ratio = where(self._weight_sum > 0.0, self._v / self._weight_sum, FALLBACK_VALUE)
        return clip(ratio, 0.0, 255.0)

    def reconstruct(self, known: KnownPixels) -> NDArray:
        """Shepard reconstruction with the known values copied verbatim."""
        planes = self.normalised()
        planes[:, known.ys, known.xs] = known.values.T
        return planes


def reconstruct_from_values(
    xs: NDArray,
    ys: NDArray,
    values: NDArray,
    width: int,
    height: int,
    weights: ShepardWeights,
    *,
    function: KernelType = "numba",
) -> NDArray:
    """Planes `(C, height, width)` inpainted from values stored at `(xs, ys)`.

    Encoder and decoder both reconstruct through this routine.
    """
    known = KnownPixels(xs, ys, values)
    field = AccumulatorField(known.nchannels, width, height, weights, function=function)
    return field.add_known_pixels(known).reconstruct(known)


def shepard_inpaint(
    known: KnownPixels,
    width: int,
    height: int,
    weights: ShepardWeights | None = None,
    *,
    space: ColourSpace = ColourSpace.RGB,
    function: KernelType = "numba",
) -> RasterImage:
    """Inpaint a three-channel image from sparse known pixels.

    σ defaults to `compute_sigma(width, height, len(known))`.
    """
    if len(known) == 0:
        raise ContractError("The inpainting mask is empty")
    if known.nchannels != 3:
        raise ContractError(f"Expect 3 channels, got {known.nchannels}")
    known.check(width, height)
    if weights is None:
        weights = shepard_weights(compute_sigma(width, height, len(known)))
    field = AccumulatorField(3, width, height, weights, function=function)
    return RasterImage(field.add_known_pixels(known).reconstruct(known), space)


def add_known_pixel(
    acc: AccumulatorField, pos: PixelCoord, value: ArrayLike, weights: ShepardWeights | None = None
) -> AccumulatorField:
    if weights is not None and weights is not acc.weights:
        raise ContractError("The accumulator was built with different weights")
    return acc.add_known_pixel(pos, value)


def predict_at(acc: AccumulatorField, pos: PixelCoord) -> NDArray:
    return acc.predict_at(pos)
