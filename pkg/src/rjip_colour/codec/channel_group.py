"""Coding of one channel group: a mask shared by one to three planes.

Scalar groups use joint inpainting and prediction. Mask points are visited in grid
order, each is predicted from the Shepard average of the points coded before it,
the prediction is quantised and only the level difference modulo q is stored.
The final |K| fixes σ on both sides. Vector groups store codebook labels with the
two-dimensional PPM coder instead.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

from numba import njit
from numpy import asarray, empty, float64, int64

from ..core.exception import ContractError, DecodeError
from ..core.global_parameters import FALLBACK_VALUE, NUMBA_CACHE_ENABLE
from ..lib.entropy import decode_residuals, encode_residuals, ppm2d_decode, ppm2d_encode
from ..lib.inpaint import (
    AccumulatorField,
    KnownPixels,
    _add_pixel,
    _predict,
    compute_sigma,
    reconstruct_from_values,
    shepard_weights,
)
from ..lib.quantize import Codebook, UniformQuantizer, assign_labels
from ..lib.tonal import _dequantize, _level_of

if TYPE_CHECKING:
    from collections.abc import Callable

    from numpy.typing import ArrayLike, NDArray

    from ..lib.inpaint import KernelType, ShepardWeights
    from ..lib.mask import RegularGrid


def group_weights(grid: RegularGrid) -> ShepardWeights:
    return shepard_weights(compute_sigma(grid.width, grid.height, grid.size))


#
# Prediction kernels
#
def _residuals_python(
    xs: NDArray,
    ys: NDArray,
    levels: NDArray,
    v: NDArray,
    weight_sum: NDArray,
    window: NDArray,
    half: int,
    q: int,
    fallback: float,
    residuals: NDArray,
) -> None:
    nchannels = levels.shape[1]
    prediction = empty(nchannels, dtype=float64)
    value = empty(nchannels, dtype=float64)
    for k in range(xs.size):
        _predict(v, weight_sum, xs[k], ys[k], fallback, prediction)
        for c in range(nchannels):
            residuals[k, c] = (levels[k, c] - _level_of(prediction[c], q)) % q
            value[c] = _dequantize(levels[k, c], q)
        _add_pixel(v, weight_sum, window, half, xs[k], ys[k], value)


def _levels_python(
    xs: NDArray,
    ys: NDArray,
    residuals: NDArray,
    v: NDArray,
    weight_sum: NDArray,
    window: NDArray,
    half: int,
    q: int,
    fallback: float,
    levels: NDArray,
) -> None:
    nchannels = residuals.shape[1]
    prediction = empty(nchannels, dtype=float64)
    value = empty(nchannels, dtype=float64)
    for k in range(xs.size):
        _predict(v, weight_sum, xs[k], ys[k], fallback, prediction)
        for c in range(nchannels):
            levels[k, c] = (_level_of(prediction[c], q) + residuals[k, c]) % q
            value[c] = _dequantize(levels[k, c], q)
        _add_pixel(v, weight_sum, window, half, xs[k], ys[k], value)


_residuals_numba: Callable = njit(cache=NUMBA_CACHE_ENABLE)(_residuals_python)
_levels_numba: Callable = njit(cache=NUMBA_CACHE_ENABLE)(_levels_python)

_residuals_kernels: dict[str, Callable] = {"python": _residuals_python, "numba": _residuals_numba}
_levels_kernels: dict[str, Callable] = {"python": _levels_python, "numba": _levels_numba}


def predictive_residuals(
    grid: RegularGrid, levels: ArrayLike, q: int, *, function: KernelType = "numba"
) -> tuple[NDArray, NDArray]:
    """Residuals of the progressive prediction and the reconstruction it leaves behind."""
    levels = asarray(levels, dtype=int64)
    xs, ys = grid.positions()
    weights = group_weights(grid)
    field = AccumulatorField(levels.shape[1], grid.width, grid.height, weights, function=function)
    residuals = empty(levels.shape, dtype=int64)
    _residuals_kernels[function](
        xs,
        ys,
        levels,
        field.v,
        field.weight_sum,
        weights.window,
        weights.half,
        q,
        FALLBACK_VALUE,
        residuals,
    )
    known = KnownPixels(xs, ys, UniformQuantizer(q).dequantize(levels))
    return residuals, field.reconstruct(known)


def levels_from_residuals(
    grid: RegularGrid, residuals: ArrayLike, q: int, *, function: KernelType = "numba"
) -> tuple[NDArray, NDArray]:
    """Inverse of `predictive_residuals`: stored levels and the reconstruction."""
    residuals = asarray(residuals, dtype=int64)
    xs, ys = grid.positions()
    weights = group_weights(grid)
    field = AccumulatorField(
        residuals.shape[1], grid.width, grid.height, weights, function=function
    )
    levels = empty(residuals.shape, dtype=int64)
    _levels_kernels[function](
        xs,
        ys,
        residuals,
        field.v,
        field.weight_sum,
        weights.window,
        weights.half,
        q,
        FALLBACK_VALUE,
        levels,
    )
    known = KnownPixels(xs, ys, UniformQuantizer(q).dequantize(levels))
    return levels, field.reconstruct(known)


#
# Channel groups
#
@dataclass
class GroupEncoding:
    """A coded channel group together with everything the encoder learned on the way."""

    grid: RegularGrid
    levels: int
    values: NDArray
    symbols: NDArray
    payload: bytes
    reconstruction: NDArray
    sse: float
    codebook: Codebook | None = None

    @property
    def h_fixed(self) -> int:
        return self.grid.h_fixed

    @property
    def nbytes(self) -> int:
        """Payload plus the codebook it needs in the header."""
        extra = 0 if self.codebook is None else len(self.codebook.to_bytes())
        return len(self.payload) + extra

    @property
    def nchannels(self) -> int:
        return self.values.shape[1]


def _sse(planes: NDArray, reconstruction: NDArray) -> float:
    diff = planes - reconstruction
    return float((diff * diff).sum())


def _check_planes(planes: ArrayLike, grid: RegularGrid) -> NDArray:
    planes = asarray(planes, dtype=float64)
    if planes.ndim == 2:
        planes = planes[None]
    if planes.ndim != 3 or planes.shape[1:] != (grid.height, grid.width):
        raise ContractError(
            f"Planes of shape {planes.shape} do not match the grid {grid.width}x{grid.height}"
        )
    return planes


def label_alphabet(codebook: Codebook) -> int:
    return max(codebook.size, 2)


def encode_scalar_levels(
    planes: ArrayLike,
    grid: RegularGrid,
    levels: ArrayLike,
    q: int,
    *,
    function: KernelType = "numba",
) -> GroupEncoding:
    """Code already chosen levels `(n, C)` of a scalar group."""
    planes = _check_planes(planes, grid)
    levels = asarray(levels, dtype=int64).reshape(grid.size, planes.shape[0])
    residuals, reconstruction = predictive_residuals(grid, levels, q, function=function)
    payload = encode_residuals(residuals, q, function=function)
    values = UniformQuantizer(q).dequantize(levels)
    return GroupEncoding(
        grid, q, values, levels, payload, reconstruction, _sse(planes, reconstruction)
    )


def encode_vector_labels(
    planes: ArrayLike,
    grid: RegularGrid,
    labels: ArrayLike,
    codebook: Codebook,
    *,
    function: KernelType = "numba",
) -> GroupEncoding:
    planes = _check_planes(planes, grid)
    labels = asarray(labels, dtype=int64).reshape(-1)
    if labels.size != grid.size:
        raise ContractError(f"Expect {grid.size} labels, got {labels.size}")
    payload = ppm2d_encode(labels.reshape(grid.shape), label_alphabet(codebook))
    xs, ys = grid.positions()
    values = codebook.colours(labels)
    reconstruction = reconstruct_from_values(
        xs, ys, values, grid.width, grid.height, group_weights(grid), function=function
    )
    return GroupEncoding(
        grid,
        codebook.size,
        values,
        labels,
        payload,
        reconstruction,
        _sse(planes, reconstruction),
        codebook,
    )


def encode_channel_group(
    planes: ArrayLike,
    grid: RegularGrid,
    admissible: UniformQuantizer | Codebook,
    *,
    labels: ArrayLike | None = None,
    function: KernelType = "numba",
) -> GroupEncoding:
    """Quantise the mask values of `planes` and code them.

    Without `labels` the vector case labels each mask colour with its nearest centre.
    """
    planes = _check_planes(planes, grid)
    xs, ys = grid.positions()
    colours = planes[:, ys, xs].T
    match admissible:
        case UniformQuantizer():
            levels = admissible.quantize(colours)
            return encode_scalar_levels(planes, grid, levels, admissible.q, function=function)
        case Codebook():
            if labels is None:
                labels = assign_labels(colours, admissible, function=function)
            return encode_vector_labels(planes, grid, labels, admissible, function=function)
    raise ContractError(f"Unsupported quantiser {admissible!r}")


def decode_channel_group(
    payload: bytes,
    grid: RegularGrid,
    nchannels: int,
    admissible: UniformQuantizer | Codebook,
    *,
    function: KernelType = "numba",
) -> tuple[NDArray, NDArray]:
    """Stored values `(n, C)` and the reconstruction `(C, height, width)` of a group."""
    match admissible:
        case UniformQuantizer():
            residuals = decode_residuals(
                payload, grid.size, nchannels, admissible.q, function=function
            )
            levels, reconstruction = levels_from_residuals(
                grid, residuals, admissible.q, function=function
            )
            return admissible.dequantize(levels), reconstruction
        case Codebook():
            if nchannels != 3:
                raise ContractError("Codebook groups hold three channels")
            labels = ppm2d_decode(payload, grid.rows, grid.cols, label_alphabet(admissible))
            labels = labels.reshape(-1)
            if labels.size and labels.max() >= admissible.size:
                raise DecodeError(f"Label exceeds the codebook size {admissible.size}")
            xs, ys = grid.positions()
            values = admissible.colours(labels)
            reconstruction = reconstruct_from_values(
                xs, ys, values, grid.width, grid.height, group_weights(grid), function=function
            )
            return values, reconstruction
    raise ContractError(f"Unsupported quantiser {admissible!r}")
