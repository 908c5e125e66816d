from __future__ import annotations

from typing import TYPE_CHECKING

from numpy import asarray, int64

from ...core.exception import ContractError, DecodeError
from .payload import METHOD_STORED, choose_shorter, read_method, unpack_symbols
from .range_coder import AdaptiveModel, range_decode_channels, range_encode_channels

if TYPE_CHECKING:
    from collections.abc import Callable

    from numpy.typing import ArrayLike, NDArray

    from ..inpaint import KernelType


def _as_columns(array: ArrayLike) -> NDArray:
    array = asarray(array, dtype=int64)
    if array.ndim == 1:
        array = array[:, None]
    if array.ndim != 2:
        raise ContractError(f"Expect an (n,) or (n, C) array, got {array.shape}")
    return array


def encode_residuals(
    residuals: ArrayLike,
    q: int,
    *,
    hook: Callable | None = None,
    function: KernelType = "numba",
) -> bytes:
    """Payload for `(n, C)` residuals in {0, ..., q-1}, one adaptive model per channel."""
    residuals = _as_columns(residuals)
    models = [AdaptiveModel(q) for _ in range(residuals.shape[1])]
    coded = range_encode_channels(residuals, models, hook=hook, function=function)
    return choose_shorter(coded, residuals, q)


def decode_residuals(
    payload: bytes,
    count: int,
    nchannels: int,
    q: int,
    *,
    hook: Callable | None = None,
    function: KernelType = "numba",
) -> NDArray:
    """Inverse of `encode_residuals`; the models never depend on predictions."""
    if read_method(payload) == METHOD_STORED:
        return unpack_symbols(payload, count * nchannels, q, offset=1).reshape(count, nchannels)
    models = [AdaptiveModel(q) for _ in range(nchannels)]
    return range_decode_channels(
        payload, models, count, offset=1, hook=hook, function=function
    )


def residual_encode(
    levels: ArrayLike, predictions: ArrayLike, q: int, *, function: KernelType = "numba"
) -> bytes:
    levels = _as_columns(levels)
    predictions = _as_columns(predictions)
    if levels.shape != predictions.shape:
        raise ContractError(f"Shape mismatch: {levels.shape} vs {predictions.shape}")
    for name, array in (("levels", levels), ("predictions", predictions)):
        if array.size and (array.min() < 0 or array.max() >= q):
            raise ContractError(f"{name} must lie in [0, {q - 1}]")
    return encode_residuals((levels - predictions) % q, q, function=function)


def residual_decode(
    payload: bytes, predictions: ArrayLike, q: int, *, function: KernelType = "numba"
) -> NDArray:
    flat = asarray(predictions).ndim == 1
    predictions = _as_columns(predictions)
    residuals = decode_residuals(
        payload, predictions.shape[0], predictions.shape[1], q, function=function
    )
    if residuals.shape != predictions.shape:
        raise DecodeError("Residual count mismatch")
    levels = (predictions + residuals) % q
    return levels[:, 0] if flat else levels
