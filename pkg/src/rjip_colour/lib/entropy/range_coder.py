"""Carry-propagating range coder with 32-bit registers and adaptive frequency models.

The coder follows the classic byte-oriented layout: `low` may temporarily hold a
33rd bit which is propagated into the cached byte, renormalisation keeps `range`
at or above 2^24, the first emitted byte is always zero and the flush writes five
bytes. The decoder consumes exactly the number of bytes the encoder produced.
"""

from __future__ import annotations

from math import log2
from typing import TYPE_CHECKING

from numba import njit
from numpy import array_equal, asarray, cumsum, empty, int64, ones, searchsorted, uint8

from ...core.exception import ContractError, DecodeError
from ...core.global_parameters import NUMBA_CACHE_ENABLE

if TYPE_CHECKING:
    from collections.abc import Callable

    from numpy.typing import ArrayLike, NDArray

    from ..inpaint import KernelType

MASK32 = 0xFFFFFFFF
TOP = 1 << 24
INCREMENT = 32
RESCALE_LIMIT = 1 << 16

# status codes of the decoding kernel
_TRUNCATED = -1
_UNDERFLOW = -2


class AdaptiveModel:
    """Frequency table over `alphabet` symbols, all counts start at one.

    Each coded symbol adds `INCREMENT`; once the total exceeds `RESCALE_LIMIT` all
    counts are halved rounding up, so no count ever drops to zero.
    """

    __slots__ = ("_freq", "_total")

    _freq: NDArray
    _total: int

    def __init__(self, alphabet: int):
        if alphabet < 1 or alphabet > RESCALE_LIMIT:
            raise ContractError(f"Invalid alphabet size {alphabet}")
        self._freq = ones(alphabet, dtype=int64)
        self._total = alphabet

    @property
    def alphabet(self) -> int:
        return self._freq.size

    @property
    def total(self) -> int:
        return self._total

    @property
    def freq(self) -> NDArray:
        return self._freq

    def cumulative(self, symbol: int) -> tuple[int, int]:
        return int(self._freq[:symbol].sum()), int(self._freq[symbol])

    def find(self, value: int) -> tuple[int, int, int]:
        """Symbol whose cumulative interval contains `value`, with its interval."""
        bounds = cumsum(self._freq)
        symbol = int(searchsorted(bounds, value, side="right"))
        freq = int(self._freq[symbol])
        return symbol, int(bounds[symbol]) - freq, freq

    def update(self, symbol: int) -> None:
        self._freq[symbol] += INCREMENT
        self._total += INCREMENT
        if self._total > RESCALE_LIMIT:
            self._freq = (self._freq + 1) // 2
            self._total = int(self._freq.sum())

    def load(self, freq: NDArray) -> None:
        self._freq = asarray(freq, dtype=int64).copy()
        self._total = int(self._freq.sum())

    def copy(self) -> AdaptiveModel:
        model = AdaptiveModel(self.alphabet)
        model.load(self._freq)
        return model

    def digest(self) -> bytes:
        return self._freq.astype("<i8").tobytes()

    def __eq__(self, other) -> bool:
        if not isinstance(other, AdaptiveModel):
            return NotImplemented
        return array_equal(self._freq, other._freq)

    def __repr__(self) -> str:
        return f"AdaptiveModel(alphabet={self.alphabet}, total={self._total})"


class RangeEncoder:
    __slots__ = ("_low", "_range", "_cache", "_cache_size", "_out")

    def __init__(self):
        self._low = 0
        self._range = MASK32
        self._cache = 0
        self._cache_size = 1
        self._out = bytearray()

    def _shift_low(self) -> None:
        if (self._low & MASK32) < 0xFF000000 or self._low > MASK32:
            carry = self._low >> 32
            temp = self._cache
            while True:
                self._out.append((temp + carry) & 0xFF)
                temp = 0xFF
                self._cache_size -= 1
                if self._cache_size == 0:
                    break
            self._cache = (self._low >> 24) & 0xFF
        self._cache_size += 1
        self._low = (self._low & 0x00FFFFFF) << 8

    def encode(self, cum: int, freq: int, total: int) -> None:
        r = self._range // total
        self._low += r * cum
        self._range = r * freq
        while self._range < TOP:
            self._range <<= 8
            self._shift_low()

    def encode_symbol(self, model: AdaptiveModel, symbol: int) -> None:
        cum, freq = model.cumulative(symbol)
        self.encode(cum, freq, model.total)
        model.update(symbol)

    def finish(self) -> bytes:
        for _ in range(5):
            self._shift_low()
        return bytes(self._out)


class RangeDecoder:
    __slots__ = ("_data", "_pos", "_range", "_code", "_r")

    def __init__(self, data: bytes, offset: int = 0):
        self._data = data
        self._pos = offset
        self._range = MASK32
        self._code = 0
        self._r = 1
        for _ in range(5):
            self._code = ((self._code << 8) | self._next_byte()) & MASK32

    @property
    def position(self) -> int:
        return self._pos

    def _next_byte(self) -> int:
        if self._pos >= len(self._data):
            raise DecodeError("Truncated range-coded payload", offset=self._pos)
        byte = self._data[self._pos]
        self._pos += 1
        return byte

    def get_freq(self, total: int) -> int:
        self._r = self._range // total
        value = self._code // self._r
        if value >= total:
            raise DecodeError("Range underflow", offset=self._pos)
        return value

    def decode(self, cum: int, freq: int) -> None:
        self._code -= self._r * cum
        self._range = self._r * freq
        while self._range < TOP:
            self._code = ((self._code << 8) | self._next_byte()) & MASK32
            self._range <<= 8

    def decode_symbol(self, model: AdaptiveModel) -> int:
        symbol, cum, freq = model.find(self.get_freq(model.total))
        self.decode(cum, freq)
        model.update(symbol)
        return symbol


#
# Kernels over arrays: one adaptive model per column of `symbols`
#
@njit(cache=NUMBA_CACHE_ENABLE, inline="always")
def _update_model(freq: NDArray, totals: NDArray, channel: int, symbol: int) -> None:
    freq[channel, symbol] += INCREMENT
    totals[channel] += INCREMENT
    if totals[channel] > RESCALE_LIMIT:
        total = 0
        for s in range(freq.shape[1]):
            freq[channel, s] = (freq[channel, s] + 1) // 2
            total += freq[channel, s]
        totals[channel] = total


@njit(cache=NUMBA_CACHE_ENABLE, inline="always")
def _shift_low(low: int, cache: int, cache_size: int, out: NDArray, pos: int):
    if (low & MASK32) < 0xFF000000 or low > MASK32:
        carry = low >> 32
        temp = cache
        while True:
            if pos >= out.size:
                return low, cache, cache_size, -1
            out[pos] = (temp + carry) & 0xFF
            pos += 1
            temp = 0xFF
            cache_size -= 1
            if cache_size == 0:
                break
        cache = (low >> 24) & 0xFF
    cache_size += 1
    low = (low & 0x00FFFFFF) << 8
    return low, cache, cache_size, pos


def _encode_python(symbols: NDArray, freq: NDArray, totals: NDArray, out: NDArray) -> int:
    """Returns the number of bytes written or -1 when `out` is too small."""
    nsymbols, nchannels = symbols.shape
    low = 0
    rng = MASK32
    cache = 0
    cache_size = 1
    pos = 0
    for i in range(nsymbols):
        for c in range(nchannels):
            s = symbols[i, c]
            cum = 0
            for t in range(s):
                cum += freq[c, t]
            r = rng // totals[c]
            low += r * cum
            rng = r * freq[c, s]
            while rng < TOP:
                rng <<= 8
                low, cache, cache_size, pos = _shift_low(low, cache, cache_size, out, pos)
                if pos < 0:
                    return -1
            _update_model(freq, totals, c, s)
    for _ in range(5):
        low, cache, cache_size, pos = _shift_low(low, cache, cache_size, out, pos)
        if pos < 0:
            return -1
    return pos


def _decode_python(
    data: NDArray, pos: int, freq: NDArray, totals: NDArray, symbols: NDArray
) -> int:
    """Fills `symbols` and returns the position after the payload or a negative status."""
    nsymbols, nchannels = symbols.shape
    if data.size - pos < 5:
        return _TRUNCATED
    rng = MASK32
    code = 0
    for _ in range(5):
        code = ((code << 8) | int(data[pos])) & MASK32
        pos += 1
    for i in range(nsymbols):
        for c in range(nchannels):
            total = totals[c]
            r = rng // total
            value = code // r
            if value >= total:
                return _UNDERFLOW
            s = 0
            cum = 0
            while cum + freq[c, s] <= value:
                cum += freq[c, s]
                s += 1
            code -= r * cum
            rng = r * freq[c, s]
            while rng < TOP:
                if pos >= data.size:
                    return _TRUNCATED
                code = ((code << 8) | int(data[pos])) & MASK32
                pos += 1
                rng <<= 8
            symbols[i, c] = s
            _update_model(freq, totals, c, s)
    return pos


_encode_numba: Callable = njit(cache=NUMBA_CACHE_ENABLE)(_encode_python)
_decode_numba: Callable = njit(cache=NUMBA_CACHE_ENABLE)(_decode_python)

_encode_kernels: dict[str, Callable] = {"python": _encode_python, "numba": _encode_numba}
_decode_kernels: dict[str, Callable] = {"python": _decode_python, "numba": _decode_numba}


def _as_models(models: AdaptiveModel | list[AdaptiveModel]) -> list[AdaptiveModel]:
    if isinstance(models, AdaptiveModel):
        return [models]
    models = list(models)
    if not models or len({model.alphabet for model in models}) != 1:
        raise ContractError("Expect one or more models over the same alphabet")
    return models


def _check_symbols(symbols: NDArray, alphabet: int) -> None:
    if symbols.size and (symbols.min() < 0 or symbols.max() >= alphabet):
        raise ContractError(f"Symbols must lie in [0, {alphabet - 1}]")


def range_encode_channels(
    symbols: ArrayLike,
    models: AdaptiveModel | list[AdaptiveModel],
    *,
    hook: Callable[[int, AdaptiveModel], None] | None = None,
    function: KernelType = "numba",
) -> bytes:
    """Code an `(n, C)` array row by row, column `c` with `models[c]`.

    The models are adapted in place. With a `hook` the coding runs through
    `RangeEncoder` and the hook is called after every model update.
    """
    models = _as_models(models)
    symbols = asarray(symbols, dtype=int64)
    if symbols.ndim == 1:
        symbols = symbols[:, None]
    if symbols.shape[1] != len(models):
        raise ContractError(f"Expect {len(models)} columns, got {symbols.shape[1]}")
    _check_symbols(symbols, models[0].alphabet)

    if hook is not None:
        encoder = RangeEncoder()
        index = 0
        for row in symbols:
            for model, symbol in zip(models, row):
                encoder.encode_symbol(model, int(symbol))
                hook(index, model)
                index += 1
        return encoder.finish()

    freq = empty((len(models), models[0].alphabet), dtype=int64)
    for c, model in enumerate(models):
        freq[c] = model.freq
    totals = freq.sum(axis=1)
    out = empty(3 * symbols.size + 16, dtype=uint8)
    nbytes = _encode_kernels[function](symbols, freq, totals, out)
    if nbytes < 0:
        raise RuntimeError("Range coder output buffer overflow")
    for c, model in enumerate(models):
        model.load(freq[c])
    return out[:nbytes].tobytes()


def range_decode_channels(
    data: bytes,
    models: AdaptiveModel | list[AdaptiveModel],
    count: int,
    *,
    offset: int = 0,
    hook: Callable[[int, AdaptiveModel], None] | None = None,
    function: KernelType = "numba",
) -> NDArray:
    """Inverse of `range_encode_channels`; returns `(count, C)` symbols."""
    models = _as_models(models)
    if count < 0:
        raise ContractError(f"Invalid symbol count {count}")

    if hook is not None:
        decoder = RangeDecoder(data, offset)
        symbols = empty((count, len(models)), dtype=int64)
        index = 0
        for i in range(count):
            for c, model in enumerate(models):
                symbols[i, c] = decoder.decode_symbol(model)
                hook(index, model)
                index += 1
        return symbols

    freq = empty((len(models), models[0].alphabet), dtype=int64)
    for c, model in enumerate(models):
        freq[c] = model.freq
    totals = freq.sum(axis=1)
    symbols = empty((count, len(models)), dtype=int64)
    raw = asarray(bytearray(data), dtype=uint8)
    status = _decode_kernels[function](raw, offset, freq, totals, symbols)
    if status == _TRUNCATED:
        raise DecodeError("Truncated range-coded payload", offset=len(data))
    if status == _UNDERFLOW:
        raise DecodeError("Range underflow", offset=offset)
    for c, model in enumerate(models):
        model.load(freq[c])
    return symbols


def range_encode(
    symbols: ArrayLike, model: AdaptiveModel | int, *, function: KernelType = "numba", hook=None
) -> bytes:
    if isinstance(model, int):
        model = AdaptiveModel(model)
    symbols = asarray(symbols, dtype=int64).reshape(-1)
    return range_encode_channels(symbols, model, hook=hook, function=function)


def range_decode(
    data: bytes,
    model: AdaptiveModel | int,
    count: int,
    *,
    offset: int = 0,
    function: KernelType = "numba",
    hook=None,
) -> NDArray:
    if isinstance(model, int):
        model = AdaptiveModel(model)
    return range_decode_channels(
        data, model, count, offset=offset, hook=hook, function=function
    ).reshape(-1)


def ideal_code_length(symbols: ArrayLike, alphabet: int) -> float:
    """Bits spent by an ideal coder driven by a fresh `AdaptiveModel`."""
    model = AdaptiveModel(alphabet)
    bits = 0.0
    for symbol in asarray(symbols, dtype=int64).reshape(-1):
        bits -= log2(model.freq[symbol] / model.total)
        model.update(int(symbol))
    return bits
