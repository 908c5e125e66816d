from __future__ import annotations

from typing import TYPE_CHECKING

from numpy import arange, asarray, int64, packbits, uint8, unpackbits

from ...core.exception import ContractError, DecodeError

if TYPE_CHECKING:
    from numpy.typing import ArrayLike, NDArray

# First byte of every entropy payload
METHOD_RANGE = 0
METHOD_STORED = 1


def bits_for(alphabet: int) -> int:
    """Width of a stored symbol: ceil(log2 alphabet), at least 1."""
    if alphabet < 2:
        raise ContractError(f"Alphabet size must be at least 2, got {alphabet}")
    return max((alphabet - 1).bit_length(), 1)


def pack_symbols(symbols: ArrayLike, alphabet: int) -> bytes:
    """Fixed-width big-endian bit packing, MSB first."""
    symbols = asarray(symbols, dtype=int64).reshape(-1)
    nbits = bits_for(alphabet)
    if symbols.size and (symbols.min() < 0 or symbols.max() >= alphabet):
        raise ContractError(f"Symbols must lie in [0, {alphabet - 1}]")
    shifts = arange(nbits - 1, -1, -1, dtype=int64)
    bits = ((symbols[:, None] >> shifts[None, :]) & 1).astype(uint8)
    return packbits(bits.reshape(-1)).tobytes()


def unpack_symbols(data: bytes, count: int, alphabet: int, offset: int = 0) -> NDArray:
    nbits = bits_for(alphabet)
    nbytes = (count * nbits + 7) // 8
    if len(data) - offset < nbytes:
        raise DecodeError(
            f"Truncated stored payload: expect {nbytes} bytes, got {len(data) - offset}",
            offset=len(data),
        )
    raw = asarray(bytearray(data[offset : offset + nbytes]), dtype=uint8)
    bits = unpackbits(raw, count=count * nbits).reshape(count, nbits).astype(int64)
    weights = 1 << arange(nbits - 1, -1, -1, dtype=int64)
    symbols = bits @ weights
    if symbols.size and symbols.max() >= alphabet:
        raise DecodeError(f"Stored symbol exceeds the alphabet size {alphabet}", offset=offset)
    return symbols


def choose_shorter(coded: bytes, symbols: ArrayLike, alphabet: int) -> bytes:
    """Prefix the range-coded body or the stored symbols, whichever is smaller."""
    stored = pack_symbols(symbols, alphabet)
    if len(stored) < len(coded):
        return bytes([METHOD_STORED]) + stored
    return bytes([METHOD_RANGE]) + coded


def read_method(payload: bytes) -> int:
    if not payload:
        raise DecodeError("Empty entropy payload", offset=0)
    method = payload[0]
    if method not in (METHOD_RANGE, METHOD_STORED):
        raise DecodeError(f"Unknown payload method {method}", offset=0)
    return method
