"""Prediction by partial matching over a label grid with two-dimensional contexts.

The context of a grid cell is built from its causal neighbours (left, above,
above-left). Neighbours outside of the grid are dropped and the order-o context is
made of the first o present neighbours, each tagged with its slot, so contexts
from different neighbour layouts never collide. Symbols are searched from the
longest context down to order 0 and finally coded uniformly. Escapes follow the
PPM-C rule: the escape count of a context equals the number of distinct symbols
seen in it. Contexts without statistics are skipped without spending any bits.
Symbol exclusion is not applied.
"""

from __future__ import annotations

from typing import TYPE_CHECKING

from numpy import asarray, empty, int64

from ...core.exception import ContractError, DecodeError
from .payload import METHOD_STORED, choose_shorter, read_method, unpack_symbols
from .range_coder import RangeDecoder, RangeEncoder

if TYPE_CHECKING:
    from collections.abc import Callable

    from numpy.typing import ArrayLike, NDArray

MAX_ORDER = 3
RESCALE_LIMIT = 1 << 16

ContextKey = tuple[tuple[int, int], ...]


class ContextStats:
    """Symbol counts of one context kept in first-seen order."""

    __slots__ = ("counts", "total")

    counts: dict[int, int]
    total: int

    def __init__(self):
        self.counts = {}
        self.total = 0

    @property
    def escape(self) -> int:
        return len(self.counts)

    def interval(self, symbol: int) -> tuple[int, int] | None:
        cum = 0
        for key, count in self.counts.items():
            if key == symbol:
                return cum, count
            cum += count
        return None

    def find(self, value: int) -> tuple[int | None, int, int]:
        """Symbol and interval for `value`; `None` stands for the escape."""
        cum = 0
        for key, count in self.counts.items():
            if value < cum + count:
                return key, cum, count
            cum += count
        return None, self.total, self.escape

    def update(self, symbol: int) -> None:
        self.counts[symbol] = self.counts.get(symbol, 0) + 1
        self.total += 1
        if self.total > RESCALE_LIMIT:
            for key, count in self.counts.items():
                self.counts[key] = (count + 1) // 2
            self.total = sum(self.counts.values())


class PPMModel:
    """Context tables for orders 0 to `max_order`."""

    __slots__ = ("_alphabet", "_max_order", "_tables")

    _alphabet: int
    _max_order: int
    _tables: list[dict[ContextKey, ContextStats]]

    def __init__(self, alphabet: int, max_order: int = MAX_ORDER):
        if not (2 <= alphabet <= 256):
            raise ContractError(f"Alphabet size must lie in [2, 256], got {alphabet}")
        if not (0 <= max_order <= 3):
            raise ContractError(f"Context order must lie in [0, 3], got {max_order}")
        self._alphabet = alphabet
        self._max_order = max_order
        self._tables = [{} for _ in range(max_order + 1)]

    @property
    def alphabet(self) -> int:
        return self._alphabet

    @property
    def max_order(self) -> int:
        return self._max_order

    def contexts(self, neighbours: ContextKey) -> list[ContextStats]:
        """Statistics from the longest usable context down to order 0, created on demand."""
        order = min(len(neighbours), self._max_order)
        chain = []
        for o in range(order, -1, -1):
            key = neighbours[:o]
            stats = self._tables[o].get(key)
            if stats is None:
                stats = self._tables[o][key] = ContextStats()
            chain.append(stats)
        return chain

    def update(self, chain: list[ContextStats], symbol: int) -> None:
        for stats in chain:
            stats.update(symbol)

    def digest(self) -> tuple:
        return tuple(
            tuple((key, tuple(stats.counts.items())) for key, stats in table.items())
            for table in self._tables
        )


def causal_neighbours(grid: NDArray, row: int, col: int) -> ContextKey:
    """Slot-tagged labels of the present neighbours among left, above, above-left."""
    present = []
    if col > 0:
        present.append((0, int(grid[row, col - 1])))
    if row > 0:
        present.append((1, int(grid[row - 1, col])))
        if col > 0:
            present.append((2, int(grid[row - 1, col - 1])))
    return tuple(present)


def _encode_symbol(encoder: RangeEncoder, chain: list[ContextStats], symbol: int, q: int) -> None:
    for stats in chain:
        if stats.total == 0:
            continue
        interval = stats.interval(symbol)
        total = stats.total + stats.escape
        if interval is not None:
            encoder.encode(interval[0], interval[1], total)
            return
        encoder.encode(stats.total, stats.escape, total)
    encoder.encode(symbol, 1, q)


def _decode_symbol(decoder: RangeDecoder, chain: list[ContextStats], q: int) -> int:
    for stats in chain:
        if stats.total == 0:
            continue
        symbol, cum, freq = stats.find(decoder.get_freq(stats.total + stats.escape))
        decoder.decode(cum, freq)
        if symbol is not None:
            return symbol
    symbol = decoder.get_freq(q)
    decoder.decode(symbol, 1)
    return symbol


def _check_grid(grid: NDArray, q: int) -> None:
    if grid.ndim != 2:
        raise ContractError(f"Expect a 2d label grid, got shape {grid.shape}")
    if grid.size and (grid.min() < 0 or grid.max() >= q):
        raise ContractError(f"Labels must lie in [0, {q - 1}]")


def ppm2d_encode_body(
    label_grid: ArrayLike,
    q: int,
    *,
    max_order: int = MAX_ORDER,
    hook: Callable[[int, PPMModel], None] | None = None,
) -> bytes:
    """Range-coded labels without the payload method byte."""
    grid = asarray(label_grid, dtype=int64)
    _check_grid(grid, q)
    model = PPMModel(q, max_order)
    encoder = RangeEncoder()
    rows, cols = grid.shape
    index = 0
    for row in range(rows):
        for col in range(cols):
            symbol = int(grid[row, col])
            chain = model.contexts(causal_neighbours(grid, row, col))
            _encode_symbol(encoder, chain, symbol, q)
            model.update(chain, symbol)
            if hook is not None:
                hook(index, model)
            index += 1
    return encoder.finish()


def ppm2d_encode(
    label_grid: ArrayLike,
    q: int,
    *,
    max_order: int = MAX_ORDER,
    hook: Callable[[int, PPMModel], None] | None = None,
) -> bytes:
    grid = asarray(label_grid, dtype=int64)
    coded = ppm2d_encode_body(grid, q, max_order=max_order, hook=hook)
    return choose_shorter(coded, grid, q)


def ppm2d_decode(
    payload: bytes,
    rows: int,
    cols: int,
    q: int,
    *,
    max_order: int = MAX_ORDER,
    hook: Callable[[int, PPMModel], None] | None = None,
) -> NDArray:
    if rows < 0 or cols < 0:
        raise ContractError(f"Invalid grid shape ({rows}, {cols})")
    if read_method(payload) == METHOD_STORED:
        return unpack_symbols(payload, rows * cols, q, offset=1).reshape(rows, cols)

    model = PPMModel(q, max_order)
    decoder = RangeDecoder(payload, 1)
    grid = empty((rows, cols), dtype=int64)
    index = 0
    for row in range(rows):
        for col in range(cols):
            chain = model.contexts(causal_neighbours(grid, row, col))
            symbol = _decode_symbol(decoder, chain, q)
            if symbol >= q:
                raise DecodeError(
                    f"Decoded label {symbol} exceeds {q - 1}", offset=decoder.position
                )
            grid[row, col] = symbol
            model.update(chain, symbol)
            if hook is not None:
                hook(index, model)
            index += 1
    return grid
