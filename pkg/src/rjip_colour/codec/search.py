from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Literal

from numpy import asarray, float64

from ..core.exception import ContractError, InfeasibleRatioError
from ..lib.mask import H_SCALE, RegularGrid, candidate_h_values
from ..lib.quantize import UniformQuantizer, kmeans
from ..tools.logger import INFO1, INFO2, logger
from .channel_group import encode_channel_group, encode_vector_labels
from .config import CodecConfig

if TYPE_CHECKING:
    from numpy.typing import ArrayLike, NDArray

    from ..lib.inpaint import KernelType
    from .channel_group import GroupEncoding

GroupKind = Literal["scalar", "vector"]


@dataclass(frozen=True)
class CandidateRecord:
    """One evaluated (h, q|k) configuration of a channel group."""

    group: str
    h_fixed: int
    levels: int
    nbytes: int
    sse: float

    @property
    def h(self) -> float:
        return self.h_fixed / H_SCALE


class GroupSearch:
    """Budget-constrained search of (h, q) or (h, k) for one channel group.

    Evaluations are memoised by `(h_fixed, levels)`, so repeated searches with
    different budgets, as in the luma factor sweep, reuse them.
    """

    __slots__ = ("_name", "_planes", "_kind", "_config", "_function", "_cache", "_h_values")

    _name: str
    _planes: NDArray
    _kind: GroupKind
    _config: CodecConfig
    _function: KernelType
    _cache: dict[tuple[int, int], GroupEncoding]
    _h_values: list[int]

    def __init__(
        self,
        name: str,
        planes: ArrayLike,
        kind: GroupKind,
        config: CodecConfig | None = None,
        *,
        function: KernelType = "numba",
    ):
        planes = asarray(planes, dtype=float64)
        if planes.ndim != 3:
            raise ContractError(f"Expect planes of shape (C, height, width), got {planes.shape}")
        if kind == "vector" and planes.shape[0] != 3:
            raise ContractError("Vector quantisation needs three channels")
        if kind not in ("scalar", "vector"):
            raise ContractError(f"Unknown group kind {kind}")
        self._name = name
        self._planes = planes
        self._kind = kind
        self._config = config or CodecConfig()
        self._function = function
        self._cache = {}
        _, height, width = planes.shape
        self._h_values = candidate_h_values(
            self._config.h_min, self._config.h_max, self._config.h_samples, width, height
        )

    @property
    def name(self) -> str:
        return self._name

    @property
    def planes(self) -> NDArray:
        return self._planes

    @property
    def h_values(self) -> list[int]:
        return self._h_values

    @property
    def level_values(self) -> tuple[int, ...]:
        return self._config.k_levels if self._kind == "vector" else self._config.q_levels

    @property
    def records(self) -> list[CandidateRecord]:
        return [
            CandidateRecord(self._name, h_fixed, levels, enc.nbytes, enc.sse)
            for (h_fixed, levels), enc in self._cache.items()
        ]

    def evaluate(self, h_fixed: int, levels: int) -> GroupEncoding:
        key = (h_fixed, levels)
        if (encoding := self._cache.get(key)) is not None:
            return encoding

        _, height, width = self._planes.shape
        grid = RegularGrid(h_fixed, width, height)
        if self._kind == "scalar":
            encoding = encode_channel_group(
                self._planes, grid, UniformQuantizer(levels), function=self._function
            )
        else:
            xs, ys = grid.positions()
            clustering = kmeans(
                self._planes[:, ys, xs].T,
                levels,
                self._config.seed,
                self._config.kmeans_max_iters,
                restarts=self._config.kmeans_restarts,
                function=self._function,
            )
            encoding = encode_vector_labels(
                self._planes,
                grid,
                clustering.labels,
                clustering.codebook,
                function=self._function,
            )
        logger.log(
            INFO2,
            f"{self._name}: h={grid.h:.4f} levels={levels} points={grid.size}"
            f" bytes={encoding.nbytes} sse={encoding.sse:.6g}",
        )
        self._cache[key] = encoding
        return encoding

    def search(self, available: int) -> GroupEncoding:
        """Lowest error encoding with at most `available` bytes.

        For every level count the grid is refined from coarse to fine. With pruning the
        walk stops at the first candidate over the budget. The spacing of the winner
        is then refined locally by bisection between its neighbouring samples.
        """
        best: GroupEncoding | None = None
        for levels in self.level_values:
            for h_fixed in reversed(self._h_values):
                encoding = self.evaluate(h_fixed, levels)
                if encoding.nbytes > available:
                    if self._config.prune:
                        break
                    continue
                if best is None or encoding.sse < best.sse:
                    best = encoding
        if best is None:
            raise InfeasibleRatioError(
                f"No {self._name} configuration fits {available} bytes", context=self._name
            )

        best = self._refine(best, available)
        logger.log(
            INFO1,
            f"{self._name}: chose h={best.grid.h:.4f} levels={best.levels}"
            f" ({best.nbytes} of {available} bytes)",
        )
        return best

    def _refine(self, best: GroupEncoding, available: int) -> GroupEncoding:
        h_values = self._h_values
        index = h_values.index(best.h_fixed)
        lower = h_values[index - 1] if index > 0 else best.h_fixed
        upper = h_values[index + 1] if index + 1 < len(h_values) else best.h_fixed
        levels = best.levels if best.codebook is None else self._levels_key(best)

        for _ in range(self._config.refine_steps):
            centre = best.h_fixed
            finer = (lower + centre) // 2
            coarser = (centre + upper) // 2
            for h_fixed in (finer, coarser):
                if h_fixed in (lower, centre, upper):
                    continue
                encoding = self.evaluate(h_fixed, levels)
                if encoding.nbytes <= available and encoding.sse < best.sse:
                    best = encoding
            if best.h_fixed < centre:
                upper = centre
            elif best.h_fixed > centre:
                lower = centre
            else:
                lower, upper = finer, coarser
            if upper - lower < 2:
                break
        return best

    def _levels_key(self, encoding: GroupEncoding) -> int:
        # k-means may return fewer centres than requested; look up the requested k
        for (h_fixed, levels), cached in self._cache.items():
            if cached is encoding:
                return levels
        return encoding.levels
