from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING

from numba import njit
from numpy import (
    add,
    argsort,
    asarray,
    bincount,
    clip,
    concatenate,
    cumsum,
    empty,
    float64,
    floor,
    full,
    int64,
    minimum,
    rint,
    uint8,
    unique,
    zeros,
)
from numpy.random import default_rng

from ..core.exception import ContractError, FormatError
from ..core.global_parameters import NUMBA_CACHE_ENABLE
from ..tools.logger import INFO1, INFO3, logger
from .inpaint import KernelType, reconstruct_from_values

if TYPE_CHECKING:
    from collections.abc import Callable

    from numpy.typing import ArrayLike, NDArray

    from .inpaint import ShepardWeights

MAX_CODEBOOK_SIZE = 256


class UniformQuantizer:
    """Partition of [0, 256) into q intervals of equal length, reconstructed at midpoints."""

    __slots__ = ("_q", "_step")

    _q: int
    _step: float

    def __init__(self, q: int):
        if not (2 <= q <= 256):
            raise ContractError(f"q must lie in [2, 256], got {q}")
        self._q = int(q)
        self._step = 256.0 / self._q

    @property
    def q(self) -> int:
        return self._q

    @property
    def step(self) -> float:
        return self._step

    def quantize(self, values: ArrayLike) -> NDArray:
        values = asarray(values, dtype=float64)
        if values.size and (values.min() < 0.0 or values.max() > 255.0):
            raise ContractError("Values to quantise must lie in [0, 255]")
        return minimum(floor(values * self._q / 256.0), self._q - 1).astype(int64)

    def dequantize(self, levels: ArrayLike) -> NDArray:
        levels = asarray(levels, dtype=int64)
        if levels.size and (levels.min() < 0 or levels.max() >= self._q):
            raise ContractError(f"Levels must lie in [0, {self._q - 1}]")
        # the top midpoint of q = 256 lies above the sample range
        return minimum((levels + 0.5) * 256.0 / self._q, 255.0)

    def nearest_level(self, values: ArrayLike) -> NDArray:
        """Projection of arbitrary reals onto the level set."""
        return self.quantize(clip(asarray(values, dtype=float64), 0.0, 255.0))

    def __eq__(self, other) -> bool:
        return isinstance(other, UniformQuantizer) and other._q == self._q

    def __hash__(self) -> int:
        return hash(self._q)

    def __repr__(self) -> str:
        return f"UniformQuantizer(q={self._q})"


def scalar_quantize(value: float, q: int) -> int:
    return int(UniformQuantizer(q).quantize(value))


def scalar_dequantize(level: int, q: int) -> float:
    return float(UniformQuantizer(q).dequantize(level))


class Codebook:
    """Ordered palette of at most 256 integer colours; the index fits one byte."""

    __slots__ = ("_centers",)

    _centers: NDArray

    def __init__(self, centers: ArrayLike):
        centers = asarray(centers)
        if centers.ndim != 2 or centers.shape[1] != 3:
            raise ContractError(f"Expect centres of shape (k, 3), got {centers.shape}")
        if not (1 <= centers.shape[0] <= MAX_CODEBOOK_SIZE):
            raise ContractError(f"Codebook size must lie in [1, 256], got {centers.shape[0]}")
        if (rint(centers) != centers).any():
            raise ContractError("Codebook centres must be integer triples")
        if centers.min() < 0 or centers.max() > 255:
            raise ContractError("Codebook centres must lie in {0, ..., 255}³")
        centers = centers.astype(int64)
        centers.flags.writeable = False
        self._centers = centers

    @classmethod
    def from_bytes(cls, data: bytes, offset: int = 0) -> tuple[Codebook, int]:
        """Parse `k-1` followed by `3k` bytes; returns the codebook and the offset after it."""
        if len(data) <= offset:
            raise FormatError("Truncated codebook size", offset=offset)
        k = data[offset] + 1
        end = offset + 1 + 3 * k
        if len(data) < end:
            raise FormatError(f"Truncated codebook of {k} colours", offset=len(data))
        raw = asarray(bytearray(data[offset + 1 : end]), dtype=int64).reshape(k, 3)
        return cls(raw), end

    def to_bytes(self) -> bytes:
        return bytes([self.size - 1]) + self._centers.astype(uint8).tobytes()

    @property
    def centers(self) -> NDArray:
        return self._centers

    @property
    def size(self) -> int:
        return self._centers.shape[0]

    @property
    def has_duplicates(self) -> bool:
        return unique(self._centers, axis=0).shape[0] != self.size

    def colours(self, labels: ArrayLike) -> NDArray:
        return self._centers[asarray(labels, dtype=int64)].astype(float64)

    def used(self, labels: ArrayLike) -> int:
        return int(unique(asarray(labels)).size)

    def __len__(self) -> int:
        return self.size

    def __eq__(self, other) -> bool:
        if not isinstance(other, Codebook):
            return NotImplemented
        return self._centers.shape == other._centers.shape and bool(
            (self._centers == other._centers).all()
        )

    def __repr__(self) -> str:
        return f"Codebook(k={self.size})"


#
# Nearest centre assignment
#
def _assign_python(
    points: NDArray, centres: NDArray, labels: NDArray, dist2: NDArray
) -> int:
    """Label every point with its nearest centre, lowest index on ties.

    Returns the number of labels that changed.
    """
    changed = 0
    npoints, ndim = points.shape
    for i in range(npoints):
        best = -1
        bestd = 0.0
        for j in range(centres.shape[0]):
            d = 0.0
            for c in range(ndim):
                diff = points[i, c] - centres[j, c]
                d += diff * diff
            if best < 0 or d < bestd:
                best = j
                bestd = d
        if labels[i] != best:
            labels[i] = best
            changed += 1
        dist2[i] = bestd
    return changed


_assign_numba: Callable = njit(cache=NUMBA_CACHE_ENABLE)(_assign_python)

_assign_kernels: dict[str, Callable] = {"python": _assign_python, "numba": _assign_numba}


def assign_nearest(color: ArrayLike, codebook: Codebook) -> int:
    diff = codebook.centers - asarray(color, dtype=float64)
    return int((diff * diff).sum(axis=1).argmin())


def assign_labels(
    colors: ArrayLike, codebook: Codebook, *, function: KernelType = "numba"
) -> NDArray:
    colors = asarray(colors, dtype=float64).reshape(-1, 3)
    labels = full(colors.shape[0], -1, dtype=int64)
    dist2 = empty(colors.shape[0], dtype=float64)
    _assign_kernels[function](colors, codebook.centers.astype(float64), labels, dist2)
    return labels


def quantisation_energy(colors: ArrayLike, codebook: Codebook, labels: ArrayLike) -> float:
    diff = asarray(colors, dtype=float64) - codebook.colours(labels)
    return float((diff * diff).sum())


#
# k-means
#
@dataclass
class KMeansResult:
    codebook: Codebook
    labels: NDArray
    energy: float
    iterations: int
    energy_history: list[float] = field(default_factory=list)


def _lloyd(
    points: NDArray,
    counts: NDArray,
    centres: NDArray,
    max_iters: int,
    assign: Callable,
) -> tuple[NDArray, int, list[float]]:
    """Weighted Lloyd iterations on distinct points; `centres` is updated in place."""
    k = centres.shape[0]
    labels = full(points.shape[0], -1, dtype=int64)
    dist2 = empty(points.shape[0], dtype=float64)
    history = []
    iterations = 0
    for iterations in range(1, max_iters + 1):
        changed = assign(points, centres, labels, dist2)
        history.append(float((counts * dist2).sum()))
        if changed == 0:
            break

        sums = zeros((k, points.shape[1]), dtype=float64)
        add.at(sums, labels, points * counts[:, None])
        sizes = bincount(labels, weights=counts, minlength=k)
        for j in range(k):
            if sizes[j] > 0:
                centres[j] = sums[j] / sizes[j]
                continue
            # empty cluster: move it onto the worst represented point
            far = int(dist2.argmax())
            centres[j] = points[far]
            dist2[far] = 0.0
    return labels, iterations, history


def kmeans(
    colors: ArrayLike,
    k: int,
    seed: int = 0,
    max_iters: int = 50,
    *,
    restarts: int = 1,
    weights: ArrayLike | None = None,
    function: KernelType = "numba",
) -> KMeansResult:
    """Lloyd clustering of colour vectors into at most k integer centres.

    Runs on the distinct colours weighted by their multiplicity, which is equivalent
    to running on the full list. Optional `weights` scale the multiplicities. The best
    of `restarts` seeded runs is returned.
    """
    colors = asarray(colors, dtype=float64)
    if colors.ndim != 2 or colors.shape[0] == 0:
        raise ContractError("k-means needs a non-empty (n, d) array of colours")
    if k < 1:
        raise ContractError(f"k must be positive, got {k}")
    if restarts < 1 or max_iters < 1:
        raise ContractError("restarts and max_iters must be positive")

    points, inverse, counts = unique(colors, axis=0, return_inverse=True, return_counts=True)
    inverse = inverse.reshape(-1)
    counts = counts.astype(float64)
    if weights is not None:
        weights = asarray(weights, dtype=float64).reshape(-1)
        if weights.size != colors.shape[0] or weights.min() < 0.0:
            raise ContractError("Expect one non-negative weight per colour")
        counts = bincount(inverse, weights=weights, minlength=points.shape[0])
    keff = min(k, points.shape[0])
    assign = _assign_kernels[function]
    rng = default_rng(seed)

    best: KMeansResult | None = None
    for _ in range(restarts):
        init = rng.choice(points.shape[0], size=keff, replace=False)
        centres = points[init].copy()
        _, iterations, history = _lloyd(points, counts, centres, max_iters, assign)

        codebook = Codebook(clip(rint(centres), 0, 255))
        labels_distinct = full(points.shape[0], -1, dtype=int64)
        dist2 = empty(points.shape[0], dtype=float64)
        assign(points, codebook.centers.astype(float64), labels_distinct, dist2)
        energy = float((counts * dist2).sum())
        if best is None or energy < best.energy:
            best = KMeansResult(codebook, labels_distinct[inverse], energy, iterations, history)

    assert best is not None
    if best.codebook.has_duplicates:
        logger.log(INFO1, f"k-means produced duplicate centres for k={k}")
    return best


#
# Codebook refinement
#
def _refine_python(
    centres: NDArray,
    xs: NDArray,
    ys: NDArray,
    order: NDArray,
    starts: NDArray,
    weight_sum: NDArray,
    error: NDArray,
    is_mask: NDArray,
    window: NDArray,
    half: int,
    max_sweeps: int,
    scratch: NDArray,
    stamp: NDArray,
) -> int:
    """Coordinate descent of the centres by ±1 steps per channel.

    `error` holds `original - reconstruction` and is kept consistent with `centres`.
    A move of centre ℓ by δ in channel c shifts the reconstruction by `δ·a` with
    `a = S_ℓ/W` on unknown pixels and `a = 1` on the mask pixels labelled ℓ, so the
    change of the squared error is `-2δ·Σ e_c·a + δ²·Σ a²`.
    Returns the number of sweeps performed.
    """
    nchannels, height, width = error.shape
    ncentres = centres.shape[0]
    pass_id = 0
    bsum = empty(nchannels, dtype=float64)
    shift = empty(nchannels, dtype=int64)
    sweeps = 0
    for sweeps in range(1, max_sweeps + 1):
        moved = False
        for label in range(ncentres):
            first, last = starts[label], starts[label + 1]
            if first == last:
                continue

            # S_ℓ: weight mass of the members of the cluster
            for m in range(first, last):
                x0, y0 = xs[order[m]], ys[order[m]]
                for y in range(max(y0 - half, 0), min(y0 + half + 1, height)):
                    for x in range(max(x0 - half, 0), min(x0 + half + 1, width)):
                        scratch[y, x] += window[y - y0 + half, x - x0 + half]

            # Σ a² and Σ e·a over the support, each pixel once
            pass_id += 1
            asum = float(last - first)
            for c in range(nchannels):
                bsum[c] = 0.0
            for m in range(first, last):
                x0, y0 = xs[order[m]], ys[order[m]]
                for c in range(nchannels):
                    bsum[c] += error[c, y0, x0]
                for y in range(max(y0 - half, 0), min(y0 + half + 1, height)):
                    for x in range(max(x0 - half, 0), min(x0 + half + 1, width)):
                        if stamp[y, x] == pass_id:
                            continue
                        stamp[y, x] = pass_id
                        if is_mask[y, x] or weight_sum[y, x] <= 0.0:
                            continue
                        a = scratch[y, x] / weight_sum[y, x]
                        asum += a * a
                        for c in range(nchannels):
                            bsum[c] += error[c, y, x] * a

            # greedy ±1 moves of this centre
            for c in range(nchannels):
                shift[c] = 0
            while True:
                best_delta = 0.0
                best_c = -1
                best_step = 0
                for c in range(nchannels):
                    for step in (-1, 1):
                        value = centres[label, c] + step
                        if value < 0 or value > 255:
                            continue
                        delta = -2.0 * step * bsum[c] + asum
                        if delta < best_delta - 1e-9:
                            best_delta = delta
                            best_c = c
                            best_step = step
                if best_c < 0:
                    break
                centres[label, best_c] += best_step
                shift[best_c] += best_step
                bsum[best_c] -= best_step * asum
                moved = True

            # apply the accumulated shift to the error field and clear the scratch
            pass_id += 1
            anyshift = False
            for c in range(nchannels):
                if shift[c] != 0:
                    anyshift = True
            for m in range(first, last):
                x0, y0 = xs[order[m]], ys[order[m]]
                if anyshift:
                    for c in range(nchannels):
                        error[c, y0, x0] -= shift[c]
                for y in range(max(y0 - half, 0), min(y0 + half + 1, height)):
                    for x in range(max(x0 - half, 0), min(x0 + half + 1, width)):
                        if stamp[y, x] == pass_id:
                            continue
                        stamp[y, x] = pass_id
                        if anyshift and not is_mask[y, x] and weight_sum[y, x] > 0.0:
                            a = scratch[y, x] / weight_sum[y, x]
                            for c in range(nchannels):
                                error[c, y, x] -= shift[c] * a
                        scratch[y, x] = 0.0
        if not moved:
            break
    return sweeps


_refine_numba: Callable = njit(cache=NUMBA_CACHE_ENABLE)(_refine_python)

_refine_kernels: dict[str, Callable] = {"python": _refine_python, "numba": _refine_numba}


def refine_codebook(
    codebook: Codebook,
    mask_labels: ArrayLike,
    mask_positions: tuple[ArrayLike, ArrayLike],
    original: NDArray,
    weights: ShepardWeights,
    *,
    max_sweeps: int = 20,
    function: KernelType = "numba",
) -> Codebook:
    """Move centres to neighbouring integer colours while the reconstruction MSE drops.

    `original` holds the target planes `(3, height, width)`; `mask_positions` is `(xs, ys)`.
    """
    labels = asarray(mask_labels, dtype=int64)
    xs = asarray(mask_positions[0], dtype=int64)
    ys = asarray(mask_positions[1], dtype=int64)
    original = asarray(original, dtype=float64)
    if labels.size and (labels.min() < 0 or labels.max() >= codebook.size):
        raise ContractError("Mask labels reference missing codebook entries")
    nchannels, height, width = original.shape

    reconstruction = reconstruct_from_values(
        xs, ys, codebook.colours(labels), width, height, weights, function=function
    )
    error = original - reconstruction

    weight_sum = zeros((height, width), dtype=float64)
    half = weights.half
    window = weights.window
    for x0, y0 in zip(xs, ys):
        ylo, yhi = max(y0 - half, 0), min(y0 + half + 1, height)
        xlo, xhi = max(x0 - half, 0), min(x0 + half + 1, width)
        weight_sum[ylo:yhi, xlo:xhi] += window[
            ylo - y0 + half : yhi - y0 + half, xlo - x0 + half : xhi - x0 + half
        ]
    is_mask = zeros((height, width), dtype=bool)
    is_mask[ys, xs] = True

    order = argsort(labels, kind="stable")
    starts = concatenate(([0], cumsum(bincount(labels, minlength=codebook.size)))).astype(int64)
    centres = codebook.centers.copy()
    sweeps = _refine_kernels[function](
        centres,
        xs,
        ys,
        order,
        starts,
        weight_sum,
        error,
        is_mask,
        window,
        half,
        max_sweeps,
        zeros((height, width), dtype=float64),
        full((height, width), -1, dtype=int64),
    )
    moved = int((centres != codebook.centers).any(axis=1).sum())
    logger.log(
        INFO3, f"Codebook refinement: {moved} of {codebook.size} centres moved, {sweeps} sweeps"
    )
    return Codebook(centres)
