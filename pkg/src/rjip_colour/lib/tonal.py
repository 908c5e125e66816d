"""Tonal optimisation of the stored mask values.

Changing the value stored at mask pixel x_i by δ changes the reconstruction of every
unknown pixel x_j of its window by `δ·w_ij/W_j`, where `W_j` is the Shepard
denominator. Minimising the squared error over those pixels gives the closed form

    u_new = u_old + Σ_j (w_ij/W_j)(f_j - v_j/W_j) / Σ_j (w_ij/W_j)²

Mask pixels are copied verbatim, so only the pixel itself enters the error besides
the unknown pixels of its window. The sweeps add its term `(f_i - u_old)` to the
numerator and 1 to the denominator, and project the result onto the admissible
values (quantisation levels or codebook colours). A projected change is kept only if
it strictly lowers that error, which equals the change of the global error.

For scalar levels the direct optimiser also starts from the relaxed problem: sweeps
over real values converge to the unquantised optimum, which is projected onto the
nearest levels and refined by level sweeps. The lower of both outcomes is kept.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING

from numba import njit
from numpy import asarray, float64, int64, zeros
from numpy.random import default_rng

from ..core.exception import ContractError
from ..core.global_parameters import NUMBA_CACHE_ENABLE
from ..tools.logger import INFO3, logger
from .inpaint import AccumulatorField, KnownPixels, _patch_pixel
from .quantize import Codebook, UniformQuantizer, assign_labels

if TYPE_CHECKING:
    from collections.abc import Callable

    from numpy.typing import ArrayLike, NDArray

    from .inpaint import KernelType, ShepardWeights

# changes smaller than this are treated as no improvement
ACCEPT_TOLERANCE = 1e-9
# relaxed sweeps stop once a sweep gains less squared error than this
RELAXED_TOLERANCE = 1e-3


#
# Inline helpers
#
@njit(cache=NUMBA_CACHE_ENABLE, inline="always")
def _window_terms(
    v: NDArray,
    weight_sum: NDArray,
    original: NDArray,
    is_mask: NDArray,
    window: NDArray,
    half: int,
    x0: int,
    y0: int,
    channel: int,
):
    """Numerator and denominator of the closed-form update for one channel."""
    _, height, width = v.shape
    num = 0.0
    den = 0.0
    for y in range(max(y0 - half, 0), min(y0 + half + 1, height)):
        for x in range(max(x0 - half, 0), min(x0 + half + 1, width)):
            w = window[y - y0 + half, x - x0 + half]
            if w == 0.0 or is_mask[y, x]:
                continue
            wsum = weight_sum[y, x]
            if wsum <= 0.0:
                continue
            a = w / wsum
            num += a * (original[channel, y, x] - v[channel, y, x] / wsum)
            den += a * a
    return num, den


@njit(cache=NUMBA_CACHE_ENABLE, inline="always")
def _window_delta_sse(
    v: NDArray,
    weight_sum: NDArray,
    original: NDArray,
    is_mask: NDArray,
    window: NDArray,
    half: int,
    x0: int,
    y0: int,
    channel: int,
    delta: float,
) -> float:
    """Change of the squared error of the unknown pixels when the value moves by `delta`."""
    _, height, width = v.shape
    change = 0.0
    for y in range(max(y0 - half, 0), min(y0 + half + 1, height)):
        for x in range(max(x0 - half, 0), min(x0 + half + 1, width)):
            w = window[y - y0 + half, x - x0 + half]
            if w == 0.0 or is_mask[y, x]:
                continue
            wsum = weight_sum[y, x]
            if wsum <= 0.0:
                continue
            err = original[channel, y, x] - v[channel, y, x] / wsum
            shift = delta * w / wsum
            change += shift * shift - 2.0 * err * shift
    return change


@njit(cache=NUMBA_CACHE_ENABLE, inline="always")
def _level_of(value: float, q: int) -> int:
    if value < 0.0:
        value = 0.0
    elif value > 255.0:
        value = 255.0
    level = int(value * q / 256.0)
    return min(level, q - 1)


@njit(cache=NUMBA_CACHE_ENABLE, inline="always")
def _dequantize(level: int, q: int) -> float:
    return min((level + 0.5) * 256.0 / q, 255.0)


#
# Sweep kernels; each returns (accepted changes, change of the squared error)
#
def _direct_scalar_sweep_python(
    xs: NDArray,
    ys: NDArray,
    values: NDArray,
    levels: NDArray,
    v: NDArray,
    weight_sum: NDArray,
    original: NDArray,
    is_mask: NDArray,
    window: NDArray,
    half: int,
    q: int,
):
    """`q == 0` stands for the continuous admissible set [0, 255]."""
    nchannels = values.shape[1]
    delta = zeros(nchannels, dtype=float64)
    changes = 0
    dsse = 0.0
    for i in range(xs.size):
        x0, y0 = xs[i], ys[i]
        for c in range(nchannels):
            num, den = _window_terms(v, weight_sum, original, is_mask, window, half, x0, y0, c)
            old = values[i, c]
            f = original[c, y0, x0]
            # the stored pixel itself is reconstructed verbatim
            target = old + (num + f - old) / (den + 1.0)
            if q > 0:
                level = _level_of(target, q)
                if level == levels[i, c]:
                    continue
                new = _dequantize(level, q)
            else:
                level = 0
                new = min(max(target, 0.0), 255.0)
            step = new - old
            if step == 0.0:
                continue
            change = _window_delta_sse(
                v, weight_sum, original, is_mask, window, half, x0, y0, c, step
            )
            change += (f - new) ** 2 - (f - old) ** 2
            if change >= -ACCEPT_TOLERANCE and q > 0 and abs(level - levels[i, c]) > 1:
                # neighbouring level toward the target
                level = levels[i, c] + (1 if level > levels[i, c] else -1)
                new = _dequantize(level, q)
                step = new - old
                change = _window_delta_sse(
                    v, weight_sum, original, is_mask, window, half, x0, y0, c, step
                )
                change += (f - new) ** 2 - (f - old) ** 2
            if change >= -ACCEPT_TOLERANCE:
                continue
            delta[c] = step
            _patch_pixel(v, window, half, x0, y0, delta)
            delta[c] = 0.0
            values[i, c] = new
            levels[i, c] = level
            changes += 1
            dsse += change
    return changes, dsse


def _direct_vector_sweep_python(
    xs: NDArray,
    ys: NDArray,
    values: NDArray,
    labels: NDArray,
    centres: NDArray,
    v: NDArray,
    weight_sum: NDArray,
    original: NDArray,
    is_mask: NDArray,
    window: NDArray,
    half: int,
):
    nchannels = values.shape[1]
    target = zeros(nchannels, dtype=float64)
    delta = zeros(nchannels, dtype=float64)
    changes = 0
    dsse = 0.0
    for i in range(xs.size):
        x0, y0 = xs[i], ys[i]
        for c in range(nchannels):
            num, den = _window_terms(v, weight_sum, original, is_mask, window, half, x0, y0, c)
            old = values[i, c]
            target[c] = old + (num + original[c, y0, x0] - old) / (den + 1.0)

        best = 0
        bestd = -1.0
        for j in range(centres.shape[0]):
            d = 0.0
            for c in range(nchannels):
                diff = target[c] - centres[j, c]
                d += diff * diff
            if bestd < 0.0 or d < bestd:
                best = j
                bestd = d
        if best == labels[i]:
            continue

        change = 0.0
        for c in range(nchannels):
            delta[c] = centres[best, c] - values[i, c]
            if delta[c] != 0.0:
                change += _window_delta_sse(
                    v, weight_sum, original, is_mask, window, half, x0, y0, c, delta[c]
                )
                f = original[c, y0, x0]
                change += (f - centres[best, c]) ** 2 - (f - values[i, c]) ** 2
        if change >= -ACCEPT_TOLERANCE:
            continue
        _patch_pixel(v, window, half, x0, y0, delta)
        for c in range(nchannels):
            values[i, c] = centres[best, c]
        labels[i] = best
        changes += 1
        dsse += change
    return changes, dsse


def _random_walk_sweep_python(
    order: NDArray,
    xs: NDArray,
    ys: NDArray,
    values: NDArray,
    levels: NDArray,
    v: NDArray,
    weight_sum: NDArray,
    original: NDArray,
    is_mask: NDArray,
    window: NDArray,
    half: int,
    q: int,
):
    nchannels = values.shape[1]
    delta = zeros(nchannels, dtype=float64)
    changes = 0
    dsse = 0.0
    for k in range(order.size):
        i = order[k] // nchannels
        c = order[k] % nchannels
        x0, y0 = xs[i], ys[i]
        for direction in (1, -1):
            level = levels[i, c] + direction
            if level < 0 or level >= q:
                continue
            old = values[i, c]
            new = _dequantize(level, q)
            change = _window_delta_sse(
                v, weight_sum, original, is_mask, window, half, x0, y0, c, new - old
            )
            f = original[c, y0, x0]
            change += (f - new) ** 2 - (f - old) ** 2
            if change >= -ACCEPT_TOLERANCE:
                continue
            delta[c] = new - old
            _patch_pixel(v, window, half, x0, y0, delta)
            delta[c] = 0.0
            values[i, c] = new
            levels[i, c] = level
            changes += 1
            dsse += change
            break
    return changes, dsse


_direct_scalar_sweep_numba: Callable = njit(cache=NUMBA_CACHE_ENABLE)(_direct_scalar_sweep_python)
_direct_vector_sweep_numba: Callable = njit(cache=NUMBA_CACHE_ENABLE)(_direct_vector_sweep_python)
_random_walk_sweep_numba: Callable = njit(cache=NUMBA_CACHE_ENABLE)(_random_walk_sweep_python)

_direct_scalar_sweep: dict[str, Callable] = {
    "python": _direct_scalar_sweep_python,
    "numba": _direct_scalar_sweep_numba,
}
_direct_vector_sweep: dict[str, Callable] = {
    "python": _direct_vector_sweep_python,
    "numba": _direct_vector_sweep_numba,
}
_random_walk_sweep: dict[str, Callable] = {
    "python": _random_walk_sweep_python,
    "numba": _random_walk_sweep_numba,
}


#
# Problem and result
#
Admissible = UniformQuantizer | Codebook | None


@dataclass
class TonalResult:
    values: NDArray
    levels: NDArray | None
    labels: NDArray | None
    sweeps: int
    changes: int
    sse_history: list[float] = field(default_factory=list)

    @property
    def sse(self) -> float:
        return self.sse_history[-1]


class TonalProblem:
    """Stored values of a mask, their target image and the admissible set.

    `values` has shape `(n, C)` and `original` `(C, height, width)`. For a
    `UniformQuantizer` the values are kept together with their levels, for a
    `Codebook` with their labels, for `None` they are free reals in [0, 255].
    The accumulator is kept consistent with the values.
    """

    __slots__ = (
        "_xs",
        "_ys",
        "_values",
        "_levels",
        "_labels",
        "_original",
        "_admissible",
        "_field",
        "_is_mask",
        "_function",
    )

    def __init__(
        self,
        xs: ArrayLike,
        ys: ArrayLike,
        values: ArrayLike,
        original: ArrayLike,
        weights: ShepardWeights,
        admissible: Admissible = None,
        *,
        levels: ArrayLike | None = None,
        labels: ArrayLike | None = None,
        function: KernelType = "numba",
    ):
        known = KnownPixels(xs, ys, values)
        original = asarray(original, dtype=float64)
        if original.ndim == 2:
            original = original[None]
        if original.shape[0] != known.nchannels:
            raise ContractError(
                f"Expect a target with {known.nchannels} channels, got {original.shape}"
            )
        nchannels, height, width = original.shape
        known.check(width, height)
        if isinstance(admissible, Codebook):
            if nchannels != 3:
                raise ContractError("Codebook projection needs three channels")
            if labels is None:
                labels = assign_labels(known.values, admissible, function=function)
        elif isinstance(admissible, UniformQuantizer) and levels is None:
            levels = admissible.nearest_level(known.values)

        self._xs = known.xs.copy()
        self._ys = known.ys.copy()
        self._values = known.values.copy()
        self._original = original
        self._admissible = admissible
        self._levels = None if levels is None else asarray(levels, dtype=int64).reshape(
            self._values.shape
        ).copy()
        self._labels = None if labels is None else asarray(labels, dtype=int64).reshape(-1).copy()
        self._is_mask = zeros((height, width), dtype=bool)
        self._is_mask[self._ys, self._xs] = True
        self._function = function
        self._field = AccumulatorField(nchannels, width, height, weights, function=function)
        self._field.add_known_pixels(known)

    @classmethod
    def from_values(
        cls,
        xs: ArrayLike,
        ys: ArrayLike,
        values: ArrayLike,
        original: ArrayLike,
        weights: ShepardWeights,
        admissible: Admissible = None,
        *,
        function: KernelType = "numba",
    ) -> TonalProblem:
        """Project `values` onto the admissible set and build the problem."""
        values = asarray(values, dtype=float64)
        if values.ndim == 1:
            values = values[:, None]
        levels = labels = None
        match admissible:
            case UniformQuantizer():
                levels = admissible.nearest_level(values)
                values = admissible.dequantize(levels)
            case Codebook():
                labels = assign_labels(values, admissible, function=function)
                values = admissible.colours(labels)
            case None:
                values = values.clip(0.0, 255.0)
            case _:
                raise ContractError(f"Unsupported admissible set {admissible!r}")
        return cls(
            xs,
            ys,
            values,
            original,
            weights,
            admissible,
            levels=levels,
            labels=labels,
            function=function,
        )

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
    def levels(self) -> NDArray | None:
        return self._levels

    @property
    def labels(self) -> NDArray | None:
        return self._labels

    @property
    def original(self) -> NDArray:
        return self._original

    @property
    def admissible(self) -> Admissible:
        return self._admissible

    @property
    def field(self) -> AccumulatorField:
        return self._field

    @property
    def weights(self) -> ShepardWeights:
        return self._field.weights

    @property
    def is_mask(self) -> NDArray:
        return self._is_mask

    def __len__(self) -> int:
        return self._xs.size

    def copy(self) -> TonalProblem:
        return TonalProblem(
            self._xs,
            self._ys,
            self._values,
            self._original,
            self.weights,
            self._admissible,
            levels=self._levels,
            labels=self._labels,
            function=self._function,
        )

    def _adopt(self, other: TonalProblem) -> None:
        """Take over the values, levels and accumulator of a problem on the same mask."""
        self._values[...] = other._values
        if self._levels is not None:
            self._levels[...] = other._levels
        self._field = other._field

    def reconstruction(self) -> NDArray:
        return self._field.reconstruct(KnownPixels(self._xs, self._ys, self._values))

    def sse(self) -> float:
        diff = self._original - self.reconstruction()
        return float((diff * diff).sum())

    def mse(self) -> float:
        return self.sse() / self._original.size

    def _kernel_arguments(self) -> tuple:
        weights = self._field.weights
        return (
            self._field.v,
            self._field.weight_sum,
            self._original,
            self._is_mask,
            weights.window,
            weights.half,
        )


def optimal_value(problem: TonalProblem, i: int, channel: int) -> float:
    """Unconstrained minimiser of the local error for one stored value."""
    if not (0 <= i < len(problem)):
        raise ContractError(f"Mask index {i} out of range")
    num, den = _window_terms(
        *problem._kernel_arguments(), int(problem.xs[i]), int(problem.ys[i]), channel
    )
    old = float(problem.values[i, channel])
    if den <= 0.0:
        return old
    return old + num / den


def _run_sweeps(
    problem: TonalProblem, max_sweeps: int, sweep: Callable[[], tuple[int, float]], name: str
) -> TonalResult:
    history = [problem.sse()]
    changes = 0
    sweeps = 0
    for sweeps in range(1, max_sweeps + 1):
        nchanged, dsse = sweep()
        history.append(history[-1] + dsse)
        changes += nchanged
        logger.log(INFO3, f"Tonal {name} sweep {sweeps}: {nchanged} changes, SSE {history[-1]:.6g}")
        if nchanged == 0:
            break
    return TonalResult(
        problem.values.copy(),
        None if problem.levels is None else problem.levels.copy(),
        None if problem.labels is None else problem.labels.copy(),
        sweeps,
        changes,
        history,
    )


def _relaxed_start(
    start: TonalProblem, quantizer: UniformQuantizer, max_sweeps: int, function: KernelType
) -> tuple[TonalProblem, int]:
    """Optimise real values, project them onto the nearest levels and refine the levels."""
    kernel = _direct_scalar_sweep[function]
    relaxed = TonalProblem(
        start.xs, start.ys, start.values, start.original, start.weights, function=function
    )
    arguments = relaxed._kernel_arguments()
    unused = zeros(relaxed.values.shape, dtype=int64)
    sweeps = 0
    for sweeps in range(1, max_sweeps + 1):
        nchanged, dsse = kernel(relaxed.xs, relaxed.ys, relaxed.values, unused, *arguments, 0)
        if nchanged == 0 or -dsse < RELAXED_TOLERANCE:
            break

    projected = TonalProblem.from_values(
        start.xs,
        start.ys,
        relaxed.values,
        start.original,
        start.weights,
        quantizer,
        function=function,
    )
    arguments = projected._kernel_arguments()

    def sweep():
        return kernel(
            projected.xs, projected.ys, projected.values, projected.levels, *arguments, quantizer.q
        )

    result = _run_sweeps(projected, max_sweeps, sweep, "relaxed")
    return projected, sweeps + result.sweeps


def tonal_optimize_direct(
    problem: TonalProblem, max_sweeps: int = 30, *, function: KernelType = "numba"
) -> TonalResult:
    """Closed-form updates with projection, in coding order; `problem` is updated in place."""
    if max_sweeps < 1:
        raise ContractError(f"max_sweeps must be positive, got {max_sweeps}")
    arguments = problem._kernel_arguments()
    match problem.admissible:
        case Codebook() as codebook:
            kernel = _direct_vector_sweep[function]
            centres = codebook.centers.astype(float64)

            def sweep():
                return kernel(
                    problem.xs, problem.ys, problem.values, problem.labels, centres, *arguments
                )

        case UniformQuantizer() as quantizer:
            start = problem.copy()
            kernel = _direct_scalar_sweep[function]

            def sweep():
                return kernel(
                    problem.xs, problem.ys, problem.values, problem.levels, *arguments, quantizer.q
                )

            result = _run_sweeps(problem, max_sweeps, sweep, "direct")
            relaxed, relaxed_sweeps = _relaxed_start(start, quantizer, max_sweeps, function)
            sse = relaxed.sse()
            if sse >= result.sse - ACCEPT_TOLERANCE:
                return result
            logger.log(INFO3, f"Tonal direct: relaxed start lowers the SSE to {sse:.6g}")
            problem._adopt(relaxed)
            return TonalResult(
                problem.values.copy(),
                problem.levels.copy(),
                None,
                result.sweeps + relaxed_sweeps,
                int((problem.levels != start.levels).sum()),
                result.sse_history + [sse],
            )

        case _:
            kernel = _direct_scalar_sweep[function]
            levels = zeros(problem.values.shape, dtype=int64)

            def sweep():
                return kernel(problem.xs, problem.ys, problem.values, levels, *arguments, 0)

    return _run_sweeps(problem, max_sweeps, sweep, "direct")


def tonal_optimize_random_walk(
    problem: TonalProblem,
    seed: int = 0,
    max_sweeps: int = 30,
    *,
    function: KernelType = "numba",
) -> TonalResult:
    """Level ±1 moves over seeded permutations of all stored channel values."""
    if not isinstance(problem.admissible, UniformQuantizer):
        raise ContractError("The random walk needs ordered scalar quantisation levels")
    if max_sweeps < 1:
        raise ContractError(f"max_sweeps must be positive, got {max_sweeps}")
    arguments = problem._kernel_arguments()
    kernel = _random_walk_sweep[function]
    q = problem.admissible.q
    rng = default_rng(seed)
    nvalues = problem.values.size

    def sweep():
        order = rng.permutation(nvalues).astype(int64)
        return kernel(order, problem.xs, problem.ys, problem.values, problem.levels, *arguments, q)

    return _run_sweeps(problem, max_sweeps, sweep, "random walk")
