from numpy import allclose, mgrid, sin, zeros
from numpy.random import default_rng
from pytest import approx, mark, raises
from scipy.optimize import minimize_scalar

from rjip_colour.core.exception import ContractError
from rjip_colour.lib.inpaint import compute_sigma, reconstruct_from_values, shepard_weights
from rjip_colour.lib.mask import RegularGrid
from rjip_colour.lib.quantize import Codebook, UniformQuantizer, kmeans
from rjip_colour.lib.tonal import (
    TonalProblem,
    optimal_value,
    tonal_optimize_direct,
    tonal_optimize_random_walk,
)


def _random_problem(seed: int, admissible: str = "none", nchannels: int = 3, function="numba"):
    rng = default_rng(seed)
    width, height = (int(v) for v in rng.integers(10, 25, size=2))
    # smooth target with noise, so that the optimum stays near the data
    yy, xx = (axis.astype("d") for axis in mgrid[0:height, 0:width])
    base = 128.0 + 60.0 * sin(xx / 5.0 + yy / 7.0)
    original = (base[None] + rng.normal(0.0, 15.0, size=(nchannels, height, width))).clip(0, 255)
    grid = RegularGrid.from_h(float(rng.uniform(2.0, 4.0)), width, height)
    xs, ys = grid.positions()
    weights = shepard_weights(compute_sigma(width, height, grid.size))
    values = original[:, ys, xs].T
    match admissible:
        case "scalar":
            admissible = UniformQuantizer(int(rng.choice((4, 8, 16, 32))))
        case "vector":
            admissible = kmeans(values, 6, seed=seed).codebook
        case _:
            admissible = None
    return TonalProblem.from_values(
        xs, ys, values, original, weights, admissible, function=function
    )


def _local_energy(problem: TonalProblem, i: int, channel: int):
    """Squared error of the unknown pixels of the window as a function of the stored value."""
    field = problem.field
    half = problem.weights.half
    window = problem.weights.window
    x0, y0 = int(problem.xs[i]), int(problem.ys[i])
    height, width = field.weight_sum.shape
    ylo, yhi = max(y0 - half, 0), min(y0 + half + 1, height)
    xlo, xhi = max(x0 - half, 0), min(x0 + half + 1, width)
    w = window[ylo - y0 + half : yhi - y0 + half, xlo - x0 + half : xhi - x0 + half]
    wsum = field.weight_sum[ylo:yhi, xlo:xhi]
    v = field.v[channel, ylo:yhi, xlo:xhi]
    f = problem.original[channel, ylo:yhi, xlo:xhi]
    use = (~problem.is_mask[ylo:yhi, xlo:xhi]) & (wsum > 0.0) & (w > 0.0)
    old = problem.values[i, channel]

    def energy(u: float) -> float:
        recon = (v[use] + (u - old) * w[use]) / wsum[use]
        return float(((f[use] - recon) ** 2).sum())

    return energy


def test_optimal_value_01():
    for seed in range(100):
        problem = _random_problem(seed, nchannels=1 + seed % 3)
        rng = default_rng(1000 + seed)
        i = int(rng.integers(len(problem)))
        channel = int(rng.integers(problem.values.shape[1]))

        energy = _local_energy(problem, i, channel)
        old = problem.values[i, channel]
        found = minimize_scalar(energy, bracket=(old - 50.0, old + 50.0), tol=1e-12)
        assert optimal_value(problem, i, channel) == approx(found.x, abs=1e-4)


@mark.parametrize("admissible", ("none", "scalar", "vector"))
@mark.parametrize("function", ("python", "numba"))
def test_tonal_optimize_direct_01(admissible: str, function: str):
    for seed in range(12):
        problem = _random_problem(seed, admissible, function=function)
        before = problem.sse()
        result = tonal_optimize_direct(problem, function=function)
        after = problem.sse()

        assert after <= before + 1e-6
        history = result.sse_history
        assert history[0] == approx(before)
        assert all(b <= a + 1e-6 for a, b in zip(history, history[1:]))
        assert history[-1] == approx(after, rel=1e-9, abs=1e-6)
        assert result.sweeps <= 30

        # the accumulator follows the values
        _, height, width = problem.original.shape
        expect = reconstruct_from_values(
            problem.xs, problem.ys, problem.values, width, height, problem.weights
        )
        assert allclose(problem.reconstruction(), expect, rtol=0, atol=1e-7)

        match problem.admissible:
            case UniformQuantizer() as quantizer:
                assert (quantizer.dequantize(result.levels) == result.values).all()
            case Codebook() as codebook:
                assert (codebook.colours(result.labels) == result.values).all()
            case None:
                assert result.values.min() >= 0.0 and result.values.max() <= 255.0


@mark.parametrize("function", ("python", "numba"))
def test_tonal_optimize_random_walk_01(function: str):
    for seed in range(12):
        problem = _random_problem(seed, "scalar", function=function)
        before = problem.sse()
        result = tonal_optimize_random_walk(problem, seed=seed, function=function)

        assert problem.sse() <= before + 1e-6
        history = result.sse_history
        assert all(b <= a + 1e-6 for a, b in zip(history, history[1:]))
        assert (problem.admissible.dequantize(result.levels) == result.values).all()


def test_tonal_optimize_01():
    """Both kernels accept the same moves."""
    for optimise in (tonal_optimize_direct, tonal_optimize_random_walk):
        python = _random_problem(5, "scalar", function="python")
        numba = _random_problem(5, "scalar", function="numba")
        first = optimise(python, function="python")
        second = optimise(numba, function="numba")
        assert (first.levels == second.levels).all()
        assert first.changes == second.changes


def test_tonal_optimize_02():
    problem = _random_problem(3, "scalar")
    first = tonal_optimize_random_walk(problem.copy(), seed=7)
    second = tonal_optimize_random_walk(problem.copy(), seed=7)
    assert (first.levels == second.levels).all()

    with raises(ContractError):
        tonal_optimize_random_walk(_random_problem(3, "vector"))
    with raises(ContractError):
        tonal_optimize_random_walk(_random_problem(3, "none"))
    with raises(ContractError):
        tonal_optimize_direct(problem, max_sweeps=0)
    with raises(ContractError):
        optimal_value(problem, len(problem), 0)


def test_TonalProblem_01():
    weights = shepard_weights(1.0)
    with raises(ContractError):
        TonalProblem([0], [0], [[1.0, 2.0, 3.0]], zeros((2, 4, 4)), weights)
    with raises(ContractError):
        TonalProblem(
            [0], [0], [[1.0, 2.0]], zeros((2, 4, 4)), weights, Codebook([[0, 0, 0]]), labels=[0]
        )

    problem = TonalProblem.from_values(
        [1], [2], [[100.0]], zeros((4, 4)), weights, UniformQuantizer(4)
    )
    assert problem.levels.tolist() == [[1]]
    assert problem.values.tolist() == [[96.0]]


def _walk_comparison_problem(seed: int) -> TonalProblem:
    rng = default_rng(seed)
    yy, xx = (axis.astype("d") for axis in mgrid[0:16, 0:16])
    phase = rng.uniform(0.0, 6.0, size=3)
    base = 128.0 + 70.0 * sin(xx[None] / 4.0 + yy[None] / 6.0 + phase[:, None, None])
    original = (base + rng.normal(0.0, 20.0, size=(3, 16, 16))).clip(0, 255)
    grid = RegularGrid.from_h(3.0, 16, 16)
    xs, ys = grid.positions()
    weights = shepard_weights(compute_sigma(16, 16, grid.size))
    return TonalProblem.from_values(
        xs, ys, original[:, ys, xs].T, original, weights, UniformQuantizer(8)
    )


def test_tonal_optimize_direct_02():
    """Direct updates end at least as low as the converged random walk on most instances."""
    wins = 0
    for seed in range(50):
        problem = _walk_comparison_problem(seed)
        walk = problem.copy()
        start = problem.sse()
        tonal_optimize_direct(problem)
        tonal_optimize_random_walk(walk, seed=seed, max_sweeps=1000)
        assert problem.sse() <= start + 1e-6
        wins += problem.mse() <= walk.mse() + 1e-9
    assert wins >= 40


@mark.parametrize("function", ("python", "numba"))
def test_tonal_optimize_direct_03(function: str):
    """One free value converges in one sweep to the minimiser of its full local error."""
    rng = default_rng(21)
    original = rng.uniform(0.0, 255.0, size=(1, 9, 9))
    weights = shepard_weights(2.0)
    problem = TonalProblem([4], [4], [[30.0]], original, weights, function=function)
    window = _local_energy(problem, 0, 0)

    def energy(u: float) -> float:
        return window(u) + (original[0, 4, 4] - u) ** 2

    expect = minimize_scalar(energy, bracket=(0.0, 255.0), tol=1e-12).x
    result = tonal_optimize_direct(problem, max_sweeps=1, function=function)
    assert result.changes == 1
    assert problem.values[0, 0] == approx(min(max(expect, 0.0), 255.0), abs=1e-4)
    assert tonal_optimize_direct(problem, function=function).changes == 0
