from numpy import clip, linspace, meshgrid, sin, stack
from numpy.random import default_rng
from pytest import mark, raises

from rjip_colour.codec.channel_group import encode_channel_group
from rjip_colour.codec.config import CodecConfig
from rjip_colour.codec.search import GroupSearch
from rjip_colour.core.exception import ContractError, InfeasibleRatioError
from rjip_colour.lib.mask import RegularGrid
from rjip_colour.lib.quantize import UniformQuantizer


def _planes(seed: int, width: int = 32, height: int = 32):
    rng = default_rng(seed)
    x, y = meshgrid(linspace(0, 1, width), linspace(0, 1, height))
    planes = [
        128 + 100 * sin(a * x + b * y + c) + rng.normal(0, 6, size=x.shape)
        for a, b, c in rng.uniform(1.0, 6.0, size=(3, 3))
    ]
    return clip(stack(planes), 0, 255)


@mark.parametrize("seed", (0, 1, 2))
def test_GroupSearch_01(seed: int):
    """Without pruning and refinement the search is an argmin over the candidate grid"""
    planes = _planes(seed)
    config = CodecConfig(
        h_min=1.5, h_max=8.0, h_samples=3, q_levels=(4, 16, 64), refine_steps=0, prune=False
    )
    search = GroupSearch("rgb", planes, "scalar", config)
    assert len(search.h_values) == 3

    candidates = []
    for h_fixed in search.h_values:
        for q in config.q_levels:
            grid = RegularGrid(h_fixed, 32, 32)
            encoding = encode_channel_group(planes, grid, UniformQuantizer(q))
            candidates.append((encoding.sse, encoding.nbytes, h_fixed, q))
    sizes = sorted(nbytes for _, nbytes, _, _ in candidates)

    for available in (sizes[0], sizes[len(sizes) // 2], sizes[-1]):
        best = search.search(available)
        feasible = [c for c in candidates if c[1] <= available]
        sse, nbytes, h_fixed, q = min(feasible)
        assert (best.h_fixed, best.levels) == (h_fixed, q)
        assert best.nbytes == nbytes
        assert best.sse == sse

    with raises(InfeasibleRatioError):
        search.search(sizes[0] - 1)


@mark.parametrize("prune", (False, True))
def test_GroupSearch_02(prune: bool):
    """The winner fits and beats every feasible evaluation"""
    planes = _planes(5, 40, 36)
    config = CodecConfig(h_samples=5, q_levels=(4, 16, 64), prune=prune)
    for available in (150, 400, 1200):
        search = GroupSearch("rgb", planes, "scalar", config)
        best = search.search(available)
        assert best.nbytes <= available
        feasible = [record for record in search.records if record.nbytes <= available]
        assert all(best.sse <= record.sse for record in feasible)


def test_GroupSearch_03():
    """Refinement only moves to feasible better spacings between the neighbours"""
    planes = _planes(6, 40, 40)
    coarse = CodecConfig(h_samples=4, q_levels=(16,), refine_steps=0)
    fine = coarse.replace(refine_steps=3)
    unrefined = GroupSearch("rgb", planes, "scalar", coarse).search(500)
    search = GroupSearch("rgb", planes, "scalar", fine)
    refined = search.search(500)
    assert refined.nbytes <= 500
    assert refined.sse <= unrefined.sse

    h_values = search.h_values
    index = h_values.index(unrefined.h_fixed)
    lower = h_values[max(index - 1, 0)]
    upper = h_values[min(index + 1, len(h_values) - 1)]
    assert lower <= refined.h_fixed <= upper


def test_GroupSearch_04():
    planes = _planes(7, 24, 24)
    config = CodecConfig(h_samples=4, k_levels=(2, 8), kmeans_max_iters=10)
    search = GroupSearch("vector", planes, "vector", config)
    best = search.search(400)
    assert best.nbytes <= 400
    assert best.codebook is not None
    assert best.codebook.size <= 8
    # cached evaluations are reused
    assert search.evaluate(best.h_fixed, best.levels) is search.evaluate(
        best.h_fixed, best.levels
    )

    with raises(InfeasibleRatioError):
        search.search(3)
    with raises(ContractError):
        GroupSearch("vector", planes[:2], "vector", config)
    with raises(ContractError):
        GroupSearch("rgb", planes, "palette", config)
    with raises(ContractError):
        GroupSearch("rgb", planes[0], "scalar", config)
