from sys import argv

from numpy import array_equal
from pytest import mark

from rjip_colour.bench.records import average_points, distinct_mask_colours
from rjip_colour.bench.sweep import FAST_IMAGES, FAST_RATIOS, find_images, make_jobs, run_sweep
from rjip_colour.codec import CodecConfig, Mode, budget_bytes, compress, decode
from rjip_colour.core.image import RasterImage, distinct_colours, read_ppm, to_uint8

long_time = mark.skipif(
    "--include-long-time-tests" not in argv, reason="long-time tests switched off"
)


def _compress_all(kodak_dir, name: str, ratio: float) -> dict[Mode, float]:
    image = read_ppm(kodak_dir / f"{name}.ppm")
    errors = {}
    for mode in Mode:
        result = compress(image, ratio, mode)
        assert len(result.data) <= budget_bytes(image.width, image.height, ratio)
        assert array_equal(decode(result.data).planes, result.reconstruction.planes)
        errors[mode] = result.mse
    return errors


@long_time
def test_kodim20_01(kodak_dir):
    """Sparse colours win at moderate ratios"""
    errors = _compress_all(kodak_dir, "kodim20", 20)
    assert errors[Mode.VECTOR] < errors[Mode.LP] < errors[Mode.RGB]
    for mode, reference in ((Mode.VECTOR, 28.81), (Mode.LP, 63.55), (Mode.RGB, 106.38)):
        assert 0.5 * reference <= errors[mode] <= 1.5 * reference


@long_time
def test_kodim13_01(kodak_dir):
    """Luma preference wins on a textured image at a high ratio"""
    errors = _compress_all(kodak_dir, "kodim13", 50)
    assert errors[Mode.LP] < errors[Mode.VECTOR] < errors[Mode.RGB]
    for mode, reference in ((Mode.LP, 398.64), (Mode.VECTOR, 462.47), (Mode.RGB, 580.98)):
        assert 0.5 * reference <= errors[mode] <= 1.5 * reference


@long_time
def test_kodim07_01(kodak_dir):
    """A few dozen mask colours inpaint to a full colour image"""
    image = read_ppm(kodak_dir / "kodim07.ppm")
    result = compress(image, 50, "vector")
    mask_colours = distinct_mask_colours(result)
    assert 40 <= mask_colours <= 256
    decoded = RasterImage(to_uint8(result.reconstruction))
    assert distinct_colours(decoded) >= 50 * mask_colours


def _assert_trend(images):
    jobs = make_jobs(images, tuple(Mode), FAST_RATIOS, CodecConfig())
    points = run_sweep(jobs)
    assert len(points) == len(jobs)
    averages = {(p.mode, p.ratio_requested): p.mse for p in average_points(points)}
    for ratio in FAST_RATIOS:
        assert averages["lp", ratio] < averages["rgb", ratio]
        assert averages["vector", ratio] < averages["rgb", ratio]


@long_time
def test_corpus_trend_01(kodak_dir):
    """Fast profile"""
    images = find_images(kodak_dir, FAST_IMAGES)
    assert len(images) == len(FAST_IMAGES)
    _assert_trend(images)


@long_time
def test_corpus_trend_02(kodak_dir):
    """Every corpus image found, at least eight"""
    images = find_images(kodak_dir)
    assert len(images) >= 8
    _assert_trend(images)
