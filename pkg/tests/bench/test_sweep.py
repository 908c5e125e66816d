from concurrent.futures import ProcessPoolExecutor

from numpy import clip, linspace, meshgrid, rint, sin, stack
from numpy.random import default_rng
from pytest import approx, raises

import rjip_colour.bench.sweep as sweep_module
from rjip_colour.bench.sweep import (
    SweepJob,
    find_images,
    make_jobs,
    parse_modes,
    parse_ratios,
    run_job,
    run_sweep,
)
from rjip_colour.codec import CodecConfig, Mode
from rjip_colour.core.exception import ContractError
from rjip_colour.core.image import RasterImage, save_ppm
from rjip_colour.tools.threads import worker_count

FAST = CodecConfig(h_samples=3, q_levels=(4, 16), k_levels=(4,), luma_factors=(0.7,))


def _write_corpus(folder, names=("b_image", "a_image")):
    folder.mkdir(exist_ok=True)
    for seed, name in enumerate(names):
        rng = default_rng(seed)
        x, y = meshgrid(linspace(0, 1, 24), linspace(0, 1, 20))
        planes = [128 + 90 * sin(a * x + b * y) for a, b in rng.uniform(1.0, 4.0, size=(3, 2))]
        image = RasterImage(rint(clip(stack(planes), 0, 255)))
        (folder / f"{name}.ppm").write_bytes(save_ppm(image))
    return folder


def test_parse_ratios_01():
    ratios = parse_ratios("20:120:10")
    assert len(ratios) == 11
    assert ratios[0] == 20.0 and ratios[-1] == 120.0
    assert parse_ratios("20:50:15") == (20.0, 35.0, 50.0)
    assert parse_ratios("5:5:1") == (5.0,)
    assert parse_ratios("20, 50,80") == (20.0, 50.0, 80.0)
    assert parse_ratios("0.5:1.5:0.1")[-1] == approx(1.5)
    for text in ("", "20:10:5", "20:50:0", "20:50", "a,b", "20:50:10:1"):
        with raises(ContractError):
            parse_ratios(text)


def test_parse_modes_01():
    assert parse_modes("all") == (Mode.RGB, Mode.LP, Mode.VECTOR)
    assert parse_modes("vector, rgb") == (Mode.VECTOR, Mode.RGB)
    with raises(ContractError):
        parse_modes("rgb,gray")


def test_find_images_01(tmp_path):
    corpus = _write_corpus(tmp_path / "corpus")
    (corpus / "notes.txt").write_text("not an image")
    images = find_images(corpus)
    assert [path.name for path in images] == ["a_image.ppm", "b_image.ppm"]
    assert [path.name for path in find_images(corpus, ["b_image", "missing"])] == ["b_image.ppm"]
    with raises(ContractError):
        find_images(tmp_path / "nowhere")


def test_run_sweep_01(tmp_path):
    corpus = _write_corpus(tmp_path / "corpus")
    (corpus / "broken.ppm").write_bytes(b"P6\n24 20\n255\n" + bytes(10))
    images = find_images(corpus)
    assert len(images) == 3

    jobs = make_jobs(images, (Mode.VECTOR, Mode.RGB), (40.0, 20.0), FAST)
    assert len(jobs) == 3 * 2 * 2
    assert isinstance(jobs[0], SweepJob)
    assert run_job(SweepJob(corpus / "broken.ppm", Mode.RGB, 20.0, FAST)) is None

    points = run_sweep(jobs, workers=1)
    assert len(points) == 2 * 2 * 2
    keys = [(point.image, point.mode, point.ratio_requested) for point in points]
    assert keys == [
        (image, mode, ratio)
        for image in ("a_image", "b_image")
        for mode in ("rgb", "vector")
        for ratio in (20.0, 40.0)
    ]
    assert all(point.ratio_achieved >= point.ratio_requested for point in points)

    # a job that can not fit its budget is dropped
    tiny = SweepJob(images[0], Mode.LP, 200.0, FAST)
    assert run_job(tiny) is None


def test_run_sweep_02(tmp_path, monkeypatch):
    """Worker processes give the same points"""
    monkeypatch.setenv("RJIP_THREADS", "2")
    assert worker_count() <= 2
    assert worker_count(8) <= 2
    corpus = _write_corpus(tmp_path / "corpus")
    jobs = make_jobs(find_images(corpus), (Mode.RGB,), (20.0,), FAST)
    serial = run_sweep(jobs, workers=1)

    start_methods = []

    class RecordingExecutor(ProcessPoolExecutor):
        def __init__(self, *args, **kwargs):
            start_methods.append(kwargs["mp_context"].get_start_method())
            super().__init__(*args, **kwargs)

    monkeypatch.setattr(sweep_module, "ProcessPoolExecutor", RecordingExecutor)
    parallel = run_sweep(jobs, workers=2)
    assert [(p.image, p.mse, p.ratio_achieved) for p in parallel] == [
        (p.image, p.mse, p.ratio_achieved) for p in serial
    ]
    # workers start in fresh interpreters, after the thread variables are set
    assert start_methods == (["spawn"] if worker_count(2) == 2 else [])

    monkeypatch.setenv("RJIP_THREADS", "zero")
    with raises(ContractError):
        worker_count()
