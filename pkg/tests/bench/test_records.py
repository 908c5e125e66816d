from math import isnan

from numpy import clip, linspace, meshgrid, rint, sin, stack
from numpy.random import default_rng
from pandas import read_csv
from pytest import mark, raises

from rjip_colour.bench.records import (
    AVERAGE,
    COLUMNS,
    RDPoint,
    average_points,
    format_csv_line,
    load_rd_points,
    save_rd_points,
    to_dataframe,
)
from rjip_colour.codec import CodecConfig, Mode, compress
from rjip_colour.core.exception import ContractError, FormatError
from rjip_colour.core.image import RasterImage

FAST = CodecConfig(h_samples=4, q_levels=(4, 16), k_levels=(4, 8), luma_factors=(0.5, 0.9))


def _image(seed: int) -> RasterImage:
    rng = default_rng(seed)
    x, y = meshgrid(linspace(0, 1, 32), linspace(0, 1, 24))
    planes = [128 + 100 * sin(a * x + b * y) for a, b in rng.uniform(1.0, 5.0, size=(3, 2))]
    return RasterImage(rint(clip(stack(planes), 0, 255)))


def _points() -> list[RDPoint]:
    points = []
    for image in ("kodim01", "kodim02"):
        for mode in ("rgb", "vector"):
            for ratio in (20.0, 50.0):
                mse = ratio * (2.0 if mode == "rgb" else 1.0) + (image == "kodim02")
                point = RDPoint(image, mode, ratio, ratio + 0.5, mse, 0.25, h_y=2.5)
                if mode == "rgb":
                    point.q_y = 16
                else:
                    point.k = 64
                point.distinct_colours = 100
                points.append(point)
    return points


def test_RDPoint_01():
    assert COLUMNS == (
        "image",
        "mode",
        "ratio_requested",
        "ratio_achieved",
        "mse",
        "encode_s",
        "h_y",
        "q_y",
        "h_c",
        "q_c",
        "f",
        "k",
        "distinct_colours",
    )
    point = RDPoint("kodim20", "lp", 20.0, 20.3, 63.5, 1.5, 2.0, 64, 4.0, 16, 0.7)
    line = format_csv_line(point)
    assert line.startswith("kodim20,lp,20.0,20.3,63.5,1.5,2.0,64")
    assert len(line.split(",")) == len(COLUMNS)
    assert isnan(point.k)


@mark.parametrize("mode", list(Mode))
def test_RDPoint_02(mode: Mode):
    result = compress(_image(int(mode)), 10, mode, FAST)
    point = RDPoint.from_result("synthetic", 10, result)
    assert point.mode == mode.label
    assert point.ratio_achieved >= point.ratio_requested == 10.0
    assert point.mse == result.mse
    assert point.h_y == result.header.groups[0].h
    assert point.distinct_colours >= 1
    match mode:
        case Mode.RGB:
            assert point.q_y == result.header.groups[0].levels
            assert all(isnan(value) for value in (point.h_c, point.q_c, point.f, point.k))
        case Mode.LP:
            assert point.f in (0.5, 0.9)
            assert point.q_c == result.header.groups[1].levels
            assert isnan(point.k)
        case Mode.VECTOR:
            assert point.k == result.header.codebook.size
            assert point.distinct_colours <= point.k
            assert isnan(point.q_y)


def test_average_points_01():
    points = _points()
    averages = average_points(points)
    assert len(averages) == 4
    assert all(point.image == AVERAGE for point in averages)
    rgb20 = next(p for p in averages if p.mode == "rgb" and p.ratio_requested == 20.0)
    assert rgb20.mse == 40.5
    assert rgb20.ratio_achieved == 20.5
    assert isnan(rgb20.h_y)
    assert average_points([]) == []

    frame = to_dataframe(points)
    assert len(frame) == 2 * 2 * 2 + 2 * 2
    assert list(frame.columns) == list(COLUMNS)
    assert len(to_dataframe(points, averages=False)) == 8


@mark.parametrize("suffix", (".csv", ".tsv"))
def test_save_rd_points_01(tmp_path, suffix: str):
    filename = tmp_path / f"results{suffix}"
    save_rd_points(filename, _points())
    frame = load_rd_points(filename)
    assert len(frame) == 12
    assert list(frame.columns) == list(COLUMNS)
    assert (frame[frame["image"] == AVERAGE]["mse"] > 0).all()
    row = frame[(frame["image"] == "kodim02") & (frame["mode"] == "vector")].iloc[0]
    assert row["k"] == 64
    assert isnan(row["q_y"])

    raw = read_csv(filename, sep="\t" if suffix == ".tsv" else ",")
    assert raw.shape == (12, 13)


def test_save_rd_points_02(tmp_path, capsys):
    save_rd_points("-", _points()[:2], averages=False)
    out = capsys.readouterr().out
    assert "kodim01" in out and "ratio_achieved" in out

    with raises(ContractError):
        save_rd_points(tmp_path / "results.xlsx", _points())

    broken = tmp_path / "broken.csv"
    broken.write_text("image,mode,ratio\nkodim01,rgb,20\n")
    with raises(FormatError):
        load_rd_points(broken)
