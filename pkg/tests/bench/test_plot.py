from matplotlib import use
from pytest import raises

from rjip_colour.bench.plot import average_curves, plot_rd_curves, plot_rd_terminal
from rjip_colour.bench.records import RDPoint, to_dataframe
from rjip_colour.core.exception import ContractError

use("Agg")


def _frame(modes=("rgb", "lp", "vector")):
    points = []
    for image in ("kodim01", "kodim02"):
        for scale, mode in enumerate(modes, 1):
            for ratio in (20.0, 50.0, 80.0):
                points.append(RDPoint(image, mode, ratio, ratio + 0.1, ratio * scale, 0.1))
    return to_dataframe(points)


def test_average_curves_01():
    curves = average_curves(_frame())
    assert list(curves) == ["rgb", "lp", "vector"]
    assert curves["lp"]["mse"].tolist() == [40.0, 100.0, 160.0]
    assert list(average_curves(_frame(("vector",)))) == ["vector"]

    with raises(ContractError):
        average_curves(to_dataframe([RDPoint("a", "rgb", 20, 21, 1, 0)], averages=False))


def test_plot_rd_curves_01(output_path: str, test_name: str):
    path = f"{output_path}/{test_name}.png"
    fig = plot_rd_curves(_frame(), save=path, title="synthetic corpus")
    labels = [line.get_label() for line in fig.axes[0].get_lines()]
    assert labels == ["scalar RGB", "luma preference", "vector quantisation"]


def test_plot_rd_terminal_01():
    text = plot_rd_terminal(_frame())
    assert "MSE" in text
    assert "luma preference" in text
    # a single ratio still gets an x range
    single = _frame()
    plot_rd_terminal(single[single["ratio_requested"] == 20.0], width=30, height=10)
