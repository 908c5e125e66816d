from __future__ import annotations

from typing import TYPE_CHECKING

from ..codec.config import Mode
from ..core.exception import ContractError
from ..tools.logger import INFO1, logger
from .records import AVERAGE

if TYPE_CHECKING:
    from pathlib import Path

    from pandas import DataFrame

MODE_STYLE = {
    "rgb": {"label": "scalar RGB", "marker": "o", "color": "C0", "lc": 33},
    "lp": {"label": "luma preference", "marker": "s", "color": "C1", "lc": 208},
    "vector": {"label": "vector quantisation", "marker": "^", "color": "C2", "lc": 40},
}


def average_curves(frame: DataFrame) -> dict[str, DataFrame]:
    """Corpus-average MSE against the requested ratio, one curve per mode."""
    averages = frame[frame["image"] == AVERAGE]
    if averages.empty:
        raise ContractError("The table holds no corpus-average rows")
    curves = {}
    for mode in Mode:
        curve = averages[averages["mode"] == mode.label].sort_values("ratio_requested")
        if not curve.empty:
            curves[mode.label] = curve
    return curves


def plot_rd_curves(
    frame: DataFrame,
    *,
    save: Path | str | None = None,
    show: bool = False,
    close: bool = True,
    title: str | None = None,
):
    from matplotlib import pyplot as plt

    fig, ax = plt.subplots()
    for mode, curve in average_curves(frame).items():
        style = MODE_STYLE[mode]
        ax.plot(
            curve["ratio_requested"],
            curve["mse"],
            marker=style["marker"],
            color=style["color"],
            label=style["label"],
        )
    ax.set_xlabel("compression ratio")
    ax.set_ylabel("MSE")
    if title:
        ax.set_title(title)
    ax.grid(True, alpha=0.3)
    ax.legend()

    if save:
        logger.log(INFO1, f"Write: {save}")
        fig.savefig(save)
    if show:
        plt.show()
    if close:
        plt.close(fig)
    return fig


def plot_rd_terminal(frame: DataFrame, *, width: int = 60, height: int = 20) -> str:
    from plotille import Figure

    curves = average_curves(frame)
    fig = Figure()
    fig.x_label = "ratio"
    fig.y_label = "MSE"
    fig.width = width
    fig.height = height
    fig.color_mode = "byte"
    ratios = [value for curve in curves.values() for value in curve["ratio_requested"]]
    errors = [value for curve in curves.values() for value in curve["mse"]]
    xmin, xmax = min(ratios), max(ratios)
    fig.set_x_limits(min_=xmin, max_=xmax if xmax > xmin else xmin + 1.0)
    fig.set_y_limits(min_=0, max_=max(errors) * 1.05 or 1.0)
    for mode, curve in curves.items():
        style = MODE_STYLE[mode]
        x, y = list(curve["ratio_requested"]), list(curve["mse"])
        fig.plot(x, y, lc=style["lc"], label=style["label"])
        fig.scatter(x, y, lc=style["lc"], marker="x")
    return fig.show(legend=True)
