from __future__ import annotations

from dataclasses import asdict, dataclass, fields
from io import StringIO
from math import nan
from pathlib import Path
from typing import TYPE_CHECKING

from numpy import unique
from pandas import DataFrame, read_csv

from ..codec.config import Mode
from ..core.exception import ContractError, FormatError
from ..core.image import distinct_colours, to_uint8
from ..tools.files import atomic_write_text
from ..tools.logger import INFO1, logger

if TYPE_CHECKING:
    from collections.abc import Sequence

    from ..codec.pipeline import CompressionResult

AVERAGE = "average"


@dataclass
class RDPoint:
    """One rate-distortion measurement; unused parameters are NaN."""

    image: str
    mode: str
    ratio_requested: float
    ratio_achieved: float
    mse: float
    encode_s: float
    h_y: float = nan
    q_y: float = nan
    h_c: float = nan
    q_c: float = nan
    f: float = nan
    k: float = nan
    distinct_colours: float = nan

    @classmethod
    def from_result(cls, image: str, ratio: float, result: CompressionResult) -> RDPoint:
        header = result.header
        point = cls(
            image,
            header.mode.label,
            float(ratio),
            result.ratio,
            result.mse,
            result.encode_seconds,
            distinct_colours=float(distinct_mask_colours(result)),
        )
        first = header.groups[0]
        point.h_y = first.h
        match header.mode:
            case Mode.RGB:
                point.q_y = first.levels
            case Mode.LP:
                point.q_y = first.levels
                point.h_c = header.groups[1].h
                point.q_c = header.groups[1].levels
                point.f = header.luma_factor
            case Mode.VECTOR:
                point.k = first.levels
        return point

    def as_dict(self) -> dict:
        return asdict(self)


COLUMNS = tuple(field.name for field in fields(RDPoint))


def distinct_mask_colours(result: CompressionResult) -> int:
    """Distinct colours the file stores at its mask pixels.

    Scalar RGB counts the stored triples, vector mode the codebook entries in use and
    the luma preference mode the reconstructed colours at the chroma mask pixels.
    """
    match result.header.mode:
        case Mode.RGB:
            return distinct_colours(result.groups[0].values)
        case Mode.VECTOR:
            return result.codebook_colours
        case Mode.LP:
            xs, ys = result.groups[1].grid.positions()
            rgb = to_uint8(result.reconstruction)[:, ys, xs].T
            return int(unique(rgb, axis=0).shape[0])
    raise FormatError(f"Unknown mode {result.header.mode}")


def average_points(points: Sequence[RDPoint]) -> list[RDPoint]:
    """Corpus averages per (mode, requested ratio); parameters are left empty."""
    frame = to_dataframe(points, averages=False)
    if frame.empty:
        return []
    grouped = frame.groupby(["mode", "ratio_requested"], sort=True)[
        ["ratio_achieved", "mse", "encode_s"]
    ].mean()
    return [
        RDPoint(AVERAGE, mode, ratio, row.ratio_achieved, row.mse, row.encode_s)
        for (mode, ratio), row in grouped.iterrows()
    ]


def to_dataframe(points: Sequence[RDPoint], *, averages: bool = True) -> DataFrame:
    points = list(points)
    if averages:
        points = points + average_points(points)
    return DataFrame([point.as_dict() for point in points], columns=list(COLUMNS))


def format_csv_line(point: RDPoint) -> str:
    buffer = StringIO()
    DataFrame([point.as_dict()], columns=list(COLUMNS)).to_csv(buffer, header=False, index=False)
    return buffer.getvalue().rstrip("\n")


def save_rd_points(
    filename: Path | str, points: Sequence[RDPoint], *, averages: bool = True
) -> None:
    """Write `.csv` or `.tsv`; `-` prints a table."""
    frame = to_dataframe(points, averages=averages)
    filename = str(filename)
    match filename.rsplit(".", 1):
        case ["-"]:
            from tabulate import tabulate

            print(tabulate(frame, headers="keys", showindex=False, floatfmt=".4g"))
        case [_, "csv"]:
            atomic_write_text(filename, frame.to_csv(index=False))
        case [_, "tsv" | "txt"]:
            atomic_write_text(filename, frame.to_csv(index=False, sep="\t"))
        case _:
            raise ContractError(f"Unsupported output format: {filename}")


def load_rd_points(filename: Path | str) -> DataFrame:
    filename = Path(filename)
    sep = "\t" if filename.suffix in {".tsv", ".txt"} else ","
    frame = read_csv(filename, sep=sep)
    if tuple(frame.columns) != COLUMNS:
        raise FormatError(f"Unexpected columns in {filename}: {', '.join(frame.columns)}")
    for column in COLUMNS[2:]:
        frame[column] = frame[column].astype(float)
    frame["image"] = frame["image"].astype(str)
    logger.log(INFO1, f"Read: {filename}")
    return frame

