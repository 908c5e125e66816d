from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from multiprocessing import get_context
from pathlib import Path
from typing import TYPE_CHECKING

from ..codec.config import CodecConfig, Mode
from ..codec.pipeline import compress
from ..core.exception import ContractError, RjipError
from ..core.image import read_image
from ..tools.logger import INFO1, logger
from ..tools.threads import disable_implicit_numpy_multithreading, worker_count
from .records import RDPoint

if TYPE_CHECKING:
    from collections.abc import Sequence

IMAGE_SUFFIXES = (".ppm", ".pnm", ".png")
DEFAULT_RATIOS = "20:120:10"
FAST_IMAGES = ("kodim01", "kodim03", "kodim07", "kodim13", "kodim20", "kodim23")
FAST_RATIOS = (20.0, 50.0, 80.0, 120.0)


@dataclass(frozen=True)
class SweepJob:
    path: Path
    mode: Mode
    ratio: float
    config: CodecConfig

    @property
    def image(self) -> str:
        return self.path.stem

    @property
    def key(self) -> tuple[str, int, float]:
        return self.image, int(self.mode), self.ratio


def parse_ratios(text: str) -> tuple[float, ...]:
    """`start:stop:step` with the stop included, or a comma separated list."""
    try:
        if ":" in text:
            start, stop, step = (float(part) for part in text.split(":"))
            if step <= 0 or stop < start:
                raise ValueError
            count = int((stop - start) / step + 1e-9) + 1
            ratios = tuple(start + i * step for i in range(count))
        else:
            ratios = tuple(float(part) for part in text.split(","))
    except ValueError as exc:
        raise ContractError(f"Invalid ratio list {text!r}") from exc
    if not ratios:
        raise ContractError(f"Invalid ratio list {text!r}")
    return ratios


def parse_modes(text: str) -> tuple[Mode, ...]:
    if text == "all":
        return tuple(Mode)
    return tuple(Mode.parse(part.strip()) for part in text.split(","))


def find_images(corpus_dir: Path | str, names: Sequence[str] | None = None) -> list[Path]:
    corpus_dir = Path(corpus_dir)
    if not corpus_dir.is_dir():
        raise ContractError(f"Corpus folder {corpus_dir} does not exist")
    found: dict[str, Path] = {}
    for path in sorted(corpus_dir.iterdir()):
        if path.suffix.lower() in IMAGE_SUFFIXES:
            found.setdefault(path.stem, path)
    if names is not None:
        missing = [name for name in names if name not in found]
        if missing:
            logger.warning(f"Missing corpus images: {', '.join(missing)}")
        return [found[name] for name in names if name in found]
    return list(found.values())


def make_jobs(
    images: Sequence[Path], modes: Sequence[Mode], ratios: Sequence[float], config: CodecConfig
) -> list[SweepJob]:
    return [
        SweepJob(Path(path), mode, float(ratio), config)
        for path in images
        for mode in modes
        for ratio in ratios
    ]


def run_job(job: SweepJob) -> RDPoint | None:
    """Compress one image; a failure is logged and yields None."""
    try:
        image = read_image(job.path)
    except Exception as exc:
        # Pillow raises its own error types for broken files
        logger.warning(f"Skip unreadable {job.path}: {exc}")
        return None

    try:
        result = compress(image, job.ratio, job.mode, job.config)
    except RjipError as exc:
        logger.warning(f"{job.image} {job.mode.label} {job.ratio:g}:1 failed: {exc}")
        return None
    point = RDPoint.from_result(job.image, job.ratio, result)
    logger.log(
        INFO1,
        f"{job.image} {job.mode.label} {job.ratio:g}:1 -> {point.ratio_achieved:.2f}:1,"
        f" MSE {point.mse:.3f}",
    )
    return point


def run_sweep(jobs: Sequence[SweepJob], *, workers: int | None = None) -> list[RDPoint]:
    """Run the jobs, in worker processes when more than one is allowed.

    The points are sorted by image, mode and ratio regardless of completion order.
    """
    jobs = sorted(jobs, key=lambda job: job.key)
    nworkers = min(worker_count(workers), max(len(jobs), 1))
    logger.log(INFO1, f"Sweep {len(jobs)} jobs on {nworkers} worker(s)")
    if nworkers == 1:
        points = [run_job(job) for job in jobs]
    else:
        disable_implicit_numpy_multithreading()
        # spawned workers start numpy after the variables are set
        context = get_context("spawn")
        with ProcessPoolExecutor(max_workers=nworkers, mp_context=context) as executor:
            points = list(executor.map(run_job, jobs))
    return sorted(
        (point for point in points if point is not None),
        key=lambda point: (point.image, int(Mode.parse(point.mode)), point.ratio_requested),
    )
