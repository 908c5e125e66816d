from __future__ import annotations

from argparse import ArgumentParser
from pathlib import Path
from typing import TYPE_CHECKING

from ..codec.config import LUMA_FACTORS, CodecConfig, Mode
from ..codec.header import Header
from ..codec.pipeline import compress, decode_with_header
from ..core.exception import RjipError
from ..core.image import RasterImage, distinct_colours, psnr, read_image, save_ppm, to_uint8
from ..tools.files import atomic_write_bytes
from ..tools.logger import INFO1, logger, set_verbosity
from .corpus import KODAK_NAMES, fetch_kodak
from .records import RDPoint, format_csv_line, load_rd_points, save_rd_points
from .sweep import (
    DEFAULT_RATIOS,
    FAST_IMAGES,
    FAST_RATIOS,
    find_images,
    make_jobs,
    parse_modes,
    parse_ratios,
    run_sweep,
)

if TYPE_CHECKING:
    from argparse import Namespace
    from collections.abc import Sequence


def make_parser() -> ArgumentParser:
    parser = ArgumentParser(
        prog="rjip",
        description="Colour image compression by inpainting from a regular grid of pixels",
    )
    parser.add_argument(
        "-v", "--verbose", action="count", default=0, help="increase verbosity (up to -vvvv)"
    )
    commands = parser.add_subparsers(dest="command", required=True)

    cmd = commands.add_parser("compress", help="encode a PPM image")
    cmd.add_argument("input", type=Path, help="PPM image (other formats through Pillow)")
    cmd.add_argument("output", type=Path, help="compressed file")
    cmd.add_argument("--ratio", type=float, required=True, help="compression ratio R of R:1")
    cmd.add_argument("--mode", choices=[mode.label for mode in Mode], default="rgb")
    cmd.add_argument(
        "--luma-factor", type=float, choices=LUMA_FACTORS, help="fixed luma factor (lp mode)"
    )
    cmd.add_argument("--luma-split", choices=("fraction", "literal"), help="luma budget split")
    cmd.add_argument("--seed", type=int, help="random seed of k-means and the random walk")
    cmd.add_argument("--tonal", choices=("direct", "walk", "off"), help="tonal optimisation")
    cmd.add_argument("--config", type=Path, help="yaml file with codec parameters")
    cmd.set_defaults(run=run_compress)

    cmd = commands.add_parser("decompress", help="decode a compressed file into a PPM image")
    cmd.add_argument("input", type=Path, help="compressed file")
    cmd.add_argument("output", type=Path, help="PPM image")
    cmd.set_defaults(run=run_decompress)

    cmd = commands.add_parser("sweep", help="rate-distortion sweep over an image folder")
    cmd.add_argument("corpus", type=Path, help="folder with PPM images")
    cmd.add_argument("--ratios", help=f"start:stop:step or a comma list, default {DEFAULT_RATIOS}")
    cmd.add_argument("--modes", default="all", help="comma list of rgb, lp, vector or all")
    cmd.add_argument("--out", default="results.csv", help="csv/tsv table, - to print")
    cmd.add_argument(
        "--fast", action="store_true", help="six images and the ratios 20, 50, 80, 120"
    )
    cmd.add_argument("--workers", type=int, help="worker processes, capped by RJIP_THREADS")
    cmd.add_argument("--seed", type=int, help="random seed")
    cmd.add_argument("--config", type=Path, help="yaml file with codec parameters")
    cmd.set_defaults(run=run_sweep_command)

    cmd = commands.add_parser("plot", help="plot rate-distortion curves of a sweep table")
    cmd.add_argument("table", type=Path, help="sweep results")
    cmd.add_argument("--out", type=Path, help="figure file")
    cmd.add_argument("--terminal", action="store_true", help="draw in the terminal")
    cmd.set_defaults(run=run_plot)

    cmd = commands.add_parser("fetch-kodak", help="download the Kodak images as PPM")
    cmd.add_argument("dest", type=Path, help="target folder")
    cmd.add_argument("--checksums", type=Path, help="SHA-256 manifest, default dest/SHA256SUMS")
    cmd.add_argument("--fast", action="store_true", help="only the six images of the fast sweep")
    cmd.set_defaults(run=run_fetch_kodak)

    return parser


def load_config(args: Namespace) -> CodecConfig:
    config = CodecConfig.load(args.config) if args.config else CodecConfig()
    overrides = {
        name: value
        for name in ("luma_factor", "luma_split", "seed", "tonal")
        if (value := getattr(args, name, None)) is not None
    }
    return config.replace(**overrides) if overrides else config


def describe_header(header: Header) -> str:
    parts = [f"mode={header.mode.label}", f"width={header.width}", f"height={header.height}"]
    names = ("y", "c") if header.mode == Mode.LP else ("",)
    level_name = "k" if header.mode == Mode.VECTOR else "q"
    for suffix, group in zip(names, header.groups):
        suffix = f"_{suffix}" if suffix else ""
        parts.append(f"h{suffix}={group.h:g}")
        parts.append(f"{level_name}{suffix}={group.levels}")
    if header.luma_factor is not None:
        parts.append(f"f={header.luma_factor:g}")
        parts.append(f"split={'literal' if header.literal_split else 'fraction'}")
    return ",".join(parts)


def run_compress(args: Namespace) -> int:
    image = read_image(args.input)
    result = compress(image, args.ratio, args.mode, load_config(args))
    atomic_write_bytes(args.output, result.data)

    decoded = RasterImage(to_uint8(result.reconstruction))
    logger.log(
        INFO1,
        f"{len(result.data)} bytes, ratio {result.ratio:.3f}, MSE {result.mse:.4f},"
        f" PSNR {psnr(image, decoded):.3f} dB, {distinct_colours(decoded)} decoded colours",
    )
    print(format_csv_line(RDPoint.from_result(args.input.stem, args.ratio, result)))
    return 0


def run_decompress(args: Namespace) -> int:
    image, header = decode_with_header(args.input.read_bytes())
    atomic_write_bytes(args.output, save_ppm(image))
    print(describe_header(header))
    return 0


def run_sweep_command(args: Namespace) -> int:
    config = load_config(args)
    if args.ratios is not None:
        ratios = parse_ratios(args.ratios)
    else:
        ratios = FAST_RATIOS if args.fast else parse_ratios(DEFAULT_RATIOS)
    images = find_images(args.corpus, FAST_IMAGES if args.fast else None)
    if not images:
        logger.error(f"No images in {args.corpus}")
        return 1

    jobs = make_jobs(images, parse_modes(args.modes), ratios, config)
    points = run_sweep(jobs, workers=args.workers)
    if not points:
        logger.error("Every sweep job failed")
        return 1
    save_rd_points(args.out, points)
    return 0


def run_plot(args: Namespace) -> int:
    from .plot import plot_rd_curves, plot_rd_terminal

    frame = load_rd_points(args.table)
    if args.out:
        plot_rd_curves(frame, save=args.out)
    if args.terminal or not args.out:
        print(plot_rd_terminal(frame))
    return 0


def run_fetch_kodak(args: Namespace) -> int:
    names = FAST_IMAGES if args.fast else KODAK_NAMES
    paths = fetch_kodak(args.dest, names=names, checksums=args.checksums)
    logger.info(f"{len(paths)} images in {args.dest}")
    return 0


def main(argv: Sequence[str] | None = None) -> int:
    args = make_parser().parse_args(argv)
    set_verbosity(args.verbose)
    try:
        return args.run(args)
    except RjipError as exc:
        logger.error(str(exc))
    except OSError as exc:
        logger.error(f"{exc.filename or ''}: {exc.strerror or exc}")
    return 1


if __name__ == "__main__":
    raise SystemExit(main())
