from __future__ import annotations

from dataclasses import dataclass, field
from math import floor
from time import perf_counter
from typing import TYPE_CHECKING

from numpy import clip, concatenate

from ..core.exception import ContractError, InfeasibleRatioError
from ..core.image import (
    ColourSpace,
    RasterImage,
    mse,
    rgb_to_ycbcr,
    to_uint8,
    ycbcr_to_rgb,
)
from ..lib.quantize import UniformQuantizer, refine_codebook
from ..lib.tonal import (
    TonalProblem,
    TonalResult,
    tonal_optimize_direct,
    tonal_optimize_random_walk,
)
from ..tools.logger import INFO1, logger
from .channel_group import (
    decode_channel_group,
    encode_scalar_levels,
    encode_vector_labels,
    group_weights,
)
from .config import CodecConfig, Mode, luma_factor_index
from .header import (
    GroupParams,
    Header,
    frame_payloads,
    framing_size,
    header_size,
    minimal_file_size,
    parse_header,
    serialise_header,
    split_payloads,
)
from .search import GroupSearch

if TYPE_CHECKING:
    from numpy.typing import NDArray

    from ..lib.inpaint import KernelType
    from .channel_group import GroupEncoding
    from .search import CandidateRecord

RATIO_MIN = 5.0
RATIO_MAX = 200.0


def budget_bytes(width: int, height: int, ratio: float) -> int:
    """Largest file size, header included, for a ratio of raw 24-bit RGB to coded bytes."""
    if not ratio > 1.0:
        raise ContractError(f"Compression ratio must exceed 1, got {ratio}")
    if width < 1 or height < 1:
        raise ContractError(f"Invalid image dimensions {width}x{height}")
    return floor(3 * width * height / ratio)


@dataclass
class CompressionResult:
    data: bytes
    header: Header
    reconstruction: RasterImage
    config: CodecConfig
    mse: float
    budget: int
    encode_seconds: float
    groups: tuple[GroupEncoding, ...]
    candidates: list[CandidateRecord] = field(default_factory=list)
    tonal: list[TonalResult] = field(default_factory=list)

    @property
    def mode(self) -> Mode:
        return self.header.mode

    @property
    def ratio(self) -> float:
        return 3 * self.header.width * self.header.height / len(self.data)

    @property
    def luma_factor(self) -> float | None:
        return self.header.luma_factor

    @property
    def codebook_colours(self) -> int | None:
        """Codebook entries referenced by at least one mask pixel."""
        if self.header.codebook is None:
            return None
        return self.header.codebook.used(self.groups[0].symbols)


def _to_image(mode: Mode, reconstructions: list[NDArray]) -> RasterImage:
    """RGB image from the group reconstructions; shared by the encoder and the decoder."""
    planes = clip(concatenate(reconstructions, axis=0), 0.0, 255.0)
    if mode == Mode.LP:
        return ycbcr_to_rgb(RasterImage(planes, ColourSpace.YCbCr))
    return RasterImage(planes)


def _split_budget(available: int, factor: float, literal: bool) -> tuple[int, int]:
    """Luma and chroma allotments of the payload bytes."""
    share = factor / (1.0 + factor) if literal else factor
    luma = floor(share * available)
    return luma, available - luma


def _optimise_scalar(
    planes: NDArray, encoding: GroupEncoding, allotment: int, config: CodecConfig, function
) -> tuple[GroupEncoding, TonalResult | None]:
    if config.tonal == "off":
        return encoding, None
    xs, ys = encoding.grid.positions()
    quantizer = UniformQuantizer(encoding.levels)
    problem = TonalProblem(
        xs,
        ys,
        encoding.values,
        planes,
        group_weights(encoding.grid),
        quantizer,
        levels=encoding.symbols,
        function=function,
    )
    if config.tonal == "walk":
        result = tonal_optimize_random_walk(
            problem, config.seed, config.tonal_max_sweeps, function=function
        )
    else:
        result = tonal_optimize_direct(problem, config.tonal_max_sweeps, function=function)
    if result.changes == 0:
        return encoding, result

    optimised = encode_scalar_levels(
        planes, encoding.grid, result.levels, encoding.levels, function=function
    )
    if optimised.nbytes > allotment:
        logger.log(
            INFO1,
            f"Tonal optimisation needs {optimised.nbytes} bytes, {allotment} available: reverted",
        )
        return encoding, result
    return optimised, result


def _optimise_vector(
    planes: NDArray, encoding: GroupEncoding, allotment: int, config: CodecConfig, function
) -> tuple[GroupEncoding, TonalResult | None]:
    grid = encoding.grid
    xs, ys = grid.positions()
    weights = group_weights(grid)
    codebook = encoding.codebook
    result = None
    if config.tonal == "direct":
        problem = TonalProblem(
            xs,
            ys,
            encoding.values,
            planes,
            weights,
            codebook,
            labels=encoding.symbols,
            function=function,
        )
        result = tonal_optimize_direct(problem, config.tonal_max_sweeps, function=function)
        if result.changes:
            optimised = encode_vector_labels(
                planes, grid, result.labels, codebook, function=function
            )
            if optimised.nbytes > allotment:
                logger.log(
                    INFO1,
                    f"Tonal optimisation needs {optimised.nbytes} bytes,"
                    f" {allotment} available: reverted",
                )
            else:
                encoding = optimised

    if config.refine_codebook:
        refined = refine_codebook(
            codebook,
            encoding.symbols,
            (xs, ys),
            planes,
            weights,
            max_sweeps=config.codebook_max_sweeps,
            function=function,
        )
        if refined != codebook:
            # labels are unchanged, so is the payload size
            encoding = encode_vector_labels(
                planes, grid, encoding.symbols, refined, function=function
            )
    return encoding, result


def compress(
    image: RasterImage,
    ratio: float,
    mode: Mode | str,
    config: CodecConfig | None = None,
    *,
    function: KernelType = "numba",
) -> CompressionResult:
    """Search the parameters of `mode` for the lowest error within the byte budget."""
    start = perf_counter()
    mode = Mode.parse(mode)
    config = config or CodecConfig()
    if image.space != ColourSpace.RGB:
        raise ContractError(f"Expect an RGB image, got {image.space.name}")
    if not (RATIO_MIN <= ratio <= RATIO_MAX):
        raise ContractError(f"Compression ratio must lie in [{RATIO_MIN:g}, {RATIO_MAX:g}]")
    if mode == Mode.VECTOR and config.tonal == "walk":
        raise ContractError("The random walk needs scalar quantisation levels")

    width, height = image.width, image.height
    budget = budget_bytes(width, height, ratio)
    if budget < minimal_file_size(mode):
        raise InfeasibleRatioError(
            f"Budget of {budget} bytes is below the smallest {mode.label} file"
        )
    available = budget - header_size(mode) - framing_size(mode)
    logger.log(INFO1, f"Compress {width}x{height} with mode {mode.label}: budget {budget} bytes")

    luma_index = None
    searches: list[GroupSearch] = []
    tonal: list[TonalResult] = []
    match mode:
        case Mode.RGB | Mode.VECTOR:
            kind = "scalar" if mode == Mode.RGB else "vector"
            search = GroupSearch(mode.label, image.planes, kind, config, function=function)
            searches.append(search)
            targets = [image.planes]
            encodings = [search.search(available)]
            allotments = [available]
        case Mode.LP:
            ycc = rgb_to_ycbcr(image)
            targets = [ycc.planes[:1], ycc.planes[1:]]
            searches = [
                GroupSearch("y", targets[0], "scalar", config, function=function),
                GroupSearch("cbcr", targets[1], "scalar", config, function=function),
            ]
            literal = config.luma_split == "literal"
            best_error = None
            encodings = allotments = None
            for factor in config.factors:
                allotment = _split_budget(available, factor, literal)
                try:
                    trial = [
                        search.search(part) for search, part in zip(searches, allotment)
                    ]
                except InfeasibleRatioError as exc:
                    logger.log(INFO1, f"Luma factor {factor}: {exc}")
                    continue
                error = mse(image, _to_image(mode, [enc.reconstruction for enc in trial]))
                logger.log(INFO1, f"Luma factor {factor}: MSE {error:.6g}")
                if best_error is None or error < best_error:
                    best_error = error
                    encodings, allotments = trial, list(allotment)
                    luma_index = luma_factor_index(factor)
            if encodings is None:
                raise InfeasibleRatioError(f"No luma factor fits {available} payload bytes")

    optimise = _optimise_vector if mode == Mode.VECTOR else _optimise_scalar
    final = []
    for planes, encoding, allotment in zip(targets, encodings, allotments):
        encoding, result = optimise(planes, encoding, allotment, config, function)
        final.append(encoding)
        if result is not None:
            tonal.append(result)

    header = Header(
        mode,
        width,
        height,
        tuple(GroupParams(enc.h_fixed, enc.levels) for enc in final),
        luma_index,
        mode == Mode.LP and config.luma_split == "literal",
        final[0].codebook if mode == Mode.VECTOR else None,
    )
    data = serialise_header(header) + frame_payloads([enc.payload for enc in final])
    if len(data) > budget:
        raise RuntimeError(f"Encoded {len(data)} bytes exceed the budget of {budget} bytes")

    reconstruction = _to_image(mode, [enc.reconstruction for enc in final])
    error = mse(image, RasterImage(to_uint8(reconstruction)))
    elapsed = perf_counter() - start
    logger.log(
        INFO1,
        f"Encoded {len(data)} bytes (ratio {3 * width * height / len(data):.2f}),"
        f" MSE {error:.4f}, {elapsed:.2f} s",
    )
    return CompressionResult(
        data,
        header,
        reconstruction,
        config,
        error,
        budget,
        elapsed,
        tuple(final),
        [record for search in searches for record in search.records],
        tonal,
    )


def encode(
    image: RasterImage,
    ratio: float,
    mode: Mode | str,
    config: CodecConfig | None = None,
    *,
    function: KernelType = "numba",
) -> bytes:
    return compress(image, ratio, mode, config, function=function).data


def decode_with_header(
    data: bytes, *, function: KernelType = "numba"
) -> tuple[RasterImage, Header]:
    data = bytes(data)
    header, offset = parse_header(data)
    payloads = split_payloads(data, offset, len(header.groups))
    reconstructions = []
    for params, nchannels, payload in zip(header.groups, header.channels, payloads):
        grid = params.grid(header.width, header.height)
        if header.mode == Mode.VECTOR:
            admissible = header.codebook
        else:
            admissible = UniformQuantizer(params.levels)
        _, reconstruction = decode_channel_group(
            payload, grid, nchannels, admissible, function=function
        )
        reconstructions.append(reconstruction)
    return _to_image(header.mode, reconstructions), header


def decode(data: bytes, *, function: KernelType = "numba") -> RasterImage:
    return decode_with_header(data, function=function)[0]
