from __future__ import annotations

from dataclasses import asdict, dataclass, replace
from enum import IntEnum
from typing import TYPE_CHECKING, Literal

from schema import And, Optional, Or, Schema, SchemaError, Use

from ..core.exception import ContractError
from ..tools.schema import IsNumber, IsReadableFilename, IsSortedUniqueSeq, LoadYaml

if TYPE_CHECKING:
    from collections.abc import Mapping
    from pathlib import Path
    from typing import Any

LUMA_FACTORS = (0.5, 0.6, 0.7, 0.8, 0.9)
Q_LEVELS = (2, 4, 8, 16, 32, 64, 128, 256)
K_LEVELS = (4, 8, 16, 32, 64, 128, 256)

TonalMethod = Literal["direct", "walk", "off"]
LumaSplit = Literal["fraction", "literal"]


class Mode(IntEnum):
    RGB = 0
    LP = 1
    VECTOR = 2

    @classmethod
    def parse(cls, value: Mode | int | str) -> Mode:
        if isinstance(value, str):
            try:
                return cls[value.upper()]
            except KeyError as exc:
                raise ContractError(f"Unknown mode {value!r}, expect rgb, lp or vector") from exc
        try:
            return cls(value)
        except ValueError as exc:
            raise ContractError(f"Unknown mode {value!r}") from exc

    @property
    def label(self) -> str:
        return self.name.lower()


def luma_factor_index(factor: float) -> int:
    for index, candidate in enumerate(LUMA_FACTORS):
        if abs(candidate - factor) < 1e-9:
            return index
    raise ContractError(f"Luma factor {factor} is not one of {LUMA_FACTORS}")


def _canonical_factor(factor: float) -> float:
    return LUMA_FACTORS[luma_factor_index(factor)]


IsLumaFactor = And(IsNumber, Use(_canonical_factor), error="Invalid luma factor {}")

IsCodecConfig = Schema(
    And(
        {
            Optional("h_min", default=1.5): And(IsNumber, Use(float), lambda h: h >= 1.0),
            Optional("h_max", default=32.0): And(IsNumber, Use(float), lambda h: h >= 1.0),
            Optional("h_samples", default=12): And(int, lambda n: n >= 1),
            Optional("q_levels", default=Q_LEVELS): And(
                IsSortedUniqueSeq(int), lambda seq: all(2 <= q <= 256 for q in seq)
            ),
            Optional("k_levels", default=K_LEVELS): And(
                IsSortedUniqueSeq(int), lambda seq: all(1 <= k <= 256 for k in seq)
            ),
            Optional("refine_steps", default=3): And(int, lambda n: n >= 0),
            Optional("prune", default=True): bool,
            Optional("luma_factors", default=LUMA_FACTORS): And(
                Or((IsLumaFactor,), And([IsLumaFactor], Use(tuple))), lambda seq: len(seq) > 0
            ),
            Optional("luma_factor", default=None): Or(None, IsLumaFactor),
            Optional("luma_split", default="fraction"): Or("fraction", "literal"),
            Optional("tonal", default="direct"): Or("direct", "walk", "off"),
            Optional("tonal_max_sweeps", default=30): And(int, lambda n: n >= 1),
            Optional("refine_codebook", default=True): bool,
            Optional("codebook_max_sweeps", default=20): And(int, lambda n: n >= 1),
            Optional("kmeans_max_iters", default=50): And(int, lambda n: n >= 1),
            Optional("kmeans_restarts", default=1): And(int, lambda n: n >= 1),
            Optional("seed", default=0): And(int, lambda n: n >= 0),
        },
        lambda cfg: cfg["h_min"] <= cfg["h_max"],
        error="Invalid codec configuration: {}",
    )
)


@dataclass(frozen=True)
class CodecConfig:
    """Every tunable of the compression pipeline."""

    h_min: float = 1.5
    h_max: float = 32.0
    h_samples: int = 12
    q_levels: tuple[int, ...] = Q_LEVELS
    k_levels: tuple[int, ...] = K_LEVELS
    refine_steps: int = 3
    prune: bool = True
    luma_factors: tuple[float, ...] = LUMA_FACTORS
    luma_factor: float | None = None
    luma_split: LumaSplit = "fraction"
    tonal: TonalMethod = "direct"
    tonal_max_sweeps: int = 30
    refine_codebook: bool = True
    codebook_max_sweeps: int = 20
    kmeans_max_iters: int = 50
    kmeans_restarts: int = 1
    seed: int = 0

    def __post_init__(self):
        try:
            IsCodecConfig.validate(asdict(self))
        except SchemaError as exc:
            raise ContractError(str(exc)) from exc

    @classmethod
    def from_mapping(cls, mapping: Mapping[str, Any] | None) -> CodecConfig:
        try:
            data = IsCodecConfig.validate(dict(mapping or {}))
        except SchemaError as exc:
            raise ContractError(str(exc)) from exc
        return cls(**data)

    @classmethod
    def load(cls, filename: Path | str) -> CodecConfig:
        try:
            filename = IsReadableFilename.validate(filename)
        except SchemaError as exc:
            raise ContractError(f"Can not read configuration {filename}") from exc
        return cls.from_mapping(LoadYaml(filename))

    def replace(self, **kwargs) -> CodecConfig:
        return replace(self, **kwargs)

    @property
    def factors(self) -> tuple[float, ...]:
        """Luma factors to try: the fixed one if set, the whole grid otherwise."""
        return self.luma_factors if self.luma_factor is None else (self.luma_factor,)
