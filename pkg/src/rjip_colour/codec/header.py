"""Container layout, big-endian throughout.

    magic "RJPC" | version | mode | width u16 | height u16
    per channel group: h u16 (8.8 fixed point) | levels - 1
    mode lp:     luma factor index, bit 7 set for the literal budget split
    mode vector: codebook (k - 1, then k RGB triples)
    per channel group: payload length u32 | payload
"""

from __future__ import annotations

from dataclasses import dataclass
from struct import Struct, error as StructError

from ..core.exception import ContractError, FormatError
from ..lib.mask import RegularGrid
from ..lib.quantize import Codebook
from .config import LUMA_FACTORS, Mode

MAGIC = b"RJPC"
VERSION = 1
EXTENSION = ".rjc"

_FIXED = Struct(">4sBBHH")
_GROUP = Struct(">HB")
_LENGTH = Struct(">I")
LITERAL_SPLIT_FLAG = 0x80

# channels per group, in header order
GROUP_CHANNELS: dict[Mode, tuple[int, ...]] = {
    Mode.RGB: (3,),
    Mode.LP: (1, 2),
    Mode.VECTOR: (3,),
}


@dataclass(frozen=True)
class GroupParams:
    """Grid spacing in 8.8 fixed point and the level count: q, or k for a codebook."""

    h_fixed: int
    levels: int

    def __post_init__(self):
        if not (1 <= self.levels <= 256):
            raise ContractError(f"Level count must lie in [1, 256], got {self.levels}")
        if not (0 < self.h_fixed < 1 << 16):
            raise ContractError(f"Invalid fixed-point h {self.h_fixed}")

    @property
    def h(self) -> float:
        return self.h_fixed / 256

    def grid(self, width: int, height: int) -> RegularGrid:
        return RegularGrid(self.h_fixed, width, height)


@dataclass(frozen=True)
class Header:
    mode: Mode
    width: int
    height: int
    groups: tuple[GroupParams, ...]
    luma_factor_index: int | None = None
    literal_split: bool = False
    codebook: Codebook | None = None

    def __post_init__(self):
        if not (1 <= self.width < 1 << 16 and 1 <= self.height < 1 << 16):
            raise ContractError(f"Image dimensions {self.width}x{self.height} do not fit 16 bits")
        ngroups = len(GROUP_CHANNELS[self.mode])
        if len(self.groups) != ngroups:
            raise ContractError(f"Mode {self.mode.label} needs {ngroups} channel groups")
        if (self.mode == Mode.LP) != (self.luma_factor_index is not None):
            raise ContractError("The luma factor is stored for the lp mode only")
        if self.luma_factor_index is not None and not (
            0 <= self.luma_factor_index < len(LUMA_FACTORS)
        ):
            raise ContractError(f"Invalid luma factor index {self.luma_factor_index}")
        if (self.mode == Mode.VECTOR) != (self.codebook is not None):
            raise ContractError("The codebook is stored for the vector mode only")
        if self.codebook is not None and self.codebook.size != self.groups[0].levels:
            raise ContractError("Codebook size differs from the group level count")
        if self.mode != Mode.VECTOR and any(group.levels < 2 for group in self.groups):
            raise ContractError("Scalar quantisation needs at least two levels")

    @property
    def luma_factor(self) -> float | None:
        if self.luma_factor_index is None:
            return None
        return LUMA_FACTORS[self.luma_factor_index]

    @property
    def channels(self) -> tuple[int, ...]:
        return GROUP_CHANNELS[self.mode]

    @property
    def size(self) -> int:
        """Header bytes, without payload framing."""
        return header_size(self.mode, None if self.codebook is None else self.codebook.size)


def header_size(mode: Mode, codebook_size: int | None = None) -> int:
    """Header bytes; the codebook is counted only when its size is given."""
    size = _FIXED.size + _GROUP.size * len(GROUP_CHANNELS[mode])
    if mode == Mode.LP:
        size += 1
    if mode == Mode.VECTOR and codebook_size is not None:
        size += 1 + 3 * codebook_size
    return size


def framing_size(mode: Mode) -> int:
    return _LENGTH.size * len(GROUP_CHANNELS[mode])


def minimal_file_size(mode: Mode) -> int:
    """Smallest possible file: header, a one-colour codebook, framing and one-byte payloads."""
    ngroups = len(GROUP_CHANNELS[mode])
    return header_size(mode, 1) + framing_size(mode) + ngroups


def serialise_header(header: Header) -> bytes:
    parts = [_FIXED.pack(MAGIC, VERSION, int(header.mode), header.width, header.height)]
    parts.extend(_GROUP.pack(group.h_fixed, group.levels - 1) for group in header.groups)
    if header.mode == Mode.LP:
        flag = LITERAL_SPLIT_FLAG if header.literal_split else 0
        parts.append(bytes([header.luma_factor_index | flag]))
    if header.codebook is not None:
        parts.append(header.codebook.to_bytes())
    return b"".join(parts)


def parse_header(data: bytes) -> tuple[Header, int]:
    """Returns the header and the offset of the first payload length."""
    try:
        magic, version, mode, width, height = _FIXED.unpack_from(data, 0)
    except StructError as exc:
        raise FormatError("Truncated header", offset=len(data)) from exc
    if magic != MAGIC:
        raise FormatError(f"Bad magic {magic!r}", offset=0)
    if version != VERSION:
        raise FormatError(f"Unsupported version {version}", offset=4)
    try:
        mode = Mode(mode)
    except ValueError as exc:
        raise FormatError(f"Unknown mode {mode}", offset=5) from exc
    if width < 1 or height < 1:
        raise FormatError(f"Invalid dimensions {width}x{height}", offset=6)

    offset = _FIXED.size
    groups = []
    for _ in GROUP_CHANNELS[mode]:
        try:
            h_fixed, levels = _GROUP.unpack_from(data, offset)
        except StructError as exc:
            raise FormatError("Truncated channel group parameters", offset=len(data)) from exc
        # validates h against the image size
        RegularGrid.from_bytes(data, width, height, offset)
        if mode != Mode.VECTOR and levels == 0:
            raise FormatError("Scalar quantisation needs at least two levels", offset=offset + 2)
        groups.append(GroupParams(h_fixed, levels + 1))
        offset += _GROUP.size

    luma_factor_index = None
    literal_split = False
    if mode == Mode.LP:
        if offset >= len(data):
            raise FormatError("Truncated luma factor", offset=len(data))
        byte = data[offset]
        literal_split = bool(byte & LITERAL_SPLIT_FLAG)
        luma_factor_index = byte & ~LITERAL_SPLIT_FLAG
        if luma_factor_index >= len(LUMA_FACTORS):
            raise FormatError(f"Invalid luma factor index {luma_factor_index}", offset=offset)
        offset += 1

    codebook = None
    if mode == Mode.VECTOR:
        start = offset
        codebook, offset = Codebook.from_bytes(data, offset)
        if codebook.size != groups[0].levels:
            raise FormatError("Codebook size differs from the group level count", offset=start)

    header = Header(
        mode, width, height, tuple(groups), luma_factor_index, literal_split, codebook
    )
    return header, offset


def frame_payloads(payloads: list[bytes]) -> bytes:
    return b"".join(_LENGTH.pack(len(payload)) + payload for payload in payloads)


def split_payloads(data: bytes, offset: int, count: int) -> list[bytes]:
    payloads = []
    for _ in range(count):
        try:
            (length,) = _LENGTH.unpack_from(data, offset)
        except StructError as exc:
            raise FormatError("Truncated payload length", offset=len(data)) from exc
        offset += _LENGTH.size
        if offset + length > len(data):
            raise FormatError(
                f"Truncated payload: expect {length} bytes, got {len(data) - offset}",
                offset=len(data),
            )
        payloads.append(data[offset : offset + length])
        offset += length
    if offset != len(data):
        raise FormatError(f"{len(data) - offset} unexpected trailing bytes", offset=offset)
    return payloads
