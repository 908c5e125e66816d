from .config import CodecConfig, Mode
from .header import GroupParams, Header, parse_header, serialise_header
from .channel_group import GroupEncoding, decode_channel_group, encode_channel_group
from .search import CandidateRecord, GroupSearch
from .pipeline import CompressionResult, budget_bytes, compress, decode, decode_with_header, encode
