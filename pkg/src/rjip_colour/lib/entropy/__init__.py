from .payload import METHOD_RANGE, METHOD_STORED
from .range_coder import (
    AdaptiveModel,
    RangeDecoder,
    RangeEncoder,
    ideal_code_length,
    range_decode,
    range_decode_channels,
    range_encode,
    range_encode_channels,
)
from .residual import decode_residuals, encode_residuals, residual_decode, residual_encode
from .ppm2d import PPMModel, ppm2d_decode, ppm2d_encode

del payload, range_coder, residual, ppm2d
