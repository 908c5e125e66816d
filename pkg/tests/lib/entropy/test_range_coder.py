from math import log2
from sys import argv

from numpy import arange, array, array_equal, full, int64, ones, zeros
from numpy.random import default_rng
from pytest import mark, raises

from rjip_colour.core.exception import ContractError, DecodeError
from rjip_colour.lib.entropy import (
    AdaptiveModel,
    RangeDecoder,
    RangeEncoder,
    ideal_code_length,
    range_decode,
    range_decode_channels,
    range_encode,
    range_encode_channels,
)

long_time = mark.skipif(
    "--include-long-time-tests" not in argv, reason="long-time tests switched off"
)


def test_AdaptiveModel_01():
    model = AdaptiveModel(4)
    assert model.total == 4
    assert model.cumulative(2) == (2, 1)

    model.update(2)
    assert model.total == 36
    assert model.cumulative(2) == (2, 33)
    assert model.cumulative(3) == (35, 1)
    assert model.find(0) == (0, 0, 1)
    assert model.find(2) == (2, 2, 33)
    assert model.find(34) == (2, 2, 33)
    assert model.find(35) == (3, 35, 1)

    other = model.copy()
    assert other == model
    other.update(0)
    assert other != model
    assert other.digest() != model.digest()

    with raises(ContractError):
        AdaptiveModel(0)


def test_AdaptiveModel_02():
    """Counts are halved once the total exceeds 2^16 and never reach zero"""
    model = AdaptiveModel(256)
    for _ in range(3000):
        model.update(7)
        assert model.total <= 1 << 16
        assert model.freq.min() >= 1
        assert model.total == model.freq.sum()
    assert model.freq[7] > 1 << 14
    assert (model.freq[arange(256) != 7] == 1).all()


@mark.parametrize("function", ("python", "numba"))
@mark.parametrize("alphabet", (2, 5, 16, 256))
def test_range_coder_01(function: str, alphabet: int):
    rng = default_rng(alphabet)
    for size in (0, 1, 2, 17, 1000):
        symbols = rng.integers(0, alphabet, size=size)
        data = range_encode(symbols, alphabet, function=function)
        decoded = range_decode(data, alphabet, size, function=function)
        assert array_equal(decoded, symbols)


@mark.parametrize("alphabet", (2, 3, 64))
def test_range_coder_02(alphabet: int):
    """Kernels and the object coder emit the same bytes and end in the same model state"""
    rng = default_rng(alphabet + 100)
    symbols = rng.integers(0, alphabet, size=3000) * (rng.random(3000) < 0.7)
    reference = AdaptiveModel(alphabet)
    expected = range_encode(symbols, reference, function="python")

    model = AdaptiveModel(alphabet)
    assert range_encode(symbols, model, function="numba") == expected
    assert model == reference

    model = AdaptiveModel(alphabet)
    encoder = RangeEncoder()
    for symbol in symbols:
        encoder.encode_symbol(model, int(symbol))
    assert encoder.finish() == expected
    assert model == reference

    model = AdaptiveModel(alphabet)
    decoder = RangeDecoder(expected)
    decoded = [decoder.decode_symbol(model) for _ in range(symbols.size)]
    assert array_equal(decoded, symbols)
    assert decoder.position == len(expected)
    assert model == reference


@mark.parametrize("function", ("python", "numba"))
def test_range_coder_03(function: str):
    """Channels are interleaved row by row, each column with its own model"""
    rng = default_rng(3)
    symbols = zeros((500, 3), dtype=int64)
    symbols[:, 0] = rng.integers(0, 8, size=500)
    symbols[:, 1] = 5
    symbols[:, 2] = rng.integers(0, 2, size=500)

    models = [AdaptiveModel(8) for _ in range(3)]
    data = range_encode_channels(symbols, models, function=function)
    assert models[1].freq[5] == 1 + 32 * 500

    fresh = [AdaptiveModel(8) for _ in range(3)]
    decoded = range_decode_channels(data, fresh, 500, function=function)
    assert array_equal(decoded, symbols)
    assert all(a == b for a, b in zip(models, fresh))

    # the shared model would see a mixed distribution
    shared = range_encode(symbols.reshape(-1), 8, function=function)
    assert len(data) < len(shared)

    with raises(ContractError):
        range_encode_channels(symbols, models[:2], function=function)
    with raises(ContractError):
        range_encode_channels(symbols + 8, [AdaptiveModel(8) for _ in range(3)])
    with raises(ContractError):
        range_encode_channels(symbols, [AdaptiveModel(8), AdaptiveModel(4), AdaptiveModel(8)])


def test_range_coder_04():
    """The hook sees identical model states on both sides"""
    rng = default_rng(4)
    symbols = rng.integers(0, 6, size=(400, 2))

    encoder_states = []
    data = range_encode_channels(
        symbols,
        [AdaptiveModel(6), AdaptiveModel(6)],
        hook=lambda index, model: encoder_states.append((index, model.digest())),
    )
    decoder_states = []
    decoded = range_decode_channels(
        data,
        [AdaptiveModel(6), AdaptiveModel(6)],
        400,
        hook=lambda index, model: decoder_states.append((index, model.digest())),
    )
    assert array_equal(decoded, symbols)
    assert len(encoder_states) == symbols.size
    assert encoder_states == decoder_states
    assert data == range_encode_channels(symbols, [AdaptiveModel(6), AdaptiveModel(6)])


@mark.parametrize("function", ("python", "numba"))
def test_range_coder_05(function: str):
    """Payload sizes against the adaptive-model code length"""
    constant = full(10_000, 42)
    data = range_encode(constant, 256, function=function)
    assert len(data) < 200

    rng = default_rng(5)
    uniform = rng.integers(0, 256, size=10_000)
    assert len(range_encode(uniform, 256, function=function)) >= 9_900

    weights = 1.0 / (1.0 + arange(16)) ** 1.5
    for seed in range(3):
        rng = default_rng(seed)
        symbols = rng.choice(16, size=20_000, p=weights / weights.sum())
        ideal = ideal_code_length(symbols, 16) / 8.0
        assert len(range_encode(symbols, 16, function=function)) <= 1.02 * ideal + 8.0


def test_ideal_code_length_01():
    assert ideal_code_length([], 4) == 0.0
    assert ideal_code_length([1], 4) == 2.0
    # second symbol: 33 out of 36
    assert abs(ideal_code_length([1, 1], 4) - (2.0 - log2(33 / 36))) < 1e-12


@mark.parametrize("function", ("python", "numba"))
def test_range_decode_01(function: str):
    rng = default_rng(6)
    symbols = rng.integers(0, 200, size=2000)
    data = range_encode(symbols, 200, function=function)

    for size in (0, 3, len(data) // 2, len(data) - 3):
        with raises(DecodeError):
            range_decode(data[:size], 200, 2000, function=function)
    with raises(DecodeError):
        RangeDecoder(data[:4])

    # code above the coded range: the first byte is shifted out
    garbage = bytes([0, 0xFF, 0xFF, 0xFF, 0xFF]) + bytes(16)
    with raises(DecodeError):
        range_decode(garbage, 3, 10, function=function)
    decoder = RangeDecoder(garbage)
    with raises(DecodeError):
        decoder.decode_symbol(AdaptiveModel(3))

    with raises(ContractError):
        range_decode(data, 200, -1, function=function)


def test_RangeEncoder_01():
    """Carries propagate through a run of 0xFF bytes"""
    rng = default_rng(7)
    for _ in range(50):
        totals = rng.integers(2, 1 << 16, size=300)
        cums = array([rng.integers(0, total) for total in totals])
        freqs = array([rng.integers(1, total - cum + 1) for total, cum in zip(totals, cums)])

        encoder = RangeEncoder()
        for cum, freq, total in zip(cums, freqs, totals):
            encoder.encode(int(cum), int(freq), int(total))
        data = encoder.finish()
        assert data[0] == 0

        decoder = RangeDecoder(data)
        for cum, freq, total in zip(cums, freqs, totals):
            value = decoder.get_freq(int(total))
            assert cum <= value < cum + freq
            decoder.decode(int(cum), int(freq))
        assert decoder.position == len(data)


def test_range_encode_02():
    assert range_decode(range_encode(ones(0, dtype=int64), 2), 2, 0).size == 0
    with raises(ContractError):
        range_encode([0, 1, 2], 2)


@long_time
def test_range_coder_random_01():
    """Exact round trip on 10^4 random short sequences"""
    rng = default_rng(10_000)
    for _ in range(10_000):
        alphabet = int(rng.integers(2, 257))
        size = int(rng.integers(0, 65))
        symbols = rng.integers(0, alphabet, size=size) * (rng.random(size) < rng.random())
        data = range_encode(symbols, alphabet)
        assert array_equal(range_decode(data, alphabet, size), symbols)
