from pytest import raises

from rjip_colour.core.exception import (
    ContractError,
    DecodeError,
    FormatError,
    InfeasibleRatioError,
    RjipError,
)


def test_exception_01():
    error = FormatError("Bad magic", offset=0)
    assert str(error) == "Bad magic [offset=0]"
    assert error.offset == 0

    error = InfeasibleRatioError("No grid fits 10 bytes", context="y")
    assert str(error) == "No grid fits 10 bytes [y]"
    assert error.offset is None

    assert str(ContractError()) == "Precondition violated!"
    assert str(DecodeError(offset=17)) == "Corrupted entropy payload! [offset=17]"

    with raises(FormatError):
        raise DecodeError("Range underflow")
    for cls in (ContractError, FormatError, DecodeError, InfeasibleRatioError):
        assert issubclass(cls, RjipError)
        assert issubclass(cls, RuntimeError)
