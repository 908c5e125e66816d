class RjipError(RuntimeError):
    """Root of the codec errors.

    `offset` is the byte position of the failure inside a file or payload, when known.
    """

    offset: int | None

    def __init__(self, message: str, *, offset: int | None = None, context: str | None = None):
        if context:
            message = f"{message} [{context}]"
        if offset is not None:
            message = f"{message} [offset={offset}]"
        super().__init__(message)
        self.offset = offset


class ContractError(RjipError):
    def __init__(self, message: str | None = None, *args, **kwargs):
        if not message:
            message = "Precondition violated!"
        super().__init__(message, *args, **kwargs)


class FormatError(RjipError):
    def __init__(self, message: str | None = None, *args, **kwargs):
        if not message:
            message = "Malformed data!"
        super().__init__(message, *args, **kwargs)


class DecodeError(FormatError):
    def __init__(self, message: str | None = None, *args, **kwargs):
        if not message:
            message = "Corrupted entropy payload!"
        super().__init__(message, *args, **kwargs)


class InfeasibleRatioError(RjipError):
    def __init__(self, message: str | None = None, *args, **kwargs):
        if not message:
            message = "No configuration fits the byte budget!"
        super().__init__(message, *args, **kwargs)
