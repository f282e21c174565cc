"""Exception hierarchy shared by all wgbell modules."""


class WgbellError(Exception):
    """Base class for every error raised by the package."""


class NotHermitian(WgbellError):
    pass


class NotPSD(WgbellError):
    pass


class DimMismatch(WgbellError):
    pass


class BadParam(WgbellError):
    pass


class StepTooLarge(WgbellError):
    pass


class DtTooLarge(WgbellError):
    pass


class PositivityLost(WgbellError):
    pass


class KernelState(WgbellError):
    """The jump operator annihilates the requested state."""


class RecordTooShort(WgbellError):
    pass


class MissingStates(WgbellError):
    pass


class ParseError(WgbellError):
    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class RangeError(WgbellError):
    def __init__(self, key: str, message: str = ""):
        super().__init__(f"{key}: {message}" if message else key)
        self.key = key
