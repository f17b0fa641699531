class OverlapSimError(Exception):
    """Base class for data errors raised by this package."""


class ParseError(OverlapSimError):
    def __init__(self, message, lineno=None):
        super().__init__(message)
        self.lineno = lineno


class ValidationError(OverlapSimError, ValueError):
    pass


class ModelFormatError(OverlapSimError):
    """A saved model could not be decoded."""


class ModelVersionError(ModelFormatError):
    pass


class AudioFormatError(OverlapSimError):
    pass
