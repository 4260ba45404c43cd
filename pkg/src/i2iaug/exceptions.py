"""Exception types shared across the pipeline."""


class I2IError(Exception):
    """Base class for all package errors."""


class ParseError(I2IError, ValueError):
    """A record in an input file could not be parsed."""

    def __init__(self, message, line=None, path=None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}"
        if line is not None:
            where += f":{line}" if where else f"line {line}"
        super().__init__(f"{where}: {message}" if where else message)


class EmptyDatasetError(I2IError, ValueError):
    pass


class UnknownEntityError(I2IError, KeyError):
    """A user or item id is not known to the model or dataset."""

    def __str__(self):
        return str(self.args[0]) if self.args else "unknown entity"


class UnparseableVerdictError(I2IError, ValueError):
    pass


class EndpointError(I2IError, RuntimeError):
    """The remote LLM endpoint failed or returned an unusable payload."""


class IndexFormatError(I2IError, ValueError):
    pass


class ConfigError(I2IError, ValueError):
    """Configuration failed validation; ``field`` holds the dotted path."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")
