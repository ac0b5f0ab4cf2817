"""Exception hierarchy shared by every module of the package."""


class LabError(Exception):
    """Base class for all errors raised by lrlab."""


class InvalidArgument(LabError, ValueError):
    pass


class PreconditionViolation(LabError, ValueError):
    """An operation was called outside the regime where its result is meaningful."""


class ResourceLimitError(LabError):
    """A dense representation would exceed the configured dimension or site cap."""


class UnsupportedBackend(LabError):
    pass


class ConfigError(LabError):
    """Raised by the CLI harness for schema or consistency problems in a config file."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
