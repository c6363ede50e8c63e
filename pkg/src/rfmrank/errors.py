"""Exception hierarchy shared by all modules."""


class RfmError(Exception):
    """Base class for errors raised by rfmrank."""


class FormatError(RfmError, ValueError):
    """Malformed input text. Carries the offending line number when known."""

    def __init__(self, message, line=None, path=None):
        self.message = message
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where += str(path)
        if line is not None:
            where += (":" if where else "line ") + str(line)
        super().__init__(f"{where}: {message}" if where else message)


class IntegrityError(RfmError):
    """Structurally valid data that violates a cross-record invariant."""


class ContractViolation(RfmError, ValueError):
    """A caller broke an operation's precondition."""


class ConfigError(RfmError):
    """Bad or unknown configuration key/value."""


class ModelVersionError(RfmError):
    """Model file does not match the feature extraction configuration."""


class NumericError(RfmError):
    """Numeric trouble the trainer flagged and the run treats as fatal."""
