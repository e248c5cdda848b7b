"""
Exceptions raised across the JSCCF packages.

Each class also derives from the builtin exception a caller would naturally
catch for the same situation, so ``except ValueError`` keeps working.
"""


class JsccfError(Exception):
    """Root of all JSCCF errors."""


class ShapeError(JsccfError, ValueError):
    """Tensor or signal extents do not match what an operation requires."""


class ParameterError(JsccfError, ValueError):
    """A parameter left its admissible set (e.g. negative GDN offsets)."""


class UsageError(JsccfError, RuntimeError):
    """An operation was called out of order or with the wrong layer index."""


class DegenerateSignalError(JsccfError, ValueError):
    """A signal cannot be power-normalized because it is identically zero."""


class ConfigurationError(JsccfError, ValueError):
    """Invalid architecture, channel, training or experiment configuration."""


class CheckpointFormatError(JsccfError, ValueError):
    """A checkpoint file is malformed; messages carry the byte offset."""


class CheckpointVersionError(CheckpointFormatError):
    """A checkpoint was written by an incompatible format version."""


class IngestionError(JsccfError, ValueError):
    """A dataset or table file could not be ingested."""


class UnsupportedModeError(JsccfError, NotImplementedError):
    """The requested experiment mode is declared unsupported."""


class NumericalError(JsccfError, ArithmeticError):
    """A loss or gradient became non-finite."""
