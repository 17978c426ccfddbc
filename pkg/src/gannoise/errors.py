"""Exception hierarchy shared by every gannoise module."""


class GanNoiseError(Exception):
    """Base class for all package errors."""


class DimensionError(GanNoiseError, ValueError):
    """Operand shapes are incompatible."""


class DomainError(GanNoiseError, ValueError):
    """A value left the domain of an operation (log of a non-positive number, NaN, ...)."""


class ContractError(GanNoiseError, ValueError):
    """A documented precondition was violated by the caller."""


class FormatError(GanNoiseError, ValueError):
    """A binary or text file does not follow its declared format."""


class LengthError(FormatError):
    """A binary payload is shorter or longer than its header promises."""

    def __init__(self, message, expected, actual):
        super().__init__(f"{message}: expected {expected} bytes, got {actual}")
        self.expected = expected
        self.actual = actual


class NotPSDError(DomainError):
    """Matrix has an eigenvalue below the PSD tolerance."""


class ConfigError(GanNoiseError, ValueError):
    """Sweep/experiment configuration is invalid."""


class EmbedderQualityError(GanNoiseError, RuntimeError):
    """The surrogate embedder did not reach its minimum accuracy."""


class NonFiniteGradientError(DomainError):
    """An optimizer received a gradient containing NaN or Inf."""
