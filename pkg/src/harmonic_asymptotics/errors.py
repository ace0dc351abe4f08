"""Exception hierarchy shared by all analysis modules."""


class AnalysisError(Exception):
    """Base class for every error raised by the package."""


class SpecificationError(AnalysisError, ValueError):
    """Inputs violate a structural contract (lengths, ranges, ordering)."""


class DegenerateFieldError(AnalysisError):
    """The field is (numerically) identically zero where it is analysed."""


class DomainError(AnalysisError):
    """A field was queried outside its domain of validity."""

    def __init__(self, message, point=None):
        super().__init__(message)
        self.point = point


class EmptySetError(AnalysisError):
    """An integration set has no quadrature node inside the domain."""


class NumericError(AnalysisError):
    """A numerical procedure failed (NaN, stagnation, non-convergence)."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class EvaluationError(NumericError):
    """Field evaluation produced a non-finite value."""


class PreconditionError(AnalysisError):
    """An analysis precondition does not hold; carries diagnostics."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class DataError(AnalysisError):
    """Coefficient or boundary data is unusable (e.g. non-finite)."""


class ConfigError(AnalysisError):
    """Experiment configuration is malformed; carries the offending line."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class RangeError(AnalysisError, IndexError):
    """An index lies outside a computed range (e.g. beyond a spectrum)."""
