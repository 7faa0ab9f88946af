"""Exception hierarchy shared by all toepspec modules."""


class ToepspecError(Exception):
    """Base class for all library errors."""


class InvalidArgumentError(ToepspecError, ValueError):
    """An argument violates a documented precondition."""


class DomainError(ToepspecError, ValueError):
    """Evaluation requested at a point outside the symbol's domain,
    e.g. at a declared singular point without singularity-skip."""


class SingularSymbolError(ToepspecError, ArithmeticError):
    """A pointwise symbol inverse hit a (numerically) singular value.

    Carries the offending sample point in ``x``.
    """

    def __init__(self, msg, x=None):
        super().__init__(msg)
        self.x = x


class NumericFailureError(ToepspecError, RuntimeError):
    """An iterative numeric kernel failed to converge.

    ``partial`` may hold whatever partial results were salvaged.
    """

    def __init__(self, msg, partial=None):
        super().__init__(msg)
        self.partial = partial


class SingularMatrixError(NumericFailureError):
    """A factorization met an exactly (or numerically) singular pivot."""


class ResourceLimitError(ToepspecError, ValueError):
    """A requested dense order exceeds the configured cap."""


class PreconditionViolatedError(ToepspecError, ValueError):
    """A documented operation precondition does not hold for the input."""


class StagnationError(NumericFailureError):
    """Krylov basis collapsed (Arnoldi norm underflow) before convergence."""


class DslError(ToepspecError, ValueError):
    """Base class for expression-language errors; carries source position."""

    def __init__(self, msg, line=None, col=None):
        loc = "" if line is None else f" at line {line}, col {col}"
        super().__init__(msg + loc)
        self.line = line
        self.col = col


class DslSyntaxError(DslError):
    """Lexical or syntactic error in a symbol expression."""


class DslTypeError(DslError):
    """Arity or matrix-dimension mismatch in a symbol expression."""


class DslCompileError(DslError):
    """Expression cannot be compiled (e.g. division by an identically
    zero subexpression detected at probe points)."""
