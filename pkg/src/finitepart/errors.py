"""Exception hierarchy shared by all finitepart modules."""


class FinitePartError(Exception):
    """Base class for everything this package raises on purpose."""


class InvalidComparison(FinitePartError):
    """Exponent keys of different scale families (or sizes) were compared."""


class DomainError(FinitePartError):
    """A scale function was evaluated outside its admissible parameter range."""


class SystemMismatch(FinitePartError):
    """Two decompositions built over different scale systems were combined."""


class InvalidExponent(FinitePartError):
    """An exponent does not satisfy the constraints of the requested operation."""


class InsufficientData(FinitePartError):
    """Too few samples for the requested extraction step."""


class NonPositiveLogLog(FinitePartError):
    """Second-stage regression needs lambda > e on the fitted tail."""


class Nonconvergent(FinitePartError):
    """The residual tail does not settle; no finite limit is reported."""


class StalledExtraction(FinitePartError):
    """The peel loop cannot make strict progress on the leading scale."""


class MaxTermsExceeded(FinitePartError):
    """Term budget exhausted while the residual still diverges."""


class QuadratureFailure(FinitePartError):
    """Numerical integration missed its requested error target."""


class ExpressionError(FinitePartError):
    """A config expression string could not be parsed or evaluated."""
