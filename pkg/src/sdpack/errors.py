"""Exception taxonomy shared by all sdpack modules."""


class SdpackError(Exception):
    """Base class for all errors raised by sdpack."""


class InvalidInput(SdpackError):
    """Input data is malformed (non-finite entries, bad shapes, bad options)."""


class NotPsd(SdpackError):
    """A matrix required to be positive semidefinite is not.

    Carries the offending minimum eigenvalue as ``witness``.
    """

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class SchemaError(SdpackError):
    """A JSON document does not match the problem schema."""


class ValidationError(SdpackError):
    """A parsed document violates a problem invariant.

    ``witness`` holds a machine-checkable piece of evidence (an eigenvalue,
    an index, or a dimension pair).
    """

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class RangeInclusionFails(SdpackError):
    """The range of the objective matrix is not contained in the range of
    the constraint-matrix sum, so no scalar dual bound exists."""


class DimensionMismatch(SdpackError):
    """Operands have incompatible dimensions."""


class InfeasibleInput(SdpackError):
    """The problem has no feasible point (some right-hand side is negative)."""


class UnboundedInput(SdpackError):
    """The problem is unbounded; ``ray`` carries an improving direction."""

    def __init__(self, message, ray=None):
        super().__init__(message)
        self.ray = ray


class RankNotOne(SdpackError):
    """The objective matrix does not have numerical rank one."""


class NonzeroR(SdpackError):
    """A combined problem carries nonzero coupling matrices where the
    second-order cone reduction requires them to vanish."""


class NonzeroH0(SdpackError):
    """A combined problem carries a nonzero objective vector for the free
    variables where the second-order cone reduction requires it to vanish."""


class InfeasiblePrimal(SdpackError):
    """The primal side of a combined problem is infeasible."""


class InfeasibleDual(SdpackError):
    """The dual side of a combined problem is infeasible."""


class InfeasibleDesign(SdpackError):
    """A design problem admits no allocation meeting its constraints."""


class WrongCriterion(SdpackError):
    """A design-problem builder was called with an incompatible criterion."""


class ZeroDual(SdpackError):
    """Design-weight recovery received an all-zero dual vector."""


class MaxIterations(SdpackError):
    """The iteration limit was reached; ``best`` carries the last iterate."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class NumericalFailure(SdpackError):
    """A factorization broke down or the iteration stalled irrecoverably."""


class PathDiverged(SdpackError):
    """Values along the constraint-perturbation path failed to be monotone
    nonincreasing in the perturbation size."""


class PathNotMonotone(SdpackError):
    """Values along the trace-cap path failed to be monotone nondecreasing."""
