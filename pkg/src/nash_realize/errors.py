"""Error taxonomy shared across the package.

Every failure mode that callers are expected to branch on gets its own
class. All inherit from NashRealizeError so a CLI-level handler can catch
the whole family at once.
"""


class NashRealizeError(Exception):
    """Base class for all package-specific errors."""


class DomainViolation(NashRealizeError):
    """Evaluation point outside an expression's domain (e.g. nonpositive
    coordinate under a positive-orthant flag)."""


class ExactnessUnavailable(NashRealizeError):
    """EXACT evaluation requested where only floating evaluation exists
    (fractional exponents / positive-orthant expressions)."""


class ArityMismatch(NashRealizeError):
    """Operands disagree on the number of state variables."""


class AlphabetMismatch(NashRealizeError):
    """Input words over different alphabets were combined."""


class DomainExit(NashRealizeError):
    """A trajectory left the state-space box; the input is not admissible."""


class BlowUp(NashRealizeError):
    """The integrator failed (step size underflow / nonfinite state)."""


class OffGrid(NashRealizeError):
    """A table-backed oracle was queried outside its stored grid."""


class ExpressionBlowup(NashRealizeError):
    """A Lie-derivative tower exceeded the term-count cap.

    Carries the partial basis computed so far in ``partial_basis``.
    """

    def __init__(self, message, partial_basis=None):
        super().__init__(message)
        self.partial_basis = partial_basis


class DegenerateSamples(NashRealizeError):
    """All sample points produced rank 0 for nonconstant generators; the
    sampler is misconfigured."""


class IllConditioned(NashRealizeError):
    """Relation-fit matrix could not be scaled (nonfinite entries)."""


class NewtonDiverged(NashRealizeError):
    """Newton iteration left the implicit-function neighborhood."""


class DerivativeVanished(NashRealizeError):
    """|dQ/dT| fell below the derivative floor at a Newton iterate."""


class NoValidShiftInput(NashRealizeError):
    """No sampled shift input achieved derivative nondegeneracy.

    Carries the relation whose derivative kept vanishing in ``relation``.
    """

    def __init__(self, message, relation=None):
        super().__init__(message)
        self.relation = relation


class FitFailure(NashRealizeError):
    """No polynomial relation found within the degree bound, or a built
    realization failed its verification gate."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class NotReachableInput(NashRealizeError):
    """Observability reduction requires a semi-algebraically reachable
    system."""


class NotBijective(NashRealizeError):
    """Constructed isomorphism failed the round-trip or invertibility
    check."""


class DimensionMismatch(NashRealizeError):
    """Two systems expected to share a dimension do not."""
