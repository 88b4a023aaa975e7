"""Exception hierarchy with machine-readable codes."""


class TorsionError(Exception):
    """Base class. ``code`` is stable and ends up in CLI records."""

    code = "TORSION_ERROR"
    exit_status = 3


class ValidationError(TorsionError):
    """Input data violates a structural invariant.

    ``invariant`` names the violated property, e.g. ``"d_squared_nonzero"``.
    """

    code = "VALIDATION_ERROR"
    exit_status = 2

    def __init__(self, invariant, detail=""):
        self.invariant = invariant
        self.detail = detail
        msg = invariant if not detail else f"{invariant}: {detail}"
        super().__init__(msg)


class NotAComplexError(ValidationError):
    code = "NOT_A_COMPLEX"

    def __init__(self, degree, residual):
        self.degree = degree
        self.residual = residual
        super().__init__(f"d_squared_nonzero at degree {degree}",
                         f"relative residual {residual:.3e}")


class ParseError(TorsionError):
    code = "PARSE_ERROR"
    exit_status = 4

    def __init__(self, message, location=None):
        self.location = location
        super().__init__(message if location is None else f"{location}: {message}")


class SingularFormError(TorsionError):
    code = "SINGULAR_FORM"


class NotAcyclicError(TorsionError):
    code = "NOT_ACYCLIC"


class ContourOnSpectrumError(TorsionError):
    code = "CONTOUR_ON_SPECTRUM"


class ClusterAmbiguousError(TorsionError):
    code = "CLUSTER_AMBIGUOUS"


class IntegrationDivergedError(TorsionError):
    code = "INTEGRATION_DIVERGED"


class ZetaPoleError(TorsionError):
    code = "ZETA_POLE"
