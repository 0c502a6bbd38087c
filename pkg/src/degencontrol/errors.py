"""Exception types raised across the package."""


class MeshError(ValueError):
    """Invalid domain or mesh (zero area, origin outside, broken boundary)."""


class CaseViolation(ValueError):
    """Region geometry incompatible with the requested degeneracy case."""


class NestingViolation(ValueError):
    """The closure of omega is not contained in omega0."""


class QuadratureError(RuntimeError):
    """Quadrature rule not resolving a weighted integrand."""


class AssemblyError(RuntimeError):
    """A discrete form lost symmetry or definiteness."""


class WeightVerificationFailed(RuntimeError):
    """A constructed Carleman weight violates one of its required properties."""

    def __init__(self, quantity, point=None, value=None, detail=""):
        self.quantity = quantity
        self.point = point
        self.value = value
        msg = f"weight check '{quantity}' failed"
        if point is not None:
            msg += f" at x={tuple(float(v) for v in point)}"
        if value is not None:
            msg += f" (value {value:.6g})"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)


class NoEpsilonFound(RuntimeError):
    """No radius on the search grid satisfies the smallness inequalities."""


class ConvergenceError(RuntimeError):
    """Iterative solver exceeded its iteration cap."""

    def __init__(self, msg, iterations=None, residual=None):
        super().__init__(msg)
        self.iterations = iterations
        self.residual = residual
