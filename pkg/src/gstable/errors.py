"""Exception types raised across the package."""


class GStableError(Exception):
    """Base class for all package-specific errors."""


class NonConvergedQuadrature(GStableError):
    """Adaptive quadrature failed to reach its target tolerance."""


class OutOfRegime(GStableError):
    """Effective scale ratio w outside the admissible regime.

    Carries the offending value in ``args[1]`` when available.
    """

    def __init__(self, msg, w=None):
        super().__init__(msg)
        self.w = w


class RateDegenerate(GStableError):
    """Rate matrix requested for n too small (ln ln n must be positive)."""


class TemperingUnbounded(GStableError):
    """Tempering function exceeded its declared bound during rejection."""


class CoefficientBoundViolated(GStableError):
    """SDE coefficient dipped below its declared positive lower bound."""


class PathExplosion(GStableError):
    """Simulated path left the sanity box |X| <= 1e12; indicates a model bug."""


class NotConverged(GStableError):
    """Newton solver stopped before reaching tolerance (best iterate attached)."""

    def __init__(self, msg, result=None):
        super().__init__(msg)
        self.result = result


class SingularNormalizedHessian(GStableError):
    """Normalized Hessian numerically singular (condition number > 1e12)."""


class BadScenario(GStableError):
    """Scenario failed validation."""
