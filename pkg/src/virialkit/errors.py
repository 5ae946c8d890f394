"""Exception hierarchy shared by all modules."""


class VirialKitError(Exception):
    """Base class for all errors raised by virialkit."""


class OutOfChart(VirialKitError):
    """A point failed the domain guard of its chart."""


class SingularFrame(VirialKitError):
    """The frame matrix is singular or too badly conditioned to invert."""


class DegenerateLagrangian(VirialKitError):
    """The fibre Hessian of a Lagrangian cannot be inverted."""


class DegenerateSymplectic(VirialKitError):
    """A symplectic section is not invertible."""


class NotMechanicalType(VirialKitError):
    """A Lagrangian without a registered kinetic/potential split."""


class JetMismatch(VirialKitError):
    """Analytic derivatives disagree with finite differences."""


class GuardTripped(VirialKitError):
    """Integration left the chart; the partial trajectory is attached."""

    def __init__(self, message, trajectory=None):
        super().__init__(message)
        self.trajectory = trajectory


class StepSizeUnderflow(VirialKitError):
    """The adaptive integrator could not meet its tolerance."""


class PeriodExceedsSpan(VirialKitError):
    """A periodic average was requested over more time than was integrated."""


class UnknownModel(VirialKitError):
    pass


class InvalidParams(VirialKitError):
    pass


class ConfigError(VirialKitError):
    """Scenario file missing, unreadable or schema-invalid."""


class ValidationFailure(VirialKitError):
    """A model failed one of its registration checks."""
