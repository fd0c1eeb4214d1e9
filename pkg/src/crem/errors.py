"""Exception types shared across the package."""


class CremError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(CremError):
    """A parameter or state violates a documented invariant."""


class NonPhysicalLength(CremError):
    """A backbone or subsegment length came out non-positive."""


class SingularInsertion(CremError):
    """Insertion depth too close to 0 or L for a stiffness evaluation."""


class NoConvergence(CremError):
    """An iterative solve exhausted its iteration budget."""


class SingularGradient(CremError):
    """The equilibrium sensitivity system is numerically singular."""


class SingularNormalEquations(CremError):
    """The weighted normal equations of the identification step are singular."""


class ParseError(CremError):
    """A config or dataset file could not be parsed."""


class FrameError(CremError):
    """A dataset declares a frame for which no transform is available."""


class InvalidCutoff(CremError):
    """A smoothing cutoff at or above the Nyquist frequency."""
