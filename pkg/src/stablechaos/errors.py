"""Exception hierarchy shared across the library."""


class StableChaosError(ValueError):
    """Base class for all library-specific errors."""


class MassConstraintViolated(StableChaosError):
    """The tail coefficients put more than half of the probability mass in one tail."""


class ForbiddenIndex(StableChaosError):
    """A tail index combination that the theory excludes (alpha = 1, alpha + gamma in {1, 2})."""


class RangeError(StableChaosError):
    """A parameter lies outside its admissible range."""


class MomentUndefined(StableChaosError):
    """A moment or compensator was requested in a regime where it does not exist."""


class RootFindFailure(StableChaosError):
    """The tail quantile root finder failed to converge; indicates a defect, not user error."""


class ConfigError(StableChaosError):
    """An experiment or simulation configuration violates a precondition."""


class EmptyMeasure(StableChaosError):
    """An empirical measure with no support points was supplied."""


class EmptySample(StableChaosError):
    """An empirical sample with no points was supplied."""


class DegenerateDesign(StableChaosError):
    """Too few or non-distinct abscissae for a regression fit."""


class UncoveredCase(StableChaosError):
    """The (alpha, gamma) pair falls on a case boundary where no rate prediction exists."""


class RegimeError(StableChaosError):
    """An operation was invoked in the wrong stability regime (alpha < 1 vs alpha > 1)."""
