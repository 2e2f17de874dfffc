"""Exception types shared across the toolkit."""


class CarlemanError(Exception):
    """Base class for all toolkit errors."""


class NonRegular(CarlemanError):
    """A weight sequence violates one of the regularity conditions a)-d).

    Carries the list of (condition tag, first offending index) pairs.
    """

    def __init__(self, failures):
        self.failures = list(failures)
        tags = ", ".join(f"{tag}@{idx}" for tag, idx in self.failures)
        super().__init__(f"sequence fails regularity condition(s): {tags}")


class GuardExceeded(CarlemanError):
    """An infimum over the materialized table hit the boundary index K_max
    with terms still decreasing, so the reported value would not be the
    true infimum.  The argument r is too small for the table size."""


class ArityMismatch(CarlemanError):
    """Jet operands disagree in variable counts, base point, or budget."""


class BudgetExhausted(CarlemanError):
    """A jet operation needs more polynomial degree than the budget holds."""


class QuadratureTooCoarse(CarlemanError):
    """Disk-kernel normalization missed its certification tolerance."""


class FitFailed(CarlemanError):
    """No constant on the search grid satisfies the target inequality."""


class Undersampled(CarlemanError):
    """Grid spacing too coarse to resolve the requested FBI frequency."""


class NoCone(CarlemanError):
    """No sampled direction admits a phase-bound constant above the floor."""


class TrustBoxExceeded(CarlemanError):
    """Sample values leave the region where a jet is trusted."""


class SingularJacobian(CarlemanError):
    """Z_x is numerically singular at some sample (condition number too large)."""


class CharacteristicDirection(CarlemanError):
    """The covector is characteristic; the rotation amplitude R vanishes."""


class ConfigError(CarlemanError):
    """Malformed or inconsistent CLI configuration."""
