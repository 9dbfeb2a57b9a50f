# Exception types shared across the package.


class SupportError(ValueError):
    """First argument of a relative entropy has weight outside the second's support."""


class FeasibilityError(ValueError):
    """Observed values admit no positive semidefinite state."""


class NoKeyError(ValueError):
    """A requested ratio or rate is undefined because the reference rate is zero or negative."""


class ConfigError(ValueError):
    """Inconsistent decoy intensities, sweep specification, or CLI configuration."""


class TruncationError(ValueError):
    """Photon-number cutoff leaves non-negligible Poisson tail mass."""
