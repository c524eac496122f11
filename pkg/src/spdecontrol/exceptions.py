"""Exception types shared across the package."""


class SpdeControlError(Exception):
    """Base class for all package errors."""


class ConfigurationError(SpdeControlError):
    """Invalid parameter, config file entry, or constructor argument."""


class DimensionMismatchError(SpdeControlError):
    """Arrays or grids that should match in shape do not."""


class DomainError(SpdeControlError):
    """A spatial coordinate lies outside the domain."""


class NumericsError(SpdeControlError):
    """A linear solve or factorization failed."""


class DivergenceError(NumericsError):
    """A simulated field became non-finite.

    Attributes:
        step: time-step index at which the first non-finite value appeared.
    """

    def __init__(self, message: str, step: int):
        super().__init__(message)
        self.step = step


class DegenerateActuationError(NumericsError):
    """The actuator Gram matrix is (numerically) singular."""


class DegenerateBatchError(NumericsError):
    """Every rollout in a batch diverged; no finite cost to weight."""


class MetricsError(SpdeControlError):
    """Metrics requested on an empty mask or empty trial set."""
