"""Exception hierarchy shared by the simulator, diagnostics and CLI."""

from __future__ import annotations


class SmokeringError(Exception):
    """Base class for all package errors."""


class DomainError(SmokeringError, ValueError):
    """An argument lies outside the region where an operation is defined."""


class SingularityError(DomainError):
    """Evaluation requested at a kernel singularity (coincident points)."""


class ConfigurationError(SmokeringError, ValueError):
    """Invalid simulation or experiment configuration."""


class NumericalError(SmokeringError, RuntimeError):
    """A numerical failure during evaluation or time stepping."""


class AccuracyError(NumericalError):
    """Quadrature did not reach the requested tolerance."""

    def __init__(self, message: str, achieved: float):
        super().__init__(f"{message} (achieved {achieved:.3e})")
        self.achieved = achieved


class CollapseError(NumericalError):
    """Two point vortices came closer than the collapse threshold."""

    def __init__(self, time: float, pair: tuple[int, int], separation: float):
        super().__init__(
            f"vortices {pair[0]} and {pair[1]} collapsed at t={time:.6g} "
            f"(separation {separation:.3e})"
        )
        self.time = time
        self.pair = pair
        self.separation = separation


class AxisCollisionError(NumericalError):
    """A particle reached the symmetry axis (r0 + x2 <= 0)."""


class RegimeError(NumericalError):
    """A particle left the band |x2| <= r0/2 while strict regime checking is on."""


class DegenerateBlobError(DomainError):
    """Blob with zero total circulation or no particles."""


class FitError(SmokeringError, ValueError):
    """Not enough data to fit a convergence rate."""
