"""Exception types for the abstraction toolkit."""

from __future__ import annotations


class MemabsError(Exception):
    """Base class for toolkit-specific failures."""


class UnstableDynamicsError(MemabsError):
    """The invariant-covariance fixed point did not converge (spectral
    radius of the dynamics matrix is not below 1)."""


class UnmodeledRegionError(MemabsError):
    """Probability mass reached a sequence state that was never observed
    while building the abstraction."""

    def __init__(self, leaked_mass: float, step: int):
        self.leaked_mass = leaked_mass
        self.step = step
        super().__init__(
            f"{leaked_mass:.3e} probability mass reached unobserved sequence "
            f"states at propagation step {step}; the abstraction does not "
            "model this region (enlarge the trace or coarsen the partition)"
        )


class ZeroFrequencyCellError(MemabsError):
    """A cell carries positive approximate mass but zero steady-state
    frequency, so the density ratio is undefined there."""


class CapabilityError(MemabsError):
    """The requested quantity needs an analytic channel the system does not
    carry (e.g. exact total variation for a non-Gaussian system)."""


class EigenConvergenceError(MemabsError):
    """Power iteration for the dominant spectrum failed to converge."""


class SpectralAssumptionError(MemabsError):
    """The estimated subdominant eigenvalue has modulus >= 1, so the
    spectral-gap assumptions behind the error bounds do not hold."""
