"""Exception hierarchy shared by all modules."""


class CavityError(Exception):
    """Base class for every error raised by ringcav."""


class InvalidModelError(CavityError, ValueError):
    """A dispersion model or cavity geometry has non-physical parameters."""


class NumericalDerivativeError(CavityError, ArithmeticError):
    """Finite-difference derivative failed to converge."""


class CoverageError(CavityError, ValueError):
    """A frequency grid does not cover the model features."""


class OscillationThresholdError(CavityError):
    """Round-trip gain reached the losses; the passive transfer function diverges."""

    def __init__(self, omega, message=None):
        self.omega = omega
        if message is None:
            message = f"oscillation threshold reached at omega = {omega!r} rad/s"
        super().__init__(message)


class NoResonanceError(CavityError):
    """No round-trip phase root within the search bracket."""


class DegenerateDelayError(CavityError, ZeroDivisionError):
    """Round-trip group delay is too close to zero for a Lorentzian reduction."""


class SpanTooSmallError(CavityError, ValueError):
    """Satellite search span misses roots that must exist."""


class ResolutionError(CavityError, ValueError):
    """A spectral peak is sampled by too few grid points."""


class SizingError(CavityError, ValueError):
    """A time or frequency grid is too short or too coarse for the requested simulation."""


class BandwidthError(SizingError):
    """Model features fall outside the sampled bandwidth."""


class DomainError(CavityError, ValueError):
    """An analytic formula was called outside its domain of validity."""


class ConfigError(CavityError, ValueError):
    """Configuration failed validation.

    ``errors`` is a list of ``(json_pointer, message)`` pairs, one per problem.
    """

    def __init__(self, errors):
        self.errors = list(errors)
        lines = [f"{ptr or '/'}: {msg}" for ptr, msg in self.errors]
        super().__init__("invalid configuration:\n  " + "\n  ".join(lines))
