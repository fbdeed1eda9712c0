"""Ring cavities containing dispersive media: spectra, satellite resonances and ring-down."""

__version__ = "0.1.0"

from .cavity import (  # noqa: E402
    CavityGeometry,
    ComplexSpectrum,
    find_resonance,
    lorentzian_reduction,
    round_trip_group_delay,
    transmission,
    transmission_sweep,
    tune_cavity,
)
from .dispersion import (  # noqa: E402
    DetunedEIT,
    GainDoublet,
    Vacuum,
    group_index,
    kramers_kronig_residual,
    refractive_index,
)
from .estimator import RingCavity  # noqa: E402
from .resonances import ResonancePeak, extract_peaks, f_delta, find_satellites, satellite_predicate  # noqa: E402
from .timedomain import (  # noqa: E402
    InputSignal,
    RingdownTrace,
    analytic_lorentzian_ringdown,
    noncausal_truncated_prediction,
    response_function,
    ringdown,
)

__all__ = [
    "CavityGeometry", "ComplexSpectrum", "DetunedEIT", "GainDoublet", "InputSignal", "ResonancePeak",
    "RingCavity", "RingdownTrace", "Vacuum", "analytic_lorentzian_ringdown", "extract_peaks", "f_delta",
    "find_resonance", "find_satellites", "group_index", "kramers_kronig_residual", "lorentzian_reduction",
    "noncausal_truncated_prediction", "refractive_index", "response_function", "ringdown",
    "round_trip_group_delay", "satellite_predicate", "transmission", "transmission_sweep", "tune_cavity",
]
