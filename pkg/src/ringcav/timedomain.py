"""Ring-down of a cavity after its CW drive is switched off.

All fields are complex envelopes about a carrier ``omega_0``: the lab field is
``envelope(t) * exp(-i omega_0 t)``.  The transfer function is sampled on
``omega_0 + Omega`` with ``Omega`` the FFT frequencies of the time grid.

The output for a drive ``E0 exp(-i omega_l t)`` switched off by an envelope
``1 - u(t)`` is computed by linearity::

    E_out(t) = S(omega_l) E0 exp(-i Delta t) - E0 [r * (u exp(-i Delta t))](t),   Delta = omega_l - omega_0

where ``r`` is the causal impulse response.  ``u`` rises from 0 at the
turn-off time as ``1 - exp(-(t - t_off) / fall_time)``; with ``fall_time`` 0
it is a unit step, sampled by the fraction of each grid cell after ``t_off``.

The transfer function is multiplied by a narrow Gaussian window
``exp(-(Omega sigma)^2 / 2)`` before the inverse transform, with ``sigma``
three samples of the largest admissible step for the geometry (three samples
of the actual step when that is coarser).  In time this smooths every feature of ``r`` over
``sigma``, which removes aliasing of the sharp round-trip echoes while
keeping the response causal to ``exp(-(L_m / c)^2 / (2 sigma^2))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve

from ._validation import as_float_array, check_positive, check_uniform_grid, next_pow2
from .cavity import (
    _reduced_propagation_phase,
    find_resonance,
    lorentzian_reduction,
    lorentzian_transmission_at,
    transmission_at,
    transmission_sweep,
)
from .dispersion import C, TWO_PI
from .exceptions import BandwidthError, CavityError, DomainError, SizingError

KERNEL_SAMPLES = 3.0
MIN_FFT_SIZE = 2**16
MAX_FFT_SIZE = 2**23
WRAP_TOLERANCE = 1e-9
SAMPLES_PER_TRANSIT = 24
DECAY_TIMES_AFTER = 12.0


@dataclass(frozen=True)
class InputSignal:
    """CW drive ``amplitude * exp(-i omega_l t)`` switched off at ``turn_off_time``.

    ``fall_time`` is the 1/e time of an exponential switch-off; 0 requests
    the sharpest step the simulation grid can represent.
    """

    amplitude: complex
    omega_l: float
    turn_off_time: float = 0.0
    fall_time: float = 0.0

    def __post_init__(self):
        if not np.isfinite(complex(self.amplitude)):
            raise ValueError("amplitude must be finite")
        check_positive("omega_l", self.omega_l, error=ValueError)
        if not math.isfinite(self.turn_off_time):
            raise ValueError("turn_off_time must be finite")
        check_positive("fall_time", self.fall_time, strict=False, error=ValueError)


@dataclass(frozen=True)
class RingdownTrace:
    """Uniformly sampled complex output envelope about ``carrier``."""

    t: np.ndarray
    field: np.ndarray
    carrier: float
    turn_off_time: float = 0.0

    def __post_init__(self):
        t = as_float_array(self.t, "t")
        field = np.asarray(self.field, dtype=complex)
        if t.shape != field.shape:
            raise ValueError("t and field must have the same shape")
        check_uniform_grid(t, "time grid")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "field", field)

    @property
    def intensity(self):
        return np.abs(self.field) ** 2

    @property
    def dt(self):
        return (self.t[-1] - self.t[0]) / (self.t.size - 1)

    def lab_field(self):
        """Field including the carrier oscillation (only sensible for short traces)."""
        return self.field * np.exp(-1j * self.carrier * self.t)


# ---------------------------------------------------------------------------
# transfer-function closures
# ---------------------------------------------------------------------------

def cavity_transfer(geom, model, carrier):
    """Baseband transfer function ``Omega -> S(carrier + Omega)`` of the full cavity."""
    carrier = float(carrier)

    def transfer(detuning):
        return transmission_at(geom, model, carrier, detuning)

    transfer.features = _feature_offsets(geom, model, carrier)
    # tie the smoothing to the geometry so refining the grid does not change the model
    transfer.smoothing_step = max_time_step(geom)
    return transfer


def lorentzian_transfer(decay_rate, amplitude, omega_p, L_m, carrier):
    """Baseband single-pole transfer function, bypassing the exact cavity formula."""
    from .cavity import LorentzianParameters

    params = LorentzianParameters(decay_rate, amplitude)
    carrier = float(carrier)

    def transfer(detuning):
        return lorentzian_transmission_at(params, omega_p, L_m, carrier, detuning)

    offset = abs(float(omega_p) - carrier)
    transfer.features = (offset, abs(decay_rate))
    return transfer


def _feature_offsets(geom, model, carrier):
    """Largest detuning (rad/s) at which the medium still has structure, and its linewidth."""
    width = model.linewidth
    if not math.isfinite(width) or geom.L_cell == 0.0:
        return (0.0, 0.0)
    reach = abs(model.feature_center - carrier) + model.feature_halfwidth + 10.0 * width
    return (reach, width)


def _kernel_width(transfer, dt):
    """Gaussian smoothing width: three samples, never narrower than the transfer's own scale."""
    return KERNEL_SAMPLES * max(dt, getattr(transfer, "smoothing_step", 0.0))


def _gaussian_window(detuning, sigma):
    return np.exp(-0.5 * (detuning * sigma) ** 2)


# ---------------------------------------------------------------------------
# response function
# ---------------------------------------------------------------------------

def _response_samples(transfer, t0, dt, size):
    """``r(t0 + j dt)`` for ``j < size`` by inverse DFT of the windowed transfer function."""
    detuning = TWO_PI * np.fft.fftfreq(size, dt)
    spectrum = transfer(detuning) * _gaussian_window(detuning, _kernel_width(transfer, dt)) * np.exp(-1j * detuning * t0)
    return np.fft.fft(spectrum) / (size * dt)


def _check_bandwidth(transfer, dt):
    reach, _ = getattr(transfer, "features", (0.0, 0.0))
    sampling_rate = TWO_PI / dt
    if reach > 0 and sampling_rate < 8.0 * reach:
        raise BandwidthError(
            f"medium features reach {reach / TWO_PI:.4g} Hz from the carrier but the time step {dt:.4g} s "
            f"samples only {sampling_rate / TWO_PI:.4g} Hz; use dt <= {TWO_PI / (8 * reach):.4g} s"
        )


def max_time_step(geom):
    """Largest step keeping the smoothed first echo causal to about ``exp(-32)``."""
    return min(geom.L_m, geom.length) / (SAMPLES_PER_TRANSIT * C)


def response_time_grid(geom, t_post, pre_fraction=0.1):
    """Grid ``[-pre_fraction * t_post, t_post]`` at the largest admissible step."""
    dt = max_time_step(geom)
    n_post = math.ceil(t_post / dt)
    n_pre = math.ceil(pre_fraction * n_post)
    return dt * np.arange(-n_pre, n_post + 1)


def response_function(geom, model, t_grid, carrier=None, transfer=None):
    """Samples of the baseband impulse response on a uniform ``t_grid``.

    ``t_grid`` must include negative times (at least a tenth of its positive
    extent) so that causality can be checked.  The default carrier is the
    cavity resonance nearest the medium's operating frequency.
    """
    t = as_float_array(t_grid, "t_grid")
    dt = check_uniform_grid(t, "t_grid")
    t_pre, t_post = -t[0], t[-1]
    if t_post <= 0 or t_pre < 0.1 * t_post * (1 - 1e-9):
        raise SizingError(
            f"t_grid must span [-T_pre, T_post] with T_pre >= 0.1 T_post (got {-t_pre:.4g} .. {t_post:.4g} s)"
        )
    if dt > max_time_step(geom) * (1 + 1e-9):
        raise SizingError(f"time step {dt:.4g} s is too coarse; use dt <= {max_time_step(geom):.4g} s")
    if transfer is None:
        if carrier is None:
            carrier = find_resonance(geom, model, model.operating_frequency)
        transfer = cavity_transfer(geom, model, carrier)
    _check_bandwidth(transfer, dt)
    # The transform is periodic: grow it until the tail has died out before it
    # wraps back onto t < 0.
    size = max(MIN_FFT_SIZE, next_pow2(8 * t.size))
    while True:
        r = _response_samples(transfer, t[0], dt, size)
        tail = np.abs(r[-(size // 8):]).max()
        if tail <= WRAP_TOLERANCE * np.abs(r).max() or size >= MAX_FFT_SIZE:
            return r[: t.size]
        size *= 2


def causality_residual(response, t_grid):
    """``max |r(t < 0)| / max |r|``."""
    t = np.asarray(t_grid, dtype=float)
    mag = np.abs(np.asarray(response))
    peak = mag.max()
    if peak == 0:
        return 0.0
    return float(mag[t < 0].max() / peak) if np.any(t < 0) else 0.0


# ---------------------------------------------------------------------------
# ring-down
# ---------------------------------------------------------------------------

def simulate_ringdown(transfer, signal, t_grid, carrier, max_dt=None):
    """Ring-down for an arbitrary causal baseband transfer function.

    ``t_grid`` sets the output samples.  When its step exceeds ``max_dt`` the
    simulation runs on an integer refinement and is decimated back.
    """
    t = as_float_array(t_grid, "t_grid")
    dt_out = check_uniform_grid(t, "t_grid")
    refine = 1 if max_dt is None else max(1, math.ceil(dt_out / max_dt * (1 - 1e-12)))
    dt = dt_out / refine
    _check_bandwidth(transfer, dt)

    n_sim = (t.size - 1) * refine + 1
    t_sim = t[0] + dt * np.arange(n_sim)
    t_off = signal.turn_off_time
    if t_off >= t_sim[-1]:
        raise SizingError("turn_off_time lies after the end of the time grid")

    detuning_l = float(signal.omega_l) - float(carrier)
    tone = np.exp(-1j * detuning_l * t_sim)
    steady = complex(transfer(np.array([detuning_l]))[0] * _gaussian_window(detuning_l, _kernel_width(transfer, dt)))

    since = t_sim - t_off
    first = int(np.searchsorted(since, 0.0))
    if signal.fall_time > 0:
        u = np.zeros(n_sim, dtype=complex)
        u[first:] = -np.expm1(-since[first:] / signal.fall_time) * tone[first:]
    else:
        # ideal step: each sample carries the fraction of its cell after t_off
        first = max(0, first - 1)
        u = np.clip(since / dt + 0.5, 0.0, 1.0) * tone
        u[:first] = 0.0

    n_resp = n_sim - first
    size = max(MIN_FFT_SIZE, next_pow2(4 * n_resp))
    r = _response_samples(transfer, 0.0, dt, size)[:n_resp]
    complement = np.zeros(n_sim, dtype=complex)
    complement[first:] = fftconvolve(u[first:], r)[:n_resp] * dt

    field = signal.amplitude * (steady * tone - complement)
    return RingdownTrace(t, field[::refine], float(carrier), t_off)


def estimate_decay_time(geom, model, omega_p=None):
    """Slowest expected intensity decay time (s) near ``omega_p``.

    Taken as the inverse FWHM of the narrowest transmission peak in a local
    sweep; falls back to the Lorentzian decay rate when no peak is found.
    """
    from .resonances import extract_peaks

    omega_p = find_resonance(geom, model, model.operating_frequency) if omega_p is None else float(omega_p)
    width = model.linewidth
    if math.isfinite(width) and geom.L_cell > 0:
        half_span = min(model.feature_halfwidth + 200.0 * width, 0.5 * geom.fsr)
        half_span = max(half_span, 4.0 * abs(model.feature_center - omega_p))
        half_span = min(half_span, 0.5 * geom.fsr)
    else:
        half_span = 0.5 * geom.fsr
    rate = None
    for points in (2**15 + 1, 2**18 + 1):
        try:
            spectrum = transmission_sweep(geom, model, omega_p, 2.0 * half_span, points)
            peaks = extract_peaks(spectrum, omega_p, threshold_factor=1.5)
        except CavityError:
            continue
        if peaks:
            rate = min(p.fwhm for p in peaks)
            break
    if rate is None:
        rate = abs(lorentzian_reduction(geom, model, omega_p).decay_rate)
    return 1.0 / rate


def default_time_grid(geom, model, signal=None, decay_times=DECAY_TIMES_AFTER, omega_p=None):
    """Uniform time grid covering ``decay_times`` slow decay times after turn-off.

    The step resolves the first transit ``L_m / c``; 10% of the post-turn-off
    window precedes the turn-off so the steady state is visible.
    """
    t_off = 0.0 if signal is None else signal.turn_off_time
    decay = estimate_decay_time(geom, model, omega_p)
    fall = 0.0 if signal is None else signal.fall_time
    t_post = decay_times * decay + 5.0 * fall
    dt = max_time_step(geom)
    n_post = math.ceil(t_post / dt)
    n_pre = max(1, math.ceil(0.1 * n_post))
    return t_off + dt * np.arange(-n_pre, n_post + 1)


def ringdown(geom, model, signal, t_grid=None, carrier=None):
    """Output envelope of the cavity when ``signal`` is switched off.

    ``carrier`` defaults to the cavity resonance nearest the medium's
    operating frequency.
    """
    if carrier is None:
        carrier = find_resonance(geom, model, model.operating_frequency)
    if t_grid is None:
        t_grid = default_time_grid(geom, model, signal, omega_p=carrier)
    transfer = cavity_transfer(geom, model, carrier)
    return simulate_ringdown(transfer, signal, t_grid, carrier, max_dt=max_time_step(geom))


# ---------------------------------------------------------------------------
# single-pole formulas
# ---------------------------------------------------------------------------

def _envelope_phase(omega, t, L_m, carrier):
    """Envelope of ``exp(-i omega (t - L_m/c))`` about ``carrier`` with the large phase reduced."""
    return np.exp(1j * _reduced_propagation_phase(float(omega), float(L_m))) * np.exp(
        -1j * (float(omega) - float(carrier)) * t
    )


def analytic_lorentzian_ringdown(decay_rate, amplitude, omega_p, omega_l, E0, L_m, t_grid, carrier=None):
    """Switch-off response of a single decaying cavity mode (``decay_rate > 0``)."""
    if not decay_rate > 0:
        raise DomainError("decay_rate must be > 0; use noncausal_truncated_prediction for negative rates")
    t = as_float_array(t_grid, "t_grid")
    carrier = float(omega_p if carrier is None else carrier)
    delay = L_m / C
    denom = 0.5 * decay_rate - 1j * (omega_l - omega_p)
    scale = amplitude * E0 / denom
    before = scale * _envelope_phase(omega_l, t, L_m, carrier)
    after = scale * _envelope_phase(omega_p, t, L_m, carrier) * np.exp(-0.5 * decay_rate * np.maximum(t - delay, 0.0))
    return RingdownTrace(t, np.where(t <= delay, before, after), carrier)


def noncausal_truncated_prediction(decay_rate, amplitude, omega_p, omega_l, E0, L_m, t_grid, carrier=None):
    """Single-pole prediction for a negative decay rate.

    NON-PHYSICAL.  Taking the single-pole form literally when the round-trip
    delay is negative yields an output that vanishes identically once the
    transit time has elapsed and that before it anticipates the switch-off.
    It exists only as a wrong reference to compare real simulations against.
    """
    if not decay_rate < 0:
        raise DomainError("decay_rate must be < 0 for the truncated prediction")
    t = as_float_array(t_grid, "t_grid")
    carrier = float(omega_p if carrier is None else carrier)
    delay = L_m / C
    denom = 0.5 * decay_rate - 1j * (omega_l - omega_p)
    scale = amplitude * E0 / denom
    # exp(-gamma/2 (t - delay)) grows without bound for t << delay; cap the exponent to stay finite.
    growth = np.exp(np.minimum(-0.5 * decay_rate * (t - delay), 700.0))
    before = scale * (_envelope_phase(omega_l, t, L_m, carrier) - _envelope_phase(omega_p, t, L_m, carrier) * growth)
    return RingdownTrace(t, np.where(t <= delay, before, 0.0), carrier)


# ---------------------------------------------------------------------------
# trace diagnostics
# ---------------------------------------------------------------------------

def steady_intensity(trace):
    """Mean intensity before the turn-off."""
    pre = trace.t < trace.turn_off_time
    if not np.any(pre):
        raise SizingError("trace has no samples before the turn-off")
    return float(np.mean(trace.intensity[pre]))


def overshoot(trace):
    """``(max post-turn-off intensity / steady intensity, time of that maximum)``."""
    post = trace.t >= trace.turn_off_time
    intensity = trace.intensity
    k = int(np.argmax(np.where(post, intensity, -np.inf)))
    return float(intensity[k] / steady_intensity(trace)), float(trace.t[k] - trace.turn_off_time)


def tail_time_constant(trace, start=None, stop=None):
    """Intensity 1/e time from a straight-line fit to ``log I`` over ``[start, stop]``.

    Default window: the last 60% of the post-turn-off record, cut where the
    intensity falls below 1e-24 of its steady value.
    """
    t, intensity = trace.t, trace.intensity
    t_end = t[-1]
    if start is None:
        start = trace.turn_off_time + 0.4 * (t_end - trace.turn_off_time)
    if stop is None:
        stop = t_end
    sel = (t >= start) & (t <= stop) & (intensity > 1e-24 * steady_intensity(trace))
    if np.count_nonzero(sel) < 8:
        raise SizingError("too few samples above the noise floor for a tail fit")
    slope, _ = np.polyfit(t[sel] - start, np.log(intensity[sel]), 1)
    if slope >= 0:
        return math.inf
    return float(-1.0 / slope)


def dominant_oscillation_frequency(trace, start=None, stop=None, max_frequency=None, drop=1e-2):
    """Strongest oscillation (Hz) of the detrended log-intensity over ``[start, stop]``.

    By default the window opens once the intensity has dropped by ``drop``
    after the turn-off and closes at the end of the record or at the 1e-24
    floor.  Frequencies above ``max_frequency`` (for example half a free
    spectral range) are ignored.
    """
    t, intensity = trace.t, trace.intensity
    floor = steady_intensity(trace)
    post = t >= trace.turn_off_time
    if start is None:
        below = np.flatnonzero(post & (intensity < drop * floor))
        if below.size == 0:
            raise SizingError("intensity never drops enough to look for oscillations")
        start = t[below[0]]
    if stop is None:
        above = np.flatnonzero((t >= start) & (intensity > 1e-24 * floor))
        stop = t[above[-1]] if above.size else t[-1]
    sel = (t >= start) & (t <= stop)
    if np.count_nonzero(sel) < 16:
        raise SizingError("oscillation window is too short")
    x = t[sel]
    y = np.log(np.maximum(intensity[sel], 1e-300))
    y = y - np.polyval(np.polyfit(x, y, 1), x)
    y = y * np.hanning(y.size)
    size = next_pow2(8 * y.size)
    power = np.abs(np.fft.rfft(y, n=size)) ** 2
    freqs = np.fft.rfftfreq(size, trace.dt)
    resolution = 1.0 / (x[-1] - x[0])
    usable = freqs > 2.0 * resolution
    if max_frequency is not None:
        usable &= freqs < max_frequency
    if not np.any(usable):
        raise SizingError("no usable frequency bins for the oscillation search")
    k = int(np.flatnonzero(usable)[np.argmax(power[usable])])
    if 0 < k < power.size - 1:
        a, b, c = np.log(power[k - 1 : k + 2] + 1e-300)
        denom = a - 2 * b + c
        shift = 0.5 * (a - c) / denom if denom != 0 else 0.0
    else:
        shift = 0.0
    return float(freqs[k] + shift * (freqs[1] - freqs[0]))
