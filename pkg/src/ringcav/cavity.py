"""Exact and Lorentzian cavity transfer functions, resonances and round-trip delay.

The ring cavity has identical input and output mirrors with intensity
coefficients ``R`` and ``T``, a vacuum path ``L_vac``, a medium of length
``L_cell`` and an input-to-output path ``L_m``.  Its monochromatic transfer
function is::

    S(omega) = T exp(i omega L_m / c) / (1 - R_eff exp(i phi(omega)))
    phi(omega) = omega (L_vac + n(omega) L_cell) / c + phase_offset

``R_eff = R sqrt(1 - extra_loss)`` folds an intracavity intensity loss per
round trip into the feedback amplitude, so the intensity surviving one round
trip is ``R_eff**2``.  ``phase_offset`` models a sub-wavelength length
adjustment used to put a chosen frequency exactly on resonance.

Optical phases are of order 1e7 rad, far beyond what float64 resolves to the
1e-10 rad needed here, so every phase is split into a large part reduced
modulo 2 pi in extended precision at an anchor frequency and a small part
proportional to the offset from that anchor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import NamedTuple

import mpmath
import numpy as np
from scipy.optimize import brentq

from ._validation import check_finite, check_interval, check_positive, check_uniform_grid
from .dispersion import C, TWO_PI, group_index, index_excess
from .exceptions import (
    DegenerateDelayError,
    DomainError,
    InvalidModelError,
    NoResonanceError,
    OscillationThresholdError,
)

THRESHOLD_MARGIN = 1e-12
PHASE_TOLERANCE = 1e-10


@dataclass(frozen=True)
class CavityGeometry:
    """Mirror coefficients and path lengths of the ring cavity.

    Attributes:
        R: intensity reflection of the input and output mirrors.
        T: intensity transmission of those mirrors, ``T <= 1 - R``.
        L_vac: round-trip length outside the medium (m).
        L_cell: medium length (m).
        L_m: input-to-output mirror path (m), ``0 < L_m <= L_vac + L_cell``.
        extra_loss: fractional intensity loss per round trip from other optics.
        phase_offset: extra round-trip phase (rad) from fine length tuning.
    """

    R: float
    T: float
    L_vac: float
    L_cell: float
    L_m: float
    extra_loss: float = 0.0
    phase_offset: float = 0.0

    def __post_init__(self):
        check_interval("R", self.R, 0.0, 1.0, closed=(False, False))
        check_interval("T", self.T, 0.0, 1.0 - self.R + 1e-12, closed=(False, True))
        check_positive("L_vac", self.L_vac)
        check_positive("L_cell", self.L_cell, strict=False)
        check_positive("L_m", self.L_m)
        if self.L_m > self.length:
            raise InvalidModelError(f"L_m = {self.L_m} exceeds the round-trip length {self.length}")
        check_interval("extra_loss", self.extra_loss, 0.0, 1.0)
        check_finite("phase_offset", self.phase_offset)

    @property
    def length(self):
        """Geometric round-trip length (m)."""
        return self.L_vac + self.L_cell

    @property
    def R_eff(self):
        """Round-trip field feedback factor including the extra loss."""
        return self.R * math.sqrt(1.0 - self.extra_loss)

    @property
    def round_trip_loss(self):
        """Fractional intensity lost per round trip, ``1 - R_eff**2``."""
        return 1.0 - self.R_eff**2

    @property
    def fsr(self):
        """Empty-cavity free spectral range (rad/s)."""
        return TWO_PI * C / self.length

    @property
    def round_trip_time(self):
        return self.length / C


@dataclass(frozen=True)
class ComplexSpectrum:
    """Complex transfer-function samples on a uniform grid ``carrier + detuning``.

    Storing the carrier separately keeps the detuning axis exact; ``omega``
    rebuilds absolute frequencies when needed.
    """

    carrier: float
    detuning: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        detuning = np.asarray(self.detuning, dtype=float)
        values = np.asarray(self.values, dtype=complex)
        if detuning.shape != values.shape:
            raise ValueError("detuning and values must have the same shape")
        check_uniform_grid(detuning, "detuning grid")
        object.__setattr__(self, "detuning", detuning)
        object.__setattr__(self, "values", values)

    @property
    def omega(self):
        return self.carrier + self.detuning

    @property
    def step(self):
        return (self.detuning[-1] - self.detuning[0]) / (self.detuning.size - 1)

    @property
    def intensity(self):
        return np.abs(self.values) ** 2

    def __len__(self):
        return self.detuning.size


class LorentzianParameters(NamedTuple):
    decay_rate: float
    amplitude: float


# ---------------------------------------------------------------------------
# phases
# ---------------------------------------------------------------------------

def wrap_phase(phase):
    """Map real phases to ``[-pi, pi)``."""
    return np.remainder(np.asarray(phase, dtype=float) + math.pi, TWO_PI) - math.pi


@lru_cache(maxsize=4096)
def _reduced_propagation_phase(omega, length):
    """``omega * length / c`` modulo 2 pi, in ``[-pi, pi)``, from the exact float inputs."""
    with mpmath.workdps(40):
        phase = mpmath.mpf(omega) * mpmath.mpf(length) / mpmath.mpf(C)
        two_pi = 2 * mpmath.pi
        reduced = phase - two_pi * mpmath.floor(phase / two_pi + mpmath.mpf("0.5"))
        return float(reduced)


def _anchor(model, omega):
    """Split ``omega`` into the model's reference frequency and an exact offset."""
    anchor = float(model.reference_frequency)
    omega = np.asarray(omega, dtype=float)
    if np.any(omega <= 0) or not np.all(np.isfinite(omega)):
        raise DomainError("angular frequency must be finite and > 0")
    if np.any(omega < 0.5 * anchor) or np.any(omega > 2.0 * anchor):
        # Outside the Sterbenz range the subtraction may round; anchor on the value itself.
        if omega.ndim == 0:
            return float(omega), np.zeros(())
        raise DomainError("frequencies must lie within a factor 2 of the medium reference")
    return anchor, omega - anchor


def round_trip_phase_at(geom, model, carrier, offset):
    """Complex round-trip phase at ``carrier + offset``; real part wrapped to ``[-pi, pi)``.

    The imaginary part is the single-pass field attenuation exponent, negative for gain.
    """
    carrier = float(carrier)
    offset = np.asarray(offset, dtype=float)
    excess = index_excess(model, carrier, offset)
    medium = (carrier + offset) * excess * (geom.L_cell / C)
    base = _reduced_propagation_phase(carrier, geom.length) + geom.phase_offset
    real = base + offset * (geom.length / C) + np.real(medium)
    out = wrap_phase(real) + 1j * np.imag(medium)
    return out[()] if out.ndim == 0 else out


def round_trip_phase(geom, model, omega):
    """Complex round-trip phase at absolute frequency ``omega``."""
    anchor, offset = _anchor(model, omega)
    return round_trip_phase_at(geom, model, anchor, offset)


def feedthrough_phase_at(geom, carrier, offset):
    """``omega L_m / c`` modulo 2 pi at ``carrier + offset``."""
    offset = np.asarray(offset, dtype=float)
    return _reduced_propagation_phase(float(carrier), geom.L_m) + offset * (geom.L_m / C)


# ---------------------------------------------------------------------------
# transfer functions
# ---------------------------------------------------------------------------

def transmission_at(geom, model, carrier, offset):
    """Exact transfer function at ``carrier + offset`` (vectorised over ``offset``)."""
    offset = np.asarray(offset, dtype=float)
    phi = round_trip_phase_at(geom, model, carrier, offset)
    feedback = geom.R_eff * np.exp(1j * phi)
    denominator = 1.0 - feedback
    bad = (np.abs(feedback) >= 1.0) | (np.abs(denominator) < THRESHOLD_MARGIN)
    if np.any(bad):
        idx = np.flatnonzero(np.atleast_1d(bad))[0]
        omega_bad = float(carrier) + float(np.atleast_1d(offset)[idx])
        raise OscillationThresholdError(
            omega_bad,
            f"round-trip gain reaches the losses at omega = {omega_bad!r} rad/s; "
            "the cavity is at or above oscillation threshold",
        )
    out = geom.T * np.exp(1j * feedthrough_phase_at(geom, carrier, offset)) / denominator
    return out[()] if out.ndim == 0 else out


def transmission(geom, model, omega):
    """Exact transfer function at absolute angular frequency ``omega``."""
    anchor, offset = _anchor(model, omega)
    return transmission_at(geom, model, anchor, offset)


def transmission_spectrum(geom, model, carrier, detuning):
    """Sample the transfer function on ``carrier + detuning``."""
    detuning = np.asarray(detuning, dtype=float)
    return ComplexSpectrum(float(carrier), detuning, transmission_at(geom, model, carrier, detuning))


def transmission_sweep(geom, model, center, span, points):
    """Symmetric sweep of total width ``span`` (rad/s) with ``points`` samples."""
    check_positive("span", span)
    if int(points) < 3:
        raise ValueError("points must be >= 3")
    detuning = np.linspace(-0.5 * span, 0.5 * span, int(points))
    return transmission_spectrum(geom, model, center, detuning)


def lorentzian_transmission_at(params, omega_p, L_m, carrier, offset):
    """Single-pole approximation ``S0 exp(i omega L_m / c) / (gamma/2 - i (omega - omega_p))``."""
    offset = np.asarray(offset, dtype=float)
    feed = _reduced_propagation_phase(float(carrier), L_m) + offset * (L_m / C)
    detuning_from_peak = (float(carrier) - float(omega_p)) + offset
    return params.amplitude * np.exp(1j * feed) / (0.5 * params.decay_rate - 1j * detuning_from_peak)


# ---------------------------------------------------------------------------
# resonances and delay
# ---------------------------------------------------------------------------

def _polish_float_root(func, omega):
    """Among neighbouring floats of ``omega`` pick the one with the smallest ``|func|``."""
    best, best_val = omega, abs(func(omega))
    candidate = omega
    for direction in (-math.inf, math.inf):
        candidate = omega
        for _ in range(4):
            candidate = float(np.nextafter(candidate, direction))
            val = abs(func(candidate))
            if val < best_val:
                best, best_val = candidate, val
    return best


def find_resonance(geom, model, omega_guess, tol=PHASE_TOLERANCE):
    """Root of the real round-trip phase (mod 2 pi) nearest ``omega_guess``.

    The search expands geometrically from the guess out to one free spectral
    range on each side, keeps only sign changes that are not 2 pi wraps, and
    refines the nearest bracket with Brent's method.  The returned float is
    the representable frequency closest to the root.
    """
    omega_guess = float(omega_guess)
    if not (omega_guess > 0 and math.isfinite(omega_guess)):
        raise DomainError("omega_guess must be finite and > 0")

    def phase(offset):
        return float(np.real(round_trip_phase_at(geom, model, omega_guess, offset)))

    start = phase(0.0)
    if abs(start) < tol:
        return omega_guess

    fsr = geom.fsr
    width = model.linewidth
    step0 = min(width / 64.0 if math.isfinite(width) else math.inf, fsr / 4096.0)
    ratio = 2.0 ** (1.0 / 16.0)
    steps = [0.0]
    s = step0
    while s < fsr:
        steps.append(s)
        s *= ratio
    steps.append(fsr)
    ulp = float(np.spacing(omega_guess))

    roots = []
    for sign in (1.0, -1.0):
        prev_x, prev_p = 0.0, start
        for s in steps[1:]:
            x = sign * s
            p = phase(x)
            if p == 0.0:
                roots.append(x)
                break
            if (p > 0) != (prev_p > 0) and abs(p - prev_p) < math.pi:
                lo, hi = sorted((prev_x, x))
                roots.append(brentq(phase, lo, hi, xtol=0.25 * ulp, rtol=4 * np.finfo(float).eps, maxiter=200))
                break
            prev_x, prev_p = x, p
    if not roots:
        raise NoResonanceError(f"no round-trip phase root within one FSR of {omega_guess!r} rad/s")
    offset = min(roots, key=abs)
    omega_p = omega_guess + offset
    return _polish_float_root(lambda w: float(np.real(round_trip_phase(geom, model, w))), omega_p)


def round_trip_group_delay(geom, model, omega, method="fd"):
    """``(L_vac + n_g L_cell) / c`` at ``omega`` (s)."""
    if geom.L_cell == 0.0:
        return geom.L_vac / C
    anchor, offset = _anchor(model, omega)
    n_g = group_index(model, anchor, method=method, offset=float(offset))
    return (geom.L_vac + n_g * geom.L_cell) / C


def lorentzian_reduction(geom, model, omega_p, method="fd"):
    """Single-pole parameters ``(gamma_cav, S0)`` at the resonance ``omega_p``.

    ``gamma_cav = 2 (1 - R_eff) / (R_eff tau)`` and ``S0 = T / (R_eff tau)``
    with ``tau`` the round-trip group delay.  Both are negative when ``tau``
    is; they are returned as they are.
    """
    tau = round_trip_group_delay(geom, model, omega_p, method=method)
    if abs(tau) < 1e-18:
        raise DegenerateDelayError(f"round-trip group delay {tau!r} s is too close to zero")
    r = geom.R_eff
    return LorentzianParameters(2.0 * (1.0 - r) / (r * tau), geom.T / (r * tau))


def tune_cavity(geom, model, omega_target=None):
    """Return a geometry whose real round-trip phase vanishes at ``omega_target``.

    Only ``phase_offset`` changes, which corresponds to a sub-wavelength
    adjustment of the vacuum path.  The default target is the medium's
    operating frequency.
    """
    omega_target = float(model.operating_frequency if omega_target is None else omega_target)
    phi = float(np.real(round_trip_phase(geom, model, omega_target)))
    tuned = replace(geom, phase_offset=float(wrap_phase(geom.phase_offset - phi)))
    residual = float(np.real(round_trip_phase(tuned, model, omega_target)))
    if abs(residual) > 1e-12:  # one more pass absorbs rounding in the wrap
        tuned = replace(tuned, phase_offset=float(wrap_phase(tuned.phase_offset - residual)))
    return tuned
