"""Frequency-dependent complex refractive index models.

All models return the susceptibility ``chi(omega)`` of the intracavity medium and
the index is taken in the weak-medium limit ``n = 1 + chi / 2`` (valid while
``|chi| < 1e-2``).  Sign convention: fields vary as ``exp(-i omega t)`` and
propagate as ``exp(+i omega n L / c)``, so ``Im n > 0`` is absorption and
``Im n < 0`` is gain.

Every model is a frozen dataclass, so instances are hashable and safe to share
across threads or processes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np
from scipy import constants
from scipy.optimize import minimize_scalar
from scipy.signal import hilbert
from scipy.special import wofz

from ._validation import as_float_array, check_finite, check_interval, check_positive, check_uniform_grid
from .exceptions import CoverageError, DomainError, InvalidModelError, NumericalDerivativeError

C = constants.c
TWO_PI = 2.0 * math.pi
HELIUM_LINE_WAVELENGTH = 1.083e-6
HELIUM_LINE_OMEGA = TWO_PI * C / HELIUM_LINE_WAVELENGTH
HELIUM4_MASS = 4.002602 * constants.atomic_mass
WEAK_MEDIUM_LIMIT = 1e-2


def doppler_half_width(temperature=300.0, mass=HELIUM4_MASS, wavelength=HELIUM_LINE_WAVELENGTH):
    """Doppler 1/e half-width (rad/s) of a thermal gas line.

    The one-photon detuning seen by atoms of velocity ``v`` is ``k v``; with a
    Maxwell distribution ``exp(-(v/u)^2)``, ``u = sqrt(2 k_B T / m)``, the
    detuning distribution has 1/e half-width ``k u``.
    """
    check_positive("temperature", temperature)
    check_positive("mass", mass)
    check_positive("wavelength", wavelength)
    most_probable_speed = math.sqrt(2.0 * constants.k * temperature / mass)
    return TWO_PI * most_probable_speed / wavelength


def _positive_frequency(omega):
    arr = np.asarray(omega, dtype=float)
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
        raise DomainError("angular frequency must be finite and > 0")
    return arr


class DispersionModel:
    """Common interface of all medium models.

    Subclasses implement :meth:`susceptibility` and usually
    :meth:`susceptibility_derivative`; everything else has a sensible default.
    """

    #: Name used by configuration files and reports.
    kind = "abstract"

    def _offsets(self, omega, offset):
        # (omega - ref) is exact for omega within a factor 2 of ref, so small
        # offsets added afterwards keep their full precision.
        return (np.asarray(omega, dtype=float) - self.reference_frequency) + np.asarray(offset, dtype=float)

    def chi_from_detuning(self, detuning):
        """Susceptibility as a function of ``omega - reference_frequency``."""
        raise NotImplementedError

    def chi_derivative_from_detuning(self, detuning):
        return None

    def susceptibility(self, omega, offset=0.0):
        """``chi`` at ``omega + offset``; pass large and small parts separately for full precision."""
        return self.chi_from_detuning(self._offsets(omega, offset))

    def susceptibility_derivative(self, omega, offset=0.0):
        """Exact ``d chi / d omega``, or ``None`` when only finite differences are available."""
        return self.chi_derivative_from_detuning(self._offsets(omega, offset))

    def broadband_part(self, omega, offset=0.0):
        """Part of ``chi`` that varies on scales much wider than :attr:`linewidth`."""
        return np.zeros_like(self._offsets(omega, offset), dtype=complex)

    @property
    def reference_frequency(self):
        raise NotImplementedError

    @property
    def linewidth(self):
        """Narrowest spectral scale of the model (rad/s); ``inf`` for featureless media."""
        return math.inf

    @property
    def feature_center(self):
        return self.reference_frequency

    @property
    def feature_halfwidth(self):
        """Half-extent (rad/s) of the region around :attr:`feature_center` holding the features."""
        return 0.0

    @property
    def operating_frequency(self):
        """Default probe frequency used when tuning a cavity to this medium."""
        return self.reference_frequency


@dataclass(frozen=True)
class Vacuum(DispersionModel):
    """Empty cell: ``n = 1`` everywhere."""

    omega_ref: float = HELIUM_LINE_OMEGA
    kind = "vacuum"

    def __post_init__(self):
        check_positive("omega_ref", self.omega_ref)

    def chi_from_detuning(self, detuning):
        return np.zeros_like(np.asarray(detuning, dtype=float), dtype=complex)

    chi_derivative_from_detuning = chi_from_detuning

    @property
    def reference_frequency(self):
        return self.omega_ref


@dataclass(frozen=True)
class GainDoublet(DispersionModel):
    """Two equal Lorentzian lines centred at ``omega_ref -/+ separation / 2``.

    ``peak_gain`` is the single-pass intensity gain at each line centre through a
    cell of length ``cell_length``; with ``absorbing=True`` the same number is the
    single-pass intensity absorption instead (the sign-flipped, slow-light
    counterpart).
    """

    omega_ref: float
    separation: float
    fwhm: float
    peak_gain: float
    cell_length: float
    absorbing: bool = False
    kind = "gain_doublet"

    def __post_init__(self):
        check_positive("omega_ref", self.omega_ref)
        check_positive("separation", self.separation)
        check_positive("fwhm", self.fwhm)
        check_interval("peak_gain", self.peak_gain, 0.0, 1.0)
        check_positive("cell_length", self.cell_length)
        if self.separation >= self.omega_ref:
            raise InvalidModelError("separation must be smaller than omega_ref")

    @property
    def half_width(self):
        return 0.5 * self.fwhm

    @property
    def line_centers(self):
        return (self.omega_ref - 0.5 * self.separation, self.omega_ref + 0.5 * self.separation)

    def _line_terms(self, detuning):
        x = np.asarray(detuning, dtype=float)
        b = 0.5 * self.separation
        g = self.half_width
        return (x + b) + 1j * g, (x - b) + 1j * g, g

    @cached_property
    def amplitude(self):
        """Signed line strength; positive means gain."""
        g = self.half_width
        s = self.separation
        omega1 = self.line_centers[0]
        # Im chi at a line centre is -amplitude * (1 + g^2 / (s^2 + g^2)).
        overlap = 1.0 + g * g / (s * s + g * g)
        log_factor = math.log1p(-self.peak_gain) if self.absorbing else math.log1p(self.peak_gain)
        return log_factor * C / (omega1 * self.cell_length * overlap)

    def chi_from_detuning(self, detuning):
        d1, d2, g = self._line_terms(detuning)
        return self.amplitude * (g / d1 + g / d2)

    def chi_derivative_from_detuning(self, detuning):
        d1, d2, g = self._line_terms(detuning)
        return -self.amplitude * (g / d1**2 + g / d2**2)

    @property
    def reference_frequency(self):
        return self.omega_ref

    @property
    def linewidth(self):
        return self.fwhm

    @property
    def feature_halfwidth(self):
        return 0.5 * (self.separation + self.fwhm)


def _default_doppler():
    return doppler_half_width()


@dataclass(frozen=True)
class DetunedEIT(DispersionModel):
    """Three-level Lambda medium probed near two-photon resonance, far from one-photon resonance.

    The probe detuning is expressed as the Raman detuning
    ``delta = omega - omega_coupling``.  For an atom of one-photon detuning
    ``Delta`` the susceptibility is::

        amplitude * optical_decay * i / (gamma_eff - i * Delta)
        gamma_eff = optical_decay + (coupling_rabi^2 / 4) / (raman_decay - i * delta)

    and ``Delta = optical_detuning + delta + D`` is averaged over a Gaussian
    distribution of ``D`` with 1/e half-width ``doppler_width``.  The average
    is evaluated in closed form with the Faddeeva function.  ``doppler_width = 0``
    selects the homogeneous medium.

    ``operating_detuning`` fixes the probe point used for cavity tuning; ``None``
    means the Raman absorption maximum.
    """

    coupling_rabi: float
    optical_detuning: float
    raman_decay: float
    optical_decay: float
    doppler_width: float = field(default_factory=_default_doppler)
    amplitude: float = 0.0
    omega_coupling: float = HELIUM_LINE_OMEGA
    operating_detuning: float | None = None
    kind = "detuned_eit"

    def __post_init__(self):
        check_positive("coupling_rabi", self.coupling_rabi, strict=False)
        check_finite("optical_detuning", self.optical_detuning)
        check_positive("raman_decay", self.raman_decay)
        check_positive("optical_decay", self.optical_decay)
        check_positive("doppler_width", self.doppler_width, strict=False)
        check_positive("amplitude", self.amplitude, strict=False)
        check_positive("omega_coupling", self.omega_coupling)
        if self.operating_detuning is not None:
            check_finite("operating_detuning", self.operating_detuning)

    # -- core lineshape -------------------------------------------------
    def _raman_terms(self, delta):
        pump = 0.25 * self.coupling_rabi**2
        denom = self.raman_decay - 1j * delta
        gamma_eff = self.optical_decay + pump / denom
        d_gamma_eff = 1j * pump / denom**2
        return gamma_eff, d_gamma_eff

    def _unit_chi(self, delta, with_derivative=False):
        delta = np.asarray(delta, dtype=float)
        gamma_eff, d_gamma_eff = self._raman_terms(delta)
        one_photon = self.optical_detuning + delta
        scale = self.optical_decay
        if self.doppler_width == 0.0:
            den = gamma_eff - 1j * one_photon
            chi = scale * 1j / den
            if not with_derivative:
                return chi
            return chi, -scale * 1j * (d_gamma_eff - 1j) / den**2
        width = self.doppler_width
        z = (one_photon + 1j * gamma_eff) / width
        w = wofz(z)
        pref = scale * 1j * math.sqrt(math.pi) / width
        chi = pref * w
        if not with_derivative:
            return chi
        dw = -2.0 * z * w + 2j / math.sqrt(math.pi)
        dz = (1.0 + 1j * d_gamma_eff) / width
        return chi, pref * dw * dz

    def chi_from_detuning(self, detuning):
        return self.amplitude * self._unit_chi(detuning)

    def chi_derivative_from_detuning(self, detuning):
        return self.amplitude * self._unit_chi(detuning, with_derivative=True)[1]

    def broadband_part(self, omega, offset=0.0):
        """The same medium without coupling light: a plain Doppler-broadened line."""
        return replace(self, coupling_rabi=0.0).susceptibility(omega, offset)

    # -- scales ----------------------------------------------------------
    @property
    def reference_frequency(self):
        return self.omega_coupling

    @property
    def light_shift(self):
        """Rough size (rad/s) of the two-photon resonance offset."""
        far = max(abs(self.optical_detuning), 0.5 * self.doppler_width, self.optical_decay)
        return 0.25 * self.coupling_rabi**2 / far

    @property
    def linewidth(self):
        far2 = self.optical_detuning**2 + self.optical_decay**2
        power_broadening = 0.25 * self.coupling_rabi**2 * self.optical_decay / far2
        return 2.0 * (self.raman_decay + power_broadening)

    @property
    def feature_halfwidth(self):
        return 3.0 * self.light_shift + self.linewidth

    @cached_property
    def absorption_max_detuning(self):
        """Raman detuning (rad/s) of the absorption maximum near two-photon resonance."""
        span = 20.0 * (self.light_shift + self.linewidth)
        grid = np.linspace(-span, span, 20001)
        im = self._unit_chi(grid).imag
        k = int(np.argmax(im))
        step = grid[1] - grid[0]
        lo, hi = grid[max(k - 1, 0)], grid[min(k + 1, grid.size - 1)]
        if hi - lo < step:
            return float(grid[k])
        res = minimize_scalar(
            lambda d: -float(self._unit_chi(d).imag), bounds=(lo, hi), method="bounded",
            options={"xatol": 1e-6 * step},
        )
        return float(res.x)

    @property
    def operating_frequency(self):
        delta = self.absorption_max_detuning if self.operating_detuning is None else self.operating_detuning
        return self.omega_coupling + delta


# ---------------------------------------------------------------------------
# model-independent operations
# ---------------------------------------------------------------------------

def index_excess(model, omega, offset=0.0):
    """``n - 1`` at ``omega + offset`` without the loss of precision of forming ``n`` first."""
    _positive_frequency(np.asarray(omega, dtype=float) + np.asarray(offset, dtype=float))
    chi = np.asarray(model.susceptibility(omega, offset), dtype=complex)
    if not np.all(np.isfinite(chi)):
        raise InvalidModelError(f"{type(model).__name__} produced a non-finite susceptibility")
    out = 0.5 * chi
    return out[()] if out.ndim == 0 else out


def refractive_index(model, omega, offset=0.0):
    """Complex refractive index ``1 + chi / 2`` at ``omega + offset``."""
    return 1.0 + index_excess(model, omega, offset)


def _real_index_slope_fd(model, omega, offset=0.0, rtol=1e-9, max_levels=14):
    """``d Re chi / d omega`` by Richardson-extrapolated central differences.

    Steps are applied in detuning space, where they are exact.
    """
    detuning = float(model._offsets(omega, offset))
    scale = model.linewidth
    h = 0.05 * scale if math.isfinite(scale) else 1e-6 * float(omega)
    floor = 64.0 * np.finfo(float).eps * max(abs(detuning), h)

    def central(step):
        re = np.real(model.chi_from_detuning(np.array([detuning - step, detuning + step])))
        return (re[1] - re[0]) / (2.0 * step)

    table = []
    best, best_err = None, math.inf
    for _ in range(max_levels):
        if h < floor:
            break
        row = [central(h)]
        for j, prev in enumerate(table[-1] if table else []):
            row.append(row[j] + (row[j] - prev) / (4.0 ** (j + 1) - 1.0))
        if table:
            err = abs(row[-1] - table[-1][-1])
            if err < best_err:
                best, best_err = row[-1], err
            if err <= rtol * abs(row[-1]) or row[-1] == table[-1][-1]:
                return row[-1]
        table.append(row)
        h *= 0.5
    if best is not None and best_err <= 1e3 * rtol * abs(best):
        return best
    raise NumericalDerivativeError(
        f"derivative of Re n did not converge at omega={float(omega) + float(offset)!r} "
        f"(step fell below {floor:.3g} rad/s)"
    )


def group_index(model, omega, method="fd", offset=0.0):
    """Group index ``Re n + omega d(Re n)/d omega`` at ``omega + offset``.

    ``method="fd"`` uses adaptive central differences; ``method="exact"`` uses
    the model's analytic derivative (``InvalidModelError`` if it has none).
    """
    _positive_frequency(float(omega) + float(offset))
    n_real_excess = float(np.real(index_excess(model, omega, offset)))
    if method == "fd":
        slope = _real_index_slope_fd(model, omega, offset)
    elif method == "exact":
        d = model.susceptibility_derivative(omega, offset)
        if d is None:
            raise InvalidModelError(f"{type(model).__name__} has no analytic derivative")
        slope = float(np.real(d))
    else:
        raise ValueError(f"unknown method {method!r}")
    return 1.0 + n_real_excess + (float(omega) + float(offset)) * 0.5 * slope


def kramers_kronig_residual(model, grid, include_broadband=False, padding=4):
    """Relative mismatch between ``Re chi`` and the Hilbert transform of ``Im chi``.

    The grid must be uniform and extend at least 10 linewidths past the model's
    features on both sides.  The Hilbert transform is evaluated with an FFT on
    a zero-padded copy of the grid, and the comparison is made over the central
    half of the grid, away from truncation artefacts at the edges.  The
    broadband part of the susceptibility (for example the Doppler background
    under an EIT feature) is removed first unless ``include_broadband`` is set,
    because its wings extend far beyond any practical grid.

    Returns 0 for a medium with identically zero susceptibility.
    """
    grid = as_float_array(grid, "grid")
    check_uniform_grid(grid, "grid")
    width = model.linewidth
    if math.isfinite(width):
        lo = model.feature_center - model.feature_halfwidth - 10.0 * width
        hi = model.feature_center + model.feature_halfwidth + 10.0 * width
        if grid[0] > lo or grid[-1] < hi:
            raise CoverageError(
                f"grid [{grid[0]:.6g}, {grid[-1]:.6g}] rad/s must cover [{lo:.6g}, {hi:.6g}] rad/s "
                "(features plus 10 linewidths on each side)"
            )
    chi = np.asarray(model.susceptibility(grid), dtype=complex)
    if not include_broadband:
        chi = chi - model.broadband_part(grid)
    n = grid.size
    re_from_im = -np.imag(hilbert(chi.imag, N=padding * n))[:n]
    centre = 0.5 * (grid[0] + grid[-1])
    inner = np.abs(grid - centre) <= 0.25 * (grid[-1] - grid[0])
    scale = np.max(np.abs(chi.real[inner])) if np.any(inner) else 0.0
    if scale == 0.0:
        return 0.0
    return float(np.max(np.abs(re_from_im[inner] - chi.real[inner])) / scale)


def kk_grid(model, linewidths=200.0, points=2**14):
    """A symmetric grid wide enough for :func:`kramers_kronig_residual`."""
    half = model.feature_halfwidth + linewidths * model.linewidth
    return np.linspace(model.feature_center - half, model.feature_center + half, points)


def single_pass_transmission(model, omega, cell_length):
    """Intensity transmission ``exp(-2 Im n omega L / c)`` through the cell (>1 means gain)."""
    omega = _positive_frequency(omega)
    return np.exp(-2.0 * np.imag(index_excess(model, omega)) * omega * cell_length / C)


def calibrate_amplitude_from_absorption(model, absorption, cell_length, detuning=None):
    """Return a copy of an EIT model whose single-pass absorption at ``detuning`` equals ``absorption``.

    ``detuning`` is a Raman detuning in rad/s (default: the absorption maximum).
    """
    check_interval("absorption", absorption, 0.0, 1.0, closed=(False, False))
    check_positive("cell_length", cell_length)
    unit = replace(model, amplitude=1.0)
    delta = unit.absorption_max_detuning if detuning is None else detuning
    omega = unit.omega_coupling + delta
    im_unit = float(np.imag(unit._unit_chi(delta)))
    if im_unit <= 0:
        raise InvalidModelError("medium is not absorbing at the calibration point")
    amplitude = -math.log1p(-absorption) * C / (im_unit * omega * cell_length)
    return replace(model, amplitude=amplitude)


def calibrate_amplitude_from_group_delay(model, group_delay, cell_length, detuning=None):
    """Return a copy of an EIT model whose cell group delay at ``detuning`` equals ``group_delay``.

    The cell group delay is ``n_g L / c``; it is linear in the amplitude, so the
    solution is closed-form.  Raises :class:`InvalidModelError` if the
    requested sign is unreachable with a positive amplitude.
    """
    check_finite("group_delay", group_delay)
    check_positive("cell_length", cell_length)
    unit = replace(model, amplitude=1.0)
    delta = unit.absorption_max_detuning if detuning is None else detuning
    omega = unit.omega_coupling + delta
    chi, dchi = unit._unit_chi(delta, with_derivative=True)
    per_amplitude = 0.5 * (float(np.real(chi)) + omega * float(np.real(dchi)))
    excess = group_delay * C / cell_length - 1.0
    if per_amplitude == 0.0 or excess / per_amplitude <= 0.0:
        raise InvalidModelError(f"group delay {group_delay!r} s cannot be reached with a positive amplitude")
    return replace(model, amplitude=excess / per_amplitude)
