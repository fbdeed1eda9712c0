"""Extra cavity resonances forced by a negative round-trip group delay.

Two views of the same question are kept apart on purpose:

* phase roots (:func:`find_satellites`): frequencies where the real
  round-trip phase returns to its value at the principal resonance;
* intensity maxima (:func:`extract_peaks`): local maxima of ``|S|^2``, which
  gain or absorption can pull away from the phase roots.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq
from scipy.signal import find_peaks

from .cavity import round_trip_group_delay
from .dispersion import C, index_excess
from .exceptions import ResolutionError, SpanTooSmallError

PRINCIPAL = "principal"
SATELLITE = "satellite"


@dataclass(frozen=True)
class ResonancePeak:
    """An intensity maximum of a transmission spectrum (angular frequencies in rad/s)."""

    omega_center: float
    fwhm: float
    height: float
    kind: str

    def __post_init__(self):
        if not self.fwhm > 0:
            raise ValueError("fwhm must be > 0")
        if not self.height > 0:
            raise ValueError("height must be > 0")
        if self.kind not in (PRINCIPAL, SATELLITE):
            raise ValueError(f"kind must be {PRINCIPAL!r} or {SATELLITE!r}")

    def to_dict(self):
        two_pi = 2.0 * math.pi
        return {
            "center_hz": self.omega_center / two_pi,
            "fwhm_hz": self.fwhm / two_pi,
            "height": self.height,
            "kind": self.kind,
        }


def f_delta(geom, model, omega_p, delta):
    """Phase-mismatch function ``f`` (m rad/s) of a candidate resonance at ``omega_p + delta``.

    ``f(delta) = L_cell [(omega_p + delta) Re n(omega_p + delta) - omega_p Re n(omega_p)] + delta L_vac``.
    It vanishes at ``delta = 0`` and at every other frequency sharing the
    round-trip phase of ``omega_p``.  It is evaluated in a rearranged form
    that avoids subtracting two numbers of order ``omega_p L``.
    """
    omega_p = float(omega_p)
    delta = np.asarray(delta, dtype=float)
    if geom.L_cell == 0.0:
        out = delta * geom.length
    else:
        excess = np.real(index_excess(model, omega_p, delta))
        excess0 = float(np.real(index_excess(model, omega_p)))
        medium = omega_p * (excess - excess0) + delta * excess
        out = delta * geom.length + geom.L_cell * medium
    return out[()] if np.ndim(out) == 0 else out


def _mean_slope(geom, model, omega_p, delta, slope0):
    """``f(delta) / delta`` with its limit ``c tau`` at ``delta = 0``."""
    delta = np.asarray(delta, dtype=float)
    safe = np.where(delta == 0.0, 1.0, delta)
    out = np.where(delta == 0.0, slope0, f_delta(geom, model, omega_p, safe) / safe)
    return out[()] if out.ndim == 0 else out


def satellite_predicate(geom, model, omega_p, method="fd"):
    """True when the round-trip group delay at ``omega_p`` is negative."""
    if geom.L_cell == 0.0:
        return False
    return bool(round_trip_group_delay(geom, model, omega_p, method=method) < 0.0)


def dispersion_slope_criterion(geom, model, omega_p, method="fd"):
    """Same condition written on the index slope: ``-dn/domega > (L_vac + n L_cell) / (omega_p L_cell)``."""
    if geom.L_cell == 0.0:
        return False
    from .dispersion import group_index

    omega_p = float(omega_p)
    n_real = 1.0 + float(np.real(index_excess(model, omega_p)))
    slope = (group_index(model, omega_p, method=method) - n_real) / omega_p
    return bool(-slope > (geom.L_vac + n_real * geom.L_cell) / (omega_p * geom.L_cell))


def default_search_span(geom, model):
    """Half-width (rad/s) of the first satellite scan."""
    width = model.linewidth
    if not math.isfinite(width):
        return 0.25 * geom.fsr
    return min(10.0 * (model.feature_halfwidth + 10.0 * width), 0.5 * geom.fsr)


def _scan_roots(geom, model, omega_p, span, points, slope0):
    n = int(points) | 1  # odd so that delta = 0 is a grid point
    grid = np.linspace(-span, span, n)
    grid[n // 2] = 0.0
    g = _mean_slope(geom, model, omega_p, grid, slope0)
    roots = []
    sign = np.sign(g)
    for i in np.flatnonzero(sign[:-1] * sign[1:] < 0):
        a, b = grid[i], grid[i + 1]
        root = brentq(
            lambda d: float(_mean_slope(geom, model, omega_p, d, slope0)),
            a, b, xtol=1e-12 * span, rtol=1e-10, maxiter=200,
        )
        roots.append(float(root))
    roots.extend(float(d) for d in grid[(g == 0.0) & (grid != 0.0)])
    return sorted(roots)


def find_satellites(geom, model, omega_p, search_span=None, points=10_000, method="fd"):
    """Nonzero roots ``delta`` of :func:`f_delta` with ``|delta| <= search_span``.

    Roots are bracketed on a uniform scan of ``f(delta) / delta`` (which
    removes the trivial root) and refined with Brent's method.  When the
    round-trip delay is negative, the intermediate-value theorem guarantees a
    root on each side; failing to find them raises :class:`SpanTooSmallError`.
    With ``search_span=None`` the span starts from the model's feature size
    and is doubled, up to half a free spectral range, until both are found.
    """
    if int(points) < 10_000:
        raise ValueError("points must be >= 10000")
    omega_p = float(omega_p)
    tau = round_trip_group_delay(geom, model, omega_p, method=method)
    slope0 = C * tau
    required = geom.L_cell > 0.0 and tau < 0.0

    def complete(roots):
        return any(r > 0 for r in roots) and any(r < 0 for r in roots)

    if search_span is not None:
        roots = _scan_roots(geom, model, omega_p, float(search_span), points, slope0)
        if required and not complete(roots):
            raise SpanTooSmallError(
                f"round-trip group delay is {tau:.4g} s but the scan over +/-{search_span:.4g} rad/s "
                "did not find a root on both sides; widen search_span"
            )
        return roots

    span = default_search_span(geom, model)
    limit = 0.5 * geom.fsr
    while True:
        roots = _scan_roots(geom, model, omega_p, span, points, slope0)
        if not required or complete(roots):
            return roots
        if span >= limit:
            raise SpanTooSmallError(
                f"round-trip group delay is {tau:.4g} s but no root pair was found within half a free "
                "spectral range"
            )
        span = min(2.0 * span, limit)


def _half_crossing(intensity, x, peak, half, direction, stop):
    """Interpolated position where ``intensity`` drops below ``half`` walking from ``peak``."""
    i = peak
    while True:
        j = i + direction
        if j < 0 or j >= intensity.size or j == stop:
            return None
        if intensity[j] < half:
            frac = (intensity[i] - half) / (intensity[i] - intensity[j])
            return x[i] + frac * (x[j] - x[i])
        i = j


def extract_peaks(spectrum, omega_p=None, threshold_factor=3.0, min_points_per_fwhm=8):
    """Intensity maxima of ``spectrum`` taller than ``threshold_factor`` times its median.

    The FWHM comes from linearly interpolated half-height crossings; if a
    crossing is hidden by the grid edge or a neighbouring peak, the visible
    half-width is doubled.  The peak nearest ``omega_p`` (default: the
    spectrum carrier) is the principal one; of two equidistant peaks the
    lower-frequency one wins.
    """
    intensity = spectrum.intensity
    x = spectrum.detuning
    step = spectrum.step
    threshold = threshold_factor * float(np.median(intensity))
    idx, _ = find_peaks(intensity, height=threshold)
    idx = [int(i) for i in idx if intensity[i] > 0]
    found = []
    for k, p in enumerate(idx):
        half = 0.5 * intensity[p]
        left_stop = idx[k - 1] if k > 0 else -1
        right_stop = idx[k + 1] if k + 1 < len(idx) else intensity.size
        left = _half_crossing(intensity, x, p, half, -1, left_stop)
        right = _half_crossing(intensity, x, p, half, +1, right_stop)
        center = spectrum.carrier + x[p]
        if left is None and right is None:
            raise ResolutionError(
                f"peak at {center / (2 * math.pi):.9g} Hz has no half-height crossing inside the grid"
            )
        if left is None:
            fwhm = 2.0 * (right - x[p])
        elif right is None:
            fwhm = 2.0 * (x[p] - left)
        else:
            fwhm = right - left
        if fwhm < min_points_per_fwhm * step:
            raise ResolutionError(
                f"peak at {center / (2 * math.pi):.9g} Hz has FWHM {fwhm / (2 * math.pi):.4g} Hz, "
                f"fewer than {min_points_per_fwhm} grid steps of {step / (2 * math.pi):.4g} Hz; refine the grid"
            )
        found.append((x[p], fwhm, float(intensity[p])))

    if not found:
        return []
    target = (float(omega_p) - spectrum.carrier) if omega_p is not None else 0.0
    distances = [abs(d - target) for d, _, _ in found]
    nearest = min(distances)
    ties = [i for i, dist in enumerate(distances) if dist - nearest <= 0.5 * step]
    principal = min(ties, key=lambda i: found[i][0])
    return [
        ResonancePeak(spectrum.carrier + d, fwhm, h, PRINCIPAL if i == principal else SATELLITE)
        for i, (d, fwhm, h) in enumerate(found)
    ]
