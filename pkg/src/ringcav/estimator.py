"""scikit-learn style front end to the cavity model."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .cavity import (
    CavityGeometry,
    find_resonance,
    lorentzian_reduction,
    round_trip_group_delay,
    transmission_at,
    transmission_spectrum,
    transmission_sweep,
    tune_cavity,
)
from .dispersion import Vacuum
from .exceptions import DegenerateDelayError
from .resonances import extract_peaks, find_satellites, satellite_predicate
from .timedomain import InputSignal, ringdown


class RingCavity(TransformerMixin, BaseEstimator):
    """Ring cavity around a dispersive medium.

    ``fit`` locates the principal resonance and its round-trip properties;
    ``transform`` maps detunings from that resonance (rad/s, one column) to
    ``[Re S, Im S, |S|^2]`` and ``predict`` returns ``|S|^2`` alone.

    Parameters mirror :class:`~ringcav.cavity.CavityGeometry`; ``medium`` is a
    dispersion model (vacuum when ``None``) and ``tune`` locks the cavity
    length to the medium's operating frequency.

    Attributes set by ``fit``: ``geometry_``, ``medium_``, ``omega_p_``,
    ``group_delay_``, ``decay_rate_``, ``amplitude_``, ``has_satellites_``,
    ``satellites_``.
    """

    def __init__(self, R=0.99, T=0.01, L_vac=2.45, L_cell=0.0, L_m=1.225, extra_loss=0.0,
                 medium=None, tune=True, search_span=None):
        self.R = R
        self.T = T
        self.L_vac = L_vac
        self.L_cell = L_cell
        self.L_m = L_m
        self.extra_loss = extra_loss
        self.medium = medium
        self.tune = tune
        self.search_span = search_span

    def fit(self, X=None, y=None):
        medium = Vacuum() if self.medium is None else self.medium
        geometry = CavityGeometry(self.R, self.T, self.L_vac, self.L_cell, self.L_m, self.extra_loss)
        if self.tune:
            geometry = tune_cavity(geometry, medium)
        omega_p = find_resonance(geometry, medium, medium.operating_frequency)
        self.geometry_ = geometry
        self.medium_ = medium
        self.omega_p_ = omega_p
        self.group_delay_ = round_trip_group_delay(geometry, medium, omega_p)
        try:
            params = lorentzian_reduction(geometry, medium, omega_p)
            self.decay_rate_, self.amplitude_ = float(params.decay_rate), float(params.amplitude)
        except DegenerateDelayError:
            self.decay_rate_ = self.amplitude_ = float("nan")
        self.has_satellites_ = satellite_predicate(geometry, medium, omega_p)
        self.satellites_ = np.asarray(find_satellites(geometry, medium, omega_p, self.search_span))
        return self

    def _detunings(self, X):
        X = check_array(X, ensure_2d=False, dtype=float)
        if X.ndim == 2:
            if X.shape[1] != 1:
                raise ValueError("X must have a single column of detunings")
            X = X[:, 0]
        return X

    def transmission(self, X):
        """Complex transfer function at the detunings ``X`` (rad/s)."""
        check_is_fitted(self, "omega_p_")
        return transmission_at(self.geometry_, self.medium_, self.omega_p_, self._detunings(X))

    def transform(self, X):
        s = np.atleast_1d(self.transmission(X))
        return np.column_stack([s.real, s.imag, np.abs(s) ** 2])

    def predict(self, X):
        return np.abs(np.atleast_1d(self.transmission(X))) ** 2

    def spectrum(self, span, points):
        check_is_fitted(self, "omega_p_")
        return transmission_sweep(self.geometry_, self.medium_, self.omega_p_, span, points)

    def peaks(self, span, points, threshold_factor=3.0):
        spectrum = self.spectrum(span, points)
        return extract_peaks(spectrum, self.omega_p_, threshold_factor=threshold_factor)

    def ringdown(self, t_grid=None, detuning=0.0, E0=1.0, fall_time=0.0):
        check_is_fitted(self, "omega_p_")
        signal = InputSignal(E0, self.omega_p_ + detuning, 0.0, fall_time)
        return ringdown(self.geometry_, self.medium_, signal, t_grid, carrier=self.omega_p_)

    def spectrum_at(self, detuning):
        check_is_fitted(self, "omega_p_")
        return transmission_spectrum(self.geometry_, self.medium_, self.omega_p_, detuning)
