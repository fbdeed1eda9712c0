import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ringcav.cavity import (
    feedthrough_phase_at,
    lorentzian_reduction,
    round_trip_group_delay,
    round_trip_phase_at,
    transmission_at,
)
from ringcav.dispersion import C
from ringcav.exceptions import BandwidthError, DomainError, SizingError
from ringcav.timedomain import (
    InputSignal,
    RingdownTrace,
    analytic_lorentzian_ringdown,
    causality_residual,
    cavity_transfer,
    default_time_grid,
    dominant_oscillation_frequency,
    lorentzian_transfer,
    max_time_step,
    noncausal_truncated_prediction,
    overshoot,
    response_function,
    response_time_grid,
    ringdown,
    simulate_ringdown,
    steady_intensity,
    tail_time_constant,
)

TWO_PI = 2.0 * math.pi


def _rel_l2(a, b):
    return float(np.linalg.norm(np.asarray(a) - np.asarray(b)) / np.linalg.norm(b))


@pytest.fixture(scope="module")
def vacuum_run(vacuum_config):
    cfg = vacuum_config
    signal = cfg.input_signal()
    return cfg.geometry, cfg.medium, cfg.principal_resonance, signal, ringdown(cfg.geometry, cfg.medium, signal)


@pytest.fixture(scope="module")
def doublet_run(doublet_config):
    cfg = doublet_config
    signal = cfg.input_signal()
    return cfg.geometry, cfg.medium, cfg.principal_resonance, signal, ringdown(cfg.geometry, cfg.medium, signal)


# --- response function ----------------------------------------------------

def test_vacuum_response_is_a_geometric_comb(vacuum_config):
    geom, model, carrier = vacuum_config.geometry, vacuum_config.medium, vacuum_config.principal_resonance
    t = response_time_grid(geom, 40 * geom.round_trip_time)
    r = response_function(geom, model, t, carrier=carrier)
    # Oracle: explicit ray sum, each echo smoothed by the same Gaussian kernel.
    sigma = 3.0 * max_time_step(geom)
    theta = feedthrough_phase_at(geom, carrier, 0.0)
    phi = float(np.real(round_trip_phase_at(geom, model, carrier, 0.0)))
    k = np.arange(math.ceil(math.log(1e-18) / math.log(geom.R_eff)))
    arrival = geom.L_m / C + k * geom.round_trip_time
    weight = geom.T * geom.R_eff**k * np.exp(1j * (theta + k * phi))
    lag = t[:, None] - arrival[None, :]
    expected = (np.exp(-0.5 * (lag / sigma) ** 2) @ weight) / (math.sqrt(TWO_PI) * sigma)
    assert np.max(np.abs(r - expected)) < 1e-8 * np.max(np.abs(expected))
    # successive echoes shrink by R_eff
    peaks = [np.max(np.abs(r[np.abs(t - geom.L_m / C - k * geom.round_trip_time) < sigma])) for k in range(5)]
    assert np.allclose(np.array(peaks[1:]) / np.array(peaks[:-1]), geom.R_eff, rtol=1e-3)


@pytest.mark.parametrize("name", ["vacuum_config", "doublet_config", "eit_config"])
def test_response_is_causal(request, name):
    cfg = request.getfixturevalue(name)
    geom = cfg.geometry
    t = response_time_grid(geom, 20 * geom.round_trip_time)
    r = response_function(geom, cfg.medium, t, carrier=cfg.principal_resonance)
    assert causality_residual(r, t) < 1e-6


def test_gain_doublet_response_starts_after_zero_despite_negative_delay(doublet_config):
    geom, model, carrier = doublet_config.geometry, doublet_config.medium, doublet_config.principal_resonance
    assert round_trip_group_delay(geom, model, carrier) < 0
    t = response_time_grid(geom, 50 * geom.round_trip_time)
    r = np.abs(response_function(geom, model, t, carrier=carrier))
    first_echo = geom.L_m / C
    assert np.max(r[t < 0]) < 1e-6 * np.max(r)
    onset = t[np.argmax(r > 1e-3 * np.max(r))]
    sigma = 3.0 * max_time_step(geom)
    assert first_echo - 4 * sigma <= onset <= first_echo


def test_response_grid_preconditions(vacuum_config):
    geom, model, carrier = vacuum_config.geometry, vacuum_config.medium, vacuum_config.principal_resonance
    dt = max_time_step(geom)
    with pytest.raises(SizingError, match="T_pre"):
        response_function(geom, model, dt * np.arange(-5, 1000), carrier=carrier)
    with pytest.raises(SizingError, match="coarse"):
        response_function(geom, model, 2 * dt * np.arange(-100, 1000), carrier=carrier)


def test_bandwidth_violation_is_reported():
    def transfer(detuning):
        return np.ones_like(detuning, dtype=complex)

    transfer.features = (TWO_PI * 1e9, TWO_PI * 1e6)
    signal = InputSignal(1.0, 1e15)
    with pytest.raises(BandwidthError, match="dt <="):
        simulate_ringdown(transfer, signal, 1e-9 * np.arange(-10, 100), carrier=1e15)


# --- single-pole formulas -------------------------------------------------

def test_analytic_lorentzian_constant_then_decay():
    gamma, S0, omega_p, L_m = 2e6, 3e5, 2e15, 1.2
    delay = L_m / C
    t = np.linspace(-1e-6, 5e-6, 6001)
    detuned = analytic_lorentzian_ringdown(gamma, S0, omega_p, omega_p + 1e6, 2.0, L_m, t)
    before = detuned.intensity[t <= delay]
    assert np.allclose(before, abs(S0 * 2.0) ** 2 / (gamma**2 / 4 + 1e12), rtol=1e-12)
    late = t > 1e-6
    slope = np.polyfit(t[late], np.log(detuned.intensity[late]), 1)[0]
    assert slope == pytest.approx(-gamma, rel=1e-9)


def test_analytic_lorentzian_is_continuous_on_resonance():
    gamma, S0, omega_p, L_m = 2e6, 3e5, 2e15, 1.2
    delay = L_m / C
    t = delay + np.array([-1e-15, 0.0, 1e-15])
    trace = analytic_lorentzian_ringdown(gamma, S0, omega_p, omega_p, 1.0, L_m, t)
    assert np.allclose(trace.field, trace.field[1], rtol=1e-8)


def test_analytic_lorentzian_rejects_gain():
    with pytest.raises(DomainError):
        analytic_lorentzian_ringdown(-1.0, 1.0, 2e15, 2e15, 1.0, 1.0, [0.0, 1.0])
    with pytest.raises(DomainError):
        noncausal_truncated_prediction(1.0, 1.0, 2e15, 2e15, 1.0, 1.0, [0.0, 1.0])


def test_truncated_prediction_vanishes_after_transit_and_anticipates_before():
    gamma, S0, omega_p, L_m = -2e6, -3e5, 2e15, 1.2
    delay = L_m / C
    t = np.linspace(-2e-6, 2e-6, 4001)
    trace = noncausal_truncated_prediction(gamma, S0, omega_p, omega_p, 1.0, L_m, t)
    assert np.all(trace.field[t > delay] == 0)
    early = t <= delay
    expected = abs(S0) ** 2 * (1 - np.exp(-0.5 * gamma * (t[early] - delay))) ** 2 / (0.5 * gamma) ** 2
    assert np.allclose(trace.intensity[early], expected, rtol=1e-9)
    # the output already reacts before the turn-off at t = 0
    assert trace.intensity[np.searchsorted(t, -1e-6)] < 0.5 * abs(S0 / (0.5 * gamma)) ** 2


# --- ring-down engine -----------------------------------------------------

def test_steady_state_matches_transmission(vacuum_run, doublet_run, eit_config):
    runs = [vacuum_run, doublet_run]
    cfg = eit_config
    runs.append((cfg.geometry, cfg.medium, cfg.principal_resonance, cfg.input_signal(), None))
    for geom, model, carrier, signal, trace in runs:
        if trace is None:
            t = carrier * 0 + max_time_step(geom) * np.arange(-200, 50)
            trace = ringdown(geom, model, signal, t_grid=t)
        expected = abs(transmission_at(geom, model, carrier, signal.omega_l - carrier) * signal.amplitude) ** 2
        assert steady_intensity(trace) == pytest.approx(expected, rel=1e-3)


def test_vacuum_tail_rate_matches_cavity_decay(vacuum_run):
    geom, model, carrier, _, trace = vacuum_run
    gamma = 2 * (1 - geom.R_eff) / (geom.R_eff * geom.round_trip_time)
    assert 1.0 / tail_time_constant(trace) == pytest.approx(gamma, rel=0.01)


def test_injected_lorentzian_matches_closed_form(vacuum_run):
    geom, model, carrier, signal, _ = vacuum_run
    gamma, S0 = lorentzian_reduction(geom, model, carrier)
    transfer = lorentzian_transfer(gamma, S0, carrier, geom.L_m, carrier)
    t = default_time_grid(geom, model, signal, omega_p=carrier)
    simulated = simulate_ringdown(transfer, signal, t, carrier)
    closed = analytic_lorentzian_ringdown(gamma, S0, carrier, signal.omega_l, signal.amplitude, geom.L_m, t, carrier)
    assert _rel_l2(simulated.field, closed.field) < 1e-3


def test_doubling_amplitude_doubles_field_exactly(doublet_config):
    geom, model, carrier = doublet_config.geometry, doublet_config.medium, doublet_config.principal_resonance
    t = max_time_step(geom) * np.arange(-100, 2000)
    one = ringdown(geom, model, InputSignal(1.0, carrier), t)
    two = ringdown(geom, model, InputSignal(2.0, carrier), t)
    assert np.array_equal(two.field, 2.0 * one.field)
    assert np.allclose(two.intensity, 4.0 * one.intensity, rtol=1e-15)


@settings(max_examples=20, deadline=None)
@given(st.complex_numbers(max_magnitude=1e3, allow_nan=False, allow_infinity=False).filter(lambda z: abs(z) > 1e-3),
       st.floats(-2e6, 2e6))
def test_ringdown_is_linear_in_amplitude(vacuum_config, scale, detuning):
    geom, model, carrier = vacuum_config.geometry, vacuum_config.medium, vacuum_config.principal_resonance
    t = max_time_step(geom) * np.arange(-50, 800)
    omega_l = carrier + TWO_PI * detuning
    base = ringdown(geom, model, InputSignal(1.0, omega_l), t)
    scaled = ringdown(geom, model, InputSignal(scale, omega_l), t)
    assert np.allclose(scaled.field, scale * base.field, rtol=1e-12, atol=1e-14 * abs(scale))


def _sub_grid(trace, t_ref):
    """Samples of ``trace`` at the times ``t_ref`` (which must lie on its grid)."""
    index = np.rint((t_ref - trace.t[0]) / trace.dt).astype(int)
    assert np.allclose(trace.t[index], t_ref, rtol=0, atol=1e-3 * trace.dt)
    return trace.field[index]


def test_gain_doublet_trace_converges_under_refinement(doublet_run):
    geom, model, carrier, signal, base = doublet_run
    dt = base.dt
    n_pre = int(round(-base.t[0] / dt))
    n_post = base.t.size - 1 - n_pre
    finer = ringdown(geom, model, signal, t_grid=(dt / 2) * np.arange(-2 * n_pre, 2 * n_post + 1))
    longer = ringdown(geom, model, signal, t_grid=dt * np.arange(-2 * n_pre, 2 * n_post + 1))
    both = ringdown(geom, model, signal, t_grid=(dt / 2) * np.arange(-4 * n_pre, 4 * n_post + 1))
    for other in (finer, longer, both):
        assert _rel_l2(_sub_grid(other, base.t), base.field) < 1e-3


def test_output_before_turn_off_ignores_the_future(doublet_config):
    geom, model, carrier = doublet_config.geometry, doublet_config.medium, doublet_config.principal_resonance
    dt = max_time_step(geom)
    t = dt * np.arange(-400, 4000)
    early = ringdown(geom, model, InputSignal(1.0, carrier, turn_off_time=0.0), t)
    late = ringdown(geom, model, InputSignal(1.0, carrier, turn_off_time=2000 * dt), t)
    window = t <= geom.L_m / C - 5 * (3 * dt)  # five kernel widths ahead of the first echo
    assert _rel_l2(early.field[window], late.field[window]) < 1e-6
    # a shorter record gives the same early output
    short = ringdown(geom, model, InputSignal(1.0, carrier), t[:1500])
    assert _rel_l2(short.field, early.field[:1500]) < 1e-6


def test_vanishing_fall_time_approaches_the_step(vacuum_config):
    geom, model, carrier = vacuum_config.geometry, vacuum_config.medium, vacuum_config.principal_resonance
    t = max_time_step(geom) * np.arange(-100, 3000)
    step = ringdown(geom, model, InputSignal(1.0, carrier), t)
    quick = ringdown(geom, model, InputSignal(1.0, carrier, fall_time=1e-3 * max_time_step(geom)), t)
    assert _rel_l2(quick.field, step.field) < 1e-3


def test_slow_fall_delays_the_decay(vacuum_config):
    geom, model, carrier = vacuum_config.geometry, vacuum_config.medium, vacuum_config.principal_resonance
    t = max_time_step(geom) * np.arange(-100, 6000)
    step = ringdown(geom, model, InputSignal(1.0, carrier), t)
    slow = ringdown(geom, model, InputSignal(1.0, carrier, fall_time=2e-7), t)
    probe = np.searchsorted(t, 3e-7)
    assert slow.intensity[probe] > step.intensity[probe]


def test_turn_off_after_record_is_an_error(vacuum_config):
    geom, model, carrier = vacuum_config.geometry, vacuum_config.medium, vacuum_config.principal_resonance
    t = max_time_step(geom) * np.arange(-10, 100)
    with pytest.raises(SizingError):
        ringdown(geom, model, InputSignal(1.0, carrier, turn_off_time=1.0), t)


def test_coarse_output_grid_is_refined_internally(vacuum_config):
    geom, model, carrier = vacuum_config.geometry, vacuum_config.medium, vacuum_config.principal_resonance
    dt = max_time_step(geom)
    fine = ringdown(geom, model, InputSignal(1.0, carrier), dt * np.arange(-300, 3001))
    coarse = ringdown(geom, model, InputSignal(1.0, carrier), 3 * dt * np.arange(-100, 1001))
    assert _rel_l2(coarse.field, fine.field[::3]) < 1e-9


# --- records and diagnostics ----------------------------------------------

def test_input_and_trace_validation():
    with pytest.raises(ValueError):
        InputSignal(1.0, 1e15, fall_time=-1.0)
    with pytest.raises(ValueError):
        InputSignal(float("nan"), 1e15)
    with pytest.raises(ValueError):
        RingdownTrace(np.array([0.0, 1.0, 3.0]), np.zeros(3), 1.0)
    with pytest.raises(ValueError):
        RingdownTrace(np.arange(3.0), np.zeros(4), 1.0)


def _synthetic_trace(field_after, t):
    field = np.where(t < 0, 1.0 + 0j, field_after)
    return RingdownTrace(t, field, 1.0, 0.0)


def test_tail_fit_recovers_exponential():
    t = np.linspace(-1e-6, 2e-5, 20001)
    trace = _synthetic_trace(np.exp(-t / (2 * 3e-6)), t)
    assert tail_time_constant(trace) == pytest.approx(3e-6, rel=1e-9)


def test_overshoot_finds_the_bump():
    t = np.linspace(-1e-6, 1e-5, 11001)
    bump = (1 + 0.5 * np.sin(np.pi * t / 2e-6)) * (t < 2e-6) + 0.1 * (t >= 2e-6)
    ratio, when = overshoot(_synthetic_trace(np.sqrt(bump), t))
    assert ratio == pytest.approx(1.5**1, rel=1e-4)
    assert when == pytest.approx(1e-6, abs=2e-9)


def test_oscillation_frequency_of_a_beat():
    t = np.linspace(-1e-6, 2e-5, 21001)
    beat = np.exp(-t / 4e-6) * (np.exp(-1j * TWO_PI * 0.6e6 * t) + 0.5 * np.exp(1j * TWO_PI * 0.6e6 * t))
    freq = dominant_oscillation_frequency(_synthetic_trace(beat, t), drop=0.5)
    assert freq == pytest.approx(1.2e6, rel=0.01)


def test_diagnostics_need_enough_data():
    t = np.linspace(0.0, 1e-6, 10)
    trace = RingdownTrace(t, np.ones(10), 1.0, 0.0)
    with pytest.raises(SizingError):
        steady_intensity(trace)


def test_transfer_carries_geometry_step(vacuum_config):
    geom = vacuum_config.geometry
    transfer = cavity_transfer(geom, vacuum_config.medium, vacuum_config.principal_resonance)
    assert transfer.smoothing_step == max_time_step(geom)
