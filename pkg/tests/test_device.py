"""State dynamics: pulse updates, DC hysteresis, retention, energy."""

import math
from dataclasses import replace

import numpy as np
import pytest

from ftjsim.conduction import default_params
from ftjsim.device import (
    DeviceState,
    ENDURANCE_LIMIT,
    PulseScheme,
    PulseSpec,
    apply_pulse,
    dc_write_loop,
    default_update_model,
    endurance_register,
    memory_window,
    preset_scheme,
    read_state,
    retention_evolve,
    run_scheme,
    sample_device,
    write_energy,
)

POT = PulseSpec(-1.6, 50e-6)
DEP = PulseSpec(2.4, 50e-6)


@pytest.fixture(scope="module")
def p():
    return default_params()


@pytest.fixture()
def m0():
    """Noiseless update model."""
    return default_update_model(c2c_rel=0.0)


def _curve(n, a, n_full):
    return (1.0 - math.exp(-n / a)) / (1.0 - math.exp(-n_full / a))


def test_apply_pulse_follows_closed_form(m0):
    a = m0.amplitude_ramp.a_pot
    s = DeviceState(w=0.0)
    for n in range(1, 30):
        s = apply_pulse(s, POT, m0)
        assert s.w == pytest.approx(_curve(n, a, m0.n_full), abs=1e-12)


def test_depression_mirrors_potentiation(m0):
    a = m0.amplitude_ramp.a_dep
    s = DeviceState(w=1.0)
    for n in range(1, 30):
        s = apply_pulse(s, DEP, m0)
        assert 1.0 - s.w == pytest.approx(_curve(n, a, m0.n_full), abs=1e-12)


def test_sub_onset_pulses_are_inert(m0):
    s = DeviceState(w=0.3)
    for v in (-0.6, -0.5, 0.0, 0.5, 0.8):  # onsets are strict
        assert apply_pulse(s, PulseSpec(v, 50e-6), m0) is s


def test_zero_width_pulse_is_noop(m0):
    s = DeviceState(w=0.3)
    assert apply_pulse(s, PulseSpec(-1.6, 0.0), m0) is s
    assert write_energy(PulseSpec(-1.6, 0.0), s, default_params()) == 0.0


def test_broken_device_does_not_switch(m0):
    s = DeviceState(w=0.3, broken=True)
    assert apply_pulse(s, POT, m0) is s


def test_full_train_saturates(m0):
    s = DeviceState(w=0.0)
    for _ in range(m0.n_full):
        s = apply_pulse(s, POT, m0)
    assert s.w == 1.0
    for _ in range(m0.n_full):
        s = apply_pulse(s, DEP, m0)
    assert s.w == 0.0


def test_steps_shrink_along_the_curve(m0):
    s = DeviceState(w=0.0)
    deltas = []
    for _ in range(20):
        s2 = apply_pulse(s, POT, m0)
        deltas.append(s2.w - s.w)
        s = s2
    assert all(d2 < d1 for d1, d2 in zip(deltas, deltas[1:]))


def test_polarity_reversal_counts_cycles(m0):
    s = DeviceState(w=0.5)
    s = apply_pulse(s, POT, m0)
    assert s.cycles == 0 and s.last_polarity == -1
    s = apply_pulse(s, DEP, m0)
    assert s.cycles == 1 and s.last_polarity == 1
    s = apply_pulse(s, DEP, m0)
    assert s.cycles == 1
    s = apply_pulse(s, POT, m0)
    assert s.cycles == 2


def test_c2c_noise_scale():
    """Single-pulse step spread matches the configured relative sigma.

    The multiplier is mean-one lognormal; over 1000 repetitions the
    sample std of the step must land within 20% of c2c_rel times the
    mean step.
    """
    m = default_update_model(c2c_rel=0.10)
    rng = np.random.default_rng(3)
    steps = []
    for _ in range(1000):
        s = apply_pulse(DeviceState(w=0.4), POT, m, rng=rng)
        steps.append(s.w - 0.4)
    steps = np.array(steps)
    rel = np.std(steps, ddof=1) / np.mean(steps)
    assert rel == pytest.approx(0.10, rel=0.20)
    assert np.mean(steps) > 0


def test_c2c_requires_generator():
    m = default_update_model(c2c_rel=0.10)
    with pytest.raises(ValueError):
        apply_pulse(DeviceState(w=0.4), POT, m)


def test_scheme_validation():
    with pytest.raises(ValueError):
        PulseScheme("bogus", 10, -1.6, v_step=-0.1, width=50e-6)
    with pytest.raises(ValueError):
        PulseScheme("amplitude_ramp", 10, -1.6, v_step=+0.1, width=50e-6)
    with pytest.raises(ValueError):
        PulseScheme("width_ramp", 10, -1.6, width_start=10e-6, width_ratio=0.9)
    with pytest.raises(ValueError):
        PulseSpec(-1.6, -1e-6)


def test_amplitude_preset_covers_onset_to_write():
    sch = preset_scheme("amplitude_ramp", "dep")
    pulses = sch.pulses()
    assert len(pulses) == 65
    assert pulses[0].v_write == pytest.approx(0.8)
    assert pulses[-1].v_write == pytest.approx(2.4)
    assert all(q.t_width == 50e-6 for q in pulses)


def test_amplitude_preset_full_swing(p, m0):
    trace = run_scheme(DeviceState(w=0.0), preset_scheme("amplitude_ramp", "pot"),
                       m0, p)
    assert trace[-1].w == 1.0
    trace = run_scheme(DeviceState(w=1.0), preset_scheme("amplitude_ramp", "dep"),
                       m0, p)
    assert trace[-1].w == 0.0


def test_width_preset_reaches_full_set(p, m0):
    trace = run_scheme(DeviceState(w=0.0), preset_scheme("width_ramp", "pot"),
                       m0, p)
    assert trace[-1].w >= 0.99


def test_run_scheme_readout_tracks_state(p, m0):
    trace = run_scheme(DeviceState(w=0.0), preset_scheme("amplitude_ramp", "pot"),
                       m0, p)
    r = [step.readout.r_ohms for step in trace]
    # potentiation lowers resistance monotonically (noiseless)
    assert all(b <= a for a, b in zip(r, r[1:]))
    assert r[-1] == pytest.approx(1e8, rel=1e-6)


# --- DC hysteresis -----------------------------------------------------------

def _loop_grid(v_neg=1.6, v_pos=2.4, step=0.025):
    def ramp(a, b):
        n = max(int(round(abs(b - a) / step)), 1)
        return np.linspace(a, b, n + 1)
    return np.concatenate([ramp(0.0, -v_neg), ramp(-v_neg, v_pos)[1:],
                           ramp(v_pos, -v_neg)[1:], ramp(-v_neg, 0.0)[1:]])


def test_confined_sweep_leaves_state_alone(p):
    grid = np.linspace(-0.3, 0.3, 25)
    for w0 in (0.0, 0.5, 1.0):
        points = dc_write_loop(DeviceState(w=w0), grid, p)
        assert all(pt.w == w0 for pt in points)


def test_memory_window_default_loop(p):
    points = dc_write_loop(DeviceState(w=0.0), _loop_grid(), p)
    win = memory_window(points)
    assert win.window_volts == pytest.approx(1.4, abs=0.05)
    assert win.v_c_minus == pytest.approx(-0.6, abs=0.05)
    assert win.v_c_plus == pytest.approx(0.8, abs=0.05)


def test_loop_closes(p):
    """A full loop returns to the same branch state on the second visit.

    The sweep order 0 -> -1.6 -> +2.4 -> -1.6 -> 0 passes the negative
    write twice; both visits must leave the device in the same (LRS)
    state, so the trailing leg retraces the leading one.
    """
    points = dc_write_loop(DeviceState(w=0.0), _loop_grid(), p)
    grid = _loop_grid()
    visits = np.flatnonzero(np.isclose(grid, -1.6))
    assert len(visits) == 2
    w_first, w_second = points[visits[0]].w, points[visits[1]].w
    assert w_second == pytest.approx(w_first, abs=1e-12)
    r_first = points[visits[0]].readout.r_ohms
    r_last = points[-1].readout.r_ohms
    assert r_last == pytest.approx(r_first, rel=0.05)
    assert points[-1].w == 1.0


def test_loop_rejects_non_finite_grid(p):
    with pytest.raises(ValueError):
        dc_write_loop(DeviceState(w=0.0), [0.0, float("nan")], p)


# --- retention / endurance / energy -----------------------------------------

def test_retention_zero_rate_is_identity():
    s = DeviceState(w=0.77)
    assert retention_evolve(s, 950400.0, 0.0) is s
    assert retention_evolve(s, 0.0, 1e-6) is s


def test_retention_exponential_decay():
    s = retention_evolve(DeviceState(w=1.0), 1e7, drift_rate=1e-7)
    assert s.w == pytest.approx(0.5 + 0.5 * math.exp(-1.0), abs=1e-9)
    s = retention_evolve(DeviceState(w=0.0), 1e7, drift_rate=1e-7)
    assert s.w == pytest.approx(0.5 - 0.5 * math.exp(-1.0), abs=1e-9)


def test_retention_validation():
    with pytest.raises(ValueError):
        retention_evolve(DeviceState(w=1.0), -1.0)
    with pytest.raises(ValueError):
        retention_evolve(DeviceState(w=1.0), 1.0, drift_rate=-1e-9)


def test_endurance_boundary():
    s = DeviceState(w=1.0)
    s = endurance_register(s, ENDURANCE_LIMIT)
    assert not s.broken
    s = endurance_register(s, 1)
    assert s.broken
    # broken is sticky
    assert endurance_register(s, 0).broken


def test_write_energy_formula(p):
    from ftjsim.conduction import current_total
    s = DeviceState(w=0.0)
    pulse = PulseSpec(-1.6, 50e-6)
    expect = abs(current_total(-1.6, 300.0, p, s)) * 1.6 * 50e-6
    assert write_energy(pulse, s, p) == pytest.approx(expect, rel=1e-12)
    # frozen default figure (the sub-pJ target misses by ~4 decades;
    # see the acceptance suite)
    assert write_energy(pulse, s, p) * 1e12 == pytest.approx(
        7642.127523053428, rel=1e-9)


def test_sample_device_statistics(p):
    offsets = np.array([sample_device(p, 0.1, ss).d2d_log10
                        for ss in np.random.SeedSequence(5).spawn(2000)])
    assert np.std(offsets, ddof=1) == pytest.approx(0.1, abs=0.01)
    assert abs(np.mean(offsets)) < 0.01
    # reproducible per seed
    a = sample_device(p, 0.1, 123)
    b = sample_device(p, 0.1, 123)
    assert a.d2d_log10 == b.d2d_log10
    assert sample_device(p, 0.0, 7).d2d_log10 == 0.0


def test_read_state_consistency(p):
    s = DeviceState(w=1.0)
    ro = read_state(s, p, v_read=0.3)
    assert ro.r_ohms == pytest.approx(0.3 / ro.i_amps, rel=1e-15)
    assert ro.j_a_per_m2 == pytest.approx(ro.i_amps / p.area, rel=1e-15)
    assert read_state(s, p, v_read=0.3).r_ohms == pytest.approx(1e8, rel=1e-9)


def test_state_validation():
    with pytest.raises(ValueError):
        DeviceState(w=1.5)
    with pytest.raises(ValueError):
        DeviceState(w=-0.1)
    with pytest.raises(ValueError):
        DeviceState(w=0.5, d2d_log10=float("inf"))
    with pytest.raises(ValueError):
        DeviceState(w=0.5, cycles=-1)
