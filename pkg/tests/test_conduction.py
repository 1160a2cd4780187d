"""Static conduction model: channel formulas, symmetry, calibration."""

import math

import numpy as np
import pytest

from ftjsim.conduction import (
    CalibrationError,
    CalibrationTargets,
    ConductionParams,
    T_REF,
    TunnelBarrier,
    V_CROSSOVER,
    V_READ,
    calibrate,
    current_ohmic,
    current_pf,
    current_total,
    current_tunneling,
    default_params,
    differential_conductance,
    on_off,
    self_selection_ratio,
    state_multiplier,
)
from ftjsim.device import DeviceState

LRS = DeviceState(w=1.0)
HRS = DeviceState(w=0.0)

# Calibrated parameters for the default targets (100 MOhm, 10, 42),
# frozen as a regression anchor. The defining equations themselves are
# asserted separately below.
EPS_R_DEFAULT = 7.3721130372013555
C_PF_DEFAULT = 2.2005317125589748e-11
C_OHM_DEFAULT = 1.678404660633971e-12


def test_odd_symmetry():
    p = default_params()
    v = np.array([0.01, 0.1, 0.3, 0.5, 1.6])
    for s in (LRS, HRS):
        np.testing.assert_allclose(current_total(-v, T_REF, p, s),
                                   -current_total(v, T_REF, p, s), rtol=1e-15)
    v_tun = np.array([0.01, 0.1, 0.3, 0.5])  # sub-barrier regime only
    np.testing.assert_allclose(current_tunneling(-v_tun, p),
                               -current_tunneling(v_tun, p), rtol=1e-15)
    with pytest.raises(ValueError):
        current_tunneling(1.6, p)


def test_zero_bias_zero_current():
    p = default_params()
    assert current_total(0.0, T_REF, p, LRS) == 0.0
    assert current_tunneling(0.0, p) == 0.0


def test_on_off_equals_g_lrs_everywhere():
    """The state multiplier is common to both channels, so the ON/OFF
    ratio must equal g_lrs independent of bias and temperature."""
    p = default_params()
    for t in (280.0, 300.0, 350.0, 400.0):
        for v in (0.05, 0.1, 0.3):
            ratio = (current_total(v, t, p, LRS)
                     / current_total(v, t, p, HRS))
            assert ratio == pytest.approx(p.g_lrs, rel=1e-12)
    assert on_off(p) == pytest.approx(10.0, rel=1e-12)


def test_state_multiplier():
    p = default_params()
    assert state_multiplier(p, 0.0) == 1.0
    assert state_multiplier(p, 1.0) == pytest.approx(p.g_lrs, rel=1e-15)
    # positive d2d offset raises resistance, i.e. lowers the multiplier
    assert state_multiplier(p, 1.0, d2d_log10=0.2) < state_multiplier(p, 1.0)
    assert state_multiplier(p, 0.5, 0.1) == pytest.approx(
        p.g_lrs ** 0.5 * 10.0 ** -0.1, rel=1e-15)


def test_current_monotone_in_bias():
    p = default_params()
    v = np.linspace(0.01, 2.0, 400)
    i = current_total(v, T_REF, p, LRS)
    assert np.all(np.diff(i) > 0)


def test_differential_conductance_matches_finite_difference():
    p = default_params()
    h = 1e-7
    for v in (0.05, 0.3, 0.8):
        num = (current_total(v + h, T_REF, p, LRS)
               - current_total(v - h, T_REF, p, LRS)) / (2 * h)
        assert differential_conductance(v, T_REF, p, LRS) == pytest.approx(
            num, rel=1e-6)


def test_array_and_scalar_inputs():
    p = default_params()
    v = np.array([0.1, 0.2, 0.3])
    out = current_total(v, T_REF, p, LRS)
    assert isinstance(out, np.ndarray) and out.shape == v.shape
    assert isinstance(current_total(0.3, T_REF, p, LRS), float)
    assert out[2] == current_total(0.3, T_REF, p, LRS)


def test_input_validation():
    p = default_params()
    with pytest.raises(ValueError):
        current_total(float("nan"), T_REF, p, LRS)
    with pytest.raises(ValueError):
        current_total(0.3, -5.0, p, LRS)
    with pytest.raises(ValueError):
        current_total(0.3, 0.0, p, LRS)


def test_params_validation():
    with pytest.raises(ValueError):
        ConductionParams(d_fe=0.0)
    with pytest.raises(ValueError):
        ConductionParams(phi_pf=5.0)
    with pytest.raises(ValueError):
        ConductionParams(eps_r=0.5)
    with pytest.raises(ValueError):
        ConductionParams(g_lrs=0.9)
    with pytest.raises(ValueError):
        TunnelBarrier(m_eff=0.0)


# --- calibration -------------------------------------------------------------

def test_default_calibration_hits_all_targets():
    p = default_params()
    r_on = V_READ / current_total(V_READ, T_REF, p, LRS)
    assert r_on == pytest.approx(1e8, rel=1e-9)
    assert on_off(p) == pytest.approx(10.0, rel=1e-9)
    assert self_selection_ratio(0.5, T_REF, p, LRS) == pytest.approx(
        42.0, rel=1e-9)
    # channels balanced at the crossover bias (the third constraint)
    assert current_pf(V_CROSSOVER, T_REF, p) == pytest.approx(
        current_ohmic(V_CROSSOVER, T_REF, p), rel=1e-9)


def test_default_calibration_frozen_values():
    p = default_params()
    assert p.eps_r == pytest.approx(EPS_R_DEFAULT, rel=1e-10)
    assert p.c_pf == pytest.approx(C_PF_DEFAULT, rel=1e-10)
    assert p.c_ohm == pytest.approx(C_OHM_DEFAULT, rel=1e-10)
    assert p.g_lrs == 10.0


def test_calibrate_selection_forty():
    p = calibrate(CalibrationTargets(r_on_ohms=1e8, on_off=10.0, selection=40.0))
    assert self_selection_ratio(0.5, T_REF, p, LRS) == pytest.approx(40.0, rel=0.01)
    assert V_READ / current_total(V_READ, T_REF, p, LRS) == pytest.approx(1e8, rel=0.01)
    assert on_off(p) == pytest.approx(10.0, rel=0.01)


def test_calibrate_pure_ohmic_limit():
    """selection == 2 is the linear-channel limit: calibration must drop
    the trap-emission channel entirely."""
    p = calibrate(CalibrationTargets(r_on_ohms=1e8, on_off=1.0, selection=2.0))
    assert p.c_pf == 0.0
    assert p.g_lrs == 1.0
    assert self_selection_ratio(0.5, T_REF, p, LRS) == pytest.approx(2.0, rel=1e-12)
    assert V_READ / current_total(V_READ, T_REF, p, LRS) == pytest.approx(1e8, rel=1e-9)


def test_calibrate_infeasible_selection():
    with pytest.raises(CalibrationError) as err:
        calibrate(CalibrationTargets(selection=1e6))
    assert len(err.value.residuals) == 3


def test_calibrate_rejects_sub_ohmic_selection():
    with pytest.raises(CalibrationError):
        calibrate(CalibrationTargets(selection=1.5))


def test_calibrate_rejects_bad_targets():
    with pytest.raises(CalibrationError):
        calibrate(CalibrationTargets(r_on_ohms=-1.0))
    with pytest.raises(CalibrationError):
        calibrate(CalibrationTargets(on_off=0.5))


def test_selection_ratio_grows_with_bias():
    p = default_params()
    vals = [self_selection_ratio(v, T_REF, p, LRS) for v in (0.2, 0.4, 0.5, 0.8)]
    assert all(b > a for a, b in zip(vals, vals[1:]))
    with pytest.raises(ValueError):
        self_selection_ratio(0.0, T_REF, p, LRS)


def test_heating_raises_current_at_low_bias():
    """Both channels are thermally activated, so the read current at
    0.1 V must rise with temperature (lower resistance when hot)."""
    p = default_params()
    i300 = current_total(0.1, 300.0, p, LRS)
    i350 = current_total(0.1, 350.0, p, LRS)
    assert i350 > i300


@pytest.mark.xfail(strict=True, reason=(
    "at the default calibration the field-lowering exponent overwhelms the "
    "trap barrier above ~0.28 V, so heating lowers the 0.3 V current; the "
    "selection target forces this (see the decisions ledger)"))
def test_heating_raises_current_at_read_bias_default():
    p = default_params()
    assert current_total(0.3, 350.0, p, LRS) > current_total(0.3, 300.0, p, LRS)


def test_heating_raises_current_at_read_bias_high_eps():
    # with weak field lowering (large eps_r) the barrier term dominates
    # at 0.3 V and the thermal direction holds there too
    p = ConductionParams(eps_r=50.0, c_pf=1e-11, c_ohm=1e-12)
    assert current_total(0.3, 350.0, p, LRS) > current_total(0.3, 300.0, p, LRS)


def test_tunneling_current_is_temperature_free():
    p = default_params()
    v = np.linspace(0.02, 0.4, 20)
    i = current_tunneling(v, p)
    assert np.all(i > 0)
    # no temperature argument exists; the formula must also be finite and
    # monotone over the fitting range
    assert np.all(np.diff(i) > 0)


def test_distinct_params_do_not_share_state():
    # the coefficient cache is keyed by the frozen parameter record; a
    # second parameter set must not inherit the first one's coefficients
    p1 = default_params()
    p2 = ConductionParams(eps_r=12.0, c_pf=1e-11, c_ohm=1e-12)
    assert current_total(0.3, T_REF, p1, LRS) != current_total(0.3, T_REF, p2, LRS)
