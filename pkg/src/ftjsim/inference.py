"""Analog matrix-vector multiply on crossbar pairs.

Weights map onto a differential pair of arrays (positive and negative
planes) through a uniform grid in normalized conductance. Inputs are
applied by charge integration: the engine accumulates one-hot reads at a
fixed read bias weighted by the input entries, so the read nonlinearity
never mixes into the result and the ideal product is recovered exactly up
to weight quantization. A scalar decoder gain, calibrated once per
programmed pair with an all-ones vector, converts integrated charge back
to weight units.

Programming either writes the target state directly ("ideal") or runs a
write-verify loop ("write_verify") that trims each device with alternating
potentiation and depression pulses until its measured conductance lands
within tolerance of the target. Because verification reads the actual
current, the loop absorbs device-to-device spread up to the rail limits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .conduction import (ConductionParams, T_REF, V_ONOFF, V_READ,
                         current_total, default_params, state_multiplier)
from .crossbar import Crossbar, build_crossbar, mvm_read
from .device import (DeviceState, PulseSpec, UpdateModel, T_WIDTH_DEFAULT,
                     V_DEP_DEFAULT, V_POT_DEFAULT, apply_pulse,
                     default_update_model)

__all__ = [
    "WeightMapping",
    "map_weights",
    "normalized_conductance",
    "weight_for_conductance",
    "state_conductance",
    "ProgramReport",
    "program_write_verify",
    "mvm_charge",
    "MvmErrorStats",
    "mvm_error_mc",
]

VERIFY_TOL_FRACTION = 0.25   # verify tolerance as a fraction of level spacing


def normalized_conductance(p: ConductionParams, w, d2d_log10=0.0):
    """Device conductance on a 0..1 scale: 0 at the pristine HRS, 1 at the
    full LRS. Bias-independent because the state multiplier is common to
    both channels."""
    return (p.g_lrs ** np.asarray(w) * 10.0 ** (-np.asarray(d2d_log10)) - 1.0) \
        / (p.g_lrs - 1.0)


def weight_for_conductance(p: ConductionParams, u):
    """Inverse of normalized_conductance at zero variation offset."""
    u = np.asarray(u)
    if np.any(u < 0) or np.any(u > 1):
        raise ValueError("normalized conductance must lie in [0, 1]")
    return np.log1p(u * (p.g_lrs - 1.0)) / math.log(p.g_lrs)


def state_conductance(p: ConductionParams, w, v_read: float = V_ONOFF,
                      t: float = T_REF, d2d_log10=0.0):
    """Chordal conductance I/V (siemens) of state w at the read bias.

    The state enters the model as a common multiplier on both channels,
    so this is the pristine-state chordal conductance scaled by that
    multiplier; w may be an array.
    """
    base = current_total(v_read, t, p, DeviceState(w=0.0)) / v_read
    return base * state_multiplier(p, w, d2d_log10)


@dataclass(frozen=True)
class WeightMapping:
    """Differential quantized mapping of a signed weight matrix.

    w_pos/w_neg are polarization targets for the two planes, u_pos/u_neg
    the same targets on the normalized-conductance grid, and g_pos/g_neg
    their chordal conductances (siemens) at v_read. decoded() gives the
    quantized weights the pair represents.
    """

    n_levels: int
    v_read: float
    g_min: float
    g_max: float
    w_pos: np.ndarray
    w_neg: np.ndarray
    u_pos: np.ndarray
    u_neg: np.ndarray
    g_pos: np.ndarray
    g_neg: np.ndarray

    def __post_init__(self):
        if self.n_levels < 2:
            raise ValueError("n_levels must be >= 2")
        if not self.g_min < self.g_max:
            raise ValueError("g_min must be below g_max")
        for g in (self.g_pos, self.g_neg):
            if np.any(g < self.g_min - 1e-18) or np.any(g > self.g_max + 1e-18):
                raise ValueError("conductance targets outside [g_min, g_max]")

    @property
    def level_spacing(self) -> float:
        """Grid pitch in normalized conductance (= weight units)."""
        return 1.0 / (self.n_levels - 1)

    def decoded(self) -> np.ndarray:
        return self.u_pos - self.u_neg


def map_weights(wmat, n_levels: int, p: ConductionParams,
                v_read: float = V_ONOFF, t: float = T_REF) -> WeightMapping:
    """Quantize a signed weight matrix onto the differential grid.

    Weights must lie in [-1, 1]. Positive entries land on the positive
    plane, negative entries on the negative plane; the other plane stays
    at the HRS. Levels are uniform in normalized conductance, so the
    decoded weight error is at most half a level spacing per entry and
    w = 0 maps to an equal pair.
    """
    w = np.asarray(wmat, dtype=float)
    if w.ndim != 2:
        raise ValueError("weight matrix must be 2-D")
    if not np.all(np.isfinite(w)):
        raise ValueError("weight matrix contains non-finite values")
    if np.any(np.abs(w) > 1.0):
        raise ValueError("weights must lie in [-1, 1]")
    if n_levels < 2:
        raise ValueError("n_levels must be >= 2")
    steps = n_levels - 1
    u_pos = np.round(np.clip(w, 0.0, 1.0) * steps) / steps
    u_neg = np.round(np.clip(-w, 0.0, 1.0) * steps) / steps
    g_min = float(state_conductance(p, 0.0, v_read, t))
    g_max = float(state_conductance(p, 1.0, v_read, t))
    return WeightMapping(
        n_levels=n_levels, v_read=v_read, g_min=g_min, g_max=g_max,
        w_pos=weight_for_conductance(p, u_pos),
        w_neg=weight_for_conductance(p, u_neg),
        u_pos=u_pos, u_neg=u_neg,
        g_pos=g_min + u_pos * (g_max - g_min),
        g_neg=g_min + u_neg * (g_max - g_min))


@dataclass(frozen=True)
class ProgramReport:
    """Write-verify outcome over one array: per-cell pulse counts and
    final conductance residuals (siemens) at the verify bias."""

    pulse_counts: np.ndarray
    residual_g: np.ndarray
    pulses_total: int
    max_residual_g: float
    n_failed: int


def _measured_g(s: DeviceState, p: ConductionParams, v_read: float,
                t: float) -> float:
    return current_total(v_read, t, p, s) / v_read


def _trim_device(s: DeviceState, g_target: float, p: ConductionParams,
                 m: UpdateModel, v_read: float, t: float, tol_g: float,
                 rng, max_pulses: int) -> tuple[DeviceState, int, float]:
    """Alternate potentiation and depression pulses until the measured
    chordal conductance is within tol_g of the target.

    The two polarities ride different-curvature update curves, so their
    alternation forms a fine lattice of reachable states; the loop stalls
    only when the target is beyond a variation-shifted rail.
    """
    pot = PulseSpec(V_POT_DEFAULT, T_WIDTH_DEFAULT)
    dep = PulseSpec(V_DEP_DEFAULT, T_WIDTH_DEFAULT)
    n = 0
    g = _measured_g(s, p, v_read, t)
    while abs(g - g_target) > tol_g and n < max_pulses:
        pulse = pot if g < g_target else dep
        s_new = apply_pulse(s, pulse, m, rng=rng, kind="amplitude_ramp")
        if s_new.w == s.w:
            break  # pinned at a rail; the target is unreachable
        s = s_new
        g = _measured_g(s, p, v_read, t)
        n += 1
    return s, n, abs(g - g_target)


def program_write_verify(xbar: Crossbar, g_targets, m: UpdateModel,
                         tol_g: float, rng: np.random.Generator,
                         v_read: float = V_READ, t: float | None = None,
                         max_pulses: int | None = None
                         ) -> tuple[Crossbar, ProgramReport]:
    """Program every cell to a target conductance with verification reads.

    g_targets are chordal conductances (siemens) at the verify bias
    v_read. Verification measures the actual device current, so each
    cell's variation offset is compensated where its state range allows; a
    target beyond a cell's own rails shows up in the per-cell residuals
    rather than raising. max_pulses defaults to three times the model's
    full-switching pulse count.
    """
    g_targets = np.asarray(g_targets, dtype=float)
    if g_targets.shape != (xbar.n_rows, xbar.n_cols):
        raise ValueError("target shape does not match the array")
    if not tol_g > 0:
        raise ValueError("tol_g must be positive")
    if t is None:
        t = xbar.t_kelvin
    if max_pulses is None:
        max_pulses = 3 * m.n_full
    p = xbar.params
    counts = np.zeros((xbar.n_rows, xbar.n_cols), dtype=int)
    resid = np.zeros((xbar.n_rows, xbar.n_cols))
    rows = []
    for r in range(xbar.n_rows):
        cells = []
        for c in range(xbar.n_cols):
            s, n, err = _trim_device(xbar.states[r][c], float(g_targets[r, c]),
                                     p, m, v_read, t, tol_g, rng, max_pulses)
            counts[r, c] = n
            resid[r, c] = err
            cells.append(s)
        rows.append(tuple(cells))
    out = replace(xbar, states=tuple(rows))
    report = ProgramReport(pulse_counts=counts, residual_g=resid,
                           pulses_total=int(counts.sum()),
                           max_residual_g=float(resid.max()),
                           n_failed=int(np.sum(resid > tol_g)))
    return out, report


def mvm_charge(xbar: Crossbar, x, v_read: float = V_ONOFF,
               t: float | None = None) -> np.ndarray:
    """Charge-integration matrix-vector product.

    Accumulates x[r]-weighted one-hot reads at the fixed read bias, so
    each device contributes x[r] * I(v_read) and the sum is exactly linear
    in x regardless of the device nonlinearity.
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (xbar.n_rows,):
        raise ValueError(f"x must have shape ({xbar.n_rows},), got {x.shape}")
    if t is None:
        t = xbar.t_kelvin
    q = np.zeros(xbar.n_cols)
    for r in range(xbar.n_rows):
        one_hot = np.zeros(xbar.n_rows)
        one_hot[r] = v_read
        q += x[r] * mvm_read(xbar, one_hot, t)
    return q


def _decoder_gain(q_ones: np.ndarray, y_ones: np.ndarray) -> float:
    denom = float(np.dot(q_ones, q_ones))
    if denom == 0.0:
        return 0.0
    return float(np.dot(y_ones, q_ones)) / denom


@dataclass(frozen=True)
class MvmErrorStats:
    """Relative-error distribution of the analog product."""

    median: float
    ci_low: float
    ci_high: float
    rel_errors: np.ndarray


def mvm_error_mc(wmat, x_inputs=None, n_levels: int = 11,
                 sigma_d2d: float = 0.0, c2c_rel: float | None = None,
                 n_trials: int = 20, seed=0,
                 programming: str = "write_verify",
                 decoder: str = "calibrated",
                 p: ConductionParams | None = None,
                 m: UpdateModel | None = None, v_read: float = V_ONOFF,
                 v_verify: float = V_READ, t: float = T_REF) -> MvmErrorStats:
    """Monte Carlo relative error of the full analog pipeline.

    Each trial builds a fresh differential pair with independent variation
    draws, programs the mapped weights ("write_verify" trims against
    measured conductance; "ideal" writes the exact state), then scores one
    input vector by the relative RMS error of the decoded product against
    the float product. x_inputs fixes the input vector; None draws a fresh
    uniform [0, 1] vector per trial. c2c_rel overrides the update model's
    pulse noise during programming.

    The decoder gain is least-squares calibrated per pair from an
    all-ones read ("calibrated"); "exact" uses the analytic gain
    1 / (v_read * (g_max - g_min)), which isolates quantization and
    variation effects from calibration error.
    """
    if programming not in ("write_verify", "ideal"):
        raise ValueError(f"unknown programming mode {programming!r}")
    if decoder not in ("calibrated", "exact"):
        raise ValueError(f"unknown decoder mode {decoder!r}")
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    p = p if p is not None else default_params()
    m = m if m is not None else default_update_model()
    if c2c_rel is not None:
        m = replace(m, c2c_rel=float(c2c_rel))
    w = np.asarray(wmat, dtype=float)
    mapping = map_weights(w, n_levels, p, v_read=v_read, t=t)
    n_rows, n_cols = w.shape
    if x_inputs is not None:
        x_inputs = np.asarray(x_inputs, dtype=float)
        if x_inputs.shape != (n_rows,):
            raise ValueError(f"x_inputs must have shape ({n_rows},)")
        if not np.all(np.isfinite(x_inputs)):
            raise ValueError("x_inputs contains non-finite values")

    # Write-verify targets live at the verify bias, not the read bias.
    gv_min = float(state_conductance(p, 0.0, v_verify, t))
    gv_max = float(state_conductance(p, 1.0, v_verify, t))
    gv_pos = gv_min + mapping.u_pos * (gv_max - gv_min)
    gv_neg = gv_min + mapping.u_neg * (gv_max - gv_min)
    tol_g = VERIFY_TOL_FRACTION * mapping.level_spacing * (gv_max - gv_min)

    errors = np.zeros(n_trials)
    root = np.random.SeedSequence(seed)
    for trial, child in enumerate(root.spawn(n_trials)):
        s_pos, s_neg, s_prog, s_x = child.spawn(4)
        pos = build_crossbar(n_rows, n_cols, p, sigma_d2d, s_pos, t_kelvin=t)
        neg = build_crossbar(n_rows, n_cols, p, sigma_d2d, s_neg, t_kelvin=t)
        if programming == "ideal":
            pos = pos.with_weights(mapping.w_pos)
            neg = neg.with_weights(mapping.w_neg)
        else:
            rng = np.random.default_rng(s_prog)
            pos, _ = program_write_verify(pos, gv_pos, m, tol_g, rng,
                                          v_read=v_verify, t=t)
            neg, _ = program_write_verify(neg, gv_neg, m, tol_g, rng,
                                          v_read=v_verify, t=t)
        if decoder == "exact":
            alpha = 1.0 / (v_read * (mapping.g_max - mapping.g_min))
        else:
            ones = np.ones(n_rows)
            q_ones = (mvm_charge(pos, ones, v_read, t)
                      - mvm_charge(neg, ones, v_read, t))
            alpha = _decoder_gain(q_ones, ones @ w)

        x = (x_inputs if x_inputs is not None
             else np.random.default_rng(s_x).uniform(0.0, 1.0, n_rows))
        y_true = x @ w
        q = mvm_charge(pos, x, v_read, t) - mvm_charge(neg, x, v_read, t)
        y_hat = alpha * q
        denom = float(np.linalg.norm(y_true))
        if denom == 0.0:
            raise ValueError("test vector produced a zero product; "
                             "relative error is undefined")
        errors[trial] = float(np.linalg.norm(y_hat - y_true)) / denom
    lo, hi = np.percentile(errors, [2.5, 97.5])
    return MvmErrorStats(median=float(np.median(errors)), ci_low=float(lo),
                         ci_high=float(hi), rel_errors=errors)
