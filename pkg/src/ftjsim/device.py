"""Polarization state machine: pulse updates, DC hysteresis, retention.

The device state is a value type. The normalized polarization w runs from
0 (HRS, fully depressed) to 1 (LRS, fully potentiated) and indexes the
conduction model's state multiplier. Pulse-driven updates move w along a
saturating-exponential curve in equivalent-pulse-count space:

    w(n) = (1 - exp(-n/A)) / (1 - exp(-n_full/A)),   n in [0, n_full]

one count per above-onset pulse, with the curve shape A chosen per pulse
scheme and polarity. Cycle-to-cycle noise multiplies each step by a
mean-one lognormal factor. DC writes switch through a logistic transition
centered on the coercive voltages.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import conduction
from .conduction import ConductionParams, Readout, T_REF, V_READ, current_total

__all__ = [
    "DeviceState",
    "PulseSpec",
    "PulseScheme",
    "UpdateShape",
    "UpdateModel",
    "SchemeStep",
    "LoopPoint",
    "WindowReport",
    "sample_device",
    "apply_pulse",
    "run_scheme",
    "read_state",
    "dc_write_loop",
    "memory_window",
    "retention_evolve",
    "endurance_register",
    "write_energy",
    "default_update_model",
    "preset_scheme",
]

SCHEME_KINDS = ("amplitude_ramp", "width_ramp", "hybrid")

# Coercive voltages. The negative one doubles as the pulse potentiation
# onset; +0.8 V is the 1.6 MV/cm coercive field times the film thickness,
# rounded up from 0.784 V.
V_C_NEG = -0.6
V_C_POS = 0.8
DC_WIDTH = 0.1          # logistic transition width, V

N_FULL_DEFAULT = 50
C2C_REL_DEFAULT = 0.10

# Signed nonlinearity magnitudes n_full/A reported for the two ramp
# schemes; the sharp value belongs to potentiation under the amplitude
# ramp and to depression under the width ramp.
NL_SHARP = 4.3
NL_GENTLE = 1.9

ENDURANCE_LIMIT = 10_000_000_000

# Preset write pulses (benchmark row): 50 us, -1.6 V potentiation,
# +2.4 V depression. The alternate constant-field pair is steeper.
T_WIDTH_DEFAULT = 50e-6
V_POT_DEFAULT = -1.6
V_DEP_DEFAULT = 2.4
V_POT_ALT = -1.4
V_DEP_ALT = 3.2


@dataclass(frozen=True)
class DeviceState:
    """Value-type device state.

    w: normalized polarization in [0, 1].
    d2d_log10: device-to-device offset applied to log10 resistance.
    cycles: polarity reversals seen so far.
    broken: endurance flag; a broken device no longer switches.
    last_polarity: -1 after a potentiation pulse, +1 after a depression
    pulse, 0 for a pristine device. Used to count reversals.
    """

    w: float
    d2d_log10: float = 0.0
    cycles: int = 0
    broken: bool = False
    last_polarity: int = 0

    def __post_init__(self):
        if not (np.isfinite(self.w) and 0.0 <= self.w <= 1.0):
            raise ValueError(f"w must be in [0, 1], got {self.w}")
        if not np.isfinite(self.d2d_log10):
            raise ValueError("d2d_log10 must be finite")
        if self.cycles < 0:
            raise ValueError("cycles must be non-negative")


@dataclass(frozen=True)
class PulseSpec:
    """One write pulse: amplitude (signed, V) and width (s).

    A zero-width pulse is a degenerate no-op that deposits no energy and
    moves no state; it is allowed so energy formulas stay total.
    """

    v_write: float
    t_width: float

    def __post_init__(self):
        if not (np.isfinite(self.t_width) and self.t_width >= 0):
            raise ValueError(f"t_width must be >= 0, got {self.t_width}")
        if not np.isfinite(self.v_write):
            raise ValueError("v_write must be finite")


@dataclass(frozen=True)
class UpdateShape:
    """Curve shapes (equivalent-pulse-count scale A) for one scheme."""

    a_pot: float
    a_dep: float

    def __post_init__(self):
        if not (self.a_pot > 0 and self.a_dep > 0):
            raise ValueError("curve shapes must be positive")


@dataclass(frozen=True)
class UpdateModel:
    """Pulse-update dynamics: onsets, count scale, noise, per-scheme shapes."""

    amplitude_ramp: UpdateShape
    width_ramp: UpdateShape
    hybrid: UpdateShape
    n_full: int = N_FULL_DEFAULT
    v_on_pot: float = V_C_NEG
    v_on_dep: float = V_C_POS
    c2c_rel: float = C2C_REL_DEFAULT

    def __post_init__(self):
        if self.n_full < 2:
            raise ValueError(f"n_full must be >= 2, got {self.n_full}")
        if not self.v_on_pot < 0.0 < self.v_on_dep:
            raise ValueError("onsets must satisfy v_on_pot < 0 < v_on_dep")
        if not 0.0 <= self.c2c_rel < 1.0:
            raise ValueError(f"c2c_rel must be in [0, 1), got {self.c2c_rel}")

    def shape_for(self, kind: str) -> UpdateShape:
        if kind not in SCHEME_KINDS:
            raise ValueError(f"unknown scheme kind {kind!r}")
        return getattr(self, kind)


def default_update_model(n_full: int = N_FULL_DEFAULT,
                         c2c_rel: float = C2C_REL_DEFAULT) -> UpdateModel:
    """Default dynamics: sharp potentiation under the amplitude ramp,
    sharp depression under the width ramp, symmetric hybrid."""
    a_sharp = n_full / NL_SHARP
    a_gentle = n_full / NL_GENTLE
    a_mid = math.sqrt(a_sharp * a_gentle)
    return UpdateModel(
        amplitude_ramp=UpdateShape(a_pot=a_sharp, a_dep=a_gentle),
        width_ramp=UpdateShape(a_pot=a_gentle, a_dep=a_sharp),
        hybrid=UpdateShape(a_pot=a_mid, a_dep=a_mid),
        n_full=n_full,
        c2c_rel=c2c_rel,
    )


@dataclass(frozen=True)
class PulseScheme:
    """A programmed pulse train.

    amplitude_ramp: amplitude steps by v_step at constant width.
    width_ramp: constant amplitude, width grows geometrically.
    hybrid: amplitude ramps linearly to v_max while width grows.
    Ramps must be monotone in pulse strength.
    """

    kind: str
    n_pulses: int
    v_start: float
    v_step: float | None = None
    v_max: float | None = None
    width: float | None = None
    width_start: float | None = None
    width_ratio: float | None = None

    def __post_init__(self):
        if self.kind not in SCHEME_KINDS:
            raise ValueError(f"unknown scheme kind {self.kind!r}")
        if self.n_pulses < 1:
            raise ValueError("n_pulses must be >= 1")
        if self.v_start == 0.0:
            raise ValueError("v_start must be nonzero")
        if self.kind == "amplitude_ramp":
            if self.v_step is None or self.width is None:
                raise ValueError("amplitude_ramp needs v_step and width")
            if self.v_step * math.copysign(1.0, self.v_start) < 0.0:
                raise ValueError("amplitude ramp must grow in magnitude")
            if not self.width > 0:
                raise ValueError("width must be positive")
        else:
            if self.width_start is None or self.width_ratio is None:
                raise ValueError(f"{self.kind} needs width_start and width_ratio")
            if not self.width_start > 0:
                raise ValueError("width_start must be positive")
            if not self.width_ratio >= 1.0:
                raise ValueError("width_ratio must be >= 1")
            if self.kind == "hybrid":
                if self.v_max is None:
                    raise ValueError("hybrid needs v_max")
                if self.v_max * self.v_start < 0 or abs(self.v_max) < abs(self.v_start):
                    raise ValueError("hybrid amplitude ramp must grow in magnitude")

    def pulses(self) -> list[PulseSpec]:
        out = []
        for k in range(self.n_pulses):
            if self.kind == "amplitude_ramp":
                out.append(PulseSpec(self.v_start + k * self.v_step, self.width))
            elif self.kind == "width_ramp":
                out.append(PulseSpec(self.v_start,
                                     self.width_start * self.width_ratio ** k))
            else:
                if self.n_pulses == 1:
                    v = self.v_start
                else:
                    v = self.v_start + k * (self.v_max - self.v_start) / (self.n_pulses - 1)
                out.append(PulseSpec(v, self.width_start * self.width_ratio ** k))
        return out


def preset_scheme(kind: str, polarity: str, alt_amplitudes: bool = False) -> PulseScheme:
    """Stock pulse trains for the three schemes.

    polarity: "pot" or "dep". The amplitude ramps run 25 mV steps from the
    onset to the preset write amplitude; width ramps hold the write
    amplitude constant (alt_amplitudes selects the steeper constant-field
    pair).
    """
    if polarity not in ("pot", "dep"):
        raise ValueError(f"polarity must be 'pot' or 'dep', got {polarity!r}")
    pot = polarity == "pot"
    if kind == "amplitude_ramp":
        start, stop = (-0.8, -2.4) if pot else (0.8, 2.4)
        step = math.copysign(0.025, stop - start)
        n = int(round((stop - start) / step)) + 1
        return PulseScheme(kind, n, start, v_step=step, width=T_WIDTH_DEFAULT)
    if kind == "width_ramp":
        if alt_amplitudes:
            v = V_POT_ALT if pot else V_DEP_ALT
        else:
            v = V_POT_DEFAULT if pot else V_DEP_DEFAULT
        return PulseScheme(kind, N_FULL_DEFAULT, v,
                           width_start=10e-6, width_ratio=1.15)
    if kind == "hybrid":
        start, stop = (-0.8, V_POT_DEFAULT) if pot else (0.8, V_DEP_DEFAULT)
        return PulseScheme(kind, N_FULL_DEFAULT, start, v_max=stop,
                           width_start=10e-6, width_ratio=1.08)
    raise ValueError(f"unknown scheme kind {kind!r}")


def sample_device(p: ConductionParams, sigma_d2d: float, seed) -> DeviceState:
    """Draw one pristine device: w = 0, d2d_log10 ~ N(0, sigma_d2d).

    Deterministic per seed (accepts an int or a SeedSequence).
    """
    if sigma_d2d < 0:
        raise ValueError(f"sigma_d2d must be >= 0, got {sigma_d2d}")
    rng = np.random.default_rng(seed)
    return DeviceState(w=0.0, d2d_log10=float(rng.normal(0.0, sigma_d2d)))


def _curve_forward(n: float, a: float, n_full: int) -> float:
    return (1.0 - math.exp(-n / a)) / (1.0 - math.exp(-n_full / a))

def _curve_invert(x: float, a: float, n_full: int) -> float:
    d = 1.0 - math.exp(-n_full / a)
    return -a * math.log(1.0 - x * d)


def apply_pulse(s: DeviceState, pulse: PulseSpec, m: UpdateModel,
                rng: np.random.Generator | None = None,
                kind: str = "amplitude_ramp") -> DeviceState:
    """Apply one write pulse and return the new state.

    Above-onset pulses advance the state by one equivalent count along the
    potentiation or depression curve for the given scheme kind; the step is
    multiplied by mean-one lognormal noise with relative spread c2c_rel.
    Sub-threshold pulses and broken devices return the state unchanged.
    """
    if s.broken or pulse.t_width == 0.0:
        return s
    v = pulse.v_write
    shape = m.shape_for(kind)
    if v < m.v_on_pot:
        polarity = -1
    elif v > m.v_on_dep:
        polarity = +1
    else:
        return s

    if polarity < 0:
        a = shape.a_pot
        progress = s.w
    else:
        a = shape.a_dep
        progress = 1.0 - s.w
    n = _curve_invert(progress, a, m.n_full)
    step = _curve_forward(n + 1.0, a, m.n_full) - progress

    if m.c2c_rel > 0.0:
        if rng is None:
            raise ValueError("c2c_rel > 0 requires an explicit generator")
        s2 = math.log(1.0 + m.c2c_rel ** 2)
        step *= rng.lognormal(mean=-0.5 * s2, sigma=math.sqrt(s2))

    if polarity < 0:
        w_new = min(s.w + step, 1.0)
    else:
        w_new = max(s.w - step, 0.0)

    cycles = s.cycles + (1 if (s.last_polarity != 0 and polarity != s.last_polarity) else 0)
    return replace(s, w=w_new, cycles=cycles, last_polarity=polarity)


def read_state(s: DeviceState, p: ConductionParams,
               v_read: float = V_READ, t: float = T_REF) -> Readout:
    """Measure the device at a bias point."""
    i = current_total(v_read, t, p, s)
    r = abs(v_read / i) if i != 0.0 else math.inf
    return Readout(v_read=v_read, t_kelvin=t, i_amps=i, r_ohms=r,
                   j_a_per_m2=i / p.area)


@dataclass(frozen=True)
class SchemeStep:
    """One row of a pulse-train trace."""

    index: int
    pulse: PulseSpec
    w: float
    readout: Readout


def run_scheme(s: DeviceState, scheme: PulseScheme, m: UpdateModel,
               p: ConductionParams, v_read: float = V_READ, t: float = T_REF,
               rng: np.random.Generator | None = None) -> list[SchemeStep]:
    """Apply a pulse train, reading out after every pulse."""
    trace = []
    state = s
    for idx, pulse in enumerate(scheme.pulses()):
        state = apply_pulse(state, pulse, m, rng=rng, kind=scheme.kind)
        trace.append(SchemeStep(index=idx, pulse=pulse, w=state.w,
                                readout=read_state(state, p, v_read, t)))
    return trace


# --- DC hysteresis ---------------------------------------------------------

_LOGISTIC_CUT = 3.0  # transition support: +-3 widths around the coercive voltage
_LOGISTIC_LO = 1.0 / (1.0 + math.exp(_LOGISTIC_CUT))
_LOGISTIC_HI = 1.0 / (1.0 + math.exp(-_LOGISTIC_CUT))


_CUT_EPS = 1e-9  # pad: +-0.3 V grids land exactly on the support edge,
                 # where (v_c - v)/width suffers float cancellation


def _switch_level(x: float) -> float:
    """Logistic switching function rescaled to reach exactly 0 and 1 at
    +-3 widths, so sweeps that stay outside the transition are no-ops."""
    if x <= -_LOGISTIC_CUT + _CUT_EPS:
        return 0.0
    if x >= _LOGISTIC_CUT - _CUT_EPS:
        return 1.0
    raw = 1.0 / (1.0 + math.exp(-x))
    return (raw - _LOGISTIC_LO) / (_LOGISTIC_HI - _LOGISTIC_LO)


@dataclass(frozen=True)
class LoopPoint:
    v_write: float
    w: float
    readout: Readout


def dc_write_loop(s: DeviceState, v_grid, p: ConductionParams,
                  v_read: float = V_READ, t: float = T_REF) -> list[LoopPoint]:
    """Quasi-static DC sweep: write at each grid voltage, then read.

    Negative voltages past the coercive point raise w toward the logistic
    switching level; positive ones past the other coercive point cap it.
    """
    state = s
    points = []
    for v in np.asarray(v_grid, dtype=float):
        if not np.isfinite(v):
            raise ValueError("v_grid contains non-finite values")
        pot_level = _switch_level((V_C_NEG - v) / DC_WIDTH)
        dep_level = _switch_level((v - V_C_POS) / DC_WIDTH)
        w = max(state.w, pot_level)
        w = min(w, 1.0 - dep_level)
        state = replace(state, w=w)
        points.append(LoopPoint(v_write=float(v), w=w,
                                readout=read_state(state, p, v_read, t)))
    return points


@dataclass(frozen=True)
class WindowReport:
    v_c_minus: float
    v_c_plus: float
    window_volts: float


def memory_window(points: list[LoopPoint]) -> WindowReport:
    """Coercive voltages from a hysteresis loop trace.

    Finds where log10(R) crosses the midpoint between the loop's rails:
    the rising-R crossing is the positive coercive voltage, the falling-R
    crossing the negative one. The last crossing of each kind wins, so a
    loop that starts pristine settles onto its steady branches first.
    """
    logr = np.array([math.log10(pt.readout.r_ohms) for pt in points])
    vs = np.array([pt.v_write for pt in points])
    mid = 0.5 * (logr.max() + logr.min())
    if logr.max() - logr.min() < 0.1:
        raise ValueError("trace does not open a resistance window")
    v_plus = None
    v_minus = None
    for k in range(len(points) - 1):
        lo, hi = logr[k], logr[k + 1]
        if lo == hi or (lo - mid) * (hi - mid) > 0:
            continue
        frac = (mid - lo) / (hi - lo)
        v_at = vs[k] + frac * (vs[k + 1] - vs[k])
        if hi > lo:
            v_plus = v_at
        else:
            v_minus = v_at
    if v_plus is None or v_minus is None:
        raise ValueError("trace does not cross both coercive transitions")
    return WindowReport(v_c_minus=float(v_minus), v_c_plus=float(v_plus),
                        window_volts=float(v_plus - v_minus))


# --- Retention, endurance, energy ------------------------------------------

def retention_evolve(s: DeviceState, dt_seconds: float,
                     drift_rate: float = 0.0) -> DeviceState:
    """Relax w toward 0.5 with the given rate (1/s). Rate zero is a
    bit-identical no-op at any horizon."""
    if dt_seconds < 0:
        raise ValueError("dt_seconds must be >= 0")
    if drift_rate < 0:
        raise ValueError("drift_rate must be >= 0")
    if drift_rate == 0.0 or dt_seconds == 0.0:
        return s
    w = 0.5 + (s.w - 0.5) * math.exp(-drift_rate * dt_seconds)
    return replace(s, w=w)


def endurance_register(s: DeviceState, n_cycles: int) -> DeviceState:
    """Account for n_cycles polarity reversals; past the endurance limit
    the device is flagged broken and its state freezes."""
    if n_cycles < 0:
        raise ValueError("n_cycles must be >= 0")
    cycles = s.cycles + n_cycles
    return replace(s, cycles=cycles, broken=s.broken or cycles > ENDURANCE_LIMIT)


def write_energy(pulse: PulseSpec, s: DeviceState, p: ConductionParams,
                 t: float = T_REF) -> float:
    """Rectangular-pulse write energy |I(v)|*|v|*t_width, J."""
    i = current_total(pulse.v_write, t, p, s)
    return abs(i) * abs(pulse.v_write) * pulse.t_width
