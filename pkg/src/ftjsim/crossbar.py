"""Passive crossbar arrays: network solve, read/write schemes, sneak paths.

An array is a grid of independent device states sharing one conduction
parameter set. Rows and columns are ideal wires (no line resistance);
every line is either driven to a potential or left floating. Floating
lines settle where Kirchhoff's current law balances the nonlinear device
currents, which a damped Newton iteration solves to machine precision.

The device nonlinearity is what makes select-free operation possible:
sneak-path devices sit at a fraction of the read voltage where the
trap-emission channel is exponentially weaker, so current margins are far
larger than the Ohmic voltage-divider picture suggests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .conduction import ConductionParams, T_REF, current_total, differential_conductance
from .device import DeviceState, PulseSpec, UpdateModel, apply_pulse, sample_device

__all__ = [
    "Crossbar",
    "BiasScheme",
    "NetworkSolution",
    "WriteReport",
    "SneakReport",
    "build_crossbar",
    "solve_network",
    "mvm_read",
    "write_v_half",
    "sneak_margin",
]

NEWTON_TOL = 1e-12      # KCL residual, A
NEWTON_MAX_ITER = 200
MAX_SOLVE_DIM = 64      # dense Newton solve cap per side
MVM_V_LIMIT = 0.3       # read-regime bias range, V


@dataclass(frozen=True)
class Crossbar:
    """Array of device states over shared conduction parameters at one
    operating temperature."""

    states: tuple[tuple[DeviceState, ...], ...]
    params: ConductionParams
    t_kelvin: float = T_REF

    def __post_init__(self):
        if not self.states or not self.states[0]:
            raise ValueError("crossbar must have at least one row and column")
        width = len(self.states[0])
        if any(len(row) != width for row in self.states):
            raise ValueError("all crossbar rows must have equal length")
        if not (np.isfinite(self.t_kelvin) and self.t_kelvin > 0):
            raise ValueError("t_kelvin must be positive")

    @property
    def n_rows(self) -> int:
        return len(self.states)

    @property
    def n_cols(self) -> int:
        return len(self.states[0])

    def weights(self) -> np.ndarray:
        return np.array([[s.w for s in row] for row in self.states])

    def with_state(self, row: int, col: int, state: DeviceState) -> "Crossbar":
        rows = list(self.states)
        cells = list(rows[row])
        cells[col] = state
        rows[row] = tuple(cells)
        return replace(self, states=tuple(rows))

    def with_weights(self, w) -> "Crossbar":
        """New array with the given w matrix, keeping each device's
        variation offset and history."""
        w = np.asarray(w, dtype=float)
        if w.shape != (self.n_rows, self.n_cols):
            raise ValueError(f"weight matrix must have shape "
                             f"{(self.n_rows, self.n_cols)}, got {w.shape}")
        rows = tuple(
            tuple(replace(s, w=float(w[r, c])) for c, s in enumerate(row))
            for r, row in enumerate(self.states))
        return replace(self, states=rows)


def build_crossbar(n_rows: int, n_cols: int, p: ConductionParams,
                   sigma_d2d: float = 0.0, seed=0,
                   t_kelvin: float = T_REF) -> Crossbar:
    """Array of pristine devices with independent variation draws.

    Each cell gets its own child seed (seed-sequence spawn), so the array
    is reproducible and individual cells are statistically independent.
    """
    if n_rows < 1 or n_cols < 1:
        raise ValueError("array dimensions must be positive")
    ss = (seed if isinstance(seed, np.random.SeedSequence)
          else np.random.SeedSequence(seed))
    children = ss.spawn(n_rows * n_cols)
    states = tuple(
        tuple(sample_device(p, sigma_d2d, children[r * n_cols + c])
              for c in range(n_cols))
        for r in range(n_rows))
    return Crossbar(states=states, params=p, t_kelvin=t_kelvin)


@dataclass(frozen=True)
class BiasScheme:
    """Line potentials; None marks a floating line."""

    rows: tuple
    cols: tuple

    @staticmethod
    def read_select(n_rows: int, n_cols: int, row: int, col: int,
                    v_read: float) -> "BiasScheme":
        """Selected row driven, selected column grounded, all else floating."""
        rows = tuple(v_read if r == row else None for r in range(n_rows))
        cols = tuple(0.0 if c == col else None for c in range(n_cols))
        return BiasScheme(rows=rows, cols=cols)

    @staticmethod
    def v_half_write(n_rows: int, n_cols: int, row: int, col: int,
                     v_write: float) -> "BiasScheme":
        """V/2 scheme: full bias on the selected cell, half bias on every
        half-selected cell, zero elsewhere."""
        rows = tuple(v_write if r == row else 0.5 * v_write for r in range(n_rows))
        cols = tuple(0.0 if c == col else 0.5 * v_write for c in range(n_cols))
        return BiasScheme(rows=rows, cols=cols)


@dataclass(frozen=True)
class NetworkSolution:
    """Converged network state: line potentials, per-device operating
    points, and net per-line currents (row_i flows from each row line into
    its devices, col_i from the devices into each column line; both vanish
    on floating lines)."""

    row_v: np.ndarray
    col_v: np.ndarray
    device_v: np.ndarray
    device_i: np.ndarray
    row_i: np.ndarray
    col_i: np.ndarray
    iterations: int
    residual: float


def solve_network(xbar: Crossbar, scheme: BiasScheme, t: float | None = None,
                  tol: float = NEWTON_TOL) -> NetworkSolution:
    """Solve floating-line potentials by damped Newton on the KCL system.

    The residual of a floating line is the net device current into it;
    its derivative with respect to any line potential is a sum of strictly
    positive differential conductances, so the Jacobian is well
    conditioned. Steps are halved until the residual norm decreases.
    """
    nr, nc = xbar.n_rows, xbar.n_cols
    if t is None:
        t = xbar.t_kelvin
    if nr > MAX_SOLVE_DIM or nc > MAX_SOLVE_DIM:
        raise ValueError(
            f"dense network solve is capped at {MAX_SOLVE_DIM} lines per side")
    if len(scheme.rows) != nr or len(scheme.cols) != nc:
        raise ValueError("bias scheme shape does not match the array")
    driven = [float(v) for v in list(scheme.rows) + list(scheme.cols) if v is not None]
    if not driven:
        raise ValueError("at least one line must be driven")
    free_rows = [r for r, v in enumerate(scheme.rows) if v is None]
    free_cols = [c for c, v in enumerate(scheme.cols) if v is None]
    n_free = len(free_rows) + len(free_cols)
    p = xbar.params

    row_v = np.array([0.0 if v is None else float(v) for v in scheme.rows])
    col_v = np.array([0.0 if v is None else float(v) for v in scheme.cols])
    x = np.full(n_free, float(np.mean(driven)))

    def assemble(xv):
        rv = row_v.copy()
        cv = col_v.copy()
        for k, r in enumerate(free_rows):
            rv[r] = xv[k]
        for k, c in enumerate(free_cols):
            cv[c] = xv[len(free_rows) + k]
        return rv, cv

    def residual(xv):
        rv, cv = assemble(xv)
        f = np.zeros(n_free)
        for k, r in enumerate(free_rows):
            f[k] = sum(current_total(rv[r] - cv[c], t, p, xbar.states[r][c])
                       for c in range(nc))
        for k, c in enumerate(free_cols):
            f[len(free_rows) + k] = sum(
                current_total(rv[r] - cv[c], t, p, xbar.states[r][c])
                for r in range(nr))
        return f, rv, cv

    if n_free == 0:
        rv, cv = assemble(x)
        dv, di = _device_grid(xbar, rv, cv, t)
        return NetworkSolution(rv, cv, dv, di, di.sum(axis=1), di.sum(axis=0),
                               iterations=0, residual=0.0)

    f, rv, cv = residual(x)
    it = 0
    while np.max(np.abs(f)) > tol:
        if it >= NEWTON_MAX_ITER:
            raise RuntimeError(
                f"network solve did not converge in {NEWTON_MAX_ITER} iterations "
                f"(residual {np.max(np.abs(f)):.3g} A)")
        jac = np.zeros((n_free, n_free))
        col_index = {c: len(free_rows) + k for k, c in enumerate(free_cols)}
        row_index = {r: k for k, r in enumerate(free_rows)}
        for k, r in enumerate(free_rows):
            for c in range(nc):
                gdev = differential_conductance(rv[r] - cv[c], t, p, xbar.states[r][c])
                jac[k, k] += gdev
                if c in col_index:
                    jac[k, col_index[c]] -= gdev
        for k, c in enumerate(free_cols):
            kk = len(free_rows) + k
            for r in range(nr):
                gdev = differential_conductance(rv[r] - cv[c], t, p, xbar.states[r][c])
                jac[kk, kk] -= gdev
                if r in row_index:
                    jac[kk, row_index[r]] += gdev
        try:
            step = np.linalg.solve(jac, -f)
        except np.linalg.LinAlgError as exc:
            raise RuntimeError(f"singular network Jacobian: {exc}") from exc
        norm0 = np.max(np.abs(f))
        lam = 1.0
        for _ in range(40):
            f_new, rv, cv = residual(x + lam * step)
            if np.max(np.abs(f_new)) < norm0:
                break
            lam *= 0.5
        x = x + lam * step
        f, rv, cv = residual(x)
        it += 1
    dv, di = _device_grid(xbar, rv, cv, t)
    return NetworkSolution(row_v=rv, col_v=cv, device_v=dv, device_i=di,
                           row_i=di.sum(axis=1), col_i=di.sum(axis=0),
                           iterations=it, residual=float(np.max(np.abs(f))))


def _device_grid(xbar: Crossbar, rv: np.ndarray, cv: np.ndarray, t: float):
    dv = rv[:, None] - cv[None, :]
    di = np.array([[current_total(dv[r, c], t, xbar.params, xbar.states[r][c])
                    for c in range(xbar.n_cols)] for r in range(xbar.n_rows)])
    return dv, di


def mvm_read(xbar: Crossbar, v_in, t: float | None = None,
             v_limit: float = MVM_V_LIMIT) -> np.ndarray:
    """Column currents with rows driven at v_in and columns at virtual
    ground. This is the analog matrix-vector product primitive.

    Inputs are restricted to the read regime (|v| <= v_limit) so the
    encoding never crosses a write onset.
    """
    v_in = np.asarray(v_in, dtype=float)
    if v_in.shape != (xbar.n_rows,):
        raise ValueError(f"v_in must have shape ({xbar.n_rows},), got {v_in.shape}")
    if np.any(np.abs(v_in) > v_limit):
        raise ValueError(f"read inputs must satisfy |v| <= {v_limit} V")
    if t is None:
        t = xbar.t_kelvin
    p = xbar.params
    out = np.zeros(xbar.n_cols)
    for c in range(xbar.n_cols):
        out[c] = sum(current_total(v_in[r], t, p, xbar.states[r][c])
                     for r in range(xbar.n_rows))
    return out


@dataclass(frozen=True)
class WriteReport:
    """Outcome of one selective write."""

    delta_w_selected: float
    disturbs: tuple
    max_disturb: float
    energy_joules: float


def write_v_half(xbar: Crossbar, row: int, col: int, pulse: PulseSpec,
                 m: UpdateModel, kind: str = "amplitude_ramp",
                 rng: np.random.Generator | None = None,
                 t: float | None = None) -> tuple[Crossbar, WriteReport]:
    """Write one cell under the V/2 bias scheme and account for disturbs.

    Half-selected cells see v_write/2; they only move when that still
    crosses an update onset. The energy is the rectangular-pulse sum over
    every biased cell at its pre-pulse state.
    """
    if not (0 <= row < xbar.n_rows and 0 <= col < xbar.n_cols):
        raise ValueError("selected cell is outside the array")
    if t is None:
        t = xbar.t_kelvin
    scheme = BiasScheme.v_half_write(xbar.n_rows, xbar.n_cols, row, col,
                                     pulse.v_write)
    rows = []
    disturbs = []
    energy = 0.0
    dw_sel = 0.0
    for r in range(xbar.n_rows):
        cells = []
        for c in range(xbar.n_cols):
            s = xbar.states[r][c]
            v_dev = scheme.rows[r] - scheme.cols[c]
            if v_dev != 0.0:
                energy += (abs(current_total(v_dev, t, xbar.params, s))
                           * abs(v_dev) * pulse.t_width)
                s_new = apply_pulse(s, PulseSpec(v_dev, pulse.t_width), m,
                                    rng=rng, kind=kind)
            else:
                s_new = s
            dw = s_new.w - s.w
            if r == row and c == col:
                dw_sel = dw
            elif dw != 0.0:
                disturbs.append((r, c, dw))
            cells.append(s_new)
        rows.append(tuple(cells))
    report = WriteReport(
        delta_w_selected=dw_sel,
        disturbs=tuple(disturbs),
        max_disturb=max((abs(d[2]) for d in disturbs), default=0.0),
        energy_joules=energy)
    return replace(xbar, states=tuple(rows)), report


@dataclass(frozen=True)
class SneakReport:
    """Selected-versus-sneak operating point comparison. margin is
    i_selected / i_sneak_worst; voltage_margin is the same ratio for the
    device voltages, kept as a diagnostic."""

    i_selected: float
    i_sneak_worst: float
    margin: float
    voltage_margin: float
    solution: NetworkSolution


def sneak_margin(xbar: Crossbar, row: int, col: int, v_read: float,
                 t: float | None = None) -> SneakReport:
    """Margins of a floating-line selected read.

    The selected cell is read with every unselected line floating;
    i_sneak_worst is the largest current through any unselected cell at
    the solved operating point. A single-row (or single-column) array has
    no closed sneak loop, so its unselected cells carry nothing and the
    margin is infinite.
    """
    if v_read == 0:
        raise ValueError("v_read must be nonzero")
    scheme = BiasScheme.read_select(xbar.n_rows, xbar.n_cols, row, col, v_read)
    sol = solve_network(xbar, scheme, t)
    v_sel = abs(sol.device_v[row, col])
    i_sel = abs(sol.device_i[row, col])
    mask = np.ones_like(sol.device_v, dtype=bool)
    mask[row, col] = False
    if xbar.n_rows == 1 or xbar.n_cols == 1:
        # no closed sneak loop exists; whatever the solver left on the
        # unselected cells is residual-level noise, not a sneak current
        mask[:] = False
    v_sneak = float(np.max(np.abs(sol.device_v[mask]))) if mask.any() else 0.0
    i_sneak = float(np.max(np.abs(sol.device_i[mask]))) if mask.any() else 0.0
    v_margin = v_sel / v_sneak if v_sneak > 0 else math.inf
    i_margin = i_sel / i_sneak if i_sneak > 0 else math.inf
    return SneakReport(i_selected=i_sel, i_sneak_worst=i_sneak,
                       margin=i_margin, voltage_margin=v_margin,
                       solution=sol)
