"""Command-line front end.

Every analysis command reads one optional INI config, runs a deterministic
simulation seeded from --seed, and writes CSV tables plus a JSON metadata
sidecar into --out. Output bytes are reproducible for a given (config,
seed, version): no timestamps, no machine identifiers, and all floats
rendered with a fixed format. Experiment knobs live in per-command config
sections, so the command line carries only the run plumbing:

    ftjsim --command iv --config run.ini --out results --seed 7

(the command may also be given positionally: `ftjsim iv ...`).

Exit codes: 0 success, 1 usage error, 2 configuration error, 3 numerical
failure (calibration or network solve).
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import sys
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from . import __version__
from .conduction import (CalibrationError, V_READ, V_SELECT,
                         current_total, current_tunneling, on_off,
                         self_selection_ratio)
from .config import ConfigError, SimConfig, build_model, emit_config, load_config
from .constants import K_B, Q_E
from .crossbar import build_crossbar, sneak_margin, write_v_half
from .device import (DeviceState, PulseSpec, PulseScheme, dc_write_loop,
                     memory_window, preset_scheme, read_state,
                     retention_evolve, run_scheme, sample_device, write_energy)
from .extraction import (OHMIC_WINDOW, PF_WINDOW, Sweep, cdf_levels,
                         discriminate_tunneling, extract_ohmic, extract_pf,
                         fit_update_a)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

# Fixed pulse-trace readout bias; the trace.csv column name encodes it.
TRACE_READ_V = V_READ


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _fmt(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.12g}"
    return str(x)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    return obj


def _write_csv(path: Path, header, rows) -> Path:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(x) for x in row])
    return path


def _write_json(path: Path, payload: dict) -> Path:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_jsonable(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _meta(command: str, cfg: SimConfig, seed: int, payload: dict) -> dict:
    """Sidecar payload with the reproducibility triple stamped in."""
    base = {
        "command": command,
        "seed": seed,
        "version": __version__,
        "config_sha256": hashlib.sha256(emit_config(cfg).encode()).hexdigest(),
    }
    base.update(payload)
    return base


def _figures_of_merit(p, t: float) -> dict:
    lrs = DeviceState(w=1.0)
    return {
        "on_off_0p1v": on_off(p, t=t),
        "r_on_ohms_0p3v": V_READ / current_total(V_READ, t, p, lrs),
        "selection_0p5v": self_selection_ratio(V_SELECT, t, p, lrs),
    }


def _ramp(a: float, b: float, step: float) -> np.ndarray:
    n = max(int(round(abs(b - a) / step)), 1)
    return np.linspace(a, b, n + 1)


# --- commands ---------------------------------------------------------------

def cmd_iv(cfg: SimConfig, bundle, out: Path, seed: int) -> list[Path]:
    p = bundle.params
    sec = cfg.iv
    if sec.log_grid:
        grid = np.geomspace(sec.v_min_v, sec.v_max_v, sec.n_points)
    else:
        grid = np.linspace(sec.v_min_v, sec.v_max_v, sec.n_points)
    state = DeviceState(w=sec.state_w)
    rows = []
    for t in sec.t_list_k:
        for v in grid:
            i = current_total(float(v), t, p, state)
            rows.append((v, t, sec.state_w, i, i / p.area))
    files = [_write_csv(out / "iv.csv",
                        ["v_volts", "t_kelvin", "state_w", "i_amps", "j_a_per_m2"],
                        rows)]
    meta = _meta("iv", cfg, seed, {
        "temps_kelvin": list(sec.t_list_k),
        "grid": {"v_min_v": sec.v_min_v, "v_max_v": sec.v_max_v,
                 "n_points": sec.n_points, "log_grid": sec.log_grid},
        "params": asdict(p),
        "figures": _figures_of_merit(p, bundle.t_kelvin),
    })
    files.append(_write_json(out / "iv.json", meta))
    return files


def cmd_hysteresis(cfg: SimConfig, bundle, out: Path, seed: int) -> list[Path]:
    p = bundle.params
    sec = cfg.hysteresis
    vn, vp, step = sec.v_neg_v, sec.v_pos_v, sec.step_v
    grid = np.concatenate([
        _ramp(0.0, -vn, step),
        _ramp(-vn, vp, step)[1:],
        _ramp(vp, -vn, step)[1:],
        _ramp(-vn, 0.0, step)[1:],
    ])
    points = dc_write_loop(DeviceState(w=0.0), grid, p,
                           v_read=bundle.v_read, t=bundle.t_kelvin)
    rows = [(pt.v_write, pt.w, pt.readout.i_amps, pt.readout.r_ohms)
            for pt in points]
    files = [_write_csv(out / "loop.csv",
                        ["v_write_volts", "w", "i_amps", "r_ohms"], rows)]
    window = memory_window(points)
    meta = _meta("hysteresis", cfg, seed, {
        "sweep": {"v_neg_v": vn, "v_pos_v": vp, "step_v": step},
        "read": {"v_read": bundle.v_read, "t_kelvin": bundle.t_kelvin},
        "window": asdict(window),
    })
    files.append(_write_json(out / "hysteresis.json", meta))
    return files


def cmd_scheme(cfg: SimConfig, bundle, out: Path, seed: int) -> list[Path]:
    p, m = bundle.params, bundle.update
    sec = cfg.scheme
    rng = np.random.default_rng(seed)
    state = DeviceState(w=0.0)
    rows = []
    for cycle in range(1, sec.n_cycles + 1):
        index = 0
        for polarity in ("pot", "dep"):
            scheme = preset_scheme(sec.kind, polarity,
                                   alt_amplitudes=sec.alt_amplitudes)
            trace = run_scheme(state, scheme, m, p, v_read=TRACE_READ_V,
                               t=bundle.t_kelvin, rng=rng)
            for step in trace:
                rows.append((cycle, index, step.pulse.v_write,
                             step.pulse.t_width, step.w,
                             step.readout.r_ohms))
                index += 1
            state = replace(state, w=trace[-1].w,
                            last_polarity=-1 if polarity == "pot" else 1)
    files = [_write_csv(out / "trace.csv",
                        ["cycle", "pulse_index", "v_write_volts", "t_width_s",
                         "w", "r_ohms_0p3v"], rows)]
    meta = _meta("scheme", cfg, seed, {
        "kind": sec.kind,
        "cycles": sec.n_cycles,
        "alt_amplitudes": sec.alt_amplitudes,
        "c2c_rel": m.c2c_rel,
        "final_w": rows[-1][4],
    })
    files.append(_write_json(out / "scheme.json", meta))
    return files


def _constant_train(v: float, n: int) -> PulseScheme:
    return PulseScheme("amplitude_ramp", n, v, v_step=0.0, width=50e-6)


def cmd_fit_a(cfg: SimConfig, bundle, out: Path, seed: int) -> list[Path]:
    p = bundle.params
    m = replace(bundle.update, c2c_rel=0.0)
    kind = cfg.fit_a.kind
    shape = m.shape_for(kind)
    n = m.n_full
    if kind == "amplitude_ramp":
        # constant above-onset train: every pulse advances exactly one count
        pot_trace = run_scheme(DeviceState(w=0.0), _constant_train(-1.6, n), m, p)
        dep_trace = run_scheme(DeviceState(w=1.0), _constant_train(2.4, n), m, p)
    else:
        pot_trace = run_scheme(DeviceState(w=0.0),
                               preset_scheme(kind, "pot"), m, p)
        dep_trace = run_scheme(DeviceState(w=1.0),
                               preset_scheme(kind, "dep"), m, p)
    fit_pot = fit_update_a(np.arange(1, len(pot_trace) + 1),
                           [s.w for s in pot_trace])
    fit_dep = fit_update_a(np.arange(1, len(dep_trace) + 1),
                           [1.0 - s.w for s in dep_trace])
    rows = [
        ("a_pot", fit_pot.a, math.nan),
        ("a_dep", fit_dep.a, math.nan),
        ("amplitude_pot", fit_pot.amplitude, math.nan),
        ("amplitude_dep", fit_dep.amplitude, math.nan),
    ]
    files = [_write_csv(out / "fit.csv", ["param", "value", "stderr"], rows)]
    meta = _meta("fitA", cfg, seed, {
        "kind": kind,
        "model_a": {"a_pot": shape.a_pot, "a_dep": shape.a_dep},
        "fit": {"a_pot": fit_pot.a, "a_dep": fit_dep.a,
                "rss_pot": fit_pot.rss, "rss_dep": fit_dep.rss,
                "at_bound": fit_pot.at_bound or fit_dep.at_bound},
    })
    files.append(_write_json(out / "fitA.json", meta))
    return files


def cmd_cdf(cfg: SimConfig, bundle, out: Path, seed: int) -> list[Path]:
    p, m = bundle.params, bundle.update
    rng = np.random.default_rng(seed)
    cycles = cfg.cdf.n_cycles
    scheme = preset_scheme("amplitude_ramp", "dep")
    n = scheme.n_pulses
    traces = np.zeros((cycles, n + 1))
    for k in range(cycles):
        s0 = DeviceState(w=1.0)
        traces[k, 0] = read_state(s0, p, v_read=TRACE_READ_V,
                                  t=bundle.t_kelvin).r_ohms
        trace = run_scheme(s0, scheme, m, p, v_read=TRACE_READ_V,
                           t=bundle.t_kelvin, rng=rng)
        traces[k, 1:] = [step.readout.r_ohms for step in trace]
    report = cdf_levels(traces)
    rows = [(idx, report.medians[idx], report.iqrs[idx])
            for idx in range(n + 1)]
    files = [_write_csv(out / "cdf.csv",
                        ["pulse_index", "median_r_ohms", "iqr_r_ohms"], rows)]
    meta = _meta("cdf", cfg, seed, {
        "cycles": cycles,
        "scheme": "amplitude_ramp depression",
        "read_v": TRACE_READ_V,
        "c2c_rel": m.c2c_rel,
        "n_levels": report.n_levels,
        "pooled_iqr_ohms": report.pooled_iqr,
    })
    files.append(_write_json(out / "cdf.json", meta))
    return files


def cmd_retention(cfg: SimConfig, bundle, out: Path, seed: int) -> list[Path]:
    p = bundle.params
    sec = cfg.retention
    times = np.geomspace(sec.t_min_s, sec.t_max_s, sec.n_points)
    rows = []
    finals = {}
    for label, w0 in (("lrs", 1.0), ("hrs", 0.0)):
        s0 = DeviceState(w=w0)
        for t_s in times:
            s = retention_evolve(s0, float(t_s), sec.drift_rate_per_s)
            ro = read_state(s, p, v_read=bundle.v_read, t=bundle.t_kelvin)
            rows.append((label, t_s, s.w, ro.r_ohms))
            finals[label] = ro.r_ohms
    files = [_write_csv(out / "retention.csv",
                        ["start_state", "t_seconds", "w", "r_ohms"], rows)]
    meta = _meta("retention", cfg, seed, {
        "drift_rate_per_s": sec.drift_rate_per_s,
        "horizon_s": sec.t_max_s,
        "final_ratio": finals["hrs"] / finals["lrs"],
    })
    files.append(_write_json(out / "retention.json", meta))
    return files


def cmd_d2d(cfg: SimConfig, bundle, out: Path, seed: int) -> list[Path]:
    p = bundle.params
    n_devices = cfg.d2d.n_devices
    sigma = cfg.variation.sigma_d2d
    children = np.random.SeedSequence(seed).spawn(n_devices)
    rows = []
    offsets = []
    for idx, child in enumerate(children):
        s = sample_device(p, sigma, child)
        offsets.append(s.d2d_log10)
        r_hrs = read_state(s, p, v_read=bundle.v_read).r_ohms
        r_lrs = read_state(replace(s, w=1.0), p, v_read=bundle.v_read).r_ohms
        rows.append((idx, s.d2d_log10, r_hrs, r_lrs))
    files = [_write_csv(out / "d2d.csv",
                        ["device_index", "d2d_log10", "r_hrs_ohms",
                         "r_lrs_ohms"], rows)]
    offsets = np.array(offsets)
    meta = _meta("d2d", cfg, seed, {
        "n_devices": n_devices,
        "sigma_target": sigma,
        "sigma_sample": float(np.std(offsets, ddof=1)) if len(offsets) > 1 else 0.0,
        "mean_sample": float(np.mean(offsets)),
    })
    files.append(_write_json(out / "d2d.json", meta))
    return files


def cmd_scaling(cfg: SimConfig, bundle, out: Path, seed: int) -> list[Path]:
    p = bundle.params
    sec = cfg.scaling
    pulse = PulseSpec(sec.v_write_v, sec.t_width_s)
    rows = []
    for a_um2 in sec.areas_um2:
        pa = replace(p, area=a_um2 * 1e-12)
        lrs = DeviceState(w=1.0)
        i_read = current_total(V_READ, bundle.t_kelvin, pa, lrs)
        e_j = write_energy(pulse, lrs, pa, t=bundle.t_kelvin)
        rows.append((a_um2, i_read, i_read / pa.area, V_READ / i_read,
                     e_j * 1e12))
    files = [_write_csv(out / "scaling.csv",
                        ["area_um2", "i_read_amps", "j_read_a_per_m2",
                         "r_on_ohms", "write_energy_pj"], rows)]
    meta = _meta("scaling", cfg, seed, {
        "areas_um2": list(sec.areas_um2),
        "pulse": {"v_write": sec.v_write_v, "t_width_s": sec.t_width_s},
        "r_times_area_const": rows[0][3] * sec.areas_um2[0] if rows else None,
    })
    files.append(_write_json(out / "scaling.json", meta))
    return files


def cmd_arrhenius(cfg: SimConfig, bundle, out: Path, seed: int) -> list[Path]:
    p = bundle.params
    sec = cfg.arrhenius
    temps = list(sec.t_list_k)
    lrs = DeviceState(w=1.0)
    ohm_v = np.linspace(*OHMIC_WINDOW, sec.n_points)
    pf_v = np.linspace(*PF_WINDOW, sec.n_points)
    ohm_sweeps = [Sweep(ohm_v, current_total(ohm_v, t, p, lrs), t) for t in temps]
    pf_sweeps = [Sweep(pf_v, current_total(pf_v, t, p, lrs), t) for t in temps]
    pf = extract_pf(pf_sweeps, d_fe=p.d_fe)
    ohm = extract_ohmic(ohm_sweeps)
    verdict_dev = discriminate_tunneling(pf_sweeps)
    tun_sweeps = [Sweep(pf_v, current_tunneling(pf_v, p), t) for t in temps]
    verdict_tun = discriminate_tunneling(tun_sweeps)
    k_over_q = K_B / Q_E
    rows = [
        ("eps_r", pf.eps_r,
         2.0 * pf.eps_r * pf.slope_vs_inv_t.stderr_slope
         / pf.slope_vs_inv_t.slope),
        ("phi_pf_ev", pf.phi_pf_ev,
         pf.intercept_vs_inv_t.stderr_slope * k_over_q),
        ("ea_ohm_ev", ohm.ea_ohm_ev, ohm.arrhenius.stderr_slope * k_over_q),
    ]
    for sweep, fit in zip(pf_sweeps, pf.per_temperature):
        rows.append((f"pf_slope_{int(sweep.t_kelvin)}k", fit.slope,
                     fit.stderr_slope))
    files = [_write_csv(out / "fit.csv", ["param", "value", "stderr"], rows)]
    meta = _meta("arrhenius", cfg, seed, {
        "temps_kelvin": temps,
        "windows": {"ohmic_v": list(OHMIC_WINDOW),
                    "trap_emission_v": list(PF_WINDOW)},
        "model_values": {"eps_r": p.eps_r, "phi_pf_ev": p.phi_pf,
                         "ea_ohm_ev": p.ea_ohm},
        "mechanism": {
            "device": {"label": verdict_dev.label,
                       "t_sensitivity": verdict_dev.t_sensitivity},
            "tunneling_reference": {"label": verdict_tun.label,
                                    "t_sensitivity": verdict_tun.t_sensitivity},
        },
        "note": "window fits carry cross-channel bias; see loglog slopes",
        "loglog_slopes": list(ohm.loglog_slopes),
    })
    files.append(_write_json(out / "arrhenius.json", meta))
    return files


def cmd_xbar(cfg: SimConfig, bundle, out: Path, seed: int) -> list[Path]:
    p, m = bundle.params, bundle.update
    sec = cfg.xbar
    sigma = cfg.variation.sigma_d2d
    xbar = build_crossbar(sec.n_rows, sec.n_cols, p, sigma, seed,
                          t_kelvin=bundle.t_kelvin)
    w = np.ones((sec.n_rows, sec.n_cols))
    w[0, 0] = 0.0  # worst case: every sneak path is low-resistance
    xbar = xbar.with_weights(w)
    report = sneak_margin(xbar, 0, 0, sec.v_read_v)
    sol = report.solution
    rows = [(r, c, xbar.states[r][c].w, sol.device_v[r, c], sol.device_i[r, c])
            for r in range(sec.n_rows) for c in range(sec.n_cols)]
    files = [_write_csv(out / "xbar.csv",
                        ["row", "col", "w", "v_device_volts",
                         "i_device_amps"], rows)]
    rng = np.random.default_rng(seed)
    pulse = PulseSpec(sec.v_write_v, sec.t_width_s)
    _, wrep = write_v_half(xbar, 0, 0, pulse, m, rng=rng)
    meta = _meta("xbar", cfg, seed, {
        "shape": [sec.n_rows, sec.n_cols],
        "sigma_d2d": sigma,
        "read": {"v_read": sec.v_read_v,
                 "i_selected_amps": report.i_selected,
                 "i_sneak_worst_amps": report.i_sneak_worst,
                 "margin": report.margin,
                 "voltage_margin": report.voltage_margin,
                 "newton_iterations": sol.iterations,
                 "residual_amps": sol.residual},
        "write": {"v_write": sec.v_write_v, "t_width_s": sec.t_width_s,
                  "delta_w_selected": wrep.delta_w_selected,
                  "n_disturbed": len(wrep.disturbs),
                  "max_disturb": wrep.max_disturb,
                  "energy_pj": wrep.energy_joules * 1e12},
    })
    files.append(_write_json(out / "xbar.json", meta))
    return files


def cmd_bench(cfg: SimConfig, bundle, out: Path, seed: int) -> list[Path]:
    """Figure-of-merit summary table for the calibrated model."""
    p, m = bundle.params, bundle.update
    t = bundle.t_kelvin
    hrs = DeviceState(w=0.0)
    shape = m.shape_for("amplitude_ramp")
    figures = _figures_of_merit(p, t)
    energy_j = write_energy(PulseSpec(-1.6, 50e-6), hrs, p, t=t)
    rows = [
        ("on_off_0p1v", figures["on_off_0p1v"]),
        ("r_on_ohms_0p3v", figures["r_on_ohms_0p3v"]),
        ("selection_0p5v", figures["selection_0p5v"]),
        ("a_pot", shape.a_pot),
        ("a_dep", shape.a_dep),
        ("nl_pot", -m.n_full / shape.a_pot),
        ("nl_dep", m.n_full / shape.a_dep),
        ("c2c_pct", 100.0 * m.c2c_rel),
        ("energy_per_pulse_pj", energy_j * 1e12),
    ]
    files = [_write_csv(out / "bench.csv", ["metric", "value"], rows)]
    meta = _meta("bench", cfg, seed, {
        "t_kelvin": t,
        "pulse": {"v_write": -1.6, "t_width_s": 50e-6, "start_state": "hrs"},
        "note": ("energy_per_pulse_pj scales with device area through the "
                 "calibrated R_on; at the default large-area calibration it "
                 "sits far above selector-free sub-pJ figures"),
    })
    files.append(_write_json(out / "bench.json", meta))
    return files


# --- wiring -----------------------------------------------------------------

_HANDLERS = {
    "iv": cmd_iv,
    "hysteresis": cmd_hysteresis,
    "scheme": cmd_scheme,
    "fitA": cmd_fit_a,
    "cdf": cmd_cdf,
    "retention": cmd_retention,
    "d2d": cmd_d2d,
    "scaling": cmd_scaling,
    "arrhenius": cmd_arrhenius,
    "xbar": cmd_xbar,
    "bench": cmd_bench,
}


def _build_parser() -> _Parser:
    parser = _Parser(prog="ftjsim",
                     description="Ferroelectric memristor compact-model toolkit")
    parser.add_argument("command_pos", nargs="?", metavar="COMMAND",
                        help=f"one of: {', '.join(_HANDLERS)}")
    parser.add_argument("--command", dest="command_flag", metavar="NAME",
                        help="command to run (alternative to the positional)")
    parser.add_argument("--config", help="INI config file (defaults baked in)")
    parser.add_argument("--out", default="ftjsim-out",
                        help="output directory (created if missing)")
    parser.add_argument("--seed", type=int, default=0,
                        help="root seed for every random draw")
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command_pos and args.command_flag \
                and args.command_pos != args.command_flag:
            raise _UsageError(
                f"conflicting commands {args.command_pos!r} and "
                f"{args.command_flag!r}")
        command = args.command_flag or args.command_pos
        if not command:
            raise _UsageError("no command given")
        if command not in _HANDLERS:
            raise _UsageError(
                f"unknown command {command!r}; expected one of "
                f"{', '.join(_HANDLERS)}")
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    try:
        cfg = load_config(args.config) if args.config else SimConfig()
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        bundle = build_model(cfg)
    except CalibrationError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        files = _HANDLERS[command](cfg, bundle, out, args.seed)
    except (CalibrationError, RuntimeError, np.linalg.LinAlgError,
            ArithmeticError, ValueError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    for path in files:
        print(f"wrote {path}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
