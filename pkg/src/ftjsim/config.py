"""INI-style run configuration: parse, validate, emit, build models.

The format is a small, strict subset of INI: `[section]` headers,
`key = value` pairs, blank lines, and comments starting with `#` or `;`.
Keys carry their unit in the name (d_fe_nm, area_um2, v_read_v) so a
config file is unambiguous without a manual. Unknown sections or keys,
duplicate assignments, and malformed values are all hard errors that
report the offending line and column; silent fallback to a default is
reserved for keys that are absent entirely.

Besides the model sections ([device], [update], [variation]) there is one
section per analysis command carrying that command's experiment knobs, so
a single file pins an entire reproducible run.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace

from .conduction import (CalibrationTargets, ConductionParams, TunnelBarrier,
                         calibrate)
from .device import UpdateModel, default_update_model

__all__ = [
    "ConfigError",
    "SimConfig",
    "parse_config",
    "load_config",
    "emit_config",
    "ModelBundle",
    "build_model",
]

_SCHEME_KINDS = ("amplitude_ramp", "width_ramp", "hybrid")


class ConfigError(ValueError):
    """Malformed or invalid configuration, with source position."""

    def __init__(self, message: str, source: str = "<config>",
                 line: int = 0, col: int = 0):
        self.source = source
        self.line = line
        self.col = col
        if line:
            super().__init__(f"{source}:{line}:{col}: {message}")
        else:
            super().__init__(f"{source}: {message}")


@dataclass(frozen=True)
class DeviceConfig:
    """[device]: stack geometry, channel parameters, calibration targets,
    and the read conditions shared by every command."""

    d_fe_nm: float = 4.9
    area_um2: float = 14400.0
    phi_pf_ev: float = 0.15
    ea_ohm_ev: float = 0.15
    eps_r: float = 5.0
    c_pf: float = 1.0
    c_ohm: float = 1.0
    g_lrs: float = 10.0
    tun_phi_bar_ev: float = 1.0
    tun_m_eff: float = 0.4
    calibrate: bool = True
    r_on_ohms: float = 1e8
    on_off: float = 10.0
    selection: float = 42.0
    t_kelvin: float = 300.0
    v_read_v: float = 0.3


@dataclass(frozen=True)
class UpdateConfig:
    """[update]: pulse-update dynamics."""

    n_full: int = 50
    c2c_rel: float = 0.10
    v_on_pot_v: float = -0.6
    v_on_dep_v: float = 0.8


@dataclass(frozen=True)
class VariationConfig:
    """[variation]: device-to-device spread used by sampling commands."""

    sigma_d2d: float = 0.1


@dataclass(frozen=True)
class IvConfig:
    """[iv]: static sweep grid."""

    t_list_k: tuple = (300.0,)
    v_min_v: float = 0.02
    v_max_v: float = 0.5
    n_points: int = 60
    state_w: float = 1.0
    log_grid: bool = False


@dataclass(frozen=True)
class HysteresisConfig:
    """[hysteresis]: quasi-static loop extents (v_neg_v is a magnitude)."""

    v_neg_v: float = 1.6
    v_pos_v: float = 2.4
    step_v: float = 0.025


@dataclass(frozen=True)
class SchemeConfig:
    """[scheme]: pulse-train experiment."""

    kind: str = "amplitude_ramp"
    n_cycles: int = 3
    alt_amplitudes: bool = False


@dataclass(frozen=True)
class FitAConfig:
    """[fitA]: which preset trace the nonlinearity fit runs on."""

    kind: str = "amplitude_ramp"


@dataclass(frozen=True)
class CdfConfig:
    """[cdf]: repeated-cycle level statistics."""

    n_cycles: int = 17


@dataclass(frozen=True)
class RetentionConfig:
    """[retention]: log-spaced hold horizons. The default drift rate is
    zero: retention of the remanent state is the baseline behavior."""

    drift_rate_per_s: float = 0.0
    t_min_s: float = 1.0
    t_max_s: float = 950400.0
    n_points: int = 25


@dataclass(frozen=True)
class D2dConfig:
    """[d2d]: population size for the spread study (sigma comes from
    [variation])."""

    n_devices: int = 10000


@dataclass(frozen=True)
class ScalingConfig:
    """[scaling]: device areas for the homogeneity check."""

    areas_um2: tuple = (100.0, 1600.0, 14400.0)
    v_write_v: float = -1.6
    t_width_s: float = 50e-6


@dataclass(frozen=True)
class ArrheniusConfig:
    """[arrhenius]: temperatures and per-window grid density."""

    t_list_k: tuple = (300.0, 320.0, 340.0, 360.0)
    n_points: int = 10


@dataclass(frozen=True)
class XbarConfig:
    """[xbar]: array shape and operating points (sigma comes from
    [variation])."""

    n_rows: int = 4
    n_cols: int = 4
    v_read_v: float = 0.5
    v_write_v: float = 2.4
    t_width_s: float = 50e-6


@dataclass(frozen=True)
class SimConfig:
    """Typed configuration with every knob at its default."""

    device: DeviceConfig = field(default_factory=DeviceConfig)
    update: UpdateConfig = field(default_factory=UpdateConfig)
    variation: VariationConfig = field(default_factory=VariationConfig)
    iv: IvConfig = field(default_factory=IvConfig)
    hysteresis: HysteresisConfig = field(default_factory=HysteresisConfig)
    scheme: SchemeConfig = field(default_factory=SchemeConfig)
    fit_a: FitAConfig = field(default_factory=FitAConfig)
    cdf: CdfConfig = field(default_factory=CdfConfig)
    retention: RetentionConfig = field(default_factory=RetentionConfig)
    d2d: D2dConfig = field(default_factory=D2dConfig)
    scaling: ScalingConfig = field(default_factory=ScalingConfig)
    arrhenius: ArrheniusConfig = field(default_factory=ArrheniusConfig)
    xbar: XbarConfig = field(default_factory=XbarConfig)


# section name -> (SimConfig attribute, section dataclass)
_SECTIONS: dict[str, tuple[str, type]] = {
    "device": ("device", DeviceConfig),
    "update": ("update", UpdateConfig),
    "variation": ("variation", VariationConfig),
    "iv": ("iv", IvConfig),
    "hysteresis": ("hysteresis", HysteresisConfig),
    "scheme": ("scheme", SchemeConfig),
    "fitA": ("fit_a", FitAConfig),
    "cdf": ("cdf", CdfConfig),
    "retention": ("retention", RetentionConfig),
    "d2d": ("d2d", D2dConfig),
    "scaling": ("scaling", ScalingConfig),
    "arrhenius": ("arrhenius", ArrheniusConfig),
    "xbar": ("xbar", XbarConfig),
}


def _kind_of(section_cls: type, key: str) -> str:
    """Schema type tag for a section field, derived from its default."""
    for f in fields(section_cls):
        if f.name == key:
            default = getattr(section_cls(), key)
            if isinstance(default, bool):
                return "bool"
            if isinstance(default, int):
                return "int"
            if isinstance(default, float):
                return "float"
            if isinstance(default, tuple):
                return "floatlist"
            return "str"
    raise KeyError(key)


def _section_keys(section_cls: type) -> list[str]:
    return [f.name for f in fields(section_cls)]


def _strip_comment(line: str) -> str:
    """Drop a trailing comment. Comments start a line or follow whitespace."""
    stripped = line.lstrip()
    if stripped.startswith(("#", ";")):
        return ""
    for mark in ("#", ";"):
        pos = 0
        while True:
            pos = line.find(mark, pos)
            if pos < 0:
                break
            if pos > 0 and line[pos - 1] in " \t":
                return line[:pos]
            pos += 1
    return line


def _convert(raw: str, kind: str, source: str, line_no: int, col: int):
    if kind == "float":
        try:
            return float(raw)
        except ValueError:
            raise ConfigError(f"expected a number, got {raw!r}",
                              source, line_no, col) from None
    if kind == "int":
        try:
            return int(raw)
        except ValueError:
            raise ConfigError(f"expected an integer, got {raw!r}",
                              source, line_no, col) from None
    if kind == "bool":
        low = raw.lower()
        if low in ("true", "yes", "1"):
            return True
        if low in ("false", "no", "0"):
            return False
        raise ConfigError(f"expected true/false, got {raw!r}",
                          source, line_no, col)
    if kind == "floatlist":
        try:
            values = tuple(float(tok) for tok in raw.split(",") if tok.strip())
        except ValueError:
            raise ConfigError(f"expected comma-separated numbers, got {raw!r}",
                              source, line_no, col) from None
        if not values:
            raise ConfigError("expected at least one number",
                              source, line_no, col)
        return values
    if kind == "str":
        return raw
    raise AssertionError(f"unhandled schema type {kind}")


def parse_config(text: str, source: str = "<config>") -> SimConfig:
    """Parse configuration text into a SimConfig.

    Raises ConfigError with line and column on any malformed or unknown
    content. Keys not present keep their defaults.
    """
    staged: dict[str, dict[str, object]] = {}
    seen: set[tuple[str, str]] = set()
    seen_sections: set[str] = set()
    section: str | None = None
    for line_no, raw_line in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw_line)
        if not line.strip():
            continue
        stripped = line.strip()
        col0 = raw_line.index(stripped[0]) + 1
        if stripped.startswith("["):
            if not stripped.endswith("]"):
                raise ConfigError("section header is missing its closing ']'",
                                  source, line_no, col0 + len(stripped) - 1)
            name = stripped[1:-1].strip()
            if not name:
                raise ConfigError("empty section name", source, line_no, col0)
            if name not in _SECTIONS:
                raise ConfigError(
                    f"unknown section [{name}]; expected one of "
                    f"{', '.join(sorted(_SECTIONS))}", source, line_no, col0)
            if name in seen_sections:
                raise ConfigError(f"duplicate section [{name}]",
                                  source, line_no, col0)
            seen_sections.add(name)
            section = name
            continue
        if "=" not in stripped:
            raise ConfigError("expected 'key = value'", source, line_no, col0)
        if section is None:
            raise ConfigError("assignment before any [section] header",
                              source, line_no, col0)
        key_part, _, value_part = stripped.partition("=")
        key = key_part.strip()
        value = value_part.strip()
        if not key:
            raise ConfigError("missing key before '='", source, line_no, col0)
        _, section_cls = _SECTIONS[section]
        if key not in _section_keys(section_cls):
            raise ConfigError(
                f"unknown key {key!r} in [{section}]; expected one of "
                f"{', '.join(sorted(_section_keys(section_cls)))}",
                source, line_no, col0)
        if (section, key) in seen:
            raise ConfigError(f"duplicate key {key!r} in [{section}]",
                              source, line_no, col0)
        seen.add((section, key))
        if not value:
            val_col = raw_line.index("=") + 2
            raise ConfigError(f"missing value for {key!r}",
                              source, line_no, val_col)
        kind = _kind_of(section_cls, key)
        val_col = raw_line.find(value, raw_line.index("=")) + 1
        staged.setdefault(section, {})[key] = _convert(value, kind, source,
                                                       line_no, val_col)
    kwargs = {}
    for name, (attr, section_cls) in _SECTIONS.items():
        kwargs[attr] = section_cls(**staged.get(name, {}))
    cfg = SimConfig(**kwargs)
    _validate(cfg, source)
    return cfg


def _validate(cfg: SimConfig, source: str) -> None:
    d, u, var = cfg.device, cfg.update, cfg.variation
    checks = [
        (d.d_fe_nm > 0, "d_fe_nm must be positive"),
        (d.area_um2 > 0, "area_um2 must be positive"),
        (d.eps_r > 0, "eps_r must be positive"),
        (d.g_lrs >= 1, "g_lrs must be >= 1"),
        (d.tun_phi_bar_ev > 0, "tun_phi_bar_ev must be positive"),
        (d.tun_m_eff > 0, "tun_m_eff must be positive"),
        (d.r_on_ohms > 0, "r_on_ohms must be positive"),
        (d.on_off >= 1, "on_off must be >= 1"),
        (d.selection > 0, "selection must be positive"),
        (d.t_kelvin > 0, "t_kelvin must be positive"),
        (d.v_read_v > 0, "v_read_v must be positive"),
        (u.n_full >= 2, "n_full must be >= 2"),
        (0.0 <= u.c2c_rel < 1.0, "c2c_rel must be in [0, 1)"),
        (u.v_on_pot_v < 0 < u.v_on_dep_v,
         "onsets must satisfy v_on_pot_v < 0 < v_on_dep_v"),
        (var.sigma_d2d >= 0, "sigma_d2d must be >= 0"),
        (cfg.iv.n_points >= 1, "[iv] n_points must be >= 1"),
        (cfg.iv.v_min_v <= cfg.iv.v_max_v,
         "[iv] v_min_v must not exceed v_max_v"),
        (not cfg.iv.log_grid or cfg.iv.v_min_v > 0,
         "[iv] log_grid needs a positive v_min_v"),
        (len(cfg.iv.t_list_k) >= 1 and all(t > 0 for t in cfg.iv.t_list_k),
         "[iv] t_list_k entries must be positive"),
        (cfg.hysteresis.v_neg_v > 0, "[hysteresis] v_neg_v must be positive"),
        (cfg.hysteresis.v_pos_v > 0, "[hysteresis] v_pos_v must be positive"),
        (cfg.hysteresis.step_v > 0, "[hysteresis] step_v must be positive"),
        (cfg.scheme.kind in _SCHEME_KINDS,
         f"[scheme] kind must be one of {', '.join(_SCHEME_KINDS)}"),
        (cfg.scheme.n_cycles >= 1, "[scheme] n_cycles must be >= 1"),
        (cfg.fit_a.kind in _SCHEME_KINDS,
         f"[fitA] kind must be one of {', '.join(_SCHEME_KINDS)}"),
        (cfg.cdf.n_cycles >= 2, "[cdf] n_cycles must be >= 2"),
        (cfg.retention.drift_rate_per_s >= 0,
         "[retention] drift_rate_per_s must be >= 0"),
        (cfg.retention.t_min_s > 0, "[retention] t_min_s must be positive"),
        (cfg.retention.t_max_s >= cfg.retention.t_min_s,
         "[retention] t_max_s must be >= t_min_s"),
        (cfg.retention.n_points >= 2, "[retention] n_points must be >= 2"),
        (cfg.d2d.n_devices >= 2, "[d2d] n_devices must be >= 2"),
        (len(cfg.scaling.areas_um2) >= 1
         and all(a > 0 for a in cfg.scaling.areas_um2),
         "[scaling] areas_um2 entries must be positive"),
        (cfg.scaling.t_width_s >= 0, "[scaling] t_width_s must be >= 0"),
        (len(cfg.arrhenius.t_list_k) >= 3
         and len(set(cfg.arrhenius.t_list_k)) == len(cfg.arrhenius.t_list_k)
         and all(t > 0 for t in cfg.arrhenius.t_list_k),
         "[arrhenius] t_list_k needs >= 3 distinct positive temperatures"),
        (cfg.arrhenius.n_points >= 4, "[arrhenius] n_points must be >= 4"),
        (cfg.xbar.n_rows >= 1, "[xbar] n_rows must be >= 1"),
        (cfg.xbar.n_cols >= 1, "[xbar] n_cols must be >= 1"),
        (cfg.xbar.v_read_v != 0, "[xbar] v_read_v must be nonzero"),
        (cfg.xbar.t_width_s >= 0, "[xbar] t_width_s must be >= 0"),
    ]
    for ok, message in checks:
        if not ok:
            raise ConfigError(message, source)


def load_config(path: str) -> SimConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read(), source=path)


def emit_config(cfg: SimConfig) -> str:
    """Render a SimConfig as text that parses back to an equal value."""
    lines = []
    for name, (attr, section_cls) in _SECTIONS.items():
        section = getattr(cfg, attr)
        lines.append(f"[{name}]")
        for key in _section_keys(section_cls):
            value = getattr(section, key)
            kind = _kind_of(section_cls, key)
            if kind == "bool":
                text = "true" if value else "false"
            elif kind == "int":
                text = str(value)
            elif kind == "floatlist":
                text = ", ".join(repr(float(v)) for v in value)
            elif kind == "str":
                text = str(value)
            else:
                text = repr(float(value))
            lines.append(f"{key} = {text}")
        lines.append("")
    return "\n".join(lines)


@dataclass(frozen=True)
class ModelBundle:
    """Everything a simulation run needs, built from one config."""

    params: ConductionParams
    update: UpdateModel
    targets: CalibrationTargets
    v_read: float
    t_kelvin: float


def build_model(cfg: SimConfig) -> ModelBundle:
    """Construct the conduction and update models a config describes.

    With calibrate = true the prefactors and permittivity are solved from
    the figure-of-merit targets; otherwise the raw [device] values are
    used as-is.
    """
    d = cfg.device
    skeleton = ConductionParams(
        d_fe=d.d_fe_nm * 1e-9,
        area=d.area_um2 * 1e-12,
        phi_pf=d.phi_pf_ev,
        eps_r=d.eps_r,
        ea_ohm=d.ea_ohm_ev,
        c_pf=d.c_pf,
        c_ohm=d.c_ohm,
        tun=TunnelBarrier(phi_bar=d.tun_phi_bar_ev, m_eff=d.tun_m_eff),
        g_lrs=d.g_lrs,
    )
    targets = CalibrationTargets(r_on_ohms=d.r_on_ohms, on_off=d.on_off,
                                 selection=d.selection)
    params = calibrate(targets, skeleton, t=d.t_kelvin) if d.calibrate \
        else skeleton
    update = replace(default_update_model(n_full=cfg.update.n_full,
                                          c2c_rel=cfg.update.c2c_rel),
                     v_on_pot=cfg.update.v_on_pot_v,
                     v_on_dep=cfg.update.v_on_dep_v)
    return ModelBundle(params=params, update=update, targets=targets,
                       v_read=d.v_read_v, t_kelvin=d.t_kelvin)
