"""Experiment configuration: flat ``key = value`` files with section headers.

Example::

    # vessel and controller overrides, SI units
    [vessel]
    m_v = 6.3622085e6
    T = 2.873071e8, 2.9e9, 2.726143e9

    [control]
    t_on = 50

    [initial]
    theta0 = 0.05, -0.02, 0.10

    [run]
    t_end = 200
    h_list = 0.05, 0.1
    methods = SP4, RK4

Every key is optional; an empty file gives the supply-vessel scenario.
Vectors are comma-separated; ``inf`` is accepted (e.g. ``t_on = inf``).
"""

import hashlib
import json
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from ..integrators import METHODS
from ..vessel_model import ControlConfig, State, VesselParams


class ConfigError(ValueError):
    """Malformed or inconsistent configuration."""


@dataclass
class ExperimentConfig:
    params: VesselParams = field(default_factory=VesselParams)
    ctrl: ControlConfig = field(default_factory=ControlConfig)
    s0: State = field(default_factory=State.initial)
    t_span: tuple = (0.0, 200.0)
    h_list: list = field(default_factory=lambda: [0.05])
    methods: list = field(default_factory=lambda: ["SP4"])
    output_stride: int = 1
    output_path: str = "results"
    activation: str = "split"
    magnus_order: int = None

    def __post_init__(self):
        validate(self)

    def digest(self):
        """Short content hash of everything that influences a trajectory."""
        return hashlib.sha256(json.dumps(self.describe(), sort_keys=True).encode()).hexdigest()[:16]

    def describe(self):
        return {
            "params": self.params.pack().tolist(),
            "ctrl": self.ctrl.pack().tolist(),
            "t_on": float(self.ctrl.t_on),
            "s0": self.s0.to_array().tolist(),
            "t_span": [float(t) for t in self.t_span],
            "activation": self.activation,
            "magnus_order": self.magnus_order,
        }


# section -> key -> (kind, target); kinds: "vec" 3-vector, "num" scalar,
# "int", "list" of floats, "names" list of method names, "str", "bool"
_SCHEMA = {
    "vessel": {
        "T": ("vec", "params"), "m_v": ("num", "params"), "D_r": ("vec", "params"),
        "D_t": ("vec", "params"), "GM_L": ("num", "params"), "GM_T": ("num", "params"),
        "g": ("num", "params"), "rho_w": ("num", "params"), "A_wp": ("num", "params"),
        "z_eq": ("num", "params"),
    },
    "control": {
        "Kp_r": ("vec", "ctrl"), "Kd_r": ("vec", "ctrl"), "Ki_r": ("vec", "ctrl"),
        "Kp_t": ("vec", "ctrl"), "Kd_t": ("vec", "ctrl"), "Ki_t": ("vec", "ctrl"),
        "theta_ref": ("vec", "ctrl"), "x_ref": ("vec", "ctrl"), "t_on": ("num", "ctrl"),
        "w_r2_uses_absolute_theta": ("bool", "ctrl"),
    },
    "initial": {
        "theta0": ("vec", "s0"), "x0": ("vec", "s0"), "omega0": ("vec", "s0"), "v0": ("vec", "s0"),
    },
    "run": {
        "t0": ("num", "run"), "t_end": ("num", "run"), "h_list": ("list", "run"),
        "methods": ("names", "run"), "output_stride": ("int", "run"),
        "output_path": ("str", "run"), "activation": ("str", "run"), "magnus_order": ("int", "run"),
    },
}


def config_keys():
    """``{section: [keys]}``, used for the CLI help text."""
    return {sec: list(keys) for sec, keys in _SCHEMA.items()}


def _parse_value(kind, raw, where):
    try:
        if kind == "num":
            return float(raw)
        if kind == "int":
            return int(raw)
        if kind == "vec":
            vals = [float(t) for t in raw.split(",")]
            if len(vals) != 3:
                raise ValueError(f"expected 3 comma-separated numbers, got {len(vals)}")
            return np.array(vals)
        if kind == "list":
            return [float(t) for t in raw.split(",") if t.strip()]
        if kind == "names":
            return [t.strip() for t in raw.split(",") if t.strip()]
        if kind == "bool":
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError("expected true/false")
        return raw
    except ValueError as exc:
        raise ConfigError(f"{where}: bad value {raw!r} ({exc})") from None


def parse_config(text, source="<string>"):
    """Parse configuration text; see the module docstring for the format."""
    values = {sec: {} for sec in _SCHEMA}
    section = None
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            if section not in _SCHEMA:
                raise ConfigError(f"{source}:{lineno}: unknown section [{section}]")
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {line!r}")
        key, raw = (t.strip() for t in line.split("=", 1))
        if section is None:
            raise ConfigError(f"{source}:{lineno}: key {key!r} outside of a [section]")
        if key not in _SCHEMA[section]:
            allowed = ", ".join(_SCHEMA[section])
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r} in [{section}] (allowed: {allowed})")
        kind, _ = _SCHEMA[section][key]
        values[section][key] = _parse_value(kind, raw, f"{source}:{lineno}: {section}.{key}")
    return _build(values, source)


def _build(values, source):
    try:
        params = VesselParams(**values["vessel"])
        ctrl = ControlConfig(**values["control"])
        s0 = State.initial(**{k: tuple(v) for k, v in values["initial"].items()})
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{source}: {exc}") from None
    run = values["run"]
    kwargs = {}
    if "t0" in run or "t_end" in run:
        kwargs["t_span"] = (run.get("t0", 0.0), run.get("t_end", 200.0))
    for key in ("h_list", "methods", "output_stride", "output_path", "activation", "magnus_order"):
        if key in run:
            kwargs[key] = run[key]
    try:
        return ExperimentConfig(params=params, ctrl=ctrl, s0=s0, **kwargs)
    except ConfigError as exc:
        raise ConfigError(f"{source}: {exc}") from None


def validate(cfg):
    t0, t_end = cfg.t_span
    if not t_end > t0:
        raise ConfigError(f"run.t_end must exceed run.t0 (got {t0}, {t_end})")
    if not cfg.h_list or any(not h > 0 for h in cfg.h_list):
        raise ConfigError(f"run.h_list must be nonempty and positive, got {cfg.h_list}")
    bad = [m for m in cfg.methods if m not in METHODS]
    if bad or not cfg.methods:
        raise ConfigError(f"run.methods: unknown {bad}; allowed {', '.join(METHODS)}")
    if cfg.output_stride < 1:
        raise ConfigError("run.output_stride must be >= 1")
    if cfg.activation not in ("split", "boundary"):
        raise ConfigError(f"run.activation must be 'split' or 'boundary', got {cfg.activation!r}")
    if cfg.magnus_order not in (None, 2, 4, 6):
        raise ConfigError(f"run.magnus_order must be 2, 4 or 6, got {cfg.magnus_order}")


def load_config(path=None):
    """Read a configuration file; ``None`` gives the default scenario."""
    if path is None:
        return ExperimentConfig()
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, str(path))


def default_config_text():
    """The default scenario written out in the config format."""
    cfg = ExperimentConfig()
    p, c, s = cfg.params, cfg.ctrl, cfg.s0

    def vec(a):
        return ", ".join(repr(float(x)) for x in a)

    lines = ["[vessel]"]
    for f in fields(VesselParams):
        val = getattr(p, f.name)
        lines.append(f"{f.name} = {vec(val) if np.ndim(val) else repr(float(val))}")
    lines.append("")
    lines.append("[control]")
    for f in fields(ControlConfig):
        val = getattr(c, f.name)
        if isinstance(val, bool):
            lines.append(f"{f.name} = {str(val).lower()}")
        else:
            lines.append(f"{f.name} = {vec(val) if np.ndim(val) else repr(float(val))}")
    lines += ["", "[initial]", "theta0 = 0.05, -0.02, 0.1", f"x0 = {vec(s.x)}",
              f"omega0 = {vec(s.omega)}", f"v0 = {vec(s.v)}", "",
              "[run]", f"t0 = {cfg.t_span[0]!r}", f"t_end = {cfg.t_span[1]!r}",
              f"h_list = {vec(cfg.h_list)}", f"methods = {', '.join(cfg.methods)}",
              f"output_stride = {cfg.output_stride}", f"output_path = {cfg.output_path}",
              f"activation = {cfg.activation}"]
    return "\n".join(lines) + "\n"
