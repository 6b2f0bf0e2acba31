"""Run configuration: INI-style text files, or the ``config`` block of a run.json.

Grammar (sections and keys; ``#`` or ``;`` start comments)::

    [trap]
    units = oscillator        # or: physical
    mass = 2.0                # physical only; atom mass
    omega = 1.0               # physical only; trap frequency
    hbar = 1.0                # physical only

    [basis]
    l = 0
    N = 20
    Q = 40                    # optional, defaults to N + 20

    [potential]
    shape = gaussian          # none | gaussian | square_well | contact
    g = 0.2                   # gaussian strength     (energy)
    sigma = 1.0               # gaussian range        (length)
    V0 = -0.3                 # square-well depth     (energy)
    a = 1.0                   # square-well radius    (length)
    g_c = 0.5                 # contact coupling      (energy * length^3)
    scattering_length = 0.01  # informational

    [solve]
    levels = 3
    wavefunctions = 0, 1      # level indices exported as wavefunction_<k>.csv
    grid_points = 600
    r_max = 8.0               # oscillator lengths

    [sweep]
    variable = g              # g | sigma | V0 | a | N
    values = 0.01, 0.02, 0.05 # or: start, stop, num [, spacing = linear|log]
    levels = 1

    [converge]
    ladder = 5, 10, 15, 20    # or: start, stop, step
    levels = 1
    epsilon = 1e-8            # hbar*omega

    [output]
    dir = trapbose_output
    formats = csv, json, svg

With ``units = oscillator`` (default) energies are in hbar*omega and lengths
in b = sqrt(hbar/(mu omega)).  With ``units = physical`` potential parameters
and sweep values are in the units implied by mass, omega and hbar and are
converted on input; results are always reported in oscillator units.
"""

from __future__ import annotations

import configparser
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .interaction import Potential
from .oscillator_basis import TrapModel

SWEEP_VARIABLES = ("g", "sigma", "V0", "a", "N")
FORMATS = ("csv", "json", "svg")
DEFAULT_OUTPUT_DIR = "trapbose_output"

# (dimension of energy, dimension of length) per potential key
_DIMENSIONS = {
    "g": (1, 0), "V0": (1, 0), "g_c": (1, 3),
    "sigma": (0, 1), "a": (0, 1), "scattering_length": (0, 1),
}
_SECTIONS = {
    "trap": {"units", "mass", "omega", "hbar"},
    "basis": {"l", "N", "Q"},
    "potential": {"shape", "g", "sigma", "V0", "a", "g_c", "scattering_length"},
    "solve": {"levels", "wavefunctions", "grid_points", "r_max"},
    "sweep": {"variable", "values", "start", "stop", "num", "spacing", "levels"},
    "converge": {"ladder", "start", "stop", "step", "levels", "epsilon"},
    "output": {"dir", "formats"},
}


class ConfigError(ValueError):
    """Invalid configuration; ``key`` is the dotted name of the offending entry."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


@dataclass
class RunConfig:
    units: str = "oscillator"
    mass: float = 2.0
    omega: float = 1.0
    hbar: float = 1.0
    l: int = 0
    N: int = 20
    Q: int | None = None
    potential: dict = field(default_factory=lambda: {"shape": "none"})
    levels: int = 1
    wavefunctions: list = field(default_factory=lambda: [0])
    grid_points: int = 600
    r_max: float = 8.0
    sweep_variable: str | None = None
    sweep_values: list = field(default_factory=list)
    sweep_levels: int = 1
    ladder: list = field(default_factory=list)
    converge_levels: int = 1
    epsilon: float = 1e-8
    output_dir: str = DEFAULT_OUTPUT_DIR
    formats: list = field(default_factory=lambda: ["csv", "json"])

    def trap(self) -> TrapModel:
        if self.units == "oscillator":
            return TrapModel.oscillator_units()
        return TrapModel(self.mass, self.omega, self.hbar)

    def to_oscillator(self, key: str, value: float) -> float:
        """Convert a potential or sweep parameter from config units."""
        if self.units == "oscillator" or key not in _DIMENSIONS:
            return float(value)
        trap = self.trap()
        e_dim, l_dim = _DIMENSIONS[key]
        return float(value) / (trap.energy_scale**e_dim * trap.length_scale**l_dim)

    def potential_osc(self, overrides: dict | None = None) -> Potential:
        data = dict(self.potential)
        data.update(overrides or {})
        converted = {k: (v if k == "shape" else self.to_oscillator(k, v)) for k, v in data.items()}
        return Potential.from_dict(converted)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = set(cls.__dataclass_fields__)
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(unknown[0], "unknown configuration key")
        cfg = cls(**data)
        validate(cfg)
        return cfg


def _split(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def _as_int(key, text, minimum=None) -> int:
    try:
        value = float(text)
    except (TypeError, ValueError):
        raise ConfigError(key, f"expected an integer, got {text!r}") from None
    if not value.is_integer():
        raise ConfigError(key, f"expected an integer, got {text!r}")
    value = int(value)
    if minimum is not None and value < minimum:
        raise ConfigError(key, f"must be at least {minimum}, got {value}")
    return value


def _as_float(key, text, positive=False) -> float:
    try:
        value = float(text)
    except (TypeError, ValueError):
        raise ConfigError(key, f"expected a number, got {text!r}") from None
    if not math.isfinite(value):
        raise ConfigError(key, f"must be finite, got {text!r}")
    if positive and value <= 0:
        raise ConfigError(key, f"must be positive, got {value!r}")
    return value


def _grid(section, prefix, integer=False) -> list:
    """Explicit comma list or start/stop/(num|step) description."""
    listed_key = "values" if prefix == "sweep" else "ladder"
    if listed_key in section:
        items = _split(section[listed_key])
        if not items:
            raise ConfigError(f"{prefix}.{listed_key}", "grid is empty")
        conv = _as_int if integer else _as_float
        return [conv(f"{prefix}.{listed_key}", t) for t in items]
    if "start" not in section or "stop" not in section:
        raise ConfigError(f"{prefix}.{listed_key}", "give a list or start/stop")
    start = _as_float(f"{prefix}.start", section["start"])
    stop = _as_float(f"{prefix}.stop", section["stop"])
    if prefix == "converge":
        step = _as_int("converge.step", section.get("step", "5"), minimum=1)
        return list(range(int(start), int(stop) + 1, step))
    num = _as_int(f"{prefix}.num", section.get("num", "11"), minimum=1)
    spacing = section.get("spacing", "linear")
    if spacing == "linear":
        values = np.linspace(start, stop, num)
    elif spacing == "log":
        if start <= 0 or stop <= 0:
            raise ConfigError(f"{prefix}.spacing", "log spacing needs positive start and stop")
        values = np.geomspace(start, stop, num)
    else:
        raise ConfigError(f"{prefix}.spacing", f"expected linear or log, got {spacing!r}")
    if integer:
        return [_as_int(f"{prefix}.values", v) for v in np.round(values)]
    return [float(v) for v in values]


def parse_ini(text: str) -> RunConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
    parser.optionxform = str  # keys are case-sensitive (V0, N, Q)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError("config", f"cannot parse: {exc}") from None
    for name in parser.sections():
        if name not in _SECTIONS:
            raise ConfigError(name, "unknown section")
        for key in parser[name]:
            if key not in _SECTIONS[name]:
                raise ConfigError(f"{name}.{key}", "unknown key")

    cfg = RunConfig()
    sec = parser["trap"] if parser.has_section("trap") else {}
    cfg.units = sec.get("units", "oscillator")
    for key in ("mass", "omega", "hbar"):
        if key in sec:
            setattr(cfg, key, _as_float(f"trap.{key}", sec[key], positive=True))

    sec = parser["basis"] if parser.has_section("basis") else {}
    cfg.l = _as_int("basis.l", sec.get("l", "0"))
    cfg.N = _as_int("basis.N", sec.get("N", "20"))
    if "Q" in sec:
        cfg.Q = _as_int("basis.Q", sec["Q"])

    sec = parser["potential"] if parser.has_section("potential") else {}
    pot = {"shape": sec.get("shape", "none")}
    for key in ("g", "sigma", "V0", "a", "g_c", "scattering_length"):
        if key in sec:
            pot[key] = _as_float(f"potential.{key}", sec[key])
    cfg.potential = pot

    sec = parser["solve"] if parser.has_section("solve") else {}
    cfg.levels = _as_int("solve.levels", sec.get("levels", "1"))
    if "wavefunctions" in sec:
        cfg.wavefunctions = [_as_int("solve.wavefunctions", t) for t in _split(sec["wavefunctions"])]
    cfg.grid_points = _as_int("solve.grid_points", sec.get("grid_points", "600"))
    cfg.r_max = _as_float("solve.r_max", sec.get("r_max", "8.0"))

    if parser.has_section("sweep"):
        sec = parser["sweep"]
        if "variable" not in sec:
            raise ConfigError("sweep.variable", "required in the sweep section")
        cfg.sweep_variable = sec["variable"]
        cfg.sweep_values = _grid(sec, "sweep", integer=cfg.sweep_variable == "N")
        cfg.sweep_levels = _as_int("sweep.levels", sec.get("levels", "1"))

    if parser.has_section("converge"):
        sec = parser["converge"]
        cfg.ladder = _grid(sec, "converge", integer=True)
        cfg.converge_levels = _as_int("converge.levels", sec.get("levels", "1"))
        cfg.epsilon = _as_float("converge.epsilon", sec.get("epsilon", "1e-8"), positive=True)

    sec = parser["output"] if parser.has_section("output") else {}
    cfg.output_dir = sec.get("dir", DEFAULT_OUTPUT_DIR)
    if "formats" in sec:
        cfg.formats = _split(sec["formats"])
    validate(cfg)
    return cfg


def validate(cfg: RunConfig) -> None:
    """Raise :class:`ConfigError` naming the first offending key."""
    if cfg.units not in ("oscillator", "physical"):
        raise ConfigError("trap.units", f"expected oscillator or physical, got {cfg.units!r}")
    for key in ("mass", "omega", "hbar"):
        value = getattr(cfg, key)
        if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
            raise ConfigError(f"trap.{key}", f"must be positive, got {value!r}")
    for key, minimum in (("l", 0), ("N", 1), ("levels", 1), ("grid_points", 5)):
        value = getattr(cfg, key)
        section = "basis" if key in ("l", "N") else "solve"
        if not isinstance(value, int) or value < minimum:
            raise ConfigError(f"{section}.{key}", f"must be an integer >= {minimum}, got {value!r}")
    if cfg.Q is not None and (not isinstance(cfg.Q, int) or cfg.Q < cfg.N):
        raise ConfigError("basis.Q", f"must be an integer >= N = {cfg.N}, got {cfg.Q!r}")
    if cfg.levels > cfg.N:
        raise ConfigError("solve.levels", f"cannot exceed basis size N = {cfg.N}")
    for k in cfg.wavefunctions:
        if not isinstance(k, int) or not 0 <= k < cfg.levels:
            raise ConfigError("solve.wavefunctions", f"level index {k!r} outside 0..{cfg.levels - 1}")
    if not (math.isfinite(cfg.r_max) and cfg.r_max > 0):
        raise ConfigError("solve.r_max", f"must be positive, got {cfg.r_max!r}")

    try:
        pot = cfg.potential_osc()
    except KeyError as exc:
        key = str(exc.args[0]).split(":")[0]
        raise ConfigError(f"potential.{key}", str(exc.args[0]).split(": ", 1)[-1]) from None
    except ValueError as exc:
        raise ConfigError("potential", str(exc)) from None
    if pot.shape == "contact" and cfg.l != 0:
        raise ConfigError("basis.l", "contact potential requires l = 0")

    if cfg.sweep_variable is not None:
        var = cfg.sweep_variable
        if var not in SWEEP_VARIABLES:
            raise ConfigError("sweep.variable", f"expected one of {SWEEP_VARIABLES}, got {var!r}")
        if not cfg.sweep_values:
            raise ConfigError("sweep.values", "grid is empty")
        vals = cfg.sweep_values
        if len(vals) > 1 and not (all(b > a for a, b in zip(vals, vals[1:]))
                                  or all(b < a for a, b in zip(vals, vals[1:]))):
            raise ConfigError("sweep.values", "grid must be strictly monotone")
        if var != "N" and _sweep_key(var, pot.shape) is None:
            raise ConfigError("sweep.variable", f"{var!r} is not a parameter of the {pot.shape} potential")
        if var == "N" and (min(vals) < max(cfg.sweep_levels, 1) or any(int(v) != v for v in vals)):
            raise ConfigError("sweep.values", "basis sizes must be integers >= sweep.levels")
        if not isinstance(cfg.sweep_levels, int) or cfg.sweep_levels < 1:
            raise ConfigError("sweep.levels", f"must be a positive integer, got {cfg.sweep_levels!r}")
        if var != "N" and cfg.sweep_levels > cfg.N:
            raise ConfigError("sweep.levels", f"cannot exceed basis size N = {cfg.N}")

    if cfg.ladder:
        if any(not isinstance(n, int) or n < 1 for n in cfg.ladder):
            raise ConfigError("converge.ladder", "entries must be positive integers")
        if any(b <= a for a, b in zip(cfg.ladder, cfg.ladder[1:])):
            raise ConfigError("converge.ladder", "must be strictly ascending")
        if not isinstance(cfg.converge_levels, int) or not 1 <= cfg.converge_levels <= cfg.ladder[0]:
            raise ConfigError("converge.levels", f"must lie in 1..{cfg.ladder[0]}")
        if not (math.isfinite(cfg.epsilon) and cfg.epsilon > 0):
            raise ConfigError("converge.epsilon", f"must be positive, got {cfg.epsilon!r}")

    bad = [f for f in cfg.formats if f not in FORMATS]
    if bad:
        raise ConfigError("output.formats", f"unknown format {bad[0]!r}; expected {FORMATS}")
    if not cfg.output_dir:
        raise ConfigError("output.dir", "must not be empty")


def _sweep_key(variable: str, shape: str) -> str | None:
    """Potential parameter that a sweep variable drives for this shape."""
    if variable == "g":
        return {"gaussian": "g", "contact": "g_c"}.get(shape)
    allowed = {"sigma": "gaussian", "V0": "square_well", "a": "square_well"}
    return variable if allowed.get(variable) == shape else None


def sweep_key(cfg: RunConfig) -> str | None:
    return _sweep_key(cfg.sweep_variable, cfg.potential.get("shape", "none"))


def load_config(path) -> RunConfig:
    """Read an INI config, or a run.json written by a previous run."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc.strerror}") from None
    if path.suffix == ".json" or text.lstrip().startswith("{"):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError("config", f"invalid JSON: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("config", "JSON config must be an object")
        data = data.get("config", data)
        try:
            return RunConfig.from_dict(data)
        except TypeError as exc:
            raise ConfigError("config", str(exc)) from None
    return parse_ini(text)
