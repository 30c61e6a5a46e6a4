"""Run configuration: TOML files with mandatory unit suffixes.

Every dimensional value is a string ``"<number> <unit>"``; bare numbers are
accepted only for dimensionless keys.  Unknown sections or keys are errors.
A parsed :class:`RunConfig` holds canonical values (MHz, ns, bohr, W/cm^2,
MHz/ns, uK, debye, amu) and echoes back to TOML that re-parses to an equal
object.
"""

from __future__ import annotations

import hashlib
import json
import math
import re
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import tomli
import tomli_w

from . import units
from .basis import MANIFOLDS
from .ensemble import ALIGNMENT_FLOOR, EnsembleSpec
from .model import CALIBRATED_GROUND, SHIPPED_EXCITED, TARGET_BINDING_MHZ, TARGET_BV_MHZ, ModelSpec
from .propagate import PropagationControls
from .pulse import DEFAULT_MU0_DEBYE, PulseSpec, make_train
from .radial import (
    PotentialCurve,
    calibrate_model_potential,
    harmonic_curve,
    load_tabulated,
    morse_curve,
)

__all__ = [
    "ConfigError",
    "RunConfig",
    "Axis",
    "UNITS",
    "parse_quantity",
    "format_quantity",
    "load_config",
    "parse_config",
    "AXIS_KEYS",
    "SWEEP_OUTPUTS",
]


class ConfigError(ValueError):
    """Invalid configuration: syntax, unknown key, missing unit, bad value."""


_BOHR_ANGSTROM = units.BOHR_M * 1e10

#: unit tables: quantity -> {suffix: factor to the canonical unit (first entry)}
UNITS = {
    "energy": {"MHz": 1.0, "GHz": 1e3, "kHz": 1e-3, "Hz": 1e-6},
    "time": {"ns": 1.0, "ps": 1e-3, "us": 1e3},
    "length": {"bohr": 1.0, "a0": 1.0, "angstrom": 1.0 / _BOHR_ANGSTROM, "nm": 10.0 / _BOHR_ANGSTROM},
    "inverse_length": {"1/bohr": 1.0, "1/angstrom": _BOHR_ANGSTROM},
    "intensity": {"W/cm2": 1.0, "kW/cm2": 1e3, "MW/cm2": 1e6, "W/m2": 1e-4},
    "chirp": {"MHz/ns": 1.0, "GHz/ns": 1e3},
    "temperature": {"uK": 1.0, "nK": 1e-3, "mK": 1e3, "K": 1e6},
    "dipole": {"D": 1.0, "debye": 1.0},
    "mass": {"amu": 1.0, "u": 1.0},
    "rate": {"1/ns": 1.0, "1/us": 1e-3},
}

_QUANTITY = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*(\S+)\s*$")


def parse_quantity(text, quantity: str, key: str = "value") -> float:
    """``"10 ns"`` -> 10.0 in the canonical unit of ``quantity``."""
    table = UNITS[quantity]
    if isinstance(text, bool) or not isinstance(text, str):
        raise ConfigError(f"{key}: {text!r} needs a unit suffix, e.g. '1 {next(iter(table))}'")
    m = _QUANTITY.match(text)
    if not m:
        raise ConfigError(f"{key}: cannot read {text!r}; expected '<number> <unit>' with unit in {sorted(table)}")
    number, unit = m.groups()
    if unit not in table:
        raise ConfigError(f"{key}: unit {unit!r} is not a {quantity} unit; use one of {sorted(table)}")
    value = float(number) * table[unit]
    if not math.isfinite(value):
        raise ConfigError(f"{key}: {text!r} is not finite")
    return value


def format_quantity(value: float, quantity: str) -> str:
    return f"{value!r} {next(iter(UNITS[quantity]))}"


# ---------------------------------------------------------------------------
# schema: section -> key -> (kind, default); kind is a unit quantity or a type


_GROUND_KINDS = ("model", "file", "harmonic", "morse")
_EXCITED_KINDS = ("model", "file")

SCHEMA = {
    "potential": {
        "ground": ("choice", "model", _GROUND_KINDS),
        "ground_file": ("str", ""),
        "binding": ("energy", TARGET_BINDING_MHZ),
        "rotational_constant": ("energy", TARGET_BV_MHZ),
        "target_level_from_top": ("int", 1),
        "excited": ("choice", "model", _EXCITED_KINDS),
        "excited_file": ("str", ""),
        "intermediate_level": ("int", 31),
        "mass": ("mass", units.RB87_REDUCED_MASS_AMU),
        "harmonic_spacing": ("energy", 1000.0),
        "harmonic_center": ("length", 200.0),
        "morse_depth": ("energy", 1e5),
        "morse_center": ("length", 20.0),
        "morse_range": ("inverse_length", 0.3),
    },
    "grid": {
        "r_max": ("length", 1000.0),
        "beta": ("float", 3.0),
    },
    "basis": {
        "j_max": ("int", 5),
        "n_box": ("int", 64),
        "scattering_omegas": ("int_list", (0,)),
        "intermediate_omegas": ("int_list", (0,)),
        "target_omegas": ("int_list", (0,)),
    },
    "ensemble": {
        "temperature": ("temperature", 100.0),
        "parities": ("str_list", ("even", "odd")),
        "nuclear_spin": ("float", 1.5),
        "weight_cutoff": ("float", 1e-6),
        "alignment_floor": ("float", ALIGNMENT_FLOOR),
    },
    "pulse": {
        "intensity": ("intensity", 1000.0),
        "sigma": ("time", 10.0),
        "chirp": ("chirp", 0.0),
        "center": ("time", 0.0),
        "detuning": ("energy", 0.0),
        "dipole": ("dipole", DEFAULT_MU0_DEBYE),
    },
    "train": {
        "n_pulses": ("int", 1),
        "delay": ("time", 50.0),
    },
    "propagation": {
        "rtol": ("float", 1e-10),
        "atol": ("float", 1e-12),
        "norm_drift": ("rate", 1e-8),
        "tail_periods": ("float", 2.0),
        "stride": ("time", 0.05),
        "record_pulse": ("bool", True),
        "method": ("choice", "direct", ("direct", "composed")),
    },
    "eigen": {
        "n_levels": ("int", 10),
        "tolerance": ("energy", 1e-3),
    },
    "output": {
        "point_traces": ("bool", False),
    },
}

SWEEP_OUTPUTS = ("final_population", "static_alignment", "dynamic_amplitude")

#: sweepable keys; short axis names map to "section.key"
AXIS_KEYS = {
    "intensity": "pulse.intensity",
    "sigma": "pulse.sigma",
    "chirp": "pulse.chirp",
    "detuning": "pulse.detuning",
    "dipole": "pulse.dipole",
    "delay": "train.delay",
    "n_pulses": "train.n_pulses",
    "temperature": "ensemble.temperature",
}


def _kind_of(section, key):
    return SCHEMA[section][key][0]


def _parse_value(section, key, raw):
    spec = SCHEMA[section][key]
    kind, name = spec[0], f"{section}.{key}"
    if kind in UNITS:
        return parse_quantity(raw, kind, name)
    if kind == "int":
        if isinstance(raw, bool) or not isinstance(raw, int):
            raise ConfigError(f"{name}: expected an integer, got {raw!r}")
        return raw
    if kind == "float":
        if isinstance(raw, bool) or not isinstance(raw, (int, float)):
            raise ConfigError(f"{name}: expected a dimensionless number, got {raw!r}")
        if not math.isfinite(raw):
            raise ConfigError(f"{name}: {raw!r} is not finite")
        return float(raw)
    if kind == "bool":
        if not isinstance(raw, bool):
            raise ConfigError(f"{name}: expected true or false, got {raw!r}")
        return raw
    if kind == "str":
        if not isinstance(raw, str):
            raise ConfigError(f"{name}: expected a string, got {raw!r}")
        return raw
    if kind == "choice":
        if raw not in spec[2]:
            raise ConfigError(f"{name}: {raw!r} is not one of {list(spec[2])}")
        return raw
    if kind == "int_list":
        if not isinstance(raw, list) or not all(isinstance(x, int) and not isinstance(x, bool) for x in raw):
            raise ConfigError(f"{name}: expected a list of integers, got {raw!r}")
        return tuple(sorted(set(raw)))
    if kind == "str_list":
        if not isinstance(raw, list) or not all(isinstance(x, str) for x in raw):
            raise ConfigError(f"{name}: expected a list of strings, got {raw!r}")
        return tuple(sorted(set(raw)))
    raise AssertionError(kind)


def _format_value(section, key, value):
    kind = _kind_of(section, key)
    if kind in UNITS:
        return format_quantity(value, kind)
    if kind in ("int_list", "str_list"):
        return list(value)
    return value


# ---------------------------------------------------------------------------
# sweep axes


@dataclass(frozen=True)
class Axis:
    """One sweep axis: a canonical "section.key" name and sorted unique values."""

    name: str
    values: tuple

    def __post_init__(self):
        if self.name not in AXIS_KEYS.values():
            raise ConfigError(f"axis {self.name!r} is not sweepable; choose from {sorted(AXIS_KEYS)}")
        if not self.values:
            raise ConfigError(f"axis {self.name}: no values")
        if any(not math.isfinite(v) for v in self.values):
            raise ConfigError(f"axis {self.name}: values must be finite")
        vals = tuple(sorted(set(self.values)))
        object.__setattr__(self, "values", vals)

    @property
    def short(self) -> str:
        return self.name.split(".", 1)[1]


def _range_values(start, stop, step, name):
    if step <= 0:
        raise ConfigError(f"axis {name}: step must be positive")
    if stop < start:
        raise ConfigError(f"axis {name}: stop is below start")
    n = int(math.floor((stop - start) / step + 1e-9))
    # index-based values (no accumulation), rounded to kill float fuzz
    return tuple(float(f"{start + k * step:.12g}") for k in range(n + 1))


def _parse_axis(raw: dict) -> Axis:
    if not isinstance(raw, dict):
        raise ConfigError("sweep.axis entries must be tables")
    extra = set(raw) - {"name", "values", "start", "stop", "step"}
    if extra:
        raise ConfigError(f"sweep.axis: unknown keys {sorted(extra)}")
    short = raw.get("name")
    if short not in AXIS_KEYS and short not in AXIS_KEYS.values():
        raise ConfigError(f"sweep.axis: name {short!r} is not sweepable; choose from {sorted(AXIS_KEYS)}")
    full = AXIS_KEYS.get(short, short)
    section, key = full.split(".")
    has_values = "values" in raw
    has_range = any(k in raw for k in ("start", "stop", "step"))
    if has_values == has_range:
        raise ConfigError(f"sweep.axis {short}: give either 'values' or 'start'/'stop'/'step'")
    if has_values:
        if not isinstance(raw["values"], list):
            raise ConfigError(f"sweep.axis {short}: values must be a list")
        values = tuple(_parse_value(section, key, v) for v in raw["values"])
        if not values:
            raise ConfigError(f"sweep.axis {short}: empty axis")
    else:
        missing = {"start", "stop", "step"} - set(raw)
        if missing:
            raise ConfigError(f"sweep.axis {short}: missing {sorted(missing)}")
        start, stop, step = (_parse_value(section, key, raw[k]) for k in ("start", "stop", "step"))
        values = _range_values(start, stop, step, short)
        if _kind_of(section, key) == "int":
            values = tuple(int(round(v)) for v in values)
    return Axis(full, values)


# ---------------------------------------------------------------------------
# resolved configuration


@dataclass(frozen=True)
class RunConfig:
    """Canonical configuration; ``values[section][key]`` in canonical units."""

    values: dict = field(default_factory=dict)
    axes: tuple = ()
    outputs: tuple = SWEEP_OUTPUTS
    workers: int = 1
    base_dir: str = field(default=".", compare=False)

    def __getitem__(self, dotted: str):
        section, key = dotted.split(".")
        return self.values[section][key]

    def replace(self, **changes) -> "RunConfig":
        """Copy with ``{"pulse.sigma": 7.0, ...}``-style overrides (keys with dots)."""
        vals = {s: dict(v) for s, v in self.values.items()}
        for dotted, value in changes.items():
            section, key = dotted.split(".")
            if key not in SCHEMA.get(section, {}):
                raise ConfigError(f"unknown key {dotted}")
            vals[section][key] = value
        return RunConfig(vals, self.axes, self.outputs, self.workers, self.base_dir)

    def point(self, assignment: dict) -> "RunConfig":
        """Configuration of one sweep point: overrides applied, no sweep section."""
        cfg = self.replace(**assignment)
        return RunConfig(cfg.values, (), SWEEP_OUTPUTS, 1, self.base_dir)

    # -- serialization ----------------------------------------------------

    def to_dict(self) -> dict:
        out = {s: {k: _format_value(s, k, v) for k, v in sec.items()} for s, sec in self.values.items()}
        if self.axes:
            out["sweep"] = {
                "outputs": list(self.outputs),
                "workers": self.workers,
                "axis": [
                    {"name": ax.short, "values": [_format_value(*ax.name.split("."), v) for v in ax.values]}
                    for ax in self.axes
                ],
            }
        return out

    def to_toml(self) -> str:
        return tomli_w.dumps(self.to_dict())

    def canonical_json(self) -> str:
        data = {"values": self.values, "axes": [[a.name, list(a.values)] for a in self.axes], "outputs": list(self.outputs)}
        return json.dumps(data, sort_keys=True, default=list)

    @property
    def hash(self) -> str:
        """Hash of the physics content (worker count excluded)."""
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()[:16]

    # -- physics objects --------------------------------------------------

    def _path(self, p: str) -> Path:
        path = Path(p)
        return path if path.is_absolute() else Path(self.base_dir) / path

    def ground_curve(self) -> PotentialCurve:
        v = self.values["potential"]
        kind = v["ground"]
        if kind == "model":
            return _calibrated_ground(v["binding"], v["rotational_constant"], v["target_level_from_top"], v["mass"])
        if kind == "file":
            return _load_curve(self._path(v["ground_file"]), "potential.ground_file")
        if kind == "harmonic":
            # omega = spacing (atomic units), force constant k = m omega^2
            omega_au = units.mhz_to_hartree(v["harmonic_spacing"])
            k_au = units.amu_to_me(v["mass"]) * omega_au**2
            return harmonic_curve(k_au * units.HARTREE_GHZ, v["harmonic_center"])
        return morse_curve(v["morse_depth"] * 1e-3, v["morse_center"], v["morse_range"])

    def excited_curve(self) -> PotentialCurve:
        v = self.values["potential"]
        if v["excited"] == "file":
            return _load_curve(self._path(v["excited_file"]), "potential.excited_file")
        return SHIPPED_EXCITED

    def model_spec(self) -> ModelSpec:
        v, b, g = self.values["potential"], self.values["basis"], self.values["grid"]
        if v["ground"] in ("harmonic", "morse"):
            raise ConfigError(f"potential.ground = {v['ground']!r} is a test curve; only 'eigen' accepts it")
        return ModelSpec(
            ground=self.ground_curve(),
            excited=self.excited_curve(),
            target_level_from_top=v["target_level_from_top"],
            intermediate_level=v["intermediate_level"],
            mass_amu=v["mass"],
            j_max=b["j_max"],
            n_box=b["n_box"],
            r_max_bohr=g["r_max"],
            beta=g["beta"],
            omegas=tuple((m, b[f"{m}_omegas"]) for m in MANIFOLDS),
        )

    def ensemble_spec(self) -> EnsembleSpec:
        e = self.values["ensemble"]
        return EnsembleSpec(
            temperature_uk=e["temperature"],
            nuclear_spin=e["nuclear_spin"],
            parities=e["parities"],
            weight_cutoff=e["weight_cutoff"],
        )

    def pulse(self) -> PulseSpec:
        p = self.values["pulse"]
        return PulseSpec(p["intensity"], p["sigma"], p["chirp"], p["center"], p["detuning"])

    def pulses(self) -> tuple:
        t = self.values["train"]
        return make_train(self.pulse(), t["n_pulses"], t["delay"])

    @property
    def mu0_debye(self) -> float:
        return self.values["pulse"]["dipole"]

    def controls(self) -> PropagationControls:
        p = self.values["propagation"]
        return PropagationControls(rtol=p["rtol"], atol=p["atol"], norm_drift_per_ns=p["norm_drift"])


@lru_cache(maxsize=8)
def _calibrated_ground(binding, bv, level_from_top, mass):
    if (binding, bv, level_from_top, mass) == (TARGET_BINDING_MHZ, TARGET_BV_MHZ, 1, units.RB87_REDUCED_MASS_AMU):
        return CALIBRATED_GROUND
    return calibrate_model_potential(binding, bv, initial=CALIBRATED_GROUND, level=level_from_top, mass_amu=mass)


def _load_curve(path: Path, key: str) -> PotentialCurve:
    try:
        return load_tabulated(path)
    except FileNotFoundError as exc:
        raise ConfigError(f"{key}: file not found: {path}") from exc
    except ValueError as exc:
        raise ConfigError(f"{key}: {exc}") from exc


def _check_values(values: dict):
    b, e, t, p = values["basis"], values["ensemble"], values["train"], values["pulse"]
    if b["j_max"] < 0 or b["n_box"] < 1:
        raise ConfigError("basis.j_max must be >= 0 and basis.n_box >= 1")
    if values["grid"]["r_max"] <= 0 or values["grid"]["beta"] <= 0:
        raise ConfigError("grid.r_max and grid.beta must be positive")
    if not set(e["parities"]) <= {"even", "odd"} or not e["parities"]:
        raise ConfigError("ensemble.parities must be a non-empty subset of ['even', 'odd']")
    if e["temperature"] < 0:
        raise ConfigError("ensemble.temperature must be >= 0")
    if p["intensity"] < 0 or p["sigma"] <= 0:
        raise ConfigError("pulse.intensity must be >= 0 and pulse.sigma > 0")
    if t["n_pulses"] < 1:
        raise ConfigError("train.n_pulses must be >= 1")
    if values["propagation"]["stride"] <= 0:
        raise ConfigError("propagation.stride must be positive")
    for key in ("rtol", "atol", "norm_drift"):
        if values["propagation"][key] <= 0:
            raise ConfigError(f"propagation.{key} must be positive")
    g = values["potential"]
    for kind, fkey in (("ground", "ground_file"), ("excited", "excited_file")):
        if g[kind] == "file" and not g[fkey]:
            raise ConfigError(f"potential.{kind} = 'file' needs potential.{fkey}")


def parse_config(data: dict, base_dir: str = ".") -> RunConfig:
    """Validate a decoded TOML mapping and resolve it to canonical values."""
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a table")
    unknown = set(data) - set(SCHEMA) - {"sweep"}
    if unknown:
        raise ConfigError(f"unknown section(s) {sorted(unknown)}; known: {sorted(SCHEMA) + ['sweep']}")
    values = {}
    for section, keys in SCHEMA.items():
        raw = data.get(section, {})
        if not isinstance(raw, dict):
            raise ConfigError(f"[{section}] must be a table")
        extra = set(raw) - set(keys)
        if extra:
            raise ConfigError(f"[{section}]: unknown key(s) {sorted(extra)}; known: {sorted(keys)}")
        values[section] = {k: (_parse_value(section, k, raw[k]) if k in raw else spec[1]) for k, spec in keys.items()}
    _check_values(values)
    axes, outputs, workers = (), SWEEP_OUTPUTS, 1
    if "sweep" in data:
        sw = data["sweep"]
        if not isinstance(sw, dict):
            raise ConfigError("[sweep] must be a table")
        extra = set(sw) - {"axis", "outputs", "workers"}
        if extra:
            raise ConfigError(f"[sweep]: unknown key(s) {sorted(extra)}")
        raw_axes = sw.get("axis", [])
        if not isinstance(raw_axes, list) or not raw_axes:
            raise ConfigError("[sweep] needs at least one [[sweep.axis]]")
        axes = tuple(_parse_axis(a) for a in raw_axes)
        names = [a.name for a in axes]
        if len(set(names)) != len(names):
            raise ConfigError(f"[sweep]: repeated axis in {names}")
        outputs = sw.get("outputs", list(SWEEP_OUTPUTS))
        if not isinstance(outputs, list) or not outputs or not set(outputs) <= set(SWEEP_OUTPUTS):
            raise ConfigError(f"sweep.outputs must be a non-empty subset of {list(SWEEP_OUTPUTS)}")
        outputs = tuple(o for o in SWEEP_OUTPUTS if o in outputs)
        workers = sw.get("workers", 1)
        if isinstance(workers, bool) or not isinstance(workers, int) or workers < 1:
            raise ConfigError("sweep.workers must be a positive integer")
    return RunConfig(values, axes, outputs, workers, base_dir)


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror or exc}") from exc
    try:
        data = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return parse_config(data, base_dir=str(path.parent))
