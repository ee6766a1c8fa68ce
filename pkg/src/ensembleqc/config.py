"""Experiment configuration: YAML files with unit-bearing values.

Frequencies are angular: ``"2π×1kHz"`` is 2π·10³ rad/s, a bare ``"20 Hz"`` is
20 s⁻¹ with no 2π. Lengths accept nm/µm/mm/cm/m, densities cm^-3 or m^-3.
Everything is converted to SI on load; the canonical echo holds plain numbers
and parses back to an equal config.
"""
from __future__ import annotations

import copy
import math
import re
from dataclasses import dataclass, field
from typing import Any

import yaml

KINDS = ("dlcz", "double_heralding", "blockade_entangle", "ghz", "fusion",
         "blockade_numerics", "error_budget", "graph_study")


class ConfigError(ValueError):
    """Invalid configuration; ``field`` names the offending entry."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


# ---------------------------------------------------------------------------
# units

_SCALE = {
    "length": {"m": 1.0, "cm": 1e-2, "mm": 1e-3, "um": 1e-6, "µm": 1e-6, "μm": 1e-6, "nm": 1e-9},
    "time": {"s": 1.0, "ms": 1e-3, "us": 1e-6, "µs": 1e-6, "μs": 1e-6, "ns": 1e-9},
    "frequency": {"rad/s": 1.0, "hz": 1.0, "khz": 1e3, "mhz": 1e6, "ghz": 1e9, "1/s": 1.0},
    "rate": {"hz": 1.0, "khz": 1e3, "mhz": 1e6, "1/s": 1.0, "s^-1": 1.0},
    "density": {"m^-3": 1.0, "cm^-3": 1e6},
    "area": {"m^2": 1.0, "cm^2": 1e-4, "um^2": 1e-12, "µm^2": 1e-12, "nm^2": 1e-18},
    "temperature": {"k": 1.0, "mk": 1e-3, "uk": 1e-6, "µk": 1e-6},
    "mass": {"kg": 1.0, "u": 1.66053906660e-27},
    "c6": {"rad/s*m^6": 1.0},
}

_NUM = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*(?:[×x*]\s*10\^?([-+]?\d+))?\s*(.*)$")
_TWO_PI = re.compile(r"^\s*2\s*(?:π|pi)\s*[×x*]?\s*", re.IGNORECASE)


def _normalize_unit(u: str) -> str:
    u = u.strip().replace("⁻³", "^-3").replace("⁻¹", "^-1").replace("²", "^2").replace("−", "-")
    u = u.replace(" ", "")
    return u.lower() if u.lower() in ("hz", "khz", "mhz", "ghz", "k", "mk", "uk", "µk") else u


def parse_quantity(value: Any, dim: str, name: str = "value") -> float:
    """Convert a number or unit string to SI. ``dim=None`` means dimensionless."""
    if isinstance(value, bool):
        raise ConfigError(name, "expected a number, got a boolean")
    if isinstance(value, (int, float)):
        return float(value)
    if not isinstance(value, str):
        raise ConfigError(name, f"expected a number or unit string, got {type(value).__name__}")
    s = value.strip()
    factor = 1.0
    m2 = _TWO_PI.match(s)
    if m2:
        if dim not in ("frequency", "rate"):
            raise ConfigError(name, "the 2π× prefix only applies to frequencies")
        factor = 2 * math.pi
        s = s[m2.end():]
    m = _NUM.match(s)
    if not m:
        raise ConfigError(name, f"cannot parse {value!r}")
    x = float(m.group(1)) * (10.0 ** int(m.group(2)) if m.group(2) else 1.0)
    unit = _normalize_unit(m.group(3))
    if unit:
        if dim is None:
            raise ConfigError(name, f"dimensionless value given unit {unit!r}")
        table = _SCALE[dim]
        key = unit if unit in table else unit.lower() if unit.lower() in table else None
        if key is None:
            raise ConfigError(name, f"unknown {dim} unit {unit!r}")
        x *= table[key]
    return factor * x


# ---------------------------------------------------------------------------
# schemas: name -> (dimension | type, default)

NUM, INT, BOOL, STR, ANY = "num", "int", "bool", "str", "any"

SCHEMAS: dict[str, dict[str, tuple]] = {
    "dlcz": {"p_e": (NUM, 0.01), "eta_D": (NUM, 1.0), "higher_order": (BOOL, False),
             "swap": (BOOL, False), "retrieval": (NUM, 1.0)},
    "double_heralding": {"eta": (NUM, 1.0)},
    "blockade_entangle": {"eta_D": (NUM, 1.0), "eta_S": (NUM, 1.0), "epsilon": (NUM, 0.0),
                          "F_source": (NUM, 1.0), "coincidence_leak": (NUM, 0.0),
                          "variant": (STR, "hom"), "stored": (BOOL, False),
                          "dark_rate": ("rate", 0.0), "window": ("time", 0.0)},
    "ghz": {"Q": (INT, 4), "eta_D": (NUM, 1.0), "eta_S": (NUM, 1.0),
            "dark_rate": ("rate", 0.0), "window": ("time", 0.0)},
    "fusion": {"eta_prime": (NUM, 1.0), "strategy": (STR, "recycle"), "target_size": (INT, 8),
               "block_size": (INT, 4)},
    "blockade_numerics": {"N": (INT, 500), "Omega": ("frequency", None), "B": ("frequency", None),
                          "C6": ("c6", None), "sigma_z": ("length", 3.0e-6),
                          "sigma_xy": ("length", 0.5e-6), "P_decay": (NUM, 0.01),
                          "integrate": (BOOL, False), "classes": (INT, 3), "tol": (NUM, 1e-10)},
    "error_budget": {"wavelength": ("length", None), "gamma0": ("rate", None),
                     "gamma": ("rate", None), "N_i": (NUM, 500.0), "area": ("area", None),
                     "waist": ("length", None), "length": ("length", None),
                     "two_photon_form": (BOOL, False), "gamma_dc": ("rate", 20.0),
                     "t_protocol": ("time", 11.2e-6), "p_success": (NUM, 0.3),
                     "density": ("density", 1e18), "sigma_col": ("area", 1e-18),
                     "temperature": ("temperature", 1e-3), "mass": ("mass", None),
                     "decay_rate": ("rate", 1e3), "decay_time": ("time", None),
                     "noise_overlap": (NUM, 0.0), "mode_mismatch": (NUM, 0.0),
                     "two_photon_absorption": (NUM, 0.0)},
    "graph_study": {"graph": (ANY, None), "measurements": (ANY, []), "compare_to": (ANY, None),
                    "p_link": (NUM, None)},
}

REQUIRED = {
    "blockade_numerics": ("Omega",),
    "error_budget": ("wavelength", "gamma0", "gamma"),
    "graph_study": ("graph",),
}


def _coerce(kind: str, name: str, raw: Any) -> Any:
    typ, _ = SCHEMAS[kind][name]
    path = f"params.{name}"
    if raw is None:
        return None
    if typ == BOOL:
        if not isinstance(raw, bool):
            raise ConfigError(path, "expected true/false")
        return raw
    if typ == INT:
        if isinstance(raw, bool) or not isinstance(raw, (int, float)) or int(raw) != raw:
            raise ConfigError(path, "expected an integer")
        return int(raw)
    if typ == STR:
        if not isinstance(raw, str):
            raise ConfigError(path, "expected a string")
        return raw
    if typ == ANY:
        return _graph_spec(raw, path) if name in ("graph", "compare_to") else copy.deepcopy(raw)
    x = parse_quantity(raw, None if typ == NUM else typ, path)
    if not math.isfinite(x):
        raise ConfigError(path, "must be finite")
    return x


def _graph_spec(raw: Any, path: str) -> dict:
    """Normalise adjacency mappings to ``[[vertex, [neighbours]], ...]`` so the echo is JSON-safe."""
    if not isinstance(raw, dict):
        raise ConfigError(path, "graph must be a mapping")
    out = copy.deepcopy(raw)
    adj = out.get("adjacency")
    if isinstance(adj, dict):
        adj = [[v, list(n or [])] for v, n in adj.items()]
    if adj is not None:
        if not isinstance(adj, list) or not all(isinstance(e, list) and len(e) == 2 for e in adj):
            raise ConfigError(f"{path}.adjacency", "expected vertex -> neighbour list")
        out["adjacency"] = sorted(([v, sorted(n, key=str)] for v, n in adj), key=lambda e: str(e[0]))
    return out


@dataclass
class Sweep:
    parameter: str
    values: list

    def as_dict(self) -> dict:
        return {"parameter": self.parameter, "values": list(self.values)}


@dataclass
class ExperimentConfig:
    kind: str
    params: dict = field(default_factory=dict)
    trials: int = 0
    seed: int = 0
    sweep: Sweep | None = None

    def echo(self) -> dict:
        out = {"kind": self.kind, "params": copy.deepcopy(self.params),
               "trials": self.trials, "seed": self.seed}
        if self.sweep is not None:
            out["sweep"] = self.sweep.as_dict()
        return out

    def with_param(self, name: str, value: Any) -> "ExperimentConfig":
        params = dict(self.params)
        params[name] = _coerce(self.kind, name, value)
        return ExperimentConfig(self.kind, params, self.trials, self.seed, None)


def from_dict(d: dict) -> ExperimentConfig:
    if not isinstance(d, dict):
        raise ConfigError("<root>", "config must be a mapping")
    unknown = set(d) - {"kind", "params", "trials", "seed", "sweep"}
    if unknown:
        raise ConfigError(sorted(unknown)[0], "unknown top-level key")
    kind = d.get("kind")
    if kind not in KINDS:
        raise ConfigError("kind", f"must be one of {', '.join(KINDS)}")
    raw = d.get("params") or {}
    if not isinstance(raw, dict):
        raise ConfigError("params", "must be a mapping")
    schema = SCHEMAS[kind]
    for k in raw:
        if k not in schema:
            raise ConfigError(f"params.{k}", f"not a parameter of {kind}")
    params = {}
    for name, (_, default) in schema.items():
        params[name] = _coerce(kind, name, raw[name]) if name in raw else copy.deepcopy(default)
    for name in REQUIRED.get(kind, ()):
        if params.get(name) is None:
            raise ConfigError(f"params.{name}", "is required")
    trials = d.get("trials", 0)
    if isinstance(trials, bool) or not isinstance(trials, int) or trials < 0:
        raise ConfigError("trials", "must be a non-negative integer")
    seed = d.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < 2**64:
        raise ConfigError("seed", "must be an integer in [0, 2^64)")
    sweep = None
    if d.get("sweep") is not None:
        sw = d["sweep"]
        if not isinstance(sw, dict) or "parameter" not in sw or "values" not in sw:
            raise ConfigError("sweep", "needs 'parameter' and 'values'")
        name = str(sw["parameter"]).removeprefix("params.")
        if name not in schema:
            raise ConfigError("sweep.parameter", f"not a parameter of {kind}")
        if not isinstance(sw["values"], list) or not sw["values"]:
            raise ConfigError("sweep.values", "must be a non-empty list")
        vals = [_coerce(kind, name, v) for v in sw["values"]]
        sweep = Sweep(name, vals)
    return ExperimentConfig(kind, params, trials, seed, sweep)


def loads(text: str) -> ExperimentConfig:
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise ConfigError("<file>", f"not valid YAML: {e}") from None
    return from_dict(data)


def load(path: str) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            return loads(fh.read())
    except OSError as e:
        raise ConfigError("<file>", str(e)) from None
