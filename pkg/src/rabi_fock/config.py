"""Run configuration: ``key = value`` files merged with command-line flags."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import InvalidInputError
from .model import FockCutoff, ModelParams

SUBCOMMANDS = ("spectrum", "zero-mode", "winding", "zak", "wigner", "marker", "noise", "critical", "selftest")


def _float(key, text):
    try:
        value = float(text)
    except (TypeError, ValueError):
        raise InvalidInputError(f"{key}: expected a number, got {text!r}") from None
    if not math.isfinite(value):
        raise InvalidInputError(f"{key}: must be finite")
    return value


def _int(key, text):
    try:
        value = float(text)
    except (TypeError, ValueError):
        raise InvalidInputError(f"{key}: expected an integer, got {text!r}") from None
    if not value.is_integer():
        raise InvalidInputError(f"{key}: expected an integer, got {text!r}")
    return int(value)


def _bool(key, text):
    if isinstance(text, bool):
        return text
    low = str(text).strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise InvalidInputError(f"{key}: expected a boolean, got {text!r}")


def _float_list(key, text):
    if isinstance(text, (list, tuple)):
        return [_float(key, t) for t in text]
    parts = [p for p in str(text).split(",") if p.strip()]
    if not parts:
        raise InvalidInputError(f"{key}: empty list")
    return [_float(key, p) for p in parts]


@dataclass(frozen=True)
class SweepAxis:
    name: str
    start: float
    stop: float
    steps: int
    mask: float = 0.0

    def values(self):
        if self.steps == 1:
            raw = [self.start]
        else:
            raw = [self.start + (self.stop - self.start) * k / (self.steps - 1) for k in range(self.steps)]
        return [v for v in raw if abs(v) > self.mask] if self.mask > 0 else raw

    def spec(self) -> str:
        return f"{self.name}={self.start!r}:{self.stop!r}:{self.steps}"


def parse_sweep(text: str, mask: float = 0.0) -> SweepAxis:
    """``name=start:stop:steps`` (inclusive ends)."""
    try:
        name, rng = str(text).split("=", 1)
        start, stop, steps = rng.split(":")
    except ValueError:
        raise InvalidInputError(f"sweep: expected name=start:stop:steps, got {text!r}") from None
    axis = SweepAxis(name.strip().lower(), _float("sweep", start), _float("sweep", stop), _int("sweep", steps), mask)
    if axis.steps < 1:
        raise InvalidInputError("sweep: steps must be >= 1")
    return axis


# key -> (parser, default)
KEYS = {
    "w": (_float, 1.0),
    "vr_mag": (_float, 0.5),
    "vr_phase": (_float, 0.0),
    "vcr_mag": (_float, 1.0),
    "vcr_phase": (_float, 0.0),
    "cutoff": (_int, 200),
    "sweep": (str, None),
    "mask": (_float, 0.01),
    "levels": (_int, 10),
    "samples": (_int, 64),
    "grid": (_int, 512),
    "level": (_int, 1),
    "sign": (_int, 1),
    "points": (_int, 201),
    "source": (str, "numeric"),
    "spin": (str, "traced"),
    "w_list": (_float_list, None),
    "phi": (_float, 0.0),
    "window_lo": (_float, 0.2),
    "window_hi": (_float, 0.7),
    "zero_assignment": (str, "exclude"),
    "realizations": (_int, 1000),
    "seed": (_int, 0),
    "phase_noise": (_bool, False),
    "audit_rate": (_float, 0.01),
    "q_grid": (str, "-3:3:61"),
    "diagnostic": (_bool, False),
    "threads": (_int, None),
    "output": (str, None),
    "format": (str, "csv"),
}


@dataclass(frozen=True)
class RunConfig:
    subcommand: str
    values: dict
    overrides: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.values[key]

    @property
    def params(self) -> ModelParams:
        v = self.values
        return ModelParams(v["w"], v["vr_mag"], v["vr_phase"], v["vcr_mag"], v["vcr_phase"])

    @property
    def cutoff(self) -> FockCutoff:
        return FockCutoff(self.values["cutoff"])

    @property
    def sweep(self) -> SweepAxis | None:
        s = self.values["sweep"]
        return parse_sweep(s, self.values["mask"]) if s else None

    def echo(self) -> dict:
        return {"subcommand": self.subcommand, **self.values}


def parse_config_text(text: str) -> dict:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidInputError(f"config line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in KEYS:
            raise InvalidInputError(f"config line {lineno}: unknown key {key!r}")
        out[key] = value
    return out


def load_config(path, subcommand: str = "spectrum", flags: dict | None = None) -> RunConfig:
    """Read a config file (may be ``None``) and apply flag overrides."""
    file_values = {}
    if path is not None:
        with open(path, encoding="utf-8") as fh:
            file_values = parse_config_text(fh.read())
    return build_config(subcommand, file_values, flags or {})


def build_config(subcommand: str, file_values: dict, flags: dict) -> RunConfig:
    if subcommand not in SUBCOMMANDS:
        raise InvalidInputError(f"unknown subcommand {subcommand!r}")
    values, overrides = {}, {}
    for key, (parser, default) in KEYS.items():
        raw = default
        if key in file_values:
            raw = file_values[key]
        if flags.get(key) is not None:
            if key in file_values and str(flags[key]) != str(file_values[key]):
                overrides[key] = {"file": file_values[key], "flag": flags[key]}
            raw = flags[key]
        values[key] = raw if raw is None or parser is str else parser(key, raw)
    unknown = set(flags) - set(KEYS)
    if unknown:
        raise InvalidInputError(f"unknown option(s): {sorted(unknown)}")
    _validate(values)
    return RunConfig(subcommand, values, overrides)


def _validate(v: dict):
    for key in ("w", "vr_mag", "vcr_mag"):
        if v[key] < 0:
            raise InvalidInputError(f"{key}: must be >= 0, got {v[key]}")
    if v["cutoff"] < 1:
        raise InvalidInputError(f"cutoff: must be >= 1, got {v['cutoff']}")
    for key in ("samples", "grid", "points", "realizations", "levels"):
        if v[key] < 1:
            raise InvalidInputError(f"{key}: must be >= 1")
    if v["sign"] not in (1, -1):
        raise InvalidInputError("sign: must be +1 or -1")
    if v["mask"] < 0:
        raise InvalidInputError("mask: must be >= 0")
    if v["format"] not in ("csv", "json"):
        raise InvalidInputError("format: must be csv or json")
    if v["source"] not in ("numeric", "analytic"):
        raise InvalidInputError("source: must be numeric or analytic")
    if v["spin"] not in ("traced", "conditioned_g", "conditioned_e"):
        raise InvalidInputError("spin: must be traced, conditioned_g or conditioned_e")
    if v["zero_assignment"] not in ("exclude", "P", "Q"):
        raise InvalidInputError("zero_assignment: must be exclude, P or Q")
    if not 0 <= v["window_lo"] < v["window_hi"] <= 1:
        raise InvalidInputError("window_lo/window_hi: need 0 <= lo < hi <= 1")
    if v["threads"] is not None and v["threads"] < 1:
        raise InvalidInputError("threads: must be >= 1")
    if not 0 <= v["seed"] < 2 ** 64:
        raise InvalidInputError("seed: must fit in 64 unsigned bits")
    if v["sweep"]:
        axis = parse_sweep(v["sweep"], v["mask"])
        if axis.name in ("dv", "delta_v") and any(v["vcr_mag"] + dv < 0 for dv in axis.values()):
            raise InvalidInputError("sweep: |v_r| = vcr_mag + dv would be negative; raise vcr_mag")
