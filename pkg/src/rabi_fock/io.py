"""Result envelopes and their CSV / JSON serialization.

Floats are written with ``repr`` so every table round-trips exactly.
"""
from __future__ import annotations

import csv
import datetime as _dt
import io
import json
import math
import os
from dataclasses import dataclass, field

from . import __version__
from .errors import InvalidInputError

# payload column schema per subcommand
SCHEMAS = {
    "spectrum": ("delta_v", "level", "numeric_energy", "analytic_energy", "converged"),
    "zero-mode": ("n", "analytic_g", "analytic_e", "numeric_g", "numeric_e"),
    "winding": ("u", "beta_re", "beta_im"),
    "zak": ("n", "sign", "grid", "delta_gamma", "extrapolated", "closed_form", "gamma_g", "gamma_e"),
    "wigner": ("x", "p", "w"),
    "marker": ("w", "delta_v", "site", "local_value", "global_value", "bulk_fluctuation", "zero_levels"),
    "noise": ("w", "delta_v", "mean_winding", "mean_polarization", "se_winding", "se_polarization",
              "flipped_fraction", "audited", "audit_skipped"),
    "critical": ("q", "energy_plus", "energy_minus"),
    "selftest": ("check", "passed", "value", "tolerance"),
}


@dataclass
class ResultEnvelope:
    subcommand: str
    rows: list
    config: dict = field(default_factory=dict)
    certificates: dict = field(default_factory=dict)
    overrides: dict = field(default_factory=dict)
    timestamp: str = field(default_factory=lambda: _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"))

    @property
    def columns(self):
        return SCHEMAS[self.subcommand]

    def metadata(self) -> dict:
        return {
            "subcommand": self.subcommand,
            "version": __version__,
            "timestamp": self.timestamp,
            "config": self.config,
            "overrides": self.overrides,
            "certificates": self.certificates,
            "columns": list(self.columns),
        }


def _cell(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def to_csv(env: ResultEnvelope) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(env.columns)
    for row in env.rows:
        if len(row) != len(env.columns):
            raise InvalidInputError(f"row {row} does not match schema {env.columns}")
        writer.writerow([_cell(v) for v in row])
    return buf.getvalue()


def _jsonable(value):
    if isinstance(value, float) and not math.isfinite(value):
        return repr(value)
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if hasattr(value, "item"):
        return value.item()
    return value


def to_json(env: ResultEnvelope) -> str:
    doc = {"metadata": env.metadata(), "rows": [list(r) for r in env.rows]}
    return json.dumps(_jsonable(doc), indent=1, sort_keys=False) + "\n"


def _parse_cell(text: str):
    if text in ("true", "false"):
        return text == "true"
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def read_csv(text: str):
    """``(columns, rows)`` parsed back from :func:`to_csv` output."""
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    return tuple(header), [[_parse_cell(c) for c in row] for row in reader]


def read_json(text: str):
    doc = json.loads(text)
    return doc["metadata"], doc["rows"]


def check_writable(path: str):
    directory = os.path.dirname(os.path.abspath(path)) or "."
    if not os.path.isdir(directory) or not os.access(directory, os.W_OK):
        raise InvalidInputError(f"output path {path!r} is not writable")


def write(env: ResultEnvelope, path: str | None, fmt: str = "csv") -> list:
    """Write the envelope; CSV gets a ``.meta.json`` sidecar. Returns written paths."""
    if path is None:
        return []
    check_writable(path)
    if fmt == "json":
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(to_json(env))
        return [path]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(to_csv(env))
    meta = path + ".meta.json"
    with open(meta, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(_jsonable(env.metadata()), fh, indent=1)
        fh.write("\n")
    return [path, meta]
