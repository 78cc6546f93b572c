"""Fast invariant suite on small cutoffs (the ``selftest`` subcommand)."""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .eigensolver import eigendecompose, reconstruction_error
from .gaussian import build_gaussian_unitary
from .model import ModelParams, build_hamiltonian, chiral_defect
from .noise import NoiseSpec, run_noise_study
from .topology import zak_from_components, zak_loop_components


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    value: float
    tolerance: float


def _chiral():
    worst = 0.0
    for p in (ModelParams(1.3, 1.0, 0.7, 0.35, -1.1), ModelParams(0.4, 0.2, -2.0, 1.5, 0.3)):
        worst = max(worst, chiral_defect(build_hamiltonian(p, 40)))
    return Check("chiral anticommutation", worst == 0.0, worst, 0.0)


def _reconstruction():
    worst = 0.0
    for p, method in ((ModelParams(2.0, 1.2, 0.3, 0.6, 1.0), "banded"), (ModelParams(1.0, 0.3, 2.0, 0.9, -0.5), "dense")):
        H = build_hamiltonian(p, 80)
        spec = eigendecompose(H, vectors="all", method=method)
        worst = max(worst, reconstruction_error(H, spec))
    return Check("eigensolver reconstruction / ||H||", worst <= 1e-8, worst, 1e-8)


def _unitarity():
    worst = 0.0
    for kind, value in (("displacement", 1.5 - 0.7j), ("squeeze", 0.6), ("rotation", 0.9)):
        worst = max(worst, build_gaussian_unitary(kind, value, 120).unitarity)
    return Check("Gaussian interior unitarity", worst <= 1e-10, worst, 1e-10)


def _zak_gauge():
    p = ModelParams(1.5, 1.0, 0.2, 0.4, -0.6)
    f_g, f_e = zak_loop_components(p, 1, 1, 64)
    rng = np.random.default_rng(2024)
    base = zak_from_components(f_g, f_e)[0]
    twisted = zak_from_components(
        [f * np.exp(2j * np.pi * rng.random()) for f in f_g],
        [f * np.exp(2j * np.pi * rng.random()) for f in f_e],
    )[0]
    diff = abs(base - twisted)
    return Check("Zak gauge invariance", diff <= 1e-12, diff, 1e-12)


def _rerun():
    base = ModelParams(1.0, 0.5, 0.0, 1.0, 0.0)
    spec = NoiseSpec(0.8, True, 200, 7, audit_rate=0.0)
    a = run_noise_study(base, spec, [1.0, 2.0])
    b = run_noise_study(base, spec, [1.0, 2.0])
    same = repr(a) == repr(b)
    return Check("byte-identical seeded rerun", same, 0.0 if same else 1.0, 0.0)


CHECKS = (_chiral, _reconstruction, _unitarity, _zak_gauge, _rerun)


def run_selftest():
    """Run every check; returns ``(checks, seconds)``."""
    t0 = time.perf_counter()
    results = [check() for check in CHECKS]
    return results, time.perf_counter() - t0


def format_table(results) -> str:
    width = max(len(r.name) for r in results)
    lines = [f"{'check'.ljust(width)}  result  value       tolerance"]
    for r in results:
        lines.append(f"{r.name.ljust(width)}  {'PASS' if r.passed else 'FAIL':6}  {r.value:<10.3e}  {r.tolerance:.1e}")
    return "\n".join(lines)
