"""Monte Carlo robustness of the winding number and spin polarization.

Every realization draws from its own Philox stream keyed by
``(seed, w index, realization index)``, so results do not depend on the
order or grouping in which realizations are evaluated.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import CutoffInsufficientError, InvalidInputError
from .model import ModelParams
from .topology import defect_cutoff, spin_polarization, trajectory_terms, winding_number

MAX_REDRAWS = 64
AUDIT_MAX_CUTOFF = 400


@dataclass(frozen=True)
class NoiseSpec:
    delta_v: float
    phase_noise: bool = False
    realizations: int = 1000
    seed: int = 0
    audit_rate: float = 0.01

    def __post_init__(self):
        if not (math.isfinite(self.delta_v) and self.delta_v >= 0):
            raise InvalidInputError("delta_v must be finite and >= 0")
        if int(self.realizations) != self.realizations or self.realizations < 1:
            raise InvalidInputError("realizations must be a positive integer")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise InvalidInputError("seed must fit in 64 unsigned bits")
        if not 0.0 <= self.audit_rate <= 1.0:
            raise InvalidInputError("audit_rate must lie in [0, 1]")


@dataclass(frozen=True)
class NoiseSummary:
    w: float
    delta_v: float
    mean_winding: float
    mean_polarization: float
    std_error: tuple
    flipped_fraction: float
    realizations: int
    audited: int = 0
    audit_skipped: int = 0


def stream(seed: int, w_index: int, realization: int) -> np.random.Generator:
    """Philox generator for one realization; the key is derived from all three indices."""
    key = np.random.SeedSequence([int(seed), int(w_index), int(realization)]).generate_state(2, np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def draw_sample(base: ModelParams, spec: NoiseSpec, rng: np.random.Generator) -> ModelParams:
    """One noisy parameter set; draws landing exactly on criticality are redrawn."""
    for _ in range(MAX_REDRAWS):
        u = spec.delta_v * rng.random()
        phase = -math.pi + 2.0 * math.pi * rng.random() if spec.phase_noise else base.vr_phase
        sample = base.replace(vr_mag=base.vr_mag + u, vr_phase=phase)
        if not sample.is_critical:
            return sample
    raise InvalidInputError("could not draw a non-critical sample")


def analytic_winding(params: ModelParams) -> int:
    C, R = trajectory_terms(params)
    return 1 if abs(R) > abs(C) else 0


def _audit(sample: ModelParams, winding: int, polarization: int) -> bool:
    """Cross-check against the numerical defect; returns False when the sample is too costly."""
    try:
        cutoff = defect_cutoff(sample)
    except CutoffInsufficientError:
        return False
    if cutoff.n_max > AUDIT_MAX_CUTOFF:
        return False
    result = winding_number(sample, samples=32, oracle=True, oracle_cutoff=cutoff)
    from .eigensolver import defect_state

    pol = defect_state(sample, cutoff).sigma_z_expectation
    if result.oracle_winding != winding or round(pol) != polarization:
        raise AssertionError(
            f"audit mismatch at {sample}: analytic W={winding}, P={polarization}; "
            f"numerical W={result.oracle_winding}, <sigma_z>={pol:.6f}")
    return True


def run_noise_study(base: ModelParams, spec: NoiseSpec, w_list) -> list:
    if base.is_critical:
        raise InvalidInputError("base parameters must be non-critical")
    out = []
    stride = max(1, round(1.0 / spec.audit_rate)) if spec.audit_rate > 0 else 0
    for wi, w in enumerate(w_list):
        at_w = base.replace(w=float(w))
        ref_w, ref_p = analytic_winding(at_w), spin_polarization(at_w)
        wind = np.empty(spec.realizations)
        pol = np.empty(spec.realizations)
        audited = skipped = 0
        for r in range(spec.realizations):
            sample = draw_sample(at_w, spec, stream(spec.seed, wi, r))
            wind[r] = analytic_winding(sample)
            pol[r] = spin_polarization(sample)
            if stride and r % stride == 0:
                if _audit(sample, int(wind[r]), int(pol[r])):
                    audited += 1
                else:
                    skipped += 1
        flipped = float(np.mean((wind != ref_w) | (pol != ref_p)))
        n = spec.realizations
        se = (float(np.std(wind, ddof=1) / math.sqrt(n)) if n > 1 else 0.0,
              float(np.std(pol, ddof=1) / math.sqrt(n)) if n > 1 else 0.0)
        out.append(NoiseSummary(float(w), spec.delta_v, float(np.mean(wind)), float(np.mean(pol)), se,
                                flipped, n, audited, skipped))
    return out
