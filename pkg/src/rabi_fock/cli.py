"""Command-line front end: ``rabi-fock <subcommand> [options]``.

Exit codes: 0 success, 2 invalid input, 3 failed numerical certificate.
"""
from __future__ import annotations

import argparse
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import io as rio
from .config import KEYS, SUBCOMMANDS, RunConfig, build_config, parse_config_text, parse_sweep
from .errors import CriticalityError, InvalidInputError, RabiFockError, WrongRegimeError

log = logging.getLogger("rabi_fock")

EXIT_OK, EXIT_INVALID, EXIT_CERTIFICATE = 0, 2, 3
THREADS_ENV = "RABI_FOCK_THREADS"

_FLAGS = {
    # flag -> config key
    "--w": "w", "--vr": "vr_mag", "--vr-phase": "vr_phase", "--vcr": "vcr_mag", "--vcr-phase": "vcr_phase",
    "--cutoff": "cutoff", "--sweep": "sweep", "--mask": "mask", "--levels": "levels", "--samples": "samples",
    "--grid": "grid", "--level": "level", "--sign": "sign", "--points": "points", "--source": "source",
    "--spin": "spin", "--w-list": "w_list", "--phi": "phi", "--window-lo": "window_lo",
    "--window-hi": "window_hi", "--zero-assignment": "zero_assignment", "--realizations": "realizations",
    "--seed": "seed", "--audit-rate": "audit_rate", "--q-grid": "q_grid", "--threads": "threads",
    "--output": "output", "--format": "format",
}
_SWITCHES = {"--phase-noise": "phase_noise", "--diagnostic": "diagnostic"}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_INVALID)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="rabi-fock", description="Generalized quantum Rabi model on a Fock-state lattice.")
    parser.add_argument("subcommand", choices=SUBCOMMANDS)
    parser.add_argument("--config", help="key = value configuration file")
    parser.add_argument("-v", "--verbose", action="store_true")
    for flag, key in _FLAGS.items():
        parser.add_argument(flag, dest=key, default=None, metavar=key.upper())
    for flag, key in _SWITCHES.items():
        parser.add_argument(flag, dest=key, action="store_const", const=True, default=None)
    return parser


def _threads(cfg: RunConfig) -> int:
    if cfg["threads"] is not None:
        return cfg["threads"]
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            value = int(env)
        except ValueError:
            raise InvalidInputError(f"{THREADS_ENV}={env!r} is not an integer") from None
        if value < 1:
            raise InvalidInputError(f"{THREADS_ENV} must be >= 1")
        return value
    return 1


def _ordered_map(fn, items, threads: int):
    """Map in input order; worker count never changes the result order."""
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


# -- workers (module level so they pickle) -------------------------------------

def _spectrum_point(job):
    from .eigensolver import converged_levels
    from .model import ModelParams

    dv, values = job
    vcr = values["vcr_mag"]
    params = ModelParams(values["w"], vcr + dv, values["vr_phase"], vcr, values["vcr_phase"])
    n_max = values["cutoff"]
    res = converged_levels(params, (n_max, 2 * n_max))
    lam = res.eigenvalues
    scale = max(float(np.max(np.abs(lam))), 1.0)
    positive = np.sort(lam[lam > 1e-9 * scale])
    d2 = abs(params.vr_mag ** 2 - params.vcr_mag ** 2)
    rows = [[dv, 0, float(np.min(np.abs(lam))), 0.0, True]]
    for n in range(1, values["levels"] + 1):
        num = float(positive[n - 1]) if n - 1 < positive.size else math.nan
        rows.append([dv, n, num, math.sqrt(d2 * n), n <= res.converged_count])
    return rows, {"delta_v": dv, "converged_count": res.converged_count, "flags": list(res.flags)}


def _marker_point(job):
    from .markers import local_marker, sweep_params

    w, dv, values = job
    prof = local_marker(sweep_params(w, dv, values["phi"], values["vcr_mag"]), values["cutoff"],
                        window=(values["window_lo"], values["window_hi"]),
                        zero_assignment=values["zero_assignment"])
    return [[w, dv, n, float(v), prof.global_value, prof.bulk_fluctuation, prof.zero_levels]
            for n, v in enumerate(prof.local_values)]


def _noise_point(job):
    from .model import ModelParams
    from .noise import NoiseSpec, run_noise_study

    dv, values = job
    base = ModelParams(values["w"], values["vr_mag"], values["vr_phase"], values["vcr_mag"], values["vcr_phase"])
    spec = NoiseSpec(dv, bool(values["phase_noise"]), values["realizations"], values["seed"], values["audit_rate"])
    w_list = values["w_list"] or [values["w"]]
    return [[s.w, s.delta_v, s.mean_winding, s.mean_polarization, s.std_error[0], s.std_error[1],
             s.flipped_fraction, s.audited, s.audit_skipped] for s in run_noise_study(base, spec, w_list)]


# -- handlers ------------------------------------------------------------------

def _cmd_spectrum(cfg: RunConfig):
    axis = cfg.sweep
    if axis is not None and axis.name not in ("dv", "delta_v"):
        raise InvalidInputError("spectrum sweeps dv (|v_r| - |v_cr|)")
    points = axis.values() if axis else [cfg["vr_mag"] - cfg["vcr_mag"]]
    results = _ordered_map(_spectrum_point, [(dv, cfg.values) for dv in points], _threads(cfg))
    rows = [r for block, _ in results for r in block]
    return rows, {"convergence": [meta for _, meta in results], "cutoffs": [cfg["cutoff"], 2 * cfg["cutoff"]]}


def _cmd_zero_mode(cfg: RunConfig):
    from .eigensolver import defect_state
    from .gaussian import analytic_eigenstate, eigen_residual
    from .model import spin_components
    from .topology import spin_polarization

    params, cutoff = cfg.params, cfg.cutoff
    psi = analytic_eigenstate(params, 0, 1, cutoff)
    defect = defect_state(params, cutoff)
    ag, ae = (np.abs(c) ** 2 for c in spin_components(psi))
    ng, ne = (np.abs(c) ** 2 for c in spin_components(defect.state))
    rows = [[n, float(ag[n]), float(ae[n]), float(ng[n]), float(ne[n])] for n in range(cutoff.n_levels)]
    certs = {
        "analytic_residual": eigen_residual(params, psi, 0.0),
        "numeric_sigma_z": defect.sigma_z_expectation,
        "predicted_polarization": spin_polarization(params),
        "overlap": abs(psi.inner(defect.state)),
        "numeric_energy": defect.energy,
    }
    return rows, certs


def _cmd_winding(cfg: RunConfig):
    from .topology import trajectory, winding_number

    params = cfg.params
    res = winding_number(params, cfg["samples"], diagnostic=bool(cfg["diagnostic"]))
    traj = trajectory(params, max(cfg["samples"], 16))
    rows = [[float(u), float(z.real), float(z.imag)] for u, z in zip(traj.loop_parameter, traj.points)]
    certs = {
        "winding": res.winding, "contour_integral_value": res.contour_integral_value,
        "method_agreement": list(res.method_agreement), "circle": res.circle_winding,
        "contour": res.contour_winding, "oracle": res.oracle_winding,
        "literal_alpha_winding": res.literal_alpha_winding,
        "center_C": [traj.center_C.real, traj.center_C.imag],
        "radius_term_R": [traj.radius_term_R.real, traj.radius_term_R.imag],
    }
    return rows, certs


def _cmd_zak(cfg: RunConfig):
    from .topology import zak_phase, zak_phase_closed_form

    params = cfg.params
    res = zak_phase(params, cfg["level"], cfg["sign"], cfg["grid"])
    closed = zak_phase_closed_form(params)
    row = [cfg["level"], cfg["sign"], res.grid_size, res.delta_gamma, res.extrapolated, closed,
           res.gamma_g, res.gamma_e]
    return [row], {"branch_note": res.branch_note}


def _cmd_wigner(cfg: RunConfig):
    from .eigensolver import defect_state
    from .gaussian import analytic_eigenstate
    from .phase_space import SpinTreatment, auto_grid, moments, wigner

    params, cutoff = cfg.params, cfg.cutoff
    if cfg["source"] == "numeric":
        state = defect_state(params, cutoff).state
    else:
        state = analytic_eigenstate(params, cfg["level"] if cfg["level"] else 0, cfg["sign"], cutoff)
    treatment = SpinTreatment(cfg["spin"])
    summary = moments(state, treatment)
    grid = auto_grid(summary, cfg["points"])
    W = wigner(state, grid, treatment)
    rows = [[float(x), float(p), float(W.values[j, k])]
            for j, x in enumerate(W.x_axis) for k, p in enumerate(W.p_axis)]
    certs = {
        "integral": W.integral(),
        "mean": [summary.mean.real, summary.mean.imag],
        "covariance": summary.covariance.tolist(),
        "principal_angle": summary.principal_angle,
        "squeeze_ratio": summary.squeeze_ratio,
    }
    return rows, certs


def _cmd_marker(cfg: RunConfig):
    axis = cfg.sweep
    if axis is not None and axis.name not in ("dv", "delta_v"):
        raise InvalidInputError("marker sweeps dv (|v_r| - |v_cr|)")
    if axis is not None:
        axis = parse_sweep(cfg["sweep"], max(cfg["mask"], 0.01))
    dvs = axis.values() if axis else [cfg["vr_mag"] - cfg["vcr_mag"]]
    w_list = cfg["w_list"] or [cfg["w"]]
    jobs = [(w, dv, cfg.values) for w in w_list for dv in dvs]
    blocks = _ordered_map(_marker_point, jobs, _threads(cfg))
    return [r for b in blocks for r in b], {"phi_convention": "phi_r = phi_cr = phi, |v_r| = |v_cr| + dv"}


def _cmd_noise(cfg: RunConfig):
    axis = cfg.sweep
    if axis is not None and axis.name not in ("deltav", "delta_v"):
        raise InvalidInputError("noise sweeps deltav (amplitude-noise width)")
    if axis is not None:
        axis = parse_sweep(cfg["sweep"], 0.0)  # the dv mask does not apply to noise widths
    widths = axis.values() if axis else [0.0]
    blocks = _ordered_map(_noise_point, [(dv, cfg.values) for dv in widths], _threads(cfg))
    return [r for b in blocks for r in b], {"rng": "Philox keyed by (seed, w index, realization)"}


def _cmd_critical(cfg: RunConfig):
    from .eigensolver import hamiltonian_spectrum
    from .gaussian import critical_identity_residual, critical_quadrature, critical_spectrum

    params = cfg.params
    if not params.is_critical:
        raise WrongRegimeError("critical needs --vr equal to --vcr")
    start, stop, steps = cfg["q_grid"].split(":")
    q = np.linspace(float(start), float(stop), int(steps))
    E = critical_spectrum(params, q)
    rows = [[float(qq), float(ep), float(em)] for qq, (ep, em) in zip(q, E)]
    quad = critical_quadrature(params, min(cfg["cutoff"], 120))
    lam = hamiltonian_spectrum(params, cfg.cutoff).eigenvalues
    certs = {
        "identity_residual": critical_identity_residual(params, min(cfg["cutoff"], 120)),
        "beta_rule": quad.beta_rule,
        "convention": quad.convention.value,
        "beta": [quad.beta_displacement.real, quad.beta_displacement.imag],
        "smallest_positive_numeric": float(np.min(lam[lam > 0])),
    }
    return rows, certs


def _cmd_selftest(cfg: RunConfig):
    from .selftest import format_table, run_selftest

    results, seconds = run_selftest()
    print(format_table(results))
    print(f"{sum(r.passed for r in results)}/{len(results)} passed in {seconds:.1f} s")
    rows = [[r.name, r.passed, r.value, r.tolerance] for r in results]
    return rows, {"seconds": seconds, "all_passed": all(r.passed for r in results)}


HANDLERS = {
    "spectrum": _cmd_spectrum, "zero-mode": _cmd_zero_mode, "winding": _cmd_winding, "zak": _cmd_zak,
    "wigner": _cmd_wigner, "marker": _cmd_marker, "noise": _cmd_noise, "critical": _cmd_critical,
    "selftest": _cmd_selftest,
}


def _join_values(argv):
    """Attach values to their flags so ``--q-grid -3:3:61`` is not read as an option."""
    argv, out, i = list(argv), [], 0
    while i < len(argv):
        tok = argv[i]
        if tok in _FLAGS and i + 1 < len(argv) and argv[i + 1].startswith("-") and argv[i + 1] not in _FLAGS:
            out.append(f"{tok}={argv[i + 1]}")
            i += 2
        else:
            out.append(tok)
            i += 1
    return out


def make_config(argv) -> RunConfig:
    ns = build_parser().parse_args(_join_values(argv))
    flags = {key: getattr(ns, key) for key in KEYS if getattr(ns, key, None) is not None}
    file_values = {}
    if ns.config:
        try:
            with open(ns.config, encoding="utf-8") as fh:
                file_values = parse_config_text(fh.read())
        except OSError as exc:
            raise InvalidInputError(f"cannot read config {ns.config!r}: {exc}") from None
    logging.basicConfig(level=logging.INFO if ns.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    return build_config(ns.subcommand, file_values, flags)


def run(argv=None) -> int:
    try:
        cfg = make_config(sys.argv[1:] if argv is None else argv)
        if cfg["output"]:
            rio.check_writable(cfg["output"])
        rows, certs = HANDLERS[cfg.subcommand](cfg)
    except (InvalidInputError, CriticalityError, WrongRegimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except RabiFockError as exc:
        print(f"certificate failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CERTIFICATE
    for key, change in cfg.overrides.items():
        log.info("flag overrides config file: %s = %r (file had %r)", key, change["flag"], change["file"])
    env = rio.ResultEnvelope(cfg.subcommand, rows, cfg.echo(), certs, cfg.overrides)
    if cfg["output"]:
        for path in rio.write(env, cfg["output"], cfg["format"]):
            log.info("wrote %s", path)
    elif cfg.subcommand != "selftest":
        sys.stdout.write(rio.to_csv(env) if cfg["format"] == "csv" else rio.to_json(env))
    if cfg.subcommand == "selftest" and not certs["all_passed"]:
        return EXIT_CERTIFICATE
    return EXIT_OK


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
