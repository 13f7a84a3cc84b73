"""Batch command-line front end.

Every command reads one JSON config, writes CSV artifacts plus a manifest
(config hash, seed, version, artifact list) into the output directory, and
exits with:

    0 - computed, all checks passed
    2 - computed, a numerical check failed
    1 - could not compute (bad config, divergence, non-convergence, ...)

Outputs are byte-identical across reruns and worker counts for a fixed
config: no timestamps, fixed float formats, aggregation in replica order.
"""

import argparse
import hashlib
import json
import os
import sys

import numpy as np

from . import __version__
from .config import Experiment, load_config, observable
from .dissipativity import (
    SampleSpec,
    check_drift_conditions,
    check_generator_bound,
    contraction_report,
)
from .errors import ConfigError, NonConvergenceError, ToolkitError
from .integrate import integrate
from .markov import Interval, bel_gradient, ergodic_time_average, kb_average, mixing_report
from .measures import check_period_invariance, sample_periodic_measure, support_interval
from .models import quadratic_lyapunov
from .noise import NoisePath
from .philox import splitmix64
from .plots import emit_plot
from .pullback import pullback_sequence, random_periodic_path, verify_random_periodicity

PASS, CHECK_FAILED, ERROR = 0, 2, 1


def _write_manifest(out_dir, command, exp: Experiment, artifacts, checks):
    manifest = {
        "command": command,
        "config_sha256": exp.config_hash(),
        "seed": exp.seed,
        "workers": exp.workers,
        "toolkit_version": __version__,
        "artifacts": sorted(artifacts),
        "checks": checks,
    }
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, sort_keys=True, indent=2)
        fh.write("\n")


def _write_kv(path, rows):
    with open(path, "w") as fh:
        fh.write("key,value\n")
        for k, v in rows:
            if isinstance(v, float):
                fh.write(f"{k},{v:.17g}\n")
            else:
                fh.write(f"{k},{v}\n")


def _interval_from(obj):
    lo, hi = obj
    return Interval(
        -np.inf if lo is None else float(lo), np.inf if hi is None else float(hi)
    )


# --------------------------------------------------------------------------
# command implementations; each returns (exit_status, artifacts, checks)
# --------------------------------------------------------------------------


def _cmd_simulate(exp: Experiment, out_dir):
    sec = exp.section("simulate")
    path = NoisePath(exp.seed, exp.model.noise_dim, exp.grid)
    traj = integrate(
        exp.model, path, float(sec.get("t0", 0.0)),
        float(sec.get("t1", exp.grid.period)),
        sec.get("x0", 0.0), scheme=sec.get("scheme", "euler"),
    )
    traj.to_csv(os.path.join(out_dir, "trajectory.csv"))
    return PASS, ["trajectory.csv"], {}


def _cmd_pullback(exp: Experiment, out_dir):
    sec = exp.section("pullback")
    path = NoisePath(exp.seed, exp.model.noise_dim, exp.grid)
    t_star = float(sec.get("t_star", 0.0))
    x0 = sec.get("x0", 0.0)
    scheme = sec.get("scheme", "euler")
    n_max = int(sec.get("n_max", 8))
    _wins, rep = pullback_sequence(exp.model, path, t_star, x0, n_max, scheme)
    rep.to_csv(os.path.join(out_dir, "cauchy.csv"))
    artifacts = ["cauchy.csv"]
    checks = {"cauchy_pass": rep.passed, "cauchy_slope": rep.slope}
    try:
        rps = random_periodic_path(
            exp.model, path, t_star, x0, float(sec.get("tol", 1e-6)),
            int(sec.get("n_cap", 32)), scheme,
        )
        rps.to_csv(os.path.join(out_dir, "rps.csv"))
        artifacts.append("rps.csv")
        checks.update({"converged": True, "n_used": rps.n_used, "last_gap": rps.last_gap})
    except NonConvergenceError as exc:
        checks.update({"converged": False, "gap_history": exc.gaps})
        return CHECK_FAILED, artifacts, checks
    status = PASS if rep.passed else CHECK_FAILED
    return status, artifacts, checks


def _cmd_verify_rps(exp: Experiment, out_dir):
    sec = exp.section("verify_rps")
    path = NoisePath(exp.seed, exp.model.noise_dim, exp.grid)
    rps = random_periodic_path(
        exp.model, path, float(sec.get("t_star", 0.0)), sec.get("x0", 0.0),
        float(sec.get("tol", 1e-6)), int(sec.get("n_cap", 32)), sec.get("scheme", "euler"),
    )
    rep = verify_random_periodicity(exp.model, path, rps)
    _write_kv(
        os.path.join(out_dir, "verify.csv"),
        [
            ("flow_residual", rep.flow_residual),
            ("shift_residual", rep.shift_residual),
            ("flow_tol", rep.flow_tol),
            ("flow_pass", rep.flow_pass),
            ("shift_pass", rep.shift_pass),
        ],
    )
    checks = {"flow_pass": rep.flow_pass, "shift_pass": rep.shift_pass}
    return (PASS if rep.passed else CHECK_FAILED), ["verify.csv"], checks


def _cmd_check(exp: Experiment, out_dir):
    sec = exp.section("check")
    spec = SampleSpec(
        box_radius=float(sec.get("box_radius", 5.0)),
        n_pairs=int(sec.get("n_pairs", 4096)),
        n_times=int(sec.get("n_times", 64)),
        seed=exp.seed,
    )
    rep = check_drift_conditions(exp.model, spec)
    rep.to_csv(os.path.join(out_dir, "conditions.csv"))
    p = float(sec.get("p", 2.0))
    lyap = quadratic_lyapunov(p).with_rate(rep.rate_callable(p, exp.model.noise_dim))
    # sample the bound at the profile nodes, where the rate is measured
    # rather than interpolated
    gen = check_generator_bound(exp.model, lyap, spec, times=rep.times)
    _write_kv(
        os.path.join(out_dir, "generator.csv"),
        [
            ("integral_beta", rep.integral_beta),
            ("drift_condition_pass", rep.passed),
            ("generator_max_violation", gen.max_violation),
            ("generator_pass", gen.passed),
        ],
    )
    checks = {
        "integral_beta": rep.integral_beta,
        "drift_condition_pass": rep.passed,
        "generator_pass": gen.passed,
    }
    status = PASS if rep.passed else CHECK_FAILED
    return status, ["conditions.csv", "generator.csv"], checks


def _cmd_contract(exp: Experiment, out_dir):
    sec = exp.section("contract")
    path = NoisePath(exp.seed, exp.model.noise_dim, exp.grid)
    rep = contraction_report(
        exp.model, path, float(sec.get("t0", 0.0)),
        int(sec.get("horizon_periods", 10)) * exp.grid.period,
        sec.get("x0", 1.0), sec.get("y0", 0.0), sec.get("scheme", "euler"),
    )
    rep.to_csv(os.path.join(out_dir, "contraction.csv"))
    checks = {"slope": rep.slope, "truncated": rep.truncated, "contracting": rep.slope < 0.0}
    return (PASS if rep.slope < 0.0 else CHECK_FAILED), ["contraction.csv"], checks


def _cmd_measure(exp: Experiment, out_dir):
    sec = exp.section("measure")
    s = float(sec.get("s", 0.0))
    n = int(sec.get("n", 1000))
    tol = float(sec.get("tol", 1e-5))
    n_cap = int(sec.get("n_cap", 48))
    x0 = sec.get("x0", 0.0)
    mu = sample_periodic_measure(
        exp.model, exp.grid, exp.seed, s, n, x0=x0, tol=tol, n_cap=n_cap,
        workers=exp.workers,
    )
    mu.to_csv(os.path.join(out_dir, "measure.csv"))
    lo, hi = support_interval(mu, float(sec.get("coverage", 0.999)))
    rows = [
        ("phase", mu.phase),
        ("n", mu.n),
        ("mean", float(mu.mean()[0])),
        ("var", float(mu.var()[0])),
        ("support_lo", lo),
        ("support_hi", hi),
    ]
    checks = {}
    ok = True
    for mode in sec.get("modes", ["shifted_paths", "independent"]):
        rep = check_period_invariance(
            exp.model, exp.grid, exp.seed, s, n, mode=mode, x0=x0, tol=tol,
            n_cap=n_cap, workers=exp.workers,
        )
        rows += [
            (f"{mode}_discrepancy", rep.discrepancy),
            (f"{mode}_threshold", rep.threshold),
            (f"{mode}_pass", rep.passed),
        ]
        checks[f"{mode}_pass"] = rep.passed
        ok = ok and rep.passed
    _write_kv(os.path.join(out_dir, "invariance.csv"), rows)
    return (PASS if ok else CHECK_FAILED), ["measure.csv", "invariance.csv"], checks


def _cmd_kb(exp: Experiment, out_dir):
    sec = exp.section("kb")
    rep = kb_average(
        exp.model, exp.grid, exp.seed, float(sec.get("s", 0.0)), sec.get("x", 0.0),
        float(sec.get("t", sec.get("s", 0.0))), _interval_from(sec.get("interval", [None, 0.0])),
        int(sec.get("n_periods", 20)), int(sec.get("n_mc", 2000)),
        workers=exp.workers, measure_kwargs={"tol": float(sec.get("tol", 1e-5))},
    )
    rep.to_csv(os.path.join(out_dir, "kb.csv"))
    ok = rep.difference <= 3.0 * rep.combined_se
    checks = {
        "kb_average": rep.average,
        "measure_mass": rep.measure_mass,
        "difference": rep.difference,
        "combined_se": rep.combined_se,
        "within_3se": ok,
    }
    return (PASS if ok else CHECK_FAILED), ["kb.csv"], checks


def _cmd_ergodic(exp: Experiment, out_dir):
    sec = exp.section("ergodic")
    h = observable(sec.get("h", "identity"))
    s = float(sec.get("s", 0.0))
    path_seed = int(sec.get("path_seed", splitmix64(exp.seed ^ 0x0B5E6AD)))
    path = NoisePath(path_seed, exp.model.noise_dim, exp.grid)
    mu = sample_periodic_measure(
        exp.model, exp.grid, exp.seed, s, int(sec.get("measure_n", 2000)),
        tol=float(sec.get("tol", 1e-5)), workers=exp.workers,
    )
    rep = ergodic_time_average(
        exp.model, path, s, sec.get("x", 0.0), h, int(sec.get("n_periods", 1000)), measure=mu
    )
    _write_kv(
        os.path.join(out_dir, "ergodic.csv"),
        [
            ("time_average", rep.time_average),
            ("time_se", rep.time_se),
            ("measure_average", rep.measure_average),
            ("measure_se", rep.measure_se),
            ("difference", rep.difference),
            ("combined_se", rep.combined_se),
        ],
    )
    ok = rep.difference <= 3.0 * rep.combined_se
    checks = {"difference": rep.difference, "combined_se": rep.combined_se, "within_3se": ok}
    return (PASS if ok else CHECK_FAILED), ["ergodic.csv"], checks


def _cmd_mixing(exp: Experiment, out_dir):
    sec = exp.section("mixing")
    if "interval" in sec:
        h = _interval_from(sec["interval"])
        bound = None
    else:
        h = observable(sec.get("h", "clamp1"))
        bound = 1.0
    s = float(sec.get("s", 0.0))
    p = float(sec.get("p", 2.0))
    spec = SampleSpec(seed=exp.seed)
    cond = check_drift_conditions(exp.model, spec)
    lyap = quadratic_lyapunov(p).with_rate(cond.rate_callable(p, exp.model.noise_dim))
    mu = sample_periodic_measure(
        exp.model, exp.grid, splitmix64(exp.seed ^ 0x3A3), s,
        int(sec.get("measure_n", 2000)), tol=float(sec.get("tol", 1e-5)),
        workers=exp.workers,
    )
    rep = mixing_report(
        exp.model, exp.grid, exp.seed, s, sec.get("x", 1.0), sec.get("y", -1.0),
        h, sec.get("n_list", [1, 2, 3]), int(sec.get("n", 10000)),
        h_bound=bound, lyap=lyap, measure=mu, workers=exp.workers,
    )
    rep.to_csv(os.path.join(out_dir, "mixing.csv"))
    ok = rep.passed is not False
    checks = {
        "ratio": rep.ratio,
        "ratio_target": rep.ratio_target,
        "passed": rep.passed,
    }
    return (PASS if ok else CHECK_FAILED), ["mixing.csv"], checks


def _cmd_bel(exp: Experiment, out_dir):
    sec = exp.section("bel")
    h = observable(sec.get("h", "identity"))
    est = bel_gradient(
        exp.model, exp.grid, exp.seed, float(sec.get("s", 0.0)), sec.get("x", 0.0),
        sec.get("v", 1.0), h, float(sec.get("horizon", exp.grid.period)),
        int(sec.get("n", 10000)), workers=exp.workers,
    )
    _write_kv(
        os.path.join(out_dir, "bel.csv"),
        [("estimate", est.estimate), ("se", est.se), ("n", est.n_replicas), ("horizon", est.horizon)],
    )
    return PASS, ["bel.csv"], {"estimate": est.estimate, "se": est.se}


_COMMANDS = {
    "simulate": _cmd_simulate,
    "pullback": _cmd_pullback,
    "verify-rps": _cmd_verify_rps,
    "check": _cmd_check,
    "contract": _cmd_contract,
    "measure": _cmd_measure,
    "kb": _cmd_kb,
    "ergodic": _cmd_ergodic,
    "mixing": _cmd_mixing,
    "bel": _cmd_bel,
}


def run(command: str, exp: Experiment, out_dir: str) -> int:
    """Execute one command; writes artifacts + manifest, returns exit status."""
    os.makedirs(out_dir, exist_ok=True)
    status, artifacts, checks = _COMMANDS[command](exp, out_dir)
    exp_config_path = os.path.join(out_dir, "config.json")
    with open(exp_config_path, "w") as fh:
        fh.write(exp.canonical_json())
    _write_manifest(out_dir, command, exp, artifacts + ["config.json"], checks)
    return status


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="rpsde",
        description="Simulation and verification toolkit for periodically forced SDEs",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True)
        sp.add_argument("--out", required=True)
        sp.add_argument("--seed-override", type=int, default=None)
        sp.add_argument("--workers", type=int, default=None)
        sp.add_argument("--dt-override", type=float, default=None)
    plot = sub.add_parser("plot")
    plot.add_argument("--csv", required=True)
    plot.add_argument("--kind", default="auto")
    args = parser.parse_args(argv)

    try:
        if args.command == "plot":
            out = emit_plot(args.csv, args.kind)
            print(out)
            return PASS
        exp = load_config(
            args.config,
            seed_override=args.seed_override,
            workers_override=args.workers,
            dt_override=args.dt_override,
        )
        status = run(args.command, exp, args.out)
        print(f"{args.command}: {'pass' if status == PASS else 'check failed'} (exit {status})")
        return status
    except ConfigError as exc:
        print(f"config error:\n  " + "\n  ".join(exc.problems), file=sys.stderr)
        return ERROR
    except ToolkitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return ERROR


if __name__ == "__main__":
    sys.exit(main())
