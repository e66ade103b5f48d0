"""Command line front end: solve scenarios, reproduce presets, run property corpora."""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from .model import ConstantSegment, PowerPolicy, temperature_trajectory
from .multi import solve_multi
from .numerics import ConvergenceError
from .oracle import build_discrete, oracle_solve
from .presets import PRESETS, random_scenarios, with_options
from .properties import structural_checks
from .scenario import Scenario, ScenarioError, parse_scenario
from .single import solve_single

SIG = 12  # significant digits in every emitted number


def _clean(x):
    """Round floats so emitted files do not depend on last-bit noise."""
    if isinstance(x, dict):
        return {k: _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return float(f"{x:.{SIG}g}") if np.isfinite(x) else None
    if isinstance(x, np.integer):
        return int(x)
    return x


def _dump_json(obj, path: Path):
    path.write_text(json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n")


def solve_scenario(sc: Scenario):
    """Dispatch to the closed-form or the dual solver."""
    p, prof, opts = sc.params, sc.profile, sc.solver
    single_ok = prof.n_epochs == 1 and sc.T0 == p.T_e and p.c == 0
    method = opts.method
    if method == "auto":
        method = "single" if single_ok else "multi"
    if method == "single":
        if not single_ok:
            raise ValueError("closed-form solver needs one arrival, T0 = T_e and c = 0")
        return solve_single(p, prof.energies[0], prof.D)
    return solve_multi(p, prof, grid_n=opts.grid_n, tol=opts.tol, T0=sc.T0)


def oracle_gap(sc: Scenario, report, n: int | None = None) -> dict:
    n = sc.solver.grid_n if n is None else n
    problem = build_discrete(sc.params, sc.profile, n, sc.T0)
    res = oracle_solve(problem)
    mid = 0.5 * (problem.t[1:] + problem.t[:-1])
    diff = np.abs(report.policy.power(mid) - res.P)
    ref = max(abs(report.throughput), 1e-12)
    return {
        "grid_n": n,
        "oracle_objective": res.objective,
        "main_throughput": report.throughput,
        "absolute_gap": report.throughput - res.objective,
        "relative_gap": abs(report.throughput - res.objective) / ref,
        "median_power_difference": float(np.median(diff)),
        "oracle_iterations": res.iterations,
    }


def write_trajectory(report, path: Path, n_samples: int = 1001):
    traj = temperature_trajectory(report.policy, report.params, report.T0, n_samples,
                                  extra_times=report.profile.times)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "P", "T", "E_cum", "rate"])
        for row in traj.rows():
            w.writerow([f"{float(v):.{SIG}g}" for v in row])


def run(sc: Scenario, out_dir: Path | None, with_oracle: bool = False, expectations=()):
    """Solve, check and (optionally) write artifacts. Returns (report, summary, props)."""
    report = solve_scenario(sc)
    props = structural_checks(report.policy, report.params, report.profile, report.T0)
    summary = {"scenario": sc.to_dict(), **report.summary(),
               "properties_passed": props.passed}
    if with_oracle:
        summary["oracle"] = oracle_gap(sc, report)
    if expectations:
        summary["expectations"] = [e.evaluate(report) for e in expectations]
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        write_trajectory(report, out_dir / "trajectory.csv")
        _dump_json(summary, out_dir / "summary.json")
        _dump_json(props.as_dict(), out_dir / "properties.json")
    return report, summary, props


def inject_negative_jump(policy: PowerPolicy, at: float, factor: float = 0.5) -> PowerPolicy:
    """Hold power after ``at`` at a fraction of its left limit (a deliberate fault)."""
    keep = []
    for seg in policy.segments:
        if seg.t_end <= at:
            keep.append(seg)
        elif seg.t_start < at:
            keep.append(dataclasses.replace(seg, t_end=at))
    level = factor * float(policy.power_left(at))
    keep.append(ConstantSegment(at, policy.D, level))
    return PowerPolicy(tuple(keep))


# -- subcommands ---------------------------------------------------------------


def _load(path: str) -> Scenario:
    return parse_scenario(Path(path).read_text())


def _print_summary(summary: dict):
    keys = ("regime", "certified", "throughput_bits", "energy_used", "energy_available",
            "energy_wasted", "t0", "t_h", "jump_instants", "temperature_tight_intervals",
            "energy_tight_instants")
    for k in keys:
        print(f"{k:28s} {_clean(summary.get(k))}")
    print(f"{'kkt_max_residual':28s} {_clean(max(summary['kkt'].values()))}")
    if "oracle" in summary:
        print(f"{'oracle_relative_gap':28s} {_clean(summary['oracle']['relative_gap'])}")


def cmd_solve(args) -> int:
    sc = _load(args.scenario)
    kw = {}
    if args.grid is not None:
        kw["grid_n"] = args.grid
    if args.tol is not None:
        kw["tol"] = args.tol
    if kw:
        sc = with_options(sc, **kw)
    try:
        report, summary, props = run(sc, Path(args.out) if args.out else None, args.oracle)
    except ConvergenceError as exc:
        print(f"solver failed: {exc}", file=sys.stderr)
        return 2
    _print_summary(summary)
    for c in props.failures():
        print(f"check failed: {c.name} measure={_clean(c.measure)} at t={_clean(c.location)}")
    return 0 if report.certified else 1


def cmd_figure(args) -> int:
    sc, expectations = PRESETS[args.fig]
    out = Path(args.out) if args.out else None
    report, summary, props = run(sc, out, expectations=expectations)
    checks = summary["expectations"]
    _print_summary(summary)
    for c in checks:
        status = "PASS" if c["passed"] else "FAIL"
        print(f"{status} {c['name']}: {_clean(c['value'])} (expected {c['expected']} +/- {c['tol']})")
    for c in props.failures():
        print(f"FAIL check {c.name}: measure={_clean(c.measure)} at t={_clean(c.location)}")
    ok = report.certified and props.passed and all(c["passed"] for c in checks)
    return 0 if ok else 1


def props_run(seed: int, trials: int, kind: str = "single", fault: str | None = None,
              out_dir: Path | None = None, log=print) -> int:
    """Solve a seeded corpus and stop at the first failed check."""
    if trials < 1:
        raise ValueError("trials must be at least 1")
    for sc in random_scenarios(seed, trials, kind):
        report = solve_scenario(sc)
        policy = report.policy
        if fault == "negative-jump":
            at = sc.profile.times[1] if sc.profile.n_epochs > 1 else 0.5 * sc.profile.D
            policy = inject_negative_jump(policy, at)
        rep = structural_checks(policy, sc.params, sc.profile, sc.T0)
        bad = rep.failures()
        if not report.certified or bad:
            log(f"{sc.name}: FAIL")
            if not report.certified:
                log(f"  not certified, kkt residual {report.kkt.max_residual:.3e}")
            for c in bad:
                log(f"  {c.name}: measure={_clean(c.measure)} at t={_clean(c.location)} {c.detail}")
            if out_dir is not None:
                out_dir.mkdir(parents=True, exist_ok=True)
                path = out_dir / f"{sc.name}.json"
                path.write_text(sc.to_json())
                log(f"  reproducer written to {path}")
            return 1
        log(f"{sc.name}: ok ({len(rep.checks)} checks)")
    return 0


def cmd_props(args) -> int:
    return props_run(args.seed, args.trials, args.kind, args.fault, Path(args.out))


def cmd_compare(args) -> int:
    sc = _load(args.scenario)
    if args.grid is not None:
        sc = with_options(sc, grid_n=args.grid)
    report = solve_scenario(sc)
    gap = oracle_gap(sc, report)
    for k, v in gap.items():
        print(f"{k:26s} {_clean(v)}")
    return 0 if gap["relative_gap"] <= 1e-3 else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="thermosched",
                                 description="Throughput-optimal power schedules under a thermal ceiling.")
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="solve a scenario file")
    s.add_argument("scenario")
    s.add_argument("--out", help="directory for trajectory.csv, summary.json, properties.json")
    s.add_argument("--grid", type=int)
    s.add_argument("--tol", type=float)
    s.add_argument("--oracle", action="store_true", help="also report the discretized oracle gap")
    s.set_defaults(func=cmd_solve)

    f = sub.add_parser("figure", help="reproduce a built-in preset and self-check it")
    f.add_argument("fig", type=int, choices=sorted(PRESETS))
    f.add_argument("--out")
    f.set_defaults(func=cmd_figure)

    p = sub.add_parser("props", help="structural checks over seeded random scenarios")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--trials", type=int, default=50)
    p.add_argument("--kind", choices=("single", "two"), default="single")
    p.add_argument("--fault", choices=("negative-jump",))
    p.add_argument("--out", default="props-failures", help="where reproducers are written")
    p.set_defaults(func=cmd_props)

    c = sub.add_parser("compare", help="main solver vs discretized oracle")
    c.add_argument("scenario")
    c.add_argument("--grid", type=int)
    c.set_defaults(func=cmd_compare)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ScenarioError as exc:
        for msg in exc.problems:
            print(f"invalid scenario: {msg}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
