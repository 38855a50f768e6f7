"""Command line front end: ``projgreedy run | analyze | check | search``.

Exit codes: 0 success, 1 a checked-mode invariant fired or a counterexample
candidate was flagged, 2 invalid configuration.
"""

import argparse
import csv
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import analysis
from .dictionaries import bridge_dictionaries
from .engine import StopRule, run_greedy, run_projection
from .errors import InsufficientIterates, ProjGreedyError
from .geometry import ConvexSet, moreau_check, project
from .instances import (
    SUITE_CLASSES,
    SUITE_SEEDS,
    gen_cone_instance,
    generate_suite_instance,
    load_suite,
    oracle_cone_projection,
)
from .io import ConfigError, dump_json, instance_from_dict, instance_to_dict, load_trace, save_trace
from .schedules import Schedule

EXIT_OK, EXIT_FLAG, EXIT_CONFIG = 0, 1, 2


def _fail(field, message):
    print(f"error: {field}: {message}", file=sys.stderr)
    return EXIT_CONFIG


# -- configuration ---------------------------------------------------------------------


def _read_json(path, field="config"):
    p = Path(path)
    if not p.is_file():
        raise ConfigError(field, f"file not found: {path}")
    try:
        return json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(field, f"invalid JSON ({exc})") from None


def load_run_config(path, args):
    """Instance plus run settings from a file and command line overrides.

    The file is either a bare instance or a run config
    ``{"instance": <inline or path>, "schedule", "stop", "out", "flags"}``.
    """
    raw = _read_json(path)
    if "instance" in raw:
        inst_raw = raw["instance"]
        if isinstance(inst_raw, str):
            inst_raw = _read_json(Path(path).parent / inst_raw, "instance")
        cfg = raw
    else:
        inst_raw, cfg = raw, {}
    inst = instance_from_dict(inst_raw)
    sched_spec = dict(cfg.get("schedule") or inst.schedule or {"kind": "cyclic"})
    sched_spec.setdefault("K", inst.K)
    if args.seed is not None:
        sched_spec = {"kind": "random", "K": inst.K, "seed": args.seed}
    try:
        schedule = Schedule.from_dict(sched_spec)
    except (ValueError, KeyError) as exc:
        raise ConfigError("schedule", str(exc)) from None
    stop_raw = dict(cfg.get("stop", {}))
    if args.max_iter is not None:
        stop_raw["max_iters"] = args.max_iter
    if args.tol is not None:
        stop_raw["norm_tol"] = args.tol
    stop_raw.setdefault("max_iters", 100000)
    stop_raw.setdefault("norm_tol", 1e-9)
    stop = StopRule.from_dict(stop_raw)
    if stop.max_iters < 1:
        raise ConfigError("max_iter", "must be >= 1")
    flags = dict(cfg.get("flags", {}))
    if args.checked:
        flags["checked_mode"] = True
    if getattr(args, "eps", None) is not None:
        flags["eps"] = args.eps
    if flags.get("eps", 1e-3) <= 0:
        raise ConfigError("eps", "must be positive")
    if int(flags.get("thin", 100)) < 1:
        raise ConfigError("thin", "must be >= 1")
    out = args.out or cfg.get("out") or "runs/" + (inst.id or "run")
    return inst, schedule, stop, flags, out


def _x0_for(inst):
    if inst.x0 is not None:
        return inst.x0
    rng = np.random.Generator(np.random.PCG64(inst.seed))
    return rng.standard_normal(inst.dim)


def execute(inst, schedule, stop, flags):
    run = run_projection if inst.mode == "projection" else run_greedy
    return run(inst.members, schedule, _x0_for(inst), stop,
               checked=bool(flags.get("checked_mode", False)),
               record_distances=bool(flags.get("record_distances", False)),
               thin=int(flags.get("thin", 100)), tail=flags.get("tail"),
               validate=not inst.skip_validation)


# -- subcommands -----------------------------------------------------------------------


def cmd_run(args):
    if not args.config:
        return _fail("config", "--config is required")
    try:
        inst, schedule, stop, flags, out = load_run_config(args.config, args)
        trace = execute(inst, schedule, stop, flags)
    except ConfigError as exc:
        return _fail(exc.field, str(exc).split(": ", 1)[-1])
    except ProjGreedyError as exc:
        return _fail(type(exc).__name__, str(exc))
    save_trace(trace, out, {"instance": instance_to_dict(inst), "flags": flags})
    print(f"{inst.id or 'run'}: steps={trace.steps} final_norm={trace.final_norm:.3e} "
          f"stop={trace.stop_reason} out={out}")
    if trace.violation:
        print(f"invariant violated: {trace.violation}", file=sys.stderr)
        return EXIT_FLAG
    return EXIT_OK


def analyze_trace_dir(path, eps=1e-3, sample_count=analysis.DEFAULT_SAMPLES, seed=0):
    trace = load_trace(path)
    meta_inst = trace.metadata.get("instance")
    if meta_inst is None:
        raise ConfigError("trace", "metadata.json carries no instance")
    inst = instance_from_dict(meta_inst)
    try:
        return analysis.analyze(trace, inst.members, eps=eps, sample_count=sample_count,
                                seed=seed)
    except InsufficientIterates as exc:
        return analysis.LimitReport([], [], [], trace.final_norm, trace.r_est, eps,
                                    notes=[str(exc)])


def cmd_analyze(args):
    eps = args.eps if args.eps is not None else 1e-3
    if eps <= 0:
        return _fail("eps", "must be positive")
    try:
        report = analyze_trace_dir(args.trace, eps, seed=args.seed or 0)
    except ConfigError as exc:
        return _fail(exc.field, str(exc).split(": ", 1)[-1])
    except (OSError, KeyError, ValueError) as exc:
        return _fail("trace", str(exc))
    target = Path(args.out) if args.out else Path(args.trace)
    if target.suffix == ".csv":
        target = target.parent
    target.mkdir(parents=True, exist_ok=True)
    dump_json(report.to_dict(), target / "report.json")
    print(f"clusters={len(report.clusters)} pairs={len(report.pairs)} "
          f"candidates={len(report.candidates)}")
    if report.counterexample:
        print("COUNTEREXAMPLE CANDIDATE flagged; see report.json", file=sys.stderr)
        return EXIT_FLAG
    return EXIT_OK


# -- equivalence suites ------------------------------------------------------------------


def random_cone(rng, d, m=None):
    """A random generated cone, half-space cone or subspace in R^d."""
    kind = rng.integers(0, 3)
    m = int(m or rng.integers(1, 7))
    if kind == 0:
        return ConvexSet.cone(rng.standard_normal((m, d)), d)
    if kind == 1:
        n = rng.standard_normal((m, d))
        return ConvexSet.halfspace_cone(n / np.linalg.norm(n, axis=1)[:, None], d)
    return ConvexSet.span(rng.standard_normal((int(rng.integers(1, d + 1)), d)), d)


def moreau_suite(budget=1000, seed=0):
    """Largest decomposition and orthogonality residuals over ``budget`` draws."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(budget):
        d = int(rng.integers(1, 7))
        rep = moreau_check(random_cone(rng, d), rng.standard_normal(d) * rng.uniform(0.1, 10))
        worst = max(worst, rep.decomposition_residual, rep.orthogonality_residual)
    return worst


def oracle_suite(budget=500, seed=0):
    """Largest deviation of ``project`` from subset enumeration (m <= 6, d <= 4)."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(budget):
        d = int(rng.integers(1, 5))
        m = int(rng.integers(1, 7))
        cone = ConvexSet.cone(rng.standard_normal((m, d)), d)
        x = rng.standard_normal(d) * rng.uniform(0.1, 10)
        worst = max(worst, float(np.linalg.norm(project(cone, x) -
                                                oracle_cone_projection(cone, x))))
    return worst


def bridge_suite(budget=100, steps=1000, seed=0):
    """Largest per-step gap between alternating projections and bridged greedy."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for k in range(budget):
        d = int(rng.integers(2, 7))
        inst = gen_cone_instance(d, 2, seed * 1000 + k + 1)
        dicts = bridge_dictionaries(inst.sets, seed=k)
        x0 = rng.standard_normal(d)
        stop = StopRule(max_iters=steps, norm_tol=0.0)
        tp = run_projection(inst.sets, Schedule.cyclic(2), x0, stop, thin=1)
        tg = run_greedy(dicts, Schedule.cyclic(2), x0, stop, thin=1)
        n = min(tp.steps, tg.steps)
        for i in range(1, n + 1):
            worst = max(worst, float(np.linalg.norm(tp.iterate(i) - tg.iterate(i))))
        if tp.steps != tg.steps:
            longer = tp if tp.steps > tg.steps else tg
            worst = max(worst, max(longer.norm_at(i) for i in range(n, longer.steps + 1)))
    return worst


CHECKS = {
    "moreau": (moreau_suite, 1000, 1e-10),
    "oracle": (oracle_suite, 500, 1e-8),
    "bridge": (bridge_suite, 100, 1e-10),
}


def cmd_check(args):
    fn, default_budget, tol = CHECKS[args.what]
    budget = args.budget if args.budget is not None else default_budget
    if budget < 1:
        return _fail("budget", "must be >= 1")
    worst = fn(budget, seed=args.seed or 0)
    ok = worst <= tol
    print(f"{args.what}: budget={budget} worst_residual={worst:.3e} tol={tol:.0e} "
          f"{'ok' if ok else 'FAILED'}")
    return EXIT_OK if ok else EXIT_FLAG


# -- search ------------------------------------------------------------------------------


def search_jobs(cfg):
    """Expand a search config into (id, instance dict, schedule dict) jobs.

    Keys: ``classes`` (default all), ``seeds`` (list) or ``runs`` (count),
    ``generate`` (build instances instead of reading the shipped suite),
    ``schedule`` ("cyclic" or "random"), ``instances`` (extra instance files).
    """
    classes = cfg.get("classes", list(SUITE_CLASSES))
    bad = [c for c in classes if c not in SUITE_CLASSES]
    if bad:
        raise ConfigError("classes", f"unknown classes {bad}")
    seeds = cfg.get("seeds") or list(range(1, int(cfg.get("runs", len(SUITE_SEEDS))) + 1))
    kind = cfg.get("schedule", "cyclic")
    if kind not in ("cyclic", "random"):
        raise ConfigError("schedule", "expected 'cyclic' or 'random'")
    jobs = []
    for cls in classes:
        shipped = {} if cfg.get("generate") else {i.id: i for i in load_suite(cls)}
        for s in seeds:
            key = f"{cls}-{int(s):02d}"
            inst = shipped.get(key) or generate_suite_instance(cls, int(s))
            jobs.append((key, instance_to_dict(inst), kind))
    for path in cfg.get("instances", []):
        inst = instance_from_dict(_read_json(path, "instances"))
        jobs.append((inst.id or Path(path).stem, instance_to_dict(inst), kind))
    return jobs


def _search_one(job):
    key, inst_dict, kind, stop_dict, flags, out, base_seed = job
    row = {"id": key, "mode": inst_dict["mode"], "dim": inst_dict["dim"], "schedule": kind}
    try:
        inst = instance_from_dict(inst_dict)
        row["K"] = inst.K
        sched = (Schedule.cyclic(inst.K) if kind == "cyclic"
                 else Schedule.random(inst.K, base_seed * 100003 + inst.seed))
        trace = execute(inst, sched, StopRule.from_dict(stop_dict), flags)
    except ProjGreedyError as exc:
        row.update(final_norm="", steps=0, stop_reason="error", clusters=0, candidates=0,
                   flags=f"error:{type(exc).__name__}")
        return row
    run_dir = Path(out) / key
    save_trace(trace, run_dir, {"instance": inst_dict, "flags": flags})
    clusters, cands, marks = 0, 0, []
    if not trace.violation:
        try:
            rep = analysis.analyze(trace, inst.members, eps=flags.get("eps", 1e-3),
                                   sample_count=flags.get("sample_count", 16))
            dump_json(rep.to_dict(), run_dir / "report.json")
            clusters, cands = len(rep.clusters), len(rep.candidates)
        except InsufficientIterates:
            pass
        except ProjGreedyError as exc:
            marks.append(f"analysis_error:{type(exc).__name__}")
    if trace.violation:
        marks.append(f"invariant:{trace.violation['invariant']}@{trace.violation['step']}")
    if cands:
        marks.append("COUNTEREXAMPLE_CANDIDATE")
    row.update(final_norm="%.6e" % trace.final_norm, steps=trace.steps,
               stop_reason=trace.stop_reason, clusters=clusters, candidates=cands,
               flags=";".join(marks))
    return row


SUMMARY_FIELDS = ["id", "mode", "dim", "K", "schedule", "steps", "final_norm", "stop_reason",
                  "clusters", "candidates", "flags"]


def cmd_search(args):
    try:
        cfg = _read_json(args.config) if args.config else {}
        jobs = search_jobs(cfg)
    except ConfigError as exc:
        return _fail(exc.field, str(exc).split(": ", 1)[-1])
    stop = {"max_iters": args.max_iter or cfg.get("max_iters", 1000000),
            "norm_tol": args.tol if args.tol is not None else cfg.get("norm_tol", 1e-6)}
    flags = {"checked_mode": True if args.checked else cfg.get("checked", True),
             "eps": args.eps if args.eps is not None else cfg.get("eps", 1e-3),
             "thin": cfg.get("thin", 1000), "tail": cfg.get("tail", 200),
             "sample_count": cfg.get("sample_count", 16)}
    if flags["eps"] <= 0:
        return _fail("eps", "must be positive")
    out = Path(args.out or "search")
    out.mkdir(parents=True, exist_ok=True)
    payload = [(k, d, kind, stop, flags, str(out), args.seed or 0) for k, d, kind in jobs]
    jobs_n = max(1, args.jobs or 1)
    if jobs_n == 1:
        rows = [_search_one(p) for p in payload]
    else:
        with ProcessPoolExecutor(max_workers=jobs_n) as pool:
            rows = list(pool.map(_search_one, payload))
    with open(out / "summary.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=SUMMARY_FIELDS)
        w.writeheader()
        w.writerows(rows)
    flagged = [r for r in rows if r["flags"]]
    cands = sum(int(r["candidates"]) for r in rows)
    print(f"runs={len(rows)} candidates={cands} flagged={len(flagged)} "
          f"summary={out / 'summary.csv'}")
    for r in flagged:
        print(f"  {r['id']}: {r['flags']}", file=sys.stderr)
    return EXIT_FLAG if flagged else EXIT_OK


# -- entry point -------------------------------------------------------------------------


def build_parser():
    p = argparse.ArgumentParser(prog="projgreedy",
                                description="Random projections and greedy steps.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="instance or run/search config JSON")
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--seed", type=int, help="unsigned 64-bit seed")
        sp.add_argument("--max-iter", type=int, dest="max_iter")
        sp.add_argument("--tol", type=float, help="norm tolerance of the stop rule")
        sp.add_argument("--eps", type=float, help="cluster radius")
        sp.add_argument("--jobs", type=int, default=1)
        sp.add_argument("--checked", action="store_true", help="verify per-step invariants")

    sp = sub.add_parser("run", help="run one instance")
    common(sp)
    sp.set_defaults(func=cmd_run)
    sp = sub.add_parser("analyze", help="cluster and pair checks on a saved trace")
    sp.add_argument("trace", help="trace directory or trace.csv")
    common(sp)
    sp.set_defaults(func=cmd_analyze)
    sp = sub.add_parser("check", help="equivalence suites")
    sp.add_argument("what", choices=sorted(CHECKS))
    sp.add_argument("--budget", type=int)
    common(sp)
    sp.set_defaults(func=cmd_check)
    sp = sub.add_parser("search", help="run and analyze an instance family")
    common(sp)
    sp.set_defaults(func=cmd_search)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.seed is not None and not 0 <= args.seed < 2**64:
        return _fail("seed", "must be an unsigned 64-bit integer")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
