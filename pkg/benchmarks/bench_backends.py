"""Time the numba kernels against the pure-numpy fallback.

Each backend runs in its own interpreter because the choice is made at
import time (``PROJGREEDY_DISABLE_JIT=1`` selects the fallback).

    python3 benchmarks/bench_backends.py [--steps N] [--repeat R]
"""

import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import json, sys, time
import numpy as np
from projgreedy import BACKEND, Schedule, StopRule, run_greedy, run_projection
from projgreedy.instances import generate_suite_instance

steps, repeat = int(sys.argv[1]), int(sys.argv[2])
cases = {
    "projection/subspaces": generate_suite_instance("subspaces", 12),
    "projection/cones": generate_suite_instance("cones", 14),
    "greedy/dicts": generate_suite_instance("dicts", 15),
}
out = {"backend": BACKEND}
for name, inst in cases.items():
    run = run_projection if inst.mode == "projection" else run_greedy
    sched = Schedule.random(inst.K, 7)
    stop = StopRule(max_iters=steps, norm_tol=0.0)
    run(inst.members, sched, inst.x0, StopRule(max_iters=10), validate=False)  # warm up / compile
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        tr = run(inst.members, sched, inst.x0, stop, checked=True, validate=False)
        best = min(best, time.perf_counter() - t0)
    out[name] = {"seconds": best, "steps": tr.steps, "final_norm": tr.final_norm}
print(json.dumps(out))
"""


def run_backend(disable_jit, steps, repeat):
    env = dict(os.environ)
    env["PROJGREEDY_DISABLE_JIT"] = "1" if disable_jit else "0"
    res = subprocess.run([sys.executable, "-c", WORKER, str(steps), str(repeat)], env=env,
                         capture_output=True, text=True, check=True)
    return json.loads(res.stdout.strip().splitlines()[-1])


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--steps", type=int, default=20000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    jit = run_backend(False, args.steps, args.repeat)
    ref = run_backend(True, args.steps, args.repeat)
    print(f"{'case':<24}{jit['backend']:>12}{ref['backend']:>12}{'speedup':>10}{'|dnorm|':>12}")
    for name in (k for k in jit if k != "backend"):
        a, b = jit[name], ref[name]
        gap = abs(a["final_norm"] - b["final_norm"])
        print(f"{name:<24}{a['seconds']:>11.4f}s{b['seconds']:>11.4f}s"
              f"{b['seconds'] / a['seconds']:>9.1f}x{gap:>12.2e}")


if __name__ == "__main__":
    main()
