"""Timing harness for the numeric kernels: JIT vs pure-numpy fallback.

The backend is fixed at import time by ``TELEASSIST_NUMBA``, so the script
re-runs itself in two subprocesses (one per backend) and collates the
results.  Calls are timed one-at-a-time from Python -- that is how the
package actually uses the kernels, so dispatch overhead counts.

    python3 benchmarks/bench_kernels.py [--calls N] [--repeats K]
"""
import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np


def _workloads(rng):
    """name -> (function, argument tuples). Checksums double as a
    cross-backend equivalence probe."""
    from teleassist import kernels as K

    def quats(n):
        q = rng.normal(size=(n, 4))
        return [K.quat_canonical(row) for row in q]

    n = 256
    qa, qb = quats(n), quats(n)
    pa = [rng.normal(scale=0.3, size=3) for _ in range(n)]
    pb = [rng.normal(scale=0.3, size=3) for _ in range(n)]
    half = np.array([0.045, 0.015, 0.0075])
    axes = [rng.normal(size=3) for _ in range(n)]
    return {
        "quat_mul": (K.quat_mul, list(zip(qa, qb))),
        "quat_angle_rad": (K.quat_angle_rad, list(zip(qa, qb))),
        "quat_slerp": (K.quat_slerp, [(a, b, 0.37) for a, b in zip(qa, qb)]),
        "compose": (K.compose, list(zip(pa, qa, pb, qb))),
        "step_toward": (K.step_toward, [(p1, q1, p2, q2, 0.04, 0.26) for p1, q1, p2, q2 in zip(pa, qa, pb, qb)]),
        "vertical_extent": (K.vertical_extent, [(q, half) for q in qa]),
        "footprints_overlap": (K.footprints_overlap, [(p1, q1, p2, q2, half) for p1, q1, p2, q2 in zip(pa, qa, pb, qb)]),
        "quat_to_mat": (K.quat_to_mat, [(q,) for q in qa]),
    }


def _checksum(out):
    if isinstance(out, tuple):  # kernels returning (position, quaternion)
        return sum(_checksum(o) for o in out)
    return float(np.sum(np.asarray(out, dtype=np.float64)))


def run_worker(calls, repeats):
    rng = np.random.default_rng(7)
    rows = {}
    for name, (fn, args) in _workloads(rng).items():
        fn(*args[0])  # warm-up: trigger compilation outside the timed region
        csum = 0.0
        for a in args:
            csum += _checksum(fn(*a))
        best = float("inf")
        for _ in range(repeats):
            t0 = time.perf_counter_ns()
            i = 0
            for _ in range(calls):
                fn(*args[i])
                i = (i + 1) % len(args)
            best = min(best, (time.perf_counter_ns() - t0) / calls)
        rows[name] = {"ns_per_call": best, "checksum": csum}
    json.dump(rows, sys.stdout)


def run_backend(jit, calls, repeats):
    env = dict(os.environ, TELEASSIST_NUMBA="1" if jit else "0")
    out = subprocess.run(
        [sys.executable, os.path.abspath(__file__), "--worker", "--calls", str(calls), "--repeats", str(repeats)],
        env=env,
        capture_output=True,
        text=True,
        check=True,
    )
    return json.loads(out.stdout)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--calls", type=int, default=20000, help="timed calls per kernel")
    ap.add_argument("--repeats", type=int, default=5, help="best-of repeats")
    ap.add_argument("--worker", action="store_true", help=argparse.SUPPRESS)
    args = ap.parse_args(argv)

    if args.worker:
        run_worker(args.calls, args.repeats)
        return 0

    print(f"timing {args.calls} calls/kernel, best of {args.repeats} (first numba run includes compilation)")
    plain = run_backend(False, args.calls, args.repeats)
    jitted = run_backend(True, args.calls, args.repeats)

    width = max(len(k) for k in plain)
    print(f"{'kernel':<{width}}  {'numpy ns':>10}  {'numba ns':>10}  {'speedup':>8}")
    drift = 0.0
    for name, p in plain.items():
        j = jitted[name]
        drift = max(drift, abs(p["checksum"] - j["checksum"]))
        print(f"{name:<{width}}  {p['ns_per_call']:>10.0f}  {j['ns_per_call']:>10.0f}  {p['ns_per_call'] / j['ns_per_call']:>7.1f}x")
    print(f"max checksum drift between backends: {drift:.3e}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
