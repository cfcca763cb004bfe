"""Compare the compiled and pure-Python float kernels.

Each backend runs in its own interpreter (the pure one with ``EDR_PURE_PYTHON=1``)
on the same seeded workloads; the parent prints one row per workload with the
timings and the speed-up.

    python3 benchmarks/bench_kernels.py [--repeat 3] [--json out.json]
"""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import json, sys, time
import numpy as np
from edr import kernels

def case(rng, n, m):
    v = rng.integers(0, 10, size=(n, m)).astype(float)
    for i in range(n):
        if not v[i].any():
            v[i, rng.integers(m)] = 1.0
    c = rng.integers(1, 100, size=n).astype(float)
    rows = [list(c[i] * v[i] / v[i].sum()) for i in range(n)]
    return v.tolist(), c.tolist(), rows

def best(fn, repeat):
    out = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        out.append(time.perf_counter() - t0)
    return min(out)

repeat = int(sys.argv[1])
rng = np.random.default_rng(0)
res = {"backend": kernels.BACKEND}
for n, m in ((5, 8), (20, 20), (50, 40)):
    v, c, rows = case(rng, n, m)
    order = list(range(n))
    res[f"redistribute {n}x{m}"] = best(lambda: kernels.redistribute(v, c, rows, order, 20000, 0.0), repeat)
    res[f"spend {n}x{m}"] = best(lambda: kernels.spend(v, c, order, 200 * n, n - 1), repeat)
    e = [float(a) for a in rng.integers(0, 50, size=m)]
    res[f"water_fill x1000 m={m}"] = best(lambda: [kernels.water_fill(e, v[0], c[0]) for _ in range(1000)], repeat)
print(json.dumps(res))
"""


def run(pure: bool, repeat: int) -> dict:
    env = dict(os.environ)
    if pure:
        env["EDR_PURE_PYTHON"] = "1"
    else:
        env.pop("EDR_PURE_PYTHON", None)
    out = subprocess.run([sys.executable, "-c", WORKER, str(repeat)], env=env, capture_output=True, text=True, check=True)
    return json.loads(out.stdout)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--json", help="also write the timings here")
    args = ap.parse_args(argv)
    fast = run(False, args.repeat)
    slow = run(True, args.repeat)
    if fast["backend"] != "cython":
        print("compiled extension not available; both runs use the pure-Python kernels", file=sys.stderr)
    print(f"{'workload':<26}{'cython (s)':>12}{'python (s)':>12}{'speed-up':>10}")
    rows = []
    for key in (k for k in fast if k != "backend"):
        a, b = fast[key], slow[key]
        rows.append({"workload": key, "cython": a, "python": b, "speedup": b / a})
        print(f"{key:<26}{a:>12.4f}{b:>12.4f}{b / a:>9.1f}x")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump({"backend": fast["backend"], "rows": rows}, fh, indent=2)
    return 0


if __name__ == "__main__":
    sys.exit(main())
