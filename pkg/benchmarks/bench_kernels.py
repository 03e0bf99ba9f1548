"""Time the numba kernels against the pure-numpy fallback.

Each backend runs in its own subprocess because the choice is made at
import time from ``UCSJUDGE_DISABLE_NUMBA``.

    python benchmarks/bench_kernels.py [--n 2000] [--d 30] [--repeat 3]
"""

import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import json, sys, time
import numpy as np
from ucsjudge._accel import backend_name
from ucsjudge.transfer import ForestConfig, fit_knn, fit_random_forest, predict_proba

n, d, repeat = map(int, sys.argv[1:4])
rng = np.random.default_rng(0)
y = rng.integers(0, 2, n)
X = np.clip(np.floor(5 + (2 * y[:, None] - 1) * 0.5 + rng.standard_normal((n, d)) + 0.5), 0, 10)
cfg = ForestConfig(n_trees=50)

def best(fn):
    fn()  # warm-up (JIT compile or cache load)
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)

rf = fit_random_forest(X, y, cfg, seed=1)
knn = fit_knn(X, y)
out = {
    "backend": backend_name(),
    "rf_fit_50_trees": best(lambda: fit_random_forest(X, y, cfg, seed=1)),
    "rf_predict": best(lambda: predict_proba(rf, X)),
    "knn_predict": best(lambda: predict_proba(knn, X[:500])),
}
print(json.dumps(out))
"""


def run(disable: bool, n: int, d: int, repeat: int) -> dict:
    env = dict(os.environ)
    env["UCSJUDGE_DISABLE_NUMBA"] = "1" if disable else "0"
    res = subprocess.run([sys.executable, "-c", WORKER, str(n), str(d), str(repeat)],
                         env=env, capture_output=True, text=True, check=True)
    return json.loads(res.stdout.strip().splitlines()[-1])


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=2000)
    ap.add_argument("--d", type=int, default=30)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    rows = [run(False, args.n, args.d, args.repeat), run(True, args.n, args.d, args.repeat)]
    keys = [k for k in rows[0] if k != "backend"]
    print(f"n={args.n} d={args.d}, best of {args.repeat} (seconds)")
    print(f"{'kernel':<18}" + "".join(f"{r['backend']:>10}" for r in rows) + f"{'speedup':>10}")
    for k in keys:
        a, b = rows[0][k], rows[1][k]
        print(f"{k:<18}{a:>10.4f}{b:>10.4f}{b / a:>9.1f}x")


if __name__ == "__main__":
    main()
