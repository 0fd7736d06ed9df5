"""Time the numba kernels against the pure-numpy fallback.

Each backend runs in its own interpreter because the choice is made at
import time from SYSALIAS_DISABLE_NUMBA.

    python3 benchmarks/bench_kernels.py [--repeat 5]
"""
import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import json, sys, timeit
import numpy as np
from sysalias import kernels
from sysalias.aliasing import t_test_pvalue
from sysalias.evalharness import roc_pr, threshold_grid
from sysalias.matfun import expm, logm_principal
from sysalias.reconstruct import SolverOptions, reconstruct
from sysalias.simulate import ExperimentConfig, generate_dataset
from sysalias.sysmodel import boolean_network

repeat = int(sys.argv[1])
rng = np.random.default_rng(0)
X = rng.standard_normal((24, 24)) / 3
P = expm(X / 4)
scores = rng.random((24, 24))
truth = boolean_network((rng.random((24, 24)) < 0.1).astype(float))
grid = threshold_grid([scores])
sample = rng.standard_normal(200)
ds = generate_dataset(ExperimentConfig(n=8, N=16, seed=3))
opts = SolverOptions(lam=1.0, max_iter=5)

cases = {
    "expm 24x24": lambda: expm(X),
    "logm 24x24": lambda: logm_principal(P),
    "t-test p-value": lambda: t_test_pvalue(sample),
    "roc sweep 101 thresholds": lambda: roc_pr(scores, truth, grid),
    "GN 5 iterations, n = 8": lambda: reconstruct(ds.series, opts),
}
out = {"backend": kernels.BACKEND}
for name, fn in cases.items():
    fn()  # compile / warm caches
    number = 1 if name.startswith("GN") else 20
    out[name] = min(timeit.repeat(fn, number=number, repeat=repeat)) / number
print(json.dumps(out))
"""


def run(disable: bool, repeat: int) -> dict:
    env = dict(os.environ)
    env["SYSALIAS_DISABLE_NUMBA"] = "1" if disable else "0"
    proc = subprocess.run([sys.executable, "-c", WORKER, str(repeat)], env=env,
                          capture_output=True, text=True, check=True)
    return json.loads(proc.stdout.strip().splitlines()[-1])


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    fast = run(False, args.repeat)
    slow = run(True, args.repeat)
    print(f"{'case':<28}{fast['backend']:>12}{slow['backend']:>12}{'speedup':>10}")
    for key in fast:
        if key == "backend":
            continue
        a, b = fast[key], slow[key]
        print(f"{key:<28}{a * 1e3:>10.3f}ms{b * 1e3:>10.3f}ms{b / a:>9.2f}x")


if __name__ == "__main__":
    main()
