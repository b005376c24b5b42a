"""Compare the numba and pure-numpy sequential-test kernels.

Two measurements:

* the walk kernel alone, on a batch of many short tests (the SLRT search
  workload) and on a few long ones;
* one end-to-end procedure run in a fresh interpreter with ``ASL_NUMBA=1`` and
  ``ASL_NUMBA=0``.

Usage: ``python3 benchmarks/bench_kernels.py [--repeat N]``
"""
import argparse
import os
import subprocess
import sys
import time

import numpy as np

from asl import _kernels as K

END_TO_END = """
import time, warnings
warnings.simplefilter("ignore")
from asl.classes import Intervals
from asl.harness import ExperimentConfig, run_trials, reference_threshold
from asl import _kernels
cls = Intervals(32768, 8, 1)
T = reference_threshold(cls, "intervals", 32768.0, 0.1)
cfg = ExperimentConfig(cls=cls, procedure="intervals", m=32768.0, epsilon=0.1, mu_grid=(T,), trials=20, seed=1)
run_trials(cfg, T)  # warm-up (numba compile or cache load)
t = time.perf_counter()
run_trials(cfg, T)
print(_kernels.USE_NUMBA, time.perf_counter() - t)
"""


def workload(n_tests, mean_shift, seed=0):
    rng = np.random.default_rng(seed)
    alpha, beta = 1e-5, 1e-3
    lower, upper = np.log(beta / (1 - alpha)), np.log((1 - beta) / alpha)
    a = np.sqrt(2 * 0.01 * min(-lower, upper))
    means = np.where(rng.random(n_tests) < 0.01, a * mean_shift, 0.0)
    slopes = np.full(n_tests, a * mean_shift)
    offsets = np.full(n_tests, (a * mean_shift) ** 2 / 2)
    sqs = np.full(n_tests, a * a)
    return means, slopes, offsets, sqs, lower, upper


def run_walk(fn, noise, means, slopes, offsets, sqs, lower, upper):
    k = means.size
    steps, dec, llr = np.zeros(k, np.int64), np.zeros(k, np.int64), np.zeros(k)
    i, pos, s0, l0 = 0, 0, 0, 0.0
    while True:
        i, pos, s0, l0, _, status = fn(noise, pos, means, slopes, offsets, sqs, lower, upper, 10 ** 7,
                                       i, s0, l0, np.inf, steps, dec, llr)
        if status != K.NEED_NOISE:
            return steps
        pos = 0  # reuse the tape; fine for timing


def best_of(repeat, fn, *args):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - t)
    return min(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    noise = np.random.default_rng(1).standard_normal(1 << 20)
    print(f"{'workload':<28}{'numba [s]':>12}{'numpy [s]':>12}{'speedup':>10}")
    for name, n_tests in (("200k short tests", 200_000), ("200 long tests", 200)):
        w = workload(n_tests, 1.0 if n_tests > 1000 else 0.05)
        if K.walk_numba is not None:
            run_walk(K.walk_numba, noise, *w)  # compile
            t_nb = best_of(args.repeat, run_walk, K.walk_numba, noise, *w)
        else:
            t_nb = float("nan")
        t_np = best_of(args.repeat, run_walk, K.walk_numpy, noise, *w)
        print(f"{name:<28}{t_nb:>12.4f}{t_np:>12.4f}{t_np / t_nb:>10.1f}")
    for flag in ("1", "0"):
        env = dict(os.environ, ASL_NUMBA=flag)
        out = subprocess.run([sys.executable, "-c", END_TO_END], env=env, capture_output=True, text=True,
                             check=True).stdout.split()
        print(f"intervals n=2^15, 20 trials  ASL_NUMBA={flag}: numba={out[0]}, {float(out[1]):.3f}s")


if __name__ == "__main__":
    main()
