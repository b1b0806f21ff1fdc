#!/usr/bin/env python3
"""Benchmark the trajectory-stepping kernels: compiled extension vs numpy twin.

Both kernels consume identical uniform arrays, so besides throughput the run
verifies that the accumulated values agree bit for bit.

Usage:
    python benchmarks/bench_sim.py [--samples 100000] [--horizon 200] [--repeats 3]
"""

import argparse
import time
from fractions import Fraction

import numpy as np

from etrsolve import build_example_model, simkernel
from etrsolve.evaluation import _initial_states, _policy_arrays
from etrsolve.model import StationaryPolicy


def build_inputs(samples):
    m, _ = build_example_model(60, Fraction(1, 4))
    rows = {x: {"a": Fraction(1)} for x in m.states}
    rows[1] = {"a": Fraction(1, 2), "b": Fraction(1, 2)}
    policy = StationaryPolicy(rows)
    policy_cum, trans_cum, values = _policy_arrays(m, policy)
    rng = np.random.default_rng(0)
    states0 = _initial_states(m, rng, samples)
    return policy_cum, trans_cum, values, states0, rng


def run(kernel, label, args):
    policy_cum, trans_cum, values, states0, _ = build_inputs(args.samples)
    best_total = best_kernel = float("inf")
    acc = None
    for _ in range(args.repeats):
        rng = np.random.default_rng(1)
        states = states0.copy()
        acc = np.zeros((values.shape[0], args.samples))
        kernel_time = 0.0
        t0 = time.perf_counter()
        for _t in range(args.horizon):
            u_a = rng.random(args.samples)
            u_x = rng.random(args.samples)
            k0 = time.perf_counter()
            kernel(states, acc, u_a, u_x, policy_cum, trans_cum, values)
            kernel_time += time.perf_counter() - k0
        best_total = min(best_total, time.perf_counter() - t0)
        best_kernel = min(best_kernel, kernel_time)
    steps = args.samples * args.horizon
    print(
        f"{label:<10} total {best_total:7.3f} s   kernel {best_kernel:7.3f} s "
        f"  {steps / best_kernel / 1e6:8.2f} M steps/s (kernel)"
    )
    return best_kernel, acc


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--samples", type=int, default=100000)
    parser.add_argument("--horizon", type=int, default=200)
    parser.add_argument("--repeats", type=int, default=3)
    args = parser.parse_args()

    print(f"batch stepping, {args.samples} trajectories x {args.horizon} steps "
          f"(best of {args.repeats})")
    t_fb, acc_fb = run(simkernel.step_batch_fallback, "fallback", args)
    if simkernel.step_batch_compiled is None:
        print("compiled   unavailable (extension not built)")
        return
    t_c, acc_c = run(simkernel.step_batch_compiled, "compiled", args)
    same = np.array_equal(acc_fb, acc_c)
    print(f"speedup    {t_fb / t_c:8.2f} x (kernel-only)   identical results: {same}")
    if not same:
        raise SystemExit("kernels disagree")


if __name__ == "__main__":
    main()
