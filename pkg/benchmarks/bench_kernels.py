"""Timing comparison of the numba and numpy kernel paths.

Run:  python3 benchmarks/bench_kernels.py [--reps 100000 --T 200]

Covers the two hot loops: exact law evolution with per-step CVaR (the
oscillator schedule at a quarter-million steps) and Monte Carlo stepping.
The numba timings exclude the first call, which compiles.
"""

import argparse
import time

import numpy as np

from cvarmdp import _kernels, evaluate, model


def time_fn(fn, repeat=3):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_sequence(impls, T):
    inst = model.builtin("example1")
    pol = evaluate.example1_policy(T)
    rules = pol.rows(T)
    values, vidx, vidx3, triple = evaluate._value_index_tables(inst)
    mu0 = np.zeros(inst.n_states)
    mu0[0] = 1.0
    args = (inst.kernel, inst.pair_state, rules, mu0, T, 0.5,
            vidx, vidx3, triple, values.size, values)
    rows = {}
    for name, (_, seq_kernel, _) in impls.items():
        seq_kernel(*args)  # warm-up / compile
        rows[name] = time_fn(lambda: seq_kernel(*args))
    return rows


def bench_mc(impls, reps, T):
    inst = model.builtin("example2")
    pol = model.DeterministicPolicy((2, 0, 2)).to_stationary(inst)
    kernel_cdf = np.cumsum(inst.kernel, axis=1)
    rule_cdf2d = evaluate._rule_cdf2d(inst, pol.probs, 3)
    counts2d = np.array([3, 3, 3], dtype=np.int64)
    offsets = np.asarray(inst.offsets[:-1], dtype=np.int64)
    rng = np.random.default_rng(0)
    u_act = rng.random((T, reps))
    u_nxt = rng.random((T, reps))

    def run(step):
        states = np.zeros(reps, dtype=np.int64)
        for t in range(T):
            _, states = step(states, u_act[t], u_nxt[t], rule_cdf2d, counts2d,
                             offsets, kernel_cdf)
        return states

    rows = {}
    for name, (_, _, step) in impls.items():
        run(step)  # warm-up / compile
        rows[name] = time_fn(lambda: run(step))
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--T", type=int, default=(3**12 - 1) // 2,
                    help="sequence horizon (default: the oscillator run)")
    ap.add_argument("--reps", type=int, default=100_000)
    ap.add_argument("--mc-T", type=int, default=200)
    args = ap.parse_args()

    impls = _kernels.implementations()
    if "numba" not in impls:
        print("numba unavailable; timing the numpy path only")

    print(f"exact CVaR sequence, T={args.T}:")
    for name, secs in bench_sequence(impls, args.T).items():
        print(f"  {name:6s} {secs * 1e3:10.1f} ms")

    print(f"Monte Carlo stepping, {args.reps} replications x {args.mc_T} steps:")
    for name, secs in bench_mc(impls, args.reps, args.mc_T).items():
        print(f"  {name:6s} {secs * 1e3:10.1f} ms")


if __name__ == "__main__":
    main()
