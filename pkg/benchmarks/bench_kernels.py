"""Benchmark the numba kernels against their pure-numpy fallbacks.

Runs both implementations on the three hot paths (online chain
contraction, batched train evaluation, batched characteristic function),
checks they agree, and prints timings with speedups.

Usage: python benchmarks/bench_kernels.py [--chi 40] [--d 5] [--batch 20000]
"""

import argparse
import time

import numpy as np

from ttgreeks import kernels


def _time(fn, *args, repeat=5, inner=1):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        for _ in range(inner):
            out = fn(*args)
        best = min(best, (time.perf_counter() - t0) / inner)
    return best, out


def synthetic_operator(d, chi, n_p, rng):
    bonds = [1] + [chi] * (d - 1) + [1]
    return [rng.normal(size=(bonds[i], n_p, n_p, bonds[i + 1]))
            + 1j * rng.normal(size=(bonds[i], n_p, n_p, bonds[i + 1]))
            for i in range(d)]


def synthetic_train(d, chi, n, rng):
    bonds = [1] + [chi] * (d - 1) + [1]
    return [rng.normal(size=(bonds[i], n, bonds[i + 1]))
            + 1j * rng.normal(size=(bonds[i], n, bonds[i + 1]))
            for i in range(d)]


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--chi", type=int, default=40)
    ap.add_argument("--d", type=int, default=5)
    ap.add_argument("--n-p", type=int, default=20)
    ap.add_argument("--batch", type=int, default=20_000)
    args = ap.parse_args()

    if not kernels.HAVE_NUMBA:
        raise SystemExit("numba is not importable; nothing to compare")

    rng = np.random.default_rng(42)
    rows = []

    # online contraction, one query at a time
    cores4 = synthetic_operator(args.d, args.chi, args.n_p, rng)
    kidx = rng.integers(0, args.n_p, args.d).astype(np.int64)
    lidx = rng.integers(0, args.n_p, args.d).astype(np.int64)
    nb4 = kernels.prepare_cores4(cores4)
    kernels._contract_chain_nb(nb4, kidx, lidx)  # JIT warm-up
    t_nb, (v_nb, f_nb) = _time(kernels._contract_chain_nb, nb4, kidx, lidx,
                               inner=200)
    t_np, (v_np, f_np) = _time(kernels._contract_chain_np, cores4, kidx, lidx,
                               inner=200)
    assert abs(v_nb - v_np) <= 1e-10 * abs(v_np) and f_nb == f_np
    rows.append(("contract_chain (1 query)", t_np, t_nb))

    # batched train evaluation
    cores3 = synthetic_train(args.d, args.chi, args.n_p, rng)
    idx = rng.integers(0, args.n_p, size=(args.batch, args.d)).astype(np.int64)
    nb3 = kernels.prepare_cores3(cores3)
    kernels._eval_tt_batch_nb(nb3, idx[:10])
    t_nb, out_nb = _time(kernels._eval_tt_batch_nb, nb3, idx)
    t_np, out_np = _time(kernels._eval_tt_batch_np, cores3, idx)
    assert np.allclose(out_nb, out_np, rtol=1e-10)
    rows.append((f"eval_tt_batch ({args.batch})", t_np, t_nb))

    # batched characteristic function
    d = args.d
    w = rng.normal(size=(args.batch, d)) - 1j
    sigma = rng.uniform(0.15, 0.25, size=(args.batch, d))
    s0 = rng.uniform(90, 120, size=(args.batch, d))
    rho = np.full((d, d), 0.5)
    np.fill_diagonal(rho, 1.0)
    kernels._char_fn_batch_nb(w[:10], sigma[:10], s0[:10], rho, 0.01, 1.0)
    t_nb, out_nb = _time(kernels._char_fn_batch_nb, w, sigma, s0, rho, 0.01, 1.0)
    t_np, out_np = _time(kernels._char_fn_batch_np, w, sigma, s0, rho, 0.01, 1.0)
    assert np.allclose(out_nb, out_np, rtol=1e-12)
    rows.append((f"char_fn_batch ({args.batch})", t_np, t_nb))

    print(f"active backend: {'numba' if kernels.USING_NUMBA else 'numpy'} "
          f"(TTGREEKS_DISABLE_NUMBA=1 forces numpy)\n")
    print(f"{'kernel':<28} {'numpy':>12} {'numba':>12} {'speedup':>9}")
    print("-" * 64)
    for name, t_np, t_nb in rows:
        print(f"{name:<28} {t_np * 1e6:>10.1f}us {t_nb * 1e6:>10.1f}us "
              f"{t_np / t_nb:>8.1f}x")


if __name__ == "__main__":
    main()
