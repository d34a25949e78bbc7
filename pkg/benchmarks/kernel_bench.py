#!/usr/bin/env python3
"""Benchmark the numba kernels against the pure-numpy fallback.

Usage:
    python3 benchmarks/kernel_bench.py [--n 332] [--dim 8] [--repeat 5]

Times every hot kernel on one synthetic problem and prints the per-call
speedup.  The first numba call of each kernel compiles (cached on disk),
so compilation is excluded by a warm-up call.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from cnesens.backend import get_kernels
from cnesens.cne import EmbeddingConfig
from cnesens.graphio import Graph

EPS = 1e-12


def make_problem(n: int, dim: int, seed: int = 0):
    rng = np.random.default_rng(seed)
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n) if rng.random() < 12.0 / n]
    g = Graph.from_edges(pairs, n=n)
    cfg = EmbeddingConfig(dim=dim, seed=seed).resolved_for(g)
    X = rng.standard_normal((n, dim))
    return g, cfg, X


def bench(fn, args, repeat: int) -> float:
    fn(*args)  # warm up (JIT compile / cache load)
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n", type=int, default=332)
    parser.add_argument("--dim", type=int, default=8)
    parser.add_argument("--repeat", type=int, default=5)
    opts = parser.parse_args()

    g, cfg, X = make_problem(opts.n, opts.dim)
    A = g.adjacency
    gamma, alpha = cfg.gamma, cfg.alpha

    npk = get_kernels("numpy")
    try:
        nbk = get_kernels("numba")
    except ImportError:
        raise SystemExit("numba not importable; nothing to compare")

    P = npk.link_prob_matrix(X, gamma, alpha, EPS)
    blocks = npk.hessian_blocks(X, A, P, gamma)
    inv = np.array([np.linalg.inv(blocks[k]) for k in range(g.n)])
    ii, jj = (idx.astype(np.int64) for idx in np.triu_indices(g.n, k=1))
    Q = npk.link_prob_matrix(X + 0.01, gamma, alpha, EPS)
    xi, xj = X[0] + 0.1, X[1] - 0.1

    cases = [
        ("link_prob_matrix", (X, gamma, alpha, EPS)),
        ("objective", (X, A, gamma, alpha, EPS)),
        ("objective_gradient", (X, A, gamma, alpha, EPS)),
        ("rows_objective_gradient", (X, xi, xj, 0, 1, A, gamma, alpha, EPS)),
        ("kl_total", (P, Q, EPS)),
        ("hessian_blocks", (X, A, P, gamma)),
        ("approx_scores", (X, P, inv, gamma, ii, jj)),
    ]

    print(f"n={g.n} m={g.num_edges} dim={cfg.dim} repeat={opts.repeat} (best of)")
    print(f"{'kernel':<26}{'numpy':>12}{'numba':>12}{'speedup':>9}")
    for name, args in cases:
        t_np = bench(getattr(npk, name), args, opts.repeat)
        t_nb = bench(getattr(nbk, name), args, opts.repeat)
        print(f"{name:<26}{t_np * 1e3:>10.3f}ms{t_nb * 1e3:>10.3f}ms{t_np / t_nb:>8.1f}x")


if __name__ == "__main__":
    main()
