"""Benchmark the numpy and numba kernel backends on the hot paths.

Times one full-batch offline training epoch (forward + backward + update)
and the fused online adaptation loop at the two experiment scales, for
both backends:

    python benchmarks/bench_backends.py [--repeats 5]

The generic hypernetwork passes are BLAS matmuls in both backends; the
numba backend accelerates the per-sample reconstruction-net kernels and
the per-epoch online loop, which dominate at small batch sizes.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from nlrb import backend as backend_mod
from nlrb.grid import CHEBYSHEV, build_grid
from nlrb.model import OfflineConfig, build_composite, make_offline_dataset, train_offline
from nlrb.online import OnlineConfig, adapt
from nlrb.pod import assemble_snapshots, compute_pod
from nlrb.problems import burgers_problem, sample_params


def setup(kappa, n, n_s, ell, r):
    problem = burgers_problem(kappa)
    grid = build_grid(n, CHEBYSHEV)
    snaps = assemble_snapshots(problem, grid, sample_params(problem, n_s, seed=1))
    basis = compute_pod(snaps, ell=ell)
    dataset = make_offline_dataset(problem, snaps)
    return problem, basis, dataset


def time_offline_epochs(basis, dataset, mu_domain, r, backend, epochs, repeats):
    best = np.inf
    for _ in range(repeats):
        cfg = OfflineConfig(epochs=epochs, seed=0)
        t0 = time.perf_counter()
        train_offline(basis, dataset, cfg, mu_domain, r=r, backend=backend)
        best = min(best, (time.perf_counter() - t0) / epochs)
    return best


def time_online(problem, basis, dataset, mu_domain, r, backend, epochs, repeats):
    cfg_off = OfflineConfig(epochs=50, seed=0)
    model, _ = train_offline(basis, dataset, cfg_off, mu_domain, r=r, backend=backend)
    ocfg = OnlineConfig(m1=128, max_epochs=epochs, stop_tol=1e-300, seed=2)
    mu = dataset.params[0]
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        adapt(model, basis, problem, mu, ocfg, backend=backend)
        best = min(best, (time.perf_counter() - t0) / epochs)
    return best


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args()

    scales = [
        ("kappa=1 scale", dict(kappa=1.0, n=257, n_s=100, ell=20, r=8)),
        ("kappa=9 scale", dict(kappa=9.0, n=513, n_s=400, ell=20, r=16)),
    ]
    backends = ["numpy"]
    try:
        backend_mod.kernels("numba")
        backends.append("numba")
    except Exception:
        print("numba unavailable; benchmarking numpy only")

    print(f"{'scale':<14} {'path':<22} " + " ".join(f"{b:>12}" for b in backends))
    for label, kw in scales:
        problem, basis, dataset = setup(**kw)
        row = []
        for b in backends:
            dt = time_offline_epochs(
                basis, dataset, problem.mu_domain, kw["r"], b, epochs=30, repeats=args.repeats
            )
            row.append(dt)
        print(f"{label:<14} {'offline epoch':<22} " + " ".join(f"{v*1e3:>9.2f} ms" for v in row))
        row = []
        for b in backends:
            dt = time_online(
                problem, basis, dataset, problem.mu_domain, kw["r"], b,
                epochs=2000, repeats=args.repeats,
            )
            row.append(dt)
        print(f"{label:<14} {'online epoch':<22} " + " ".join(f"{v*1e6:>9.2f} us" for v in row))


if __name__ == "__main__":
    main()
