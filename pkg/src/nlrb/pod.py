"""Snapshot assembly and proper orthogonal decomposition.

Snapshots are exact-solution samples on the collocation grid (nodal values
stand in for discretization coefficients). The initial reduced basis is the
set of leading left singular vectors of the snapshot matrix under the
Euclidean inner product, with a deterministic sign convention; spatial
derivatives of the basis columns come from the grid's differentiation
matrices.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NumericError
from .grid import Grid, diff_operator
from .problems import ProblemDef


@dataclass(frozen=True, eq=False)
class SnapshotSet:
    """High-fidelity solutions for a batch of parameter values."""

    grid: Grid
    params: np.ndarray  # (n_s, mu_dim)
    values: np.ndarray  # (n, n_s), column i samples u(.; params[i])

    @property
    def n_snapshots(self) -> int:
        return self.params.shape[0]


@dataclass(frozen=True, eq=False)
class ReducedBasis:
    """Leading POD modes with their grid derivatives and the full spectrum."""

    grid: Grid
    ell: int
    basis: np.ndarray  # (n, ell)
    basis_dx: np.ndarray
    basis_dxx: np.ndarray
    singular_values: np.ndarray  # all min(n, n_s) values, nonincreasing


def assemble_snapshots(problem: ProblemDef, grid: Grid, params: np.ndarray) -> SnapshotSet:
    """Sample the problem's exact solution on the grid for each parameter."""
    params = np.atleast_2d(np.asarray(params, dtype=float))
    values = np.empty((grid.n, params.shape[0]))
    for i, mu in enumerate(params):
        values[:, i] = problem.exact(grid.points, problem.check_mu(mu))
    if not np.all(np.isfinite(values)):
        raise NumericError("snapshot matrix contains non-finite entries")
    return SnapshotSet(grid=grid, params=params, values=values)


def _fix_signs(b: np.ndarray) -> np.ndarray:
    """Make the first nonzero entry of each column positive (reproducibility)."""
    for j in range(b.shape[1]):
        nz = np.nonzero(b[:, j])[0]
        if nz.size and b[nz[0], j] < 0.0:
            b[:, j] = -b[:, j]
    return b


def compute_pod(snapshots: SnapshotSet, ell: int) -> ReducedBasis:
    """SVD of the snapshot matrix, truncated to the first ell left vectors."""
    s = snapshots.values
    if ell < 1 or ell > min(s.shape):
        raise ConfigError(f"ell={ell} must be in [1, min(n, n_s)] = [1, {min(s.shape)}]")
    if not np.all(np.isfinite(s)):
        raise NumericError("snapshot matrix contains non-finite entries")
    try:
        b, sigma, _ = np.linalg.svd(s, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"SVD did not converge: {exc}") from exc
    basis = _fix_signs(b[:, :ell].copy())
    d1 = diff_operator(snapshots.grid, 1)
    d2 = diff_operator(snapshots.grid, 2)
    return ReducedBasis(
        grid=snapshots.grid,
        ell=ell,
        basis=basis,
        basis_dx=d1.apply(basis),
        basis_dxx=d2.apply(basis),
        singular_values=sigma,
    )


def project(basis: ReducedBasis, r: int, field: np.ndarray) -> np.ndarray:
    """Euclidean coefficients of grid values on the first r basis columns."""
    if r < 1 or r > basis.ell:
        raise ConfigError(f"r={r} must be in [1, ell] = [1, {basis.ell}]")
    return basis.basis[:, :r].T @ np.asarray(field, dtype=float)


def reconstruct_linear(basis: ReducedBasis, coeffs: np.ndarray) -> np.ndarray:
    """Linear combination of the first len(coeffs) basis columns."""
    r = coeffs.shape[0]
    return basis.basis[:, :r] @ coeffs
