"""Collocation grids on [-1, 1] with differentiation matrices and quadrature.

Two node families are supported:

* ``uniform`` -- equispaced nodes, finite-difference operators of design
  order 4 (centered 5-point stencils inside, 6-point offset closures at the
  boundary), trapezoid quadrature.
* ``chebyshev`` -- Chebyshev-Gauss-Lobatto nodes ``cos(pi*k/(n-1))`` in
  ascending order, barycentric spectral differentiation matrices (Welfert's
  recursion for the second derivative, not ``D @ D``) and Clenshaw-Curtis
  quadrature.

Differentiation matrices are built with the negative-sum diagonal, and
``DiffOperator.apply`` evaluates ``y_i = sum_j D_ij * (f_j - f_i)``, which
annihilates constants exactly and avoids the cancellation blow-up of the
corner rows at large ``n``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

UNIFORM = "uniform"
CHEBYSHEV = "chebyshev"
GRID_KINDS = (UNIFORM, CHEBYSHEV)

#: smallest grid accepted by build_grid; the boundary closures need 6 nodes
#: and the Sobolev/PINN losses are meaningless on anything coarser.
MIN_POINTS = 8


def grid_points(n: int, kind: str) -> np.ndarray:
    """Node formula only (no size guard): n points of the given kind on [-1, 1].

    Chebyshev nodes use the sine form ``sin(pi*(2k-n+1)/(2n-2))`` which is
    exactly antisymmetric and hits the endpoints exactly.
    """
    if n < 2:
        raise ConfigError(f"need at least 2 points, got n={n}")
    if kind == UNIFORM:
        return np.linspace(-1.0, 1.0, n)
    if kind == CHEBYSHEV:
        big_n = n - 1
        k = np.arange(n)
        return np.sin(np.pi * (2.0 * k - big_n) / (2.0 * big_n))
    raise ConfigError(f"unknown grid kind {kind!r}; expected one of {GRID_KINDS}")


@dataclass(frozen=True, eq=False)
class Grid:
    """Immutable 1-D collocation grid on [-1, 1]."""

    points: np.ndarray
    n: int
    kind: str

    def asdict(self) -> dict:
        return {"n": self.n, "kind": self.kind}


def build_grid(n: int, kind: str = CHEBYSHEV) -> Grid:
    """Construct a usable grid; requires ``n >= 8``."""
    if n < MIN_POINTS:
        raise ConfigError(f"grid needs n >= {MIN_POINTS}, got n={n}")
    pts = grid_points(n, kind)
    pts.setflags(write=False)
    return Grid(points=pts, n=n, kind=kind)


@dataclass(frozen=True, eq=False)
class DiffOperator:
    """Dense n x n matrix mapping grid values to derivative values."""

    order: int
    matrix: np.ndarray

    def apply(self, values: np.ndarray) -> np.ndarray:
        """Differentiate grid values (vector or n x m column stack).

        Uses the shifted product ``sum_j D_ij (f_j - f_i)``; the matrix rows
        sum to zero, so this equals ``matrix @ values`` in exact arithmetic
        but keeps constants at exactly zero in floating point.
        """
        f = np.asarray(values, dtype=float)
        squeeze = f.ndim == 1
        cols = f[:, None] if squeeze else f
        out = np.empty_like(cols)
        for j in range(cols.shape[1]):
            diff = cols[None, :, j] - cols[:, None, j]
            out[:, j] = np.einsum("ij,ij->i", self.matrix, diff)
        return out[:, 0] if squeeze else out


def fornberg_weights(x0: float, nodes: np.ndarray, order: int) -> np.ndarray:
    """Finite-difference weights for d^order/dx^order at x0 on arbitrary nodes.

    Fornberg's recursion (Math. Comp. 51, 1988); exact on polynomials up to
    degree ``len(nodes) - 1``.
    """
    nodes = np.asarray(nodes, dtype=float)
    m = len(nodes)
    if order >= m:
        raise ConfigError(f"need more than {order} nodes for derivative order {order}")
    c = np.zeros((m, order + 1))
    c[0, 0] = 1.0
    c1 = 1.0
    c4 = nodes[0] - x0
    for i in range(1, m):
        mn = min(i, order)
        c2 = 1.0
        c5 = c4
        c4 = nodes[i] - x0
        for j in range(i):
            c3 = nodes[i] - nodes[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c[:, order]


def _uniform_diff_matrix(x: np.ndarray, order: int) -> np.ndarray:
    """Design-order-4 FD matrix: centered 5-point interior, 6-point closures."""
    n = len(x)
    d = np.zeros((n, n))
    for i in range(n):
        if 2 <= i <= n - 3:
            sl = slice(i - 2, i + 3)
        elif i < 2:
            sl = slice(0, 6)
        else:
            sl = slice(n - 6, n)
        w = fornberg_weights(x[i], x[sl], order)
        w[np.argmax(np.abs(w))] -= w.sum()  # derivative rows must sum to 0 exactly
        d[i, sl] = w
    return d


def _cheb_barycentric_weights(n: int) -> np.ndarray:
    w = np.ones(n)
    w[0] = w[-1] = 0.5
    w *= (-1.0) ** np.arange(n)
    return w


def _cheb_diff_matrices(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    n = len(x)
    w = _cheb_barycentric_weights(n)
    dx = x[:, None] - x[None, :]
    np.fill_diagonal(dx, 1.0)
    d1 = (w[None, :] / w[:, None]) / dx
    np.fill_diagonal(d1, 0.0)
    np.fill_diagonal(d1, -d1.sum(axis=1))
    # Welfert's recursion for the second-derivative matrix
    d2 = 2.0 * d1 * (np.diag(d1)[:, None] - 1.0 / dx)
    np.fill_diagonal(d2, 0.0)
    np.fill_diagonal(d2, -d2.sum(axis=1))
    return d1, d2


def diff_operator(grid: Grid, order: int) -> DiffOperator:
    """Differentiation matrix of the requested order (1 or 2) for the grid."""
    if order not in (1, 2):
        raise ConfigError(f"derivative order must be 1 or 2, got {order}")
    if grid.kind == CHEBYSHEV:
        d1, d2 = _cheb_diff_matrices(grid.points)
        mat = d1 if order == 1 else d2
    else:
        mat = _uniform_diff_matrix(grid.points, order)
    mat.setflags(write=False)
    return DiffOperator(order=order, matrix=mat)


@dataclass(frozen=True, eq=False)
class Quadrature:
    """Nonnegative weights integrating grid values over [-1, 1]."""

    weights: np.ndarray
    #: polynomial degree integrated exactly
    design_degree: int

    def integrate(self, values: np.ndarray) -> float:
        return float(self.weights @ np.asarray(values, dtype=float))

    def norm(self, values: np.ndarray) -> float:
        """Weighted L2 norm of grid values."""
        v = np.asarray(values, dtype=float)
        return float(np.sqrt(self.weights @ (v * v)))


def quadrature_weights(grid: Grid) -> Quadrature:
    """Trapezoid weights (uniform) or Clenshaw-Curtis weights (chebyshev)."""
    n = grid.n
    if grid.kind == UNIFORM:
        h = 2.0 / (n - 1)
        w = np.full(n, h)
        w[0] = w[-1] = 0.5 * h
        degree = 1
    else:
        # w_k = sum_{j even} 2/(1-j^2) * (2/N) * eps_j * eps_k * cos(j*k*pi/N),
        # the exact integrals of the DCT-I cardinal representation.
        big_n = n - 1
        j = np.arange(0, big_n + 1, 2)
        eps_j = np.where((j == 0) | (j == big_n), 0.5, 1.0)
        eps_k = np.ones(n)
        eps_k[0] = eps_k[-1] = 0.5
        k = np.arange(n)
        table = np.cos(np.pi * np.outer(j, k) / big_n)
        w = eps_k * (2.0 / big_n) * ((2.0 / (1.0 - j.astype(float) ** 2) * eps_j) @ table)
        degree = big_n
    w.setflags(write=False)
    return Quadrature(weights=w, design_degree=degree)


def interp_matrix(grid: Grid, x_query: np.ndarray) -> np.ndarray:
    """Matrix P with P @ f interpolating grid values f at the query points.

    Chebyshev grids use the (second-form) barycentric interpolant of the
    underlying degree n-1 polynomial, so interpolating D-differentiated
    columns is consistent with differentiating the interpolant. Uniform
    grids use local 4-point Lagrange interpolation.
    """
    xq = np.atleast_1d(np.asarray(x_query, dtype=float))
    if np.any(xq < -1.0) or np.any(xq > 1.0):
        raise ConfigError("query points must lie in [-1, 1]")
    x = grid.points
    n = grid.n
    p = np.zeros((len(xq), n))
    if grid.kind == CHEBYSHEV:
        w = _cheb_barycentric_weights(n)
        for i, xi in enumerate(xq):
            diff = xi - x
            hit = np.nonzero(diff == 0.0)[0]
            if hit.size:
                p[i, hit[0]] = 1.0
                continue
            terms = w / diff
            p[i] = terms / terms.sum()
    else:
        for i, xi in enumerate(xq):
            j = int(np.clip(np.searchsorted(x, xi) - 2, 0, n - 4))
            sl = slice(j, j + 4)
            p[i, sl] = fornberg_weights(xi, x[sl], 0)
    return p
