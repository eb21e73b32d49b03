"""Online PINN-style adaptation of the reconstruction-net parameters.

For a new parameter value, the dimension-reduction net and hypernetwork are
frozen; only the small reconstruction net's parameter vector is optimized,
warm-started at the hypernetwork prediction, against the discrete PINN loss
(interior residuals + weighted boundary residuals) plus a geometrically
decaying proximal penalty toward the warm start.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import backend as backend_mod
from .errors import ConfigError
from .grid import interp_matrix
from .kernels_np import mlp_jet2_forward, u_jet2_fwd, u_val_fwd
from .model import U_HIDDEN, CompositeModel, theta_u_for
from .net import init_params
from .pod import ReducedBasis
from .problems import ProblemDef


@dataclass(frozen=True)
class OnlineConfig:
    """Sampling, loss weights, regularization schedule, and stopping."""

    m1: int = 128
    m2: int = 2
    lambda_bc: float = 10.0
    gamma0: float = 1e-2
    rho: float = 0.99
    max_epochs: int = 50000
    stop_tol: float = 1e-4
    lr: float = 1e-3
    seed: int = 0

    def __post_init__(self):
        if self.gamma0 < 0:
            raise ConfigError("gamma0 must be nonnegative")
        if not 0.0 < self.rho < 1.0:
            raise ConfigError("decay factor rho must lie in (0, 1)")
        if self.stop_tol <= 0:
            raise ConfigError("stop_tol must be positive")

    def gamma(self, epoch: int) -> float:
        return self.gamma0 * self.rho**epoch


@dataclass(frozen=True)
class AdaptationResult:
    """Outcome of one adaptation run."""

    theta_u_final: np.ndarray
    epochs_used: int
    loss_history: np.ndarray
    wall_time: float
    diverged: bool
    mu_star: np.ndarray
    theta_u_start: np.ndarray


@dataclass(frozen=True)
class OnlinePoints:
    """Sample points with frozen features, derivatives, and targets."""

    x: np.ndarray  # (m1,) interior points
    f0: np.ndarray  # (m1, r) features
    f1: np.ndarray
    f2: np.ndarray
    xb: np.ndarray  # (m2,) boundary points
    f0b: np.ndarray
    s_vals: np.ndarray
    bc_vals: np.ndarray


def pinn_residual(problem: ProblemDef, u, ux, uxx, x, mu):
    """Pointwise interior residual of the problem operator (vectorized)."""
    return problem.residual(u, ux, uxx, x, mu)


def features_at(
    model: CompositeModel, basis: ReducedBasis, points: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Frozen features and spatial derivatives at off-grid points.

    Basis columns and their derivative columns are interpolated to the
    points; the chain rule through the frozen dimension-reduction net is
    evaluated as a second-order jet.
    """
    p = interp_matrix(basis.grid, points)
    return mlp_jet2_forward(
        model.phi_spec,
        model.phi_params,
        p @ basis.basis,
        p @ basis.basis_dx,
        p @ basis.basis_dxx,
    )


def sample_interior(cfg: OnlineConfig, seed: int | None = None) -> np.ndarray:
    rng = np.random.default_rng(cfg.seed if seed is None else seed)
    return rng.uniform(-1.0, 1.0, cfg.m1)


def prepare_online_points(
    model: CompositeModel,
    basis: ReducedBasis,
    problem: ProblemDef,
    mu_star: np.ndarray,
    cfg: OnlineConfig,
    seed: int | None = None,
) -> OnlinePoints:
    """Draw interior points (seeded) and freeze features and targets."""
    mu = problem.check_mu(np.asarray(mu_star, dtype=float))
    x = sample_interior(cfg, seed)
    f0, f1, f2 = features_at(model, basis, x)
    reps = (cfg.m2 + 1) // 2 + 1
    xb = np.tile(np.asarray(problem.boundary_points, dtype=float), reps)[: cfg.m2]
    f0b, _, _ = features_at(model, basis, xb)
    return OnlinePoints(
        x=x,
        f0=f0,
        f1=f1,
        f2=f2,
        xb=xb,
        f0b=f0b,
        s_vals=problem.source(x, mu),
        bc_vals=problem.boundary_value(xb),
    )


def online_loss(
    problem: ProblemDef,
    pts: OnlinePoints,
    theta_u: np.ndarray,
    theta_u_star: np.ndarray,
    cfg: OnlineConfig,
    epoch: int = 0,
    act: str = "tanh",
) -> float:
    """Discrete PINN loss with the decaying proximal term at a given epoch."""
    from .net import act_id

    r = pts.f0.shape[1]
    aid = act_id(act)
    u0, u1, u2, _ = u_jet2_fwd(theta_u, r, U_HIDDEN, aid, pts.f0, pts.f1, pts.f2)
    res = problem.c_uux * u0 * u1 + problem.c_uxx * u2 + problem.c_u * u0 - pts.s_vals
    ub = u_val_fwd(theta_u[None, :], r, U_HIDDEN, aid, pts.f0b)[0]
    bres = ub - pts.bc_vals
    d = theta_u - theta_u_star
    return float(res @ res + cfg.lambda_bc * (bres @ bres) + cfg.gamma(epoch) * (d @ d))


def online_loss_grad(
    problem: ProblemDef,
    pts: OnlinePoints,
    theta_u: np.ndarray,
    theta_u_star: np.ndarray,
    cfg: OnlineConfig,
    epoch: int = 0,
    act: str = "tanh",
) -> np.ndarray:
    """Gradient of online_loss with respect to theta_u."""
    from .kernels_np import u_jet2_bwd, u_val_single_bwd
    from .net import act_id

    r = pts.f0.shape[1]
    aid = act_id(act)
    u0, u1, u2, cache = u_jet2_fwd(theta_u, r, U_HIDDEN, aid, pts.f0, pts.f1, pts.f2)
    res = problem.c_uux * u0 * u1 + problem.c_uxx * u2 + problem.c_u * u0 - pts.s_vals
    ub = u_val_fwd(theta_u[None, :], r, U_HIDDEN, aid, pts.f0b)[0]
    bres = ub - pts.bc_vals
    g0 = 2.0 * res * (problem.c_uux * u1 + problem.c_u)
    g1 = 2.0 * res * (problem.c_uux * u0)
    g2 = 2.0 * res * problem.c_uxx
    grad = u_jet2_bwd(theta_u, r, U_HIDDEN, aid, pts.f0, pts.f1, pts.f2, cache, g0, g1, g2)
    grad += u_val_single_bwd(theta_u, r, U_HIDDEN, aid, pts.f0b, 2.0 * cfg.lambda_bc * bres)
    grad += 2.0 * cfg.gamma(epoch) * (theta_u - theta_u_star)
    return grad


def adapt(
    model: CompositeModel,
    basis: ReducedBasis,
    problem: ProblemDef,
    mu_star: np.ndarray,
    cfg: OnlineConfig,
    seed: int | None = None,
    init: str = "warm",
    backend: str | None = None,
) -> AdaptationResult:
    """Minimize the online loss over theta_U, warm-started at Theta(mu*).

    The stopping tolerance is checked before the first step, so a warm
    start already below stop_tol returns immediately with epochs_used=0.
    On divergence the best parameters seen so far are returned with the
    diverged flag set. Phi and Theta are never modified.
    """
    mu = problem.check_mu(np.asarray(mu_star, dtype=float))
    pts = prepare_online_points(model, basis, problem, mu, cfg, seed)
    theta_star = theta_u_for(model, mu)
    if init == "warm":
        theta0 = theta_star
    elif init == "random":
        rng = np.random.default_rng((cfg.seed if seed is None else seed) + 1)
        theta0 = init_params(model.u_spec, rng)
    else:
        raise ConfigError(f"init must be 'warm' or 'random', got {init!r}")
    k = backend_mod.kernels(backend)
    t0 = time.perf_counter()
    theta_best, losses, epochs_used, diverged = k.online_adapt_loop(
        theta0,
        theta_star,
        model.r,
        U_HIDDEN,
        model.u_spec.act_id,
        pts.f0,
        pts.f1,
        pts.f2,
        pts.f0b,
        pts.bc_vals,
        pts.s_vals,
        problem.c_uux,
        problem.c_uxx,
        problem.c_u,
        cfg.lambda_bc,
        cfg.gamma0,
        cfg.rho,
        cfg.lr,
        0.9,
        0.999,
        1e-8,
        cfg.stop_tol,
        cfg.max_epochs,
    )
    wall = time.perf_counter() - t0
    return AdaptationResult(
        theta_u_final=theta_best,
        epochs_used=int(epochs_used),
        loss_history=losses,
        wall_time=wall,
        diverged=bool(diverged),
        mu_star=mu,
        theta_u_start=theta0.copy(),
    )


def reconstruct_adapted(
    model: CompositeModel, basis: ReducedBasis, theta_u: np.ndarray
) -> np.ndarray:
    """Grid values of the reconstruction net for an adapted parameter vector."""
    f0, _, _ = mlp_jet2_forward(
        model.phi_spec, model.phi_params, basis.basis, basis.basis_dx, basis.basis_dxx
    )
    return u_val_fwd(theta_u[None, :], model.r, U_HIDDEN, model.u_spec.act_id, f0)[0]
