"""Composite surrogate: hypernetwork-conditioned nonlinear reconstruction.

The surrogate maps initial basis functions psi_1..psi_ell and a parameter
mu to grid values via u(x) = U(Phi(psi(x)); Theta(mu)). Phi (ell -> r, one
hidden layer of r swish units) produces the working features, Theta
(mu -> 100x4 swish -> 5r+11) emits the flat parameters of the small tanh
reconstruction net U (r -> 5 -> 1). Offline training minimizes a
quadrature-discretized H^1 misfit against snapshot values and their
analytic spatial derivatives, with Adam on (theta_Phi, theta_Theta)
jointly; gradients flow into Theta through U's parameter slot.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import backend as backend_mod
from .errors import ConfigError, TrainingError
from .grid import quadrature_weights
from .kernels_np import mlp_forward, mlp_jet2_forward
from .net import MlpSpec, init_params
from .pod import ReducedBasis, SnapshotSet
from .problems import ProblemDef

U_HIDDEN = 5
THETA_HIDDEN = (100, 100, 100, 100)


@dataclass(frozen=True)
class CompositeModel:
    """Specs plus trained flat parameters of Phi and Theta."""

    ell: int
    r: int
    mu_dim: int
    phi_spec: MlpSpec
    u_spec: MlpSpec
    theta_spec: MlpSpec
    phi_params: np.ndarray
    theta_params: np.ndarray
    mu_lo: np.ndarray
    mu_hi: np.ndarray
    seed: int = 0


@dataclass(frozen=True)
class OfflineConfig:
    """Sobolev loss weights and Adam schedule for offline training."""

    p: int = 1
    lambda0: float = 1.0
    lambda1: float = 1e-3
    epochs: int = 15000
    lr: float = 1e-3
    lr_decay: float = 0.5
    lr_decay_every: int = 2000
    seed: int = 0

    def __post_init__(self):
        if self.p not in (0, 1):
            raise ConfigError("offline loss supports p in {0, 1}")
        if self.lambda0 < 0 or self.lambda1 < 0:
            raise ConfigError("loss weights must be nonnegative")


@dataclass(frozen=True)
class OfflineDataset:
    """Labelled training data: parameters, values, and d/dx values (rows)."""

    params: np.ndarray  # (n_f, mu_dim)
    values: np.ndarray  # (n_f, n)
    dvalues: np.ndarray  # (n_f, n)


def build_composite(
    ell: int, r: int, mu_dim: int, mu_domain: np.ndarray, seed: int
) -> CompositeModel:
    """Architecture per the reference setup; Glorot init, zero biases."""
    if not 1 <= r <= ell:
        raise ConfigError(f"need 1 <= r <= ell, got r={r}, ell={ell}")
    phi_spec = MlpSpec((ell, r, r), "swish")
    u_spec = MlpSpec((r, U_HIDDEN, 1), "tanh")
    theta_spec = MlpSpec((mu_dim, *THETA_HIDDEN, u_spec.n_params), "swish")
    if u_spec.n_params != 5 * r + 11:
        raise ConfigError(
            f"reconstruction net has {u_spec.n_params} parameters, expected {5 * r + 11}"
        )
    rng = np.random.default_rng(seed)
    mu_domain = np.asarray(mu_domain, dtype=float)
    return CompositeModel(
        ell=ell,
        r=r,
        mu_dim=mu_dim,
        phi_spec=phi_spec,
        u_spec=u_spec,
        theta_spec=theta_spec,
        phi_params=init_params(phi_spec, rng),
        theta_params=init_params(theta_spec, rng),
        mu_lo=mu_domain[:, 0].copy(),
        mu_hi=mu_domain[:, 1].copy(),
        seed=seed,
    )


def normalize_mu(model: CompositeModel, mu: np.ndarray) -> np.ndarray:
    """Affine map of each parameter component onto [-1, 1]."""
    mu = np.asarray(mu, dtype=float)
    return 2.0 * (mu - model.mu_lo) / (model.mu_hi - model.mu_lo) - 1.0


def theta_u_for(model: CompositeModel, mu: np.ndarray) -> np.ndarray:
    """Hypernetwork output: flat reconstruction-net parameters for mu."""
    mu2 = np.atleast_2d(normalize_mu(model, mu))
    out, _ = mlp_forward(model.theta_spec, model.theta_params, mu2)
    return out[0] if np.asarray(mu).ndim == 1 else out


def evaluate_basis_features(
    basis: ReducedBasis, phi_spec: MlpSpec, phi_params: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Working features Phi(psi(x)) with d/dx and d2/dx2 at every grid point.

    First derivatives use the Jacobian-vector chain rule through Phi; second
    derivatives add the Hessian bilinear term, both propagated as second-
    order jets.
    """
    if basis.ell != phi_spec.layer_sizes[0]:
        raise ConfigError(
            f"basis has ell={basis.ell}, Phi expects {phi_spec.layer_sizes[0]} inputs"
        )
    return mlp_jet2_forward(phi_spec, phi_params, basis.basis, basis.basis_dx, basis.basis_dxx)


def reconstruct(model: CompositeModel, basis_features: np.ndarray, mu: np.ndarray) -> np.ndarray:
    """Grid values U(features; Theta(mu)) for a single parameter value."""
    k = backend_mod.kernels()
    theta_u = theta_u_for(model, np.asarray(mu, dtype=float))
    return k.u_val_fwd(theta_u[None, :], model.r, U_HIDDEN, model.u_spec.act_id, basis_features)[0]


def predict_offline(model: CompositeModel, basis: ReducedBasis, mus: np.ndarray) -> np.ndarray:
    """Offline-stage predictions (rows) for a batch of parameter values."""
    k = backend_mod.kernels()
    f0, _, _ = evaluate_basis_features(basis, model.phi_spec, model.phi_params)
    th = theta_u_for(model, np.atleast_2d(mus))
    return k.u_val_fwd(th, model.r, U_HIDDEN, model.u_spec.act_id, f0)


def make_offline_dataset(problem: ProblemDef, snapshots: SnapshotSet) -> OfflineDataset:
    """Labelled rows from snapshots; derivative targets are analytic."""
    values = snapshots.values.T.copy()
    if problem.exact_dx is not None:
        dvalues = np.empty_like(values)
        for i, mu in enumerate(snapshots.params):
            dvalues[i] = problem.exact_dx(snapshots.grid.points, mu)
    else:
        from .grid import diff_operator

        dvalues = diff_operator(snapshots.grid, 1).apply(snapshots.values).T.copy()
    return OfflineDataset(params=snapshots.params.copy(), values=values, dvalues=dvalues)


def _loss_and_grads(model, psi0, psi1, mu_n, uh, uhx, wq, cfg, k):
    """Full-batch Sobolev loss and gradients w.r.t. (phi, theta) params."""
    aid_u = model.u_spec.act_id
    f0, f1, phi_cache = k.mlp_jet1_forward(model.phi_spec, model.phi_params, psi0, psi1)
    th, th_cache = k.mlp_forward(model.theta_spec, model.theta_params, mu_n)
    u0, u1, u_cache = k.u_jet1_fwd(th, model.r, U_HIDDEN, aid_u, f0, f1)
    r0 = u0 - uh
    r1 = u1 - uhx
    loss = cfg.lambda0 * float(np.sum((r0 * r0) @ wq)) + cfg.lambda1 * float(np.sum((r1 * r1) @ wq))
    g0 = (2.0 * cfg.lambda0) * r0 * wq
    g1 = (2.0 * cfg.lambda1) * r1 * wq
    gth, gf0, gf1 = k.u_jet1_bwd(th, model.r, U_HIDDEN, aid_u, f0, f1, u_cache, g0, g1)
    g_theta, _ = k.mlp_backward(model.theta_spec, model.theta_params, th_cache, gth)
    g_phi, _, _ = k.mlp_jet1_backward(model.phi_spec, model.phi_params, phi_cache, gf0, gf1)
    return loss, g_phi, g_theta


def _prepare_arrays(model, basis, dataset, cfg):
    wq = quadrature_weights(basis.grid).weights
    mu_n = normalize_mu(model, dataset.params)
    if cfg.p == 0:
        uhx = np.zeros_like(dataset.dvalues)
        cfg = replace(cfg, lambda1=0.0)
    else:
        uhx = dataset.dvalues
    return basis.basis, basis.basis_dx, mu_n, dataset.values, uhx, wq, cfg


def offline_loss(
    model: CompositeModel,
    basis: ReducedBasis,
    dataset: OfflineDataset,
    cfg: OfflineConfig,
    backend: str | None = None,
) -> float:
    """Quadrature-discretized weighted H^p misfit summed over samples."""
    k = backend_mod.kernels(backend)
    psi0, psi1, mu_n, uh, uhx, wq, cfg = _prepare_arrays(model, basis, dataset, cfg)
    loss, _, _ = _loss_and_grads(model, psi0, psi1, mu_n, uh, uhx, wq, cfg, k)
    if not np.isfinite(loss):
        raise TrainingError("offline loss is not finite")
    return loss


def train_offline(
    basis: ReducedBasis,
    dataset: OfflineDataset,
    cfg: OfflineConfig,
    mu_domain: np.ndarray,
    model: CompositeModel | None = None,
    r: int | None = None,
    backend: str | None = None,
) -> tuple[CompositeModel, np.ndarray]:
    """Adam on (theta_Phi, theta_Theta) jointly; returns model and history."""
    if dataset.params.shape[0] == 0:
        raise ConfigError("offline training needs a nonempty dataset")
    if model is None:
        if r is None:
            raise ConfigError("pass either a model or the reduced dimension r")
        model = build_composite(basis.ell, r, dataset.params.shape[1], mu_domain, cfg.seed)
    k = backend_mod.kernels(backend)
    psi0, psi1, mu_n, uh, uhx, wq, cfg_eff = _prepare_arrays(model, basis, dataset, cfg)
    phi = model.phi_params.copy()
    theta = model.theta_params.copy()
    n_phi = phi.size
    params = np.concatenate([phi, theta])
    m = np.zeros_like(params)
    v = np.zeros_like(params)
    history = np.empty(cfg.epochs)
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    cur = model
    for epoch in range(cfg.epochs):
        if cfg.lr_decay_every > 0:
            lr = cfg.lr * cfg.lr_decay ** (epoch // cfg.lr_decay_every)
        else:
            lr = cfg.lr
        cur = replace(model, phi_params=params[:n_phi], theta_params=params[n_phi:])
        loss, g_phi, g_theta = _loss_and_grads(cur, psi0, psi1, mu_n, uh, uhx, wq, cfg_eff, k)
        history[epoch] = loss
        if not np.isfinite(loss):
            raise TrainingError("offline loss diverged", epoch=epoch)
        grad = np.concatenate([g_phi, g_theta])
        if not np.all(np.isfinite(grad)):
            raise TrainingError("offline gradient is not finite", epoch=epoch)
        t = epoch + 1
        m += (1.0 - beta1) * (grad - m)
        v += (1.0 - beta2) * (grad * grad - v)
        mhat = m / (1.0 - beta1**t)
        vhat = v / (1.0 - beta2**t)
        params = params - lr * mhat / (np.sqrt(vhat) + eps)
    trained = replace(model, phi_params=params[:n_phi].copy(), theta_params=params[n_phi:].copy())
    return trained, history
