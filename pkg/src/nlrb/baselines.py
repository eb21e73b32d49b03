"""Linear comparison methods: POD-NN regression and optimal projection.

POD-NN regresses parameters to reduced coefficients with the same trunk
architecture as the hypernetwork (4 hidden layers of 100 swish units) so
accuracy differences against the nonlinear model isolate the linear-vs-
nonlinear reconstruction, not capacity.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, TrainingError
from .grid import Quadrature
from .kernels_np import mlp_backward, mlp_forward
from .model import THETA_HIDDEN, OfflineDataset
from .net import MlpSpec, init_params
from .pod import ReducedBasis, project


@dataclass(frozen=True)
class PodnnConfig:
    epochs: int = 15000
    lr: float = 1e-3
    lr_decay: float = 0.5
    lr_decay_every: int = 2000
    seed: int = 0


@dataclass(frozen=True)
class PodNnModel:
    """Regression net mu -> r reduced coefficients over a fixed basis."""

    r: int
    spec: MlpSpec
    params: np.ndarray
    mu_lo: np.ndarray
    mu_hi: np.ndarray

    def coefficients(self, mus: np.ndarray) -> np.ndarray:
        mu_n = 2.0 * (np.atleast_2d(mus) - self.mu_lo) / (self.mu_hi - self.mu_lo) - 1.0
        out, _ = mlp_forward(self.spec, self.params, mu_n)
        return out


def train_podnn(
    basis: ReducedBasis,
    r: int,
    dataset: OfflineDataset,
    cfg: PodnnConfig,
    mu_domain: np.ndarray,
) -> tuple[PodNnModel, np.ndarray]:
    """Adam on the supervised coefficient loss sum_i ||c_i - G(mu_i)||^2."""
    if r < 1 or r > basis.ell:
        raise ConfigError(f"r={r} must be in [1, ell]")
    labels = np.stack([project(basis, r, u) for u in dataset.values])
    mu_domain = np.asarray(mu_domain, dtype=float)
    mu_dim = dataset.params.shape[1]
    spec = MlpSpec((mu_dim, *THETA_HIDDEN, r), "swish")
    rng = np.random.default_rng(cfg.seed)
    params = init_params(spec, rng)
    mu_lo, mu_hi = mu_domain[:, 0], mu_domain[:, 1]
    mu_n = 2.0 * (dataset.params - mu_lo) / (mu_hi - mu_lo) - 1.0
    m = np.zeros_like(params)
    v = np.zeros_like(params)
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    history = np.empty(cfg.epochs)
    for epoch in range(cfg.epochs):
        if cfg.lr_decay_every > 0:
            lr = cfg.lr * cfg.lr_decay ** (epoch // cfg.lr_decay_every)
        else:
            lr = cfg.lr
        out, cache = mlp_forward(spec, params, mu_n)
        resid = out - labels
        loss = float(np.sum(resid * resid))
        history[epoch] = loss
        if not np.isfinite(loss):
            raise TrainingError("POD-NN loss diverged", epoch=epoch)
        grad, _ = mlp_backward(spec, params, cache, 2.0 * resid)
        t = epoch + 1
        m += (1.0 - beta1) * (grad - m)
        v += (1.0 - beta2) * (grad * grad - v)
        params = params - lr * (m / (1.0 - beta1**t)) / (np.sqrt(v / (1.0 - beta2**t)) + eps)
    model = PodNnModel(r=r, spec=spec, params=params, mu_lo=mu_lo.copy(), mu_hi=mu_hi.copy())
    return model, history


def podnn_predict(model: PodNnModel, basis: ReducedBasis, mus: np.ndarray) -> np.ndarray:
    """Predicted grid values (rows): linear combinations of the first r modes."""
    coeffs = model.coefficients(mus)
    return coeffs @ basis.basis[:, : model.r].T


def optimal_projection_error(
    basis: ReducedBasis, r: int, field: np.ndarray, quad: Quadrature
) -> float:
    """Relative error of the best approximation in span(psi_1..psi_r).

    Best is taken in the quadrature-weighted L2 norm (the norm errors are
    reported in), so the error is nonincreasing in r by nested subspaces.
    """
    if r < 1 or r > basis.ell:
        raise ConfigError(f"r={r} must be in [1, ell]")
    a = basis.basis[:, :r]
    w = quad.weights
    gram = a.T @ (w[:, None] * a)
    rhs = a.T @ (w * field)
    coeffs = np.linalg.solve(gram, rhs)
    return quad.norm(field - a @ coeffs) / quad.norm(field)
