"""Pure-numpy training kernels (reference backend).

Three families:

* generic batched MLP forward/backward for the hypernetwork and the
  dimension-reduction net (BLAS-bound, shared by both backends);
* "jet" variants propagating first/second spatial derivatives alongside
  values, so d/dx and d2/dx2 of network outputs are exact chain-rule values;
* specialized kernels for the small reconstruction net, whose parameters
  come per-sample from the hypernetwork, plus a fused online PINN loop.

The reconstruction net is a fixed two-layer shape (r inputs, h hidden, one
output); its flat parameter layout matches net.FlatParams: W1, b1, W2, b2.
Batched intermediates use a (B, h, n) layout so the contractions dispatch
to batched GEMMs.
"""

from __future__ import annotations

import numpy as np

from .net import MlpSpec, act_derivs, unflatten

# ---------------------------------------------------------------------------
# generic MLPs (shared parameters, batched over rows)
# ---------------------------------------------------------------------------


def mlp_forward(spec: MlpSpec, flat: np.ndarray, x: np.ndarray):
    """Batched forward pass; returns (Y, cache) with per-layer (input, preact)."""
    layers = unflatten(spec, flat)
    aid = spec.act_id
    a = x
    cache = []
    last = len(layers) - 1
    for k, (w, b) in enumerate(layers):
        z = a @ w.T + b
        cache.append((a, z))
        a = z if k == last else act_derivs(aid, z, 0)[0]
    return a, cache


def mlp_backward(spec: MlpSpec, flat: np.ndarray, cache, gy: np.ndarray):
    """Gradient of sum(gy * Y) w.r.t. flat params; also returns input grad."""
    layers = unflatten(spec, flat)
    aid = spec.act_id
    nl = len(layers)
    gflat = np.empty_like(flat)
    off = flat.size
    g = gy
    for k in range(nl - 1, -1, -1):
        a_in, z = cache[k]
        if k != nl - 1:
            g = g * act_derivs(aid, z, 1)[1]
        w, b = layers[k]
        off -= b.size
        gflat[off : off + b.size] = g.sum(axis=0)
        off -= w.size
        gflat[off : off + w.size] = (g.T @ a_in).ravel()
        g = g @ w
    return gflat, g


def mlp_jet1_forward(spec: MlpSpec, flat: np.ndarray, x0: np.ndarray, x1: np.ndarray):
    """Forward pass carrying first directional derivatives (value, d/dx)."""
    layers = unflatten(spec, flat)
    aid = spec.act_id
    a0, a1 = x0, x1
    cache = []
    last = len(layers) - 1
    for k, (w, b) in enumerate(layers):
        z0 = a0 @ w.T + b
        z1 = a1 @ w.T
        cache.append((a0, a1, z0, z1))
        if k == last:
            a0, a1 = z0, z1
        else:
            v, d1 = act_derivs(aid, z0, 1)
            a0, a1 = v, d1 * z1
    return a0, a1, cache


def mlp_jet1_backward(spec: MlpSpec, flat: np.ndarray, cache, g0: np.ndarray, g1: np.ndarray):
    """Backward through mlp_jet1_forward for upstream grads on (value, d/dx)."""
    layers = unflatten(spec, flat)
    aid = spec.act_id
    nl = len(layers)
    gflat = np.empty_like(flat)
    off = flat.size
    for k in range(nl - 1, -1, -1):
        a0_in, a1_in, z0, z1 = cache[k]
        if k != nl - 1:
            _, d1, d2 = act_derivs(aid, z0, 2)
            gz0 = g0 * d1 + g1 * d2 * z1
            gz1 = g1 * d1
        else:
            gz0, gz1 = g0, g1
        w, b = layers[k]
        off -= b.size
        gflat[off : off + b.size] = gz0.sum(axis=0)
        off -= w.size
        gflat[off : off + w.size] = (gz0.T @ a0_in + gz1.T @ a1_in).ravel()
        g0 = gz0 @ w
        g1 = gz1 @ w
    return gflat, g0, g1


def mlp_jet2_forward(spec: MlpSpec, flat: np.ndarray, x0, x1, x2):
    """Forward pass carrying (value, d/dx, d2/dx2)."""
    layers = unflatten(spec, flat)
    aid = spec.act_id
    a0, a1, a2 = x0, x1, x2
    last = len(layers) - 1
    for k, (w, b) in enumerate(layers):
        z0 = a0 @ w.T + b
        z1 = a1 @ w.T
        z2 = a2 @ w.T
        if k == last:
            a0, a1, a2 = z0, z1, z2
        else:
            v, d1, d2 = act_derivs(aid, z0, 2)
            a0 = v
            a1 = d1 * z1
            a2 = d2 * z1 * z1 + d1 * z2
    return a0, a1, a2


# ---------------------------------------------------------------------------
# reconstruction net with per-sample parameters from the hypernetwork
# ---------------------------------------------------------------------------


def unpack_u(theta: np.ndarray, r: int, h: int):
    """Views into flat reconstruction-net parameters: W1, b1, W2, b2.

    b2 keeps a trailing singleton axis so the pieces stay writable views
    for 1-D and 2-D theta alike.
    """
    lead = theta.shape[:-1]
    w1 = theta[..., : h * r].reshape(*lead, h, r)
    b1 = theta[..., h * r : h * r + h]
    w2 = theta[..., h * r + h : h * r + 2 * h]
    b2 = theta[..., h * r + 2 * h :]
    return w1, b1, w2, b2


def u_val_fwd(theta: np.ndarray, r: int, h: int, aid: int, f0: np.ndarray) -> np.ndarray:
    """Values only: theta (B,P), shared features f0 (n,r) -> (B,n)."""
    w1, b1, w2, b2 = unpack_u(theta, r, h)
    z0 = w1 @ f0.T + b1[:, :, None]
    a0 = act_derivs(aid, z0, 0)[0]
    return (w2[:, None, :] @ a0)[:, 0, :] + b2


def u_jet1_fwd(theta: np.ndarray, r: int, h: int, aid: int, f0: np.ndarray, f1: np.ndarray):
    """(value, d/dx) of the reconstruction net at all grid points, per sample.

    The (B, h, n) intermediates are computed as single (B*h, n) GEMMs.
    """
    nb = theta.shape[0]
    n = f0.shape[0]
    w1, b1, w2, b2 = unpack_u(theta, r, h)
    w1f = w1.reshape(nb * h, r)
    f0t = np.ascontiguousarray(f0.T)
    f1t = np.ascontiguousarray(f1.T)
    z0 = (w1f @ f0t).reshape(nb, h, n)
    z0 += b1[:, :, None]
    z1 = (w1f @ f1t).reshape(nb, h, n)
    a0, d1, d2 = act_derivs(aid, z0, 2)
    a1 = d1 * z1
    w2r = w2[:, None, :]
    u0 = (w2r @ a0)[:, 0, :] + b2
    u1 = (w2r @ a1)[:, 0, :]
    return u0, u1, (z1, a0, a1, d1, d2)


def u_jet1_bwd(theta, r, h, aid, f0, f1, cache, g0, g1):
    """Backward of u_jet1_fwd: grads w.r.t. theta rows and shared features."""
    nb = theta.shape[0]
    w1, b1, w2, b2 = unpack_u(theta, r, h)
    z1, a0, a1, d1, d2 = cache
    ga0 = w2[:, :, None] * g0[:, None, :]
    ga1 = w2[:, :, None] * g1[:, None, :]
    gz0 = ga0 * d1 + ga1 * d2 * z1
    gz1 = ga1 * d1
    gtheta = np.empty_like(theta)
    gw1, gb1, gw2, gb2 = unpack_u(gtheta, r, h)
    gz0f = gz0.reshape(-1, gz0.shape[2])
    gz1f = gz1.reshape(-1, gz1.shape[2])
    gw1[:] = (gz0f @ f0 + gz1f @ f1).reshape(nb, h, r)
    gb1[:] = gz0.sum(axis=2)
    gw2[:] = (a0 @ g0[:, :, None] + a1 @ g1[:, :, None])[:, :, 0]
    gb2[:] = g0.sum(axis=1, keepdims=True)
    w1f = w1.reshape(nb * h, r)
    gf0 = gz0f.T @ w1f
    gf1 = gz1f.T @ w1f
    return gtheta, gf0, gf1


def u_jet2_fwd(theta: np.ndarray, r: int, h: int, aid: int, f0, f1, f2):
    """(value, d/dx, d2/dx2) for one parameter vector at m sample points."""
    w1, b1, w2, b2 = unpack_u(theta, r, h)
    z0 = f0 @ w1.T + b1
    z1 = f1 @ w1.T
    z2 = f2 @ w1.T
    a0, d1, d2, d3 = act_derivs(aid, z0, 3)
    a1 = d1 * z1
    a2 = d2 * z1 * z1 + d1 * z2
    u0 = a0 @ w2 + b2[0]
    u1 = a1 @ w2
    u2 = a2 @ w2
    return u0, u1, u2, (z1, z2, a0, a1, a2, d1, d2, d3)


def u_jet2_bwd(theta, r, h, aid, f0, f1, f2, cache, g0, g1, g2):
    """Backward of u_jet2_fwd; returns the flat parameter gradient."""
    w1, b1, w2, b2 = unpack_u(theta, r, h)
    z1, z2, a0, a1, a2, d1, d2, d3 = cache
    ga0 = g0[:, None] * w2[None, :]
    ga1 = g1[:, None] * w2[None, :]
    ga2 = g2[:, None] * w2[None, :]
    gz0 = ga0 * d1 + ga1 * d2 * z1 + ga2 * (d3 * z1 * z1 + d2 * z2)
    gz1 = ga1 * d1 + 2.0 * ga2 * d2 * z1
    gz2 = ga2 * d1
    gtheta = np.empty_like(theta)
    gw1, gb1, gw2, gb2 = unpack_u(gtheta, r, h)
    gw1[:] = gz0.T @ f0 + gz1.T @ f1 + gz2.T @ f2
    gb1[:] = gz0.sum(axis=0)
    gw2[:] = a0.T @ g0 + a1.T @ g1 + a2.T @ g2
    gb2[:] = g0.sum()
    return gtheta


def u_val_single_bwd(theta, r, h, aid, f0, g0):
    """Parameter gradient of plain values for one theta at m points."""
    w1, b1, w2, b2 = unpack_u(theta, r, h)
    z0 = f0 @ w1.T + b1
    a0, d1 = act_derivs(aid, z0, 1)
    gz0 = (g0[:, None] * w2[None, :]) * d1
    gtheta = np.empty_like(theta)
    gw1, gb1, gw2, gb2 = unpack_u(gtheta, r, h)
    gw1[:] = gz0.T @ f0
    gb1[:] = gz0.sum(axis=0)
    gw2[:] = a0.T @ g0
    gb2[:] = g0.sum()
    return gtheta


# ---------------------------------------------------------------------------
# fused online adaptation loop
# ---------------------------------------------------------------------------


def online_adapt_loop(
    theta0,
    theta_star,
    r,
    h,
    aid,
    f0,
    f1,
    f2,
    f0b,
    bc_vals,
    s_vals,
    c_uux,
    c_uxx,
    c_u,
    lambda_bc,
    gamma0,
    rho,
    lr,
    beta1,
    beta2,
    eps,
    stop_tol,
    max_epochs,
):
    """Adam on the discrete PINN loss for the reconstruction-net parameters.

    The loss at epoch k (gamma_k = gamma0 * rho**k) is
    sum(residual^2) + lambda_bc * sum((u_b - bc)^2)
    + gamma_k * ||theta - theta_star||^2, with the residual
    c_uux*u*u_x + c_uxx*u_xx + c_u*u - s. The tolerance is checked before
    each step (so a warm start already below stop_tol takes zero steps).
    Returns (theta_best, losses, epochs_used, diverged).
    """
    theta = theta0.copy()
    m = np.zeros_like(theta)
    v = np.zeros_like(theta)
    losses = np.empty(max_epochs + 1)
    best_loss = np.inf
    best_theta = theta.copy()
    diverged = False
    epochs_used = 0
    for k in range(max_epochs + 1):
        gamma = gamma0 * rho**k
        u0, u1, u2, cache = u_jet2_fwd(theta, r, h, aid, f0, f1, f2)
        res = c_uux * u0 * u1 + c_uxx * u2 + c_u * u0 - s_vals
        ub = u_val_fwd(theta[None, :], r, h, aid, f0b)[0]
        bres = ub - bc_vals
        dtheta = theta - theta_star
        loss = res @ res + lambda_bc * (bres @ bres) + gamma * (dtheta @ dtheta)
        losses[k] = loss
        epochs_used = k
        if not np.isfinite(loss):
            diverged = True
            break
        if loss < best_loss:
            best_loss = loss
            best_theta = theta.copy()
        if loss < stop_tol or k == max_epochs:
            break
        g0 = 2.0 * res * (c_uux * u1 + c_u)
        g1 = 2.0 * res * (c_uux * u0)
        g2 = 2.0 * res * c_uxx
        grad = u_jet2_bwd(theta, r, h, aid, f0, f1, f2, cache, g0, g1, g2)
        grad += u_val_single_bwd(theta, r, h, aid, f0b, 2.0 * lambda_bc * bres)
        grad += 2.0 * gamma * dtheta
        if not np.all(np.isfinite(grad)):
            diverged = True
            break
        m += (1.0 - beta1) * (grad - m)
        v += (1.0 - beta2) * (grad * grad - v)
        t = k + 1
        mhat = m / (1.0 - beta1**t)
        vhat = v / (1.0 - beta2**t)
        theta = theta - lr * mhat / (np.sqrt(vhat) + eps)
    return best_theta, losses[: epochs_used + 1], epochs_used, diverged
