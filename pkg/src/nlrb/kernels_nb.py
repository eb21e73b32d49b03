"""Numba-accelerated twins of the hot kernels in kernels_np.

The generic MLP passes are BLAS-bound and stay on the numpy
implementations; the per-sample reconstruction-net kernels and the fused
online adaptation loop are compiled with @njit (fastmath off, so both
backends agree to rounding). The batched kernels parallelize over samples
with disjoint writes only, keeping results run-to-run deterministic.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit, prange

from .kernels_np import (  # noqa: F401  (shared BLAS-bound kernels)
    mlp_backward,
    mlp_forward,
    mlp_jet1_backward,
    mlp_jet1_forward,
    mlp_jet2_forward,
    unpack_u,
)


@njit(cache=True, inline="always")
def _act3(aid, z):
    """Activation value and first three derivatives at a scalar z."""
    if aid == 1:  # tanh
        t = math.tanh(z)
        d1 = 1.0 - t * t
        d2 = -2.0 * t * d1
        d3 = -2.0 * d1 * d1 - 2.0 * t * d2
        return t, d1, d2, d3
    elif aid == 2:  # swish
        s = 1.0 / (1.0 + math.exp(-z))
        s1 = s * (1.0 - s)
        s2 = s1 * (1.0 - 2.0 * s)
        s3 = s2 * (1.0 - 2.0 * s) - 2.0 * s1 * s1
        return z * s, s + z * s1, 2.0 * s1 + z * s2, 3.0 * s2 + z * s3
    return z, 1.0, 0.0, 0.0


@njit(cache=True, parallel=True)
def _u_val_fwd(theta, r, h, aid, f0):
    nb = theta.shape[0]
    n = f0.shape[0]
    u0 = np.empty((nb, n))
    for b in prange(nb):
        b2 = theta[b, h * r + 2 * h]
        for j in range(n):
            acc = b2
            for i in range(h):
                z = theta[b, h * r + i]
                for k in range(r):
                    z += theta[b, i * r + k] * f0[j, k]
                a, _, _, _ = _act3(aid, z)
                acc += theta[b, h * r + h + i] * a
            u0[b, j] = acc
    return u0


def u_val_fwd(theta, r, h, aid, f0):
    return _u_val_fwd(theta, r, h, aid, np.ascontiguousarray(f0))


@njit(cache=True, parallel=True)
def _u_jet1_fwd(theta, r, h, aid, f0, f1):
    nb = theta.shape[0]
    n = f0.shape[0]
    u0 = np.empty((nb, n))
    u1 = np.empty((nb, n))
    z1c = np.empty((nb, h, n))
    a0c = np.empty((nb, h, n))
    a1c = np.empty((nb, h, n))
    d1c = np.empty((nb, h, n))
    d2c = np.empty((nb, h, n))
    for b in prange(nb):
        b2 = theta[b, h * r + 2 * h]
        for j in range(n):
            acc0 = b2
            acc1 = 0.0
            for i in range(h):
                z0 = theta[b, h * r + i]
                z1 = 0.0
                for k in range(r):
                    w = theta[b, i * r + k]
                    z0 += w * f0[j, k]
                    z1 += w * f1[j, k]
                a, d1, d2, _ = _act3(aid, z0)
                a1v = d1 * z1
                z1c[b, i, j] = z1
                a0c[b, i, j] = a
                a1c[b, i, j] = a1v
                d1c[b, i, j] = d1
                d2c[b, i, j] = d2
                wo = theta[b, h * r + h + i]
                acc0 += wo * a
                acc1 += wo * a1v
            u0[b, j] = acc0
            u1[b, j] = acc1
    return u0, u1, z1c, a0c, a1c, d1c, d2c


def u_jet1_fwd(theta, r, h, aid, f0, f1):
    u0, u1, z1c, a0c, a1c, d1c, d2c = _u_jet1_fwd(
        theta, r, h, aid, np.ascontiguousarray(f0), np.ascontiguousarray(f1)
    )
    return u0, u1, (z1c, a0c, a1c, d1c, d2c)


@njit(cache=True, parallel=True)
def _u_jet1_bwd(theta, r, h, aid, f0, f1, z1c, a0c, a1c, d1c, d2c, g0, g1):
    nb, n = g0.shape
    gtheta = np.zeros_like(theta)
    gf0p = np.zeros((nb, n, r))
    gf1p = np.zeros((nb, n, r))
    for b in prange(nb):
        gb2 = 0.0
        for j in range(n):
            gb2 += g0[b, j]
        gtheta[b, h * r + 2 * h] = gb2
        for i in range(h):
            wo = theta[b, h * r + h + i]
            gwo = 0.0
            gbi = 0.0
            for j in range(n):
                ga0 = wo * g0[b, j]
                ga1 = wo * g1[b, j]
                gz0 = ga0 * d1c[b, i, j] + ga1 * d2c[b, i, j] * z1c[b, i, j]
                gz1 = ga1 * d1c[b, i, j]
                gwo += g0[b, j] * a0c[b, i, j] + g1[b, j] * a1c[b, i, j]
                gbi += gz0
                for k in range(r):
                    w = theta[b, i * r + k]
                    gtheta[b, i * r + k] += gz0 * f0[j, k] + gz1 * f1[j, k]
                    gf0p[b, j, k] += gz0 * w
                    gf1p[b, j, k] += gz1 * w
            gtheta[b, h * r + h + i] = gwo
            gtheta[b, h * r + i] = gbi
    return gtheta, gf0p, gf1p


def u_jet1_bwd(theta, r, h, aid, f0, f1, cache, g0, g1):
    z1c, a0c, a1c, d1c, d2c = cache
    gtheta, gf0p, gf1p = _u_jet1_bwd(
        theta,
        r,
        h,
        aid,
        np.ascontiguousarray(f0),
        np.ascontiguousarray(f1),
        z1c,
        a0c,
        a1c,
        d1c,
        d2c,
        g0,
        g1,
    )
    return gtheta, gf0p.sum(axis=0), gf1p.sum(axis=0)


@njit(cache=True, nogil=True)
def _u_jet2_fwd(theta, r, h, aid, f0, f1, f2):
    m = f0.shape[0]
    u0 = np.empty(m)
    u1 = np.empty(m)
    u2 = np.empty(m)
    z1c = np.empty((m, h))
    z2c = np.empty((m, h))
    a0c = np.empty((m, h))
    a1c = np.empty((m, h))
    a2c = np.empty((m, h))
    d1c = np.empty((m, h))
    d2c = np.empty((m, h))
    d3c = np.empty((m, h))
    b2 = theta[h * r + 2 * h]
    for j in range(m):
        acc0 = b2
        acc1 = 0.0
        acc2 = 0.0
        for i in range(h):
            z0 = theta[h * r + i]
            z1 = 0.0
            z2 = 0.0
            for k in range(r):
                w = theta[i * r + k]
                z0 += w * f0[j, k]
                z1 += w * f1[j, k]
                z2 += w * f2[j, k]
            a, d1, d2, d3 = _act3(aid, z0)
            a1v = d1 * z1
            a2v = d2 * z1 * z1 + d1 * z2
            z1c[j, i] = z1
            z2c[j, i] = z2
            a0c[j, i] = a
            a1c[j, i] = a1v
            a2c[j, i] = a2v
            d1c[j, i] = d1
            d2c[j, i] = d2
            d3c[j, i] = d3
            wo = theta[h * r + h + i]
            acc0 += wo * a
            acc1 += wo * a1v
            acc2 += wo * a2v
        u0[j] = acc0
        u1[j] = acc1
        u2[j] = acc2
    return u0, u1, u2, z1c, z2c, a0c, a1c, a2c, d1c, d2c, d3c


def u_jet2_fwd(theta, r, h, aid, f0, f1, f2):
    out = _u_jet2_fwd(
        theta,
        r,
        h,
        aid,
        np.ascontiguousarray(f0),
        np.ascontiguousarray(f1),
        np.ascontiguousarray(f2),
    )
    return out[0], out[1], out[2], out[3:]


@njit(cache=True, nogil=True)
def _u_jet2_bwd(theta, r, h, aid, f0, f1, f2, z1c, z2c, a0c, a1c, a2c, d1c, d2c, d3c, g0, g1, g2):
    m = f0.shape[0]
    gtheta = np.zeros_like(theta)
    for j in range(m):
        gtheta[h * r + 2 * h] += g0[j]
        for i in range(h):
            wo = theta[h * r + h + i]
            ga0 = g0[j] * wo
            ga1 = g1[j] * wo
            ga2 = g2[j] * wo
            z1 = z1c[j, i]
            gz0 = ga0 * d1c[j, i] + ga1 * d2c[j, i] * z1 + ga2 * (d3c[j, i] * z1 * z1 + d2c[j, i] * z2c[j, i])
            gz1 = ga1 * d1c[j, i] + 2.0 * ga2 * d2c[j, i] * z1
            gz2 = ga2 * d1c[j, i]
            gtheta[h * r + h + i] += g0[j] * a0c[j, i] + g1[j] * a1c[j, i] + g2[j] * a2c[j, i]
            gtheta[h * r + i] += gz0
            for k in range(r):
                gtheta[i * r + k] += gz0 * f0[j, k] + gz1 * f1[j, k] + gz2 * f2[j, k]
    return gtheta


def u_jet2_bwd(theta, r, h, aid, f0, f1, f2, cache, g0, g1, g2):
    z1c, z2c, a0c, a1c, a2c, d1c, d2c, d3c = cache
    return _u_jet2_bwd(
        theta, r, h, aid, f0, f1, f2, z1c, z2c, a0c, a1c, a2c, d1c, d2c, d3c, g0, g1, g2
    )


@njit(cache=True, nogil=True)
def _u_val_single_bwd(theta, r, h, aid, f0, g0):
    m = f0.shape[0]
    gtheta = np.zeros_like(theta)
    for j in range(m):
        gtheta[h * r + 2 * h] += g0[j]
        for i in range(h):
            z0 = theta[h * r + i]
            for k in range(r):
                z0 += theta[i * r + k] * f0[j, k]
            a, d1, _, _ = _act3(aid, z0)
            gz0 = g0[j] * theta[h * r + h + i] * d1
            gtheta[h * r + h + i] += g0[j] * a
            gtheta[h * r + i] += gz0
            for k in range(r):
                gtheta[i * r + k] += gz0 * f0[j, k]
    return gtheta


def u_val_single_bwd(theta, r, h, aid, f0, g0):
    return _u_val_single_bwd(theta, r, h, aid, np.ascontiguousarray(f0), g0)


@njit(cache=True, nogil=True)
def _online_adapt_loop(
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
    p = theta0.shape[0]
    m1 = f0.shape[0]
    m2 = f0b.shape[0]
    theta = theta0.copy()
    mom = np.zeros(p)
    vel = np.zeros(p)
    losses = np.empty(max_epochs + 1)
    grad = np.empty(p)
    best_loss = np.inf
    best_theta = theta.copy()
    diverged = False
    epochs_used = 0
    for k in range(max_epochs + 1):
        gamma = gamma0 * rho**k
        for i in range(p):
            grad[i] = 0.0
        loss = 0.0
        # interior PINN residuals and their parameter gradient
        for j in range(m1):
            acc0 = theta[h * r + 2 * h]
            acc1 = 0.0
            acc2 = 0.0
            for i in range(h):
                z0 = theta[h * r + i]
                z1 = 0.0
                z2 = 0.0
                for kk in range(r):
                    w = theta[i * r + kk]
                    z0 += w * f0[j, kk]
                    z1 += w * f1[j, kk]
                    z2 += w * f2[j, kk]
                a, d1, d2, d3 = _act3(aid, z0)
                wo = theta[h * r + h + i]
                acc0 += wo * a
                acc1 += wo * (d1 * z1)
                acc2 += wo * (d2 * z1 * z1 + d1 * z2)
            res = c_uux * acc0 * acc1 + c_uxx * acc2 + c_u * acc0 - s_vals[j]
            loss += res * res
            g0 = 2.0 * res * (c_uux * acc1 + c_u)
            g1 = 2.0 * res * (c_uux * acc0)
            g2 = 2.0 * res * c_uxx
            grad[h * r + 2 * h] += g0
            for i in range(h):
                z0 = theta[h * r + i]
                z1 = 0.0
                z2 = 0.0
                for kk in range(r):
                    w = theta[i * r + kk]
                    z0 += w * f0[j, kk]
                    z1 += w * f1[j, kk]
                    z2 += w * f2[j, kk]
                a, d1, d2, d3 = _act3(aid, z0)
                wo = theta[h * r + h + i]
                ga0 = g0 * wo
                ga1 = g1 * wo
                ga2 = g2 * wo
                gz0 = ga0 * d1 + ga1 * d2 * z1 + ga2 * (d3 * z1 * z1 + d2 * z2)
                gz1 = ga1 * d1 + 2.0 * ga2 * d2 * z1
                gz2 = ga2 * d1
                grad[h * r + h + i] += g0 * a + g1 * (d1 * z1) + g2 * (d2 * z1 * z1 + d1 * z2)
                grad[h * r + i] += gz0
                for kk in range(r):
                    grad[i * r + kk] += gz0 * f0[j, kk] + gz1 * f1[j, kk] + gz2 * f2[j, kk]
        # boundary terms
        for j in range(m2):
            acc0 = theta[h * r + 2 * h]
            for i in range(h):
                z0 = theta[h * r + i]
                for kk in range(r):
                    z0 += theta[i * r + kk] * f0b[j, kk]
                a, _, _, _ = _act3(aid, z0)
                acc0 += theta[h * r + h + i] * a
            bres = acc0 - bc_vals[j]
            loss += lambda_bc * bres * bres
            g0 = 2.0 * lambda_bc * bres
            grad[h * r + 2 * h] += g0
            for i in range(h):
                z0 = theta[h * r + i]
                for kk in range(r):
                    z0 += theta[i * r + kk] * f0b[j, kk]
                a, d1, _, _ = _act3(aid, z0)
                gz0 = g0 * theta[h * r + h + i] * d1
                grad[h * r + h + i] += g0 * a
                grad[h * r + i] += gz0
                for kk in range(r):
                    grad[i * r + kk] += gz0 * f0b[j, kk]
        # proximal regularization toward the warm start
        reg = 0.0
        for i in range(p):
            d = theta[i] - theta_star[i]
            reg += d * d
            grad[i] += 2.0 * gamma * d
        loss += gamma * reg
        losses[k] = loss
        epochs_used = k
        if not np.isfinite(loss):
            diverged = True
            break
        if loss < best_loss:
            best_loss = loss
            for i in range(p):
                best_theta[i] = theta[i]
        if loss < stop_tol or k == max_epochs:
            break
        gradok = True
        for i in range(p):
            if not np.isfinite(grad[i]):
                gradok = False
                break
        if not gradok:
            diverged = True
            break
        t = k + 1
        bc1 = 1.0 - beta1**t
        bc2 = 1.0 - beta2**t
        for i in range(p):
            mom[i] += (1.0 - beta1) * (grad[i] - mom[i])
            vel[i] += (1.0 - beta2) * (grad[i] * grad[i] - vel[i])
            theta[i] -= lr * (mom[i] / bc1) / (math.sqrt(vel[i] / bc2) + eps)
    return best_theta, losses, epochs_used, diverged


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
    best_theta, losses, epochs_used, diverged = _online_adapt_loop(
        theta0,
        theta_star,
        r,
        h,
        aid,
        np.ascontiguousarray(f0),
        np.ascontiguousarray(f1),
        np.ascontiguousarray(f2),
        np.ascontiguousarray(f0b),
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
    )
    return best_theta, losses[: epochs_used + 1], epochs_used, bool(diverged)
