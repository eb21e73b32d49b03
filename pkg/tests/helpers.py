"""Shared test utilities: finite-difference oracles."""

import numpy as np


def central_diff_grad(f, x0, step=1e-6):
    """Central-difference gradient of scalar f at vector x0."""
    x0 = np.asarray(x0, dtype=float)
    g = np.empty_like(x0)
    for i in range(x0.size):
        xp = x0.copy()
        xm = x0.copy()
        xp[i] += step
        xm[i] -= step
        g[i] = (f(xp) - f(xm)) / (2.0 * step)
    return g


def grad_close(analytic, fd, rtol=1e-6, floor_frac=1e-9):
    """Per-coordinate relative agreement, excluding coordinates that are
    negligible relative to the gradient scale (FD noise dominates there)."""
    analytic = np.asarray(analytic)
    fd = np.asarray(fd)
    scale = max(np.max(np.abs(analytic)), 1e-12)
    keep = np.abs(analytic) >= max(1e-12, floor_frac * scale)
    denom = np.maximum(np.abs(analytic[keep]), np.abs(fd[keep]))
    rel = np.abs(analytic[keep] - fd[keep]) / denom
    return rel.max() if rel.size else 0.0, rtol
