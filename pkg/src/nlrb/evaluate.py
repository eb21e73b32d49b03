"""Error metrics and aggregation behind the experiment tables and figures."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ZeroReferenceError
from .grid import Quadrature

HIST_LO, HIST_HI = 1e-6, 1.0
HIST_BINS = 24

REL_ERROR_MODES = ("l2", "l2_squared")


def relative_error(
    u_pred: np.ndarray, u_ref: np.ndarray, quad: Quadrature, mode: str = "l2"
) -> float:
    """Quadrature-weighted relative L2 error (optionally squared)."""
    if mode not in REL_ERROR_MODES:
        raise ConfigError(f"mode must be one of {REL_ERROR_MODES}")
    ref_norm = quad.norm(u_ref)
    if ref_norm == 0.0:
        raise ZeroReferenceError("reference field has zero norm")
    ratio = quad.norm(np.asarray(u_pred) - np.asarray(u_ref)) / ref_norm
    return ratio * ratio if mode == "l2_squared" else ratio


def worst_decile_indices(errors: np.ndarray) -> np.ndarray:
    """Indices of the 10% largest errors (at least one), largest first."""
    errors = np.asarray(errors, dtype=float)
    k = max(1, int(np.ceil(0.1 * errors.size)))
    order = np.argsort(errors)[::-1]
    return order[:k]


def histogram(errors: np.ndarray, bins: int = HIST_BINS):
    """Log-spaced histogram on [1e-6, 1]; out-of-range errors are clipped
    into the edge bins so counts always sum to the sample count."""
    edges = np.logspace(np.log10(HIST_LO), np.log10(HIST_HI), bins + 1)
    clipped = np.clip(np.asarray(errors, dtype=float), HIST_LO, HIST_HI)
    counts, _ = np.histogram(clipped, bins=edges)
    return edges, counts


def aggregate(errors: np.ndarray, bins: int = HIST_BINS) -> dict:
    """Mean, median, worst-decile mean, and histogram of relative errors."""
    errors = np.asarray(errors, dtype=float)
    if errors.size == 0:
        raise ConfigError("aggregate needs at least one error value")
    worst = errors[worst_decile_indices(errors)]
    edges, counts = histogram(errors, bins)
    return {
        "count": int(errors.size),
        "mean": float(errors.mean()),
        "median": float(np.median(errors)),
        "worst10_mean": float(worst.mean()),
        "hist_edges": edges.tolist(),
        "hist_counts": counts.tolist(),
    }


@dataclass
class ExperimentResult:
    """Per-sample errors (and timings) for one method at one basis size."""

    method: str
    r: int
    mus: np.ndarray  # (N, mu_dim)
    rel_errors: np.ndarray  # (N,)
    wall_times: np.ndarray | None = None
    aggregates: dict = field(default_factory=dict)

    def finalize(self, bins: int = HIST_BINS) -> "ExperimentResult":
        self.aggregates = aggregate(self.rel_errors, bins)
        return self

    def rows(self):
        """Rows in the results-CSV schema: method,r,mu1,mu2,rel_error,wall_time_s."""
        n = self.rel_errors.size
        wt = self.wall_times if self.wall_times is not None else np.zeros(n)
        for i in range(n):
            yield (
                self.method,
                self.r,
                float(self.mus[i][0]),
                float(self.mus[i][1]),
                float(self.rel_errors[i]),
                float(wt[i]),
            )
