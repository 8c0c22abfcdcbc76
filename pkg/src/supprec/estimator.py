"""Closed-form support estimator and a brute-force decoding baseline.

The estimator correlates every column of each measurement matrix with its
observation vector, averages the squared correlations per coordinate, and
keeps the k coordinates with the largest averages. A threshold variant and
an exhaustive least-squares decoder are provided for diagnostics.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .model import ProblemInstance

#: Largest number of candidate subsets the exhaustive decoder will scan.
MAX_EXHAUSTIVE_SUBSETS = 10**6


@dataclass(frozen=True, eq=False)
class ProxySamples:
    """Column-observation correlations, shape (n, d)."""

    values: np.ndarray


@dataclass(frozen=True)
class SupportStatistic:
    """Per-coordinate mean of squared proxies, shape (d,)."""

    lambda_tilde: np.ndarray

    def __post_init__(self):
        lam = np.asarray(self.lambda_tilde, dtype=np.float64)
        if lam.ndim != 1:
            raise ValueError(f"statistic must be one-dimensional, got shape {lam.shape}")
        if not np.all(np.isfinite(lam)) or np.any(lam < 0.0):
            raise ValueError("statistic entries must be finite and nonnegative")
        lam.setflags(write=False)
        object.__setattr__(self, "lambda_tilde", lam)


@dataclass(frozen=True)
class SupportEstimate:
    """An estimated support with the rule that produced it."""

    indices: tuple[int, ...]
    method: str  # "top_k" | "threshold" | "exhaustive"
    tau: float | None = None


def proxy_samples(instance: ProblemInstance) -> ProxySamples:
    """Correlate each column of phi_i with y_i for all samples."""
    meas = instance.measurements
    return ProxySamples(kernels.proxy_correlations(meas.matrices, meas.observations))


def support_statistic(proxies: ProxySamples) -> SupportStatistic:
    """Average the squared proxies along the sample axis."""
    values = np.asarray(proxies.values, dtype=np.float64)
    if values.shape[0] < 1:
        raise ValueError("need at least one sample")
    return SupportStatistic(np.einsum("id,id->d", values, values) / values.shape[0])


def support_statistic_for(instance: ProblemInstance) -> SupportStatistic:
    """Fused statistic straight from an instance (hot path for trials)."""
    meas = instance.measurements
    return SupportStatistic(kernels.support_statistic(meas.matrices, meas.observations))


def top_k_support(stat: SupportStatistic, k: int) -> SupportEstimate:
    """Indices of the k largest statistic entries, ties to the lowest index."""
    lam = stat.lambda_tilde
    if not 1 <= k <= lam.shape[0]:
        raise ValueError(f"k must be in [1, {lam.shape[0]}], got {k}")
    order = np.argsort(-lam, kind="stable")
    return SupportEstimate(tuple(sorted(int(i) for i in order[:k])), "top_k")


def threshold_support(stat: SupportStatistic, tau: float) -> SupportEstimate:
    """All indices whose statistic is at least tau."""
    tau = float(tau)
    if math.isnan(tau):
        raise ValueError("threshold must not be NaN")
    idx = np.flatnonzero(stat.lambda_tilde >= tau)
    return SupportEstimate(tuple(int(i) for i in idx), "threshold", tau=tau)


def exhaustive_decoder(
    instance: ProblemInstance, max_subsets: int = MAX_EXHAUSTIVE_SUBSETS
) -> SupportEstimate:
    """Scan all size-k supports and keep the best joint least-squares fit.

    For each candidate support T, one shared coefficient vector is fit by
    least squares to all n stacked systems y_i ~ phi_i[:, T] @ c, and the
    candidate with the smallest total squared residual wins (ties go to the
    lexicographically smallest T). Sharing c across samples keeps the scan
    informative even with fewer measurements than k per sample; it matches
    the generator's default modes, where on-support values are identical
    across samples. Rank-deficient candidates fall back to the minimum-norm
    solution.
    """
    cfg = instance.config
    n_subsets = math.comb(cfg.d, cfg.k)
    if n_subsets > max_subsets:
        raise ValueError(
            f"refusing to scan {n_subsets} supports (limit {max_subsets}); "
            "shrink d or k"
        )
    phi = instance.measurements.matrices
    y_flat = instance.measurements.observations.reshape(-1)
    best_res = math.inf
    best_t: tuple[int, ...] | None = None
    for t in itertools.combinations(range(cfg.d), cfg.k):
        cols = phi[:, :, t].reshape(-1, cfg.k)
        coef, *_ = np.linalg.lstsq(cols, y_flat, rcond=None)
        resid = y_flat - cols @ coef
        total = float(resid @ resid)
        if total < best_res:
            best_res = total
            best_t = t
    return SupportEstimate(best_t, "exhaustive")
