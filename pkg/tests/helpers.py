"""Shared test helpers."""

import numpy as np

from supprec.model import (
    MeasurementSet,
    ProblemConfig,
    ProblemInstance,
    SignalSet,
    Support,
)


def make_instance(phi, x, w, x_min=1.0, x_max=None, support=None, sigma2=0.0):
    """Assemble an instance from explicit arrays (for hand examples)."""
    phi = np.asarray(phi, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    n, m, d = phi.shape
    if support is None:
        support = tuple(np.flatnonzero(np.any(x != 0.0, axis=0)))
    mags = np.abs(x[:, list(support)])
    if x_max is None:
        x_max = float(mags.max())
    cfg = ProblemConfig(
        d=d, k=len(support), m=m, n=n,
        x_min=min(x_min, float(mags.min())), x_max=x_max, sigma2=sigma2,
        support_mode="fixed", support_indices=support,
    )
    y = np.einsum("imd,id->im", phi, x) + w
    return ProblemInstance(cfg, Support(support), SignalSet(x), MeasurementSet(phi, w, y))
