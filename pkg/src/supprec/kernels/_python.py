"""NumPy implementations of the statistic kernels (fallback backend)."""

import numpy as np


def proxy_correlations(phi, y):
    """Correlate every measurement column with its observation vector.

    phi has shape (n, m, d), y has shape (n, m); returns the (n, d) array
    whose (i, u) entry is <phi[i, :, u], y[i]>.
    """
    phi = np.asarray(phi, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    return np.einsum("imd,im->id", phi, y)


def support_statistic(phi, y):
    """Per-coordinate mean of squared column-observation correlations.

    Fused form of ``proxy_correlations`` followed by a mean of squares over
    the sample axis; returns a length-d array.
    """
    phi = np.asarray(phi, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    prox = np.einsum("imd,im->id", phi, y)
    return np.einsum("id,id->d", prox, prox) / phi.shape[0]


def column_sq_norms(phi):
    """Squared Euclidean norm of every column: (n, m, d) -> (n, d)."""
    phi = np.asarray(phi, dtype=np.float64)
    return np.einsum("imd,imd->id", phi, phi)
