"""Closed-form evaluators: conditional moments, threshold window, the
coordinate-separation condition, tail and moment bounds, and the
sample-complexity formula.

Tail evaluators return probability bounds clamped to (0, 1]. The absolute
constants in the heavy-tail and sample-complexity expressions are not
pinned by theory; they default to 1 and can be calibrated empirically (see
``supprec.montecarlo``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import kernels
from .model import ProblemInstance


@dataclass(frozen=True)
class BoundConstants:
    """Absolute constants left free by the analysis, all positive."""

    c_heavy: float = 1.0
    c_sample: float = 1.0
    rosenthal_c: float = 1.0

    def __post_init__(self):
        for name in ("c_heavy", "c_sample", "rosenthal_c"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True, eq=False)
class ConditionalMoments:
    """Per-sample conditional moments of the proxy statistics.

    For an on-support coordinate u and an off-support coordinate u', given
    the corresponding measurement columns:

      mu_i    = ||phi_iu||^2 * x_iu                       (proxy mean)
      nu2_i   = ||phi_iu||^2 / m * sum_{v in S \\ u} x_iv^2 + sigma2 ||phi_iu||^2
      nu2p_i  = ||phi_iu'||^2 / m * sum_{v in S} x_iv^2 + sigma2 ||phi_iu'||^2

    and mu / mu_prime are the conditional means of the averaged squared
    proxies at u and u'.
    """

    mu_i: np.ndarray
    nu2_i: np.ndarray
    nu2p_i: np.ndarray
    mu: float
    mu_prime: float


class ThresholdWindow(NamedTuple):
    """Admissible threshold interval [tau_low, tau_high]."""

    tau_low: float
    tau_high: float
    nonempty: bool


@dataclass(frozen=True)
class SeparationReport:
    """One evaluation of the coordinate-separation inequality."""

    lhs: float
    rhs_terms: tuple[float, float, float, float]
    satisfied: bool

    @property
    def rhs(self) -> float:
        return sum(self.rhs_terms)


class SampleComplexity(NamedTuple):
    """Predicted sufficient sample count plus a regime flag.

    ``in_regime`` is False when m < 2 log(d / delta), where the guarantee
    behind the formula is not stated to apply.
    """

    n: int
    in_regime: bool


def _clamp_prob(value: float) -> float:
    return min(1.0, float(value))


def _moment_arrays(mu, sigma2):
    mu = np.atleast_1d(np.asarray(mu, dtype=np.float64))
    sigma2 = np.atleast_1d(np.asarray(sigma2, dtype=np.float64))
    if mu.shape != sigma2.shape or mu.ndim != 1:
        raise ValueError("mu and sigma2 must be one-dimensional with equal length")
    if np.any(sigma2 < 0.0):
        raise ValueError("variances must be nonnegative")
    return mu, sigma2


def _check_t(t: float) -> float:
    t = float(t)
    if t < 0.0:
        raise ValueError(f"deviation t must be nonnegative, got {t}")
    return t


def chisq_mean_lower_tail(mu, sigma2, t) -> float:
    """Lower-tail bound for the mean of squared independent Gaussians.

    For X_i ~ N(mu_i, sigma_i^2), bounds P{ mean(X_i^2) <= mean(sigma_i^2
    + mu_i^2) - t } by exp(-n^2 t^2 / (4 sum(sigma_i^4 + sigma_i^2
    mu_i^2))).
    """
    mu, sigma2 = _moment_arrays(mu, sigma2)
    t = _check_t(t)
    denom = 4.0 * float(np.sum(sigma2**2 + sigma2 * mu**2))
    if denom == 0.0:
        raise ValueError("all variances are zero; the bound is undefined")
    n = mu.shape[0]
    return _clamp_prob(math.exp(-(n * n * t * t) / denom))


def chisq_mean_upper_tail(mu, sigma2, t) -> float:
    """Upper-tail companion of ``chisq_mean_lower_tail``.

    Bounds P{ mean(X_i^2) >= mean(sigma_i^2 + mu_i^2) + t } by
    exp(-min{ n^2 t^2 / (16 sum(sigma_i^4 + sigma_i^2 mu_i^2)),
              n t / (8 max_i sigma_i^2) }).
    """
    mu, sigma2 = _moment_arrays(mu, sigma2)
    t = _check_t(t)
    sum_term = float(np.sum(sigma2**2 + sigma2 * mu**2))
    max_var = float(np.max(sigma2))
    if sum_term == 0.0 or max_var == 0.0:
        raise ValueError("all variances are zero; the bound is undefined")
    n = mu.shape[0]
    exponent = min((n * n * t * t) / (16.0 * sum_term), (n * t) / (8.0 * max_var))
    return _clamp_prob(math.exp(-exponent))


def norm4_mean_tail(n: int, m: int, t: float, constants: BoundConstants) -> float:
    """Two-sided tail bound for the averaged fourth power of column norms.

    For n independent columns with N(0, 1/m) entries, bounds
    P{ |mean(||g_i||^4) - (1 + 2/m)| >= t } by
    exp(-C min{ n t, (m^2 n t)^(1/3), n t^2 }).
    """
    t = _check_t(t)
    exponent = min(n * t, (m * m * n * t) ** (1.0 / 3.0), n * t * t)
    return _clamp_prob(math.exp(-constants.c_heavy * exponent))


def norm6_mean_tail(n: int, m: int, t: float, constants: BoundConstants) -> float:
    """Sixth-power companion of ``norm4_mean_tail``.

    Bounds P{ |mean(||g_i||^6) - (1 + 6/m + 8/m^2)| >= t } by
    exp(-C min{ n t, (m^3 n t)^(1/4), n t^2 }).
    """
    t = _check_t(t)
    exponent = min(n * t, (m**3 * n * t) ** 0.25, n * t * t)
    return _clamp_prob(math.exp(-constants.c_heavy * exponent))


def max_sq_norm_tail(n: int, m: int, mu_max: float, t: float) -> float:
    """Tail bound for the maximum squared column norm over n columns.

    With mu_max = E[max_i ||g_i||^2] (necessarily >= 1 for mean-one
    variables), bounds P{ max_i ||g_i||^2 >= mu_max + t } by
    n exp(-(m/8) min{ (mu_max + t - 1)^2, mu_max + t - 1 }).
    """
    t = _check_t(t)
    if mu_max < 1.0:
        raise ValueError(f"mu_max must be at least 1, got {mu_max}")
    shifted = mu_max + t - 1.0
    exponent = (m / 8.0) * min(shifted * shifted, shifted)
    return _clamp_prob(n * math.exp(-exponent))


def rosenthal_sum_moment(
    p: float, n: int, lp_norm: float, l2_norm: float, constants: BoundConstants
) -> float:
    """Moment bound for a sum of n i.i.d. centered variables.

    Returns c (p n^(1/p) ||Z||_p + sqrt(p n) ||Z||_2) for p >= 2.
    """
    if p < 2.0:
        raise ValueError(f"p must be at least 2, got {p}")
    if lp_norm < 0.0 or l2_norm < 0.0:
        raise ValueError("norms must be nonnegative")
    return constants.rosenthal_c * (
        p * n ** (1.0 / p) * lp_norm + math.sqrt(p * n) * l2_norm
    )


def chisq_cube_central_moment_bound(p: float, m: int) -> float:
    """L_p bound for the centered cube of a chi-square(m) variable.

    Returns 64 (3p + m/2)^3, valid for all p >= 2.
    """
    if p < 2.0:
        raise ValueError(f"p must be at least 2, got {p}")
    return 64.0 * (3.0 * p + m / 2.0) ** 3


def sample_complexity_upper(
    k: int,
    m: int,
    d: int,
    delta: float,
    x_min: float,
    x_max: float,
    sigma2: float,
    constants: BoundConstants,
) -> SampleComplexity:
    """Sufficient sample count for exact recovery with error at most delta.

    Returns ceil(c (x_max/x_min)^4 max{A, A^2} log(d/delta)) with
    A = k/m + sigma2/x_max^2. The accompanying guarantee assumes
    m >= 2 log(d/delta); ``in_regime`` flags whether that holds.
    """
    if not (0.0 < delta < 1.0):
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    if not (0.0 < x_min <= x_max):
        raise ValueError("need 0 < x_min <= x_max")
    if sigma2 < 0.0:
        raise ValueError("sigma2 must be nonnegative")
    log_term = math.log(d / delta)
    a = k / m + sigma2 / (x_max * x_max)
    core = max(a, a * a) * log_term
    n = math.ceil(constants.c_sample * (x_max / x_min) ** 4 * core)
    return SampleComplexity(max(1, n), m >= 2.0 * log_term)


def _support_index_sets(instance: ProblemInstance):
    on = list(instance.support.indices)
    off = [u for u in range(instance.config.d) if u not in set(on)]
    return on, off


def per_sample_moments(instance: ProblemInstance, coord: int):
    """Conditional mean and variance of each sample's proxy at one coordinate.

    Returns (mean_i, var_i) arrays of length n, conditioned on the columns
    phi_i[:, coord]. The mean is zero off support.
    """
    cfg = instance.config
    if not 0 <= coord < cfg.d:
        raise ValueError(f"coordinate {coord} outside [0, {cfg.d})")
    phi = instance.measurements.matrices
    x = instance.signals.vectors
    sq_norm = np.einsum("im,im->i", phi[:, :, coord], phi[:, :, coord])
    support_mass = np.einsum("id,id->i", x, x)  # off-support entries are zero
    if coord in instance.support.indices:
        x_u = x[:, coord]
        mean = sq_norm * x_u
        var = sq_norm / cfg.m * (support_mass - x_u**2) + cfg.sigma2 * sq_norm
    else:
        mean = np.zeros(cfg.n)
        var = sq_norm / cfg.m * support_mass + cfg.sigma2 * sq_norm
    return mean, var


def conditional_moments(instance: ProblemInstance, u: int, u_prime: int) -> ConditionalMoments:
    """Conditional moments at an on-support u and an off-support u_prime."""
    on = set(instance.support.indices)
    if u not in on:
        raise ValueError(f"u={u} is not in the support {sorted(on)}")
    if u_prime in on or not 0 <= u_prime < instance.config.d:
        raise ValueError(f"u_prime={u_prime} must be outside the support and in range")
    mu_i, nu2_i = per_sample_moments(instance, u)
    _, nu2p_i = per_sample_moments(instance, u_prime)
    n = instance.config.n
    phi = instance.measurements.matrices
    sq_u = np.einsum("im,im->i", phi[:, :, u], phi[:, :, u])
    sq_up = np.einsum("im,im->i", phi[:, :, u_prime], phi[:, :, u_prime])
    x = instance.signals.vectors
    x_u = x[:, u]
    rest = np.einsum("id,id->i", x, x) - x_u**2
    mu = float(np.mean(x_u**2 * sq_u**2 + sq_u * (rest / instance.config.m + instance.config.sigma2)))
    mass = np.einsum("id,id->i", x, x)
    mu_prime = float(np.mean(sq_up * (mass / instance.config.m + instance.config.sigma2)))
    return ConditionalMoments(mu_i, nu2_i, nu2p_i, mu, mu_prime)


def threshold_window(cm: ConditionalMoments, n: int, d: int, delta: float) -> ThresholdWindow:
    """Threshold interval making both conditional error tails <= delta / (3d).

    tau_high comes from the on-support lower tail, tau_low from the
    off-support upper tail; the window is nonempty exactly when the means
    are separated by more than the combined deviation terms.
    """
    if not (0.0 < delta < 1.0):
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    if n != cm.mu_i.shape[0]:
        raise ValueError(f"n={n} does not match the {cm.mu_i.shape[0]} per-sample moments")
    log_term = math.log(3.0 * d / delta)
    dev_on = math.sqrt(
        4.0 / n**2 * float(np.sum(cm.nu2_i**2 + cm.mu_i**2 * cm.nu2_i)) * log_term
    )
    dev_off = max(
        math.sqrt(16.0 / n**2 * float(np.sum(cm.nu2p_i**2)) * log_term),
        8.0 / n * float(np.max(cm.nu2p_i)) * log_term,
    )
    tau_high = cm.mu - dev_on
    tau_low = cm.mu_prime + dev_off
    return ThresholdWindow(tau_low, tau_high, tau_high > tau_low)


def separation_report_from_norms(
    sq_u,
    fourth_u,
    sixth_u,
    sq_up,
    fourth_up,
    k: int,
    m: int,
    sigma2: float,
    x_min: float,
    x_max: float,
    log_term: float,
) -> SeparationReport:
    """Evaluate the separation inequality from per-sample column-norm powers.

    The inputs are length-n arrays of ||phi_i[:, u]||^2, ^4, ^6 for the
    on-support coordinate and ||phi_i[:, u']||^2, ^4 for the off-support
    coordinate. Exposing the powers individually lets callers substitute
    expectations for a deterministic consistency check.
    """
    sq_u = np.asarray(sq_u, dtype=np.float64)
    fourth_u = np.asarray(fourth_u, dtype=np.float64)
    sixth_u = np.asarray(sixth_u, dtype=np.float64)
    sq_up = np.asarray(sq_up, dtype=np.float64)
    fourth_up = np.asarray(fourth_up, dtype=np.float64)
    n = sq_u.shape[0]
    ratio2 = (x_min / x_max) ** 2
    lhs = ratio2 * float(np.mean(fourth_u - sq_u / m))
    a = (k - 1) / m + sigma2 / (x_max * x_max)
    b = k / m + sigma2 / (x_max * x_max)
    term1 = math.sqrt(4.0 / n**2 * a * a * float(np.sum(fourth_u)) * log_term)
    term2 = math.sqrt(4.0 / n**2 * a * float(np.sum(sixth_u)) * log_term)
    term3 = math.sqrt(16.0 / n**2 * b * b * float(np.sum(fourth_up)) * log_term)
    term4 = 8.0 / n * b * float(np.max(sq_up)) * log_term
    terms = (term1, term2, term3, term4)
    return SeparationReport(lhs, terms, lhs > sum(terms))


def separation_condition(
    instance: ProblemInstance, delta: float, u: int, u_prime: int
) -> SeparationReport:
    """Evaluate the separation inequality for one (u, u') coordinate pair."""
    if not (0.0 < delta < 1.0):
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    on = set(instance.support.indices)
    if u not in on:
        raise ValueError(f"u={u} is not in the support {sorted(on)}")
    if u_prime in on or not 0 <= u_prime < instance.config.d:
        raise ValueError(f"u_prime={u_prime} must be outside the support and in range")
    cfg = instance.config
    phi = instance.measurements.matrices
    sq_u = np.einsum("im,im->i", phi[:, :, u], phi[:, :, u])
    sq_up = np.einsum("im,im->i", phi[:, :, u_prime], phi[:, :, u_prime])
    return separation_report_from_norms(
        sq_u,
        sq_u**2,
        sq_u**3,
        sq_up,
        sq_up**2,
        cfg.k,
        cfg.m,
        cfg.sigma2,
        cfg.x_min,
        cfg.x_max,
        math.log(3.0 * cfg.d / delta),
    )


def separation_all_pairs(instance: ProblemInstance, delta: float) -> bool:
    """Whether the separation inequality holds for every (u, u') pair.

    Vectorized over coordinates: the left side minus the two on-support
    deviation terms only depends on u, and the two off-support terms only
    on u', so universal satisfaction reduces to comparing one minimum
    against one maximum.
    """
    if not (0.0 < delta < 1.0):
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    cfg = instance.config
    on, off = _support_index_sets(instance)
    if not off:
        return True
    log_term = math.log(3.0 * cfg.d / delta)
    norms_sq = kernels.column_sq_norms(instance.measurements.matrices)
    n = cfg.n
    ratio2 = (cfg.x_min / cfg.x_max) ** 2
    a = (cfg.k - 1) / cfg.m + cfg.sigma2 / (cfg.x_max * cfg.x_max)
    b = cfg.k / cfg.m + cfg.sigma2 / (cfg.x_max * cfg.x_max)
    sq_on = norms_sq[:, on]
    lhs = ratio2 * np.mean(sq_on**2 - sq_on / cfg.m, axis=0)
    term1 = np.sqrt(4.0 / n**2 * a * a * np.sum(sq_on**2, axis=0) * log_term)
    term2 = np.sqrt(4.0 / n**2 * a * np.sum(sq_on**3, axis=0) * log_term)
    own = lhs - term1 - term2
    sq_off = norms_sq[:, off]
    term3 = np.sqrt(16.0 / n**2 * b * b * np.sum(sq_off**2, axis=0) * log_term)
    term4 = 8.0 / n * b * np.max(sq_off, axis=0) * log_term
    other = term3 + term4
    return bool(np.min(own) > np.max(other))
