"""Normal inverse Gaussian innovations: method-of-moments fit and mixture sampling."""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import stats

logger = logging.getLogger(__name__)

# excess kurtosis assigned by the near-Gaussian fallback
_FALLBACK_KURTOSIS = 0.01


@dataclass(frozen=True)
class NigParams:
    """NIG(alpha, beta, delta, mu) in the (tail, skew, scale, location) parametrization."""

    alpha_tail: float
    beta_skew: float
    mu_loc: float
    delta_scale: float

    def __post_init__(self):
        if not self.alpha_tail > 0:
            raise ValueError(f"alpha_tail must be positive, got {self.alpha_tail}")
        if not abs(self.beta_skew) < self.alpha_tail:
            raise ValueError("|beta_skew| must be smaller than alpha_tail")
        if not self.delta_scale > 0:
            raise ValueError(f"delta_scale must be positive, got {self.delta_scale}")

    @property
    def gamma(self) -> float:
        return math.sqrt(self.alpha_tail**2 - self.beta_skew**2)

    @property
    def mean(self) -> float:
        return self.mu_loc + self.delta_scale * self.beta_skew / self.gamma

    @property
    def variance(self) -> float:
        return self.delta_scale * self.alpha_tail**2 / self.gamma**3

    @property
    def skewness(self) -> float:
        return 3.0 * self.beta_skew / (self.alpha_tail * math.sqrt(self.delta_scale * self.gamma))

    @property
    def excess_kurtosis(self) -> float:
        rho2 = (self.beta_skew / self.alpha_tail) ** 2
        return 3.0 * (1.0 + 4.0 * rho2) / (self.delta_scale * self.gamma)

    def to_dict(self) -> dict:
        return {
            "alpha_tail": self.alpha_tail,
            "beta_skew": self.beta_skew,
            "mu_loc": self.mu_loc,
            "delta_scale": self.delta_scale,
        }


def nig_from_moments(mean: float, variance: float, skewness: float, excess_kurtosis: float) -> NigParams:
    """Invert the four NIG moment formulas.

    Requires ``excess_kurtosis > 5/3 * skewness**2``; callers check this first.
    """
    rho2 = skewness**2 / (3.0 * excess_kurtosis - 4.0 * skewness**2)
    rho = math.copysign(math.sqrt(rho2), skewness) if skewness != 0 else 0.0
    eta = 3.0 * (1.0 + 4.0 * rho2) / excess_kurtosis  # delta * gamma
    alpha = math.sqrt(eta / variance) / (1.0 - rho2)
    beta = rho * alpha
    gamma = alpha * math.sqrt(1.0 - rho2)
    delta = eta / gamma
    mu = mean - delta * beta / gamma
    return NigParams(alpha, beta, mu, delta)


def _near_gaussian(mean: float, variance: float) -> NigParams:
    # beta = 0: variance = delta / alpha, excess kurtosis = 3 / (delta * alpha)
    alpha = math.sqrt(3.0 / (_FALLBACK_KURTOSIS * variance))
    return NigParams(alpha, 0.0, mean, variance * alpha)


def fit_nig(residuals) -> NigParams:
    """Method-of-moments NIG fit.

    Mean and variance are matched exactly. When the sample excess kurtosis is not
    compatible with an NIG law (at or below ``5/3 * skew**2``) or is not
    significantly positive (below two standard errors, ``2 * sqrt(24 / n)``), the
    fit falls back to a symmetric, near-Gaussian NIG with the same mean and
    variance and emits a warning.
    """
    x = np.asarray(residuals, dtype=float)
    n = x.size
    if n < 100:
        raise ValueError(f"fit_nig needs at least 100 observations, got {n}")
    mean = float(x.mean())
    variance = float(x.var(ddof=1))
    if not variance > 0:
        raise ValueError("fit_nig needs a sample with nonzero variance")
    skew = float(stats.skew(x))
    if abs(skew) < 1e-10:
        skew = 0.0  # rounding noise on symmetric data
    kurt = float(stats.kurtosis(x))  # excess, Fisher definition

    bound = 5.0 / 3.0 * skew**2
    if kurt <= bound or kurt < 2.0 * math.sqrt(24.0 / n):
        warnings.warn(
            f"sample excess kurtosis {kurt:.4g} (skewness {skew:.4g}) does not support an NIG fit; "
            "using a near-Gaussian parametrization",
            RuntimeWarning,
            stacklevel=2,
        )
        return _near_gaussian(mean, variance)
    return nig_from_moments(mean, variance, skew, kurt)


def nig_sample(params: NigParams, n: int, seed=None) -> np.ndarray:
    """Draw ``n`` NIG variates through the normal variance-mean mixture.

    z ~ IG(mean delta/gamma, shape delta**2), x = mu + beta z + sqrt(z) N(0, 1).
    ``seed`` may be an int, a sequence of ints, or a ``numpy.random.Generator``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    delta = params.delta_scale
    z = rng.wald(delta / params.gamma, delta**2, size=n)
    return params.mu_loc + params.beta_skew * z + np.sqrt(z) * rng.standard_normal(n)


def standardized_sample(params: NigParams, n: int, seed=None) -> np.ndarray:
    """NIG draws shifted and scaled to zero mean and unit variance."""
    return (nig_sample(params, n, seed) - params.mean) / math.sqrt(params.variance)
