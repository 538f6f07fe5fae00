"""ARFIMA(1, d_m, 1)-FIGARCH(1, d_v, 1): two-stage estimation and simulation.

Mean:        (1 - phi_m L)(1 - L)^d_m (z_t - c) = (1 + theta_m L) eps_t
Volatility:  (1 - beta_v L) sigma2_t = omega + [1 - beta_v L - (1 - phi_v L)(1 - L)^d_v] eps2_t

The volatility equation is used in its ARCH(inf) form
sigma2_t = omega / (1 - beta_v) + sum_i lam_i eps2_{t-1-i}, truncated at
``TRUNCATION_LAGS`` terms.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import asdict, dataclass

import numpy as np
from scipy.optimize import minimize
from scipy.signal import fftconvolve, lfilter

from ..errors import EstimationError, NumericalError
from .fracdiff import apply_frac_filter, frac_diff_weights
from .nig import NigParams, standardized_sample

logger = logging.getLogger(__name__)

TRUNCATION_LAGS = 1000
BURN_IN = 2000
MIN_FIT_LENGTH = 250

_D_M_BOUNDS = (-0.49, 0.49)
_D_V_MAX = 0.999


@dataclass(frozen=True)
class ArfimaFigarchParams:
    phi_m: float
    theta_m: float
    d_m: float
    omega: float
    beta_v: float
    phi_v: float
    d_v: float
    mean_const: float = 0.0

    def __post_init__(self):
        if not abs(self.phi_m) < 1:
            raise ValueError(f"|phi_m| must be < 1, got {self.phi_m}")
        if not abs(self.theta_m) < 1:
            raise ValueError(f"|theta_m| must be < 1, got {self.theta_m}")
        if not -0.5 < self.d_m < 0.5:
            raise ValueError(f"d_m must lie in (-0.5, 0.5), got {self.d_m}")
        if not self.omega > 0:
            raise ValueError(f"omega must be positive, got {self.omega}")
        if not 0 <= self.d_v < 1:
            raise ValueError(f"d_v must lie in [0, 1), got {self.d_v}")
        if not 0 <= self.beta_v < 1:
            raise ValueError(f"beta_v must lie in [0, 1), got {self.beta_v}")
        lam = figarch_weights(self.phi_v, self.d_v, self.beta_v, TRUNCATION_LAGS)
        if lam.min() < -1e-12:
            raise ValueError("FIGARCH parameters give negative ARCH(inf) weights")

    def to_dict(self) -> dict:
        return asdict(self)


def figarch_weights(phi: float, d: float, beta: float, n: int = TRUNCATION_LAGS) -> np.ndarray:
    """ARCH(inf) coefficients lam_0..lam_{n-1} of FIGARCH(1, d, 1)."""
    lam = np.empty(n)
    delta = d
    lam[0] = phi - beta + d
    for i in range(1, n):
        delta_next = (i - d) / (i + 1) * delta
        lam[i] = beta * lam[i - 1] + delta_next - phi * delta
        delta = delta_next
    return lam


def figarch_variance(eps2: np.ndarray, omega: float, phi: float, d: float, beta: float,
                     backcast: float, truncation: int = TRUNCATION_LAGS) -> np.ndarray:
    """Conditional variance path; pre-sample squared residuals set to ``backcast``."""
    nobs = eps2.size
    lam = figarch_weights(phi, d, beta, truncation)
    conv = fftconvolve(eps2, lam)[: nobs - 1] if nobs > 1 else np.empty(0)
    sigma2 = np.full(nobs, omega / (1.0 - beta))
    sigma2[1:] += conv
    # weight of the missing pre-sample terms at each t
    tail = np.concatenate([np.cumsum(lam[::-1])[::-1], [0.0]])
    idx = np.minimum(np.arange(nobs), truncation)
    sigma2 += tail[idx] * backcast
    return sigma2


def arfima_residuals(z: np.ndarray, phi: float, theta: float, d: float, const: float,
                     truncation: int = TRUNCATION_LAGS) -> np.ndarray:
    x = apply_frac_filter(z - const, d, truncation)
    return lfilter([1.0, -phi], [1.0, theta], x)


def _figarch_from_free(v):
    # (log omega, d, a, b) -> box-consistent (omega, phi, d, beta)
    d = v[1]
    phi = v[2] * (1.0 - d) / 2.0
    beta = v[3] * (phi + d)
    return math.exp(v[0]), phi, d, beta


def _figarch_nll(v, eps2, backcast, truncation):
    omega, phi, d, beta = _figarch_from_free(v)
    sigma2 = figarch_variance(eps2, omega, phi, d, beta, backcast, truncation)
    if not np.all(sigma2 > 0) or not np.all(np.isfinite(sigma2)):
        return 1e100
    return 0.5 * float(np.sum(np.log(sigma2) + eps2 / sigma2))


def fit_figarch(eps: np.ndarray, truncation: int = TRUNCATION_LAGS):
    """Gaussian QML fit of FIGARCH(1, d, 1) to a (mean-zero) residual series.

    Returns ``(omega, phi, d, beta, sigma2, nll)`` on the input's scale.
    """
    eps = np.asarray(eps, dtype=float)
    scale = float(np.std(eps))
    if not scale > 0:
        raise EstimationError("residual series has zero variance")
    e2 = (eps / scale) ** 2
    backcast = float(e2.mean())
    bounds = [(-12.0, 3.0), (0.0, _D_V_MAX), (0.0, 1.0), (0.0, 0.999)]
    fits = []
    for d0 in (0.1, 0.4, 0.7):
        for b0 in (0.2, 0.7):
            # intercept chosen so the implied level is near the sample variance
            lam_sum = figarch_weights(0.1, d0, b0 * (0.1 + d0), truncation).sum()
            w0 = max(1e-5, (1.0 - lam_sum) * (1.0 - b0 * (0.1 + d0)))
            x0 = np.array([math.log(w0), d0, 0.2 / (1 - d0), b0])
            fits.append(minimize(_figarch_nll, x0, args=(e2, backcast, truncation), method="Nelder-Mead",
                                 bounds=bounds, options={"xatol": 1e-5, "fatol": 1e-7, "maxiter": 4000}))
    best = _best_converged(fits, "FIGARCH quasi-likelihood")
    omega, phi, d, beta = _figarch_from_free(best.x)
    omega *= scale**2
    sigma2 = figarch_variance(eps**2, omega, phi, d, beta, backcast * scale**2, truncation)
    return float(omega), float(phi), float(d), float(beta), sigma2, float(best.fun)


def _best_converged(fits, what: str):
    ok = [f for f in fits if f.success and np.isfinite(f.fun) and f.fun < 1e99]
    if not ok:
        finite = [f.fun for f in fits if np.isfinite(f.fun) and f.fun < 1e99]
        raise EstimationError(f"{what} optimizer did not converge from any start",
                              best_loglik=-min(finite) if finite else None)
    return min(ok, key=lambda f: f.fun)


def _css(v, z, truncation):
    e = arfima_residuals(z, v[0], v[1], v[2], v[3], truncation)
    val = float(e @ e)
    return val if np.isfinite(val) else 1e300


def fit_arfima(z: np.ndarray, truncation: int = TRUNCATION_LAGS):
    """Conditional-sum-of-squares ARFIMA(1, d, 1) fit; returns ``(phi, theta, d, const, resid)``."""
    z = np.asarray(z, dtype=float)
    scale = float(np.std(z))
    zs = z / scale
    c0 = float(zs.mean())
    bounds = [(-0.98, 0.98), (-0.98, 0.98), _D_M_BOUNDS, (c0 - 5.0, c0 + 5.0)]
    fits = []
    for d0 in (-0.2, 0.0, 0.2, 0.4):
        for phi0, theta0 in ((0.0, 0.0), (0.5, -0.3), (-0.3, 0.5)):
            x0 = np.array([phi0, theta0, d0, c0])
            fits.append(minimize(_css, x0, args=(zs, truncation), method="Nelder-Mead", bounds=bounds,
                                 options={"xatol": 1e-6, "fatol": 1e-9, "maxiter": 4000}))
    best = _best_converged(fits, "ARFIMA conditional sum of squares")
    phi, theta, d, c = best.x
    const = c * scale
    resid = arfima_residuals(z, phi, theta, d, const, truncation)
    return float(phi), float(theta), float(d), float(const), resid


def fit_arfima_figarch(returns, truncation: int = TRUNCATION_LAGS):
    """Two-stage fit: CSS for the ARFIMA mean, then Gaussian QML for FIGARCH.

    Returns ``(params, standardized_residuals)`` where the residuals are the
    mean-equation innovations divided by the fitted conditional standard deviation.
    """
    z = np.asarray(returns, dtype=float)
    if z.size < MIN_FIT_LENGTH:
        raise ValueError(f"need at least {MIN_FIT_LENGTH} observations, got {z.size}")
    if not np.all(np.isfinite(z)):
        raise ValueError("returns contain non-finite values")
    if not np.std(z) > 0:
        raise EstimationError("return series has zero variance")

    phi_m, theta_m, d_m, const, resid = fit_arfima(z, truncation)
    omega, phi_v, d_v, beta_v, sigma2, _ = fit_figarch(resid, truncation)

    # projections onto the open parameter box
    clipped = {
        "phi_m": float(np.clip(phi_m, -0.999, 0.999)),
        "theta_m": float(np.clip(theta_m, -0.999, 0.999)),
        "d_m": float(np.clip(d_m, -0.499, 0.499)),
        "d_v": float(np.clip(d_v, 0.0, 0.999)),
    }
    if any(clipped[k] != v for k, v in (("phi_m", phi_m), ("theta_m", theta_m), ("d_m", d_m), ("d_v", d_v))):
        warnings.warn("fitted parameters projected onto the admissible boundary", RuntimeWarning, stacklevel=2)
    params = ArfimaFigarchParams(
        phi_m=clipped["phi_m"], theta_m=clipped["theta_m"], d_m=clipped["d_m"],
        omega=omega, beta_v=beta_v, phi_v=phi_v, d_v=clipped["d_v"], mean_const=const,
    )
    return params, resid / np.sqrt(sigma2)


def simulate_paths(params: ArfimaFigarchParams, innov: NigParams, t_len: int, n_paths: int = 1,
                   seed=0, burn_in: int = BURN_IN, truncation: int = TRUNCATION_LAGS) -> np.ndarray:
    """Simulate ``n_paths`` independent return paths of length ``t_len``.

    Returns a ``(t_len, n_paths)`` array. Path ``j`` draws its innovations from
    a generator seeded with ``[*seed, j]`` so each path is reproducible on its own.
    """
    if t_len < 1 or n_paths < 1:
        raise ValueError("t_len and n_paths must be >= 1")
    base = list(np.atleast_1d(seed).astype(int))
    total = t_len + burn_in
    lam = figarch_weights(params.phi_v, params.d_v, params.beta_v, truncation)
    level = params.omega / (1.0 - params.beta_v)
    # d_m -> (1 - L)^{-d_m} is applied after the ARMA recursion
    integ = frac_diff_weights(-params.d_m, min(truncation, total))

    out = np.empty((t_len, n_paths))
    for j in range(n_paths):
        z = standardized_sample(innov, total, np.random.default_rng(base + [j]))
        eps = np.empty(total)
        eps2 = np.zeros(total)
        rev = lam  # sum_i lam_i eps2_{t-1-i}
        for t in range(total):
            k = min(t, truncation)
            s2 = level + (rev[:k] @ eps2[t - 1::-1][:k] if k else 0.0)
            if not s2 > 0 or not math.isfinite(s2):
                raise NumericalError(f"conditional variance became non-positive at step {t}")
            eps[t] = math.sqrt(s2) * z[t]
            eps2[t] = eps[t] * eps[t]
        x = lfilter([1.0, params.theta_m], [1.0, -params.phi_m], eps)
        u = fftconvolve(x, integ)[:total] if params.d_m != 0 else x
        out[:, j] = params.mean_const + u[burn_in:]
    return out
