"""Moment estimation, minimum-variance portfolios, frontiers and the minimum-CVaR LP."""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import linprog

from .errors import SingularCovarianceError, SolverError

logger = logging.getLogger(__name__)

CONDITION_CAP = 1e12
RIDGE_SCALE = 1e-10
# a ridged matrix has condition <= N / RIDGE_SCALE; beyond this something is broken
_POST_RIDGE_CAP = 1e15
KKT_TOL = 1e-8


@dataclass(frozen=True)
class MomentEstimate:
    mu: np.ndarray
    sigma: np.ndarray
    n_obs: int

    def __post_init__(self):
        n = self.mu.shape[0]
        if self.sigma.shape != (n, n):
            raise ValueError(f"mu has length {n} but sigma has shape {self.sigma.shape}")


@dataclass(frozen=True)
class PortfolioWeights:
    """Fully-invested weights over ``universe``.

    ``has_negative`` is only ever set by the closed-form solver; ``ridge_applied``
    records that the covariance was regularized before solving.
    """

    weights: np.ndarray
    universe: tuple[str, ...]
    ridge_applied: bool = False
    has_negative: bool = False

    def __post_init__(self):
        if self.weights.shape != (len(self.universe),):
            raise ValueError("weights and universe differ in length")

    def __len__(self):
        return len(self.universe)


@dataclass(frozen=True)
class FrontierPoint:
    target_return: float
    risk: float
    weights: PortfolioWeights | None
    feasible: bool
    reason: str = ""


@dataclass(frozen=True)
class CvarSolution:
    weights: PortfolioWeights
    var_threshold: float
    cvar: float
    alpha: float


def _labels(n: int, universe: Sequence[str] | None) -> tuple[str, ...]:
    if universe is None:
        return tuple(f"asset_{i + 1}" for i in range(n))
    if len(universe) != n:
        raise ValueError(f"universe has {len(universe)} labels for {n} assets")
    return tuple(universe)


def estimate_moments(returns) -> MomentEstimate:
    """Column means and the T-1 sample covariance of a returns matrix or ReturnPanel."""
    r = np.asarray(getattr(returns, "returns", returns), dtype=float)
    if r.ndim != 2:
        raise ValueError("returns must be a 2-D T x N matrix")
    t = r.shape[0]
    if t < 2:
        raise ValueError(f"need at least 2 observations to estimate moments, got {t}")
    mu = r.mean(axis=0)
    dev = r - mu
    sigma = dev.T @ dev / (t - 1)
    sigma = 0.5 * (sigma + sigma.T)
    return MomentEstimate(mu=mu, sigma=sigma, n_obs=t)


def condition_estimate(sigma: np.ndarray) -> float:
    with np.errstate(all="ignore"):
        c = float(np.linalg.cond(sigma))
    return c if math.isfinite(c) else math.inf


def regularize(sigma: np.ndarray) -> tuple[np.ndarray, bool]:
    """Add ``lam * I`` with ``lam = 1e-10 * trace / N`` when the condition estimate exceeds 1e12.

    An all-zero covariance (every asset riskless over the sample) gets ``lam = 1``
    so that the minimum-variance problem picks the equal-weight portfolio.
    """
    if condition_estimate(sigma) <= CONDITION_CAP:
        return sigma, False
    n = sigma.shape[0]
    tr = float(np.trace(sigma))
    lam = RIDGE_SCALE * tr / n if tr > 0 else 1.0
    return sigma + lam * np.eye(n), True


def mvp_closed_form(moments: MomentEstimate, universe: Sequence[str] | None = None) -> PortfolioWeights:
    """Unconstrained minimum-variance weights Sigma^-1 1 / (1' Sigma^-1 1).

    Negative weights are allowed; ``has_negative`` flags them.
    """
    sigma, ridged = regularize(moments.sigma)
    cond = condition_estimate(sigma)
    if cond > _POST_RIDGE_CAP:
        raise SingularCovarianceError(cond)
    ones = np.ones(sigma.shape[0])
    x = np.linalg.solve(sigma, ones)
    w = x / x.sum()
    return PortfolioWeights(w, _labels(w.size, universe), ridge_applied=ridged, has_negative=bool((w < 0).any()))


def portfolio_variance(weights, moments: MomentEstimate) -> float:
    w = np.asarray(getattr(weights, "weights", weights), dtype=float)
    if w.shape != moments.mu.shape:
        raise ValueError(f"weights have length {w.size}, moments cover {moments.mu.size} assets")
    return max(float(w @ moments.sigma @ w), 0.0)


def project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto {w >= 0, sum w = 1}."""
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    k = np.arange(1, v.size + 1)
    rho = np.nonzero(u - css / k > 0)[0][-1]
    return np.maximum(v - css[rho] / (rho + 1), 0.0)


def _kkt_solve(q_ff: np.ndarray, a_f: np.ndarray, rhs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    nf, m = q_ff.shape[0], a_f.shape[0]
    kkt = np.zeros((nf + m, nf + m))
    kkt[:nf, :nf] = q_ff
    kkt[:nf, nf:] = a_f.T
    kkt[nf:, :nf] = a_f
    b = np.concatenate([rhs, np.zeros(m)])
    try:
        sol = np.linalg.solve(kkt, b)
        if not np.all(np.isfinite(sol)):
            raise np.linalg.LinAlgError
    except np.linalg.LinAlgError:
        sol = np.linalg.lstsq(kkt, b, rcond=None)[0]
    return sol[:nf], sol[nf:]


def active_set_qp(q: np.ndarray, a: np.ndarray, b: np.ndarray, x0: np.ndarray,
                  max_iter: int = 500, tol: float = 1e-12) -> tuple[np.ndarray, bool]:
    """Primal active-set method for min 1/2 x'Qx  s.t.  Ax = b, x >= 0.

    ``x0`` must be feasible. Only bound constraints enter the working set. Returns
    ``(x, converged)``; the objective never increases along the iterates.
    """
    n = x0.size
    x = x0.copy()
    working = x <= 0.0
    x[working] = 0.0
    for _ in range(max_iter):
        free = ~working
        g = q @ x
        p_f, _lam = _kkt_solve(q[np.ix_(free, free)], a[:, free], -g[free])
        if np.max(np.abs(p_f), initial=0.0) <= tol:
            # multipliers of the equality rows from the free-set stationarity condition
            lam = np.linalg.lstsq(a[:, free].T, g[free], rcond=None)[0] if free.any() else np.zeros(a.shape[0])
            mult = g - a.T @ lam
            scale = max(1.0, float(np.max(np.abs(g))))
            cand = np.where(working)[0]
            if cand.size == 0 or mult[cand].min() >= -1e-13 * scale:
                return x, True
            working[cand[np.argmin(mult[cand])]] = False
            continue
        p = np.zeros(n)
        p[free] = p_f
        step, block = 1.0, -1
        for i in np.where(free & (p < 0))[0]:
            s = -x[i] / p[i]
            if s < step:
                step, block = s, i
        x = x + step * p
        if block >= 0:
            working[block] = True
            x[block] = 0.0
        x[x < 0] = 0.0
    return x, False


def _kkt_residual(q, a, b, x) -> float:
    g = q @ x
    free = x > 1e-14
    lam = np.linalg.lstsq(a[:, free].T, g[free], rcond=None)[0] if free.any() else np.zeros(a.shape[0])
    mult = g - a.T @ lam
    scale = max(1.0, float(np.abs(q).max()))
    stationarity = float(np.max(np.abs(mult[free]), initial=0.0))
    dual = float(max(0.0, -mult[~free].min(initial=0.0)))
    primal = float(np.max(np.abs(a @ x - b)))
    return max(stationarity, dual, primal) / scale


def mvp_constrained(moments: MomentEstimate, universe: Sequence[str] | None = None,
                    start: np.ndarray | None = None) -> PortfolioWeights:
    """Long-only, fully-invested minimum-variance portfolio.

    The closed-form solution is returned unchanged when it is already
    non-negative. Otherwise an active-set search starts from the better (in
    objective) of the simplex projection of the closed form and ``start``.
    """
    n = moments.mu.size
    labels = _labels(n, universe)
    sigma, ridged = regularize(moments.sigma)
    ones = np.ones(n)
    try:
        x = np.linalg.solve(sigma, ones)
        closed = x / x.sum()
    except np.linalg.LinAlgError:
        closed = np.full(n, 1.0 / n)
    if np.all(np.isfinite(closed)) and closed.min() >= 0.0:
        return _no_worse_than(start, closed, moments.sigma, labels, ridged)

    seeds = [project_simplex(np.nan_to_num(closed, nan=1.0 / n))]
    if start is not None:
        seeds.append(np.asarray(start, dtype=float))
    x0 = min(seeds, key=lambda w: float(w @ sigma @ w))
    a = ones[None, :]
    w, ok = active_set_qp(sigma, a, np.ones(1), x0)
    if not ok:
        raise SolverError("active-set QP did not converge", best=PortfolioWeights(w / w.sum(), labels, ridged))
    w = w / w.sum()
    resid = _kkt_residual(sigma, a, np.ones(1), w)
    if resid > KKT_TOL:
        raise SolverError(f"KKT residual {resid:.2e} above tolerance", best=PortfolioWeights(w, labels, ridged))
    return _no_worse_than(start, w, moments.sigma, labels, ridged)


def _no_worse_than(start, w, sigma, labels, ridged) -> PortfolioWeights:
    # the ridge shifts the objective by up to lam; never return worse than a known feasible point
    if start is not None:
        start = np.asarray(start, dtype=float)
        if float(start @ sigma @ start) < float(w @ sigma @ w):
            w = start.copy()
    return PortfolioWeights(w, labels, ridge_applied=ridged)


def _frontier_point(sigma, mu, target, labels, ridged) -> FrontierPoint:
    n = mu.size
    lo, hi = int(np.argmin(mu)), int(np.argmax(mu))
    if target < mu[lo] - 1e-15 or target > mu[hi] + 1e-15:
        return FrontierPoint(target, math.nan, None, False, "target outside [min mu, max mu]")
    x0 = np.zeros(n)
    if mu[hi] - mu[lo] <= 1e-300:
        x0[hi] = 1.0
    else:
        t = min(max((target - mu[lo]) / (mu[hi] - mu[lo]), 0.0), 1.0)
        x0[lo] += 1.0 - t
        x0[hi] += t
    a = np.vstack([np.ones(n), mu])
    b = np.array([1.0, float(x0 @ mu)])
    w, ok = active_set_qp(sigma, a, b, x0)
    if not ok:
        return FrontierPoint(target, math.nan, None, False, "active-set QP did not converge")
    w = w / w.sum()
    return FrontierPoint(target, math.sqrt(max(float(w @ sigma @ w), 0.0)),
                         PortfolioWeights(w, labels, ridge_applied=ridged), True)


def efficient_frontier(moments: MomentEstimate, n_points: int = 50,
                       universe: Sequence[str] | None = None) -> list[FrontierPoint]:
    """Long-only frontier on a uniform target grid from the MVP return to max(mu).

    Risk is reported as a standard deviation. Points the solver cannot reach are
    kept in grid order with ``feasible=False``.
    """
    if n_points < 2:
        raise ValueError("n_points must be >= 2")
    labels = _labels(moments.mu.size, universe)
    mvp = mvp_constrained(moments, labels)
    sigma, ridged = regularize(moments.sigma)
    mu = moments.mu
    r0 = float(mvp.weights @ mu)
    r1 = float(mu.max())
    points = [FrontierPoint(r0, math.sqrt(portfolio_variance(mvp, moments)), mvp, True)]
    for target in np.linspace(r0, r1, n_points)[1:]:
        pt = _frontier_point(sigma, mu, float(target), labels, ridged)
        if pt.feasible:
            # report the unregularized risk of the solution
            pt = FrontierPoint(pt.target_return, math.sqrt(portfolio_variance(pt.weights, moments)),
                               pt.weights, True)
        points.append(pt)
    return points


def scenario_cvar(portfolio_returns, alpha: float) -> tuple[float, float]:
    """Exact ``(VaR, CVaR)`` of equally likely scenario returns at level ``alpha``.

    CVaR is the minimum over t of t + E[(loss - t)+] / (1 - alpha), which for a
    discrete sample is the average loss over the worst (1 - alpha) share of
    scenarios, splitting the boundary scenario fractionally.
    """
    losses = np.sort(-np.asarray(portfolio_returns, dtype=float))[::-1]
    tail = (1.0 - alpha) * losses.size
    k = int(math.floor(tail))
    frac = tail - k
    cvar = (losses[:k].sum() + frac * losses[k]) / tail
    # minimizing threshold: the k-th worst loss when the tail is whole scenarios
    var = losses[k - 1] if (frac <= 1e-12 and k >= 1) else losses[k]
    return float(var), float(cvar)


def min_cvar_lp(scenarios, alpha: float, universe: Sequence[str] | None = None,
                start: np.ndarray | None = None) -> CvarSolution:
    """Long-only minimum-CVaR portfolio over equally weighted return scenarios.

    Solves min t + sum(z) / ((1 - alpha) S) s.t. z >= -R w - t, z >= 0, w >= 0,
    1'w = 1 with HiGHS. The reported CVaR and threshold are recomputed exactly
    from the returned weights. ``start`` is an optional known-feasible weight
    vector that is returned instead if it scores lower.
    """
    r = np.asarray(scenarios, dtype=float)
    if r.ndim != 2:
        raise ValueError("scenarios must be an S x N matrix")
    s, n = r.shape
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    if s < 2:
        raise ValueError("need at least 2 scenarios")
    if (1.0 - alpha) * s < 1.0:
        warnings.warn(f"(1 - alpha) * S = {(1 - alpha) * s:.3g} < 1: CVaR reduces to the worst loss",
                      RuntimeWarning, stacklevel=2)
    labels = _labels(n, universe)

    # variables: w (n), t (1), z (s)
    c = np.concatenate([np.zeros(n), [1.0], np.full(s, 1.0 / ((1.0 - alpha) * s))])
    a_ub = np.hstack([-r, -np.ones((s, 1)), -np.eye(s)])
    b_ub = np.zeros(s)
    a_eq = np.concatenate([np.ones(n), [0.0], np.zeros(s)])[None, :]
    bounds = [(0, None)] * n + [(None, None)] + [(0, None)] * s
    res = linprog(c, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=[1.0], bounds=bounds, method="highs-ds",
                  options={"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10})
    if res.status != 0:
        raise SolverError(f"CVaR LP failed: {res.message}")
    w = np.clip(res.x[:n], 0.0, None)
    w = w / w.sum()
    var, cvar = scenario_cvar(r @ w, alpha)
    if start is not None:
        w0 = np.asarray(start, dtype=float)
        var0, cvar0 = scenario_cvar(r @ w0, alpha)
        if cvar0 < cvar:
            w, var, cvar = w0, var0, cvar0
    if abs(cvar - res.fun) > 1e-7 * max(1.0, abs(cvar)):
        logger.debug("LP objective %.12g differs from recomputed CVaR %.12g", res.fun, cvar)
    return CvarSolution(PortfolioWeights(w, labels), var, cvar, alpha)
