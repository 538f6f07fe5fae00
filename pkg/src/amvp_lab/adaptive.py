"""Adaptive minimum-risk loops built on synthetic-asset augmentation.

Each iteration solves the long-only minimum-risk problem on the current
universe, records the optimum's risk and expected return (the adaptive
minimum-risk rate), then appends the optimal portfolio's return series as a
new column and repeats until successive risks differ by less than epsilon.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .data import ReturnPanel, returns_from_matrix
from .errors import AmvpLabError, ConfigError, DataError, SolverError
from .optimize import PortfolioWeights, estimate_moments, min_cvar_lp, mvp_constrained, portfolio_variance

logger = logging.getLogger(__name__)

HISTORICAL_EPSILON = 1e-20
SCENARIO_EPSILON = 1e-6
DEFAULT_MAX_ITERATIONS = 50
DEFAULT_ALPHA = 0.99


@dataclass(frozen=True)
class AdaptiveConfig:
    epsilon: float = HISTORICAL_EPSILON
    max_iterations: int = DEFAULT_MAX_ITERATIONS
    alpha: float = DEFAULT_ALPHA
    annualization_factor: int = 252

    def __post_init__(self):
        if not (self.epsilon > 0 and math.isfinite(self.epsilon)):
            raise ConfigError(f"epsilon must be positive, got {self.epsilon}")
        if int(self.max_iterations) != self.max_iterations or self.max_iterations < 1:
            raise ConfigError(f"max_iterations must be an integer >= 1, got {self.max_iterations}")
        if not 0 < self.alpha < 1:
            raise ConfigError(f"alpha must lie in (0, 1), got {self.alpha}")
        if not self.annualization_factor > 0:
            raise ConfigError(f"annualization_factor must be positive, got {self.annualization_factor}")


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    universe: tuple[str, ...]
    weights: np.ndarray
    risk: float
    rate: float
    ridge_applied: bool = False

    @property
    def universe_size(self) -> int:
        return len(self.universe)


@dataclass
class AdaptiveTrace:
    """Per-iteration history of an adaptive run.

    ``risk`` is the portfolio variance for AMVP runs and CVaR for AMCVaRP runs;
    ``rate`` is always per-period. ``panel`` is the final augmented universe.
    """

    records: list[IterationRecord]
    converged: bool
    measure: Literal["variance", "cvar"]
    panel: ReturnPanel | None = field(default=None, repr=False)

    @property
    def synthetic_count(self) -> int:
        return max(len(self.records) - 1, 0)

    @property
    def converged_at(self) -> int | None:
        return len(self.records) - 1 if self.converged else None

    @property
    def final(self) -> IterationRecord:
        if not self.records:
            raise ValueError("empty trace")
        return self.records[-1]

    @property
    def risks(self) -> np.ndarray:
        return np.array([r.risk for r in self.records])

    @property
    def rates(self) -> np.ndarray:
        return np.array([r.rate for r in self.records])


def append_synthetic(panel: ReturnPanel, weights, label: str) -> ReturnPanel:
    """Return ``panel`` with the extra column ``returns @ weights`` named ``label``."""
    if isinstance(weights, PortfolioWeights):
        if tuple(weights.universe) != tuple(panel.assets):
            raise DataError("weights are defined over a different universe than the panel")
        w = weights.weights
    else:
        w = np.asarray(weights, dtype=float)
    if w.shape != (panel.n_assets,):
        raise DataError(f"weights have length {w.size}, panel has {panel.n_assets} assets")
    if label in panel.assets:
        raise DataError(f"duplicate asset label {label!r}")
    synth = panel.returns @ w
    return ReturnPanel(panel.dates, (*panel.assets, label), np.column_stack([panel.returns, synth]), panel.calendar)


def _as_panel(data) -> ReturnPanel:
    return data if isinstance(data, ReturnPanel) else returns_from_matrix(data)


def _newest_only(n: int) -> np.ndarray:
    e = np.zeros(n)
    e[-1] = 1.0
    return e


def amvp_run(panel, config: AdaptiveConfig | None = None) -> AdaptiveTrace:
    """Adaptive minimum-variance loop.

    The long-only solver is used at every iteration. From the second iteration
    on, the covariance is singular by construction and the optimizer's ridge
    policy fires; ``ridge_applied`` is recorded per iteration.
    """
    config = config or AdaptiveConfig()
    current = _as_panel(panel)
    if current.n_assets < 2:
        raise DataError("AMVP needs at least two assets")
    records: list[IterationRecord] = []
    converged = False
    for k in range(1, config.max_iterations + 1):
        start = _newest_only(current.n_assets) if k > 1 else None
        try:
            moments = estimate_moments(current.returns)
            w = mvp_constrained(moments, current.assets, start=start)
        except AmvpLabError as exc:
            raise SolverError(str(exc), best=getattr(exc, "best", None), iteration=k) from exc
        risk = portfolio_variance(w, moments)
        rate = float(w.weights @ moments.mu)
        records.append(IterationRecord(k, current.assets, w.weights, risk, rate, w.ridge_applied))
        logger.debug("AMVP iteration %d: N=%d variance=%.6e rate=%.6e", k, current.n_assets, risk, rate)
        if k > 1 and abs(records[-2].risk - risk) < config.epsilon:
            converged = True
            break
        if k == config.max_iterations:
            break
        current = append_synthetic(current, w, f"SYN_{k}")
    return AdaptiveTrace(records, converged, "variance", current)


def amcvarp_run(scenarios, config: AdaptiveConfig | None = None) -> AdaptiveTrace:
    """Adaptive minimum-CVaR loop over an S x N scenario matrix (or ReturnPanel)."""
    config = config or AdaptiveConfig(epsilon=SCENARIO_EPSILON)
    current = _as_panel(scenarios)
    if current.n_obs < 2:
        raise DataError("AMCVaRP needs at least two scenarios")
    records: list[IterationRecord] = []
    converged = False
    for k in range(1, config.max_iterations + 1):
        start = _newest_only(current.n_assets) if k > 1 else None
        try:
            sol = min_cvar_lp(current.returns, config.alpha, current.assets, start=start)
        except AmvpLabError as exc:
            raise SolverError(str(exc), iteration=k) from exc
        mu = current.returns.mean(axis=0)
        rate = float(sol.weights.weights @ mu)
        records.append(IterationRecord(k, current.assets, sol.weights.weights, sol.cvar, rate))
        logger.debug("AMCVaRP iteration %d: N=%d cvar=%.6e rate=%.6e", k, current.n_assets, sol.cvar, rate)
        if k > 1 and abs(records[-2].risk - sol.cvar) < config.epsilon:
            converged = True
            break
        if k == config.max_iterations:
            break
        current = append_synthetic(current, sol.weights, f"SYN_{k}")
    return AdaptiveTrace(records, converged, "cvar", current)


def static_rate(trace: AdaptiveTrace, factor: int) -> float:
    """Final per-period rate compounded over ``factor`` periods."""
    if not trace.records:
        raise ValueError("cannot annualize an empty trace")
    return annualize(trace.final.rate, factor)


def annualize(rate: float, factor: int) -> float:
    return (1.0 + rate) ** factor - 1.0
