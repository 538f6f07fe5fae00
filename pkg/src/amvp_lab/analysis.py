"""Diagnostics on rate series: rolling AMRR, Chow scans, long memory, rank correlation."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from scipy import stats

from .adaptive import AdaptiveConfig, amvp_run
from .data import ReturnPanel
from .errors import AmvpLabError, DataError, NumericalError
from .optimize import estimate_moments, mvp_constrained
from .scenarios.model import MIN_FIT_LENGTH, fit_arfima_figarch

logger = logging.getLogger(__name__)

MAX_WINDOW_FAILURE_SHARE = 0.05


@dataclass(frozen=True)
class RateSeries:
    """Rolling rate values, one per window, dated at the window's last observation.

    Failed windows hold NaN and are listed in ``gaps`` as ``(date, reason)``.
    """

    dates: tuple
    values: np.ndarray
    window: int
    source: str = "historical"
    annualized: bool = False
    gaps: tuple = field(default=(), repr=False)

    def __post_init__(self):
        if len(self.dates) != self.values.size:
            raise ValueError("dates and values differ in length")
        if any(b <= a for a, b in zip(self.dates, self.dates[1:])):
            raise ValueError("dates must be strictly increasing")

    def __len__(self):
        return self.values.size

    def dropna(self) -> "RateSeries":
        keep = np.isfinite(self.values)
        return RateSeries(tuple(d for d, k in zip(self.dates, keep) if k), self.values[keep], self.window,
                          self.source, self.annualized, self.gaps)


@dataclass(frozen=True)
class ChowResult:
    breakpoint_date: object
    f_stat: float
    p_value: float
    n_left: int
    n_right: int


@dataclass(frozen=True)
class LrdEstimate:
    d_v: float
    hurst: float
    method: str
    boundary: bool = False

    @classmethod
    def from_dv(cls, d_v: float, method: str, boundary: bool = False) -> "LrdEstimate":
        return cls(d_v=d_v, hurst=0.5 + d_v, method=method, boundary=boundary)


def rolling_amrr(panel: ReturnPanel, window: int, config: AdaptiveConfig | None = None,
                 single_shot: bool = False, source: str = "historical") -> RateSeries:
    """Per-period AMRR over every window of ``window`` consecutive rows.

    Each window is an independent full AMVP run (or a single long-only MVP
    solve with ``single_shot``). Output length is ``T - window + 1``.
    """
    config = config or AdaptiveConfig()
    t, n = panel.returns.shape
    if window < n + 2:
        raise DataError(f"window {window} too short for {n} assets (need at least {n + 2})")
    if t < window:
        raise DataError(f"panel has {t} rows, fewer than the window {window}")
    count = t - window + 1
    values = np.full(count, np.nan)
    gaps = []
    for k in range(count):
        block = panel.rows(k, k + window)
        try:
            if single_shot:
                m = estimate_moments(block.returns)
                values[k] = float(mvp_constrained(m, block.assets).weights @ m.mu)
            else:
                values[k] = amvp_run(block, config).final.rate
        except AmvpLabError as exc:
            gaps.append((block.dates[-1], str(exc)))
    if len(gaps) > MAX_WINDOW_FAILURE_SHARE * count:
        raise NumericalError(f"{len(gaps)} of {count} windows failed; first: {gaps[0][1]}")
    dates = tuple(panel.dates[window - 1:])
    return RateSeries(dates, values, window, source, False, tuple(gaps))


def default_min_segment(n: int) -> int:
    return max(30, math.ceil(0.1 * n))


def _design(y: np.ndarray, regression: str) -> tuple[np.ndarray, np.ndarray]:
    if regression == "ar1":
        return y[1:], np.column_stack([np.ones(y.size - 1), y[:-1]])
    if regression == "const":
        return y, np.ones((y.size, 1))
    raise ValueError(f"unknown regression {regression!r}; expected 'ar1' or 'const'")


def _ssr(y: np.ndarray, x: np.ndarray) -> float:
    if np.linalg.matrix_rank(x) < x.shape[1]:
        raise np.linalg.LinAlgError("singular regressor matrix")
    beta = np.linalg.lstsq(x, y, rcond=None)[0]
    e = y - x @ beta
    return float(e @ e)


def chow_scan(series: RateSeries, min_segment: int | None = None,
              regression: Literal["ar1", "const"] = "ar1", bonferroni: bool = False) -> list[ChowResult]:
    """Chow F-test at every admissible breakpoint.

    The regression is AR(1) with intercept by default (q = 2) or intercept
    only (q = 1). The breakpoint date is the date of the first observation in
    the right-hand segment. With ``bonferroni`` the p-values are multiplied by
    the number of tested breakpoints and capped at 1.
    """
    s = series.dropna() if np.isnan(series.values).any() else series
    y_all = np.asarray(s.values, dtype=float)
    y, x = _design(y_all, regression)
    obs_dates = s.dates[1:] if regression == "ar1" else s.dates
    n, q = y.size, x.shape[1]
    if min_segment is None:
        min_segment = default_min_segment(n)
    if min_segment < q + 1:
        raise ValueError(f"min_segment must exceed the {q} regression parameters")
    if y_all.size < 2 * min_segment + 1:
        raise DataError(f"series of length {y_all.size} too short for min_segment {min_segment}")

    ssr_full = _ssr(y, x)
    dof = n - 2 * q
    results = []
    for b in range(min_segment, n - min_segment + 1):
        try:
            ssr_split = _ssr(y[:b], x[:b]) + _ssr(y[b:], x[b:])
        except np.linalg.LinAlgError:
            logger.info("breakpoint %s skipped: singular regression on a segment", obs_dates[b])
            continue
        if ssr_split <= 0:
            f_stat, p = (0.0, 1.0) if ssr_full <= 0 else (math.inf, 0.0)
        else:
            f_stat = max((ssr_full - ssr_split) / q / (ssr_split / dof), 0.0)
            p = float(stats.f.sf(f_stat, q, dof))
        results.append(ChowResult(obs_dates[b], float(f_stat), p, b, n - b))
    if bonferroni and results:
        m = len(results)
        results = [ChowResult(r.breakpoint_date, r.f_stat, min(1.0, r.p_value * m), r.n_left, r.n_right)
                   for r in results]
    return results


def log_transform(series) -> np.ndarray:
    """Sign-preserving log, sign(x) * ln(1 + |x|), elementwise."""
    x = np.asarray(getattr(series, "values", series), dtype=float)
    return np.sign(x) * np.log1p(np.abs(x))


def estimate_dv(series) -> LrdEstimate:
    """Volatility long-memory order from the ARFIMA-FIGARCH estimator, clipped to [0, 1).

    ``boundary`` flags estimates sitting at either end of the admissible range.
    """
    x = np.asarray(getattr(series, "values", series), dtype=float)
    x = x[np.isfinite(x)]
    if x.size < MIN_FIT_LENGTH:
        raise DataError(f"need at least {MIN_FIT_LENGTH} observations, got {x.size}")
    params, _ = fit_arfima_figarch(x)
    d_v = float(np.clip(params.d_v, 0.0, 0.9999))
    boundary = d_v <= 1e-6 or d_v >= 0.99
    return LrdEstimate.from_dv(d_v, "arfima-figarch-qml", boundary)


def spearman(x, y) -> tuple[float, float]:
    """Spearman rank correlation with average ranks for ties and a t-approximation p-value."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("x and y must be 1-D with equal lengths")
    n = x.size
    if n < 3:
        raise ValueError("need at least 3 observations")
    rx, ry = stats.rankdata(x), stats.rankdata(y)
    rx -= rx.mean()
    ry -= ry.mean()
    denom = math.sqrt(float(rx @ rx) * float(ry @ ry))
    if denom == 0:
        raise DataError("zero rank variance")
    rho = float(np.clip((rx @ ry) / denom, -1.0, 1.0))
    if abs(rho) >= 1.0:
        return rho, 0.0
    t = rho * math.sqrt((n - 2) / (1.0 - rho * rho))
    p = float(2.0 * stats.t.sf(abs(t), n - 2))
    return rho, min(max(p, 0.0), 1.0)
