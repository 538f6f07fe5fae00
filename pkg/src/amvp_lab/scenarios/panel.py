"""Multi-asset scenario panels: per-asset model fits plus rank-based dependence."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from ..data import ReturnPanel
from ..errors import AmvpLabError, EstimationError
from .model import ArfimaFigarchParams, fit_arfima_figarch, simulate_paths
from .nig import NigParams, fit_nig

logger = logging.getLogger(__name__)

# RNG stream tags: [seed, tag, ...]
_SIM_STREAM = 0
_COPULA_STREAM = 1


@dataclass(frozen=True)
class AssetProvenance:
    asset: str
    model: ArfimaFigarchParams
    innovations: NigParams

    def to_dict(self) -> dict:
        return {"asset": self.asset, "model": self.model.to_dict(), "innovations": self.innovations.to_dict()}


@dataclass(frozen=True)
class ScenarioSet:
    returns: np.ndarray
    assets: tuple[str, ...]
    seed: int
    provenance: tuple[AssetProvenance, ...] = field(default=(), repr=False)
    rank_correlation: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.returns.ndim != 2 or self.returns.shape[1] != len(self.assets):
            raise ValueError("scenario matrix does not match the asset list")
        if self.provenance and len(self.provenance) != len(self.assets):
            raise ValueError("provenance must cover every asset")

    @property
    def n_scenarios(self) -> int:
        return self.returns.shape[0]

    def provenance_dict(self) -> dict:
        return {
            "seed": self.seed,
            "n_scenarios": self.n_scenarios,
            "assets": [p.to_dict() for p in self.provenance],
            "rank_correlation": None if self.rank_correlation is None else self.rank_correlation.tolist(),
        }


def _nearest_correlation(c: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh(0.5 * (c + c.T))
    vals = np.clip(vals, 0.0, None)
    out = (vecs * vals) @ vecs.T
    d = np.sqrt(np.diag(out))
    out = out / np.outer(d, d)
    np.fill_diagonal(out, 1.0)
    return out


def copula_scores(rank_corr: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` draws from a Gaussian copula matching the given Spearman matrix."""
    k = rank_corr.shape[0]
    pearson = 2.0 * np.sin(np.pi * rank_corr / 6.0)
    corr = _nearest_correlation(pearson)
    vals, vecs = np.linalg.eigh(corr)
    root = vecs * np.sqrt(np.clip(vals, 0.0, None))
    return rng.standard_normal((n, k)) @ root.T


def reorder_to_ranks(columns: np.ndarray, scores: np.ndarray) -> np.ndarray:
    """Permute each column so its ranks match the ranks of the matching score column."""
    out = np.empty_like(columns)
    for j in range(columns.shape[1]):
        order = np.argsort(scores[:, j], kind="stable")
        out[order, j] = np.sort(columns[:, j], kind="stable")
    return out


def spearman_matrix(returns: np.ndarray) -> np.ndarray:
    if returns.shape[1] == 1:
        return np.ones((1, 1))
    ranks = np.apply_along_axis(stats.rankdata, 0, returns)
    with np.errstate(invalid="ignore", divide="ignore"):
        c = np.nan_to_num(np.corrcoef(ranks, rowvar=False), nan=0.0)
    np.fill_diagonal(c, 1.0)
    return c


def build_scenario_panel(panel: ReturnPanel, t_len: int, seed: int, n_paths: int = 1) -> ScenarioSet:
    """Forward-looking scenario matrix for every asset in ``panel``.

    Each asset gets its own ARFIMA-FIGARCH fit with NIG innovations and is
    simulated for ``t_len`` periods (``n_paths`` independent paths are stacked,
    giving ``t_len * n_paths`` scenario rows). Columns are then reordered so the
    cross-sectional ranks follow a Gaussian copula with the historical Spearman
    correlations.
    """
    if t_len < 1 or n_paths < 1:
        raise ValueError("t_len and n_paths must be >= 1")
    provenance = []
    failures = []
    for j, name in enumerate(panel.assets):
        try:
            model, resid = fit_arfima_figarch(panel.returns[:, j])
            innov = fit_nig(resid)
        except (AmvpLabError, ValueError) as exc:
            failures.append(f"{name}: {exc}")
            continue
        provenance.append(AssetProvenance(name, model, innov))
    if failures:
        raise EstimationError("scenario fit failed for " + "; ".join(failures))

    sims = np.empty((t_len * n_paths, panel.n_assets))
    for j, prov in enumerate(provenance):
        paths = simulate_paths(prov.model, prov.innovations, t_len, n_paths, seed=[seed, _SIM_STREAM, j])
        sims[:, j] = paths.T.reshape(-1)

    rank_corr = spearman_matrix(panel.returns)
    if panel.n_assets > 1:
        rng = np.random.default_rng([seed, _COPULA_STREAM])
        sims = reorder_to_ranks(sims, copula_scores(rank_corr, sims.shape[0], rng))
    return ScenarioSet(sims, panel.assets, int(seed), tuple(provenance), rank_corr)
