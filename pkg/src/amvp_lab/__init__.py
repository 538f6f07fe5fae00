"""Adaptive minimum-variance and minimum-CVaR portfolios, shadow riskless rates and diagnostics."""

__version__ = "0.1.0"

from .adaptive import AdaptiveConfig, AdaptiveTrace, IterationRecord, amcvarp_run, amvp_run, annualize, static_rate
from .analysis import ChowResult, LrdEstimate, RateSeries, chow_scan, estimate_dv, log_transform, rolling_amrr, spearman
from .data import (AssetSummary, Calendar, PricePanel, ReturnPanel, align_panels, compute_returns, load_price_panel,
                   returns_from_matrix, summary_stats)
from .errors import (AmvpLabError, ConfigError, DataError, EstimationError, LoadError, NumericalError,
                     SingularCovarianceError, SolverError)
from .optimize import (CvarSolution, FrontierPoint, MomentEstimate, PortfolioWeights, efficient_frontier,
                       estimate_moments, min_cvar_lp, mvp_closed_form, mvp_constrained, portfolio_variance)

__all__ = [
    "AdaptiveConfig", "AdaptiveTrace", "IterationRecord", "amcvarp_run", "amvp_run", "annualize", "static_rate",
    "ChowResult", "LrdEstimate", "RateSeries", "chow_scan", "estimate_dv", "log_transform", "rolling_amrr",
    "spearman", "AssetSummary", "Calendar", "PricePanel", "ReturnPanel", "align_panels", "compute_returns",
    "load_price_panel", "returns_from_matrix", "summary_stats", "AmvpLabError", "ConfigError", "DataError",
    "EstimationError", "LoadError", "NumericalError", "SingularCovarianceError", "SolverError", "CvarSolution",
    "FrontierPoint", "MomentEstimate", "PortfolioWeights", "efficient_frontier", "estimate_moments",
    "min_cvar_lp", "mvp_closed_form", "mvp_constrained", "portfolio_variance",
]
