"""Forward-looking scenario generation (ARFIMA-FIGARCH with NIG innovations)."""

from .fracdiff import apply_frac_filter, frac_diff_weights
from .model import (
    BURN_IN,
    TRUNCATION_LAGS,
    ArfimaFigarchParams,
    figarch_weights,
    fit_arfima_figarch,
    simulate_paths,
)
from .nig import NigParams, fit_nig, nig_sample
from .panel import ScenarioSet, build_scenario_panel

__all__ = [
    "BURN_IN",
    "TRUNCATION_LAGS",
    "ArfimaFigarchParams",
    "NigParams",
    "ScenarioSet",
    "apply_frac_filter",
    "build_scenario_panel",
    "figarch_weights",
    "fit_arfima_figarch",
    "fit_nig",
    "frac_diff_weights",
    "nig_sample",
    "simulate_paths",
]
