"""Deterministic synthetic price panels used by the test suite and the CLI demo.

The bundled ``fixture_prices.csv`` is ``synthetic_price_csv()`` with the defaults.
"""

from __future__ import annotations

import datetime as dt
from importlib import resources

import numpy as np

from .data import Calendar, PricePanel, panel_to_csv

FIXTURE_SEED = 42
FIXTURE_ASSETS = 5
FIXTURE_DAYS = 800


def business_days(start: dt.date, n: int) -> list[dt.date]:
    out, d = [], start
    while len(out) < n:
        if d.weekday() < 5:
            out.append(d)
        d += dt.timedelta(days=1)
    return out


def synthetic_price_panel(seed: int = FIXTURE_SEED, n_assets: int = FIXTURE_ASSETS,
                          n_days: int = FIXTURE_DAYS) -> PricePanel:
    """One-factor return model with a volatility regime change halfway through.

    Prices are rounded to 4 decimals, as a vendor close would be.
    """
    rng = np.random.default_rng(seed)
    n_ret = n_days - 1
    beta = rng.uniform(0.5, 1.5, n_assets)
    idio = rng.uniform(0.006, 0.02, n_assets)
    drift = rng.uniform(-0.0002, 0.0008, n_assets)
    vol_scale = np.where(np.arange(n_ret) < n_ret // 2, 1.0, 1.8)[:, None]
    market = rng.standard_normal(n_ret) * 0.008
    eps = rng.standard_t(5, size=(n_ret, n_assets)) * np.sqrt(3 / 5) * idio
    returns = drift + vol_scale * (market[:, None] * beta + eps)
    start = rng.uniform(20, 200, n_assets)
    prices = np.vstack([start, start * np.cumprod(1.0 + returns, axis=0)])
    prices = np.round(prices, 4)
    names = tuple(f"AS{j + 1}" for j in range(n_assets))
    return PricePanel(tuple(business_days(dt.date(2021, 1, 4), n_days)), names, prices, Calendar.TRADING_252)


def synthetic_price_csv(**kwargs) -> str:
    return panel_to_csv(synthetic_price_panel(**kwargs))


def fixture_path():
    """Path-like handle to the bundled fixture CSV."""
    return resources.files("amvp_lab") / "data" / "fixture_prices.csv"
