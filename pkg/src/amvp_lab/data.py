"""Price panels, arithmetic returns, alignment and per-asset summary statistics."""

from __future__ import annotations

import csv
import datetime as dt
import io
import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, TextIO

import numpy as np

from .errors import DataError, LoadError

# an asset with more than this share of empty cells is rejected
MAX_MISSING_SHARE = 0.10


class Calendar(Enum):
    TRADING_252 = 252
    CONTINUOUS_365 = 365

    @property
    def factor(self) -> int:
        return self.value

    @classmethod
    def parse(cls, value) -> "Calendar":
        if isinstance(value, Calendar):
            return value
        aliases = {"252": cls.TRADING_252, "trading-252": cls.TRADING_252,
                   "365": cls.CONTINUOUS_365, "continuous-365": cls.CONTINUOUS_365}
        text = str(value).strip().lower()
        if text in aliases:
            return aliases[text]
        raise ValueError(f"unknown calendar {value!r}; expected 252 or 365")


@dataclass(frozen=True)
class PricePanel:
    dates: tuple[dt.date, ...]
    assets: tuple[str, ...]
    prices: np.ndarray
    calendar: Calendar = Calendar.TRADING_252

    def __post_init__(self):
        _check_shape(self.dates, self.assets, self.prices)
        if not np.all(self.prices > 0):
            raise DataError("prices must be strictly positive")


@dataclass(frozen=True)
class ReturnPanel:
    dates: tuple
    assets: tuple[str, ...]
    returns: np.ndarray
    calendar: Calendar = Calendar.TRADING_252

    def __post_init__(self):
        _check_shape(self.dates, self.assets, self.returns)
        if not np.all(np.isfinite(self.returns)):
            raise DataError("returns contain missing or non-finite values")
        if not np.all(self.returns > -1.0):
            raise DataError("arithmetic returns must exceed -1")

    @property
    def n_obs(self) -> int:
        return self.returns.shape[0]

    @property
    def n_assets(self) -> int:
        return self.returns.shape[1]

    def rows(self, start: int, stop: int) -> "ReturnPanel":
        return ReturnPanel(self.dates[start:stop], self.assets, self.returns[start:stop], self.calendar)


@dataclass(frozen=True)
class AssetSummary:
    asset: str
    mean: float
    std: float
    min: float
    q25: float
    median: float
    q75: float
    max: float


def _check_shape(dates, assets, matrix):
    if matrix.ndim != 2 or matrix.shape != (len(dates), len(assets)):
        raise DataError(f"matrix shape {matrix.shape} does not match {len(dates)} dates x {len(assets)} assets")
    if len(set(assets)) != len(assets):
        raise DataError("asset labels must be unique")
    if any(b <= a for a, b in zip(dates, dates[1:])):
        raise DataError("dates must be strictly increasing")


def _parse_date(text: str, row: int) -> dt.date:
    try:
        if len(text) != 10:
            raise ValueError
        return dt.date.fromisoformat(text)
    except ValueError:
        raise LoadError(f"unparseable date {text!r}, expected YYYY-MM-DD", row=row, column="date") from None


def load_price_panel(source: TextIO | str, calendar=Calendar.TRADING_252) -> PricePanel:
    """Read a wide price CSV (``date,<asset>,...``).

    Interior gaps are forward-filled; leading rows are dropped until every asset
    has a price. An asset missing more than 10% of its cells is an error.
    """
    calendar = Calendar.parse(calendar)
    if isinstance(source, str):
        source = io.StringIO(source)
    reader = csv.reader(source)
    header = next(reader, None)
    if not header or header[0].strip().lower() != "date" or len(header) < 2:
        raise LoadError("header must start with 'date' followed by at least one asset column", row=1)
    assets = [h.strip() for h in header[1:]]
    if any(not a for a in assets) or len(set(assets)) != len(assets):
        raise LoadError("asset column names must be non-empty and unique", row=1)

    dates: list[dt.date] = []
    rows: list[list[float]] = []
    for line_no, rec in enumerate(reader, start=2):
        if not rec or all(not c.strip() for c in rec):
            continue
        if len(rec) != len(header):
            raise LoadError(f"expected {len(header)} fields, found {len(rec)}", row=line_no)
        dates.append(_parse_date(rec[0].strip(), line_no))
        vals = []
        for name, cell in zip(assets, rec[1:]):
            cell = cell.strip()
            if not cell:
                vals.append(math.nan)
                continue
            try:
                v = float(cell)
            except ValueError:
                raise LoadError(f"unparseable price {cell!r}", row=line_no, column=name) from None
            if not (v > 0 and math.isfinite(v)):
                raise LoadError(f"non-positive price {cell!r}", row=line_no, column=name)
            vals.append(v)
        rows.append(vals)

    if len(rows) < 2:
        raise LoadError(f"need at least 2 data rows, found {len(rows)}")
    for i in range(1, len(dates)):
        if dates[i] <= dates[i - 1]:
            raise LoadError("dates must be strictly increasing", row=i + 2, column="date")

    prices = np.array(rows, dtype=float)
    missing = np.isnan(prices).mean(axis=0)
    for name, share in zip(assets, missing):
        if share > MAX_MISSING_SHARE:
            raise LoadError(f"asset has {share:.1%} missing cells (limit {MAX_MISSING_SHARE:.0%})", column=name)

    prices = _forward_fill(prices)
    complete = ~np.isnan(prices).any(axis=1)
    if not complete.any():
        raise LoadError("no row where every asset has a price")
    start = int(np.argmax(complete))
    prices = prices[start:]
    dates = dates[start:]
    if len(dates) < 2:
        raise LoadError("fewer than 2 rows remain after dropping incomplete leading rows")
    return PricePanel(tuple(dates), tuple(assets), prices, calendar)


def _forward_fill(a: np.ndarray) -> np.ndarray:
    out = a.copy()
    for j in range(out.shape[1]):
        col = out[:, j]
        for i in range(1, col.size):
            if math.isnan(col[i]):
                col[i] = col[i - 1]
    return out


def panel_to_csv(panel: PricePanel) -> str:
    """Serialize a price panel in the input CSV format (round-trips through ``load_price_panel``)."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["date", *panel.assets])
    for d, row in zip(panel.dates, panel.prices):
        writer.writerow([d.isoformat(), *(repr(float(v)) for v in row)])
    return buf.getvalue()


def compute_returns(panel: PricePanel) -> ReturnPanel:
    """Arithmetic returns p[t+1] / p[t] - 1, dated at the later observation."""
    if panel.prices.shape[0] < 2:
        raise DataError("need at least 2 price rows to compute returns")
    p = panel.prices
    r = p[1:] / p[:-1] - 1.0
    return ReturnPanel(panel.dates[1:], panel.assets, r, panel.calendar)


def _quantile(x: np.ndarray, q: float) -> float:
    return float(np.quantile(x, q, method="linear"))


def summary_stats(panel: ReturnPanel) -> list[AssetSummary]:
    r = panel.returns
    if r.shape[0] < 1:
        raise DataError("need at least one return row")
    out = []
    for j, name in enumerate(panel.assets):
        x = r[:, j]
        std = float(np.std(x, ddof=1)) if x.size > 1 else 0.0
        out.append(AssetSummary(
            asset=name, mean=float(x.mean()), std=std, min=float(x.min()),
            q25=_quantile(x, 0.25), median=_quantile(x, 0.5), q75=_quantile(x, 0.75), max=float(x.max()),
        ))
    return out


def align_panels(a: ReturnPanel, b: ReturnPanel) -> tuple[ReturnPanel, ReturnPanel]:
    """Restrict both panels to their common dates."""
    if a.n_obs == 0 or b.n_obs == 0:
        raise DataError("cannot align an empty panel")
    common = sorted(set(a.dates) & set(b.dates))
    if not common:
        raise DataError("panels share no dates")
    keep = set(common)
    ia = [i for i, d in enumerate(a.dates) if d in keep]
    ib = [i for i, d in enumerate(b.dates) if d in keep]
    return (
        ReturnPanel(tuple(a.dates[i] for i in ia), a.assets, a.returns[ia], a.calendar),
        ReturnPanel(tuple(b.dates[i] for i in ib), b.assets, b.returns[ib], b.calendar),
    )


def returns_from_matrix(matrix, assets: Iterable[str] | None = None, dates=None,
                        calendar=Calendar.TRADING_252) -> ReturnPanel:
    """Wrap a bare T x N array (e.g. simulated scenarios) as a ReturnPanel indexed 0..T-1."""
    m = np.asarray(matrix, dtype=float)
    if m.ndim == 1:
        m = m[:, None]
    assets = tuple(assets) if assets is not None else tuple(f"asset_{i + 1}" for i in range(m.shape[1]))
    dates = tuple(dates) if dates is not None else tuple(range(m.shape[0]))
    return ReturnPanel(dates, assets, m, Calendar.parse(calendar))
