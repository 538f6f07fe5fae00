"""File formats for every artifact the CLI writes, plus readers for the ones it consumes."""

from __future__ import annotations

import csv
import datetime as dt
import hashlib
import io
import json
import math
import os
import tempfile
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .adaptive import AdaptiveTrace
from .analysis import ChowResult, LrdEstimate, RateSeries
from .data import AssetSummary, ReturnPanel
from .errors import DataError
from .optimize import FrontierPoint


def fmt(x: float, digits: int) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    return f"{float(x):.{digits}g}"


def exact(x: float) -> str:
    """Round-trippable float text."""
    return "" if math.isnan(x) else repr(float(x))


def _date_text(d) -> str:
    return d.isoformat() if isinstance(d, (dt.date, dt.datetime)) else str(d)


def _csv(header: Sequence[str], rows: Iterable[Sequence[str]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def sha256_file(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def summary_csv(summaries: Sequence[AssetSummary]) -> str:
    cols = ("mean", "std", "min", "q25", "median", "q75", "max")
    return _csv(("asset", *cols), ([s.asset, *(fmt(getattr(s, c), 6) for c in cols)] for s in summaries))


def frontier_csv(points: Sequence[FrontierPoint], universe: Sequence[str]) -> str:
    header = ["target_return", "risk", "feasible", *(f"w_{a}" for a in universe)]
    rows = []
    for p in points:
        w = p.weights.weights if (p.feasible and p.weights is not None) else [math.nan] * len(universe)
        rows.append([fmt(p.target_return, 8), fmt(p.risk, 8) if p.feasible else "",
                     "true" if p.feasible else "false", *(fmt(v, 8) for v in w)])
    return _csv(header, rows)


def cml_line(points: Sequence[FrontierPoint], anchor: float, n: int = 50) -> tuple[float, np.ndarray]:
    """Slope and ``(risk, return)`` samples of the line from ``(0, anchor)`` tangent to the frontier."""
    feasible = [p for p in points if p.feasible and p.risk > 0]
    slope = max(((p.target_return - anchor) / p.risk for p in feasible), default=0.0)
    top = max((p.risk for p in feasible), default=0.0)
    risk = np.linspace(0.0, top, n)
    return slope, np.column_stack([risk, anchor + slope * risk])


def cml_csv(line: np.ndarray) -> str:
    return _csv(("risk", "expected_return"), ([fmt(r, 10), fmt(v, 10)] for r, v in line))


def returns_csv(panel: ReturnPanel, index_name: str = "date") -> str:
    return _csv((index_name, *panel.assets),
                ([_date_text(d), *(exact(v) for v in row)] for d, row in zip(panel.dates, panel.returns)))


def read_matrix_csv(path: Path) -> tuple[str, list[str], list[str], np.ndarray]:
    """Read ``<index>,<col>...`` text; returns ``(index_name, index, columns, matrix)``."""
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from exc
    if len(rows) < 2 or len(rows[0]) < 2:
        raise DataError(f"{path}: expected a header and at least one data row")
    header = [h.strip() for h in rows[0]]
    index, values = [], []
    for line_no, rec in enumerate(rows[1:], start=2):
        if not rec:
            continue
        if len(rec) != len(header):
            raise DataError(f"{path}: row {line_no} has {len(rec)} fields, expected {len(header)}")
        index.append(rec[0].strip())
        try:
            values.append([float(c) if c.strip() else math.nan for c in rec[1:]])
        except ValueError as exc:
            raise DataError(f"{path}: row {line_no}: {exc}") from None
    return header[0], index, header[1:], np.array(values, dtype=float)


def peek_header(path: Path) -> list[str]:
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            return [h.strip() for h in next(csv.reader(fh), [])]
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from exc


def trace_csv(trace: AdaptiveTrace) -> str:
    return _csv(("iteration", "universe_size", "risk", "rate", "ridge_applied"),
                ([str(r.iteration), str(r.universe_size), exact(r.risk), exact(r.rate),
                  "true" if r.ridge_applied else "false"] for r in trace.records))


def weights_csv(universe: Sequence[str], weights: np.ndarray) -> str:
    return _csv(("asset", "weight"), ([a, exact(w)] for a, w in zip(universe, weights)))


def read_trace(run_dir: Path) -> list[dict]:
    path = Path(run_dir) / "trace.csv"
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        raise DataError(f"missing run artifact {path}") from exc
    out = []
    for r in rows:
        k = int(r["iteration"])
        wpath = Path(run_dir) / "weights" / f"iteration_{k:03d}.csv"
        try:
            with open(wpath, newline="", encoding="utf-8") as fh:
                wrows = list(csv.DictReader(fh))
        except OSError as exc:
            raise DataError(f"missing run artifact {wpath}") from exc
        out.append({
            "iteration": k,
            "universe_size": int(r["universe_size"]),
            "risk": float(r["risk"]),
            "rate": float(r["rate"]),
            "universe": [w["asset"] for w in wrows],
            "weights": np.array([float(w["weight"]) for w in wrows]),
        })
    if not out:
        raise DataError(f"{path} holds no iterations")
    return out


def rate_series_csv(series: RateSeries) -> str:
    return _csv(("date", "amrr"), ([_date_text(d), exact(v)] for d, v in zip(series.dates, series.values)))


def read_rate_series(path: Path) -> RateSeries:
    name, index, cols, m = read_matrix_csv(path)
    if name != "date" or cols != ["amrr"]:
        raise DataError(f"{path}: expected columns date,amrr")
    dates = []
    for d in index:
        try:
            dates.append(dt.date.fromisoformat(d))
        except ValueError:
            dates.append(int(d)) if d.lstrip("-").isdigit() else dates.append(d)
    return RateSeries(tuple(dates), m[:, 0], window=0, source="file")


def chow_csv(results: Sequence[ChowResult]) -> str:
    return _csv(("date", "f_stat", "p_value"),
                ([_date_text(r.breakpoint_date), exact(r.f_stat), exact(r.p_value)] for r in results))


def lrd_json(series_name: str, est: LrdEstimate) -> str:
    return json.dumps({"series": series_name, "d_v": est.d_v, "hurst": est.hurst, "method": est.method,
                       "boundary": est.boundary}, indent=2) + "\n"
