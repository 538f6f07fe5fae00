"""``amvp-lab`` command line.

Every subcommand reads one input, writes into ``--out`` and finishes with a
``manifest.json`` listing the resolved configuration and a SHA-256 digest of
each file it produced. Exit status: 0 ok, 1 configuration, 2 data, 3 numerical.
"""

from __future__ import annotations

import argparse
import datetime as dt
import json
import logging
import math
import sys
import warnings
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from . import __version__, export
from .adaptive import (DEFAULT_ALPHA, DEFAULT_MAX_ITERATIONS, HISTORICAL_EPSILON, SCENARIO_EPSILON,
                       AdaptiveConfig, AdaptiveTrace, amcvarp_run, amvp_run, annualize)
from .analysis import chow_scan, estimate_dv, log_transform, rolling_amrr
from .data import Calendar, ReturnPanel, compute_returns, load_price_panel, returns_from_matrix, summary_stats
from .errors import AmvpLabError, ConfigError, DataError, NumericalError
from .optimize import efficient_frontier, estimate_moments
from .scenarios import build_scenario_panel

logger = logging.getLogger("amvp_lab")

SUBCOMMANDS = ("summary", "frontier", "amvp", "amcvar", "simulate", "amrr", "chow", "lrd", "report")


@dataclass
class RunConfig:
    input: str | None = None
    calendar: str = "252"
    epsilon: float | None = None  # resolved from the input kind when unset
    max_iterations: int = DEFAULT_MAX_ITERATIONS
    alpha: float = DEFAULT_ALPHA
    window: int = 252
    seed: int = 0
    t_len: int = 10_000
    n_paths: int = 1
    out: str = "out"
    n_points: int = 50
    min_segment: int | None = None
    regression: str = "ar1"
    bonferroni: bool = False
    single_shot: bool = False
    log: bool = True

    def validate(self) -> None:
        if not self.input:
            raise ConfigError("--input is required")
        try:
            Calendar.parse(self.calendar)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if self.epsilon is not None and not (self.epsilon > 0 and math.isfinite(self.epsilon)):
            raise ConfigError(f"epsilon must be positive, got {self.epsilon}")
        if not 0 < self.alpha < 1:
            raise ConfigError(f"alpha must lie in (0, 1), got {self.alpha}")
        for name, low in (("max_iterations", 1), ("window", 3), ("t_len", 1), ("n_paths", 1),
                          ("n_points", 2), ("seed", 0)):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, int) or value < low:
                raise ConfigError(f"{name} must be an integer >= {low}, got {value!r}")
        if self.min_segment is not None and (not isinstance(self.min_segment, int) or self.min_segment < 3):
            raise ConfigError(f"min_segment must be an integer >= 3, got {self.min_segment!r}")
        if self.regression not in ("ar1", "const"):
            raise ConfigError(f"regression must be 'ar1' or 'const', got {self.regression!r}")


_FIELD_NAMES = {f.name for f in fields(RunConfig)}
_INT_FIELDS = {"max_iterations", "window", "seed", "t_len", "n_paths", "n_points", "min_segment"}
_FLOAT_FIELDS = {"epsilon", "alpha"}
_BOOL_FIELDS = {"bonferroni", "single_shot", "log"}


def _load_config_file(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc.msg} (line {exc.lineno})") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"config {path} must hold a JSON object")
    unknown = sorted(set(raw) - _FIELD_NAMES)
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
    out = {}
    for key, value in raw.items():
        if key in _INT_FIELDS and value is not None:
            if isinstance(value, bool) or not isinstance(value, int):
                raise ConfigError(f"config key {key} must be an integer")
        elif key in _FLOAT_FIELDS and value is not None:
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigError(f"config key {key} must be a number")
            value = float(value)
        elif key in _BOOL_FIELDS and not isinstance(value, bool):
            raise ConfigError(f"config key {key} must be true or false")
        elif key == "calendar":
            value = str(value)
        out[key] = value
    return out


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="amvp-lab", description="Adaptive minimum-risk portfolios and diagnostics.")
    parser.add_argument("--version", action="version", version=f"amvp-lab {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="SUBCOMMAND", parser_class=_Parser)
    helps = {
        "summary": "per-asset return statistics",
        "frontier": "long-only mean-variance frontier",
        "amvp": "adaptive minimum-variance run",
        "amcvar": "adaptive minimum-CVaR run",
        "simulate": "forward-looking scenario panel",
        "amrr": "rolling adaptive minimum-risk rate",
        "chow": "Chow breakpoint scan of a rate series",
        "lrd": "volatility long-memory estimate of a rate series",
        "report": "per-iteration frontiers and CML for a finished run",
    }
    for name in SUBCOMMANDS:
        p = sub.add_parser(name, help=helps[name], argument_default=argparse.SUPPRESS)
        p.add_argument("--input", help="input CSV (run directory for report)")
        p.add_argument("--calendar", help="annualization calendar: 252 or 365")
        p.add_argument("--epsilon", type=float, help="convergence tolerance on successive risks")
        p.add_argument("--max-iterations", dest="max_iterations", type=int)
        p.add_argument("--alpha", type=float, help="CVaR confidence level")
        p.add_argument("--window", type=int, help="rolling window length")
        p.add_argument("--seed", type=int)
        p.add_argument("--t-len", dest="t_len", type=int, help="simulated periods per path")
        p.add_argument("--n-paths", dest="n_paths", type=int)
        p.add_argument("--n-points", dest="n_points", type=int, help="frontier grid size")
        p.add_argument("--min-segment", dest="min_segment", type=int)
        p.add_argument("--regression", choices=("ar1", "const"))
        p.add_argument("--out", help="output directory")
        p.add_argument("--config", help="JSON file with RunConfig fields")
        p.add_argument("--single-shot", dest="single_shot", action="store_true")
        p.add_argument("--bonferroni", action="store_true")
        p.add_argument("--no-log", dest="log", action="store_false", help="skip the sign-preserving log")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def resolve_config(ns: argparse.Namespace) -> RunConfig:
    """Defaults, then the config file, then explicit flags."""
    merged = {}
    if getattr(ns, "config", None):
        merged.update(_load_config_file(ns.config))
    merged.update({k: v for k, v in vars(ns).items() if k in _FIELD_NAMES})
    cfg = RunConfig(**merged)
    cfg.validate()
    return cfg


# ---------------------------------------------------------------- inputs

def _read_prices(cfg: RunConfig) -> ReturnPanel:
    try:
        with open(cfg.input, encoding="utf-8", newline="") as fh:
            prices = load_price_panel(fh, Calendar.parse(cfg.calendar))
    except OSError as exc:
        raise DataError(f"cannot read {cfg.input}: {exc.strerror}") from None
    return compute_returns(prices)


def _read_scenarios(path: str, calendar) -> ReturnPanel:
    name, _, cols, m = export.read_matrix_csv(Path(path))
    if name != "path":
        raise DataError(f"{path}: scenario files start with a 'path' column")
    if not np.all(np.isfinite(m)):
        raise DataError(f"{path}: scenario values must be finite")
    return returns_from_matrix(m, cols, calendar=calendar)


def _input_kind(path: str) -> str:
    header = export.peek_header(Path(path))
    if not header:
        raise DataError(f"{path} is empty")
    if header[0] == "path":
        return "scenarios"
    if header[0] == "date":
        return "prices"
    raise DataError(f"{path}: first column must be 'date' (prices) or 'path' (scenarios), got {header[0]!r}")


def _read_universe(cfg: RunConfig) -> tuple[ReturnPanel, str]:
    kind = _input_kind(cfg.input)
    if kind == "scenarios":
        return _read_scenarios(cfg.input, Calendar.parse(cfg.calendar)), kind
    return _read_prices(cfg), kind


def _adaptive_config(cfg: RunConfig, kind: str) -> AdaptiveConfig:
    eps = cfg.epsilon if cfg.epsilon is not None else (
        SCENARIO_EPSILON if kind == "scenarios" else HISTORICAL_EPSILON)
    return AdaptiveConfig(eps, cfg.max_iterations, cfg.alpha, Calendar.parse(cfg.calendar).factor)


# ---------------------------------------------------------------- outputs

class _Writer:
    def __init__(self, out: str):
        self.root = Path(out)
        self.written: dict[str, str] = {}

    def text(self, rel: str, content: str) -> None:
        path = self.root / rel
        export.atomic_write(path, content)
        self.written[rel] = export.sha256_file(path)

    def json(self, rel: str, obj) -> None:
        self.text(rel, json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n")

    def manifest(self, command: str, cfg: RunConfig, extra: dict | None = None) -> None:
        doc = {
            "command": command,
            "config": asdict(cfg),
            "seed": cfg.seed,
            "version": __version__,
            "timestamp": dt.datetime.now(dt.timezone.utc).isoformat(timespec="seconds"),
            "files": dict(sorted(self.written.items())),
        }
        if extra:
            doc.update(extra)
        export.atomic_write(self.root / "manifest.json", json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _write_trace(w: _Writer, trace: AdaptiveTrace) -> None:
    w.text("trace.csv", export.trace_csv(trace))
    for rec in trace.records:
        w.text(f"weights/iteration_{rec.iteration:03d}.csv", export.weights_csv(rec.universe, rec.weights))


def _trace_summary(trace: AdaptiveTrace, factor: int) -> dict:
    return {
        "measure": trace.measure,
        "converged": trace.converged,
        "iterations": len(trace.records),
        "synthetic_count": trace.synthetic_count,
        "final_risk": trace.final.risk,
        "final_rate": trace.final.rate,
        "annualized_rate": annualize(trace.final.rate, factor),
        "annualization_factor": factor,
    }


# ---------------------------------------------------------------- subcommands

def cmd_summary(cfg: RunConfig, w: _Writer) -> None:
    w.text("summary.csv", export.summary_csv(summary_stats(_read_prices(cfg))))


def cmd_frontier(cfg: RunConfig, w: _Writer) -> None:
    panel, _ = _read_universe(cfg)
    points = efficient_frontier(estimate_moments(panel.returns), cfg.n_points, panel.assets)
    w.text("frontier.csv", export.frontier_csv(points, panel.assets))


def _adaptive(cfg: RunConfig, w: _Writer, run) -> dict:
    panel, kind = _read_universe(cfg)
    acfg = _adaptive_config(cfg, kind)
    trace = run(panel, acfg)
    index_name = "path" if kind == "scenarios" else "date"
    w.text("returns.csv", export.returns_csv(panel, index_name))
    _write_trace(w, trace)
    result = _trace_summary(trace, acfg.annualization_factor)
    result.update({"input_kind": kind, "epsilon": acfg.epsilon, "alpha": acfg.alpha})
    w.json("result.json", result)
    return {"epsilon": acfg.epsilon}


def cmd_amvp(cfg: RunConfig, w: _Writer) -> dict:
    return _adaptive(cfg, w, amvp_run)


def cmd_amcvar(cfg: RunConfig, w: _Writer) -> dict:
    return _adaptive(cfg, w, amcvarp_run)


def scenarios_csv(returns: np.ndarray, assets, t_len: int) -> str:
    path_ids = np.arange(returns.shape[0]) // t_len
    return export._csv(("path", *assets),
                       ([str(p), *(f"{v:.17g}" for v in row)] for p, row in zip(path_ids, returns)))


def cmd_simulate(cfg: RunConfig, w: _Writer) -> None:
    panel = _read_prices(cfg)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        sset = build_scenario_panel(panel, cfg.t_len, cfg.seed, cfg.n_paths)
    for msg in caught:
        logger.warning("%s", msg.message)
    w.text("scenarios.csv", scenarios_csv(sset.returns, sset.assets, cfg.t_len))
    prov = sset.provenance_dict()
    prov.update({"t_len": cfg.t_len, "n_paths": cfg.n_paths})
    w.json("scenarios.provenance.json", prov)


def cmd_amrr(cfg: RunConfig, w: _Writer) -> dict:
    panel, kind = _read_universe(cfg)
    acfg = _adaptive_config(cfg, kind)
    series = rolling_amrr(panel, cfg.window, acfg, cfg.single_shot,
                          "scenarios" if kind == "scenarios" else "historical")
    w.text("amrr.csv", export.rate_series_csv(series))
    return {"gaps": [[str(d), reason] for d, reason in series.gaps], "epsilon": acfg.epsilon}


def cmd_chow(cfg: RunConfig, w: _Writer) -> dict:
    series = export.read_rate_series(Path(cfg.input))
    results = chow_scan(series, cfg.min_segment, cfg.regression, cfg.bonferroni)
    w.text("chow.csv", export.chow_csv(results))
    if not results:
        return {"max_f": None}
    top = max(results, key=lambda r: r.f_stat)
    return {"max_f": {"date": str(top.breakpoint_date), "f_stat": top.f_stat, "p_value": top.p_value}}


def cmd_lrd(cfg: RunConfig, w: _Writer) -> None:
    series = export.read_rate_series(Path(cfg.input)).dropna()
    x = log_transform(series) if cfg.log else series.values
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        est = estimate_dv(x)
    for msg in caught:
        logger.warning("%s", msg.message)
    w.text("lrd.json", export.lrd_json(Path(cfg.input).stem, est))


def _replay_universe(run_dir: Path, iterations: list[dict]) -> list[ReturnPanel]:
    """Rebuild each iteration's augmented universe from the base returns and the saved weights."""
    _, _, cols, m = export.read_matrix_csv(run_dir / "returns.csv")
    panels = []
    current = returns_from_matrix(m, cols)
    for it in iterations:
        if tuple(it["universe"]) != current.assets:
            raise DataError(f"iteration {it['iteration']}: weights do not match the replayed universe")
        panels.append(current)
        syn = current.returns @ it["weights"]
        current = returns_from_matrix(np.column_stack([current.returns, syn]),
                                      (*current.assets, f"SYN_{it['iteration']}"))
    return panels


def cmd_report(cfg: RunConfig, w: _Writer) -> dict:
    run_dir = Path(cfg.input)
    if not run_dir.is_dir():
        raise DataError(f"{run_dir} is not a run directory")
    iterations = export.read_trace(run_dir)
    panels = _replay_universe(run_dir, iterations)
    final_points = None
    for it, panel in zip(iterations, panels):
        points = efficient_frontier(estimate_moments(panel.returns), cfg.n_points, panel.assets)
        w.text(f"frontiers/frontier_iteration_{it['iteration']:03d}.csv",
               export.frontier_csv(points, panel.assets))
        final_points = points
    anchor = iterations[-1]["rate"]
    slope, line = export.cml_line(final_points, anchor)
    w.text("cml.csv", export.cml_csv(line))
    return {"cml": {"anchor": anchor, "slope": slope}}


_COMMANDS = {
    "summary": cmd_summary, "frontier": cmd_frontier, "amvp": cmd_amvp, "amcvar": cmd_amcvar,
    "simulate": cmd_simulate, "amrr": cmd_amrr, "chow": cmd_chow, "lrd": cmd_lrd, "report": cmd_report,
}


def _exit_code(exc: BaseException) -> int:
    if isinstance(exc, ConfigError):
        return 1
    if isinstance(exc, NumericalError):
        return 3
    return 2


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
        if ns.command is None:
            raise ConfigError("a subcommand is required: " + ", ".join(SUBCOMMANDS))
        logging.basicConfig(level=logging.DEBUG if getattr(ns, "verbose", False) else logging.WARNING,
                            format="amvp-lab: %(levelname)s: %(message)s")
        cfg = resolve_config(ns)
        writer = _Writer(cfg.out)
        extra = _COMMANDS[ns.command](cfg, writer)
        writer.manifest(ns.command, cfg, extra or None)
    except (AmvpLabError, ValueError, OSError) as exc:
        print(f"amvp-lab: error: {_one_line(exc)}", file=sys.stderr)
        return _exit_code(exc)
    return 0


def _one_line(exc: BaseException) -> str:
    return " ".join(str(exc).split()) or type(exc).__name__


if __name__ == "__main__":
    sys.exit(main())
