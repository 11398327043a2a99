"""Command-line front end.

    lossq <mode> [--config PATH] [--preset NAME] [--out PATH] [--format csv|json] [--seed N]

Modes: ``analyze`` (bounds, approximation, utilization), ``simulate``,
``compare`` (both, plus error columns) and ``sweep`` (analysis plus state
ratios and the arrival-count pmf).  Exit status is 0 on success, 1 for an
invalid config and 2 when every row failed.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import math
import sys
from pathlib import Path
from typing import Any

import yaml

from lossq import blocking
from lossq.config import (
    MODES,
    PRESETS,
    ConfigError,
    ExperimentConfig,
    Point,
    config_to_dict,
    deep_merge,
    expand_points,
    parse_config,
    preset,
)
from lossq.counts import arrival_counts
from lossq.dist import Deterministic, Discrete, Exponential, mean_rate, mean_service, thinned_process
from lossq.errors import InfeasibleAnalysisError, UnsupportedAnalysisError
from lossq.reference import erlang_b
from lossq.sim import SimConfig, run
from lossq.timing import state_analysis

PARAM_COLUMNS = ["label", "n", "lambda", "tau", "p_o", "rho"]
ANALYSIS_COLUMNS = ["p_lower", "p_approx", "p_upper", "p_raw", "erlang_b", "eta", "zeta"]
SIM_COLUMNS = ["p_b_hat", "ci", "busy_fraction", "busy_ci", "offered", "received", "blocked",
               "state_time"]

COLUMNS = {
    "analyze": PARAM_COLUMNS + ANALYSIS_COLUMNS + ["error"],
    "simulate": PARAM_COLUMNS + SIM_COLUMNS + ["error"],
    "compare": PARAM_COLUMNS + ANALYSIS_COLUMNS + SIM_COLUMNS
               + ["abs_err_approx", "abs_err_erlang", "error"],
    "sweep": PARAM_COLUMNS + ANALYSIS_COLUMNS + ["q0", "q1", "counts", "error"],
}

EXIT_OK, EXIT_CONFIG, EXIT_INFEASIBLE = 0, 1, 2


def _params(point: Point) -> dict:
    q = point.queue
    lam = mean_rate(q.arrivals)
    tau = mean_service(q.service)
    return {"label": point.label, "n": q.n, "lambda": lam, "tau": tau, "p_o": q.p_o, "rho": lam * tau}


def _prior_for(cfg: ExperimentConfig, point: Point) -> str:
    if cfg.options.prior != "auto":
        return cfg.options.prior
    q = point.queue
    return "degenerate-n1" if isinstance(q.arrivals, Discrete) and q.n == 1 else "general"


def analyze_point(cfg: ExperimentConfig, point: Point, with_counts: bool = False) -> dict:
    q = point.queue
    counts = arrival_counts(q, cfg.options.eps_tail)
    prior = _prior_for(cfg, point)
    if cfg.options.max_iters > 1:
        report = blocking.iterate_prior(counts, q.n, cfg.options.demod_model,
                                        max_iters=cfg.options.max_iters, prior=prior)
    else:
        report = blocking.approximate_blocking(counts, q.n, prior, cfg.options.demod_model)
    row: dict[str, Any] = {
        "p_lower": report.p_lower,
        "p_approx": report.p_approx,
        "p_upper": report.p_upper,
        "p_raw": report.p_raw,
        "erlang_b": erlang_b(q.n, q.received_load()) if isinstance(q.arrivals, Exponential) else None,
    }
    if q.n == 1 and isinstance(q.service, Deterministic) and q.p_o < 1:
        ratios = state_analysis(thinned_process(q.arrivals, q.p_o), q.service.tau, report.p_approx)
        row.update(eta=ratios.eta, zeta=ratios.zeta, q0=ratios.q0, q1=ratios.q1)
    if with_counts:
        row["counts"] = list(counts.probs)
    return row


def simulate_point(cfg: ExperimentConfig, point: Point, workers: int = 1) -> dict:
    s = cfg.sim
    res = run(SimConfig(point.queue, s.horizon, s.warmup, s.seed, s.replications), workers=workers)
    return {
        "p_b_hat": res.p_b_hat,
        "ci": res.p_b_ci,
        "busy_fraction": res.busy_fraction,
        "busy_ci": res.busy_ci,
        "offered": res.offered,
        "received": res.received,
        "blocked": res.blocked,
        "state_time": list(res.state_time),
    }


def compute_rows(cfg: ExperimentConfig, workers: int = 1) -> tuple[list[dict], int]:
    """Rows for every parameter point, plus the number of rows that failed."""
    rows, failures = [], 0
    for point in expand_points(cfg):
        row = _params(point)
        try:
            if cfg.mode in ("analyze", "compare", "sweep"):
                row.update(analyze_point(cfg, point, with_counts=cfg.mode == "sweep"))
            if cfg.mode in ("simulate", "compare"):
                row.update(simulate_point(cfg, point, workers))
            if cfg.mode == "compare":
                row["abs_err_approx"] = abs(row["p_approx"] - row["p_b_hat"])
                if row.get("erlang_b") is not None:
                    row["abs_err_erlang"] = abs(row["erlang_b"] - row["p_b_hat"])
        except (InfeasibleAnalysisError, UnsupportedAnalysisError) as exc:
            row["error"] = f"{type(exc).__name__}: {exc}"
            failures += 1
        rows.append({col: row.get(col) for col in COLUMNS[cfg.mode]})
    return rows, failures


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return f"{value:.9g}"
    if isinstance(value, list):
        return ";".join(_fmt(v) for v in value)
    return str(value)


def _json_value(value):
    if isinstance(value, float):
        return None if not math.isfinite(value) else float(f"{value:.9g}")
    if isinstance(value, list):
        return [_json_value(v) for v in value]
    return value


def render(cfg: ExperimentConfig, rows: list[dict], fmt: str) -> str:
    columns = COLUMNS[cfg.mode]
    if fmt == "json":
        meta = {"config": config_to_dict(cfg), "columns": columns}
        doc = {"meta": meta, "rows": [{c: _json_value(r[c]) for c in columns} for r in rows]}
        return json.dumps(doc, indent=2, allow_nan=False) + "\n"
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for r in rows:
        writer.writerow([_fmt(r[c]) for c in columns])
    return buf.getvalue()


def run_experiment(cfg: ExperimentConfig, out: str | None = None, fmt: str | None = None,
                   workers: int = 1) -> int:
    """Compute all rows and write them; returns the process exit status."""
    fmt = fmt or cfg.output.format
    path = out or cfg.output.path
    rows, failures = compute_rows(cfg, workers)
    text = render(cfg, rows, fmt)
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")
    if rows and failures == len(rows):
        print(f"lossq: all {failures} rows were infeasible", file=sys.stderr)
        return EXIT_INFEASIBLE
    return EXIT_OK


def load_config(mode: str, config_path: str | None, preset_name: str | None,
                seed: int | None = None) -> ExperimentConfig:
    doc: dict = {}
    if preset_name is not None:
        doc = preset(preset_name)
    if config_path is not None:
        try:
            text = Path(config_path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError([f"config: cannot read {config_path} ({exc.strerror})"]) from exc
        try:
            loaded = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ConfigError([f"config: not valid JSON/YAML ({exc})"]) from exc
        if loaded is None:
            loaded = {}
        if not isinstance(loaded, dict):
            raise ConfigError(["config: expected a mapping at the top level"])
        doc = deep_merge(doc, loaded)
    doc["mode"] = mode
    if seed is not None:
        doc["sim"] = {**(doc.get("sim") or {}), "seed": seed}
    return parse_config(doc)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lossq",
        description="Blocking probabilities of loss queues with deterministic or binned service.")
    parser.add_argument("mode", choices=MODES)
    parser.add_argument("--config", help="JSON or YAML experiment config")
    parser.add_argument("--preset", choices=sorted(PRESETS), help="built-in experiment")
    parser.add_argument("--out", help="output path (default: config output.path, else stdout)")
    parser.add_argument("--format", choices=("csv", "json"))
    parser.add_argument("--seed", type=int, help="override sim.seed")
    parser.add_argument("--workers", type=int, default=1,
                        help="processes for simulation replications")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.config is None and args.preset is None:
        print("lossq: need --config and/or --preset", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = load_config(args.mode, args.config, args.preset, args.seed)
    except ConfigError as exc:
        for err in exc.errors:
            print(f"lossq: {err}", file=sys.stderr)
        return EXIT_CONFIG
    if args.format is not None:
        cfg = dataclasses.replace(cfg, output=dataclasses.replace(cfg.output, format=args.format))
    return run_experiment(cfg, args.out, workers=args.workers)


if __name__ == "__main__":
    sys.exit(main())
