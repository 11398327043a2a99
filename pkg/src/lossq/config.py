"""Experiment configuration: parsing, validation, presets and point expansion.

A config is a JSON/YAML document.  Numbers may be written as fractions in
strings (``"1/3"``) so that probabilities sum to one exactly.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any

import numpy as np
import yaml

from lossq.counts import DEFAULT_EPS_TAIL, bin_service_distribution
from lossq.dist import (
    Binned,
    Classes,
    Deterministic,
    Discrete,
    Exponential,
    QueueSpec,
    mean_service,
    scale_service,
    with_rate,
)

MODES = ("analyze", "simulate", "compare", "sweep")
SWEEP_PARAMETERS = ("tau", "lambda", "rho", "n", "p_o")
FORMATS = ("csv", "json")
DEMOD_MODELS = ("clipped", "full")
PRIORS = ("auto", "general", "degenerate-n1")


class ConfigError(ValueError):
    """Invalid configuration; ``errors`` lists every problem found."""

    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("\n".join(self.errors))


@dataclass(frozen=True)
class Series:
    label: str | None = None
    n: int | None = None
    p_o: float | None = None
    lam: float | None = None
    tau: float | None = None
    rho: float | None = None
    arrivals: Exponential | Discrete | None = None
    service: Deterministic | Classes | Binned | None = None


@dataclass(frozen=True)
class Sweep:
    parameter: str
    values: tuple[float, ...]
    series: tuple[Series, ...] = ()


@dataclass(frozen=True)
class SimSettings:
    horizon: int = 100_000
    warmup: int | None = None
    seed: int = 20190101
    replications: int = 10


@dataclass(frozen=True)
class OutputSpec:
    path: str | None = None
    format: str = "csv"


@dataclass(frozen=True)
class Options:
    demod_model: str = "clipped"
    prior: str = "auto"
    eps_tail: float = DEFAULT_EPS_TAIL
    max_iters: int = 1


@dataclass(frozen=True)
class ExperimentConfig:
    mode: str
    queue: QueueSpec
    sweep: Sweep | None = None
    sim: SimSettings = field(default_factory=SimSettings)
    output: OutputSpec = field(default_factory=OutputSpec)
    options: Options = field(default_factory=Options)
    description: str = ""


@dataclass(frozen=True)
class Point:
    label: str
    queue: QueueSpec


# ---------------------------------------------------------------------------
# parsing


_MISSING = object()


def _join(path: str, key: str) -> str:
    return f"{path}.{key}" if path else key


class _Parser:
    def __init__(self):
        self.errors: list[str] = []

    def fail(self, path: str, msg: str):
        self.errors.append(f"{path}: {msg}")
        return None

    def mapping(self, obj, path: str, allowed: tuple[str, ...]) -> dict | None:
        if not isinstance(obj, dict):
            return self.fail(path or "config", f"expected a mapping, got {type(obj).__name__}")
        for key in obj:
            if key not in allowed:
                self.fail(_join(path, key), f"unknown field (allowed: {', '.join(allowed)})")
        return obj

    def number(self, obj: dict, key: str, path: str, default=_MISSING, lo=None, hi=None,
               lo_open=False, integer=False):
        p = _join(path, key)
        if key not in obj or obj[key] is None:
            if default is _MISSING:
                return self.fail(p, "required field missing")
            return default
        return self.value(obj[key], p, lo=lo, hi=hi, lo_open=lo_open, integer=integer)

    def value(self, raw, p: str, lo=None, hi=None, lo_open=False, integer=False):
        if isinstance(raw, bool):
            return self.fail(p, "expected a number, got a boolean")
        if isinstance(raw, str):
            try:
                raw = float(Fraction(raw.strip()))
            except (ValueError, ZeroDivisionError):
                return self.fail(p, f"cannot parse {raw!r} as a number")
        if not isinstance(raw, (int, float)):
            return self.fail(p, f"expected a number, got {type(raw).__name__}")
        if not math.isfinite(raw):
            return self.fail(p, "must be finite")
        if integer:
            if int(raw) != raw:
                return self.fail(p, f"expected an integer, got {raw!r}")
            raw = int(raw)
        rng = f"[{lo if lo is not None else '-inf'}, {hi if hi is not None else 'inf'}]"
        if lo_open:
            rng = "(" + rng[1:]
        if lo is not None and (raw < lo or (lo_open and raw == lo)):
            return self.fail(p, f"value {raw!r} outside range {rng}")
        if hi is not None and raw > hi:
            return self.fail(p, f"value {raw!r} outside range {rng}")
        return raw

    def choice(self, obj: dict, key: str, path: str, choices: tuple[str, ...], default=_MISSING):
        p = _join(path, key)
        if key not in obj or obj[key] is None:
            if default is _MISSING:
                return self.fail(p, "required field missing")
            return default
        if obj[key] not in choices:
            return self.fail(p, f"{obj[key]!r} is not one of {', '.join(choices)}")
        return obj[key]

    def pairs(self, raw, p: str) -> list[tuple[float, float]] | None:
        if not isinstance(raw, list) or not raw:
            return self.fail(p, "expected a non-empty list of [a, b] pairs")
        out, ok = [], True
        for i, item in enumerate(raw):
            if not isinstance(item, (list, tuple)) or len(item) != 2:
                self.fail(f"{p}[{i}]", "expected a pair [a, b]")
                ok = False
                continue
            a = self.value(item[0], f"{p}[{i}][0]")
            b = self.value(item[1], f"{p}[{i}][1]")
            if a is None or b is None:
                ok = False
            out.append((a, b))
        return out if ok else None

    def build(self, p: str, factory, *args):
        try:
            return factory(*args)
        except ValueError as exc:
            return self.fail(p, str(exc))

    # -- domain objects -----------------------------------------------------

    def arrivals(self, raw, p: str):
        obj = self.mapping(raw, p, ("kind", "rate", "atoms"))
        if obj is None:
            return None
        kind = self.choice(obj, "kind", p, ("exponential", "discrete"))
        if kind == "exponential":
            rate = self.number(obj, "rate", p, lo=0, lo_open=True)
            return None if rate is None else Exponential(rate)
        if kind == "discrete":
            atoms = self.pairs(obj.get("atoms"), f"{p}.atoms")
            if atoms is None:
                return None
            before = len(self.errors)
            for i, (t, prob) in enumerate(atoms):
                if t <= 0:
                    self.fail(f"{p}.atoms[{i}][0]", "inter-arrival time must be positive")
                if prob < 0:
                    self.fail(f"{p}.atoms[{i}][1]", "probability must be nonnegative")
            if len(self.errors) != before:
                return None
            total = math.fsum(prob for _, prob in atoms)
            if abs(total - 1.0) > 1e-12:
                return self.fail(f"{p}.atoms", f"probabilities must sum to 1 (normalization), got {total!r}")
            return self.build(f"{p}.atoms", Discrete, atoms)
        return None

    def service(self, raw, p: str):
        obj = self.mapping(raw, p, ("kind", "tau", "entries", "bins", "samples"))
        if obj is None:
            return None
        kind = self.choice(obj, "kind", p, ("deterministic", "classes", "binned", "cdf"))
        if kind == "deterministic":
            tau = self.number(obj, "tau", p, lo=0, lo_open=True)
            return None if tau is None else Deterministic(tau)
        if kind == "classes":
            entries = self.pairs(obj.get("entries"), f"{p}.entries")
            return None if entries is None else self.build(f"{p}.entries", Classes, entries)
        if kind == "binned":
            bins = self.pairs(obj.get("bins"), f"{p}.bins")
            if bins is None:
                return None
            total = math.fsum(prob for _, prob in bins)
            if abs(total - 1.0) > 1e-12:
                return self.fail(f"{p}.bins", f"probabilities must sum to 1 (normalization), got {total!r}")
            return self.build(f"{p}.bins", Binned, bins)
        if kind == "cdf":
            samples = self.pairs(obj.get("samples"), f"{p}.samples")
            nbins = self.number(obj, "bins", p, integer=True, lo=1)
            if samples is None or nbins is None:
                return None
            return self.build(f"{p}.samples", bin_service_distribution, samples, nbins)
        return None

    def queue(self, raw, p: str):
        obj = self.mapping(raw, p, ("n", "arrivals", "service", "p_o"))
        if obj is None:
            return None
        n = self.number(obj, "n", p, integer=True, lo=1)
        p_o = self.number(obj, "p_o", p, default=0.0, lo=0.0, hi=1.0)
        arrivals = self.arrivals(obj.get("arrivals"), f"{p}.arrivals") if "arrivals" in obj \
            else self.fail(f"{p}.arrivals", "required field missing")
        service = self.service(obj.get("service"), f"{p}.service") if "service" in obj \
            else self.fail(f"{p}.service", "required field missing")
        if None in (n, p_o, arrivals, service):
            return None
        return QueueSpec(n=n, arrivals=arrivals, service=service, p_o=p_o)

    def sweep_value(self, raw, p: str, parameter: str):
        if parameter == "n":
            return self.value(raw, p, integer=True, lo=1)
        if parameter == "p_o":
            return self.value(raw, p, lo=0.0, hi=1.0)
        return self.value(raw, p, lo=0.0, lo_open=True)

    def series(self, raw, p: str) -> Series | None:
        obj = self.mapping(raw, p, ("label", "n", "p_o", "lambda", "tau", "rho", "arrivals", "service"))
        if obj is None:
            return None
        before = len(self.errors)
        label = obj.get("label")
        if label is not None and not isinstance(label, str):
            self.fail(f"{p}.label", "expected a string")
        s = Series(
            label=label,
            n=self.number(obj, "n", p, default=None, integer=True, lo=1),
            p_o=self.number(obj, "p_o", p, default=None, lo=0.0, hi=1.0),
            lam=self.number(obj, "lambda", p, default=None, lo=0.0, lo_open=True),
            tau=self.number(obj, "tau", p, default=None, lo=0.0, lo_open=True),
            rho=self.number(obj, "rho", p, default=None, lo=0.0, lo_open=True),
            arrivals=self.arrivals(obj["arrivals"], f"{p}.arrivals") if "arrivals" in obj else None,
            service=self.service(obj["service"], f"{p}.service") if "service" in obj else None,
        )
        return s if len(self.errors) == before else None

    def sweep(self, raw, p: str) -> Sweep | None:
        obj = self.mapping(raw, p, ("parameter", "values", "start", "stop", "step", "series"))
        if obj is None:
            return None
        before = len(self.errors)
        parameter = self.choice(obj, "parameter", p, SWEEP_PARAMETERS)
        values: list = []
        if "values" in obj:
            if any(k in obj for k in ("start", "stop", "step")):
                self.fail(p, "give either values or start/stop/step, not both")
            if not isinstance(obj["values"], list):
                self.fail(f"{p}.values", "expected a list")
            elif parameter is not None:
                values = [self.sweep_value(v, f"{p}.values[{i}]", parameter)
                          for i, v in enumerate(obj["values"])]
        elif any(k in obj for k in ("start", "stop", "step")):
            start = self.number(obj, "start", p)
            stop = self.number(obj, "stop", p)
            step = self.number(obj, "step", p, lo=0.0, lo_open=True)
            if None not in (start, stop, step) and parameter is not None:
                values = [self.sweep_value(float(v), f"{p}.start", parameter)
                          for v in sweep_grid(start, stop, step)]
        else:
            self.fail(p, "needs values or start/stop/step")
        series = []
        if "series" in obj:
            if not isinstance(obj["series"], list):
                self.fail(f"{p}.series", "expected a list")
            else:
                series = [self.series(s, f"{p}.series[{i}]") for i, s in enumerate(obj["series"])]
        if len(self.errors) != before:
            return None
        return Sweep(parameter, tuple(values), tuple(series))


def parse_config(doc: Any) -> ExperimentConfig:
    """Validate a loaded config document, raising :class:`ConfigError` with
    every problem found."""
    ps = _Parser()
    obj = ps.mapping(doc, "", ("mode", "queue", "sweep", "sim", "output", "options", "description"))
    if obj is None:
        raise ConfigError(ps.errors)

    mode = ps.choice(obj, "mode", "", MODES, default="analyze")
    queue = ps.queue(obj["queue"], "queue") if "queue" in obj else ps.fail("queue", "required field missing")
    sweep = ps.sweep(obj["sweep"], "sweep") if obj.get("sweep") is not None else None

    sim = SimSettings()
    if obj.get("sim") is not None:
        s = ps.mapping(obj["sim"], "sim", ("horizon", "warmup", "seed", "replications"))
        if s is not None:
            horizon = ps.number(s, "horizon", "sim", default=sim.horizon, integer=True, lo=1)
            warmup = ps.number(s, "warmup", "sim", default=None, integer=True, lo=0)
            seed = ps.number(s, "seed", "sim", default=sim.seed, integer=True, lo=0)
            reps = ps.number(s, "replications", "sim", default=sim.replications, integer=True, lo=1)
            if horizon is not None and warmup is not None and warmup >= horizon:
                ps.fail("sim.warmup", f"must be smaller than sim.horizon ({horizon})")
            sim = SimSettings(horizon or sim.horizon, warmup, seed if seed is not None else sim.seed,
                              reps or sim.replications)

    output = OutputSpec()
    if obj.get("output") is not None:
        o = ps.mapping(obj["output"], "output", ("path", "format"))
        if o is not None:
            path = o.get("path")
            if path is not None and not isinstance(path, str):
                ps.fail("output.path", "expected a string")
            output = OutputSpec(path, ps.choice(o, "format", "output", FORMATS, default="csv"))

    options = Options()
    if obj.get("options") is not None:
        o = ps.mapping(obj["options"], "options", ("demod_model", "prior", "eps_tail", "max_iters"))
        if o is not None:
            options = Options(
                demod_model=ps.choice(o, "demod_model", "options", DEMOD_MODELS, default="clipped"),
                prior=ps.choice(o, "prior", "options", PRIORS, default="auto"),
                eps_tail=ps.number(o, "eps_tail", "options", default=DEFAULT_EPS_TAIL, lo=0.0, hi=1.0,
                                   lo_open=True),
                max_iters=ps.number(o, "max_iters", "options", default=1, integer=True, lo=1),
            )

    description = obj.get("description", "")
    if not isinstance(description, str):
        ps.fail("description", "expected a string")

    if ps.errors:
        raise ConfigError(ps.errors)
    return ExperimentConfig(mode, queue, sweep, sim, output, options, description)


def validate_config(text: str) -> ExperimentConfig:
    """Parse a JSON or YAML config document."""
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError([f"config: not valid JSON/YAML ({exc})"]) from exc
    return parse_config(doc)


# ---------------------------------------------------------------------------
# emitting


def _arrivals_dict(a) -> dict:
    if isinstance(a, Exponential):
        return {"kind": "exponential", "rate": a.rate}
    return {"kind": "discrete", "atoms": [[t, p] for t, p in a.atoms]}


def _service_dict(s) -> dict:
    if isinstance(s, Deterministic):
        return {"kind": "deterministic", "tau": s.tau}
    if isinstance(s, Classes):
        return {"kind": "classes", "entries": [[lam, tau] for lam, tau in s.entries]}
    return {"kind": "binned", "bins": [[tau, p] for tau, p in s.bins]}


def _series_dict(s: Series) -> dict:
    out: dict = {}
    for key, attr in (("label", "label"), ("n", "n"), ("p_o", "p_o"), ("lambda", "lam"),
                      ("tau", "tau"), ("rho", "rho")):
        if getattr(s, attr) is not None:
            out[key] = getattr(s, attr)
    if s.arrivals is not None:
        out["arrivals"] = _arrivals_dict(s.arrivals)
    if s.service is not None:
        out["service"] = _service_dict(s.service)
    return out


def config_to_dict(cfg: ExperimentConfig) -> dict:
    """Resolved config as a plain document; parsing it yields an equivalent config."""
    q = cfg.queue
    doc: dict = {
        "mode": cfg.mode,
        "queue": {"n": q.n, "arrivals": _arrivals_dict(q.arrivals),
                  "service": _service_dict(q.service), "p_o": q.p_o},
        "sweep": None,
        "sim": {"horizon": cfg.sim.horizon, "warmup": cfg.sim.warmup, "seed": cfg.sim.seed,
                "replications": cfg.sim.replications},
        "output": {"path": cfg.output.path, "format": cfg.output.format},
        "options": {"demod_model": cfg.options.demod_model, "prior": cfg.options.prior,
                    "eps_tail": cfg.options.eps_tail, "max_iters": cfg.options.max_iters},
        "description": cfg.description,
    }
    if cfg.sweep is not None:
        doc["sweep"] = {"parameter": cfg.sweep.parameter, "values": list(cfg.sweep.values),
                        "series": [_series_dict(s) for s in cfg.sweep.series]}
    return doc


# ---------------------------------------------------------------------------
# points


def _set_param(q: QueueSpec, parameter: str, value: float) -> QueueSpec:
    if parameter == "n":
        return QueueSpec(int(value), q.arrivals, q.service, q.p_o)
    if parameter == "p_o":
        return QueueSpec(q.n, q.arrivals, q.service, value)
    if parameter == "tau":
        return QueueSpec(q.n, q.arrivals, scale_service(q.service, value / mean_service(q.service)), q.p_o)
    if parameter == "lambda":
        return QueueSpec(q.n, with_rate(q.arrivals, value), q.service, q.p_o)
    if parameter == "rho":
        return QueueSpec(q.n, with_rate(q.arrivals, value / mean_service(q.service)), q.service, q.p_o)
    raise ValueError(f"unknown sweep parameter {parameter!r}")


def apply_series(q: QueueSpec, s: Series) -> QueueSpec:
    if s.arrivals is not None:
        q = QueueSpec(q.n, s.arrivals, q.service, q.p_o)
    if s.service is not None:
        q = QueueSpec(q.n, q.arrivals, s.service, q.p_o)
    for parameter, value in (("n", s.n), ("p_o", s.p_o), ("tau", s.tau), ("lambda", s.lam),
                             ("rho", s.rho)):
        if value is not None:
            q = _set_param(q, parameter, value)
    return q


def expand_points(cfg: ExperimentConfig) -> list[Point]:
    """Parameter points in output order: series first, then sweep values."""
    if cfg.sweep is None:
        return [Point("", cfg.queue)]
    series = cfg.sweep.series or (Series(),)
    points = []
    for s in series:
        base = apply_series(cfg.queue, s)
        for v in cfg.sweep.values:
            points.append(Point(s.label or "", _set_param(base, cfg.sweep.parameter, v)))
    return points


# ---------------------------------------------------------------------------
# presets

_DEGENERATE = {"kind": "discrete", "atoms": [[0.3, "1/3"], [0.6, "1/3"], [1.5, "1/3"]]}
_MARKOV = {"kind": "exponential", "rate": 1.0}
_UNIT_SERVICE = {"kind": "deterministic", "tau": 1.0}
_TABLE1 = [
    {"label": "ID1", "n": 1, "p_o": 0.0},
    {"label": "ID2", "n": 2, "p_o": 0.0},
    {"label": "ID3", "n": 1, "p_o": 0.5},
    {"label": "ID4", "n": 2, "p_o": 0.5},
]
_FIG_SIM = {"horizon": 20_000, "replications": 5}

PRESETS: dict[str, dict] = {
    "fig2": {
        "description": "M/D/n/n bounds and approximation against offered load, n in {1,2,4,8}, "
                       "outage 0 and 0.5",
        "mode": "compare",
        "queue": {"n": 1, "arrivals": _MARKOV, "service": _UNIT_SERVICE, "p_o": 0.0},
        "sweep": {"parameter": "rho", "start": 0.1, "stop": 3.0, "step": 0.1,
                  "series": [{"label": f"n={n},p_o={p}", "n": n, "p_o": p}
                             for p in (0.0, 0.5) for n in (1, 2, 4, 8)]},
        "sim": _FIG_SIM,
    },
    "fig3": {
        "description": "M/D/1/1 state ratios and utilization against offered load",
        "mode": "sweep",
        "queue": {"n": 1, "arrivals": _MARKOV, "service": _UNIT_SERVICE, "p_o": 0.0},
        "sweep": {"parameter": "rho", "start": 0.1, "stop": 5.0, "step": 0.1},
        "sim": _FIG_SIM,
    },
    "fig4": {
        "description": "D/D/n/n arrival-count probabilities against service time, Table 1 configurations",
        "mode": "sweep",
        "queue": {"n": 1, "arrivals": _DEGENERATE, "service": _UNIT_SERVICE, "p_o": 0.0},
        "sweep": {"parameter": "tau", "start": 0.05, "stop": 3.0, "step": 0.01, "series": _TABLE1},
        "sim": _FIG_SIM,
    },
    "fig5": {
        "description": "D/D/n/n blocking probability against service time, Table 1 configurations",
        "mode": "analyze",
        "queue": {"n": 1, "arrivals": _DEGENERATE, "service": _UNIT_SERVICE, "p_o": 0.0},
        "sweep": {"parameter": "tau", "start": 0.05, "stop": 3.0, "step": 0.01, "series": _TABLE1},
        "sim": _FIG_SIM,
    },
    "fig6": {
        "description": "D/D/1/1 state ratios and utilization against service time (ID1)",
        "mode": "sweep",
        "queue": {"n": 1, "arrivals": _DEGENERATE, "service": _UNIT_SERVICE, "p_o": 0.0},
        "sweep": {"parameter": "tau", "start": 0.05, "stop": 3.0, "step": 0.01},
        "sim": _FIG_SIM,
    },
    "fig7": {
        "description": "Two-class service (tau 2/3 and 4/3, equal probability) with Markovian "
                       "and degenerate arrivals against offered load",
        "mode": "compare",
        "queue": {"n": 1, "arrivals": _MARKOV,
                  "service": {"kind": "binned", "bins": [["2/3", "1/2"], ["4/3", "1/2"]]},
                  "p_o": 0.0},
        "sweep": {"parameter": "rho", "start": 0.1, "stop": 2.0, "step": 0.1,
                  "series": [{"label": "M n=1", "n": 1, "arrivals": _MARKOV},
                             {"label": "M n=2", "n": 2, "arrivals": _MARKOV},
                             {"label": "ID1", "n": 1, "arrivals": _DEGENERATE},
                             {"label": "ID2", "n": 2, "arrivals": _DEGENERATE}]},
        "sim": _FIG_SIM,
    },
    "table1": {
        "description": "The four degenerate arrival configurations at service time 1",
        "mode": "compare",
        "queue": {"n": 1, "arrivals": _DEGENERATE, "service": _UNIT_SERVICE, "p_o": 0.0},
        "sweep": {"parameter": "tau", "values": [1.0], "series": _TABLE1},
        "sim": {"horizon": 100_000, "replications": 10},
    },
    "md22": {
        "description": "M/D/2/2 at tau 1 and arrival rate 1.25 (mean inter-arrival time 0.8), "
                       "offered load 1.25 Erlang. The quoted 0.8 is read as the mean gap: a "
                       "rate of 0.8 would give Erlang-B 0.151, not the quoted 0.25",
        "mode": "compare",
        "queue": {"n": 2, "arrivals": {"kind": "exponential", "rate": 1.25},
                  "service": _UNIT_SERVICE, "p_o": 0.0},
        "sim": {"horizon": 100_000, "replications": 10},
    },
}


def deep_merge(base: dict, override: dict) -> dict:
    """Field-by-field override of nested mappings; lists and scalars are replaced."""
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = deep_merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def preset(name: str) -> dict:
    if name not in PRESETS:
        raise ConfigError([f"preset: unknown preset {name!r} (available: {', '.join(PRESETS)})"])
    return copy.deepcopy(PRESETS[name])


def sweep_grid(start: float, stop: float, step: float) -> np.ndarray:
    """The inclusive grid used for start/stop/step sweeps."""
    count = int(math.floor((stop - start) / step + 1e-9)) + 1 if stop >= start else 0
    return np.array([round(start + i * step, 12) for i in range(count)])
