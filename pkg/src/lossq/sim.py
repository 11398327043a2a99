"""Discrete-event simulation of ~/~/n/n loss queues.

Each replication draws its own stream from ``(seed, replication)``, offers
``horizon`` arrivals, drops the first ``warmup`` from the statistics, and
tallies outage losses, services and blocks.  A departure and an arrival at
the same instant are ordered departure first.
"""

from __future__ import annotations

import heapq
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from lossq.counts import CountPmf
from lossq.dist import (
    Deterministic,
    QueueSpec,
    sample_interarrivals,
    sample_services,
    service_classes,
)

TIE_TOL = 1e-9


@dataclass(frozen=True)
class SimConfig:
    queue: QueueSpec
    horizon: int = 100_000
    warmup: int | None = None
    seed: int = 20190101
    replications: int = 10

    def __post_init__(self):
        if self.warmup is None:
            object.__setattr__(self, "warmup", self.horizon // 10)
        if not self.horizon > self.warmup >= 0:
            raise ValueError(f"need horizon > warmup >= 0, got {self.horizon}, {self.warmup}")
        if self.replications < 1:
            raise ValueError("need at least one replication")


@dataclass(frozen=True, eq=False)
class SimResult:
    offered: int
    dropped: int
    received: int
    served: int
    blocked: int
    p_b_hat: float
    p_b_ci: float
    state_time: np.ndarray
    busy_fraction: float
    busy_ci: float
    replications: int
    p_b_reps: tuple[float, ...] = field(default=())
    busy_reps: tuple[float, ...] = field(default=())

    @property
    def elapsed(self) -> float:
        return math.fsum(self.state_time)

    def state_fractions(self) -> np.ndarray:
        total = self.elapsed
        return self.state_time / total if total > 0 else self.state_time


@dataclass
class _Tally:
    offered: int = 0
    dropped: int = 0
    received: int = 0
    served: int = 0
    blocked: int = 0
    state_time: np.ndarray = None
    service_starts: list = None


def _rng(seed: int, replication: int) -> np.random.Generator:
    return np.random.default_rng([seed, replication])


def _draw(queue: QueueSpec, horizon: int, rng: np.random.Generator):
    arrivals = np.cumsum(sample_interarrivals(queue.arrivals, rng, horizon))
    if queue.p_o > 0:
        lost = rng.random(horizon) < queue.p_o
    else:
        lost = np.zeros(horizon, dtype=bool)
    services = sample_services(queue.service, rng, horizon)
    return arrivals, lost, services


def _replicate(queue: QueueSpec, horizon: int, warmup: int, rng: np.random.Generator,
               keep_starts: bool = False) -> tuple[_Tally, np.ndarray, np.ndarray]:
    n = queue.n
    arrivals, lost, services = _draw(queue, horizon, rng)
    tol = TIE_TOL * min(tau for _, tau in service_classes(queue.service))
    tally = _Tally(state_time=np.zeros(n + 1), service_starts=[] if keep_starts else None)
    state_time = [0.0] * (n + 1)
    busy: list[float] = []
    last = 0.0
    starts = tally.service_starts

    for i, (t, is_lost, s) in enumerate(zip(arrivals.tolist(), lost.tolist(), services.tolist())):
        measuring = i >= warmup
        while busy and busy[0] <= t + tol:
            d = min(busy[0], t)
            if measuring and i > warmup and d > last:
                state_time[len(busy)] += d - last
                last = d
            heapq.heappop(busy)
        if i == warmup:
            last = t
        elif measuring:
            state_time[len(busy)] += t - last
            last = t
        if not measuring:
            if not is_lost and len(busy) < n:
                heapq.heappush(busy, t + s)
            continue

        tally.offered += 1
        if is_lost:
            tally.dropped += 1
            continue
        tally.received += 1
        if len(busy) < n:
            heapq.heappush(busy, t + s)
            tally.served += 1
            if starts is not None:
                starts.append(i)
        else:
            tally.blocked += 1

    tally.state_time = np.array(state_time)
    return tally, arrivals, lost


def _run_one(args) -> _Tally:
    config, r = args
    tally, _, _ = _replicate(config.queue, config.horizon, config.warmup, _rng(config.seed, r))
    return tally


def _half_width(samples: list[float]) -> float:
    if len(samples) < 2:
        return math.nan
    return 3.0 * float(np.std(samples, ddof=1)) / math.sqrt(len(samples))


def run(config: SimConfig, workers: int = 1) -> SimResult:
    """Simulate ``config.replications`` independent replications and pool them.

    ``p_b_ci`` and ``busy_ci`` are 3-sigma half-widths of the replication
    means (normal approximation).
    """
    jobs = [(config, r) for r in range(config.replications)]
    if workers > 1 and config.replications > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            tallies = list(pool.map(_run_one, jobs))
    else:
        tallies = [_run_one(job) for job in jobs]

    n = config.queue.n
    levels = np.arange(n + 1)
    p_reps = [t.blocked / t.received if t.received else 0.0 for t in tallies]
    busy_reps = []
    for t in tallies:
        elapsed = math.fsum(t.state_time)
        busy_reps.append(math.fsum(levels * t.state_time) / (n * elapsed) if elapsed > 0 else 0.0)

    received = sum(t.received for t in tallies)
    blocked = sum(t.blocked for t in tallies)
    state_time = np.sum([t.state_time for t in tallies], axis=0)
    elapsed = math.fsum(state_time)
    return SimResult(
        offered=sum(t.offered for t in tallies),
        dropped=sum(t.dropped for t in tallies),
        received=received,
        served=sum(t.served for t in tallies),
        blocked=blocked,
        p_b_hat=blocked / received if received else 0.0,
        p_b_ci=_half_width(p_reps),
        state_time=state_time,
        busy_fraction=math.fsum(levels * state_time) / (n * elapsed) if elapsed > 0 else 0.0,
        busy_ci=_half_width(busy_reps),
        replications=config.replications,
        p_b_reps=tuple(p_reps),
        busy_reps=tuple(busy_reps),
    )


def empirical_counts(config: SimConfig) -> CountPmf:
    """Histogram of received arrivals in the window ``(t, t + tau]`` after
    each measured service start ``t``."""
    service = config.queue.service
    if not isinstance(service, Deterministic):
        raise ValueError("empirical counts need a deterministic service time")
    tau = service.tau
    counts: list[int] = []
    for r in range(config.replications):
        tally, arrivals, lost = _replicate(config.queue, config.horizon, config.warmup,
                                           _rng(config.seed, r), keep_starts=True)
        received = arrivals[~lost]
        index_in_received = np.cumsum(~lost) - 1
        starts = np.asarray(tally.service_starts, dtype=int)
        t = arrivals[starts]
        ends = t + tau + TIE_TOL * tau
        complete = ends <= arrivals[-1]
        first = index_in_received[starts] + 1
        upto = np.searchsorted(received, ends, side="right")
        counts.extend((upto - first)[complete].tolist())
    if not counts:
        return CountPmf(np.array([1.0]), 0.0, tau)
    hist = np.bincount(np.asarray(counts))
    return CountPmf(hist / hist.sum(), 0.0, tau)
