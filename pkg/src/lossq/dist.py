"""Inter-arrival and service-time processes.

Arrivals are either exponential (Markovian) or degenerate, i.e. a finite set
of inter-arrival times ``t_x`` drawn with probabilities ``p_x``.  Service is a
single deterministic time, a set of rate-weighted classes, or a binned
distribution.  All process objects are immutable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from lossq.errors import InfeasibleAnalysisError

PROB_TOL = 1e-12


def _normalized(probs: Sequence[float], what: str) -> tuple[float, ...]:
    probs = [float(p) for p in probs]
    if any(p < 0 or not math.isfinite(p) for p in probs):
        raise ValueError(f"{what}: probabilities must be finite and nonnegative")
    total = math.fsum(probs)
    if abs(total - 1.0) > PROB_TOL:
        raise ValueError(f"{what}: probabilities sum to {total!r}, not 1 (tolerance {PROB_TOL})")
    return tuple(p / total for p in probs)


@dataclass(frozen=True)
class Exponential:
    rate: float

    def __post_init__(self):
        if not (self.rate > 0 and math.isfinite(self.rate)):
            raise ValueError(f"exponential rate must be positive, got {self.rate!r}")


@dataclass(frozen=True)
class Discrete:
    """Degenerate inter-arrival distribution over ``(t_x, p_x)`` atoms.

    Atoms are stored sorted by time.  Duplicate times are rejected rather
    than merged.
    """

    times: tuple[float, ...]
    probs: tuple[float, ...]

    def __init__(self, atoms: Sequence[tuple[float, float]]):
        if len(atoms) == 0:
            raise ValueError("discrete process needs at least one atom")
        pairs = sorted((float(t), float(p)) for t, p in atoms)
        times = tuple(t for t, _ in pairs)
        if any(not (t > 0 and math.isfinite(t)) for t in times):
            raise ValueError("discrete inter-arrival times must be positive and finite")
        if len(set(times)) != len(times):
            raise ValueError("discrete inter-arrival times must be distinct")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "probs", _normalized([p for _, p in pairs], "discrete process"))

    @property
    def atoms(self) -> list[tuple[float, float]]:
        return list(zip(self.times, self.probs))

    def mean(self) -> float:
        return math.fsum(t * p for t, p in zip(self.times, self.probs))

    def scaled(self, factor: float) -> "Discrete":
        """Multiply every inter-arrival time by ``factor``."""
        return Discrete([(t * factor, p) for t, p in self.atoms])


InterArrivalProcess = Union[Exponential, Discrete]


@dataclass(frozen=True)
class Deterministic:
    tau: float

    def __post_init__(self):
        if not (self.tau > 0 and math.isfinite(self.tau)):
            raise ValueError(f"service time must be positive, got {self.tau!r}")


@dataclass(frozen=True)
class Classes:
    """Message classes ``(lambda_x, tau_x)``; a message belongs to class x
    with probability ``lambda_x / sum(lambda)``."""

    entries: tuple[tuple[float, float], ...]

    def __init__(self, entries: Sequence[tuple[float, float]]):
        if len(entries) == 0:
            raise ValueError("classes service needs at least one class")
        entries = tuple((float(lam), float(tau)) for lam, tau in entries)
        for lam, tau in entries:
            if not (lam > 0 and math.isfinite(lam)):
                raise ValueError(f"class rate must be positive, got {lam!r}")
            if not (tau > 0 and math.isfinite(tau)):
                raise ValueError(f"class service time must be positive, got {tau!r}")
        object.__setattr__(self, "entries", entries)


@dataclass(frozen=True)
class Binned:
    """Service distribution as ``(tau_x, p_x)`` bins."""

    bins: tuple[tuple[float, float], ...]

    def __init__(self, bins: Sequence[tuple[float, float]]):
        if len(bins) == 0:
            raise ValueError("binned service needs at least one bin")
        taus = [float(t) for t, _ in bins]
        if any(not (t > 0 and math.isfinite(t)) for t in taus):
            raise ValueError("binned service times must be positive and finite")
        probs = _normalized([p for _, p in bins], "binned service")
        object.__setattr__(self, "bins", tuple(zip(taus, probs)))


ServiceSpec = Union[Deterministic, Classes, Binned]


@dataclass(frozen=True)
class QueueSpec:
    n: int
    arrivals: InterArrivalProcess
    service: ServiceSpec
    p_o: float = 0.0

    def __post_init__(self):
        if isinstance(self.n, bool) or int(self.n) != self.n or self.n < 1:
            raise ValueError(f"server count must be a positive integer, got {self.n!r}")
        object.__setattr__(self, "n", int(self.n))
        if not 0.0 <= self.p_o <= 1.0:
            raise ValueError(f"outage probability must lie in [0, 1], got {self.p_o!r}")

    def offered_load(self) -> float:
        """Transmitted load in Erlang (before outage)."""
        return mean_rate(self.arrivals) * mean_service(self.service)

    def received_load(self) -> float:
        return self.offered_load() * (1.0 - self.p_o)


def mean_rate(process: InterArrivalProcess) -> float:
    """Mean arrival rate: ``lambda`` for exponential, ``1 / sum(p_x t_x)`` for discrete."""
    if isinstance(process, Exponential):
        return process.rate
    if isinstance(process, Discrete):
        return 1.0 / process.mean()
    raise TypeError(f"not an inter-arrival process: {process!r}")


def service_classes(service: ServiceSpec) -> list[tuple[float, float]]:
    """``(weight, tau)`` pairs with weights summing to one."""
    if isinstance(service, Deterministic):
        return [(1.0, service.tau)]
    if isinstance(service, Classes):
        total = math.fsum(lam for lam, _ in service.entries)
        return [(lam / total, tau) for lam, tau in service.entries]
    if isinstance(service, Binned):
        return [(p, tau) for tau, p in service.bins]
    raise TypeError(f"not a service spec: {service!r}")


def mean_service(service: ServiceSpec) -> float:
    return math.fsum(w * tau for w, tau in service_classes(service))


def scale_service(service: ServiceSpec, factor: float) -> ServiceSpec:
    """Multiply every service time by ``factor``."""
    if isinstance(service, Deterministic):
        return Deterministic(service.tau * factor)
    if isinstance(service, Classes):
        return Classes([(lam, tau * factor) for lam, tau in service.entries])
    if isinstance(service, Binned):
        return Binned([(tau * factor, p) for tau, p in service.bins])
    raise TypeError(f"not a service spec: {service!r}")


def with_rate(process: InterArrivalProcess, rate: float) -> InterArrivalProcess:
    """Return the same process shape rescaled to mean rate ``rate``."""
    if isinstance(process, Exponential):
        return Exponential(rate)
    return process.scaled(mean_rate(process) / rate)


def sample_interarrival(process: InterArrivalProcess, rng: np.random.Generator) -> float:
    if isinstance(process, Exponential):
        return float(rng.exponential(1.0 / process.rate))
    if len(process.times) == 1:
        return process.times[0]
    return process.times[int(rng.choice(len(process.times), p=process.probs))]


def sample_interarrivals(process: InterArrivalProcess, rng: np.random.Generator, size: int) -> np.ndarray:
    """Vectorised form of :func:`sample_interarrival`."""
    if isinstance(process, Exponential):
        return rng.exponential(1.0 / process.rate, size)
    times = np.asarray(process.times)
    if len(times) == 1:
        return np.full(size, times[0])
    return times[rng.choice(len(times), size=size, p=process.probs)]


def sample_services(service: ServiceSpec, rng: np.random.Generator, size: int) -> np.ndarray:
    if isinstance(service, Deterministic):
        return np.full(size, service.tau)
    weights, taus = zip(*service_classes(service))
    taus = np.asarray(taus)
    return taus[rng.choice(len(taus), size=size, p=np.asarray(weights) / math.fsum(weights))]


def thinned_process(process: InterArrivalProcess, p_o: float, eps: float = 1e-12,
                    max_atoms: int = 200_000) -> InterArrivalProcess:
    """Inter-arrival law of the received stream when each arrival is lost
    independently with probability ``p_o``.

    A received gap is a geometric number of original gaps.  For discrete
    processes the geometric sum is expanded until the unexpanded mass drops
    below ``eps``; that remainder is dropped and the atoms renormalised.
    """
    if not 0.0 <= p_o < 1.0:
        raise ValueError(f"thinning needs p_o in [0, 1), got {p_o!r}")
    if p_o == 0.0:
        return process
    if isinstance(process, Exponential):
        return Exponential(process.rate * (1.0 - p_o))

    acc: dict[float, float] = {}
    layer = {0.0: 1.0}
    remaining = 1.0  # Pr(first j arrivals all lost)
    while remaining >= eps:
        nxt: dict[float, float] = {}
        for s, w in layer.items():
            for t, p in zip(process.times, process.probs):
                key = round(s + t, 12)
                nxt[key] = nxt.get(key, 0.0) + w * p
        for s, w in nxt.items():
            acc[s] = acc.get(s, 0.0) + w * remaining * (1.0 - p_o)
        layer = nxt
        remaining *= p_o
        if len(acc) > max_atoms:
            raise InfeasibleAnalysisError("thinned process needs too many atoms")
    total = math.fsum(acc.values())
    return Discrete([(t, w / total) for t, w in acc.items()])
