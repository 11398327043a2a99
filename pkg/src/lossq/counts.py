"""Arrival-count distributions over a service window.

``A_k`` is the probability of exactly ``k`` arrivals within a window of length
``tau`` and ``B_k`` the probability of at least ``k``.  Counts are stored as a
truncated pmf with the leftover probability kept in ``tail_mass``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np
from scipy import special, stats

from lossq.dist import (
    Binned,
    Discrete,
    Exponential,
    InterArrivalProcess,
    QueueSpec,
    service_classes,
)
from lossq.errors import InfeasibleAnalysisError

DEFAULT_EPS_TAIL = 1e-12
DEFAULT_EPS_MERGE = 1e-9
MAX_COUNT = 10**6
MAX_DEPTH = 10**4


@dataclass(frozen=True, eq=False)
class CountPmf:
    """Truncated pmf over nonnegative counts.

    ``probs[k]`` is ``Pr(count = k)`` for ``k <= k_max``; ``tail_mass`` is the
    probability of a count above ``k_max``.
    """

    probs: np.ndarray
    tail_mass: float = 0.0
    window: float = math.nan

    def __post_init__(self):
        probs = np.array(self.probs, dtype=float)
        if probs.ndim != 1 or probs.size == 0:
            raise ValueError("count pmf needs a non-empty 1-d probability vector")
        if np.any(probs < -1e-15) or self.tail_mass < -1e-15:
            raise ValueError("count pmf entries must be nonnegative")
        probs = np.clip(probs, 0.0, None)
        probs.flags.writeable = False
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "tail_mass", max(float(self.tail_mass), 0.0))

    @classmethod
    def point_mass(cls, k: int, window: float = math.nan) -> "CountPmf":
        probs = np.zeros(k + 1)
        probs[k] = 1.0
        return cls(probs, 0.0, window)

    @property
    def k_max(self) -> int:
        return len(self.probs) - 1

    def total(self) -> float:
        return math.fsum(self.probs) + self.tail_mass

    def mean(self) -> float:
        return math.fsum(np.arange(len(self.probs)) * self.probs)

    def at_least(self) -> np.ndarray:
        """``B_k`` for ``k = 0..k_max`` (suffix sums, tail included)."""
        return np.cumsum(self.probs[::-1])[::-1] + self.tail_mass

    def padded(self, length: int) -> np.ndarray:
        out = np.zeros(max(length, len(self.probs)))
        out[: len(self.probs)] = self.probs
        return out

    def with_tail_folded(self) -> np.ndarray:
        """Probabilities with the tail mass placed at ``k_max + 1``."""
        if self.tail_mass == 0.0:
            return np.asarray(self.probs, dtype=float)
        return np.append(self.probs, self.tail_mass)


def from_at_least(b: Sequence[float], window: float = math.nan) -> CountPmf:
    """Build ``A_k = B_k - B_{k+1}`` from a finite ``B`` sequence (``B_{K+1} = 0``)."""
    b = np.asarray(b, dtype=float)
    a = b - np.append(b[1:], 0.0)
    return CountPmf(np.clip(a, 0.0, None), 0.0, window)


def poisson_counts(lam: float, tau: float, eps_tail: float = DEFAULT_EPS_TAIL,
                   max_count: int = MAX_COUNT) -> CountPmf:
    """Counts of a Poisson stream of rate ``lam`` in a window ``tau``."""
    if not lam > 0:
        raise ValueError(f"rate must be positive, got {lam!r}")
    if not tau >= 0:
        raise ValueError(f"window must be nonnegative, got {tau!r}")
    if not 0 < eps_tail < 1:
        raise ValueError(f"eps_tail must lie in (0, 1), got {eps_tail!r}")
    m = lam * tau
    if m == 0:
        return CountPmf(np.array([1.0]), 0.0, tau)

    k_max = int(stats.poisson.isf(eps_tail, m))
    if k_max > max_count:
        raise InfeasibleAnalysisError(
            f"Poisson mean {m:g} needs more than {max_count} count levels")
    while special.pdtrc(k_max, m) > eps_tail:
        k_max += 1
    while k_max > 0 and special.pdtrc(k_max - 1, m) <= eps_tail:
        k_max -= 1
    if k_max > max_count:
        raise InfeasibleAnalysisError(
            f"Poisson mean {m:g} needs more than {max_count} count levels")

    # p_k = p_{k-1} * m / k, carried in log space so e^{-m} cannot underflow early
    k = np.arange(1, k_max + 1)
    log_p = np.concatenate(([-m], -m + np.cumsum(math.log(m) - np.log(k))))
    return CountPmf(np.exp(log_p), float(special.pdtrc(k_max, m)), tau)


def _merge_close(sums: np.ndarray, weights: np.ndarray, tol: float) -> tuple[np.ndarray, np.ndarray]:
    if sums.size == 0:
        return sums, weights
    order = np.argsort(sums, kind="stable")
    sums, weights = sums[order], weights[order]
    starts = np.concatenate(([True], np.diff(sums) > tol))
    idx = np.flatnonzero(starts)
    return sums[idx], np.add.reduceat(weights, idx)


def sum_layers(process: Discrete, tau: float, eps_merge: float = DEFAULT_EPS_MERGE,
               max_depth: int = MAX_DEPTH) -> Iterator[tuple[np.ndarray, np.ndarray]]:
    """Yield ``(partial_sums, weights)`` for depths 0, 1, ... .

    Depth ``k`` holds every reachable sum of ``k`` inter-arrival times that
    does not exceed ``tau`` (inclusive, up to the merge tolerance), with the
    probability of reaching it.  Sums closer than ``eps_merge * tau`` are
    merged.
    """
    tol = eps_merge * tau
    if math.floor((tau + tol) / process.times[0]) > max_depth:
        raise InfeasibleAnalysisError(
            f"window {tau:g} allows more than {max_depth} arrivals of the shortest gap")
    times = np.asarray(process.times)
    probs = np.asarray(process.probs)
    sums, weights = np.array([0.0]), np.array([1.0])
    while sums.size:
        yield sums, weights
        nxt = (sums[:, None] + times[None, :]).ravel()
        w = (weights[:, None] * probs[None, :]).ravel()
        keep = nxt <= tau + tol
        sums, weights = _merge_close(nxt[keep], w[keep], tol)


def discrete_counts(process: Discrete, tau: float, eps_merge: float = DEFAULT_EPS_MERGE,
                    max_depth: int = MAX_DEPTH) -> CountPmf:
    """Exact counts for a degenerate inter-arrival process.

    ``B_k`` is the total probability of all length-``k`` atom sequences whose
    sum fits in the window.
    """
    if not tau >= 0:
        raise ValueError(f"window must be nonnegative, got {tau!r}")
    b = [math.fsum(w) for _, w in sum_layers(process, tau, eps_merge, max_depth)]
    return from_at_least(b, tau)


def window_counts(process: InterArrivalProcess, tau: float,
                  eps_tail: float = DEFAULT_EPS_TAIL) -> CountPmf:
    if isinstance(process, Exponential):
        return poisson_counts(process.rate, tau, eps_tail)
    return discrete_counts(process, tau)


def outage_thin(pmf: CountPmf, p_o: float) -> CountPmf:
    """Binomial thinning: each counted message survives with probability ``1 - p_o``.

    The tail beyond ``k_max`` stays in the tail.
    """
    if not 0.0 <= p_o <= 1.0:
        raise ValueError(f"outage probability must lie in [0, 1], got {p_o!r}")
    if p_o == 0.0:
        return pmf
    if p_o == 1.0:
        return CountPmf(np.array([1.0]), 0.0, pmf.window)
    out = np.zeros(len(pmf.probs))
    for x, a in enumerate(pmf.probs):
        if a > 0:
            out[: x + 1] += a * stats.binom.pmf(np.arange(x + 1), x, 1.0 - p_o)
    return CountPmf(out, pmf.tail_mass, pmf.window)


def mixture_counts(classes: Sequence[tuple[float, CountPmf]]) -> CountPmf:
    """Rate-weighted mixture of per-class count pmfs."""
    if len(classes) == 0:
        raise ValueError("mixture needs at least one class")
    rates = np.array([float(lam) for lam, _ in classes])
    if np.any(rates <= 0):
        raise ValueError("class rates must be positive")
    weights = rates / rates.sum()
    length = max(len(pmf.probs) for _, pmf in classes)
    probs = sum(w * pmf.padded(length) for w, (_, pmf) in zip(weights, classes))
    tail = math.fsum(w * pmf.tail_mass for w, (_, pmf) in zip(weights, classes))
    window = math.fsum(w * pmf.window for w, (_, pmf) in zip(weights, classes))
    return CountPmf(probs, tail, window)


def arrival_counts(queue: QueueSpec, eps_tail: float = DEFAULT_EPS_TAIL) -> CountPmf:
    """Received-arrival counts over one service period of ``queue``.

    Heterogeneous service is handled as a mixture over service classes, each
    window counting arrivals of the whole stream.
    """
    classes = [(w, window_counts(queue.arrivals, tau, eps_tail))
               for w, tau in service_classes(queue.service)]
    counts = classes[0][1] if len(classes) == 1 else mixture_counts(classes)
    return outage_thin(counts, queue.p_o)


def _quantile_integral(segments: list[tuple[float, float, float, float]], a: float, b: float) -> float:
    """Integral over ``[a, b]`` of a quantile function given as linear pieces
    ``(u0, u1, q0, q1)`` on probability intervals ``[u0, u1]``."""
    total = 0.0
    for u0, u1, q0, q1 in segments:
        lo, hi = max(u0, a), min(u1, b)
        if hi <= lo:
            continue
        slope = (q1 - q0) / (u1 - u0)
        total += (hi - lo) * (q0 + slope * ((lo + hi) / 2 - u0))
    return total


def bin_service_distribution(cdf_samples: Sequence[tuple[float, float]], bins: int) -> Binned:
    """Equal-probability binning of a service-time CDF.

    ``cdf_samples`` are ``(tau, F(tau))`` knots of a piecewise-linear CDF; a
    jump between knots at the same ``tau`` (or at the first knot) is a point
    mass.  Each bin carries probability ``1/bins`` at the mean of its quantile
    slice; bins that land on the same time are merged.
    """
    if bins < 1:
        raise ValueError("need at least one bin")
    pts = [(float(t), float(f)) for t, f in cdf_samples]
    if not pts:
        raise ValueError("need at least one CDF sample")
    taus = np.array([t for t, _ in pts])
    cum = np.array([f for _, f in pts])
    if np.any(np.diff(taus) < 0) or np.any(np.diff(cum) < 0):
        raise ValueError("CDF samples must be nondecreasing in both time and probability")
    if abs(cum[-1] - 1.0) > 1e-12 or cum[0] < 0:
        raise ValueError("CDF must start at or above 0 and end at 1")

    taus = np.concatenate(([taus[0]], taus))
    cum = np.concatenate(([0.0], cum[:-1], [1.0]))
    segments = [(cum[i - 1], cum[i], taus[i - 1], taus[i])
                for i in range(1, len(cum)) if cum[i] > cum[i - 1]]

    atoms: list[list[float]] = []
    for j in range(bins):
        a, b = j / bins, (j + 1) / bins
        mean_tau = _quantile_integral(segments, a, b) * bins
        if atoms and abs(atoms[-1][0] - mean_tau) <= 1e-12 * max(1.0, mean_tau):
            atoms[-1][1] += 1.0 / bins
        else:
            atoms.append([mean_tau, 1.0 / bins])
    return Binned([(t, p) for t, p in atoms])
