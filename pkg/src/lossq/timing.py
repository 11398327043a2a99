"""Single-server timing: idle gaps, state ratios and utilization.

With one server a cycle is one service of length ``tau`` followed by the idle
gap until the next arrival.  ``C_k`` is the contribution to the mean idle time
from cycles where ``k`` further arrivals land inside the service period and
the ``(k+1)``-th is the first one after it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from lossq.counts import DEFAULT_EPS_MERGE, MAX_DEPTH, sum_layers
from lossq.dist import Discrete, Exponential, InterArrivalProcess
from lossq.errors import UnsupportedAnalysisError


@dataclass(frozen=True)
class StateRatios:
    t0: float
    t1: float
    q0: float
    q1: float
    L: float
    eta: float
    zeta: float


def idle_gap_terms_markov(lam: float, tau: float, eps: float = 1e-16) -> list[float]:
    """``C_k = exp(-lam tau) lam^(k-1) tau^k / k!`` until the terms are negligible."""
    if not (lam > 0 and tau > 0):
        raise ValueError("need lam > 0 and tau > 0")
    m = lam * tau
    terms: list[float] = []
    running = 0.0
    k = 0
    while True:
        term = math.exp(-m + k * math.log(m) - math.lgamma(k + 1)) / lam
        terms.append(term)
        running += term
        if k > m and term < eps * running:
            return terms
        k += 1


def idle_gap_terms_discrete(process: Discrete, tau: float, eps_merge: float = DEFAULT_EPS_MERGE,
                            max_depth: int = MAX_DEPTH) -> list[float]:
    """``C_k`` for degenerate arrivals: expected overshoot past ``tau`` of
    sequences whose first ``k`` gaps fit and whose ``(k+1)``-th does not."""
    if not tau > 0:
        raise ValueError("need tau > 0")
    tol = eps_merge * tau
    times = np.asarray(process.times)
    probs = np.asarray(process.probs)
    terms = []
    for sums, weights in sum_layers(process, tau, eps_merge, max_depth):
        nxt = sums[:, None] + times[None, :]
        w = weights[:, None] * probs[None, :]
        out = nxt > tau + tol
        terms.append(math.fsum((w * (nxt - tau))[out]))
    return terms


def idle_time(process: InterArrivalProcess, tau: float) -> float:
    """Mean idle time per cycle, ``T_0 = sum_k C_k``."""
    if isinstance(process, Exponential):
        return math.fsum(idle_gap_terms_markov(process.rate, tau))
    return math.fsum(idle_gap_terms_discrete(process, tau))


def state_analysis(process: InterArrivalProcess, tau: float, p_b: float, n: int = 1) -> StateRatios:
    """State ratios, mean occupancy and utilization of a single-server loss queue.

    ``p_b`` is supplied by the caller; the non-blocking utilization is
    ``eta * (1 - p_b)``.
    """
    if n != 1:
        raise UnsupportedAnalysisError("timing analysis is only available for a single server")
    if not tau > 0:
        raise ValueError(f"service time must be positive, got {tau!r}")
    if not 0.0 <= p_b <= 1.0:
        raise ValueError(f"blocking probability must lie in [0, 1], got {p_b!r}")
    t0 = idle_time(process, tau)
    t1 = tau
    q1 = t1 / (t0 + t1)
    q0 = 1.0 - q1
    L = q1
    eta = L / n
    return StateRatios(t0=t0, t1=t1, q0=q0, q1=q1, L=L, eta=eta, zeta=eta * (1.0 - p_b))
