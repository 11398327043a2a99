"""Closed-form and brute-force oracles."""

from __future__ import annotations

import math

from lossq.counts import CountPmf, from_at_least
from lossq.dist import Discrete
from lossq.errors import InfeasibleAnalysisError

ENUMERATION_BUDGET = 10**7


def erlang_b(n: int, rho: float) -> float:
    """Erlang-B blocking probability of an M/G/n/n queue at offered load ``rho``.

    Uses ``E(k) = rho E(k-1) / (k + rho E(k-1))`` with ``E(0) = 1``.
    """
    if n < 0 or rho < 0:
        raise ValueError("need n >= 0 and rho >= 0")
    b = 1.0
    for k in range(1, n + 1):
        b = rho * b / (k + rho * b)
    return b


def erlang_b_direct(n: int, rho: float) -> float:
    """Direct-sum Erlang-B, computed in log space (test oracle for :func:`erlang_b`)."""
    if rho == 0:
        return 1.0 if n == 0 else 0.0
    logs = [k * math.log(rho) - math.lgamma(k + 1) for k in range(n + 1)]
    top = max(logs)
    return math.exp(logs[-1] - top) / math.fsum(math.exp(x - top) for x in logs)


def brute_force_counts(process: Discrete, tau: float, depth_cap: int | None = None,
                       budget: int = ENUMERATION_BUDGET) -> CountPmf:
    """Counts by walking every atom sequence that fits in ``tau``.

    No merging of partial sums; each sequence is visited individually.
    """
    y = len(process.times)
    depth = math.floor(tau / process.times[0]) if tau >= 0 else 0
    if depth_cap is not None and depth > depth_cap:
        raise InfeasibleAnalysisError(f"window needs depth {depth} > cap {depth_cap}")
    if y ** depth > budget:
        raise InfeasibleAnalysisError(f"{y}^{depth} sequences exceed the enumeration budget")

    b = [0.0] * (depth + 2)
    stack = [(0, 0.0, 1.0)]
    while stack:
        level, total, weight = stack.pop()
        b[level] += weight
        for t, p in process.atoms:
            if total + t <= tau:
                stack.append((level + 1, total + t, weight * p))
    while len(b) > 1 and b[-1] == 0.0:
        b.pop()
    return from_at_least(b, tau)
