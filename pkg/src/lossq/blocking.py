"""Blocking-probability bounds and the prior-based approximation.

Per observation period of one service time the queue evolves as

    X = K_prev + K_arrived - K_departed
    K_blocked = max(X - n, 0)

and the blocking probability is ``E[K_blocked] / (E[K_blocked] + n)``.
The bounds assume no spill-over (lower) or full spill-over (upper) from the
previous period; the approximation replaces the unknown spill-over with a
prior on ``K_prev``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from lossq.counts import CountPmf

DEMOD_MODELS = ("clipped", "full")
PRIOR_KINDS = ("general", "degenerate-n1")
TAIL_WARNING = 1e-9


@dataclass(frozen=True, eq=False)
class SignedPmf:
    """pmf over the integers ``offset, offset + 1, ...``."""

    probs: np.ndarray
    offset: int = 0

    @property
    def support(self) -> np.ndarray:
        return np.arange(len(self.probs)) + self.offset

    def convolve(self, other: "SignedPmf") -> "SignedPmf":
        """Distribution of the sum of two independent variables."""
        return SignedPmf(np.convolve(self.probs, other.probs), self.offset + other.offset)

    def reversed(self) -> "SignedPmf":
        """Distribution of the negated variable."""
        return SignedPmf(self.probs[::-1].copy(), -(self.offset + len(self.probs) - 1))

    def normalized(self) -> "SignedPmf":
        return SignedPmf(self.probs / math.fsum(self.probs), self.offset)

    def mean(self) -> float:
        return math.fsum(self.support * self.probs)

    def clamped(self, lo: int, hi: int) -> np.ndarray:
        """Fold mass below ``lo`` onto ``lo`` and above ``hi`` onto ``hi``."""
        idx = np.clip(self.support, lo, hi) - lo
        return np.bincount(idx, weights=self.probs, minlength=hi - lo + 1)


@dataclass(frozen=True)
class BlockingReport:
    p_lower: float
    p_upper: float
    p_approx: float
    p_raw: float
    prior_used: str
    demod_model: str
    expected_blocked: float
    tail_warning: bool
    iterations: int = 1
    converged: bool = True


def _excess_ratio(excess: float, n: int) -> float:
    return excess / (excess + n) if excess > 0 else 0.0


def lower_bound(counts: CountPmf, n: int) -> float:
    """No spill-over: ``sum_{k>n} A_k (k-n)`` blocked per period."""
    a = counts.with_tail_folded()
    k = np.arange(len(a))
    return _excess_ratio(math.fsum(a[n + 1:] * (k[n + 1:] - n)), n)


def upper_bound(counts: CountPmf, n: int) -> float:
    """Full spill-over: ``sum_{k>=n} A_k k`` blocked per period."""
    a = counts.with_tail_folded()
    k = np.arange(len(a))
    return _excess_ratio(math.fsum(a[n:] * k[n:]), n)


def _clip_to_servers(probs: np.ndarray, n: int) -> np.ndarray:
    out = np.zeros(n + 1)
    head = probs[:n]
    out[: len(head)] = head
    out[n] = max(1.0 - math.fsum(head), 0.0)
    return out


def demod_pmf(arrival_counts: CountPmf, n: int, model: str = "clipped") -> CountPmf:
    """Departures per period: ``min(K_arrived, n)`` (clipped) or always ``n`` (full)."""
    if model == "clipped":
        return CountPmf(_clip_to_servers(arrival_counts.probs, n))
    if model == "full":
        return CountPmf.point_mass(n)
    raise ValueError(f"unknown demodulation model {model!r}; expected one of {DEMOD_MODELS}")


def spillover_prior(arrival_counts: CountPmf, n: int, process_kind: str = "general") -> CountPmf:
    """Prior on the number of messages carried over from the previous period.

    ``general`` folds the arrival counts into ``[0, n]``.  ``degenerate-n1``
    is the single-server degenerate-arrival case, where nothing is carried
    over.
    """
    if process_kind == "general":
        return CountPmf(_clip_to_servers(arrival_counts.probs, n))
    if process_kind == "degenerate-n1":
        if n != 1:
            raise ValueError("the degenerate-n1 prior only applies to a single server")
        return CountPmf.point_mass(0)
    raise ValueError(f"unknown prior kind {process_kind!r}; expected one of {PRIOR_KINDS}")


def _resolve_prior(arrival_counts: CountPmf, n: int, prior) -> tuple[np.ndarray, str]:
    if isinstance(prior, str):
        return spillover_prior(arrival_counts, n, prior).padded(n + 1), prior
    probs = np.asarray(prior.probs if isinstance(prior, CountPmf) else prior, dtype=float)
    if getattr(prior, "tail_mass", 0.0) > 0 or np.any(probs[n + 1:] > 0):
        raise ValueError(f"prior must be supported on [0, {n}]")
    out = np.zeros(n + 1)
    out[: min(len(probs), n + 1)] = probs[: n + 1]
    return out, "custom"


def _single_pass(arrival_counts: CountPmf, n: int, prior: np.ndarray, model: str):
    arrivals = SignedPmf(arrival_counts.with_tail_folded())
    departures = SignedPmf(np.asarray(demod_pmf(arrival_counts, n, model).probs))
    z = arrivals.convolve(departures.reversed())
    x = SignedPmf(prior).convolve(z).normalized()
    blocked = np.clip(x.support - n, 0, None)
    expected_blocked = math.fsum(blocked * x.probs)
    return expected_blocked, x.clamped(0, n)


def _report(arrival_counts, n, expected_blocked, prior_label, model, iterations=1, converged=True):
    lo = lower_bound(arrival_counts, n)
    hi = upper_bound(arrival_counts, n)
    raw = _excess_ratio(expected_blocked, n)
    return BlockingReport(
        p_lower=lo,
        p_upper=hi,
        p_approx=min(max(raw, lo), hi),
        p_raw=raw,
        prior_used=prior_label,
        demod_model=model,
        expected_blocked=expected_blocked,
        tail_warning=arrival_counts.tail_mass > TAIL_WARNING,
        iterations=iterations,
        converged=converged,
    )


PriorLike = Union[str, CountPmf]


def approximate_blocking(arrival_counts: CountPmf, n: int, prior: PriorLike = "general",
                         model: str = "clipped") -> BlockingReport:
    """Approximate the blocking probability from a prior on the spill-over.

    ``prior`` is a prior kind (see :func:`spillover_prior`) or an explicit
    pmf on ``[0, n]``.  The raw estimate is clamped into the bounds; the
    unclamped value is kept as ``p_raw``.
    """
    if n < 1:
        raise ValueError("need at least one server")
    prior_probs, label = _resolve_prior(arrival_counts, n, prior)
    expected_blocked, _ = _single_pass(arrival_counts, n, prior_probs, model)
    return _report(arrival_counts, n, expected_blocked, label, model)


def iterate_prior(arrival_counts: CountPmf, n: int, model: str = "clipped", max_iters: int = 50,
                  tol: float = 1e-10, prior: PriorLike = "general") -> BlockingReport:
    """Repeat :func:`approximate_blocking`, feeding the end-of-period occupancy
    back in as the next prior until it stops changing (total variation < ``tol``).
    """
    if max_iters < 1:
        raise ValueError("max_iters must be at least 1")
    current, label = _resolve_prior(arrival_counts, n, prior)
    converged = False
    for iteration in range(1, max_iters + 1):
        expected_blocked, occupancy = _single_pass(arrival_counts, n, current, model)
        change = 0.5 * math.fsum(np.abs(occupancy - current))
        if change < tol:
            converged = True
            break
        if iteration < max_iters:
            current = occupancy
    if iteration > 1:
        label = f"{label}+fixed-point"
    return _report(arrival_counts, n, expected_blocked, label, model, iteration, converged)
