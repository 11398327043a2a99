"""Blocking probabilities, bounds and utilization for loss queues with
deterministic or binned service times (G/D/n/n and G/G/n/n)."""

from lossq.blocking import (
    BlockingReport,
    SignedPmf,
    approximate_blocking,
    demod_pmf,
    iterate_prior,
    lower_bound,
    spillover_prior,
    upper_bound,
)
from lossq.counts import (
    CountPmf,
    arrival_counts,
    bin_service_distribution,
    discrete_counts,
    mixture_counts,
    outage_thin,
    poisson_counts,
)
from lossq.dist import (
    Binned,
    Classes,
    Deterministic,
    Discrete,
    Exponential,
    QueueSpec,
    mean_rate,
    sample_interarrival,
)
from lossq.errors import InfeasibleAnalysisError, UnsupportedAnalysisError
from lossq.reference import brute_force_counts, erlang_b
from lossq.sim import SimConfig, SimResult, empirical_counts, run
from lossq.timing import (
    StateRatios,
    idle_gap_terms_discrete,
    idle_gap_terms_markov,
    state_analysis,
)

__version__ = "0.1.0"
