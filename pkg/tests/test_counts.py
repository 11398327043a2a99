import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from conftest import ID_ATOMS_EXACT
from lossq.counts import (
    CountPmf,
    arrival_counts,
    bin_service_distribution,
    discrete_counts,
    mixture_counts,
    outage_thin,
    poisson_counts,
)
from lossq.dist import Binned, Deterministic, Discrete, Exponential, QueueSpec
from lossq.errors import InfeasibleAnalysisError
from lossq.reference import brute_force_counts


def exact_counts(atoms, tau):
    """A_k by enumerating every atom sequence in exact rational arithmetic."""
    tau = Fraction(tau)
    b = [Fraction(1)]
    k = 1
    while True:
        total = sum((math.prod(p for _, p in seq) for seq in itertools.product(atoms, repeat=k)
                     if sum(t for t, _ in seq) <= tau), Fraction(0))
        if total == 0:
            break
        b.append(total)
        k += 1
    return [b[i] - (b[i + 1] if i + 1 < len(b) else 0) for i in range(len(b))]


def test_exact_oracle_table1():
    assert exact_counts(ID_ATOMS_EXACT, 1) == [Fraction(1, 3), Fraction(1, 3), Fraction(8, 27), Fraction(1, 27)]


def test_discrete_counts_table1(id1):
    pmf = discrete_counts(id1, 1.0)
    np.testing.assert_allclose(pmf.probs, [1 / 3, 1 / 3, 8 / 27, 1 / 27], atol=1e-12)
    assert pmf.tail_mass == 0.0
    assert pmf.window == 1.0


def test_discrete_counts_window_too_short():
    assert list(discrete_counts(Discrete([(1.0, 1.0)]), 0.5).probs) == [1.0]


def test_discrete_counts_inclusive_boundary():
    np.testing.assert_array_equal(discrete_counts(Discrete([(1.0, 1.0)]), 1.0).probs, [0.0, 1.0])


@pytest.mark.parametrize("tau", [0.25, 0.3, 0.9, 1.2, 2.0, 2.7, 3.0])
def test_discrete_counts_match_exact_oracle(id1, tau):
    expected = [float(a) for a in exact_counts(ID_ATOMS_EXACT, Fraction(str(tau)))]
    np.testing.assert_allclose(discrete_counts(id1, tau).padded(len(expected)), expected, atol=1e-12)


def test_discrete_counts_depth_cap():
    with pytest.raises(InfeasibleAnalysisError):
        discrete_counts(Discrete([(1e-6, 1.0)]), 1.0, max_depth=1000)


atom_sets = st.lists(st.tuples(st.floats(0.1, 2.0), st.floats(0.05, 1.0)), min_size=1, max_size=3,
                     unique_by=lambda a: round(a[0], 6))


@settings(max_examples=60, deadline=None)
@given(atom_sets, st.floats(0.0, 1.0))
def test_dp_matches_brute_force(raw, frac):
    total = sum(p for _, p in raw)
    proc = Discrete([(t, p / total) for t, p in raw])
    tau = frac * 12 * proc.times[0]  # depth <= 12
    bf = brute_force_counts(proc, tau)
    # windows sitting on a partial sum are covered by the exact-arithmetic tests
    near = brute_force_counts(proc, tau * (1 + 1e-8) + 1e-12)
    assume(np.array_equal(bf.probs, near.probs))
    dp = discrete_counts(proc, tau)
    length = max(len(dp.probs), len(bf.probs))
    np.testing.assert_allclose(dp.padded(length), bf.padded(length), atol=1e-12)


def test_poisson_counts_values():
    assert poisson_counts(1.0, 1.0, 1e-12).probs[0] == pytest.approx(math.exp(-1), abs=1e-12)
    assert poisson_counts(2.0, 0.5).probs[1] == pytest.approx(math.exp(-1), abs=1e-12)
    assert list(poisson_counts(5.0, 0.0).probs) == [1.0]


@pytest.mark.parametrize("m", [0.01, 0.5, 1.0, 3.0, 30.0, 800.0])
def test_poisson_counts_closed_form(m):
    pmf = poisson_counts(m, 1.0, 1e-12)
    k = np.arange(len(pmf.probs))
    closed = np.exp(-m + k * math.log(m) - np.array([math.lgamma(i + 1) for i in k]))
    np.testing.assert_allclose(pmf.probs, closed, rtol=1e-9, atol=1e-300)
    assert pmf.tail_mass <= 1e-12
    assert pmf.total() == pytest.approx(1.0, abs=1e-9)
    assert pmf.mean() == pytest.approx(m, abs=1e-12 * len(pmf.probs) + 1e-9)


def test_poisson_counts_cap():
    with pytest.raises(InfeasibleAnalysisError):
        poisson_counts(1e7, 1.0)


def test_at_least_is_nonincreasing(id1):
    b = discrete_counts(id1, 2.0).at_least()
    assert b[0] == pytest.approx(1.0)
    assert np.all(np.diff(b) <= 1e-15)


def test_outage_identity_and_total_loss(id1):
    pmf = discrete_counts(id1, 1.0)
    assert outage_thin(pmf, 0.0) is pmf
    assert list(outage_thin(pmf, 1.0).probs) == [1.0]


def test_outage_thinning_of_poisson_is_poisson():
    thinned = outage_thin(poisson_counts(1.0, 1.0), 0.5)
    direct = poisson_counts(0.5, 1.0)
    n = max(len(thinned.probs), len(direct.probs))
    np.testing.assert_allclose(thinned.padded(n), direct.padded(n), atol=1e-9)


@given(st.floats(0.0, 1.0), st.floats(0.1, 8.0))
def test_outage_preserves_mass_and_scales_mean(p_o, m):
    pmf = poisson_counts(m, 1.0)
    thin = outage_thin(pmf, p_o)
    assert thin.total() == pytest.approx(1.0, abs=1e-9)
    assert thin.mean() == pytest.approx((1 - p_o) * pmf.mean(), abs=1e-9)


def test_mixture_single_and_identical(id1):
    pmf = discrete_counts(id1, 1.0)
    np.testing.assert_allclose(mixture_counts([(2.0, pmf)]).probs, pmf.probs)
    np.testing.assert_allclose(mixture_counts([(1.0, pmf), (1.0, pmf)]).probs, pmf.probs)


def test_mixture_two_class_markov():
    mix = mixture_counts([(1.0, poisson_counts(1.0, 2 / 3)), (1.0, poisson_counts(1.0, 4 / 3))])
    assert mix.probs[0] == pytest.approx((math.exp(-2 / 3) + math.exp(-4 / 3)) / 2, abs=1e-12)
    assert mix.probs[0] == pytest.approx(0.388507, abs=1e-6)


@given(st.floats(0.1, 5.0), st.floats(0.1, 5.0), st.floats(0.1, 3.0), st.floats(0.1, 3.0))
def test_mixture_mean(l1, l2, m1, m2):
    a, b = poisson_counts(m1, 1.0), poisson_counts(m2, 1.0)
    mix = mixture_counts([(l1, a), (l2, b)])
    expected = (l1 * a.mean() + l2 * b.mean()) / (l1 + l2)
    assert mix.mean() == pytest.approx(expected, abs=1e-9)
    assert mix.total() == pytest.approx(1.0, abs=1e-9)


def test_mixture_empty():
    with pytest.raises(ValueError):
        mixture_counts([])


def test_arrival_counts_binned_is_rate_weighted():
    q = QueueSpec(1, Exponential(1.0), Binned([(2 / 3, 0.5), (4 / 3, 0.5)]))
    assert arrival_counts(q).probs[0] == pytest.approx((math.exp(-2 / 3) + math.exp(-4 / 3)) / 2)


def test_arrival_counts_applies_outage():
    q = QueueSpec(1, Exponential(2.0), Deterministic(1.0), p_o=0.5)
    assert arrival_counts(q).probs[0] == pytest.approx(math.exp(-1), abs=1e-12)


def test_bin_degenerate_cdf():
    for bins in (1, 3, 10):
        assert bin_service_distribution([(1.0, 1.0)], bins).bins == ((1.0, 1.0),)


def test_bin_uniform():
    cdf = [(0.0, 0.0), (2.0, 1.0)]
    two = bin_service_distribution(cdf, 2).bins
    np.testing.assert_allclose(two, [(0.5, 0.5), (1.5, 0.5)], atol=1e-12)
    np.testing.assert_allclose(bin_service_distribution(cdf, 1).bins, [(1.0, 1.0)], atol=1e-12)


def test_bin_mixed_atom_and_continuous():
    # half the mass at 1, half uniform on [2, 4]
    cdf = [(1.0, 0.5), (2.0, 0.5), (4.0, 1.0)]
    np.testing.assert_allclose(bin_service_distribution(cdf, 2).bins, [(1.0, 0.5), (3.0, 0.5)])
    four = bin_service_distribution(cdf, 4).bins
    np.testing.assert_allclose(four, [(1.0, 0.5), (2.5, 0.25), (3.5, 0.25)])


def test_bin_rejects_non_monotone():
    with pytest.raises(ValueError):
        bin_service_distribution([(0.0, 0.0), (1.0, 0.7), (2.0, 0.6), (3.0, 1.0)], 2)


def test_countpmf_validation():
    with pytest.raises(ValueError):
        CountPmf(np.array([0.5, -0.5]))
