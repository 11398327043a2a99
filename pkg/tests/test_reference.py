import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from lossq.dist import Discrete
from lossq.errors import InfeasibleAnalysisError
from lossq.reference import brute_force_counts, erlang_b, erlang_b_direct


def test_erlang_b_small_cases():
    assert erlang_b(1, 1.0) == pytest.approx(0.5)
    # rho^2/2 / (1 + rho + rho^2/2) at rho = 1.25
    assert erlang_b(2, 1.25) == pytest.approx(0.78125 / 3.03125, abs=1e-12)
    assert erlang_b(2, 1.25) == pytest.approx(0.257732, abs=1e-6)
    assert erlang_b(0, 3.0) == 1.0
    assert erlang_b(4, 0.0) == 0.0


@given(st.integers(0, 50), st.floats(0.0, 100.0))
def test_recurrence_matches_direct_sum(n, rho):
    assert erlang_b(n, rho) == pytest.approx(erlang_b_direct(n, rho), rel=1e-10, abs=1e-300)


def test_erlang_b_monotone():
    rhos = np.linspace(0.0, 10.0, 41)
    for n in (1, 2, 5, 10):
        values = [erlang_b(n, r) for r in rhos]
        assert np.all(np.diff(values) >= 0)
    for rho in (0.5, 2.0, 8.0):
        values = [erlang_b(n, rho) for n in range(20)]
        assert np.all(np.diff(values) <= 0)


def test_erlang_b_rejects_negative():
    with pytest.raises(ValueError):
        erlang_b(2, -1.0)


def test_brute_force_single_atom():
    assert list(brute_force_counts(Discrete([(1.0, 1.0)]), 3.5).probs) == [0, 0, 0, 1]
    assert list(brute_force_counts(Discrete([(1.0, 1.0)]), 0.5).probs) == [1.0]


def test_brute_force_two_atoms():
    pmf = brute_force_counts(Discrete([(1.0, 0.5), (3.0, 0.5)]), 2.0)
    # B_1 = P(t1 <= 2) = 1/2, B_2 = P(t1 + t2 <= 2) = 1/4
    np.testing.assert_allclose(pmf.probs, [0.5, 0.25, 0.25])


def test_brute_force_limits():
    tiny = Discrete([(0.01, 0.5), (0.02, 0.5)])
    with pytest.raises(InfeasibleAnalysisError):
        brute_force_counts(tiny, 1.0)
    with pytest.raises(InfeasibleAnalysisError):
        brute_force_counts(tiny, 1.0, depth_cap=12)
