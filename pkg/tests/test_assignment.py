from __future__ import annotations

from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tiebreak import (
    AssignmentRule,
    HeterogeneousStratum,
    NonIntegerBudget,
    probabilities_from_scores,
    quantile_cutoffs,
    rule_probabilities,
    sample_assignment,
    stratified_assignment,
)

S5 = np.array([-3.0, -1.0, 0.0, 1.0, 3.0])
ETA1 = np.array([1.0])


def test_threshold_examples():
    X = S5[:, None]
    np.testing.assert_array_equal(rule_probabilities(AssignmentRule.threshold(ETA1, 2.0), X),
                                  [0, 0.5, 0.5, 0.5, 1])
    np.testing.assert_array_equal(rule_probabilities(AssignmentRule.threshold(ETA1, 0.0), X),
                                  [0, 0, 1, 1, 1])


def test_threshold_boundaries_inclusive():
    p = probabilities_from_scores(AssignmentRule.threshold(ETA1, 1.0), [-1.0, 1.0, 0.999])
    np.testing.assert_array_equal(p, [0, 1, 0.5])


def test_quantile_example():
    X = np.array([[1.0], [2.0], [3.0], [4.0]])
    np.testing.assert_array_equal(rule_probabilities(AssignmentRule.quantile(ETA1, 0.25), X), [0, 0.5, 0.5, 1])


def test_quantile_extremes():
    s = np.arange(10.0)
    assert np.all(probabilities_from_scores(AssignmentRule.quantile(ETA1, 0.5), s) == 0.5)
    lo, hi = quantile_cutoffs(s, 0.0)
    assert lo <= hi


def test_general_mid():
    p = probabilities_from_scores(AssignmentRule.general_mid(ETA1, 2.0, 0.2), S5)
    np.testing.assert_array_equal(p, [0, 0.2, 0.2, 0.2, 1])


def test_rule_validation():
    with pytest.raises(ValueError):
        AssignmentRule.threshold(ETA1, -1.0)
    with pytest.raises(ValueError):
        AssignmentRule.quantile(ETA1, 0.6)
    with pytest.raises(ValueError):
        AssignmentRule.general_mid(ETA1, 1.0, 1.5)
    with pytest.raises(ValueError):
        rule_probabilities(AssignmentRule.threshold(np.zeros(1), 1.0), S5[:, None])


scores = st.lists(st.integers(-20, 20).map(float), min_size=1, max_size=60)


@settings(max_examples=100, deadline=None)
@given(s=scores, delta=st.floats(0, 25), dq=st.floats(0, 0.5), mid=st.floats(0, 1))
def test_rules_monotone_and_tie_consistent(s, delta, dq, mid):
    s = np.array(s)
    order = np.argsort(s, kind="stable")
    for rule in (AssignmentRule.threshold(ETA1, delta), AssignmentRule.quantile(ETA1, dq),
                 AssignmentRule.general_mid(ETA1, delta, mid)):
        p = probabilities_from_scores(rule, s)
        assert np.all(np.diff(p[order]) >= 0)
        for v in np.unique(s):
            assert np.ptp(p[s == v]) == 0


@settings(max_examples=100, deadline=None)
@given(n=st.integers(1, 200), dq=st.floats(0, 0.5), seed=st.integers(0, 1000))
def test_quantile_symmetric_fractions(n, dq, seed):
    s = np.random.default_rng(seed).permutation(n).astype(float)
    p = probabilities_from_scores(AssignmentRule.quantile(ETA1, dq), s)
    # the median subject goes to treatment when the band collapses on an odd n
    assert 0 <= (p == 1).sum() - (p == 0).sum() <= 1


def test_sample_assignment_deterministic_rows_and_reproducible():
    p = np.array([1.0, 0.0, 0.5, 0.3] * 50)
    z = sample_assignment(p, 7)
    assert np.all(z[p == 1] == 1) and np.all(z[p == 0] == -1)
    assert set(np.unique(z)) <= {-1, 1}
    np.testing.assert_array_equal(z, sample_assignment(p, 7))
    assert not np.array_equal(z, sample_assignment(p, 8))


def test_sample_assignment_prefix_independent():
    p = np.full(1000, 0.5)
    np.testing.assert_array_equal(sample_assignment(p, 3)[:100], sample_assignment(p[:100], 3))


def test_sample_assignment_balance():
    z = sample_assignment(np.full(10**5, 0.5), 11)
    assert abs(z.mean()) < 0.02


def test_sample_assignment_marginal():
    p = np.full(10**5, 0.3)
    assert abs((sample_assignment(p, 2) == 1).mean() - 0.3) < 0.01


def test_stratified_examples():
    z = stratified_assignment(np.full(4, 0.5), [0, 0, 0, 0], seed=1)
    assert (z == 1).sum() == 2
    with pytest.raises(NonIntegerBudget):
        stratified_assignment(np.full(5, 0.3), [0] * 5, seed=1)
    p = np.array([0.25] * 4 + [1.0] * 2)
    z = stratified_assignment(p, ["a"] * 4 + ["b"] * 2, seed=3)
    assert (z[:4] == 1).sum() == 1 and (z[4:] == 1).sum() == 2
    with pytest.raises(HeterogeneousStratum):
        stratified_assignment(np.array([0.5, 0.25]), [0, 0], seed=1)


def test_stratified_subsets_uniform():
    counts = Counter(tuple(stratified_assignment(np.full(4, 0.5), [0] * 4, seed=s)) for s in range(6000))
    assert len(counts) == 6
    freq = np.array(list(counts.values())) / 6000
    assert np.all(np.abs(freq - 1 / 6) < 0.025)
