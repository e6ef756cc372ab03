import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from patdisc.core import PatternCollection, PatternError, is_within_pattern
from patdisc.loss import (
    BlockLossConfig,
    IndividualLossConfig,
    block_empirical_risk,
    block_loss,
    individual_empirical_risk,
    individual_loss,
    local_loss_sp,
    metric_dn,
    metric_ln,
    shifted_individual_loss,
)

import oracles

MAXIMAL = BlockLossConfig("maximal")
POSNEG = BlockLossConfig("posneg")


def coll(*patterns):
    return PatternCollection.from_ids(patterns)


def const(c):
    return lambda *args: c


def perfect_block(Q):
    return lambda X, U: 1.0 if frozenset(U) <= frozenset(X) and is_within_pattern(U, Q) else 0.0


def step_f(X, U):
    return 0.8 if len(U) <= 1 else 0.2


class TestLocalLoss:
    def test_inside(self):
        assert local_loss_sp(const(0.3), {"a"}, coll("ab")) == pytest.approx(0.7)

    def test_straddle(self):
        assert local_loss_sp(const(0.3), {"a", "c"}, coll("ab", "c")) == pytest.approx(0.3)

    def test_perfect(self):
        Q = coll("ab", "cd", "e")
        f = perfect_block(Q)
        assert all(local_loss_sp(f, U, Q) == 0 for U in oracles.bitmask_subsets(Q.X))

    def test_outside_x(self):
        with pytest.raises(PatternError):
            local_loss_sp(const(0.3), {"z"}, coll("ab"))


class TestBlockLoss:
    @pytest.mark.parametrize("cfg", [MAXIMAL, POSNEG])
    def test_half(self, cfg):
        assert block_loss(const(0.5), coll("ab", "c", "de"), cfg) == 0.5

    @pytest.mark.parametrize("cfg", [MAXIMAL, POSNEG])
    def test_perfect(self, cfg):
        Q = coll("abc", "d")
        assert block_loss(perfect_block(Q), Q, cfg) == 0.0

    def test_step_function(self):
        patterns = [frozenset("ab"), frozenset("c")]
        expected = oracles.block_loss(step_f, patterns)
        assert expected == pytest.approx(math.sqrt((6 * 0.04 + 0.64) / 7), abs=1e-15)
        assert block_loss(step_f, coll("ab", "c"), MAXIMAL) == pytest.approx(expected, abs=1e-12)
        assert expected == pytest.approx(0.35456, abs=5e-6)

    def test_empirical_risk(self):
        Q1, Q2 = coll("ab", "c"), coll("ab", "c")
        one = block_empirical_risk(const(0.5), [Q1], MAXIMAL)
        assert one == 0.5
        # a perfect predictor on the first block and the step function on the second
        f = lambda X, U: 1.0 if len(X) == 2 and len(U) == 1 else step_f(X, U)
        Q1 = coll("a", "b")
        mixed = block_empirical_risk(f, [Q1, Q2], MAXIMAL)
        expected = (oracles.block_loss(f, [frozenset("a"), frozenset("b")]) + oracles.block_loss(f, [frozenset("ab"), frozenset("c")])) / 2
        assert mixed == pytest.approx(expected, abs=1e-12)

    def test_empirical_risk_two_blocks(self):
        Q0 = coll("ab", "c")
        f = perfect_block(Q0)
        zero_loss = block_loss(f, Q0, MAXIMAL)
        step_loss = block_loss(step_f, Q0, MAXIMAL)
        assert zero_loss == 0.0
        assert (zero_loss + step_loss) / 2 == pytest.approx(0.17728, abs=5e-6)

    def test_empirical_risk_perfect(self):
        blocks = [coll("ab", "c"), coll("a", "bcd")]
        scorers = {id(Q): perfect_block(Q) for Q in blocks}
        f = lambda X, U: next(scorers[id(Q)] for Q in blocks if Q.X == X)(X, U)
        assert block_empirical_risk(f, blocks, MAXIMAL) == 0.0

    def test_cap_propagates(self):
        with pytest.raises(ValueError):
            block_loss(const(0.5), coll("abcde"), BlockLossConfig("maximal", cap=10))


class TestIndividualLoss:
    cfg = IndividualLossConfig(0.5)

    def test_zero(self):
        assert individual_loss(const(0.0), "ab", "abcd", self.cfg) == 0.5

    def test_one(self):
        assert individual_loss(const(1.0), "ab", "abcd", self.cfg) == 0.5

    @pytest.mark.parametrize("alpha", [0.1, 0.5, 0.9])
    def test_perfect(self, alpha):
        f = lambda U: 1.0 if frozenset(U) <= set("ab") else 0.0
        cfg = IndividualLossConfig(alpha)
        assert oracles.individual_loss(f, "ab", "abc", alpha) == 0.0
        assert individual_loss(f, "ab", "abc", cfg) == 0.0

    def test_empty_negatives(self):
        assert individual_loss(const(0.0), "ab", "ab", IndividualLossConfig(0.3)) == pytest.approx(0.3)

    def test_not_subset(self):
        with pytest.raises(PatternError):
            individual_loss(const(0.0), "az", "ab", self.cfg)

    @pytest.mark.parametrize("alpha", [0.0, 1.0, -0.1, 1.5])
    def test_alpha_open_interval(self, alpha):
        with pytest.raises(ValueError):
            IndividualLossConfig(alpha)

    def test_empirical_risk_zero(self):
        assert individual_empirical_risk(const(0.0), coll("ab", "c", "de"), self.cfg) == 0.5

    def test_empirical_risk_perfect(self):
        Q = coll("ab", "c", "def")
        f = lambda U: 1.0 if is_within_pattern(U, Q) else 0.0
        assert individual_empirical_risk(f, Q, self.cfg) == 0.0

    def test_empirical_risk_half(self):
        expected = oracles.individual_risk(const(0.5), [frozenset("ab"), frozenset("c")], 0.5)
        assert expected == 0.5
        assert individual_empirical_risk(const(0.5), coll("ab", "c"), self.cfg) == pytest.approx(expected, abs=1e-12)


class TestShifted:
    cfg = IndividualLossConfig(0.5)

    def test_self(self):
        assert shifted_individual_loss(const(0.0), "ab", "abc", self.cfg) == 0.0

    def test_ones(self):
        full = oracles.individual_loss(const(1.0), "ab", "abc", 0.5)
        zero = oracles.individual_loss(const(0.0), "ab", "abc", 0.5)
        assert full - zero == 0.0
        assert shifted_individual_loss(const(1.0), "ab", "abc", self.cfg) == 0.0

    def test_perfect(self):
        f = lambda U: 1.0 if frozenset(U) <= set("ab") else 0.0
        expected = oracles.individual_loss(f, "ab", "abc", 0.5) - oracles.individual_loss(const(0.0), "ab", "abc", 0.5)
        assert expected == -0.5
        assert shifted_individual_loss(f, "ab", "abc", self.cfg) == -0.5


class TestMetrics:
    def test_dn_identical(self):
        assert metric_dn([0.1, 0.5], [0.1, 0.5]) == 0.0

    def test_dn_simple(self):
        assert metric_dn([1, 0], [0, 0]) == pytest.approx(math.sqrt(0.5))

    def test_dn_three(self):
        assert metric_dn([0.2, 0.4, 0.6], [0.2, 0.1, 0.6]) == pytest.approx(math.sqrt(0.09 / 3), abs=1e-12)
        assert metric_dn([0.2, 0.4, 0.6], [0.2, 0.1, 0.6]) == pytest.approx(0.17321, abs=5e-6)

    def test_dn_mismatch(self):
        with pytest.raises(ValueError):
            metric_dn([1.0], [1.0, 2.0])

    def test_ln_same(self):
        assert metric_ln(step_f, step_f, [coll("ab", "c")], MAXIMAL) == 0.0

    def test_ln_one(self):
        assert metric_ln(const(1.0), const(0.0), [coll("ab", "c")], MAXIMAL) == 1.0

    def test_ln_constant_gap(self):
        blocks = [coll("ab", "c"), coll("a", "bcd", "e")]
        assert metric_ln(const(0.8), const(0.2), blocks, POSNEG) == pytest.approx(0.6, abs=1e-12)


def test_oracle_equivalence_random():
    rng = np.random.default_rng(7)
    for _ in range(60):
        patterns = oracles.random_partition(rng)
        Q = PatternCollection.from_ids(patterns)
        f = oracles.MemoScorer(rng)
        alpha = float(rng.uniform(0.05, 0.95))
        for sel, cfg in (("maximal", MAXIMAL), ("posneg", POSNEG)):
            assert block_loss(f.block, Q, cfg) == pytest.approx(oracles.block_loss(f.block, patterns, sel), abs=1e-12)
        assert individual_empirical_risk(f, Q, IndividualLossConfig(alpha)) == pytest.approx(
            oracles.individual_risk(f, patterns, alpha), abs=1e-12
        )


@given(st.floats(0.01, 0.99), st.integers(0, 2**31))
@settings(max_examples=40, deadline=None)
def test_losses_in_unit_interval(alpha, seed):
    rng = np.random.default_rng(seed)
    patterns = oracles.random_partition(rng, max_points=7)
    Q = PatternCollection.from_ids(patterns)
    f = oracles.MemoScorer(rng)
    assert 0.0 <= block_loss(f.block, Q, POSNEG) <= 1.0
    X = Q.X
    for P in Q.patterns:
        assert 0.0 <= individual_loss(f, P, X, IndividualLossConfig(alpha)) <= 1.0


@given(st.integers(0, 2**31))
@settings(max_examples=40, deadline=None)
def test_dn_of_losses_below_ln(seed):
    rng = np.random.default_rng(seed)
    blocks = [PatternCollection.from_ids(oracles.random_partition(rng, max_points=6)) for _ in range(3)]
    f1, f2 = oracles.MemoScorer(rng), oracles.MemoScorer(rng)
    for cfg in (MAXIMAL, POSNEG):
        g1 = [block_loss(f1.block, Q, cfg) for Q in blocks]
        g2 = [block_loss(f2.block, Q, cfg) for Q in blocks]
        assert metric_dn(g1, g2) <= metric_ln(f1.block, f2.block, blocks, cfg) + 1e-12


def test_zero_function_gives_alpha():
    for alpha in (0.1, 0.37, 0.5, 0.9):
        assert individual_loss(const(0.0), "ab", "abcde", IndividualLossConfig(alpha)) == alpha


def test_alpha_monotone_for_zero_function():
    alphas = np.linspace(0.05, 0.95, 19)
    values = [individual_loss(const(0.0), "abc", "abcdef", IndividualLossConfig(a)) for a in alphas]
    assert all(b > a for a, b in zip(values, values[1:]))
