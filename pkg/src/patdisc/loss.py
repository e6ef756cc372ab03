"""Block and individual loss functionals, empirical risks and empirical metrics.

Two call shapes of scoring function are used:

* block scorers ``f(X, U) -> float`` see the whole observation set ``X``;
* individual scorers ``f(U) -> float`` see only the candidate subset.

Positive and negative local losses for the individual problem are fixed to
``1 - f(U)`` and ``f(U)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

from .core import (
    DEFAULT_CAP,
    PatternCollection,
    PatternError,
    SubsetFamily,
    enumerate_nonempty_subsets,
    is_within_pattern,
    maximal_selector,
    negative_selector,
    posneg_selector,
)

BlockScorer = Callable[[frozenset, frozenset], float]
IndividualScorer = Callable[[frozenset], float]

SELECTORS = {"maximal": maximal_selector, "posneg": posneg_selector}


@dataclass(frozen=True)
class BlockLossConfig:
    selector: str = "posneg"
    cap: int = DEFAULT_CAP

    def __post_init__(self):
        if self.selector not in SELECTORS:
            raise ValueError(f"unknown selector {self.selector!r}")
        if self.cap < 1:
            raise ValueError("cap must be >= 1")

    def select(self, Q: PatternCollection) -> SubsetFamily:
        return SELECTORS[self.selector](Q, self.cap)


@dataclass(frozen=True)
class IndividualLossConfig:
    alpha: float = 0.5
    cap: int = DEFAULT_CAP

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must satisfy 0 < alpha < 1, got {self.alpha}")
        if self.cap < 1:
            raise ValueError("cap must be >= 1")


def zero_block(X, U) -> float:
    return 0.0


def zero_individual(U) -> float:
    return 0.0


def local_loss_sp(f: BlockScorer, U: Iterable[str], Q: PatternCollection) -> float:
    U = frozenset(U)
    X = Q.X
    if not U or not U <= X:
        raise PatternError(f"subset {sorted(U)} is not a non-empty subset of X_Q")
    indicator = 1.0 if is_within_pattern(U, Q) else 0.0
    return abs(indicator - float(f(X, U)))


def block_loss(f: BlockScorer, Q: PatternCollection, cfg: BlockLossConfig = BlockLossConfig()) -> float:
    family = cfg.select(Q)
    sq = math.fsum(local_loss_sp(f, U, Q) ** 2 for U in family)
    return math.sqrt(sq / len(family))


def block_empirical_risk(
    f: BlockScorer, blocks: Sequence[PatternCollection], cfg: BlockLossConfig = BlockLossConfig()
) -> float:
    if not blocks:
        raise ValueError("need at least one block")
    return math.fsum(block_loss(f, Q, cfg) for Q in blocks) / len(blocks)


def individual_loss(
    f: IndividualScorer,
    P: Iterable[str],
    X: Iterable[str],
    cfg: IndividualLossConfig = IndividualLossConfig(),
) -> float:
    P = frozenset(P)
    X = frozenset(X)
    if not P <= X:
        raise PatternError(f"pattern not contained in X: {sorted(P - X)}")
    pos = enumerate_nonempty_subsets(P, cfg.cap)
    neg = negative_selector(P, X, cfg.cap)
    value = cfg.alpha * (math.fsum(1.0 - float(f(U)) for U in pos) / len(pos))
    if len(neg):
        # empty negatives (P == X) contribute nothing
        value += (1.0 - cfg.alpha) * (math.fsum(float(f(U)) for U in neg) / len(neg))
    return value


def individual_losses(
    f: IndividualScorer, Q: PatternCollection, cfg: IndividualLossConfig = IndividualLossConfig()
) -> list[float]:
    """Per-pattern losses, in the collection's pattern order."""
    X = Q.X
    return [individual_loss(f, P, X, cfg) for P in Q.patterns]


def individual_empirical_risk(
    f: IndividualScorer, Q: PatternCollection, cfg: IndividualLossConfig = IndividualLossConfig()
) -> float:
    losses = individual_losses(f, Q, cfg)
    return math.fsum(losses) / len(losses)


def shifted_individual_loss(
    f: IndividualScorer,
    P: Iterable[str],
    X: Iterable[str],
    cfg: IndividualLossConfig = IndividualLossConfig(),
) -> float:
    return individual_loss(f, P, X, cfg) - individual_loss(zero_individual, P, X, cfg)


def metric_dn(values1: Sequence[float], values2: Sequence[float]) -> float:
    """Empirical L2 distance between two loss sequences evaluated on the same blocks."""
    if len(values1) != len(values2):
        raise ValueError(f"length mismatch: {len(values1)} vs {len(values2)}")
    if not values1:
        raise ValueError("need at least one value")
    sq = math.fsum((a - b) ** 2 for a, b in zip(values1, values2))
    return math.sqrt(sq / len(values1))


def block_sq_distance(f1: BlockScorer, f2: BlockScorer, Q: PatternCollection, cfg: BlockLossConfig) -> float:
    """Squared per-collection function metric over the selected subsets."""
    X = Q.X
    family = cfg.select(Q)
    return math.fsum((float(f1(X, U)) - float(f2(X, U))) ** 2 for U in family) / len(family)


def metric_ln(
    f1: BlockScorer,
    f2: BlockScorer,
    blocks: Sequence[PatternCollection],
    cfg: BlockLossConfig = BlockLossConfig(),
) -> float:
    if not blocks:
        raise ValueError("need at least one block")
    sq = math.fsum(block_sq_distance(f1, f2, Q, cfg) for Q in blocks)
    return math.sqrt(sq / len(blocks))
