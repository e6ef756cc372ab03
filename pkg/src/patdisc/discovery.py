"""Greedy pattern growth from a seed, a multi-seed driver, and evaluation."""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .core import Observation, PatternCollection, PatternError
from .model import ScoringModel


@dataclass(frozen=True)
class GrowthTrace:
    seed: frozenset[str]
    steps: tuple[tuple[str, float], ...]
    final_pattern: frozenset[str]
    stop_reason: str
    seed_score: float

    def to_dict(self) -> dict:
        return {
            "seed": sorted(self.seed),
            "steps": [{"added": a, "score": s} for a, s in self.steps],
            "final": sorted(self.final_pattern),
            "stop_reason": self.stop_reason,
        }


def _batch_scorer(model, data) -> Callable[[Sequence[frozenset]], np.ndarray]:
    if isinstance(model, ScoringModel):
        return lambda subsets: model.score_many(subsets, data)
    return lambda subsets: np.array([float(model(U)) for U in subsets])


def grow_pattern(
    model: ScoringModel | Callable[[frozenset], float],
    X: Iterable[str],
    seed: Iterable[str],
    data: Mapping[str, Observation] | None = None,
    *,
    max_size: int | None = None,
    theta: float | None = None,
) -> GrowthTrace:
    """Add the best-scoring observation while the augmented set scores above theta.

    ``model`` is a :class:`ScoringModel` (threshold taken from the model unless
    ``theta`` overrides it) or a plain scorer ``f(U)`` with explicit ``theta``.
    Stops when the best candidate fails the threshold, no candidates remain,
    or the pattern reaches ``max_size``. Ties go to the smallest id.
    """
    X = frozenset(X)
    current = frozenset(seed)
    if not current:
        raise PatternError("seed must be non-empty")
    if not current <= X:
        raise PatternError(f"seed ids not in X: {sorted(current - X)}")
    if theta is None:
        if not isinstance(model, ScoringModel):
            raise ValueError("theta is required for a plain scoring function")
        theta = model.theta
    max_size = len(X) if max_size is None else max_size
    score_batch = _batch_scorer(model, data)
    seed_score = float(score_batch([current])[0])
    steps: list[tuple[str, float]] = []
    while True:
        candidates = sorted(X - current)
        if not candidates:
            reason = "exhausted"
            break
        if len(current) >= max_size:
            reason = "max_size"
            break
        scores = score_batch([current | {x} for x in candidates])
        best = int(np.argmax(scores))  # first maximum is the smallest id
        if not scores[best] > theta:
            reason = "threshold"
            break
        current = current | {candidates[best]}
        steps.append((candidates[best], float(scores[best])))
    return GrowthTrace(frozenset(seed), tuple(steps), current, reason, seed_score)


def discover_all(
    model: ScoringModel | Callable[[frozenset], float],
    X: Iterable[str],
    data: Mapping[str, Observation] | None = None,
    *,
    max_size: int | None = None,
    theta: float | None = None,
) -> list[GrowthTrace]:
    """Grow from every not-yet-covered singleton in id order (greedy cover).

    Growth from a seed only considers observations not already claimed by an
    accepted pattern, so accepted patterns are disjoint. A trace is accepted
    when it grew to size >= 2 or its singleton seed scores above theta.
    """
    X = frozenset(X)
    if not X:
        raise PatternError("X must be non-empty")
    if theta is None:
        theta = model.theta
    covered: set[str] = set()
    accepted = []
    for x in sorted(X):
        if x in covered:
            continue
        trace = grow_pattern(model, X - covered, [x], data, max_size=max_size, theta=theta)
        if len(trace.final_pattern) >= 2 or trace.seed_score > theta:
            accepted.append(trace)
            covered |= trace.final_pattern
    return accepted


def _pairs(patterns: Iterable[Iterable[str]]) -> set[frozenset[str]]:
    return {frozenset(p) for P in patterns for p in combinations(sorted(P), 2)}


def evaluate(predicted: Sequence[Iterable[str]], truth: PatternCollection) -> dict:
    """Exact-match rate over true non-singleton patterns and pairwise P/R/F1.

    Precision with no predicted pairs is 1, recall with no true pairs is 1.
    """
    predicted = [frozenset(p) for p in predicted]
    X = truth.X
    unknown = set().union(*predicted) - X if predicted else set()
    if unknown:
        raise PatternError(f"predicted ids not in truth: {sorted(unknown)}")
    targets = [P for P in truth.patterns if len(P) >= 2]
    pred_set = set(predicted)
    exact = sum(P in pred_set for P in targets) / len(targets) if targets else 1.0
    true_pairs, pred_pairs = _pairs(targets), _pairs(predicted)
    hit = len(true_pairs & pred_pairs)
    precision = hit / len(pred_pairs) if pred_pairs else 1.0
    recall = hit / len(true_pairs) if true_pairs else 1.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return {
        "exact_match_rate": exact,
        "pairwise_precision": precision,
        "pairwise_recall": recall,
        "pairwise_f1": f1,
        "n_true_patterns": len(targets),
        "n_predicted": len(predicted),
    }
