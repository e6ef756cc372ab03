"""Quasi-Rademacher and Rademacher estimators, greedy covering numbers, and
closed-form generalization-bound calculators.

All standalone logarithms are natural; the pattern-size cutoff for geometric
tails only uses a ratio of logarithms, which is base-free.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from . import loss as L
from .core import PatternCollection
from .loss import BlockLossConfig, IndividualLossConfig
from .model import FeatureConfig, IndividualDesign, ScoringModel

EXHAUSTIVE_LIMIT = 4096
DEFAULT_DRAWS = 1000
DUDLEY_GRID = np.geomspace(1e-3, 1.0, 32)


class ConditionViolated(ValueError):
    """A theorem hypothesis does not hold for the supplied parameters."""


@dataclass(frozen=True)
class SignDraws:
    draws: np.ndarray
    rng_seed: int | None = None
    exhaustive: bool = False

    def __post_init__(self):
        d = np.asarray(self.draws, dtype=np.int8)
        if d.ndim != 2 or not np.all((d == 1) | (d == -1)):
            raise ValueError("sign draws must be a K x n matrix of +-1")
        object.__setattr__(self, "draws", d)

    @property
    def n(self) -> int:
        return self.draws.shape[1]

    def __len__(self) -> int:
        return self.draws.shape[0]


def make_sign_draws(n: int, k: int = DEFAULT_DRAWS, rng_seed: int = 0, exhaustive: bool | None = None) -> SignDraws:
    """K random sign vectors, or all 2**n of them (default when 2**n <= 4096)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if exhaustive is None:
        exhaustive = 2**n <= EXHAUSTIVE_LIMIT
    if exhaustive:
        rows = np.arange(2**n)[:, None]
        bits = (rows >> np.arange(n)[None, :]) & 1
        return SignDraws(1 - 2 * bits, rng_seed, True)
    rng = np.random.default_rng(rng_seed)
    return SignDraws(rng.choice(np.array([-1, 1], dtype=np.int8), size=(k, n)), rng_seed, False)


def _map(fn, items, threads: int):
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def pattern_loss_vector(
    f,
    Q: PatternCollection,
    cfg: IndividualLossConfig = IndividualLossConfig(),
    *,
    shifted: bool = True,
    _designs: dict | None = None,
) -> np.ndarray:
    """Per-pattern individual losses of ``f`` (optionally minus those of the zero function).

    ``f`` is a :class:`ScoringModel` (evaluated on ``Q``'s observation table)
    or an individual scorer ``f(U)``.
    """
    if isinstance(f, ScoringModel):
        designs = {} if _designs is None else _designs
        design = designs.get(f.feature_config)
        if design is None:
            design = designs[f.feature_config] = IndividualDesign(Q, cfg, f.feature_config)
        vals = design.pattern_losses(f.params)
    else:
        vals = np.array(L.individual_losses(f, Q, cfg))
    if shifted:
        vals = vals - np.array(L.individual_losses(L.zero_individual, Q, cfg))
    return vals


def loss_matrix(candidates, Q, cfg, *, shifted=True, threads=1) -> np.ndarray:
    designs: dict[FeatureConfig, IndividualDesign] = {}
    for f in candidates:
        if isinstance(f, ScoringModel) and f.feature_config not in designs:
            designs[f.feature_config] = IndividualDesign(Q, cfg, f.feature_config)
    rows = _map(lambda f: pattern_loss_vector(f, Q, cfg, shifted=shifted, _designs=designs), candidates, threads)
    return np.vstack(rows)


def _check_width(draws: SignDraws, n: int):
    if draws.n != n:
        raise ValueError(f"sign draws have width {draws.n}, need {n}")


def quasi_rademacher_single(
    f,
    Q: PatternCollection,
    cfg: IndividualLossConfig,
    draws: SignDraws,
    *,
    absolute: bool = False,
    shifted: bool = True,
) -> float:
    """Average over sign vectors of ``n^-1 sum_i eps_i * loss_i`` for one function."""
    c = pattern_loss_vector(f, Q, cfg, shifted=shifted)
    _check_width(draws, len(c))
    vals = draws.draws @ c / len(c)
    return float(np.mean(np.abs(vals)) if absolute else np.mean(vals))


def _sup_mean(losses: np.ndarray, draws: SignDraws) -> float:
    _check_width(draws, losses.shape[1])
    vals = np.abs(draws.draws @ losses.T) / losses.shape[1]
    return float(vals.max(axis=1).mean())


def quasi_rademacher_class(
    candidates: Sequence,
    Q: PatternCollection,
    cfg: IndividualLossConfig,
    draws: SignDraws,
    *,
    shifted: bool = True,
    threads: int = 1,
) -> float:
    """Average over sign vectors of the largest ``|n^-1 sum_i eps_i * loss_i|``
    over a finite candidate set standing in for the function class."""
    if not candidates:
        raise ValueError("need at least one candidate")
    return _sup_mean(loss_matrix(candidates, Q, cfg, shifted=shifted, threads=threads), draws)


def random_models(count: int, feature_config: FeatureConfig, rng_seed: int = 0, spread: float = 5.0) -> list[ScoringModel]:
    rng = np.random.default_rng(rng_seed)
    return [
        ScoringModel.from_params(rng.uniform(-spread, spread, 5), feature_config=feature_config)
        for _ in range(count)
    ]


def default_candidates(trained: ScoringModel, count: int = 20, rng_seed: int = 0) -> list:
    """``count`` random models, the trained model and the zero function."""
    return random_models(count, trained.feature_config, rng_seed) + [trained, L.zero_individual]


def _as_block_scorer(f, Q: PatternCollection):
    return f.block_scorer(Q.observations) if isinstance(f, ScoringModel) else f


def block_loss_matrix(candidates, blocks, cfg: BlockLossConfig, *, shifted=True, threads=1) -> np.ndarray:
    base = np.array([L.block_loss(L.zero_block, Q, cfg) for Q in blocks]) if shifted else 0.0

    def row(f):
        return np.array([L.block_loss(_as_block_scorer(f, Q), Q, cfg) for Q in blocks]) - base

    return np.vstack(_map(row, candidates, threads))


def empirical_rademacher_block(
    candidates: Sequence,
    blocks: Sequence[PatternCollection],
    cfg: BlockLossConfig,
    draws: SignDraws,
    *,
    threads: int = 1,
) -> float:
    """Empirical Rademacher complexity of the shifted block-loss class over independent blocks."""
    if not candidates:
        raise ValueError("need at least one candidate")
    return _sup_mean(block_loss_matrix(candidates, blocks, cfg, threads=threads), draws)


def _check_finite(d: float) -> float:
    if not math.isfinite(d):
        raise ValueError(f"non-finite distance {d}")
    return d


def greedy_net(points: Sequence, distance: Callable, eps: float) -> list[int]:
    """Indices of greedy centers: the first uncovered point (in input order)
    becomes a center and covers everything strictly within ``eps``."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    if not len(points):
        raise ValueError("need at least one point")
    uncovered = list(range(len(points)))
    centers = []
    while uncovered:
        c = uncovered[0]
        centers.append(c)
        uncovered = [i for i in uncovered[1:] if not _check_finite(distance(points[c], points[i])) < eps]
    return centers


def covering_number(points: Sequence, distance: Callable, eps: float) -> int:
    """Greedy upper bound on the eps-covering number."""
    return len(greedy_net(points, distance, eps))


def covering_number_matrix(dist: np.ndarray, eps: float) -> int:
    """Greedy covering number from a precomputed distance matrix."""
    dist = np.asarray(dist, dtype=float)
    if not np.all(np.isfinite(dist)):
        raise ValueError("non-finite distances")
    return covering_number(range(len(dist)), lambda i, j: dist[i, j], eps)


def loss_distance_matrix(losses: np.ndarray) -> np.ndarray:
    """Pairwise empirical L2 distances between rows of loss values."""
    diff = losses[:, None, :] - losses[None, :, :]
    return np.sqrt(np.mean(diff**2, axis=2))


def function_distance_matrix(candidates, blocks, cfg: BlockLossConfig) -> np.ndarray:
    """Pairwise block-averaged function metric between candidates."""
    m = len(candidates)
    sq = np.zeros((m, m))
    for Q in blocks:
        X = Q.X
        family = cfg.select(Q)
        scores = np.array(
            [[float(_as_block_scorer(f, Q)(X, U)) for U in family] for f in candidates]
        )
        diff = scores[:, None, :] - scores[None, :, :]
        sq += np.mean(diff**2, axis=2)
    return np.sqrt(sq / len(blocks))


@dataclass
class BoundReport:
    formula: str
    inputs: dict
    constants: dict = field(default_factory=dict)
    complexity_term: float = 0.0
    concentration_term: float = 0.0
    rhs: float = 0.0
    notes: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "formula": self.formula,
            "inputs": dict(self.inputs),
            "constants": dict(self.constants),
            "complexity_term": self.complexity_term,
            "concentration_term": self.concentration_term,
            "rhs": self.rhs,
            "notes": list(self.notes),
            **({"extra": self.extra} if self.extra else {}),
        }


def _check_delta(delta: float):
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must satisfy 0 < delta < 1, got {delta}")


def dudley_bound_block(
    candidates: Sequence,
    blocks: Sequence[PatternCollection],
    cfg: BlockLossConfig,
    metric_choice: str = "loss",
    delta: float = 0.1,
    *,
    grid: np.ndarray = DUDLEY_GRID,
) -> BoundReport:
    """Entropy-integral bound with empirical greedy covering numbers plugged in.

    ``metric_choice="loss"`` covers the shifted loss vectors under the
    empirical loss metric; ``"function"`` covers the candidates themselves
    under the block-averaged function metric.
    """
    if not candidates:
        raise ValueError("need at least one candidate")
    if metric_choice not in ("loss", "function"):
        raise ValueError(f"unknown metric {metric_choice!r}")
    _check_delta(delta)
    n = len(blocks)
    if metric_choice == "loss":
        dist = loss_distance_matrix(block_loss_matrix(candidates, blocks, cfg))
    else:
        dist = function_distance_matrix(candidates, blocks, cfg)
    counts = [covering_number_matrix(dist, e) for e in grid]
    integrand = 24.0 * np.sqrt(np.log(counts) / n)
    integral = float(np.trapezoid(integrand, grid))
    conc = math.sqrt(8.0 * math.log(2.0 / delta) / n)
    return BoundReport(
        "thm3.1" if metric_choice == "loss" else "thm3.2",
        {"n": n, "delta": delta, "n_candidates": len(candidates), "metric": metric_choice, "selector": cfg.selector},
        {},
        integral,
        conc,
        integral + conc,
        ["empirical plug-in of the expected entropy integral", "greedy upper bound on covering numbers"],
        {"eps_grid": [float(e) for e in grid], "covering_numbers": counts},
    )


def b_alpha(B: float, alpha: float) -> float:
    return 1.0 + 2.0 * (1.0 - alpha) * B


def _concentration(B_const: float, log_term: float, n: float) -> float:
    return math.sqrt(8.0 * B_const**2 * log_term / n)


def bound_individual_bounded(qhat: float, B: int, alpha: float, n: int, delta: float) -> BoundReport:
    _check_delta(delta)
    if n < 1 or qhat < 0:
        raise ValueError("need n >= 1 and qhat >= 0")
    ba = b_alpha(B, alpha)
    conc = _concentration(ba, math.log(2.0 / delta), n)
    return BoundReport(
        "thm5.1",
        {"qhat": qhat, "B": B, "alpha": alpha, "n": n, "delta": delta},
        {"B_alpha": ba},
        2.0 * qhat,
        conc,
        2.0 * qhat + conc,
    )


def b_n_geometric(C: float, lam: float, n: int, delta: float) -> int:
    if C <= 0 or not 0.0 < lam < 1.0 or n < 1:
        raise ValueError("need C > 0, 0 < lambda < 1, n >= 1")
    ratio = math.log(2.0 * C * n / delta) / math.log(1.0 / lam)
    nearest = round(ratio)
    if abs(ratio - nearest) <= 1e-12 * max(1.0, abs(ratio)):
        return int(nearest)  # exact integer up to rounding error
    return math.ceil(ratio)


def bound_individual_geometric(
    qhat: float, C: float, lam: float, B0: int, n: int, delta: float, alpha: float
) -> BoundReport:
    _check_delta(delta)
    Bn = b_n_geometric(C, lam, n, delta)
    if Bn < B0:
        raise ConditionViolated(f"B_n = {Bn} < B0 = {B0}; geometric-tail bound does not apply")
    bna = b_alpha(Bn, alpha)
    conc = _concentration(bna, math.log(4.0 / delta), n)
    return BoundReport(
        "thm5.2",
        {"qhat": qhat, "C": C, "lambda": lam, "B0": B0, "n": n, "delta": delta, "alpha": alpha},
        {"B_n": Bn, "B_n_alpha": bna},
        2.0 * qhat,
        conc,
        2.0 * qhat + conc,
    )


def bound_observations(qhat: float, B: int, alpha: float, m: int, delta: float) -> BoundReport:
    _check_delta(delta)
    if m < 1:
        raise ValueError("m must be >= 1")
    ba = b_alpha(B, alpha)
    conc = math.sqrt(8.0 * B * ba**2 * math.log(2.0 / delta) / m)
    return BoundReport(
        "cor5.1",
        {"qhat": qhat, "B": B, "alpha": alpha, "m": m, "delta": delta},
        {"B_alpha": ba},
        2.0 * qhat,
        conc,
        2.0 * qhat + conc,
    )


def expected_size_bound(B0: int, C: float, lam: float) -> float:
    if B0 < 1 or C < 0 or not 0.0 < lam < 1.0:
        raise ValueError("need B0 >= 1, C >= 0, 0 < lambda < 1")
    return B0 + C * lam ** (B0 + 1) / (1.0 - lam) * (B0 + 1.0 / (1.0 - lam))


@dataclass(frozen=True)
class GeometricTail:
    C: float
    lam: float
    B0: int


def estimation_error_bound(
    B: int, alpha: float, n: int, delta: float, tail: str | GeometricTail = "bounded"
) -> float:
    """Radius of the high-probability deviation of the estimated quasi-Rademacher complexity."""
    _check_delta(delta)
    if tail == "bounded":
        return _concentration(b_alpha(B, alpha), math.log(2.0 / delta), n)
    Bn = b_n_geometric(tail.C, tail.lam, n, delta)
    if Bn < tail.B0:
        raise ConditionViolated(f"B_n = {Bn} < B0 = {tail.B0}")
    return _concentration(b_alpha(Bn, alpha), math.log(4.0 / delta), n)


def bounded_difference_verifier(
    f,
    universe: Iterable[Iterable[str]],
    Q: PatternCollection,
    cfg: IndividualLossConfig = IndividualLossConfig(),
) -> dict:
    """Swap each pattern for every universe candidate and record the largest
    change of the empirical risk against ``B_alpha / n``.

    Candidates overlapping another pattern of ``Q`` would not give a valid
    collection and are skipped.
    """
    universe = [frozenset(p) for p in universe]

    def risk(coll):
        return float(np.mean(pattern_loss_vector(f, coll, cfg, shifted=False)))

    base = risk(Q)
    n = len(Q)
    B = max(len(P) for P in list(Q.patterns) + universe)
    bound = b_alpha(B, cfg.alpha) / n
    worst, swaps, skipped = 0.0, 0, 0
    for i, Pi in enumerate(Q.patterns):
        others = [P for j, P in enumerate(Q.patterns) if j != i]
        taken = frozenset().union(*others)
        for cand in universe:
            if cand & taken:
                skipped += 1
                continue
            swapped = PatternCollection(tuple(others) + (cand,), Q.observations)
            worst = max(worst, abs(risk(swapped) - base))
            swaps += 1
    return {
        "max_observed_change": worst,
        "bound": bound,
        "B": B,
        "n": n,
        "alpha": cfg.alpha,
        "n_swaps": swaps,
        "n_skipped": skipped,
        "holds": worst <= bound,
    }
