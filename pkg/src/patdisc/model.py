"""Parametric scoring family and its empirical risk minimiser.

A subset ``U`` is mapped to four cohesion features (mean pairwise
similarity, min pairwise similarity, similarity of the farthest pair and
``1/|U|``) and scored by a clamped logistic of a linear combination.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from itertools import combinations
from typing import Iterable, Mapping, Sequence

import numpy as np

from .core import CapExceededError, Observation, PatternCollection, PatternError
from .loss import IndividualLossConfig

N_FEATURES = 4
SCORE_FLOOR = 1e-12
SIMILARITIES = ("negexp", "cosine")
KINDS = ("feature-vector", "line-segment")


@dataclass(frozen=True)
class FeatureConfig:
    kind: str = "feature-vector"
    similarity: str = "negexp"
    scale: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown payload kind {self.kind!r}")
        if self.similarity not in SIMILARITIES:
            raise ValueError(f"unknown similarity {self.similarity!r}")
        if not (self.scale > 0 and math.isfinite(self.scale)):
            raise ValueError("scale must be positive and finite")

    def to_dict(self) -> dict:
        return {"kind": self.kind, "similarity": self.similarity, "scale": self.scale}

    @classmethod
    def from_dict(cls, d: Mapping) -> "FeatureConfig":
        return cls(d.get("kind", "feature-vector"), d.get("similarity", "negexp"), float(d.get("scale", 1.0)))


def embed(obs: Observation) -> np.ndarray:
    """Feature vector of an observation; segments use endpoints, midpoint and
    doubled orientation angle (orientation is direction-free)."""
    if obs.features is not None:
        return np.asarray(obs.features, dtype=float)
    p, q = sorted(obs.segment)
    (x1, y1), (x2, y2) = p, q
    angle = math.atan2(y2 - y1, x2 - x1)
    return np.array(
        [x1, y1, x2, y2, (x1 + x2) / 2, (y1 + y2) / 2, math.cos(2 * angle), math.sin(2 * angle)]
    )


class ObservationSpace:
    """Pairwise similarity and distance matrices over an observation table."""

    def __init__(self, data: Mapping[str, Observation], cfg: FeatureConfig):
        self.ids = sorted(data)
        self.index = {i: k for k, i in enumerate(self.ids)}
        emb = np.array([embed(data[i]) for i in self.ids], dtype=float)
        diff = emb[:, None, :] - emb[None, :, :]
        self.dist = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
        if cfg.similarity == "negexp":
            self.sim = np.exp(-self.dist / cfg.scale)
        else:
            norms = np.linalg.norm(emb, axis=1)
            norms[norms == 0] = 1.0
            unit = emb / norms[:, None]
            self.sim = np.clip((1.0 + unit @ unit.T) / 2.0, 0.0, 1.0)
        self.data = data

    def indices(self, U: Iterable[str]) -> list[int]:
        try:
            return sorted(self.index[i] for i in U)
        except KeyError as e:
            raise PatternError(f"unresolved observation id {e.args[0]!r}") from None

    def features(self, idx: np.ndarray) -> np.ndarray:
        """Features for an (m, k) array of index rows, all of size k."""
        m, k = idx.shape
        out = np.ones((m, N_FEATURES))
        if k == 1:
            return out
        ia, ib = map(list, zip(*combinations(range(k), 2)))
        a, b = idx[:, ia], idx[:, ib]
        sims = self.sim[a, b]
        far = np.argmax(self.dist[a, b], axis=1)
        out[:, 0] = sims.mean(axis=1)
        out[:, 1] = sims.min(axis=1)
        out[:, 2] = sims[np.arange(m), far]
        out[:, 3] = 1.0 / k
        return out

    def features_of(self, subsets: Sequence[Iterable[str]]) -> np.ndarray:
        rows = [self.indices(U) for U in subsets]
        out = np.empty((len(rows), N_FEATURES))
        by_size: dict[int, list[int]] = {}
        for r, row in enumerate(rows):
            if not row:
                raise PatternError("cannot featurize an empty subset")
            by_size.setdefault(len(row), []).append(r)
        for k, where in by_size.items():
            out[where] = self.features(np.array([rows[r] for r in where], dtype=np.intp))
        return out


_SPACE_CACHE: dict = {}


def observation_space(data: Mapping[str, Observation], cfg: FeatureConfig) -> ObservationSpace:
    key = (id(data), cfg)
    hit = _SPACE_CACHE.get(key)
    if hit is not None and hit.data is data:
        return hit
    space = ObservationSpace(data, cfg)
    if len(_SPACE_CACHE) > 16:
        _SPACE_CACHE.clear()
    _SPACE_CACHE[key] = space
    return space


def cohesion_features(U: Iterable[str], data: Mapping[str, Observation], cfg: FeatureConfig = FeatureConfig()) -> np.ndarray:
    return observation_space(data, cfg).features_of([frozenset(U)])[0]


def sigmoid(z):
    z = np.asarray(z, dtype=float)
    return np.exp(-np.logaddexp(0.0, -z))


def _squash(z):
    return np.clip(sigmoid(z), SCORE_FLOOR, 1.0 - SCORE_FLOOR)


@dataclass(frozen=True)
class ScoringModel:
    beta: tuple[float, ...]
    bias: float = 0.0
    feature_config: FeatureConfig = FeatureConfig()
    theta: float = 0.5
    alpha: float | None = None
    meta: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        beta = tuple(float(b) for b in self.beta)
        if len(beta) != N_FEATURES:
            raise ValueError(f"beta needs {N_FEATURES} weights, got {len(beta)}")
        if not all(math.isfinite(b) for b in beta) or not math.isfinite(self.bias):
            raise ValueError("model parameters must be finite")
        if not 0.0 <= self.theta <= 1.0:
            raise ValueError("theta must lie in [0, 1]")
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "bias", float(self.bias))

    @property
    def params(self) -> np.ndarray:
        return np.array(self.beta + (self.bias,))

    @classmethod
    def from_params(cls, params, **kw) -> "ScoringModel":
        params = np.asarray(params, dtype=float)
        return cls(tuple(params[:-1].tolist()), float(params[-1]), **kw)

    def score_many(self, subsets: Sequence[Iterable[str]], data: Mapping[str, Observation]) -> np.ndarray:
        if not len(subsets):
            return np.zeros(0)
        phi = observation_space(data, self.feature_config).features_of(subsets)
        return _squash(phi @ np.asarray(self.beta) + self.bias)

    def score(self, U: Iterable[str], data: Mapping[str, Observation]) -> float:
        return float(self.score_many([frozenset(U)], data)[0])

    def scorer(self, data: Mapping[str, Observation]):
        """Individual-problem call shape ``f(U)``."""
        return lambda U: self.score(U, data)

    def block_scorer(self, data: Mapping[str, Observation]):
        """Block-problem call shape ``f(X, U)``."""
        return lambda X, U: block_score(self, X, U, data)

    def to_dict(self) -> dict:
        return {
            "beta": list(self.beta),
            "bias": self.bias,
            "theta": self.theta,
            "feature_config": self.feature_config.to_dict(),
            "alpha": self.alpha,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "ScoringModel":
        return cls(
            tuple(d["beta"]),
            float(d["bias"]),
            FeatureConfig.from_dict(d.get("feature_config", {})),
            float(d.get("theta", 0.5)),
            d.get("alpha"),
        )


def score(model: ScoringModel, U: Iterable[str], data: Mapping[str, Observation]) -> float:
    return model.score(U, data)


def block_score(model: ScoringModel, X: Iterable[str], U: Iterable[str], data: Mapping[str, Observation]) -> float:
    U = frozenset(U)
    if not U or not U <= frozenset(X):
        return 0.0
    return model.score(U, data)


def _all_subsets(idx: Sequence[int]) -> list[np.ndarray]:
    return [np.array(list(combinations(idx, k)), dtype=np.intp) for k in range(1, len(idx) + 1)]


class IndividualDesign:
    """Every positive and negative subset of an individual problem, featurized once.

    Subsets are stored as stacked feature rows with the owning pattern and a
    per-row risk coefficient, so risk and gradient are a single pass over the
    rows for any parameter vector.
    """

    def __init__(self, Q: PatternCollection, cfg: IndividualLossConfig, fc: FeatureConfig = FeatureConfig()):
        space = observation_space(Q.observations, fc)
        self.n = len(Q)
        self.alpha = cfg.alpha
        x_idx = np.array(space.indices(Q.X), dtype=np.intp)
        feats, pid, positive = [], [], []
        self.z_pos = np.zeros(self.n)
        self.z_neg = np.zeros(self.n)
        for j, P in enumerate(Q.patterns):
            p_idx = space.indices(P)
            outside = np.setdiff1d(x_idx, p_idx)
            n_pos = 2 ** len(p_idx) - 1
            if n_pos > cfg.cap or n_pos * len(outside) > cfg.cap:
                raise CapExceededError(max(n_pos, n_pos * len(outside)), cfg.cap, len(p_idx))
            self.z_pos[j] = n_pos
            self.z_neg[j] = n_pos * len(outside)
            for block in _all_subsets(p_idx):
                feats.append(space.features(block))
                pid.append(np.full(len(block), j))
                positive.append(np.ones(len(block), dtype=bool))
                if len(outside):
                    rep = np.repeat(block, len(outside), axis=0)
                    extra = np.tile(outside, len(block))[:, None]
                    aug = np.hstack([rep, extra])
                    feats.append(space.features(aug))
                    pid.append(np.full(len(aug), j))
                    positive.append(np.zeros(len(aug), dtype=bool))
        self.phi = np.vstack(feats)
        self.pid = np.concatenate(pid)
        self.positive = np.concatenate(positive)
        z_neg_safe = np.where(self.z_neg > 0, self.z_neg, 1.0)
        self.coef = np.where(
            self.positive,
            -self.alpha / self.z_pos[self.pid],
            (1.0 - self.alpha) / z_neg_safe[self.pid],
        )
        self.design = np.hstack([self.phi, np.ones((len(self.phi), 1))])

    def __len__(self) -> int:
        return len(self.phi)

    def scores(self, params) -> np.ndarray:
        return _squash(self.design @ np.asarray(params, dtype=float))

    def pattern_losses_from_scores(self, s: np.ndarray) -> np.ndarray:
        pos = np.bincount(self.pid[self.positive], weights=1.0 - s[self.positive], minlength=self.n)
        neg = np.bincount(self.pid[~self.positive], weights=s[~self.positive], minlength=self.n)
        out = self.alpha * (pos / self.z_pos)
        has_neg = self.z_neg > 0
        out[has_neg] += (1.0 - self.alpha) * (neg[has_neg] / self.z_neg[has_neg])
        return out

    def pattern_losses(self, params) -> np.ndarray:
        return self.pattern_losses_from_scores(self.scores(params))

    def risk(self, params) -> float:
        return float(self.pattern_losses(params).mean())

    def risk_and_grad(self, params) -> tuple[float, np.ndarray]:
        s = self.scores(params)
        risk = float(self.pattern_losses_from_scores(s).mean())
        w = self.coef * s * (1.0 - s)
        return risk, (self.design.T @ w) / self.n


def risk_gradient(
    model: ScoringModel, Q: PatternCollection, cfg: IndividualLossConfig = IndividualLossConfig()
) -> np.ndarray:
    """Gradient of the individual empirical risk in (beta..., bias) order."""
    return IndividualDesign(Q, cfg, model.feature_config).risk_and_grad(model.params)[1]


def _descend(design: IndividualDesign, start: np.ndarray, max_iters: int, lr: float, tol: float):
    w = start.copy()
    best_risk, best_w, converged, it = math.inf, w.copy(), False, 0
    for it in range(max_iters + 1):
        risk, grad = design.risk_and_grad(w)
        if risk < best_risk:
            best_risk, best_w = risk, w.copy()
        if np.linalg.norm(grad) < tol:
            converged = True
            break
        if it < max_iters:
            w = w - lr * grad
    return best_risk, best_w, converged, it


def train_erm(
    Q: PatternCollection,
    cfg: IndividualLossConfig = IndividualLossConfig(),
    feature_config: FeatureConfig = FeatureConfig(),
    *,
    max_iters: int = 2000,
    learning_rate: float = 5.0,
    restarts: int = 4,
    rng_seed: int = 0,
    tol: float = 1e-9,
    threads: int = 1,
) -> ScoringModel:
    """Full-batch gradient descent from ``restarts`` random starts in [-1, 1]^d;
    the lowest-risk iterate over all restarts is returned."""
    if restarts < 1 or max_iters < 0:
        raise ValueError("restarts must be >= 1 and max_iters >= 0")
    design = IndividualDesign(Q, cfg, feature_config)
    seeds = np.random.SeedSequence(rng_seed).spawn(restarts)
    starts = [np.random.default_rng(s).uniform(-1.0, 1.0, N_FEATURES + 1) for s in seeds]

    def run(start):
        return _descend(design, start, max_iters, learning_rate, tol)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, starts))
    else:
        results = [run(s) for s in starts]
    k = min(range(restarts), key=lambda r: (results[r][0], r))
    risk, w, converged, iters = results[k]
    return ScoringModel.from_params(
        w,
        feature_config=feature_config,
        alpha=cfg.alpha,
        meta={"risk": risk, "converged": converged, "iterations": iters, "restart": k},
    )


def best_f1_threshold(pos_scores, neg_scores) -> tuple[float, float]:
    """Threshold among the observed scores maximizing F1 of ``score >= theta``.

    Ties go to the larger threshold. Without negatives the largest positive
    score is returned.
    """
    pos = np.asarray(pos_scores, dtype=float)
    neg = np.asarray(neg_scores, dtype=float)
    if not len(pos):
        raise ValueError("need at least one positive score")
    if not len(neg):
        return float(pos.max()), 1.0
    cands = np.unique(np.concatenate([pos, neg]))
    pos_sorted, neg_sorted = np.sort(pos), np.sort(neg)
    tp = len(pos) - np.searchsorted(pos_sorted, cands, side="left")
    fp = len(neg) - np.searchsorted(neg_sorted, cands, side="left")
    fn = len(pos) - tp
    f1 = 2.0 * tp / (2.0 * tp + fp + fn)
    best = np.flatnonzero(f1 == f1.max())[-1]
    return float(cands[best]), float(f1[best])


def select_threshold(
    model: ScoringModel, Q: PatternCollection, cfg: IndividualLossConfig = IndividualLossConfig()
) -> float:
    design = IndividualDesign(Q, cfg, model.feature_config)
    s = design.scores(model.params)
    return best_f1_threshold(s[design.positive], s[~design.positive])[0]


def with_threshold(
    model: ScoringModel, Q: PatternCollection, cfg: IndividualLossConfig = IndividualLossConfig()
) -> ScoringModel:
    """Attach the F1-optimal threshold, stored one ulp below so that growth's
    strict ``score > theta`` test accepts exactly the scores ``>=`` the choice."""
    theta = select_threshold(model, Q, cfg)
    return replace(model, theta=float(np.nextafter(theta, -np.inf)) if theta > 0 else 0.0)
