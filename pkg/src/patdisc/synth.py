"""Synthetic pattern collections: clustered feature vectors and line-segment shapes."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .core import Observation, PatternCollection, observation_table

SHAPES = ("square", "triangle", "rhombus", "star")


class GenerationError(RuntimeError):
    pass


@dataclass(frozen=True)
class SizeDist:
    """Pattern-size law: ``fixed`` (always B), ``uniform`` (1..B) or
    ``geometric`` (tail Pr[size > b] = C * lam**b for b >= B0)."""

    kind: str = "fixed"
    B: int = 3
    B0: int = 1
    C: float = 1.0
    lam: float = 0.5

    def __post_init__(self):
        if self.kind in ("fixed", "uniform"):
            if self.B < 1:
                raise ValueError("B must be >= 1")
        elif self.kind == "geometric":
            if self.B0 < 1:
                raise ValueError("B0 must be >= 1")
            if not 0.0 < self.lam < 1.0:
                raise ValueError(f"geometric tail needs 0 < lambda < 1, got {self.lam}")
            if self.C < 0 or self.C * self.lam**self.B0 > 1.0:
                raise ValueError("geometric tail needs C >= 0 and C * lambda**B0 <= 1")
        else:
            raise ValueError(f"unknown size distribution {self.kind!r}")

    @classmethod
    def parse(cls, text: str) -> "SizeDist":
        """Parse ``fixed:3``, ``uniform:3`` or ``geometric:B0,C,lambda``."""
        kind, _, args = text.partition(":")
        if kind not in ("fixed", "uniform", "geometric"):
            raise ValueError(f"unknown size distribution {text!r}")
        try:
            if kind == "geometric":
                b0, c, lam = args.split(",")
                params = {"B0": int(b0), "C": float(c), "lam": float(lam)}
            else:
                params = {"B": int(args)}
        except ValueError:
            raise ValueError(f"cannot parse size distribution {text!r}") from None
        return cls(kind, **params)

    def to_dict(self) -> dict:
        if self.kind == "geometric":
            return {"kind": self.kind, "B0": self.B0, "C": self.C, "lambda": self.lam}
        return {"kind": self.kind, "B": self.B}


def sample_size(dist: SizeDist, rng: np.random.Generator) -> int:
    if dist.kind == "fixed":
        return dist.B
    if dist.kind == "uniform":
        return int(rng.integers(1, dist.B + 1))
    if rng.random() >= dist.C * dist.lam**dist.B0:
        return dist.B0
    return dist.B0 + int(rng.geometric(1.0 - dist.lam))


@dataclass(frozen=True)
class GenSpec:
    kind: str = "feature-clusters"
    n_patterns: int = 10
    size_dist: SizeDist = SizeDist("fixed", B=3)
    cluster_spread: float = 0.1
    inter_cluster_distance: float = 4.0
    noise_singletons: int = 0
    rng_seed: int = 0
    dim: int = 2
    shapes: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.kind not in ("feature-clusters", "line-shapes"):
            raise ValueError(f"unknown generator kind {self.kind!r}")
        if self.n_patterns < 1 or self.noise_singletons < 0 or self.dim < 1:
            raise ValueError("need n_patterns >= 1, noise_singletons >= 0, dim >= 1")
        if not (self.cluster_spread > 0 and self.inter_cluster_distance > 0):
            raise ValueError("cluster_spread and inter_cluster_distance must be positive")
        if self.shapes is not None and any(s not in SHAPES for s in self.shapes):
            raise ValueError(f"shapes must be drawn from {SHAPES}")

    @property
    def separable(self) -> bool:
        return self.inter_cluster_distance > 2 * self.cluster_spread


def separable_preset(n_patterns: int = 10, size: int = 3, noise: int = 5, seed: int = 0) -> GenSpec:
    return GenSpec(
        "feature-clusters",
        n_patterns,
        SizeDist("fixed", B=size),
        cluster_spread=0.1,
        inter_cluster_distance=4.0,
        noise_singletons=noise,
        rng_seed=seed,
    )


def _place_centers(count: int, min_dist: float, dim: int, rng, tries: int = 2000) -> np.ndarray:
    side = min_dist * (math.ceil(count ** (1.0 / dim)) + 1) * 1.5
    centers: list[np.ndarray] = []
    for _ in range(count):
        for _ in range(tries):
            c = rng.uniform(0.0, side, dim)
            if all(np.linalg.norm(c - o) >= min_dist for o in centers):
                centers.append(c)
                break
        else:
            raise GenerationError(
                f"could not place {count} centers {min_dist} apart after {tries} tries each"
            )
    return np.array(centers)


def _ids(total: int) -> list[str]:
    width = max(3, len(str(total - 1)))
    return [f"o{k:0{width}d}" for k in range(total)]


def gen_individual(spec: GenSpec) -> PatternCollection:
    if spec.kind == "line-shapes":
        return gen_line_shapes(spec)
    rng = np.random.default_rng(spec.rng_seed)
    sizes = [sample_size(spec.size_dist, rng) for _ in range(spec.n_patterns)]
    sizes += [1] * spec.noise_singletons
    centers = _place_centers(len(sizes), spec.inter_cluster_distance, spec.dim, rng)
    ids = iter(_ids(sum(sizes)))
    observations, patterns = [], []
    for size, center in zip(sizes, centers):
        members = []
        for _ in range(size):
            oid = next(ids)
            x = center + rng.normal(0.0, spec.cluster_spread, spec.dim)
            observations.append(Observation(oid, features=tuple(x.tolist())))
            members.append(oid)
        patterns.append(frozenset(members))
    return PatternCollection(tuple(patterns), observation_table(observations))


def shape_template(name: str) -> list[tuple[tuple[float, float], tuple[float, float]]]:
    """Unit-radius segment template of a named shape."""
    if name == "square":
        pts = [(1, 1), (-1, 1), (-1, -1), (1, -1)]
        order = [(0, 1), (1, 2), (2, 3), (3, 0)]
    elif name == "rhombus":
        pts = [(0, 1.5), (1, 0), (0, -1.5), (-1, 0)]
        order = [(0, 1), (1, 2), (2, 3), (3, 0)]
    elif name == "triangle":
        pts = [(math.cos(a), math.sin(a)) for a in (math.pi / 2 + 2 * math.pi * k / 3 for k in range(3))]
        order = [(0, 1), (1, 2), (2, 0)]
    elif name == "star":
        pts = [(math.cos(a), math.sin(a)) for a in (math.pi / 2 + 2 * math.pi * k / 5 for k in range(5))]
        order = [(k, (k + 2) % 5) for k in range(5)]
    else:
        raise ValueError(f"unknown shape {name!r}")
    return [(tuple(map(float, pts[a])), tuple(map(float, pts[b]))) for a, b in order]


def gen_line_shapes(spec: GenSpec) -> PatternCollection:
    """Shapes of radius ``cluster_spread`` at random positions and rotations,
    plus ``noise_singletons`` stray segments as singleton patterns."""
    rng = np.random.default_rng(spec.rng_seed)
    if spec.shapes is not None:
        names = list(spec.shapes)
    else:
        names = [SHAPES[int(rng.integers(len(SHAPES)))] for _ in range(spec.n_patterns)]
    templates = [shape_template(n) for n in names]
    total = sum(len(t) for t in templates) + spec.noise_singletons
    centers = _place_centers(len(names) + spec.noise_singletons, spec.inter_cluster_distance, 2, rng)
    ids = iter(_ids(total))
    observations, patterns = [], []
    r = spec.cluster_spread
    for template, center in zip(templates, centers):
        angle = rng.uniform(0.0, 2 * math.pi)
        rot = np.array([[math.cos(angle), -math.sin(angle)], [math.sin(angle), math.cos(angle)]])
        members = []
        for a, b in template:
            pa = center + r * rot @ np.array(a)
            pb = center + r * rot @ np.array(b)
            oid = next(ids)
            observations.append(Observation(oid, segment=(tuple(pa.tolist()), tuple(pb.tolist()))))
            members.append(oid)
        patterns.append(frozenset(members))
    for center in centers[len(names):]:
        angle = rng.uniform(0.0, math.pi)
        half = r * np.array([math.cos(angle), math.sin(angle)])
        oid = next(ids)
        observations.append(
            Observation(oid, segment=(tuple((center - half).tolist()), tuple((center + half).tolist())))
        )
        patterns.append(frozenset([oid]))
    return PatternCollection(tuple(patterns), observation_table(observations))


def derived_seeds(seed: int, count: int) -> list[int]:
    return [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(count)]


def gen_blocks(spec: GenSpec, n_blocks: int) -> list[PatternCollection]:
    if n_blocks < 1:
        raise ValueError("n_blocks must be >= 1")
    return [gen_individual(replace(spec, rng_seed=s)) for s in derived_seeds(spec.rng_seed, n_blocks)]
