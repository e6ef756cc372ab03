"""Observations, patterns, pattern collections and selector functions.

Observations are referenced by string id everywhere; payloads live only in
the observation table of a :class:`PatternCollection`. Subsets of
observations are plain ``frozenset`` objects of ids.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from types import MappingProxyType
from typing import Iterable, Iterator, Mapping, Sequence

DEFAULT_CAP = 2**20

Pattern = frozenset


class PatternError(ValueError):
    """Invalid observation, pattern or collection."""


class CapExceededError(ValueError):
    """A selector would enumerate more subsets than allowed."""

    def __init__(self, requested: int, cap: int, pattern_size: int | None = None):
        self.requested = requested
        self.cap = cap
        self.pattern_size = pattern_size
        msg = f"selector needs {requested} subsets, cap is {cap}"
        if pattern_size is not None:
            msg += f" (pattern size {pattern_size})"
        super().__init__(msg)


@dataclass(frozen=True)
class Observation:
    """A single observation with either a feature vector or a 2-D segment."""

    id: str
    features: tuple[float, ...] | None = None
    segment: tuple[tuple[float, float], tuple[float, float]] | None = None

    def __post_init__(self):
        if (self.features is None) == (self.segment is None):
            raise PatternError(f"observation {self.id!r} needs exactly one payload")
        if self.features is not None:
            object.__setattr__(self, "features", tuple(float(v) for v in self.features))
            if len(self.features) < 1:
                raise PatternError(f"observation {self.id!r} has an empty feature vector")
        else:
            (x1, y1), (x2, y2) = self.segment
            object.__setattr__(
                self, "segment", ((float(x1), float(y1)), (float(x2), float(y2)))
            )

    @property
    def kind(self) -> str:
        return "feature-vector" if self.features is not None else "line-segment"

    def to_dict(self) -> dict:
        if self.features is not None:
            return {"id": self.id, "features": list(self.features)}
        return {"id": self.id, "segment": [list(p) for p in self.segment]}

    @classmethod
    def from_dict(cls, d: Mapping) -> "Observation":
        if "features" in d:
            return cls(str(d["id"]), features=tuple(d["features"]))
        if "segment" in d:
            a, b = d["segment"]
            return cls(str(d["id"]), segment=(tuple(a), tuple(b)))
        raise PatternError(f"observation {d.get('id')!r} has no payload")


def sort_key(subset: Iterable[str]) -> tuple:
    """Deterministic subset order: by size, then lexicographically by sorted ids."""
    ids = tuple(sorted(subset))
    return (len(ids), ids)


def make_pattern(ids: Iterable[str]) -> Pattern:
    ids = list(ids)
    if not ids:
        raise PatternError("a pattern must be non-empty")
    if len(set(ids)) != len(ids):
        raise PatternError(f"pattern has duplicate ids: {sorted(ids)}")
    return frozenset(ids)


def observation_table(observations: Iterable[Observation]) -> Mapping[str, Observation]:
    """Build an immutable id -> Observation table, checking ids and dimensions."""
    table: dict[str, Observation] = {}
    dims = set()
    kinds = set()
    for obs in observations:
        if obs.id in table:
            raise PatternError(f"duplicate observation id {obs.id!r}")
        table[obs.id] = obs
        kinds.add(obs.kind)
        if obs.features is not None:
            dims.add(len(obs.features))
    if len(dims) > 1:
        raise PatternError(f"feature vectors have mixed dimensions {sorted(dims)}")
    if len(kinds) > 1:
        raise PatternError("dataset mixes feature vectors and line segments")
    return MappingProxyType(dict(sorted(table.items())))


@dataclass(frozen=True)
class PatternCollection:
    """A set of disjoint patterns together with the observation table."""

    patterns: tuple[Pattern, ...]
    observations: Mapping[str, Observation] = field(repr=False)

    def __post_init__(self):
        pats = tuple(sorted((make_pattern(p) for p in self.patterns), key=sort_key))
        if not pats:
            raise PatternError("a pattern collection needs at least one pattern")
        obs = self.observations
        if not isinstance(obs, MappingProxyType):
            obs = observation_table(obs.values() if isinstance(obs, Mapping) else obs)
        seen: set[str] = set()
        for p in pats:
            if seen & p:
                raise PatternError(f"patterns overlap on {sorted(seen & p)}")
            seen |= p
        missing = seen - obs.keys()
        if missing:
            raise PatternError(f"unresolved observation ids {sorted(missing)}")
        object.__setattr__(self, "patterns", pats)
        object.__setattr__(self, "observations", obs)

    @property
    def X(self) -> frozenset[str]:
        return observations_of(self)

    def __len__(self) -> int:
        return len(self.patterns)

    def __iter__(self) -> Iterator[Pattern]:
        return iter(self.patterns)

    @classmethod
    def from_ids(cls, patterns: Iterable[Iterable[str]], dim: int = 1) -> "PatternCollection":
        """Collection over placeholder observations (all-zero features); for tests
        and id-only computations."""
        pats = [list(p) for p in patterns]
        ids = sorted({i for p in pats for i in p})
        table = observation_table(Observation(i, features=(0.0,) * dim) for i in ids)
        return cls(tuple(frozenset(p) for p in pats), table)


def observations_of(Q: PatternCollection) -> frozenset[str]:
    """Union of all pattern members."""
    return frozenset().union(*Q.patterns)


@dataclass(frozen=True)
class SubsetFamily:
    subsets: tuple[frozenset[str], ...]
    source: str

    def __len__(self) -> int:
        return len(self.subsets)

    def __iter__(self) -> Iterator[frozenset[str]]:
        return iter(self.subsets)

    def __contains__(self, item) -> bool:
        return frozenset(item) in set(self.subsets)


def _family(subsets: Iterable[frozenset[str]], source: str) -> SubsetFamily:
    return SubsetFamily(tuple(sorted(set(subsets), key=sort_key)), source)


def _nonempty_subsets(ids: Sequence[str]) -> Iterator[frozenset[str]]:
    for k in range(1, len(ids) + 1):
        for combo in combinations(ids, k):
            yield frozenset(combo)


def enumerate_nonempty_subsets(ids: Iterable[str], cap: int = DEFAULT_CAP) -> SubsetFamily:
    ids = sorted(set(ids))
    if not ids:
        raise PatternError("cannot enumerate subsets of an empty set")
    count = 2 ** len(ids) - 1
    if count > cap:
        raise CapExceededError(count, cap, len(ids))
    return _family(_nonempty_subsets(ids), "all")


def maximal_selector(Q: PatternCollection, cap: int = DEFAULT_CAP) -> SubsetFamily:
    fam = enumerate_nonempty_subsets(Q.X, cap)
    return SubsetFamily(fam.subsets, "maximal")


def negative_selector(P: Iterable[str], X: Iterable[str], cap: int = DEFAULT_CAP) -> SubsetFamily:
    """Subsets of ``P`` augmented with exactly one point of ``X`` outside ``P``."""
    P = frozenset(P)
    X = frozenset(X)
    if not P:
        raise PatternError("pattern must be non-empty")
    if not P <= X:
        raise PatternError(f"pattern not contained in X: {sorted(P - X)}")
    outside = sorted(X - P)
    count = (2 ** len(P) - 1) * len(outside)
    if count > cap:
        raise CapExceededError(count, cap, len(P))
    inside = list(_nonempty_subsets(sorted(P)))
    return _family((U | {x} for x in outside for U in inside), "negative")


def posneg_selector(Q: PatternCollection, cap: int = DEFAULT_CAP) -> SubsetFamily:
    """Pattern subsets (positives) plus one-point augmentations (negatives),
    deduplicated across patterns."""
    X = Q.X
    out: set[frozenset[str]] = set()
    for P in Q.patterns:
        pos = enumerate_nonempty_subsets(P, cap)
        out.update(pos.subsets)
        out.update(negative_selector(P, X, cap).subsets)
    return _family(out, "posneg")


def is_within_pattern(U: Iterable[str], Q: PatternCollection) -> bool:
    U = frozenset(U)
    return any(U <= P for P in Q.patterns)
