"""Relevance scores for explanations and features.

All scores are exact :class:`fractions.Fraction` values.  Two explanations
are the same explanation when they have the same kind and the same
``(feature, value)`` items, whichever instance produced them.
"""

from __future__ import annotations

import statistics
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

from .errors import EmptyCover, NoOccurrence, UnknownKey

SR = "SR"
CF = "CF"
KINDS = (SR, CF)

EXPLANATION_SCORES = ("PAR", "GEN", "RESP", "RESP_neighborhood")
FEATURE_SCORES = ("FI", "FG", "FR")


@dataclass(frozen=True)
class Explanation:
    kind: str
    items: frozenset  # of (feature index, value of the feature in the explained instance)
    source: int | None = field(default=None, compare=False)

    _features: tuple = field(default=(), init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "items", frozenset(self.items))
        if not self.items:
            raise ValueError("an explanation cannot be empty")
        if self.kind not in KINDS:
            raise ValueError(f"unknown explanation kind {self.kind!r}")
        object.__setattr__(self, "_features", tuple(sorted(f for f, _ in self.items)))

    @property
    def size(self) -> int:
        return len(self.items)

    @property
    def features(self) -> tuple[int, ...]:
        return self._features

    def sort_key(self):
        return (self.size, self.features)

    @classmethod
    def from_soft(cls, kind: str, indices: Iterable[int], soft_index: Sequence[tuple[int, int]],
                  source=None) -> "Explanation":
        return cls(kind, frozenset(soft_index[i] for i in indices), source)


@dataclass
class NeighborEntry:
    values: tuple[int, ...]
    prediction: int
    explanations: dict[str, list[Explanation]] = field(default_factory=dict)
    complete: dict[str, bool] = field(default_factory=dict)

    def has(self, kind: str) -> bool:
        return kind in self.explanations


@dataclass
class NeighborhoodExplanations:
    """Explanation sets over the (capped) neighborhood; the center comes first."""

    center: tuple[int, ...]
    radius: int
    entries: list[NeighborEntry]
    sampled: int = 0  # size of the full sampled neighborhood before capping

    @property
    def size(self) -> int:
        return len(self.entries)

    @property
    def center_prediction(self) -> int:
        return self.entries[0].prediction

    def same_prediction(self):
        p = self.center_prediction
        return [e for e in self.entries if e.prediction == p]

    def occurrences(self, e: Explanation) -> list[NeighborEntry]:
        """Same-prediction neighbors whose explanation set contains ``e``.

        Indexed on first use; entries must not change afterwards.
        """
        if getattr(self, "_index", None) is None:
            index: dict[Explanation, list[NeighborEntry]] = {}
            for v in self.same_prediction():
                for es in v.explanations.values():
                    for x in set(es):
                        index.setdefault(x, []).append(v)
            self._index = index
        return self._index.get(e, [])

    def coverage(self) -> dict:
        same = self.same_prediction()
        return {
            "sampled": self.sampled,
            "considered": self.size,
            "same_prediction": len(same),
            "complete": {k: sum(1 for e in same if e.complete.get(k, False)) for k in KINDS},
        }


# --- explanation scores -----------------------------------------------------


def score_parsimony(e: Explanation) -> Fraction:
    return Fraction(1, e.size)


def extent(e: Explanation, ne: NeighborhoodExplanations) -> list[NeighborEntry]:
    return ne.occurrences(e)


def score_generality(e: Explanation, ne: NeighborhoodExplanations) -> Fraction:
    return Fraction(len(extent(e, ne)), ne.size)


def score_responsibility(explanations: Sequence[Explanation]) -> Fraction:
    return Fraction(1, len(explanations))


def score_responsibility_neighborhood(e: Explanation, ne: NeighborhoodExplanations) -> Fraction:
    hits = extent(e, ne)
    if not hits:
        raise NoOccurrence("explanation does not occur anywhere in the neighborhood")
    return max(Fraction(1, len(v.explanations[e.kind])) for v in hits)


# --- feature scores -------------------------------------------------------


def cover(k: int, explanations: Iterable[Explanation]) -> list[Explanation]:
    return [e for e in explanations if k in e.features]


def score_feature_involvement(k: int, explanations: Sequence[Explanation]) -> Fraction:
    return Fraction(len(cover(k, explanations)), len(explanations))


def union_explanations(ne: NeighborhoodExplanations, kind: str) -> set[Explanation]:
    out: set[Explanation] = set()
    for v in ne.same_prediction():
        out.update(v.explanations.get(kind, ()))
    return out


def score_feature_generality(k: int, ne: NeighborhoodExplanations, kind: str) -> Fraction:
    union = union_explanations(ne, kind)
    if not union:
        raise EmptyCover("no explanations anywhere in the neighborhood")
    return Fraction(len(cover(k, union)), len(union))


_AGGREGATES = {
    "min": min,
    "max": max,
    "avg": lambda xs: Fraction(sum(xs), len(xs)),
    "median": lambda xs: Fraction(statistics.median(xs)),
}


def score_feature_responsibility(k: int, explanations: Sequence[Explanation], aggr: str = "avg") -> Fraction:
    covering = cover(k, explanations)
    if not covering:
        raise EmptyCover(f"feature {k} occurs in no explanation")
    if aggr not in _AGGREGATES:
        raise UnknownKey(f"unknown aggregation {aggr!r}")
    return 1 / Fraction(_AGGREGATES[aggr]([e.size for e in covering]))


# --- reports --------------------------------------------------------------


@dataclass
class ScoredExplanation:
    explanation: Explanation
    scores: dict[str, Fraction | None]


@dataclass
class FeatureScore:
    feature: int
    scores: dict[str, Fraction | None]


@dataclass
class ScoredReport:
    explanations: dict[str, list[ScoredExplanation]]
    features: dict[str, list[FeatureScore]]


def score_explanations(explanations: Sequence[Explanation], ne: NeighborhoodExplanations | None) -> list[ScoredExplanation]:
    out = []
    for e in explanations:
        scores: dict[str, Fraction | None] = {
            "PAR": score_parsimony(e),
            "RESP": score_responsibility(explanations),
            "GEN": None,
            "RESP_neighborhood": None,
        }
        if ne is not None:
            scores["GEN"] = score_generality(e, ne)
            try:
                scores["RESP_neighborhood"] = score_responsibility_neighborhood(e, ne)
            except NoOccurrence:
                pass
        out.append(ScoredExplanation(e, scores))
    return out


def score_features(n_features: int, explanations: Sequence[Explanation], ne: NeighborhoodExplanations | None,
                   kind: str, aggr: str = "avg") -> list[FeatureScore]:
    out = []
    union = union_explanations(ne, kind) if ne is not None else set()
    for k in range(n_features):
        scores: dict[str, Fraction | None] = {"FI": None, "FG": None, "FR": None}
        if explanations:
            scores["FI"] = score_feature_involvement(k, explanations)
            try:
                scores["FR"] = score_feature_responsibility(k, explanations, aggr)
            except EmptyCover:
                pass
        if union:
            scores["FG"] = score_feature_generality(k, ne, kind)
        out.append(FeatureScore(k, scores))
    return out


def build_report(n_features: int, explanations: dict[str, Sequence[Explanation]],
                 ne: NeighborhoodExplanations | None = None, aggr: str = "avg") -> ScoredReport:
    return ScoredReport(
        {k: score_explanations(list(v), ne) for k, v in explanations.items()},
        {k: score_features(n_features, list(v), ne, k, aggr) for k, v in explanations.items()},
    )


def rank(entries: Sequence[ScoredExplanation], key: str, descending: bool = True) -> list[ScoredExplanation]:
    """Stable sort on one score; ties go to smaller, then lexicographically
    smaller, explanations.  Entries lacking the score sort last."""
    if key not in EXPLANATION_SCORES:
        raise UnknownKey(f"unknown explanation score {key!r}")

    def sort_key(item: ScoredExplanation):
        value = item.scores.get(key)
        missing = value is None
        v = Fraction(0) if missing else value
        return (missing, -v if descending else v, item.explanation.sort_key())

    return sorted(entries, key=sort_key)


def rank_features(entries: Sequence[FeatureScore], key: str, descending: bool = True) -> list[FeatureScore]:
    if key not in FEATURE_SCORES:
        raise UnknownKey(f"unknown feature score {key!r}")

    def sort_key(item: FeatureScore):
        value = item.scores.get(key)
        missing = value is None
        v = Fraction(0) if missing else value
        return (missing, -v if descending else v, item.feature)

    return sorted(entries, key=sort_key)
