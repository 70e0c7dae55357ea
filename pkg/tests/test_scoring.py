import random
from fractions import Fraction

import pytest

from satxplain.errors import EmptyCover, NoOccurrence, UnknownKey
from satxplain.scoring import (
    CF,
    SR,
    Explanation,
    NeighborEntry,
    NeighborhoodExplanations,
    build_report,
    extent,
    rank,
    rank_features,
    score_explanations,
    score_feature_generality,
    score_feature_involvement,
    score_feature_responsibility,
    score_generality,
    score_parsimony,
    score_responsibility,
    score_responsibility_neighborhood,
)
from conftest import VOTE_X


def E(kind, *features, x=VOTE_X):
    """Explanation over 1-based feature numbers, valued as in ``x``."""
    return Explanation(kind, frozenset((f - 1, x[f - 1]) for f in features))


SRS = [E(SR, 4, 5), E(SR, 12, 5), E(SR, 4, 12, 9)]
CFS = [E(CF, 4, 12), E(CF, 5, 12), E(CF, 5, 9), E(CF, 4, 5)]


def single(entries_expl, center=VOTE_X):
    return NeighborhoodExplanations(center, 0, [NeighborEntry(center, 0, entries_expl)])


def test_parsimony():
    assert score_parsimony(SRS[2]) == Fraction(1, 3)
    assert score_parsimony(E(SR, 7)) == 1


def test_parsimony_orders_by_size():
    rng = random.Random(0)
    for _ in range(200):
        a = E(SR, *rng.sample(range(1, 17), rng.randint(1, 8)))
        b = E(SR, *rng.sample(range(1, 17), rng.randint(1, 8)))
        assert (score_parsimony(a) > score_parsimony(b)) == (a.size < b.size)


def test_responsibility_examples():
    assert all(score_responsibility(SRS) == Fraction(1, 3) for _ in SRS)
    assert score_responsibility(CFS) == Fraction(1, 4)
    assert score_responsibility([CFS[0]]) == 1


def test_feature_involvement_examples():
    fi = {k: score_feature_involvement(k - 1, CFS) for k in (4, 5, 9, 12, 1)}
    assert fi == {4: Fraction(1, 2), 5: Fraction(3, 4), 9: Fraction(1, 4), 12: Fraction(1, 2), 1: 0}


def test_feature_responsibility_examples():
    assert score_feature_responsibility(4, CFS) == Fraction(1, 2)  # X5
    assert score_feature_responsibility(8, SRS) == Fraction(1, 3)  # X9
    assert score_feature_responsibility(0, [E(SR, 1), E(SR, 1, 2)], "max") == Fraction(1, 2)
    assert score_feature_responsibility(0, [E(SR, 1), E(SR, 1, 2)], "min") == 1
    assert score_feature_responsibility(0, [E(SR, 1)]) == 1
    with pytest.raises(EmptyCover):
        score_feature_responsibility(0, CFS)
    with pytest.raises(UnknownKey):
        score_feature_responsibility(4, CFS, "mode")


def _neighborhood(rng, n=6, size=10):
    center = tuple(rng.randint(0, 1) for _ in range(n))
    entries = []
    for j in range(size):
        v = center if j == 0 else tuple(rng.randint(0, 1) for _ in range(n))
        pred = 0 if j == 0 else rng.randint(0, 1)
        expl = {}
        if pred == 0:
            for kind in (SR, CF):
                fams = set()
                for _ in range(rng.randint(1, 4)):
                    feats = rng.sample(range(n), rng.randint(1, 3))
                    # draw from a small pool of items so explanations recur across neighbors
                    fams.add(Explanation(kind, frozenset((f, center[f]) for f in feats)))
                expl[kind] = sorted(fams, key=Explanation.sort_key)
        entries.append(NeighborEntry(v, pred, expl))
    return NeighborhoodExplanations(center, n, entries)


def test_generality_matches_explicit_recount():
    rng = random.Random(3)
    for _ in range(50):
        ne = _neighborhood(rng)
        for kind in (SR, CF):
            for e in ne.entries[0].explanations[kind]:
                count = 0
                for v in ne.entries:
                    if v.prediction == ne.entries[0].prediction and e in v.explanations.get(kind, []):
                        count += 1
                assert score_generality(e, ne) == Fraction(count, len(ne.entries))
                assert len(extent(e, ne)) == count


def test_generality_trivial_cases():
    e = CFS[0]
    ne = NeighborhoodExplanations(VOTE_X, 2, [NeighborEntry(VOTE_X, 0, {CF: CFS})] +
                                  [NeighborEntry((0,) * 16, 0, {CF: [e]}) for _ in range(4)])
    assert score_generality(e, ne) == 1
    only_x = NeighborhoodExplanations(VOTE_X, 2, [NeighborEntry(VOTE_X, 0, {CF: CFS})] +
                                      [NeighborEntry((0,) * 16, 1) for _ in range(9)])
    assert score_generality(e, only_x) == Fraction(1, 10)


def test_responsibility_neighborhood():
    rng = random.Random(5)
    for _ in range(50):
        ne = _neighborhood(rng)
        for kind in (SR, CF):
            here = ne.entries[0].explanations[kind]
            for e in here:
                brute = max(Fraction(1, len(v.explanations[kind])) for v in ne.entries
                            if v.prediction == 0 and e in v.explanations.get(kind, []))
                got = score_responsibility_neighborhood(e, ne)
                assert got == brute
                assert got >= score_responsibility(here)
    ne = single({CF: CFS})
    assert score_responsibility_neighborhood(CFS[1], ne) == score_responsibility(CFS)
    with pytest.raises(NoOccurrence):
        score_responsibility_neighborhood(E(CF, 1), ne)


def test_feature_generality():
    ne = single({CF: CFS})
    for k in range(16):
        assert score_feature_generality(k, ne, CF) == score_feature_involvement(k, CFS)
    rng = random.Random(8)
    for _ in range(30):
        ne = _neighborhood(rng)
        for kind in (SR, CF):
            union = set()
            for v in ne.entries:
                if v.prediction == 0:
                    union |= set(v.explanations.get(kind, []))
            for k in range(6):
                want = Fraction(sum(1 for e in union if k in e.features), len(union))
                assert score_feature_generality(k, ne, kind) == want
    with pytest.raises(EmptyCover):
        score_feature_generality(0, single({}), CF)


def test_scores_in_unit_interval():
    rng = random.Random(13)
    for _ in range(40):
        ne = _neighborhood(rng)
        expl = {k: ne.entries[0].explanations[k] for k in (SR, CF)}
        rep = build_report(6, expl, ne)
        for kind in (SR, CF):
            for se in rep.explanations[kind]:
                for v in se.scores.values():
                    assert v is not None and 0 < v <= 1
            for fs in rep.features[kind]:
                for name, v in fs.scores.items():
                    if v is not None:
                        assert 0 <= v <= 1 if name in ("FI", "FG") else 0 < v <= 1


def test_ordering_axioms():
    rng = random.Random(21)
    for _ in range(40):
        ne = _neighborhood(rng)
        es = ne.entries[0].explanations[CF]
        for a in es:
            for b in es:
                assert (score_generality(a, ne) > score_generality(b, ne)) == (len(extent(a, ne)) > len(extent(b, ne)))
        for k1 in range(6):
            for k2 in range(6):
                c1 = sum(1 for e in es if k1 in e.features)
                c2 = sum(1 for e in es if k2 in e.features)
                assert (score_feature_involvement(k1, es) > score_feature_involvement(k2, es)) == (c1 > c2)
                if c1 and c2:
                    a1 = Fraction(sum(e.size for e in es if k1 in e.features), c1)
                    a2 = Fraction(sum(e.size for e in es if k2 in e.features), c2)
                    fr1 = score_feature_responsibility(k1, es)
                    fr2 = score_feature_responsibility(k2, es)
                    assert (fr1 > fr2) == (a1 < a2)


def test_rank_by_parsimony():
    scored = score_explanations(SRS, None)
    order = [s.explanation for s in rank(scored, "PAR")]
    assert order[2] == SRS[2]
    assert order[:2] == sorted(SRS[:2], key=Explanation.sort_key)
    assert [s.explanation for s in rank(rank(scored, "PAR"), "PAR")] == order


def test_rank_ties_use_size_then_features():
    scored = score_explanations(CFS, None)
    order = [s.explanation.features for s in rank(scored, "RESP")]
    assert order == sorted(order)


def test_rank_missing_scores_last_and_unknown_key():
    scored = score_explanations(CFS, None)
    assert [s.explanation for s in rank(scored, "GEN")] == sorted(CFS, key=Explanation.sort_key)
    with pytest.raises(UnknownKey):
        rank(scored, "BOGUS")
    feats = build_report(16, {CF: CFS}).features[CF]
    top = rank_features(feats, "FI")
    assert top[0].feature == 4
    with pytest.raises(UnknownKey):
        rank_features(feats, "PAR")


def test_report_marks_undefined_scores_absent():
    rep = build_report(16, {SR: SRS, CF: CFS})
    by_feature = {fs.feature: fs.scores for fs in rep.features[SR]}
    assert by_feature[0]["FR"] is None and by_feature[0]["FI"] == 0
    assert by_feature[8]["FR"] == Fraction(1, 3)
    assert all(fs.scores["FG"] is None for fs in rep.features[CF])


def test_explanation_identity_ignores_source():
    a = Explanation(CF, {(3, 0), (4, 0)}, source=1)
    b = Explanation(CF, {(4, 0), (3, 0)}, source=7)
    assert a == b and hash(a) == hash(b)
    assert a != Explanation(SR, {(3, 0), (4, 0)})
    assert a != Explanation(CF, {(3, 1), (4, 0)})
    with pytest.raises(ValueError):
        Explanation(CF, set())
