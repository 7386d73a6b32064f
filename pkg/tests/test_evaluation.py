import csv
import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from scenecf.errors import CoverageError
from scenecf.evaluation import binary_hit_at_k, evaluate, ndcg_at_k, precision_at_k, write_report_csv
from scenecf.retrieval import GroundTruth, RankTable

R = ["g7", "g2", "g3", "g5"]
REL = {"g3", "g7", "g1", "g9"}


def test_precision_examples():
    assert precision_at_k(["a", "b", "c", "d"], {"a", "b", "c", "d"}, 4) == 1.0
    assert precision_at_k(R, REL, 4) == 0.5
    assert precision_at_k(["x", "y"], {"z"}, 2) == 0.0


def test_ndcg_examples():
    expected = (1 + 1 / math.log2(4)) / (1 + 1 / math.log2(3) + 1 / math.log2(4) + 1 / math.log2(5))
    assert ndcg_at_k(R, REL, 4) == pytest.approx(expected, abs=1e-15)
    assert ndcg_at_k(R, REL, 4) == pytest.approx(0.5856, abs=1e-4)
    assert ndcg_at_k(R, {"g3"}, 4) == 0.5
    assert ndcg_at_k(["c", "a", "b"], {"a", "b", "c"}, 3) == 1.0
    with pytest.raises(ValueError):
        ndcg_at_k(R, set(), 2)


def test_binary_hit():
    assert binary_hit_at_k(R, "g7", 1) == 1
    assert binary_hit_at_k(R, "g9", 4) == 0
    assert binary_hit_at_k(R, "g3", 2) == 0 and binary_hit_at_k(R, "g3", 3) == 1


def _gt(ranks):
    return GroundTruth(RankTable({q: [(c, float(i)) for i, c in enumerate(lst)] for q, lst in ranks.items()}, "gt"), None)


def _table(ranks, tag="b"):
    return RankTable({q: [(c, 0.0) for c in lst] for q, lst in ranks.items()}, tag)


def test_self_evaluation_is_perfect():
    order = {"q1": ["a", "b", "c", "d", "e"], "q2": ["e", "d", "c", "b", "a"]}
    rep = evaluate(_gt(order), _table(order))
    assert set(rep.topk.values()) == {1.0} and set(rep.binary.values()) == {1.0}
    assert rep.query_count == 2


def test_reversed_rank():
    order = {"q": ["a", "b", "c", "d", "e"]}
    rep = evaluate(_gt(order), _table({"q": order["q"][::-1]}))
    assert rep.topk["P@1"] == 0.0 and rep.binary["P@1"] == 0.0


def test_ndcg_not_monotone_in_k():
    # misses the top-1 but recovers other relevant items later
    gt = _gt({"q": ["a", "b", "c", "d", "e", "f"]})
    rep = evaluate(gt, _table({"q": ["b", "c", "d", "a"]}))
    assert rep.topk["NDCG@1"] == 0.0
    assert rep.topk["NDCG@4"] > rep.topk["NDCG@1"]


def test_binary_precision_modes():
    gt = _gt({"q": ["a", "b", "c"]})
    ranks = _table({"q": ["b", "a", "c"]})
    hit = evaluate(gt, ranks)
    frac = evaluate(gt, ranks, binary_precision="fraction")
    assert hit.binary["P@2"] == 1.0 and frac.binary["P@2"] == 0.5
    assert hit.binary["P@4"] == 1.0 and frac.binary["P@4"] == 0.25


def test_query_mismatch():
    with pytest.raises(CoverageError):
        evaluate(_gt({"q": ["a"]}), _table({"r": ["a"]}))


def test_report_csv_layout(tmp_path):
    order = {"q": ["a", "b", "c"]}
    reports = [evaluate(_gt(order), _table(order, "gt")), evaluate(_gt(order), _table({"q": ["c", "b"]}, "rev"))]
    write_report_csv(reports, tmp_path / "t.csv", "topk")
    rows = list(csv.reader((tmp_path / "t.csv").open()))
    assert rows[0] == ["backend", "NDCG@4", "NDCG@2", "NDCG@1", "P@4", "P@2", "P@1"]
    assert rows[1] == ["gt"] + ["1.000000"] * 3 + ["0.750000", "1.000000", "1.000000"]
    assert rows[2][0] == "rev"


ids = [f"c{i}" for i in range(8)]


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 6))
def test_metric_invariants(seed, nq):
    rng = random.Random(seed)
    truth, ranks = {}, {}
    for q in range(nq):
        t = ids[:]
        rng.shuffle(t)
        r = t[:]
        rng.shuffle(r)
        truth[f"q{q}"], ranks[f"q{q}"] = t, r[: rng.randint(1, 8)]
    rep = evaluate(_gt(truth), _table(ranks), ks=(1, 2, 3, 4, 8))
    for mode in (rep.topk, rep.binary):
        assert all(0.0 <= v <= 1.0 for v in mode.values())
    # hit@1 and top-1 precision are the same per-query number
    assert rep.binary["P@1"] == rep.topk["P@1"]
    hits = [rep.binary[f"P@{k}"] for k in (1, 2, 3, 4, 8)]
    assert hits == sorted(hits)
    for q in truth:
        row = rep.per_query[q]
        assert [row[("binary", f"P@{k}")] for k in (1, 2, 3, 4, 8)] == sorted(
            row[("binary", f"P@{k}")] for k in (1, 2, 3, 4, 8)
        )
    # processing order of queries does not matter
    rev = evaluate(_gt(dict(reversed(list(truth.items())))), _table(dict(reversed(list(ranks.items())))),
                   ks=(1, 2, 3, 4, 8))
    assert rev.topk == rep.topk and rev.binary == rep.binary
