import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from midistring.models.metrics import (
    accuracy, average_precision, chance_baselines, harmonic, per_class_f1, positive_rank, ranking_metrics,
    weighted_f1,
)
from midistring.models.ranking import RankedQuery, cosine, order_by_score

from .oracles import f1_bruteforce, hits_bruteforce, map_bruteforce, rank_of


def test_f1_hand_example():
    # class 0: P=2/3, R=1 -> 0.8 (support 2); class 1: 0 (support 1)
    assert weighted_f1([0, 0, 1], [0, 0, 0], 2) == pytest.approx(1.6 / 3, abs=1e-12)


def test_f1_perfect_and_zero_classes():
    assert weighted_f1([2, 0, 1], [2, 0, 1], 5) == 1.0
    f1, support = per_class_f1([0, 1], [1, 0], 3)
    assert f1.tolist() == [0, 0, 0] and support.tolist() == [1, 1, 0]


def test_f1_errors():
    with pytest.raises(ValueError):
        weighted_f1([0, 1], [0], 2)
    with pytest.raises(ValueError):
        weighted_f1([0, 3], [0, 1], 3)


@settings(max_examples=200)
@given(st.integers(1, 6).flatmap(lambda k: st.tuples(
    st.just(k), st.lists(st.tuples(st.integers(0, k - 1), st.integers(0, k - 1)), min_size=1, max_size=40))))
def test_f1_matches_bruteforce(case):
    k, pairs = case
    yt, yp = [a for a, _ in pairs], [b for _, b in pairs]
    assert abs(weighted_f1(yt, yp, k) - f1_bruteforce(yt, yp, k)) < 1e-12


def test_accuracy():
    assert accuracy([1, 2, 3, 4], [1, 2, 0, 0]) == 0.5


def test_ranking_hand_values():
    m = ranking_metrics([1, 2, 4, 50])
    assert m["MAP"] == pytest.approx((1 + 0.5 + 0.25 + 0.02) / 4)
    assert (m["HITS@1"], m["HITS@5"], m["HITS@10"], m["HITS@25"]) == (0.25, 0.75, 0.75, 0.75)
    assert average_precision(4) == 0.25


@settings(max_examples=200)
@given(st.lists(st.integers(1, 50), min_size=1, max_size=60))
def test_ranking_matches_bruteforce(ranks):
    m = ranking_metrics(ranks)
    assert abs(m["MAP"] - map_bruteforce(ranks)) < 1e-12
    for k in (1, 5, 10, 25):
        assert abs(m[f"HITS@{k}"] - hits_bruteforce(ranks, k)) < 1e-12


@settings(max_examples=100)
@given(st.lists(st.sampled_from([0.0, 0.5, 1.0, -1.0, 0.25]), min_size=50, max_size=50), st.integers(0, 49))
def test_order_by_score_matches_rank_oracle(scores, pos):
    assert positive_rank(order_by_score(scores), pos) == rank_of(scores, pos)


def test_order_ties_by_index():
    assert order_by_score([0.5, 0.9, 0.5, 0.9]) == [1, 3, 0, 2]


def test_cosine():
    assert cosine(np.array([1, 0]), np.array([1, 1])) == pytest.approx(1 / np.sqrt(2))
    assert cosine(np.zeros(3), np.ones(3)) is None


def test_chance_baselines():
    c = chance_baselines("ranking")
    assert c["MAP"] == pytest.approx(harmonic(50) / 50) and c["MAP"] == pytest.approx(0.0900, abs=1e-4)
    assert [c[f"HITS@{k}"] for k in (1, 5, 10, 25)] == [0.02, 0.1, 0.2, 0.5]
    assert chance_baselines("classification", 13)["weighted_f1"] == pytest.approx(0.077, abs=5e-4)
    assert chance_baselines("classification", 25)["weighted_f1"] == pytest.approx(0.040, abs=5e-4)
    with pytest.raises(ValueError):
        chance_baselines("classification")


def test_monte_carlo_random_ranking():
    rng = np.random.default_rng(0)
    ranks = rng.integers(1, 51, 20_000)
    m = ranking_metrics(ranks)
    c = chance_baselines("ranking")
    assert abs(m["MAP"] - c["MAP"]) < 0.005
    for k in (1, 5, 10, 25):
        assert abs(m[f"HITS@{k}"] - c[f"HITS@{k}"]) < 0.01


def test_ranked_query_validation():
    src = np.zeros((64, 128), dtype=np.uint8)
    with pytest.raises(ValueError):
        RankedQuery(src, np.zeros((49, 64, 128), dtype=np.uint8), 0)
    with pytest.raises(ValueError):
        RankedQuery(src, np.zeros((50, 64, 128), dtype=np.uint8), 50)
