import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from relsift.metrics import (MetricError, ari, auc, confusion_counts,
                             evaluate, f1, kmeans, nmi, precision, recall)


def rank_statistic_auc(scores, labels):
    """Independent Mann-Whitney oracle with tie handling via average ranks."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels).astype(bool)
    order = np.argsort(scores, kind="stable")
    ranks = np.empty(len(scores))
    sorted_scores = scores[order]
    i = 0
    while i < len(scores):
        j = i
        while j + 1 < len(scores) and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    n_pos = labels.sum()
    n_neg = len(labels) - n_pos
    u = ranks[labels].sum() - n_pos * (n_pos + 1) / 2.0
    return u / (n_pos * n_neg)


# -- auc ------------------------------------------------------------------------

def test_auc_perfect_separation():
    assert auc([0.9, 0.8, 0.2, 0.1], [1, 1, 0, 0]) == 1.0


def test_auc_all_ties_is_half():
    assert auc([0.5, 0.5, 0.5, 0.5], [1, 0, 1, 0]) == pytest.approx(0.5)


def test_auc_pair_counting_example():
    # pos scores {0.9, 0.4}, neg {0.6, 0.1}: 3 winning pairs of 4
    assert auc([0.9, 0.4, 0.6, 0.1], [1, 1, 0, 0]) == pytest.approx(0.75)


def test_auc_single_class_undefined():
    with pytest.raises(MetricError):
        auc([0.1, 0.2], [1, 1])


def test_auc_matches_rank_statistic_on_random_draws():
    rng = np.random.default_rng(5)
    for _ in range(200):
        n = int(rng.integers(4, 60))
        labels = rng.integers(0, 2, size=n)
        if labels.min() == labels.max():
            labels[0] = 1 - labels[0]
        scores = np.round(rng.random(n), int(rng.integers(1, 4)))
        assert abs(auc(scores, labels) - rank_statistic_auc(scores, labels)) < 1e-9


@given(st.integers(0, 10_000))
@settings(max_examples=30, deadline=None)
def test_auc_invariant_under_monotone_transform(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(4, 40))
    labels = rng.integers(0, 2, size=n)
    if labels.min() == labels.max():
        labels[0] = 1 - labels[0]
    scores = rng.normal(size=n)
    base = auc(scores, labels)
    assert auc(3 * scores + 7, labels) == pytest.approx(base, abs=1e-12)
    assert auc(np.exp(scores), labels) == pytest.approx(base, abs=1e-12)


# -- classification -----------------------------------------------------------------

def test_perfect_predictions():
    preds = labels = np.array([0, 1, 1, 0])
    assert recall(preds, labels) == precision(preds, labels) == f1(preds, labels) == 1.0


def test_all_negative_predictions_zero_recall():
    assert recall(np.zeros(4), [0, 1, 1, 0]) == 0.0
    assert precision(np.zeros(4), [0, 1, 1, 0]) == 0.0


def test_textbook_counts():
    # TP=3, FN=1, FP=2
    preds = [1, 1, 1, 0, 1, 1, 0]
    labels = [1, 1, 1, 1, 0, 0, 0]
    tp, fp, tn, fn = confusion_counts(preds, labels)
    assert (tp, fp, fn) == (3, 2, 1)
    assert recall(preds, labels) == pytest.approx(0.75)
    assert precision(preds, labels) == pytest.approx(0.6)
    assert f1(preds, labels) == pytest.approx(2 * 0.6 * 0.75 / 1.35)


@given(st.integers(0, 10_000))
@settings(max_examples=30, deadline=None)
def test_f1_consistent_with_parts(seed):
    rng = np.random.default_rng(seed)
    preds = rng.integers(0, 2, size=20)
    labels = rng.integers(0, 2, size=20)
    p, r = precision(preds, labels), recall(preds, labels)
    expected = 0.0 if p + r == 0 else 2 * p * r / (p + r)
    assert abs(f1(preds, labels) - expected) < 1e-12


# -- clustering scores ------------------------------------------------------------------

def test_identical_partitions():
    labels = [0, 0, 1, 1, 2]
    assert nmi(labels, labels) == pytest.approx(1.0)
    assert ari(labels, labels) == pytest.approx(1.0)


def test_relabeling_invariance():
    labels = [0, 0, 1, 1, 2, 2]
    renamed = [2, 2, 0, 0, 1, 1]
    assert nmi(renamed, labels) == pytest.approx(1.0)
    assert ari(renamed, labels) == pytest.approx(1.0)


def test_ari_four_point_hand_enumeration():
    labels = [0, 0, 1, 1]
    clusters = [0, 1, 0, 1]
    # contingency [[1,1],[1,1]]: sum_ij C(n_ij,2)=0, a=b=2, n=4
    # expected = 2*2/6, max = 2 -> ARI = (0 - 2/3)/(2 - 2/3) = -0.5
    assert ari(clusters, labels) == pytest.approx(-0.5)

    def brute_force_ari(a, b):
        a, b = np.asarray(a), np.asarray(b)
        same_a = lambda i, j: a[i] == a[j]
        same_b = lambda i, j: b[i] == b[j]
        pairs = list(itertools.combinations(range(len(a)), 2))
        n11 = sum(same_a(i, j) and same_b(i, j) for i, j in pairs)
        n00 = sum(not same_a(i, j) and not same_b(i, j) for i, j in pairs)
        # Rand index, adjusted by expectation (pair-count formula)
        sum_ij = n11
        sum_a = sum(same_a(i, j) for i, j in pairs)
        sum_b = sum(same_b(i, j) for i, j in pairs)
        total = len(pairs)
        expected = sum_a * sum_b / total
        max_index = (sum_a + sum_b) / 2
        return (sum_ij - expected) / (max_index - expected)

    assert ari(clusters, labels) == pytest.approx(brute_force_ari(clusters, labels))


def test_nmi_hand_case_and_zero_entropy_guard():
    assert nmi([0, 0, 0, 0], [0, 1, 0, 1]) == 0.0
    # half-informative case against direct contingency computation
    labels = [0, 0, 1, 1]
    clusters = [0, 1, 0, 1]
    assert nmi(clusters, labels) == pytest.approx(0.0, abs=1e-12)


def test_ari_null_distribution_near_zero():
    rng = np.random.default_rng(11)
    labels = rng.integers(0, 2, size=200)
    values = []
    for _ in range(100):
        shuffled = labels.copy()
        rng.shuffle(shuffled)
        values.append(ari(shuffled, labels))
    assert abs(np.mean(values)) < 0.05


def test_scores_match_scikit_learn_oracle():
    sklearn = pytest.importorskip("sklearn.metrics")
    rng = np.random.default_rng(21)
    for _ in range(25):
        n = int(rng.integers(5, 80))
        a = rng.integers(0, 4, size=n)
        b = rng.integers(0, 3, size=n)
        assert nmi(a, b) == pytest.approx(
            sklearn.normalized_mutual_info_score(b, a), abs=1e-9)
        assert ari(a, b) == pytest.approx(
            sklearn.adjusted_rand_score(b, a), abs=1e-9)
        labels = rng.integers(0, 2, size=n)
        if labels.min() == labels.max():
            labels[0] = 1 - labels[0]
        scores = rng.normal(size=n)
        assert auc(scores, labels) == pytest.approx(
            sklearn.roc_auc_score(labels, scores), abs=1e-9)


# -- kmeans -----------------------------------------------------------------------------

def test_kmeans_separated_blobs():
    hits = 0
    for seed in range(50):
        rng = np.random.default_rng(seed)
        a = rng.normal(size=(20, 2)) + [10, 0]
        b = rng.normal(size=(20, 2)) - [10, 0]
        points = np.vstack([a, b])
        assign = kmeans(points, 2, seed=seed)
        first, second = assign[:20], assign[20:]
        if len(set(first)) == 1 and len(set(second)) == 1 and first[0] != second[0]:
            hits += 1
    assert hits == 50


def test_kmeans_k_equals_n():
    points = np.arange(10.0).reshape(5, 2)
    assign = kmeans(points, 5, seed=0)
    assert len(set(assign)) == 5
    centers = np.array([points[assign == c].mean(axis=0) for c in range(5)])
    wcss = ((points - centers[assign]) ** 2).sum()
    assert wcss == pytest.approx(0.0)


def test_kmeans_k_one_centroid_is_mean():
    rng = np.random.default_rng(0)
    points = rng.normal(size=(12, 3))
    assign = kmeans(points, 1, seed=0)
    assert set(assign) == {0}


def test_kmeans_bad_k():
    with pytest.raises(MetricError):
        kmeans(np.zeros((3, 2)), 4)


def test_kmeans_deterministic():
    rng = np.random.default_rng(3)
    points = rng.normal(size=(30, 4))
    assert np.array_equal(kmeans(points, 3, seed=9), kmeans(points, 3, seed=9))


# -- report ------------------------------------------------------------------------------

def test_evaluate_full_report():
    rng = np.random.default_rng(8)
    emb = np.vstack([rng.normal(size=(30, 4)) + 5, rng.normal(size=(30, 4)) - 5])
    labels = np.array([0] * 30 + [1] * 30)
    probs = np.zeros((60, 2))
    probs[:30, 0] = 0.9
    probs[:30, 1] = 0.1
    probs[30:, 0] = 0.2
    probs[30:, 1] = 0.8
    report = evaluate(probs, labels, emb, positive=1, cluster_seed=0)
    assert report.auc == 1.0
    assert report.recall == 1.0 and report.precision == 1.0 and report.f1 == 1.0
    assert report.nmi == pytest.approx(1.0)
    assert report.ari == pytest.approx(1.0)
    assert report.tp + report.fp + report.tn + report.fn == 60
    d = report.to_dict()
    assert set(d) == {"auc", "recall", "precision", "f1", "nmi", "ari",
                      "tp", "fp", "tn", "fn"}
