"""Classification, ranking, and clustering metrics.

Everything here is brute-force verifiable: the ROC AUC is a trapezoid sum
over the tie-grouped ROC curve, clustering scores come straight from the
contingency table, and k-means is plain Lloyd iteration with farthest-point
style seeding. All operations are pure.
"""

import logging
from dataclasses import dataclass, asdict

import numpy as np

logger = logging.getLogger(__name__)


class MetricError(ValueError):
    """Undefined metric for the given inputs (e.g. single-class AUC)."""


def auc(scores, labels, positive=1) -> float:
    """Area under the ROC curve by trapezoid over tie-grouped thresholds.

    Ties contribute half credit. Raises MetricError when only one class is
    present.
    """
    scores = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels) == positive
    n_pos, n_neg = int(y.sum()), int((~y).sum())
    if n_pos == 0 or n_neg == 0:
        raise MetricError("AUC undefined: both classes must be present")
    order = np.argsort(-scores, kind="stable")
    y_sorted = y[order]
    s_sorted = scores[order]
    # close a group at every strict score drop
    boundaries = np.flatnonzero(np.diff(s_sorted) != 0)
    cut_points = np.concatenate([boundaries, [len(s_sorted) - 1]])
    tp = np.cumsum(y_sorted)[cut_points]
    fp = np.cumsum(~y_sorted)[cut_points]
    tpr = np.concatenate([[0.0], tp / n_pos])
    fpr = np.concatenate([[0.0], fp / n_neg])
    return float(np.trapezoid(tpr, fpr))


def confusion_counts(predictions, labels, positive=1):
    pred_pos = np.asarray(predictions) == positive
    true_pos = np.asarray(labels) == positive
    tp = int(np.sum(pred_pos & true_pos))
    fp = int(np.sum(pred_pos & ~true_pos))
    fn = int(np.sum(~pred_pos & true_pos))
    tn = int(np.sum(~pred_pos & ~true_pos))
    return tp, fp, tn, fn


def _safe_div(num, den, what):
    if den == 0:
        logger.debug("%s has a zero denominator, reporting 0", what)
        return 0.0
    return num / den


def recall(predictions, labels, positive=1) -> float:
    tp, _, _, fn = confusion_counts(predictions, labels, positive)
    return _safe_div(tp, tp + fn, "recall")


def precision(predictions, labels, positive=1) -> float:
    tp, fp, _, _ = confusion_counts(predictions, labels, positive)
    return _safe_div(tp, tp + fp, "precision")


def f1(predictions, labels, positive=1) -> float:
    p = precision(predictions, labels, positive)
    r = recall(predictions, labels, positive)
    return _safe_div(2.0 * p * r, p + r, "f1")


def _contingency(a, b):
    a = np.asarray(a)
    b = np.asarray(b)
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    table = np.zeros((ai.max() + 1, bi.max() + 1), dtype=np.int64)
    np.add.at(table, (ai, bi), 1)
    return table


def nmi(assignment, labels) -> float:
    """Mutual information normalized by the mean of the two entropies;
    defined as 0 when either partition has zero entropy."""
    table = _contingency(assignment, labels)
    n = table.sum()
    if n < 2:
        raise MetricError("NMI needs at least 2 points")
    pa = table.sum(axis=1) / n
    pb = table.sum(axis=0) / n
    ha = float(-(pa[pa > 0] * np.log(pa[pa > 0])).sum())
    hb = float(-(pb[pb > 0] * np.log(pb[pb > 0])).sum())
    if ha == 0.0 or hb == 0.0:
        return 0.0
    pij = table / n
    mask = pij > 0
    outer = np.outer(pa, pb)
    info = float((pij[mask] * np.log(pij[mask] / outer[mask])).sum())
    return info / ((ha + hb) / 2.0)


def ari(assignment, labels) -> float:
    """Adjusted Rand index from the pair-count formula."""
    table = _contingency(assignment, labels)
    n = table.sum()
    if n < 2:
        raise MetricError("ARI needs at least 2 points")

    def comb2(x):
        return x * (x - 1) / 2.0

    sum_ij = comb2(table.astype(np.float64)).sum()
    sum_a = comb2(table.sum(axis=1).astype(np.float64)).sum()
    sum_b = comb2(table.sum(axis=0).astype(np.float64)).sum()
    total = comb2(float(n))
    expected = sum_a * sum_b / total
    max_index = (sum_a + sum_b) / 2.0
    if max_index == expected:
        return 1.0 if sum_ij == max_index else 0.0
    return float((sum_ij - expected) / (max_index - expected))


def kmeans(points, k, restarts=8, seed=0, max_iter=100):
    """Lloyd's algorithm with distance-weighted (k-means++ style) seeding.

    Best of `restarts` runs by within-cluster sum of squares; an emptied
    cluster is reseeded at the point farthest from its centroid. Assignment
    ties go to the lowest cluster index. Deterministic given the seed.
    """
    x = np.asarray(points, dtype=np.float64)
    n = len(x)
    if not 1 <= k <= n:
        raise MetricError(f"k must lie in [1, {n}], got {k}")
    rng = np.random.default_rng(seed)
    best_assign, best_wcss = None, np.inf
    for _ in range(max(1, restarts)):
        centers = _seed_centers(x, k, rng)
        assign = None
        for _ in range(max_iter):
            d2 = ((x[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
            new_assign = np.argmin(d2, axis=1)
            if assign is not None and np.array_equal(new_assign, assign):
                break
            assign = new_assign
            for c in range(k):
                members = x[assign == c]
                if len(members):
                    centers[c] = members.mean(axis=0)
                else:
                    dist_own = ((x - centers[assign]) ** 2).sum(axis=1)
                    centers[c] = x[int(np.argmax(dist_own))]
        wcss = float(((x - centers[assign]) ** 2).sum())
        if wcss < best_wcss:
            best_wcss, best_assign = wcss, assign.copy()
    return best_assign


def _seed_centers(x, k, rng):
    centers = [x[rng.integers(len(x))]]
    for _ in range(1, k):
        d2 = np.min(((x[:, None, :] - np.asarray(centers)[None, :, :]) ** 2)
                    .sum(axis=2), axis=1)
        total = d2.sum()
        if total <= 0:
            centers.append(x[rng.integers(len(x))])
            continue
        centers.append(x[rng.choice(len(x), p=d2 / total)])
    return np.asarray(centers, dtype=np.float64)


@dataclass
class EvalReport:
    auc: float
    recall: float
    precision: float
    f1: float
    nmi: float
    ari: float
    tp: int
    fp: int
    tn: int
    fn: int

    def to_dict(self):
        return asdict(self)


def evaluate(probs, labels, embeddings, positive=1, cluster_seed=0,
             cluster_k=None) -> EvalReport:
    """Full report: ranking/classification on class probabilities plus
    clustering of the embeddings against the labels.

    Predictions are the argmax over class probabilities; the AUC score is
    the positive class's probability.
    """
    probs = np.asarray(probs, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    preds = np.argmax(probs, axis=1)
    tp, fp, tn, fn = confusion_counts(preds, labels, positive)
    k = cluster_k or int(labels.max()) + 1
    assign = kmeans(embeddings, k, seed=cluster_seed)
    return EvalReport(
        auc=auc(probs[:, positive], labels, positive),
        recall=recall(preds, labels, positive),
        precision=precision(preds, labels, positive),
        f1=f1(preds, labels, positive),
        nmi=nmi(assign, labels),
        ari=ari(assign, labels),
        tp=tp, fp=fp, tn=tn, fn=fn,
    )
