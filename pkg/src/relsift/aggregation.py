"""Neighbor aggregation with hand-written reverse-mode gradients.

Per layer: each relation's retained neighbors are mean-pooled and passed
through ReLU (intra-relation step), the relation embeddings are combined by
one of four variants (threshold-weighted sum, attention, learned scalar
weights, or plain mean), and the combination is concatenated with the node's
own previous embedding and projected through a learned affine map plus ReLU.
Thresholds entering the combination are search outputs and are treated as
constants in backward. ReLU subgradient at zero is zero.
"""

from dataclasses import dataclass, field

import numpy as np

from .sampling import RetainedEdges, top_p_sample
from .similarity import ShapeError, edge_distances, fcn_scores

VARIANTS = ("threshold", "attention", "weight", "mean")


class GnnParameters:
    """Projection, variant, and classifier parameters with gradient buffers.

    layer_dims = [d_in, d_1, ..., d_L]; layer l projects the concatenation of
    the previous embedding and the combined relation term, width 2 * d_{l-1},
    down to d_l. The final classifier maps d_L to num_classes.
    """

    def __init__(self, layer_dims, num_classes, num_relations, variant, rng=None):
        if variant not in VARIANTS:
            raise ValueError(f"unknown inter-aggregation variant {variant!r}")
        self.layer_dims = list(layer_dims)
        self.num_classes = int(num_classes)
        self.num_relations = int(num_relations)
        self.variant = variant
        rng = rng or np.random.default_rng(0)

        self.proj_w, self.proj_b = [], []
        for d_prev, d_out in zip(self.layer_dims[:-1], self.layer_dims[1:]):
            scale = 1.0 / np.sqrt(2 * d_prev)
            self.proj_w.append(rng.normal(0.0, scale, size=(2 * d_prev, d_out)))
            self.proj_b.append(np.zeros(d_out))
        self.att_scores = np.zeros(num_relations) if variant == "attention" else None
        self.rel_weights = np.ones(num_relations) if variant == "weight" else None
        d_last = self.layer_dims[-1]
        self.clf_w = rng.normal(0.0, 1.0 / np.sqrt(d_last), size=(d_last, num_classes))
        self.clf_b = np.zeros(num_classes)

        self.grad_proj_w = [np.zeros_like(w) for w in self.proj_w]
        self.grad_proj_b = [np.zeros_like(b) for b in self.proj_b]
        self.grad_att_scores = (np.zeros_like(self.att_scores)
                                if self.att_scores is not None else None)
        self.grad_rel_weights = (np.zeros_like(self.rel_weights)
                                 if self.rel_weights is not None else None)
        self.grad_clf_w = np.zeros_like(self.clf_w)
        self.grad_clf_b = np.zeros_like(self.clf_b)

    @property
    def num_layers(self):
        return len(self.proj_w)

    def named_params(self):
        for l, (w, gw) in enumerate(zip(self.proj_w, self.grad_proj_w), start=1):
            yield f"gnn.proj_w{l}", w, gw
        for l, (b, gb) in enumerate(zip(self.proj_b, self.grad_proj_b), start=1):
            yield f"gnn.proj_b{l}", b, gb
        if self.att_scores is not None:
            yield "gnn.att_scores", self.att_scores, self.grad_att_scores
        if self.rel_weights is not None:
            yield "gnn.rel_weights", self.rel_weights, self.grad_rel_weights
        yield "gnn.clf_w", self.clf_w, self.grad_clf_w
        yield "gnn.clf_b", self.clf_b, self.grad_clf_b

    def zero_grads(self):
        for _, _, g in self.named_params():
            g[:] = 0.0

    def attention_weights(self):
        e = np.exp(self.att_scores - self.att_scores.max())
        return e / e.sum()


def segment_sum(values, offsets):
    """Row sums of `values` per CSR segment, zeros for empty segments."""
    n_seg = len(offsets) - 1
    out = np.zeros((n_seg, values.shape[1]) if values.ndim == 2 else n_seg)
    starts = offsets[:-1]
    nonempty = starts < offsets[1:]
    if len(values) and nonempty.any():
        out[nonempty] = np.add.reduceat(values, starts[nonempty], axis=0)
    return out


def intra_relation_aggregate(prev_emb, retained: RetainedEdges):
    """ReLU(mean of previous-layer embeddings over retained neighbors).

    Rows with no retained neighbors come out as zero vectors; self
    information flows through the concatenation path instead. Returns
    (output, relu_mask, counts) with the pieces backward needs.
    """
    counts = retained.counts()
    sums = segment_sum(prev_emb[retained.neighbors], retained.offsets)
    mean = sums / np.maximum(counts, 1)[:, None]
    out = np.maximum(mean, 0.0)
    return out, mean > 0, counts


def combine_relations(params: GnnParameters, rel_embs, thresholds):
    """Variant-specific combination of per-relation embeddings."""
    if params.variant == "threshold":
        weights = np.asarray(thresholds, dtype=np.float64)
    elif params.variant == "attention":
        weights = params.attention_weights()
    elif params.variant == "weight":
        weights = params.rel_weights
    else:  # mean
        weights = np.full(len(rel_embs), 1.0 / len(rel_embs))
    m = np.zeros_like(rel_embs[0])
    for w_r, h_r in zip(weights, rel_embs):
        m += w_r * h_r
    return m, weights


def inter_relation_aggregate(params: GnnParameters, layer, self_emb, rel_embs,
                             thresholds):
    """ReLU(proj @ concat(self, combined relation term) + bias)."""
    d_prev = params.layer_dims[layer - 1]
    if self_emb.shape[1] != d_prev:
        raise ShapeError(f"layer {layer} expects self width {d_prev}")
    for h_r in rel_embs:
        if h_r.shape != self_emb.shape:
            raise ShapeError("relation embeddings must match the self embedding shape")
    m, weights = combine_relations(params, rel_embs, thresholds)
    concat = np.concatenate([self_emb, m], axis=1)
    pre = concat @ params.proj_w[layer - 1] + params.proj_b[layer - 1]
    out = np.maximum(pre, 0.0)
    return out, {"concat": concat, "pre_mask": pre > 0, "m": m, "weights": weights}


@dataclass
class LayerCache:
    """Everything layer_backward needs, plus retained-edge statistics."""
    layer: int
    central: np.ndarray
    retained: list
    rel_embs: list
    intra_masks: list
    counts: list
    inter: dict
    thresholds: np.ndarray
    retained_distances: list = field(default_factory=list)
    d_thresholds: np.ndarray | None = None


def layer_forward(relations, gnn: GnnParameters, sim_params, thresholds_row,
                  layer, prev_emb, central, retained_override=None):
    """One aggregation layer over the batch frontier.

    Scores the frontier once with the layer's similarity predictor, filters
    each central node's neighbor lists per relation at that relation's
    threshold, then runs the intra- and inter-relation steps. Returns
    (h_full, cache) where h_full is an (n, d_l) buffer with valid rows only
    at `central`. Pass `retained_override` to reuse previously computed
    retained edge sets (filtering held fixed).
    """
    central = np.asarray(central, dtype=np.int64)
    n = prev_emb.shape[0]

    batch_edges = [rel.batch_edges(central) for rel in relations]
    needed = np.unique(np.concatenate([central]
                                      + [nbr for _, nbr in batch_edges]))
    tanh_scores = np.zeros((n, gnn.num_classes))
    tanh_scores[needed] = np.tanh(fcn_scores(sim_params, layer, prev_emb[needed]))

    retained_list, rel_embs, intra_masks, counts_list, rel_dists = [], [], [], [], []
    for r, (rel, (loc_off, nbr)) in enumerate(zip(relations, batch_edges)):
        central_rep = np.repeat(central, np.diff(loc_off))
        dist = edge_distances(tanh_scores, central_rep, nbr)
        if retained_override is not None:
            retained = retained_override[r]
        else:
            retained = top_p_sample(central, loc_off, nbr, 1.0 - dist,
                                    float(thresholds_row[r]))
        retained_list.append(retained)
        rel_dists.append(dist[retained.positions])
        out, mask, counts = intra_relation_aggregate(prev_emb, retained)
        rel_embs.append(out)
        intra_masks.append(mask)
        counts_list.append(counts)

    h, inter_cache = inter_relation_aggregate(gnn, layer, prev_emb[central],
                                              rel_embs, thresholds_row)
    h_full = np.zeros((n, gnn.layer_dims[layer]))
    h_full[central] = h
    cache = LayerCache(layer=layer, central=central, retained=retained_list,
                       rel_embs=rel_embs, intra_masks=intra_masks,
                       counts=counts_list, inter=inter_cache,
                       thresholds=np.asarray(thresholds_row, dtype=np.float64),
                       retained_distances=rel_dists)
    return h_full, cache


def layer_backward(gnn: GnnParameters, cache: LayerCache, d_h_full):
    """Reverse of layer_forward; accumulates parameter gradients and returns
    the gradient w.r.t. the previous layer's embedding buffer. Also records
    the partial w.r.t. each threshold (weighting path only) in the cache."""
    layer = cache.layer
    central = cache.central
    d_prev_dim = gnn.layer_dims[layer - 1]
    d_h = d_h_full[central]

    d_pre = d_h * cache.inter["pre_mask"]
    gw = gnn.grad_proj_w[layer - 1]
    gw += cache.inter["concat"].T @ d_pre
    gnn.grad_proj_b[layer - 1] += d_pre.sum(axis=0)
    d_concat = d_pre @ gnn.proj_w[layer - 1].T
    d_self = d_concat[:, :d_prev_dim]
    d_m = d_concat[:, d_prev_dim:]

    weights = cache.inter["weights"]
    d_rel = [w_r * d_m for w_r in weights]
    cache.d_thresholds = np.array(
        [float((d_m * h_r).sum()) for h_r in cache.rel_embs])
    if gnn.variant == "attention":
        d_weights = cache.d_thresholds
        s = weights
        gnn.grad_att_scores += s * (d_weights - float(s @ d_weights))
    elif gnn.variant == "weight":
        gnn.grad_rel_weights += cache.d_thresholds

    n = d_h_full.shape[0]
    d_prev_full = np.zeros((n, d_prev_dim))
    for retained, mask, counts, d_r in zip(cache.retained, cache.intra_masks,
                                           cache.counts, d_rel):
        if retained.num_edges == 0:
            continue
        contrib = (d_r * mask) / np.maximum(counts, 1)[:, None]
        np.add.at(d_prev_full, retained.neighbors, contrib[retained.segment_ids()])
    d_prev_full[central] += d_self
    return d_prev_full


def classifier_probs(gnn: GnnParameters, z):
    logits = z @ gnn.clf_w + gnn.clf_b
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def classification_loss_and_grad(gnn: GnnParameters, z, labels):
    """Mean cross-entropy of the final classifier over the batch rows.

    Accumulates classifier gradients and returns (loss, d_z)."""
    y = np.asarray(labels, dtype=np.int64)
    logits = z @ gnn.clf_w + gnn.clf_b
    shifted = logits - logits.max(axis=1, keepdims=True)
    logp = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    loss = float(-logp[np.arange(len(y)), y].mean())
    d_logits = np.exp(logp)
    d_logits[np.arange(len(y)), y] -= 1.0
    d_logits /= len(y)
    gnn.grad_clf_w += z.T @ d_logits
    gnn.grad_clf_b += d_logits.sum(axis=0)
    return loss, d_logits @ gnn.clf_w.T
