"""Label-aware neural similarity: one linear class predictor per layer.

The distance between two nodes is the l1 distance between the tanh-activated
class scores of their embeddings; similarity is one minus that distance. The
predictor trains on a softmax cross-entropy against node labels. tanh feeds
the distance path, softmax the loss path: tanh outputs cannot form a
categorical distribution, so the cross entropy is taken over the same logits
through softmax.
"""

import numpy as np


class ShapeError(ValueError):
    pass


class SimilarityParams:
    """Per-layer affine class predictors with paired gradient buffers.

    Layer l (1-based) consumes layer l-1 embeddings of width layer_dims[l-1]
    and produces num_classes scores.
    """

    def __init__(self, layer_dims, num_classes, rng=None):
        self.layer_dims = list(layer_dims)
        self.num_classes = int(num_classes)
        rng = rng or np.random.default_rng(0)
        self.weights, self.biases = [], []
        for d in self.layer_dims:
            scale = 1.0 / np.sqrt(d)
            self.weights.append(rng.normal(0.0, scale, size=(d, self.num_classes)))
            self.biases.append(np.zeros(self.num_classes))
        self.grad_weights = [np.zeros_like(w) for w in self.weights]
        self.grad_biases = [np.zeros_like(b) for b in self.biases]

    @property
    def num_layers(self):
        return len(self.weights)

    def zero_grads(self):
        for g in self.grad_weights:
            g[:] = 0.0
        for g in self.grad_biases:
            g[:] = 0.0

    def named_params(self):
        for l, (w, gw) in enumerate(zip(self.weights, self.grad_weights), start=1):
            yield f"sim.w{l}", w, gw
        for l, (b, gb) in enumerate(zip(self.biases, self.grad_biases), start=1):
            yield f"sim.b{l}", b, gb


def fcn_scores(params: SimilarityParams, layer: int, embeddings) -> np.ndarray:
    """Raw affine class scores (rows x C) for layer `layer` (1-based)."""
    emb = np.atleast_2d(np.asarray(embeddings, dtype=np.float64))
    w = params.weights[layer - 1]
    if emb.shape[1] != w.shape[0]:
        raise ShapeError(
            f"layer {layer} expects width {w.shape[0]}, got {emb.shape[1]}"
        )
    return emb @ w + params.biases[layer - 1]


def node_distance(params: SimilarityParams, layer: int, h_v, h_w) -> float:
    """l1 distance between tanh-activated class scores; in [0, 2C]."""
    scores = fcn_scores(params, layer, np.stack([np.ravel(h_v), np.ravel(h_w)]))
    t = np.tanh(scores)
    return float(np.abs(t[0] - t[1]).sum())


def node_similarity(params: SimilarityParams, layer: int, h_v, h_w) -> float:
    """1 - distance; equals 1 iff the activated score vectors coincide."""
    return 1.0 - node_distance(params, layer, h_v, h_w)


def edge_distances(tanh_scores, src, dst) -> np.ndarray:
    """Per-edge l1 distances given cached tanh scores per node."""
    diff = tanh_scores[np.asarray(src)] - tanh_scores[np.asarray(dst)]
    return np.abs(diff).sum(axis=1)


def _log_softmax(logits):
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def similarity_loss_and_grad(params: SimilarityParams, layer: int, embeddings,
                             labels, node_subset, scale=1.0):
    """Mean cross-entropy of the layer's predictor over `node_subset` rows.

    Accumulates scale * gradients into the parameter buffers and returns
    (loss, d_embeddings) where d_embeddings matches `embeddings` in shape and
    is zero outside the subset. Log-sum-exp keeps the loss finite.
    """
    emb = np.asarray(embeddings, dtype=np.float64)
    subset = np.asarray(node_subset, dtype=np.int64)
    if subset.size == 0:
        raise ValueError("node_subset must be nonempty")
    y = np.asarray(labels, dtype=np.int64)[subset]
    rows = emb[subset]
    logits = fcn_scores(params, layer, rows)
    logp = _log_softmax(logits)
    loss = float(-logp[np.arange(len(subset)), y].mean())

    probs = np.exp(logp)
    d_logits = probs
    d_logits[np.arange(len(subset)), y] -= 1.0
    d_logits *= scale / len(subset)
    w = params.weights[layer - 1]
    params.grad_weights[layer - 1] += rows.T @ d_logits
    params.grad_biases[layer - 1] += d_logits.sum(axis=0)
    d_emb = np.zeros_like(emb)
    d_emb[subset] = d_logits @ w.T
    return loss, d_emb
