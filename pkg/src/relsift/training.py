"""End-to-end training: mini-batch semi-supervised learning with per-batch
class rebalancing, a composite loss (classification + per-layer similarity +
L2 norm), plain gradient descent, and one threshold-search epoch after each
pass over the data.

Everything stochastic flows from the config seed through named SeedSequence
children, so a (graph, config, seed) triple fully determines every trace
field and every embedding.
"""

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import aggregation as agg
from . import metrics
from .policies import make_policy
from .rsrl import RLForest
from .similarity import SimilarityParams, similarity_loss_and_grad

logger = logging.getLogger(__name__)

POLICIES = ("ac", "q", "bmab", "fixed")
ACTION_SPACES = ("discrete", "continuous")
MODES = ("transductive", "inductive")


@dataclass
class TrainConfig:
    epochs: int = 100
    batch_size: int = 256
    learning_rate: float = 0.01
    lambda_sim: float = 2.0
    lambda_reg: float = 0.001
    undersample_ratio: float = 1.0
    alpha: int = 10
    tau: float = 1.0
    deep_switching_number: int = 3
    backtracking: bool = True
    policy: str = "ac"
    action_space: str = "discrete"
    variant: str = "threshold"
    layers: int = 1
    embedding_dim: int = 64
    mode: str = "transductive"
    recursion: bool = True
    threshold_init: float = 0.5
    rl_learning_rate: float = 0.05
    rl_gamma: float = 0.95
    seed: int = 0
    positive_class: int | None = None

    def validate(self):
        if self.epochs < 0 or self.batch_size < 1 or self.layers < 1:
            raise ValueError("epochs must be >= 0, batch_size and layers >= 1")
        for name in ("learning_rate", "lambda_sim", "lambda_reg", "tau",
                     "rl_learning_rate", "rl_gamma"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        if self.learning_rate == 0 or self.rl_learning_rate == 0:
            raise ValueError("learning rates must be positive")
        if self.undersample_ratio < 0:
            raise ValueError("undersample_ratio must be nonnegative")
        if self.alpha < 2:
            raise ValueError("alpha must be at least 2")
        if self.deep_switching_number < 2:
            raise ValueError("deep_switching_number must be at least 2")
        if self.policy not in POLICIES:
            raise ValueError(f"policy must be one of {POLICIES}")
        if self.action_space not in ACTION_SPACES:
            raise ValueError(f"action_space must be one of {ACTION_SPACES}")
        if self.policy in ("q", "bmab") and self.action_space != "discrete":
            raise ValueError(f"policy {self.policy!r} is discrete-only")
        if self.variant not in agg.VARIANTS:
            raise ValueError(f"variant must be one of {agg.VARIANTS}")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if not 0.0 <= self.threshold_init <= 1.0:
            raise ValueError("threshold_init must lie in [0, 1]")
        if self.embedding_dim < 1:
            raise ValueError("embedding_dim must be positive")


def _rng(seed, *tags):
    return np.random.default_rng(np.random.SeedSequence((int(seed),) + tags))


def undersample_batch(nodes, labels, ratio, rng, positive):
    """Keep all positive-class nodes, downsample the rest to
    floor(ratio * positives) without replacement. A batch with no positives
    passes through unchanged."""
    nodes = np.asarray(nodes, dtype=np.int64)
    y = np.asarray(labels)[nodes]
    pos = nodes[y == positive]
    neg = nodes[y != positive]
    if len(pos) == 0:
        return nodes
    k = min(len(neg), int(math.floor(ratio * len(pos))))
    sampled = rng.choice(neg, size=k, replace=False) if k else neg[:0]
    return np.sort(np.concatenate([pos, sampled]))


def params_l2_norm(param_sets):
    total = 0.0
    for params in param_sets:
        for _, arr, _ in params.named_params():
            total += float((arr * arr).sum())
    return math.sqrt(total)


def total_loss(gnn_loss, sim_losses, param_sets, lambda_sim, lambda_reg):
    """gnn_loss + lambda_sim * sum(per-layer similarity losses) +
    lambda_reg * l2 norm of every trainable parameter."""
    return (float(gnn_loss) + lambda_sim * float(np.sum(sim_losses))
            + lambda_reg * params_l2_norm(param_sets))


@dataclass
class TrainState:
    gnn: agg.GnnParameters
    sim: SimilarityParams
    forest: RLForest | None
    thresholds: np.ndarray
    positive: int
    epoch: int = 0
    rng: np.random.Generator = None
    val_auc_history: list = field(default_factory=list)

    def param_sets(self):
        return (self.gnn, self.sim)

    def named_params(self):
        for params in self.param_sets():
            yield from params.named_params()

    def zero_grads(self):
        for params in self.param_sets():
            params.zero_grads()


@dataclass
class FitResult:
    state: TrainState
    embeddings: np.ndarray
    trace: list
    report: metrics.EvalReport
    config: TrainConfig


def _minority_class(labels, idx):
    counts = np.bincount(np.asarray(labels)[idx])
    return int(np.argmin(counts))


def init_state(graph, config: TrainConfig) -> TrainState:
    config.validate()
    layer_dims = [graph.feature_dim] + [config.embedding_dim] * config.layers
    sim = SimilarityParams(layer_dims[:-1], graph.num_classes,
                           rng=_rng(config.seed, 1))
    gnn = agg.GnnParameters(layer_dims, graph.num_classes, graph.num_relations,
                            config.variant, rng=_rng(config.seed, 2))
    positive = (config.positive_class if config.positive_class is not None
                else _minority_class(graph.labels, graph.train_idx))

    if config.policy == "fixed":
        forest = None
        thresholds = np.full((config.layers, graph.num_relations),
                             config.threshold_init)
    else:
        def factory(layer, relation, n_actions):
            return make_policy(config.policy, config.action_space, n_actions,
                               _rng(config.seed, 4, layer, relation),
                               learning_rate=config.rl_learning_rate,
                               gamma=config.rl_gamma)

        max_degrees = [rel.max_degree() for rel in graph.relations]
        forest = RLForest.build(config.layers, max_degrees, config.alpha, factory,
                                deep_switching_number=config.deep_switching_number,
                                backtracking=config.backtracking,
                                recursion=config.recursion, tau=config.tau)
        for row in forest.trees:
            for tree in row:
                tree.threshold = config.threshold_init
        thresholds = forest.thresholds()

    return TrainState(gnn=gnn, sim=sim, forest=forest, thresholds=thresholds,
                      positive=positive, rng=_rng(config.seed, 3))


def _batch_frontiers(relations, central, layers):
    """centrals[l-1] is the node set whose layer-l embeddings are needed;
    each earlier frontier widens by one raw-adjacency hop."""
    centrals = [np.asarray(central, dtype=np.int64)]
    for _ in range(layers - 1):
        prev = centrals[-1]
        nbrs = [rel.batch_edges(prev)[1] for rel in relations]
        centrals.append(np.unique(np.concatenate([prev] + nbrs)))
    centrals.reverse()
    return centrals


def _accumulate_stats(stats, caches):
    for cache in caches:
        for r, dists in enumerate(cache.retained_distances):
            key = (cache.layer, r)
            acc = stats.setdefault(key, [0.0, 0.0, 0])
            if len(dists):
                acc[0] += float(dists.sum())
                acc[1] += float((1.0 - dists).sum())
                acc[2] += len(dists)


def _train_batch(graph, relations, state: TrainState, config, batch, stats):
    """Forward, losses, exact backward, one gradient-descent step.

    Returns (gnn_loss, sim_loss_sum, total) or None when the composite loss
    came out non-finite (the caller restores the epoch snapshot)."""
    state.zero_grads()
    n = graph.num_nodes
    embeddings = [graph.features]
    caches = []
    sim_losses = []
    sim_grads = []

    centrals = _batch_frontiers(relations, batch, config.layers)
    for l in range(1, config.layers + 1):
        h_full, cache = agg.layer_forward(relations, state.gnn, state.sim,
                                          state.thresholds[l - 1], l,
                                          embeddings[l - 1], centrals[l - 1])
        loss_l, d_emb = similarity_loss_and_grad(state.sim, l, embeddings[l - 1],
                                                 graph.labels, batch,
                                                 scale=config.lambda_sim)
        embeddings.append(h_full)
        caches.append(cache)
        sim_losses.append(loss_l)
        sim_grads.append(d_emb)
    _accumulate_stats(stats, caches)

    gnn_loss, d_z = agg.classification_loss_and_grad(
        state.gnn, embeddings[-1][batch], graph.labels[batch])
    total = total_loss(gnn_loss, sim_losses, state.param_sets(),
                       config.lambda_sim, config.lambda_reg)
    if not math.isfinite(total):
        return None

    d_h = np.zeros((n, config.embedding_dim))
    d_h[batch] += d_z
    for l in range(config.layers, 0, -1):
        d_h = agg.layer_backward(state.gnn, caches[l - 1], d_h)
        d_h += sim_grads[l - 1]

    norm = params_l2_norm(state.param_sets())
    if norm > 0:
        for _, arr, grad in state.named_params():
            grad += config.lambda_reg * arr / norm
    for _, arr, grad in state.named_params():
        arr -= config.learning_rate * grad
    return gnn_loss, float(np.sum(sim_losses)), total


def embed_nodes(graph, relations, state: TrainState, config, nodes):
    """Embeddings of `nodes` under the current parameters and thresholds."""
    embeddings = [graph.features]
    centrals = _batch_frontiers(relations, nodes, config.layers)
    for l in range(1, config.layers + 1):
        h_full, _ = agg.layer_forward(relations, state.gnn, state.sim,
                                      state.thresholds[l - 1], l,
                                      embeddings[l - 1], centrals[l - 1])
        embeddings.append(h_full)
    return embeddings[-1][np.asarray(nodes, dtype=np.int64)]


def _validation_auc(graph, relations, state, config):
    if len(graph.val_idx) == 0:
        return 0.5
    z = embed_nodes(graph, relations, state, config, graph.val_idx)
    probs = agg.classifier_probs(state.gnn, z)
    try:
        return metrics.auc(probs[:, state.positive], graph.labels[graph.val_idx],
                           positive=state.positive)
    except metrics.MetricError:
        logger.debug("validation split is single-class, using AUC 0.5")
        return 0.5


def _fixed_policy_events(state, stats, config):
    events = []
    for l in range(1, config.layers + 1):
        for r in range(state.thresholds.shape[1]):
            dist_sum, sim_sum, count = stats.get((l, r), (0.0, 0.0, 0))
            events.append({
                "layer": l, "relation": r,
                "threshold": float(state.thresholds[l - 1, r]), "depth": 1,
                "state": dist_sum / count if count else 1.0,
                "reward": config.tau * sim_sum / count if count else 0.0,
                "terminated": False, "backtracked": False, "converged": False,
            })
    return events


def train_epoch(graph, relations, state: TrainState, config: TrainConfig):
    """One pass over shuffled training batches plus one search epoch.

    A non-finite composite loss aborts the epoch and restores the parameters
    captured at its start. Returns the epoch's trace record."""
    started = time.perf_counter()
    snapshot = [arr.copy() for _, arr, _ in state.named_params()]
    stats = {}
    losses = []
    aborted = False

    perm = state.rng.permutation(graph.train_idx)
    for start in range(0, len(perm), config.batch_size):
        chunk = perm[start:start + config.batch_size]
        batch = undersample_batch(chunk, graph.labels, config.undersample_ratio,
                                  state.rng, state.positive)
        result = _train_batch(graph, relations, state, config, batch, stats)
        if result is None:
            aborted = True
            logger.warning("epoch %d: non-finite loss, restoring parameters",
                           state.epoch + 1)
            for (_, arr, _), saved in zip(state.named_params(), snapshot):
                arr[:] = saved
            break
        losses.append(result)

    val_auc = _validation_auc(graph, relations, state, config)
    state.val_auc_history.append(val_auc)

    observations = {}
    for key, (dist_sum, sim_sum, count) in stats.items():
        if count:
            observations[key] = (dist_sum / count, config.tau * sim_sum / count)
        else:
            observations[key] = (None, None)
    if state.forest is not None:
        state.thresholds, events = state.forest.epoch(observations, val_auc)
    else:
        events = _fixed_policy_events(state, stats, config)

    state.epoch += 1
    mean = (lambda i: float(np.mean([x[i] for x in losses]))) if losses else (lambda i: None)
    return {
        "schema": 1,
        "epoch": state.epoch,
        "trees": events,
        "loss_gnn": mean(0),
        "loss_sim": mean(1),
        "loss_total": mean(2),
        "val_auc": val_auc,
        "aborted": aborted,
        "wall_ms": (time.perf_counter() - started) * 1000.0,
    }


def fit(graph, config: TrainConfig) -> FitResult:
    """Run the full training loop and evaluate on the test split.

    In inductive mode, training-time message passing only sees edges whose
    endpoints are both training nodes; final embeddings always use the full
    adjacency with the trained parameters and frozen thresholds.
    """
    state = init_state(graph, config)
    if config.mode == "inductive":
        relations = [rel.restrict_to(graph.train_idx) for rel in graph.relations]
    else:
        relations = graph.relations

    trace = []
    for _ in range(config.epochs):
        trace.append(train_epoch(graph, relations, state, config))

    all_nodes = np.arange(graph.num_nodes)
    embeddings = embed_nodes(graph, graph.relations, state, config, all_nodes)
    report = evaluate_embeddings(embeddings, state.gnn, graph.labels,
                                 graph.test_idx, state.positive, config.seed)
    return FitResult(state=state, embeddings=embeddings, trace=trace,
                     report=report, config=config)


def evaluate_embeddings(embeddings, gnn, labels, idx, positive, seed):
    """Shared by training and re-evaluation: metrics over one split."""
    idx = np.asarray(idx, dtype=np.int64)
    probs = agg.classifier_probs(gnn, embeddings[idx])
    return metrics.evaluate(probs, np.asarray(labels)[idx], embeddings[idx],
                            positive=positive, cluster_seed=seed)
