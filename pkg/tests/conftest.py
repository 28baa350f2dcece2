"""Shared fixtures and oracles for the test suite."""

import numpy as np
import pytest

from relsift.graph import (MultiRelationalGraph, RelationAdjacency, RelationSpec,
                           SyntheticSpec, generate_synthetic)
from relsift.training import TrainConfig


def small_ring_graph(n=8, d_in=4, num_classes=2, num_relations=2, seed=0):
    """Tiny deterministic graph: each node linked to its next two neighbors."""
    rng = np.random.default_rng(seed)
    features = rng.normal(size=(n, d_in))
    labels = rng.integers(0, num_classes, size=n)
    labels[:num_classes] = np.arange(num_classes)  # every class present
    relations = [
        RelationAdjacency.from_edges(
            n, [(i, (i + k + 1 + r) % n) for i in range(n) for k in range(2)],
            name=f"r{r}")
        for r in range(num_relations)
    ]
    idx = rng.permutation(n)
    return MultiRelationalGraph(features, labels, relations,
                                idx[: n // 2], idx[n // 2: n // 2 + n // 4],
                                idx[n // 2 + n // 4:])


def benchmark_spec(seed):
    """The desk-scale benchmark graph used across trainer and acceptance
    tests: one clean sparse relation, one dense noisy one."""
    return SyntheticSpec(
        num_nodes=1000, num_classes=2, feature_dim=8,
        class_balance=(0.6, 0.4),
        relations=[RelationSpec(2500, 0.9, "hi"), RelationSpec(6000, 0.1, "lo")],
        camouflage_rate=0.2, class_separation=6.0, feature_noise=0.5,
        seed=seed)


def benchmark_graph(seed):
    return generate_synthetic(benchmark_spec(seed))


def benchmark_config(seed, **overrides):
    kwargs = dict(epochs=150, batch_size=96, embedding_dim=32, seed=seed)
    kwargs.update(overrides)
    return TrainConfig(**kwargs)


def finite_difference(loss_fn, arrays, eps=1e-5):
    """Central finite differences of loss_fn w.r.t. every array element.

    Returns a list of gradient arrays matching `arrays`."""
    grads = []
    for arr in arrays:
        grad = np.zeros_like(arr)
        flat, gflat = arr.ravel(), grad.ravel()
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            plus = loss_fn()
            flat[i] = orig - eps
            minus = loss_fn()
            flat[i] = orig
            gflat[i] = (plus - minus) / (2 * eps)
        grads.append(grad)
    return grads


def max_relative_error(analytic, numeric, floor=1e-8):
    worst = 0.0
    for a, n in zip(analytic, numeric):
        denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
        worst = max(worst, float((np.abs(a - n) / denom).max()))
    return worst


class GreedyProbe:
    """Deterministic explore-then-commit test policy: tries every discrete
    action once, then repeats the best-rewarded one."""

    kind = "discrete"

    def __init__(self, n_actions):
        self.greedy = False
        self.reset(n_actions)

    def reset(self, n_actions=None):
        if n_actions is not None:
            self.n_actions = int(n_actions)
        self.rewards = np.full(self.n_actions, -np.inf)
        self.next_probe = 0

    def predict(self, state):
        if self.next_probe < self.n_actions:
            action = self.next_probe
            self.next_probe += 1
            return action
        return int(np.argmax(self.rewards))

    def update(self, s_prev, s, a_prev, reward):
        self.rewards[int(a_prev)] = reward


class FixedActionStub:
    """Test policy that always emits one action index."""

    kind = "discrete"

    def __init__(self, action):
        self.action = int(action)
        self.greedy = True
        self.updates = 0
        self.predictions = 0

    def reset(self, n_actions=None):
        pass

    def predict(self, state):
        self.predictions += 1
        return self.action

    def update(self, s_prev, s, a_prev, reward):
        self.updates += 1


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
