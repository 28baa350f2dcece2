"""Acceptance suite: one test per release criterion, each printing a PASS
line with its elapsed time. Run with `pytest -s tests/test_acceptance.py` to
see the per-criterion report."""

import math
import time

import numpy as np
import pytest

from relsift import aggregation as agg
from relsift.graph import RelationAdjacency, generate_synthetic, RelationSpec, SyntheticSpec
from relsift.metrics import ari, auc, nmi
from relsift.rsrl import RLForest, RLTree, tree_depth, tree_width
from relsift.sampling import top_p_sample
from relsift.similarity import SimilarityParams, similarity_loss_and_grad
from relsift.trace import (canonical_trace_hash, final_record, read_trace,
                           validate_record, write_trace)
from relsift.training import (TrainConfig, fit, params_l2_norm, total_loss)

from conftest import (GreedyProbe, benchmark_config, benchmark_graph,
                      finite_difference, max_relative_error)
from test_metrics import rank_statistic_auc
from test_sampling import brute_force_retained


def _report(number, name, started):
    print(f"\n[acceptance] criterion {number} ({name}): PASS "
          f"({time.perf_counter() - started:.1f}s)")


# -- criterion 1: gradient suite ------------------------------------------------

def test_criterion_1_gradient_suite():
    started = time.perf_counter()
    rng = np.random.default_rng(2024)
    worst = 0.0
    for trial in range(20):
        n = int(rng.integers(4, 11))
        d_in = int(rng.integers(2, 5))
        d_out = int(rng.integers(2, 5))
        C = int(rng.integers(2, 4))
        R = int(rng.integers(1, 4))
        variant = ("threshold", "attention", "weight", "mean")[trial % 4]
        feats = rng.normal(size=(n, d_in))
        labels = rng.integers(0, C, size=n)
        rels = [RelationAdjacency.from_edges(
            n, [(i, int(j)) for i in range(n)
                for j in rng.choice(n, size=2) if i != j])
            for _ in range(R)]
        batch = np.arange(n)
        thresholds = rng.random(R)
        sim = SimilarityParams([d_in], C, rng=rng)
        gnn = agg.GnnParameters([d_in, d_out], C, R, variant, rng=rng)
        _, cache0 = agg.layer_forward(rels, gnn, sim, thresholds, 1, feats, batch)
        retained = cache0.retained

        def compute(loss_only=True):
            sim.zero_grads()
            gnn.zero_grads()
            h, cache = agg.layer_forward(rels, gnn, sim, thresholds, 1, feats,
                                         batch, retained_override=retained)
            sim_loss, _ = similarity_loss_and_grad(sim, 1, feats, labels, batch,
                                                   scale=2.0)
            gnn_loss, d_z = agg.classification_loss_and_grad(gnn, h[batch],
                                                             labels[batch])
            loss = total_loss(gnn_loss, [sim_loss], (gnn, sim), 2.0, 0.001)
            if loss_only:
                return loss
            d_h = np.zeros((n, d_out))
            d_h[batch] += d_z
            agg.layer_backward(gnn, cache, d_h)
            norm = params_l2_norm((gnn, sim))
            for _, arr, grad in list(gnn.named_params()) + list(sim.named_params()):
                grad += 0.001 * arr / norm
            return loss

        compute(loss_only=False)
        named = [(arr, grad.copy()) for _, arr, grad in
                 list(gnn.named_params()) + list(sim.named_params())]
        numeric = finite_difference(lambda: compute(True),
                                    [arr for arr, _ in named])
        worst = max(worst, max_relative_error([g for _, g in named], numeric))
    assert worst < 1e-4, f"max relative gradient error {worst:.2e}"
    _report(1, "gradient suite", started)


# -- criterion 2: sampler oracle --------------------------------------------------

def test_criterion_2_sampler_oracle():
    started = time.perf_counter()
    rng = np.random.default_rng(7)
    for draw in range(100):
        n = int(rng.integers(2, 51))
        edges = [(int(rng.integers(n)), int(rng.integers(n)))
                 for _ in range(int(rng.integers(1, 3 * n)))]
        adj = RelationAdjacency.from_edges(n, [e for e in edges if e[0] != e[1]])
        central = np.arange(n)
        offsets, neighbors = adj.batch_edges(central)
        scores = np.round(rng.random(len(neighbors)), int(rng.integers(1, 3)))
        p = [0.0, 1.0][draw % 2] if draw < 20 else float(rng.random())
        retained = top_p_sample(central, offsets, neighbors, scores, p)
        for i in range(n):
            mine = sorted(retained.neighbors[retained.offsets[i]:
                                             retained.offsets[i + 1]])
            seg = slice(offsets[i], offsets[i + 1])
            assert mine == brute_force_retained(list(neighbors[seg]),
                                                list(scores[seg]), p)
    _report(2, "sampler oracle", started)


# -- criterion 3: search tree structure --------------------------------------------

def test_criterion_3_search_tree_structure():
    started = time.perf_counter()
    rng = np.random.default_rng(5)
    ks = {1, 2, 3}
    for alpha in (2, 4, 8, 10, 16, 20):
        for j in range(1, 7):
            ks.update({alpha ** j - 1, alpha ** j, alpha ** j + 1})
    ks.update(int(x) for x in rng.integers(1, 10 ** 6, size=500))
    ks = sorted(k for k in ks if 1 <= k <= 10 ** 6)
    for alpha in (2, 4, 8, 10, 16, 20):
        for k in ks:
            depth = tree_depth(k, alpha)
            if k >= 2:
                assert alpha ** depth >= k
                assert alpha ** (depth - 1) < k or depth == 1
            else:
                assert depth == 1
            assert tree_width(depth, alpha) == float(alpha) ** (-depth)
        for k in (1, 3, 17, 999, 12345):
            tree = RLTree(1, 0, k, alpha, GreedyProbe(alpha))
            explored = 0
            while True:
                explored += len(tree.action_values())
                if tree.depth == tree.max_depth:
                    break
                tree.history = [tree.threshold] * tree.n_stable
                tree.descend(0.5)
            assert explored <= alpha * tree_depth(k, alpha)
    _report(3, "search tree structure", started)


# -- criterion 4: termination rules --------------------------------------------------

def test_criterion_4_termination_rules():
    started = time.perf_counter()
    grid = [0.05, 0.15, 0.25, 0.35, 0.45]
    disc = RLTree(1, 0, 100, 10, GreedyProbe(10))
    cont_policy = GreedyProbe(10)
    cont_policy.kind = "continuous"
    cont = RLTree(1, 0, 100, 10, cont_policy)
    width = cont.width
    for a in grid:
        for b in grid:
            for c in grid:
                disc.history = [a, b, c]
                assert disc.check_termination() == (a == b == c)
                cont.history = [a, b, c]
                expected = abs(b - a) < width and abs(c - b) < width
                assert cont.check_termination() == expected
    # shorter histories never terminate
    for hist in ([], [0.05], [0.05, 0.05]):
        disc.history = list(hist)
        assert not disc.check_termination()
        cont.history = list(hist)
        assert not cont.check_termination()
    _report(4, "termination rules", started)


# -- criterion 5: recursion beats flat search ------------------------------------------

def test_criterion_5_recursion_beats_flat_search():
    started = time.perf_counter()
    wins = 0
    for seed in range(20):
        rng = np.random.default_rng(300 + seed)
        peak = float(rng.uniform(0.05, 0.95))

        def run(recursion):
            forest = RLForest.build(1, [10_000], 10,
                                    lambda l, r, n: GreedyProbe(n),
                                    recursion=recursion)
            reward = 0.0
            for epoch in range(1, 30_000):
                if forest.all_converged():
                    return epoch, forest.thresholds()[0][0]
                obs = {(1, 0): (1.0 - reward, reward)}
                thresholds, _ = forest.epoch(obs, 0.5)
                reward = 1.0 - abs(thresholds[0][0] - peak)
            raise AssertionError("search never converged")

        epochs_rec, p_rec = run(True)
        epochs_flat, p_flat = run(False)
        grid = (np.arange(10_000) + 0.5) / 10_000
        grid_opt = grid[np.argmin(np.abs(grid - peak))]
        if abs(p_rec - grid_opt) <= 1e-4 and epochs_rec < epochs_flat:
            wins += 1
    assert wins >= 18, f"recursion beat the flat grid in only {wins}/20 seeds"
    _report(5, "recursion beats flat search", started)


# -- criteria 6 and 7: benchmark ordering and quality -------------------------------------

@pytest.fixture(scope="module")
def benchmark_runs():
    rows = []
    for seed in range(10):
        g = benchmark_graph(seed)
        filtered = fit(g, benchmark_config(seed))
        unfiltered = fit(g, benchmark_config(seed, policy="fixed",
                                             threshold_init=1.0))
        p_hi, p_lo = filtered.state.thresholds[0]
        rows.append({
            "seed": seed, "p_hi": float(p_hi), "p_lo": float(p_lo),
            "auc": filtered.report.auc, "recall": filtered.report.recall,
            "nofilter_auc": unfiltered.report.auc,
            "filtered": filtered,
        })
    return rows


def test_criterion_6_threshold_homophily_ordering(benchmark_runs):
    started = time.perf_counter()
    ordered = sum(1 for row in benchmark_runs if row["p_hi"] > row["p_lo"])
    assert ordered >= 8, (
        f"high-homophily threshold exceeded the noisy one in only {ordered}/10 seeds: "
        + ", ".join(f"({r['p_hi']:.3f},{r['p_lo']:.3f})" for r in benchmark_runs))
    _report(6, "threshold tracks homophily", started)


def test_criterion_7_end_to_end_quality(benchmark_runs):
    started = time.perf_counter()
    good = sum(1 for row in benchmark_runs
               if row["auc"] > 0.95 and row["recall"] > 0.85)
    gap = float(np.mean([row["auc"] - row["nofilter_auc"]
                         for row in benchmark_runs]))
    assert good >= 8, (
        f"AUC>0.95 and recall>0.85 in only {good}/10 seeds: "
        + ", ".join(f"{r['auc']:.3f}/{r['recall']:.3f}" for r in benchmark_runs))
    assert gap >= 0.02, f"mean AUC gain over the keep-all run is {gap:.4f}"
    _report(7, "end-to-end quality", started)


# -- criterion 8: metric oracles -------------------------------------------------------

def test_criterion_8_metric_oracles():
    started = time.perf_counter()
    rng = np.random.default_rng(88)
    for _ in range(200):
        n = int(rng.integers(4, 80))
        labels = rng.integers(0, 2, size=n)
        if labels.min() == labels.max():
            labels[0] = 1 - labels[0]
        scores = np.round(rng.normal(size=n), int(rng.integers(1, 4)))
        assert abs(auc(scores, labels) - rank_statistic_auc(scores, labels)) < 1e-9
    # hand-enumerated 4-point partitions
    assert ari([0, 1, 0, 1], [0, 0, 1, 1]) == pytest.approx(-0.5)
    assert ari([0, 0, 1, 1], [0, 0, 1, 1]) == 1.0
    assert nmi([0, 0, 1, 1], [0, 0, 1, 1]) == pytest.approx(1.0)
    assert nmi([0, 1, 0, 1], [0, 0, 1, 1]) == pytest.approx(0.0, abs=1e-12)
    assert nmi([0, 0, 0, 0], [0, 0, 1, 1]) == 0.0
    # permutation null for the adjusted index
    labels = rng.integers(0, 2, size=200)
    values = []
    for _ in range(100):
        shuffled = labels.copy()
        rng.shuffle(shuffled)
        values.append(ari(shuffled, labels))
    assert abs(float(np.mean(values))) < 0.05
    _report(8, "metric oracles", started)


# -- criterion 9: determinism and complexity -------------------------------------------

def test_criterion_9_determinism_and_complexity(tmp_path):
    started = time.perf_counter()
    # identical (config, seed) -> identical canonical trace hashes
    spec = SyntheticSpec(num_nodes=200, num_classes=2, feature_dim=8,
                         class_balance=(0.6, 0.4),
                         relations=[RelationSpec(600, 0.9, "hi"),
                                    RelationSpec(1200, 0.1, "lo")],
                         camouflage_rate=0.1, class_separation=6.0,
                         feature_noise=0.5, seed=21)
    hashes = []
    for run in range(2):
        g = generate_synthetic(spec)
        res = fit(g, TrainConfig(epochs=8, batch_size=64, embedding_dim=8,
                                 seed=13))
        names = [rel.name for rel in g.relations]
        path = tmp_path / f"trace{run}.jsonl"
        write_trace(path, res.trace + [final_record(
            res.report, res.state.thresholds, names, res.state.positive)])
        hashes.append(canonical_trace_hash(path))
    assert hashes[0] == hashes[1]

    # doubling the edge count at fixed nodes scales epoch time linearly-ish
    def mean_epoch_ms(edges):
        s = SyntheticSpec(num_nodes=600, num_classes=2, feature_dim=16,
                          class_balance=(0.5, 0.5),
                          relations=[RelationSpec(edges, 0.6, "r0")],
                          camouflage_rate=0.0, class_separation=3.0,
                          feature_noise=1.0, seed=31)
        g = generate_synthetic(s)
        res = fit(g, TrainConfig(epochs=10, batch_size=64, embedding_dim=16,
                                 seed=31, policy="fixed"))
        return float(np.mean([r["wall_ms"] for r in res.trace[2:]]))

    ratios = []
    for _ in range(3):
        ratios.append(mean_epoch_ms(60_000) / mean_epoch_ms(30_000))
    ratio = float(np.median(ratios))
    assert 1.5 <= ratio <= 3.0, f"epoch time ratio {ratio:.2f} outside [1.5, 3.0]"
    _report(9, "determinism and complexity", started)


# -- criterion 10: variant and policy parity --------------------------------------------

def test_criterion_10_variant_and_policy_parity(tmp_path):
    started = time.perf_counter()
    spec = SyntheticSpec(num_nodes=400, num_classes=2, feature_dim=8,
                         class_balance=(0.6, 0.4),
                         relations=[RelationSpec(1000, 0.9, "hi"),
                                    RelationSpec(2400, 0.1, "lo")],
                         camouflage_rate=0.2, class_separation=6.0,
                         feature_noise=0.5, seed=77)
    g = generate_synthetic(spec)
    configs = {}
    for variant in ("threshold", "attention", "weight", "mean"):
        configs[f"variant-{variant}"] = dict(variant=variant)
    configs["policy-ac-discrete"] = dict(policy="ac", action_space="discrete")
    configs["policy-ac-continuous"] = dict(policy="ac", action_space="continuous")
    configs["policy-q"] = dict(policy="q")
    configs["policy-bmab-bio"] = dict(policy="bmab")  # bandit ablation
    configs["roo-non-recursive"] = dict(recursion=False)  # flat ablation

    for name, overrides in configs.items():
        cfg = TrainConfig(epochs=12, batch_size=96, embedding_dim=16, seed=5,
                          **overrides)
        res = fit(g, cfg)
        assert len(res.trace) == 12, name
        names = [rel.name for rel in g.relations]
        path = tmp_path / f"{name}.jsonl"
        write_trace(path, res.trace + [final_record(
            res.report, res.state.thresholds, names, res.state.positive)])
        for record in read_trace(path):
            validate_record(record)
        assert math.isfinite(res.report.auc), name
    _report(10, "variant and policy parity", started)
