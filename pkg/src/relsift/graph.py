"""Multi-relational graph data model: loading, validation, synthesis, statistics.

A graph is a single node set with features and labels plus one adjacency
structure per relation. Adjacencies are undirected, stored in CSR form with
both edge directions materialized so neighbor iteration is O(1) per edge.
"""

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class GraphError(ValueError):
    """Malformed input files or violated graph invariants."""


class RelationAdjacency:
    """CSR neighbor lists for one relation over a fixed node set.

    Neighbor lists are kept sorted ascending and deduplicated; for every
    stored (u, v) the reverse (v, u) is stored too. Self-loops are dropped.
    """

    def __init__(self, num_nodes, offsets, neighbors, name=""):
        self.num_nodes = int(num_nodes)
        self.offsets = np.asarray(offsets, dtype=np.int64)
        self.neighbors = np.asarray(neighbors, dtype=np.int64)
        self.name = name
        if self.offsets.shape != (self.num_nodes + 1,):
            raise GraphError(f"relation {name!r}: offsets must have length num_nodes+1")
        if np.any(np.diff(self.offsets) < 0):
            raise GraphError(f"relation {name!r}: offsets must be nondecreasing")
        if self.offsets[0] != 0 or self.offsets[-1] != len(self.neighbors):
            raise GraphError(f"relation {name!r}: offsets do not span the neighbor array")

    @classmethod
    def from_edges(cls, num_nodes, edges, name=""):
        """Build from an iterable of (u, v) pairs: symmetrize, dedup, sort."""
        pairs = set()
        for u, v in edges:
            u, v = int(u), int(v)
            if not (0 <= u < num_nodes and 0 <= v < num_nodes):
                raise GraphError(
                    f"relation {name!r}: edge ({u}, {v}) out of range for {num_nodes} nodes"
                )
            if u == v:
                continue
            pairs.add((u, v) if u < v else (v, u))
        if pairs:
            arr = np.array(sorted(pairs), dtype=np.int64)
            src = np.concatenate([arr[:, 0], arr[:, 1]])
            dst = np.concatenate([arr[:, 1], arr[:, 0]])
            order = np.lexsort((dst, src))
            src, dst = src[order], dst[order]
            offsets = np.zeros(num_nodes + 1, dtype=np.int64)
            np.add.at(offsets, src + 1, 1)
            offsets = np.cumsum(offsets)
            return cls(num_nodes, offsets, dst, name=name)
        return cls(num_nodes, np.zeros(num_nodes + 1, dtype=np.int64),
                   np.empty(0, dtype=np.int64), name=name)

    def neighbors_of(self, v):
        return self.neighbors[self.offsets[v]:self.offsets[v + 1]]

    def degrees(self):
        return np.diff(self.offsets)

    def max_degree(self):
        return int(self.degrees().max()) if self.num_nodes else 0

    @property
    def num_edges(self):
        """Undirected edge count."""
        return len(self.neighbors) // 2

    def undirected_pairs(self):
        """(m, 2) array of edges with u < v, sorted."""
        src = np.repeat(np.arange(self.num_nodes, dtype=np.int64), self.degrees())
        keep = src < self.neighbors
        return np.column_stack([src[keep], self.neighbors[keep]])

    def batch_edges(self, central):
        """Directed edge arrays restricted to `central` as source nodes.

        Returns (local_offsets, neighbor_ids): CSR over the central list.
        """
        central = np.asarray(central, dtype=np.int64)
        counts = self.degrees()[central]
        local_offsets = np.zeros(len(central) + 1, dtype=np.int64)
        np.cumsum(counts, out=local_offsets[1:])
        nbr = np.empty(local_offsets[-1], dtype=np.int64)
        for i, v in enumerate(central):
            nbr[local_offsets[i]:local_offsets[i + 1]] = self.neighbors_of(v)
        return local_offsets, nbr

    def restrict_to(self, allowed):
        """New adjacency keeping only edges with both endpoints in `allowed`."""
        mask = np.zeros(self.num_nodes, dtype=bool)
        mask[np.asarray(allowed, dtype=np.int64)] = True
        pairs = self.undirected_pairs()
        if len(pairs):
            keep = mask[pairs[:, 0]] & mask[pairs[:, 1]]
            pairs = pairs[keep]
        return RelationAdjacency.from_edges(self.num_nodes, pairs, name=self.name)

    def __eq__(self, other):
        return (isinstance(other, RelationAdjacency)
                and self.num_nodes == other.num_nodes
                and self.name == other.name
                and np.array_equal(self.offsets, other.offsets)
                and np.array_equal(self.neighbors, other.neighbors))


class MultiRelationalGraph:
    """Node features, labels, per-relation adjacency and a train/val/test split."""

    def __init__(self, features, labels, relations, train_idx, val_idx, test_idx):
        self.features = np.asarray(features, dtype=np.float64)
        self.labels = np.asarray(labels, dtype=np.int64)
        self.relations = list(relations)
        self.train_idx = np.sort(np.asarray(train_idx, dtype=np.int64))
        self.val_idx = np.sort(np.asarray(val_idx, dtype=np.int64))
        self.test_idx = np.sort(np.asarray(test_idx, dtype=np.int64))
        self.validate()

    @property
    def num_nodes(self):
        return self.features.shape[0]

    @property
    def feature_dim(self):
        return self.features.shape[1]

    @property
    def num_classes(self):
        return int(self.labels.max()) + 1 if len(self.labels) else 0

    @property
    def num_relations(self):
        return len(self.relations)

    def validate(self):
        n = self.num_nodes
        if self.features.ndim != 2:
            raise GraphError("features must be a 2-D matrix")
        if self.labels.shape != (n,):
            raise GraphError(
                f"feature rows ({n}) and label count ({len(self.labels)}) disagree"
            )
        if len(self.labels) and self.labels.min() < 0:
            raise GraphError("labels must be nonnegative class indices")
        for rel in self.relations:
            if rel.num_nodes != n:
                raise GraphError(f"relation {rel.name!r} built for a different node count")
            if len(rel.neighbors) and (rel.neighbors.min() < 0 or rel.neighbors.max() >= n):
                raise GraphError(f"relation {rel.name!r} has out-of-range endpoints")
        sets = [set(self.train_idx), set(self.val_idx), set(self.test_idx)]
        for part in sets:
            if part and (min(part) < 0 or max(part) >= n):
                raise GraphError("split contains out-of-range node indices")
        if (sets[0] & sets[1]) or (sets[0] & sets[2]) or (sets[1] & sets[2]):
            raise GraphError("train/val/test sets must be disjoint")

    def __eq__(self, other):
        return (isinstance(other, MultiRelationalGraph)
                and np.array_equal(self.features, other.features)
                and np.array_equal(self.labels, other.labels)
                and len(self.relations) == len(other.relations)
                and all(a == b for a, b in zip(self.relations, other.relations))
                and np.array_equal(self.train_idx, other.train_idx)
                and np.array_equal(self.val_idx, other.val_idx)
                and np.array_equal(self.test_idx, other.test_idx))


@dataclass
class RelationSpec:
    """One synthetic relation: how many edges and how label-assortative."""
    edge_count: int
    label_homophily: float
    name: str = ""


@dataclass
class SyntheticSpec:
    """Deterministic recipe for a synthetic multi-relational graph.

    Features are class-conditional Gaussians with means `class_separation`
    apart. A `camouflage_rate` fraction of minority-class nodes draw their
    features from the majority class's distribution instead. Each relation
    samples edges so the same-label edge fraction tracks its homophily.
    """
    num_nodes: int
    num_classes: int
    feature_dim: int
    class_balance: tuple
    relations: list = field(default_factory=list)
    camouflage_rate: float = 0.0
    class_separation: float = 2.0
    feature_noise: float = 1.0
    train_ratio: float = 0.4
    val_ratio: float = 0.1
    seed: int = 0

    def validate(self):
        if self.num_nodes < 2 or self.num_classes < 2:
            raise GraphError("need at least 2 nodes and 2 classes")
        if self.feature_dim < self.num_classes:
            raise GraphError("feature_dim must be >= num_classes")
        if len(self.class_balance) != self.num_classes:
            raise GraphError("class_balance length must equal num_classes")
        if not math.isclose(sum(self.class_balance), 1.0, abs_tol=1e-9):
            raise GraphError("class_balance must sum to 1")
        if any(p < 0 for p in self.class_balance):
            raise GraphError("class_balance entries must be nonnegative")
        if not 0.0 <= self.camouflage_rate <= 1.0:
            raise GraphError("camouflage_rate must lie in [0, 1]")
        for rel in self.relations:
            if rel.edge_count < 0:
                raise GraphError("edge_count must be nonnegative")
            if not 0.0 <= rel.label_homophily <= 1.0:
                raise GraphError("label_homophily must lie in [0, 1]")
        if not 0 < self.train_ratio < 1 or not 0 <= self.val_ratio < 1:
            raise GraphError("split ratios out of range")
        if self.train_ratio + self.val_ratio >= 1:
            raise GraphError("train_ratio + val_ratio must leave room for a test set")


def stratified_split(labels, train_ratio, val_ratio, seed):
    """Per-class shuffled split into train/val/test index arrays."""
    rng = np.random.default_rng(seed)
    labels = np.asarray(labels)
    train, val, test = [], [], []
    for c in np.unique(labels):
        idx = np.flatnonzero(labels == c)
        rng.shuffle(idx)
        n_train = int(round(train_ratio * len(idx)))
        n_val = int(round(val_ratio * len(idx)))
        train.append(idx[:n_train])
        val.append(idx[n_train:n_train + n_val])
        test.append(idx[n_train + n_val:])
    return (np.sort(np.concatenate(train)),
            np.sort(np.concatenate(val)),
            np.sort(np.concatenate(test)))


def _sample_relation_edges(rng, labels, spec: RelationSpec):
    """Sample distinct undirected pairs hitting the target homophily."""
    n = len(labels)
    classes = np.unique(labels)
    by_class = {c: np.flatnonzero(labels == c) for c in classes}
    same_pairs_avail = sum(len(v) * (len(v) - 1) // 2 for v in by_class.values())
    cross_pairs_avail = n * (n - 1) // 2 - same_pairs_avail
    if spec.edge_count > n * (n - 1) // 2:
        raise GraphError(
            f"relation {spec.name!r}: {spec.edge_count} edges exceed the "
            f"{n * (n - 1) // 2} distinct pairs available"
        )
    # class choice for same-label edges proportional to class size, so each
    # node's neighborhood same-label fraction tracks the global homophily
    same_classes = [c for c in classes if len(by_class[c]) >= 2]
    same_weights = np.array([len(by_class[c]) for c in same_classes],
                            dtype=np.float64)
    if same_weights.sum() > 0:
        same_weights = same_weights / same_weights.sum()

    chosen = set()
    attempts = 0
    while len(chosen) < spec.edge_count:
        attempts += 1
        if attempts > 200 + 50 * spec.edge_count:
            raise GraphError(
                f"relation {spec.name!r}: could not place {spec.edge_count} edges "
                f"at homophily {spec.label_homophily}"
            )
        want_same = rng.random() < spec.label_homophily
        if want_same:
            if not same_classes or same_pairs_avail <= 0:
                raise GraphError(
                    f"relation {spec.name!r}: no same-label pairs available"
                )
            c = same_classes[rng.choice(len(same_classes), p=same_weights)]
            u, v = rng.choice(by_class[c], size=2, replace=False)
        else:
            if cross_pairs_avail <= 0:
                raise GraphError(
                    f"relation {spec.name!r}: no cross-label pairs available"
                )
            u = rng.integers(n)
            others = np.flatnonzero(labels != labels[u])
            if len(others) == 0:
                continue
            v = others[rng.integers(len(others))]
        key = (int(u), int(v)) if u < v else (int(v), int(u))
        if key not in chosen:
            chosen.add(key)
    return chosen


def generate_synthetic(spec: SyntheticSpec) -> MultiRelationalGraph:
    """Pure function of its recipe: equal inputs give bit-identical graphs."""
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    n, c, d = spec.num_nodes, spec.num_classes, spec.feature_dim

    labels = rng.choice(c, size=n, p=np.asarray(spec.class_balance, dtype=np.float64))
    # guarantee every class appears so splits and metrics stay well defined
    for cls in range(c):
        if not np.any(labels == cls):
            labels[rng.integers(n)] = cls

    # class means on scaled axis-aligned corners: pairwise distance == separation
    means = np.zeros((c, d))
    for cls in range(c):
        means[cls, cls] = spec.class_separation / math.sqrt(2.0)

    counts = np.bincount(labels, minlength=c)
    majority = int(np.argmax(counts))
    minority = int(np.argmin(counts))

    feat_means = means[labels].copy()
    camouflaged = np.zeros(n, dtype=bool)
    if spec.camouflage_rate > 0 and minority != majority:
        minority_nodes = np.flatnonzero(labels == minority)
        k = int(round(spec.camouflage_rate * len(minority_nodes)))
        if k > 0:
            picked = rng.choice(minority_nodes, size=k, replace=False)
            feat_means[picked] = means[majority]
            camouflaged[picked] = True
    features = feat_means + rng.normal(0.0, spec.feature_noise, size=(n, d))

    relations = []
    for i, rel_spec in enumerate(spec.relations):
        name = rel_spec.name or f"r{i}"
        pairs = _sample_relation_edges(rng, labels, rel_spec)
        relations.append(RelationAdjacency.from_edges(n, pairs, name=name))

    train, val, test = stratified_split(labels, spec.train_ratio, spec.val_ratio,
                                        spec.seed)
    g = MultiRelationalGraph(features, labels, relations, train, val, test)
    g.camouflaged = camouflaged
    return g


def _read_indices(path):
    out = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        try:
            out.append(int(line))
        except ValueError:
            raise GraphError(f"{path}:{lineno}: expected one integer, got {line!r}")
    return np.asarray(out, dtype=np.int64)


def _read_edge_list(path, num_nodes):
    edges = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise GraphError(f"{path}:{lineno}: expected 'u v', got {line!r}")
        try:
            u, v = int(parts[0]), int(parts[1])
        except ValueError:
            raise GraphError(f"{path}:{lineno}: expected integer endpoints, got {line!r}")
        if not (0 <= u < num_nodes and 0 <= v < num_nodes):
            raise GraphError(
                f"{path}:{lineno}: edge ({u}, {v}) out of range for {num_nodes} nodes"
            )
        edges.append((u, v))
    return edges


def load_graph(feature_path, label_path, relation_paths, split_paths=None,
               split_ratios=None, relation_names=None):
    """Load a graph from text files.

    Features: one comma-separated row per node. Labels: one integer per line.
    Relations: one file per relation, whitespace-separated "u v" lines;
    missing reverse edges are added, duplicates removed. The split is either
    three explicit index files (train, val, test) or a
    (train_ratio, val_ratio, seed) triple for a stratified split.
    """
    try:
        features = np.loadtxt(feature_path, delimiter=",", ndmin=2, dtype=np.float64)
    except ValueError as exc:
        raise GraphError(f"{feature_path}: {exc}")
    labels = _read_indices(label_path)
    n = features.shape[0]
    if len(labels) != n:
        raise GraphError(
            f"feature rows ({n}) and label count ({len(labels)}) disagree"
        )

    names = relation_names or [Path(p).stem for p in relation_paths]
    relations = [
        RelationAdjacency.from_edges(n, _read_edge_list(p, n), name=nm)
        for p, nm in zip(relation_paths, names)
    ]

    if split_paths is not None:
        train, val, test = (_read_indices(p) for p in split_paths)
    else:
        if split_ratios is None:
            split_ratios = (0.4, 0.1, 0)
        train_ratio, val_ratio, seed = split_ratios
        train, val, test = stratified_split(labels, train_ratio, val_ratio, int(seed))
    return MultiRelationalGraph(features, labels, relations, train, val, test)


def save_graph(g: MultiRelationalGraph, out_dir):
    """Write a graph in the load_graph formats; returns the written paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []

    def _write(name, text):
        p = out / name
        p.write_text(text)
        paths.append(p)

    rows = [",".join(f"{x:.17g}" for x in row) for row in g.features]
    _write("features.csv", "\n".join(rows) + "\n")
    _write("labels.txt", "\n".join(str(int(y)) for y in g.labels) + "\n")
    for rel in g.relations:
        pairs = rel.undirected_pairs()
        body = "\n".join(f"{u} {v}" for u, v in pairs)
        _write(f"rel_{rel.name}.txt", body + "\n" if body else "")
    for name, idx in (("train.txt", g.train_idx), ("val.txt", g.val_idx),
                      ("test.txt", g.test_idx)):
        body = "\n".join(str(int(i)) for i in idx)
        _write(name, body + "\n" if body else "")
    return paths


def load_saved_graph(out_dir):
    """Counterpart of save_graph for round-tripping a directory."""
    out = Path(out_dir)
    rel_paths = sorted(out.glob("rel_*.txt"))
    return load_graph(
        out / "features.csv", out / "labels.txt", rel_paths,
        split_paths=(out / "train.txt", out / "val.txt", out / "test.txt"),
        relation_names=[p.stem[len("rel_"):] for p in rel_paths],
    )


@dataclass
class RelationStats:
    name: str
    edge_count: int
    avg_feature_similarity: float | None
    avg_label_similarity: float | None


def _pair_stats(name, pairs, features, labels):
    if len(pairs) == 0:
        return RelationStats(name, 0, None, None)
    diffs = features[pairs[:, 0]] - features[pairs[:, 1]]
    dist = np.sqrt((diffs * diffs).sum(axis=1))
    feat_sim = float(np.mean(1.0 / (1.0 + dist)))
    label_sim = float(np.mean(labels[pairs[:, 0]] == labels[pairs[:, 1]]))
    return RelationStats(name, len(pairs), feat_sim, label_sim)


def empirical_relation_stats(g: MultiRelationalGraph):
    """Per-relation edge count and mean feature/label similarity, plus an
    ALL record over the union of distinct node pairs across relations.

    Feature similarity maps Euclidean distance e to 1 / (1 + e).
    """
    stats = []
    union = set()
    for rel in g.relations:
        pairs = rel.undirected_pairs()
        stats.append(_pair_stats(rel.name, pairs, g.features, g.labels))
        union.update(map(tuple, pairs))
    all_pairs = (np.array(sorted(union), dtype=np.int64)
                 if union else np.empty((0, 2), dtype=np.int64))
    stats.append(_pair_stats("ALL", all_pairs, g.features, g.labels))
    return stats


def max_degree(g: MultiRelationalGraph, relation_index: int) -> int:
    """Largest neighbor-list length under one relation; 0 if it has no edges."""
    if not 0 <= relation_index < g.num_relations:
        raise GraphError(f"relation index {relation_index} out of range")
    return g.relations[relation_index].max_degree()
