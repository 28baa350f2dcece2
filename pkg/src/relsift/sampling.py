"""Top-p neighbor retention: keep each node's ceil(p * k) most similar
neighbors under one relation. Retention is directed (each central node filters
its own list) and deterministic: ties break toward the smaller neighbor index.
"""

import numpy as np

# guards float fuzz in p * k when the true product is an integer
_CEIL_EPS = 1e-9


class SamplingError(ValueError):
    pass


class RetainedEdges:
    """Filtered neighbor lists for a batch of central nodes (one relation,
    one layer), in CSR over the central list.

    `positions` indexes each retained edge back into the caller's directed
    edge arrays so per-edge scores can be sliced without recomputation.
    """

    def __init__(self, central, offsets, neighbors, positions):
        self.central = np.asarray(central, dtype=np.int64)
        self.offsets = np.asarray(offsets, dtype=np.int64)
        self.neighbors = np.asarray(neighbors, dtype=np.int64)
        self.positions = np.asarray(positions, dtype=np.int64)

    @property
    def num_edges(self):
        return len(self.neighbors)

    def counts(self):
        return np.diff(self.offsets)

    def segment_ids(self):
        """Central-local row index for every retained edge."""
        return np.repeat(np.arange(len(self.central), dtype=np.int64), self.counts())


def retention_counts(p, degrees):
    """ceil(p * k) per node, eps-guarded so exact integer products stay exact."""
    return np.ceil(p * np.asarray(degrees, dtype=np.float64) - _CEIL_EPS).astype(np.int64).clip(min=0)


def top_p_sample(central, offsets, neighbors, similarity_scores, p) -> RetainedEdges:
    """Retain the top ceil(p * k) neighbors of each central node by similarity.

    `offsets`/`neighbors` are CSR over the central list (see
    RelationAdjacency.batch_edges); `similarity_scores` aligns with
    `neighbors`, one score per directed edge. p = 0 retains nothing,
    p = 1 retains everything, any p > 0 keeps at least one neighbor of a
    connected node. Retained lists come back sorted by neighbor index.
    """
    central = np.asarray(central, dtype=np.int64)
    offsets = np.asarray(offsets, dtype=np.int64)
    neighbors = np.asarray(neighbors, dtype=np.int64)
    scores = np.asarray(similarity_scores, dtype=np.float64)
    if not 0.0 <= p <= 1.0:
        raise SamplingError(f"p must lie in [0, 1], got {p}")
    if len(scores) != len(neighbors):
        raise SamplingError(
            f"got {len(scores)} scores for {len(neighbors)} directed edges"
        )

    degrees = np.diff(offsets)
    keep = retention_counts(p, degrees)
    seg = np.repeat(np.arange(len(central), dtype=np.int64), degrees)

    # within each segment: similarity descending, neighbor index ascending
    order = np.lexsort((neighbors, -scores, seg))
    # rank of each sorted position within its segment
    sorted_rank = np.arange(len(neighbors), dtype=np.int64) - np.repeat(offsets[:-1], degrees)
    kept_sorted = sorted_rank < np.repeat(keep, degrees)
    kept_positions = order[kept_sorted]

    kept_seg = seg[kept_positions]
    kept_nbr = neighbors[kept_positions]
    # canonical order: by central row, then neighbor index
    canon = np.lexsort((kept_nbr, kept_seg))
    kept_positions = kept_positions[canon]
    kept_seg = kept_seg[canon]
    kept_nbr = kept_nbr[canon]

    new_offsets = np.zeros(len(central) + 1, dtype=np.int64)
    np.add.at(new_offsets, kept_seg + 1, 1)
    new_offsets = np.cumsum(new_offsets)
    return RetainedEdges(central, new_offsets, kept_nbr, kept_positions)


def retained_average_distance(retained: RetainedEdges, distances):
    """Mean distance over retained directed edges; None when none were kept
    (the caller substitutes the previous epoch's state)."""
    if retained.num_edges == 0:
        return None
    d = np.asarray(distances, dtype=np.float64)
    if len(d) != retained.num_edges:
        raise SamplingError(
            f"got {len(d)} distances for {retained.num_edges} retained edges"
        )
    return float(d.mean())
