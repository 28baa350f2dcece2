"""Recursive threshold search: one search tree per (layer, relation).

Each tree refines its filtering threshold at geometrically increasing
precision. Depth d searches an interval of width alpha^-(d-1) centred on the
previous depth's winner, with action spacing alpha^-d; depth 1 spans [0, 1].
A depth terminates once the last `deep_switching_number` actions are stable,
and the next depth re-centres on the historically best-scoring threshold when
backtracking is enabled. The non-recursive ("flat") mode runs a single depth
whose grid already has the finest spacing.
"""

import logging
import math

import numpy as np

logger = logging.getLogger(__name__)


class SearchStateError(RuntimeError):
    pass


def tree_depth(k_r: int, alpha: int) -> int:
    """ceil(log_alpha k_r), computed in exact integer arithmetic; relations
    with max degree 0 or 1 still get one search depth."""
    if alpha < 2:
        raise ValueError("alpha must be at least 2")
    k_r = int(k_r)
    if k_r <= 1:
        return 1
    depth, reach = 1, alpha
    while reach < k_r:
        reach *= alpha
        depth += 1
    return depth


def tree_width(d: int, alpha: int) -> float:
    """Action spacing at depth d: exactly alpha^-d."""
    if d < 1:
        raise ValueError("depth starts at 1")
    return float(alpha) ** (-d)


class RLTree:
    """Threshold search state for one relation at one layer."""

    def __init__(self, layer, relation, max_deg, alpha, policy,
                 deep_switching_number=3, backtracking=True, recursion=True,
                 tau=1.0):
        self.layer = int(layer)
        self.relation = int(relation)
        self.alpha = int(alpha)
        self.policy = policy
        self.n_stable = int(deep_switching_number)
        self.backtracking = bool(backtracking)
        self.tau = float(tau)

        natural_depth = tree_depth(max_deg, alpha)
        if recursion:
            self.max_depth = natural_depth
            self.actions_per_depth = self.alpha
        else:
            # flat mode: one depth over [0, 1] at the finest grid
            self.max_depth = 1
            self.actions_per_depth = self.alpha ** natural_depth

        self.depth = 1
        self.center = 0.5
        self.span = 1.0
        self.threshold = 0.5
        self.converged = False
        self.history = []
        # per-depth white-box records: depth -> {grid bin: [score sum, visits]};
        # mean-per-bin scoring keeps one noisy epoch from hijacking a backtrack
        self.score_records = {}
        # a historical threshold must beat the candidate by this much to win
        self.backtrack_margin = 0.01
        # previous transition within the current depth
        self.prev_state = None
        self.prev_action = None
        self.prev_reward = None
        # last observation, reused when an epoch retains no edges
        self.last_state = 1.0
        self.last_reward = 0.0
        self._reset_policy()

    # -- geometry ---------------------------------------------------------

    @property
    def width(self):
        """Action spacing at the current depth."""
        return self.span / self.actions_per_depth

    def interval(self):
        """Unclipped search interval at the current depth."""
        return self.center - self.span / 2.0, self.center + self.span / 2.0

    def action_values(self) -> np.ndarray:
        """Discrete action grid: midpoints of the interval's alpha slices,
        each clipped to [0, 1]. Adjacent values differ by the depth's width
        before clipping."""
        low, _ = self.interval()
        i = np.arange(self.actions_per_depth, dtype=np.float64)
        return np.clip(low + (i + 0.5) * self.width, 0.0, 1.0)

    def action_space(self):
        """Discrete mode: the action-value grid. Continuous mode: the
        (low, high) interval actions are mapped into."""
        if self.policy.kind == "discrete":
            return self.action_values()
        return self.interval()

    def threshold_from_action(self, action) -> float:
        if self.policy.kind == "discrete":
            return float(self.action_values()[int(action)])
        return float(np.clip(self.center + float(action) * self.span / 2.0,
                             0.0, 1.0))

    def _reset_policy(self):
        kwargs = {}
        if hasattr(self.policy, "start_index"):
            values = self.action_values()
            kwargs["start_index"] = int(np.argmin(np.abs(values - self.center)))
        self.policy.reset(self.actions_per_depth
                          if self.policy.kind == "discrete" else None, **kwargs)

    # -- per-epoch protocol ------------------------------------------------

    def record_score(self, white_box_score):
        """Fold the white-box score of the threshold that was active this
        epoch into the current depth's per-bin running mean. Bins live on the
        depth's action grid and remember a representative threshold."""
        table = self.score_records.setdefault(self.depth, {})
        key = int(round(self.threshold / self.width))
        entry = table.setdefault(key, [0.0, 0, self.threshold])
        entry[0] += float(white_box_score)
        entry[1] += 1

    def _candidate_score(self, threshold):
        """Mean recorded score of `threshold`'s bin at the current depth."""
        key = int(round(threshold / self.width))
        entry = self.score_records.get(self.depth, {}).get(key)
        if entry is None or entry[1] == 0:
            return None
        return entry[0] / entry[1]

    def best_historical(self):
        """(threshold, mean score) of the best-scoring bin seen so far."""
        best = None
        for table in self.score_records.values():
            for total, count, thr in table.values():
                mean = total / count
                if best is None or mean > best[1]:
                    best = (thr, mean)
        return best

    def observe(self, avg_distance, avg_similarity):
        """Epoch state and reward: the mean retained-edge distance and
        tau times the mean retained-edge similarity. Empty epochs repeat the
        previous observation."""
        if avg_distance is None or avg_similarity is None:
            return self.last_state, self.last_reward
        s = float(avg_distance)
        g = self.tau * float(avg_similarity)
        self.last_state, self.last_reward = s, g
        return s, g

    def step(self, state, reward) -> float:
        """One search epoch: learn from the previous transition (absent on a
        depth's first epoch), predict a new action, record it, and return the
        resulting threshold."""
        if self.converged:
            raise SearchStateError("step() on a converged tree")
        if self.prev_state is not None:
            self.policy.update(self.prev_state, state, self.prev_action, reward)
        action = self.policy.predict(state)
        p = self.threshold_from_action(action)
        if not math.isfinite(p):
            logger.warning(
                "layer %d relation %d: non-finite action, clamping to interval midpoint",
                self.layer, self.relation)
            p = float(np.clip(self.center, 0.0, 1.0))
        self.prev_state = state
        self.prev_action = action
        self.prev_reward = reward
        self.history.append(p)
        if len(self.history) > self.n_stable:
            del self.history[0]
        self.threshold = p
        return p

    def check_termination(self) -> bool:
        """Discrete: the last n actions are identical. Continuous: the last
        n-1 consecutive absolute differences are each below the depth width.
        Both need at least n actions at this depth."""
        if len(self.history) < self.n_stable:
            return False
        tail = self.history[-self.n_stable:]
        if self.policy.kind == "discrete":
            return all(a == tail[0] for a in tail)
        return all(abs(tail[i + 1] - tail[i]) < self.width
                   for i in range(len(tail) - 1))

    def descend(self, white_box_score) -> bool:
        """Advance past a terminated depth.

        The just-converged threshold competes on white-box score (validation
        AUC) with the tree's best historical record; with backtracking on,
        the next depth's interval centres on whichever threshold scored
        higher. Returns True when the historical best won. At the maximum
        depth the tree freezes at the winner instead of descending.
        """
        if not self.check_termination():
            raise SearchStateError("descend() without a fired termination condition")
        candidate = self.threshold
        backtracked = False
        center = candidate
        if self.backtracking:
            cand_score = self._candidate_score(candidate)
            if cand_score is None:
                cand_score = float(white_box_score)
            best = self.best_historical()
            if (best is not None and best[0] != candidate
                    and best[1] > cand_score + self.backtrack_margin):
                center = best[0]
                backtracked = True

        if self.depth >= self.max_depth:
            self.converged = True
            self.threshold = float(np.clip(center, 0.0, 1.0))
            return backtracked

        self.depth += 1
        self.span = float(self.alpha) ** (-(self.depth - 1))
        self.center = center
        self.threshold = float(np.clip(center, 0.0, 1.0))
        self.history = []
        self.prev_state = None
        self.prev_action = None
        self.prev_reward = None
        self._reset_policy()
        return backtracked


class RLForest:
    """All search trees for an L-layer, R-relation model."""

    def __init__(self, trees):
        self.trees = trees  # trees[l][r], layers outermost

    @classmethod
    def build(cls, num_layers, max_degrees, alpha, policy_factory,
              deep_switching_number=3, backtracking=True, recursion=True,
              tau=1.0):
        """policy_factory(layer, relation, n_actions) -> policy instance."""
        trees = []
        for l in range(1, num_layers + 1):
            row = []
            for r, k_r in enumerate(max_degrees):
                if recursion:
                    n_actions = alpha
                else:
                    n_actions = alpha ** tree_depth(k_r, alpha)
                policy = policy_factory(l, r, n_actions)
                row.append(RLTree(l, r, k_r, alpha, policy,
                                  deep_switching_number=deep_switching_number,
                                  backtracking=backtracking, recursion=recursion,
                                  tau=tau))
            trees.append(row)
        return cls(trees)

    @property
    def num_layers(self):
        return len(self.trees)

    @property
    def num_relations(self):
        return len(self.trees[0]) if self.trees else 0

    def thresholds(self) -> np.ndarray:
        """(L, R) threshold matrix used by sampling and aggregation."""
        return np.array([[t.threshold for t in row] for row in self.trees])

    def all_converged(self) -> bool:
        return all(t.converged for row in self.trees for t in row)

    def epoch(self, observations, white_box_score):
        """One search epoch across the forest.

        observations[(layer, relation)] = (avg_distance, avg_similarity),
        either of which may be None when nothing was retained. Converged
        trees are skipped. Returns (thresholds, events) where events list one
        dict per tree for tracing.
        """
        events = []
        for row in self.trees:
            for tree in row:
                key = (tree.layer, tree.relation)
                if tree.converged:
                    events.append({
                        "layer": tree.layer, "relation": tree.relation,
                        "threshold": tree.threshold, "depth": tree.depth,
                        "state": tree.last_state, "reward": tree.last_reward,
                        "terminated": False, "backtracked": False,
                        "converged": True,
                    })
                    continue
                avg_dist, avg_sim = observations.get(key, (None, None))
                state, reward = tree.observe(avg_dist, avg_sim)
                tree.record_score(white_box_score)
                terminated = tree.check_termination()
                backtracked = False
                if terminated:
                    backtracked = tree.descend(white_box_score)
                else:
                    tree.step(state, reward)
                events.append({
                    "layer": tree.layer, "relation": tree.relation,
                    "threshold": tree.threshold, "depth": tree.depth,
                    "state": state, "reward": reward,
                    "terminated": terminated, "backtracked": backtracked,
                    "converged": tree.converged,
                })
        return self.thresholds(), events
