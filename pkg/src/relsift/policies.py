"""Pluggable policies for the per-relation threshold search.

Every policy observes a scalar state (the mean retained-edge distance),
proposes an action, and learns from one-step transitions. Discrete policies
return a bin index into the search interval's action grid; continuous
policies return a value in [-1, 1] that the tree maps into the interval.

All policies are deterministic under a fixed seed and reset at every depth
switch: each depth is a fresh decision problem because the action grid
changes meaning.
"""

import logging

import numpy as np

logger = logging.getLogger(__name__)

LOG_STD_MIN, LOG_STD_MAX = -5.0, 2.0


def _features(s):
    """Affine policy features on the scalar state: (s, s^2, 1)."""
    s = float(s)
    return np.array([s, s * s, 1.0])


class DiscreteActorCritic:
    """Softmax policy over action bins with a linear state-value baseline.

    Samples from softmax(actor(s)) while training, argmax in greedy mode.
    One-step update: td = g + gamma * V(s) - V(s_prev); the critic moves
    toward the TD target and the actor ascends td * grad log pi(a_prev).
    """

    kind = "discrete"

    def __init__(self, n_actions, rng, learning_rate=0.05, gamma=0.95):
        self.lr = float(learning_rate)
        self.gamma = float(gamma)
        self.rng = rng
        self.greedy = False
        self.reset(n_actions)

    def reset(self, n_actions=None):
        if n_actions is not None:
            self.n_actions = int(n_actions)
        self.actor = np.zeros((self.n_actions, 3))
        self.critic = np.zeros(3)

    def _probs(self, s):
        logits = self.actor @ _features(s)
        logits -= logits.max()
        e = np.exp(logits)
        return e / e.sum()

    def value(self, s):
        return float(self.critic @ _features(s))

    def predict(self, s):
        probs = self._probs(s)
        if self.greedy:
            return int(np.argmax(probs))
        return int(self.rng.choice(self.n_actions, p=probs))

    def update(self, s_prev, s, a_prev, reward):
        td = reward + self.gamma * self.value(s) - self.value(s_prev)
        if not np.isfinite(td):
            logger.warning("skipping non-finite actor-critic update (td=%r)", td)
            return
        phi = _features(s_prev)
        self.critic += self.lr * td * phi
        grad_logits = -self._probs(s_prev)
        grad_logits[int(a_prev)] += 1.0
        self.actor += self.lr * td * np.outer(grad_logits, phi)


class ContinuousActorCritic:
    """Gaussian policy squashed through tanh, with a linear value baseline."""

    kind = "continuous"

    def __init__(self, rng, learning_rate=0.05, gamma=0.95):
        self.lr = float(learning_rate)
        self.gamma = float(gamma)
        self.rng = rng
        self.greedy = False
        self.reset()

    def reset(self, n_actions=None):
        self.mean_w = np.zeros(3)
        self.logstd_w = np.zeros(3)
        self.critic = np.zeros(3)

    def _dist(self, s):
        phi = _features(s)
        mean = float(self.mean_w @ phi)
        log_std = float(np.clip(self.logstd_w @ phi, LOG_STD_MIN, LOG_STD_MAX))
        return mean, np.exp(log_std)

    def value(self, s):
        return float(self.critic @ _features(s))

    def predict(self, s):
        mean, std = self._dist(s)
        u = mean if self.greedy else self.rng.normal(mean, std)
        return float(np.tanh(u))

    def update(self, s_prev, s, a_prev, reward):
        td = reward + self.gamma * self.value(s) - self.value(s_prev)
        if not np.isfinite(td):
            logger.warning("skipping non-finite actor-critic update (td=%r)", td)
            return
        phi = _features(s_prev)
        self.critic += self.lr * td * phi
        mean, std = self._dist(s_prev)
        u = np.arctanh(np.clip(a_prev, -1.0 + 1e-9, 1.0 - 1e-9))
        d_mean = (u - mean) / (std * std)
        d_logstd = (u - mean) ** 2 / (std * std) - 1.0
        self.mean_w += self.lr * td * d_mean * phi
        self.logstd_w += self.lr * td * d_logstd * phi
        np.clip(self.logstd_w, -10.0, 10.0, out=self.logstd_w)


class QLearner:
    """Tabular Q-learning over binned scalar states with epsilon-greedy
    exploration. The state scale is tracked adaptively; epsilon decays
    multiplicatively per update toward its floor.
    """

    kind = "discrete"

    def __init__(self, n_actions, rng, learning_rate=0.1, gamma=0.95,
                 n_state_bins=20, epsilon=1.0, epsilon_min=0.05,
                 epsilon_decay=0.95):
        self.lr = float(learning_rate)
        self.gamma = float(gamma)
        self.rng = rng
        self.greedy = False
        self.n_state_bins = int(n_state_bins)
        self.eps_init = float(epsilon)
        self.eps_min = float(epsilon_min)
        self.eps_decay = float(epsilon_decay)
        self.s_max = 1e-9
        self.reset(n_actions)

    def reset(self, n_actions=None):
        if n_actions is not None:
            self.n_actions = int(n_actions)
        self.q = np.zeros((self.n_state_bins, self.n_actions))
        self.eps = self.eps_init

    def _bin(self, s):
        s = abs(float(s))
        self.s_max = max(self.s_max, s)
        return min(self.n_state_bins - 1, int(s / self.s_max * self.n_state_bins))

    def predict(self, s):
        b = self._bin(s)
        if not self.greedy and self.rng.random() < self.eps:
            return int(self.rng.integers(self.n_actions))
        return int(np.argmax(self.q[b]))

    def update(self, s_prev, s, a_prev, reward):
        bp, b = self._bin(s_prev), self._bin(s)
        target = reward + self.gamma * self.q[b].max()
        self.q[bp, int(a_prev)] += self.lr * (target - self.q[bp, int(a_prev)])
        self.eps = max(self.eps_min, self.eps * self.eps_decay)


class BernoulliBandit:
    """Fixed hill-climbing strategy over the discrete action grid.

    Keeps its direction while the reward is not dropping and flips it on a
    drop; each prediction moves one grid step from the previous action,
    clipped at the grid ends. A per-arm memory of the last observed reward
    lets the walk hold at an incumbent whose neighbors are known worse, which
    is what allows the repeated-action termination rule to fire at an
    interior optimum.
    """

    kind = "discrete"

    def __init__(self, n_actions, rng=None, start_index=None):
        self.greedy = False
        self.reset(n_actions, start_index=start_index)

    def reset(self, n_actions=None, start_index=None):
        if n_actions is not None:
            self.n_actions = int(n_actions)
        if start_index is None:
            start_index = (self.n_actions - 1) // 2
        self.start_index = int(start_index)
        self.direction = 1
        self.prev_reward = None
        self.prev_index = None
        self.arm_reward = np.full(self.n_actions, np.nan)

    def predict(self, s):
        if self.prev_index is None:
            idx = self.start_index
        else:
            cand = int(np.clip(self.prev_index + self.direction, 0,
                               self.n_actions - 1))
            known_prev = not np.isnan(self.arm_reward[self.prev_index])
            known_cand = not np.isnan(self.arm_reward[cand])
            if (known_prev and known_cand
                    and self.arm_reward[cand] < self.arm_reward[self.prev_index]):
                idx = self.prev_index
            else:
                idx = cand
        self.prev_index = idx
        return idx

    def update(self, s_prev, s, a_prev, reward):
        self.arm_reward[int(a_prev)] = reward
        if self.prev_reward is not None and reward < self.prev_reward:
            self.direction = -self.direction
        self.prev_reward = reward


def make_policy(kind, action_space, n_actions, rng, learning_rate=0.05,
                gamma=0.95):
    """Construct a policy by config name.

    kind: "ac" | "q" | "bmab"; action_space: "discrete" | "continuous".
    Only actor-critic supports the continuous action space.
    """
    if kind == "ac":
        if action_space == "continuous":
            return ContinuousActorCritic(rng, learning_rate=learning_rate,
                                         gamma=gamma)
        return DiscreteActorCritic(n_actions, rng, learning_rate=learning_rate,
                                   gamma=gamma)
    if action_space == "continuous":
        raise ValueError(f"policy {kind!r} supports only the discrete action space")
    if kind == "q":
        return QLearner(n_actions, rng, learning_rate=learning_rate, gamma=gamma)
    if kind == "bmab":
        return BernoulliBandit(n_actions, rng=rng)
    raise ValueError(f"unknown policy kind {kind!r}")
