"""Tabular Q-learning with the bootstrapped shaping term folded into the reward."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .bsrs import ShapeConfig
from .mdp import TabularMdp


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based generator keyed by ``seed``; independent streams per run."""
    return np.random.Generator(np.random.Philox(int(seed) % 2**64))


@dataclass(frozen=True)
class QLearnConfig:
    alpha: float = 0.5
    # (initial, final, fraction of total_steps over which to anneal linearly)
    epsilon_schedule: tuple = (1.0, 0.05, 0.5)
    total_steps: int = 20_000
    shape: ShapeConfig = ShapeConfig()
    seed: int = 0
    max_episode_steps: int = 100

    def __post_init__(self):
        object.__setattr__(self, "epsilon_schedule", tuple(float(x) for x in self.epsilon_schedule))
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        start, end, frac = self.epsilon_schedule
        if not (0 <= end <= start <= 1):
            raise ValueError("epsilon values must satisfy 0 <= final <= initial <= 1")
        if not 0 <= frac <= 1:
            raise ValueError("epsilon anneal fraction must lie in [0, 1]")
        if self.total_steps < 0 or self.max_episode_steps < 1:
            raise ValueError("total_steps must be >= 0 and max_episode_steps >= 1")

    def epsilon(self, step: int) -> float:
        start, end, frac = self.epsilon_schedule
        horizon = frac * self.total_steps
        if horizon <= 0:
            return end
        return start + (end - start) * min(step / horizon, 1.0)


@dataclass
class EpisodeLog:
    """Per-episode discounted return on the original reward, plus bookkeeping."""

    returns: list = field(default_factory=list)
    lengths: list = field(default_factory=list)
    q_hashes: list = field(default_factory=list)
    diverged: bool = False

    @property
    def end_steps(self) -> np.ndarray:
        return np.cumsum(self.lengths, dtype=int)


def q_hash(q) -> str:
    return hashlib.sha256(np.ascontiguousarray(q, dtype=float).tobytes()).hexdigest()[:16]


def q_learn(mdp: TabularMdp, cfg: QLearnConfig, q_init=None, trace=None):
    """Run epsilon-greedy tabular Q-learning for ``cfg.total_steps`` updates.

    Each update bootstraps from ``r + gamma*phi(s') - phi(s) + gamma*max Q(s')``
    with ``phi = eta * max_a Q_src``. ``Q_src`` is the live table for an online
    potential, or a copy refreshed every ``cfg.shape.lag`` updates. Episodes
    start uniformly over non-terminal states and end on a terminal state or
    after ``max_episode_steps``; a partial trailing episode is not logged.
    If ``trace`` is a list, every ``(s, a, r, s_next, done)`` is appended to it.
    """
    rng = make_rng(cfg.seed)
    n_s, n_a = mdp.n_states, mdp.n_actions
    q = np.zeros((n_s, n_a)) if q_init is None else np.array(q_init, dtype=float)
    log = EpisodeLog()
    if cfg.total_steps == 0:
        return q, log

    starts = np.flatnonzero(~mdp.terminal_mask)
    if len(starts) == 0:
        raise ValueError("MDP has no non-terminal start state")
    terminal = mdp.terminal_mask
    gamma, eta, lag = mdp.gamma, cfg.shape.eta, cfg.shape.lag
    cdf = np.cumsum(mdp.transition, axis=2)

    q_src = q if lag is None else q.copy()

    def potential(s):
        return 0.0 if terminal[s] else eta * q_src[s].max()

    s = int(rng.choice(starts))
    ep_return, ep_len, discount = 0.0, 0, 1.0
    for step in range(cfg.total_steps):
        if rng.random() < cfg.epsilon(step):
            a = int(rng.integers(n_a))
        else:
            a = int(np.argmax(q[s]))
        s_next = min(int(np.searchsorted(cdf[s, a], rng.random(), side="right")), n_s - 1)
        r = mdp.reward[s, a]
        done = bool(terminal[s_next])
        if trace is not None:
            trace.append((s, a, float(r), s_next, done))

        shaped_r = r + gamma * potential(s_next) - potential(s)
        target = shaped_r if done else shaped_r + gamma * q[s_next].max()
        q[s, a] += cfg.alpha * (target - q[s, a])
        if lag is not None and (step + 1) % lag == 0:
            q_src = q.copy()

        ep_return += discount * r
        discount *= gamma
        ep_len += 1

        if not np.isfinite(q[s, a]):
            log.diverged = True
            break

        if done or ep_len >= cfg.max_episode_steps:
            log.returns.append(ep_return)
            log.lengths.append(ep_len)
            log.q_hashes.append(q_hash(q))
            s = int(rng.choice(starts))
            ep_return, ep_len, discount = 0.0, 0, 1.0
        else:
            s = s_next
    return q, log


def evaluate_policy(mdp: TabularMdp, policy, episodes: int, horizon: int, seed: int, start=None) -> float:
    """Mean discounted return of a deterministic policy on the original reward.

    Episodes start at ``start`` if given, else uniformly over non-terminal
    states.
    """
    policy = np.asarray(policy, dtype=int)
    if policy.shape != (mdp.n_states,) or np.any((policy < 0) | (policy >= mdp.n_actions)):
        raise ValueError("policy must give one valid action per state")
    if episodes <= 0:
        return 0.0
    rng = make_rng(seed)
    starts = np.flatnonzero(~mdp.terminal_mask)
    cdf = np.cumsum(mdp.transition, axis=2)
    total = 0.0
    for _ in range(episodes):
        if start is not None:
            s = int(start)
        elif len(starts):
            s = int(rng.choice(starts))
        else:
            s = 0
        ret, discount = 0.0, 1.0
        for _t in range(horizon):
            if mdp.terminal_mask[s]:
                break
            a = policy[s]
            ret += discount * mdp.reward[s, a]
            discount *= mdp.gamma
            s = min(int(np.searchsorted(cdf[s, a], rng.random(), side="right")), mdp.n_states - 1)
        total += ret
    return total / episodes
