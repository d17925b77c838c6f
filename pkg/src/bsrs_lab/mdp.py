"""Finite MDPs and gridworld construction."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Row/column offsets for up, down, left, right.
MOVES = ((-1, 0), (1, 0), (0, -1), (0, 1))
ACTION_NAMES = ("up", "down", "left", "right")
_PERPENDICULAR = {0: (2, 3), 1: (2, 3), 2: (0, 1), 3: (0, 1)}

ROW_SUM_TOL = 1e-12


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype, copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class TabularMdp:
    """A finite MDP with dense transitions.

    ``transition[s, a]`` is the next-state distribution and ``reward[s, a]``
    the (expected) reward of taking ``a`` in ``s``. Arrays are copied and
    made read-only on construction so instances can be shared freely.
    """

    transition: np.ndarray
    reward: np.ndarray
    gamma: float
    terminal_mask: np.ndarray = None

    def __post_init__(self):
        p = _frozen(self.transition)
        r = _frozen(self.reward)
        if p.ndim != 3 or p.shape[0] != p.shape[2]:
            raise ValueError(f"transition must have shape (S, A, S), got {p.shape}")
        n_states, n_actions, _ = p.shape
        if n_states < 1 or n_actions < 1:
            raise ValueError("need at least one state and one action")
        if r.shape != (n_states, n_actions):
            raise ValueError(f"reward must have shape {(n_states, n_actions)}, got {r.shape}")
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError(f"gamma must lie in [0, 1), got {self.gamma}")
        if np.any(p < 0) or not np.all(np.isfinite(p)):
            raise ValueError("transition probabilities must be finite and non-negative")
        if np.max(np.abs(p.sum(axis=2) - 1.0)) > ROW_SUM_TOL:
            raise ValueError("every transition row must sum to 1")
        if not np.all(np.isfinite(r)):
            raise ValueError("rewards must be finite")

        term = self.terminal_mask
        term = _frozen(np.zeros(n_states, dtype=bool) if term is None else term, bool)
        if term.shape != (n_states,):
            raise ValueError("terminal_mask must have one entry per state")
        for s in np.flatnonzero(term):
            if not np.all(p[s, :, s] == 1.0):
                raise ValueError(f"terminal state {s} must self-transition with probability 1")
            if np.any(r[s] != 0.0):
                raise ValueError(f"terminal state {s} must have zero reward")

        object.__setattr__(self, "transition", p)
        object.__setattr__(self, "reward", r)
        object.__setattr__(self, "gamma", float(self.gamma))
        object.__setattr__(self, "terminal_mask", term)

    @property
    def n_states(self) -> int:
        return self.transition.shape[0]

    @property
    def n_actions(self) -> int:
        return self.transition.shape[1]

    def with_reward(self, reward) -> "TabularMdp":
        return TabularMdp(self.transition, reward, self.gamma, self.terminal_mask)

    def __eq__(self, other):
        if not isinstance(other, TabularMdp):
            return NotImplemented
        return (
            self.gamma == other.gamma
            and np.array_equal(self.transition, other.transition)
            and np.array_equal(self.reward, other.reward)
            and np.array_equal(self.terminal_mask, other.terminal_mask)
        )

    __hash__ = None


def expected_next(mdp: TabularMdp, state: int, action: int, f) -> float:
    """Return sum over s' of p(s'|state, action) * f(s')."""
    if not 0 <= state < mdp.n_states:
        raise IndexError(f"state {state} out of range")
    if not 0 <= action < mdp.n_actions:
        raise IndexError(f"action {action} out of range")
    f = np.asarray(f, dtype=float)
    if f.shape != (mdp.n_states,):
        raise ValueError(f"f must have shape ({mdp.n_states},)")
    return float(mdp.transition[state, action] @ f)


@dataclass(frozen=True)
class GridworldSpec:
    width: int
    height: int
    goal: tuple = None  # (row, col); defaults to the bottom-right corner
    goal_reward: float = 1.0
    slip_prob: float = 0.0
    gamma: float = 0.8
    # When False the goal is absorbing but non-terminal and keeps paying
    # goal_reward on every step spent there.
    terminal_goal: bool = True

    def __post_init__(self):
        if self.goal is None:
            object.__setattr__(self, "goal", (self.height - 1, self.width - 1))
        else:
            object.__setattr__(self, "goal", tuple(int(x) for x in self.goal))

    def validate(self):
        if int(self.width) < 1 or int(self.height) < 1:
            raise ValueError("grid dimensions must be positive")
        row, col = self.goal
        if not (0 <= row < self.height and 0 <= col < self.width):
            raise ValueError(f"goal {self.goal} lies outside the {self.height}x{self.width} grid")
        if not 0.0 <= self.slip_prob < 1.0:
            raise ValueError(f"slip_prob must lie in [0, 1), got {self.slip_prob}")
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError(f"gamma must lie in [0, 1), got {self.gamma}")
        if not np.isfinite(self.goal_reward):
            raise ValueError("goal_reward must be finite")

    def state_index(self, row: int, col: int) -> int:
        return row * self.width + col

    @property
    def goal_state(self) -> int:
        return self.state_index(*self.goal)


def _move(spec, row, col, action):
    dr, dc = MOVES[action]
    r = min(max(row + dr, 0), spec.height - 1)
    c = min(max(col + dc, 0), spec.width - 1)
    return spec.state_index(r, c)


def build_gridworld(spec: GridworldSpec) -> TabularMdp:
    """Open gridworld with four moves, walls that block, and a single goal.

    Rewards are paid on transitions that enter the goal. With slip, the
    intended move happens with probability ``1 - slip_prob`` and each of the
    two perpendicular moves with ``slip_prob / 2``.
    """
    spec.validate()
    n = spec.width * spec.height
    goal = spec.goal_state
    p = np.zeros((n, 4, n))
    for row in range(spec.height):
        for col in range(spec.width):
            s = spec.state_index(row, col)
            for a in range(4):
                if s == goal:
                    p[s, a, s] = 1.0
                    continue
                p[s, a, _move(spec, row, col, a)] += 1.0 - spec.slip_prob
                if spec.slip_prob > 0:
                    for b in _PERPENDICULAR[a]:
                        p[s, a, _move(spec, row, col, b)] += spec.slip_prob / 2
    reward = spec.goal_reward * p[:, :, goal]
    terminal = np.zeros(n, dtype=bool)
    if spec.terminal_goal:
        terminal[goal] = True
        reward[goal] = 0.0
    return TabularMdp(p, reward, spec.gamma, terminal)


def random_mdp(n_states, n_actions, gamma, rng, n_terminal=0, sparsity=0.0, reward_scale=1.0):
    """Random MDP for property tests; the last ``n_terminal`` states are terminal."""
    p = rng.random((n_states, n_actions, n_states))
    if sparsity > 0:
        p *= rng.random(p.shape) >= sparsity
        # keep at least one successor per row
        empty = p.sum(axis=2) == 0
        idx = np.argwhere(empty)
        p[idx[:, 0], idx[:, 1], rng.integers(0, n_states, len(idx))] = 1.0
    p /= p.sum(axis=2, keepdims=True)
    r = rng.uniform(-reward_scale, reward_scale, (n_states, n_actions))
    terminal = np.zeros(n_states, dtype=bool)
    if n_terminal:
        terminal[n_states - n_terminal:] = True
        for s in np.flatnonzero(terminal):
            p[s] = 0.0
            p[s, :, s] = 1.0
            r[s] = 0.0
    return TabularMdp(p, r, gamma, terminal)
