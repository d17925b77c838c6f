"""Exact Bellman machinery: optimality backups, static shaping, greedy policies."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .mdp import TabularMdp

# A residual above this (or any non-finite entry) marks an iterate as diverged.
DIVERGENCE_CAP = 1e12


@dataclass
class ConvergenceReport:
    steps: int = 0
    residuals: list = field(default_factory=list)
    converged: bool = False
    diverged: bool = False

    @property
    def final_residual(self) -> float:
        return self.residuals[-1] if self.residuals else float("nan")


def state_values(mdp: TabularMdp, q) -> np.ndarray:
    """max_a q(s, a), forced to zero at terminal states."""
    v = np.max(q, axis=1)
    return np.where(mdp.terminal_mask, 0.0, v)


def _check_q(mdp, q):
    q = np.asarray(q, dtype=float)
    if q.shape != (mdp.n_states, mdp.n_actions):
        raise ValueError(f"Q table must have shape {(mdp.n_states, mdp.n_actions)}, got {q.shape}")
    return q


def bellman_backup(mdp: TabularMdp, q) -> np.ndarray:
    """One synchronous application of the Bellman optimality operator.

    Non-finite entries are passed through; callers iterating the operator
    detect them and report divergence.
    """
    q = _check_q(mdp, q)
    v = state_values(mdp, q)
    return mdp.reward + mdp.gamma * (mdp.transition @ v)


def _check_potential(mdp, phi):
    phi = np.array(phi, dtype=float)
    if phi.shape != (mdp.n_states,):
        raise ValueError(f"potential must have shape ({mdp.n_states},), got {phi.shape}")
    if not np.all(np.isfinite(phi)):
        raise ValueError("potential must be finite")
    phi[mdp.terminal_mask] = 0.0
    return phi


def shaping_term(mdp: TabularMdp, phi) -> np.ndarray:
    """gamma * E[phi(s')] - phi(s) for every (s, a); phi is zeroed at terminals."""
    phi = _check_potential(mdp, phi)
    return mdp.gamma * (mdp.transition @ phi) - phi[:, None]


def pbrs_transform(mdp: TabularMdp, phi) -> TabularMdp:
    """Return ``mdp`` with reward r + gamma E[phi(s')] - phi(s)."""
    return mdp.with_reward(mdp.reward + shaping_term(mdp, phi))


def greedy_policy(q) -> np.ndarray:
    """Per-state argmax; ties go to the lowest action index."""
    return np.argmax(np.asarray(q), axis=1)


def argmax_sets(q, atol=0.0) -> list:
    """Per-state set of actions within ``atol`` of the row maximum."""
    q = np.asarray(q)
    best = q.max(axis=1, keepdims=True)
    return [frozenset(np.flatnonzero(row)) for row in (q >= best - atol)]


def sup_norm(x) -> float:
    return float(np.max(np.abs(x))) if np.size(x) else 0.0


def iterate_operator(step, q0, tol, max_steps):
    """Apply ``step`` until successive iterates differ by less than ``tol``.

    ``step(q, k)`` receives the current table and the zero-based application
    index. Returns the last iterate and its report.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    q = np.array(q0, dtype=float)
    report = ConvergenceReport()
    for k in range(max_steps):
        with np.errstate(invalid="ignore", over="ignore"):
            q_next = step(q, k)
            res = sup_norm(q_next - q) if np.all(np.isfinite(q_next)) else float("inf")
        report.steps += 1
        report.residuals.append(res)
        if not np.isfinite(res) or res > DIVERGENCE_CAP:
            report.diverged = True
            # keep the last finite iterate
            if np.all(np.isfinite(q_next)):
                q = q_next
            break
        q = q_next
        if res < tol:
            report.converged = True
            break
    return q, report


def value_iteration(mdp: TabularMdp, q0, tol: float = 1e-6, max_steps: int = 10_000):
    """Synchronous value iteration with a sup-norm stopping rule."""
    q0 = _check_q(mdp, q0)
    return iterate_operator(lambda q, _k: bellman_backup(mdp, q), q0, tol, max_steps)


def solve(mdp: TabularMdp, tol: float = 1e-12, max_steps: int = 100_000) -> np.ndarray:
    """Optimal Q table by value iteration from zero."""
    q, report = value_iteration(mdp, np.zeros((mdp.n_states, mdp.n_actions)), tol, max_steps)
    if not report.converged:
        raise RuntimeError(f"value iteration did not converge in {max_steps} steps")
    return q
