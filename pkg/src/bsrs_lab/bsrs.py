"""Bootstrapped reward shaping: the self-shaping Bellman operator and its fixed points.

The potential is read off the value estimate itself, ``phi(s) = eta * max_a Q(s, a)``,
and used as an ordinary potential-based shaping term in the next backup.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .mdp import TabularMdp
from .operators import _check_q, iterate_operator, shaping_term, state_values


@dataclass(frozen=True)
class ShapeConfig:
    """Shape-scale plus where the potential comes from.

    ``lag=None`` means the potential is recomputed from the live table on
    every application (online). ``lag=k`` refreshes it every ``k``
    applications, the tabular stand-in for a target-network potential.
    """

    eta: float = 0.0
    lag: Optional[int] = None

    def __post_init__(self):
        if not np.isfinite(self.eta):
            raise ValueError("eta must be finite")
        if self.lag is not None and int(self.lag) < 1:
            raise ValueError("lag interval must be at least 1")

    @property
    def online(self) -> bool:
        return self.lag is None


def _check_gamma(gamma):
    if not 0.0 <= gamma < 1.0:
        raise ValueError(f"gamma must lie in [0, 1), got {gamma}")


def admissible_eta_range(gamma: float) -> tuple:
    """Open interval of shape-scales for which the shaped operator contracts."""
    _check_gamma(gamma)
    return -1.0, (1.0 - gamma) / (1.0 + gamma)


def contraction_factor(gamma: float, eta: float) -> float:
    _check_gamma(gamma)
    return abs(eta) + gamma * abs(1.0 + eta)


def bootstrapped_potential(mdp: TabularMdp, q, eta: float) -> np.ndarray:
    return eta * state_values(mdp, q)


def shaped_backup_lagged(mdp: TabularMdp, q, phi, eta: float = None) -> np.ndarray:
    """Bellman backup on the reward shaped with a supplied potential.

    ``phi`` may be stale (taken from an older table). ``eta`` is accepted for
    signature symmetry with :func:`shaped_backup`; the potential already
    carries the scale.
    """
    q = _check_q(mdp, q)
    v = state_values(mdp, q)
    shaped_r = mdp.reward + shaping_term(mdp, phi)
    return shaped_r + mdp.gamma * (mdp.transition @ v)


def shaped_backup(mdp: TabularMdp, q, eta: float) -> np.ndarray:
    """One application of the self-shaping operator with the potential taken from ``q``."""
    q = _check_q(mdp, q)
    return shaped_backup_lagged(mdp, q, bootstrapped_potential(mdp, q, eta), eta)


def fixed_point_prediction(q0_star, eta: float):
    """Closed-form limit of self-shaped iteration.

    Given the unshaped optimum ``q0_star`` (with ``V0 = max_a q0_star``) returns
    ``(Q_inf, V_inf, phi_inf)`` where

        Q_inf   = Q0 - eta / (1 + eta) * V0
        V_inf   = V0 / (1 + eta)
        phi_inf = eta / (1 + eta) * V0 = eta * V_inf

    Terminal rows of ``q0_star`` are expected to be zero already, as produced
    by the solvers here.
    """
    if eta == -1:
        raise ValueError("eta = -1 has no fixed point")
    q0 = np.asarray(q0_star, dtype=float)
    v0 = q0.max(axis=1)
    v_inf = v0 / (1.0 + eta)
    phi_inf = eta * v_inf
    q_inf = q0 - (eta / (1.0 + eta)) * v0[:, None]
    return q_inf, v_inf, phi_inf


def self_shaped_solve(
    mdp: TabularMdp,
    q0,
    eta: float,
    tol: float = 1e-6,
    max_steps: int = 10_000,
    lag: Optional[int] = None,
    backup=None,
):
    """Iterate the self-shaping operator to a sup-norm fixed point.

    Outside the admissible eta range the iteration may blow up; that shows
    up as ``report.diverged`` rather than an exception. ``backup`` overrides
    the online operator (used for mutation checks).
    """
    q0 = _check_q(mdp, q0)
    if lag is None:
        op = backup or shaped_backup
        return iterate_operator(lambda q, _k: op(mdp, q, eta), q0, tol, max_steps)
    if int(lag) < 1:
        raise ValueError("lag interval must be at least 1")

    phi = None

    def step(q, k):
        nonlocal phi
        if k % lag == 0:
            phi = bootstrapped_potential(mdp, q, eta)
        return shaped_backup_lagged(mdp, q, phi, eta)

    return iterate_operator(step, q0, tol, max_steps)
