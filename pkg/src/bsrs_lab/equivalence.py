"""Numerical checks that relate self-shaping to unshaped learning rules.

Two families:

* ``static_potential_residual`` measures, along an exact self-shaped
  trajectory, the term that any fixed potential would have to absorb. It is
  nonzero until the iterates stop moving.
* TD(0) and SARSA(0) parameter deltas for linear models, computed once with
  the bootstrapped potential and once in the rescaled (and, for SARSA,
  advantage-regularized) unshaped form.

Potentials and state values are always read with stop-gradient semantics:
their numbers enter the update, their parameters receive no gradient.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bsrs import shaped_backup
from .mdp import TabularMdp
from .operators import state_values, sup_norm


@dataclass
class LinearModel:
    """Linear value model ``features @ theta``.

    ``features`` has shape (n_states, d) for a state-value model or
    (n_states, n_actions, d) for an action-value model.
    """

    theta: np.ndarray
    features: np.ndarray

    def __post_init__(self):
        self.theta = np.asarray(self.theta, dtype=float)
        self.features = np.asarray(self.features, dtype=float)
        if self.features.shape[-1] != self.theta.shape[0]:
            raise ValueError("feature dimension does not match theta")
        if not (np.all(np.isfinite(self.theta)) and np.all(np.isfinite(self.features))):
            raise ValueError("theta and features must be finite")

    @property
    def is_action_value(self) -> bool:
        return self.features.ndim == 3

    def values(self, theta=None) -> np.ndarray:
        return self.features @ (self.theta if theta is None else theta)

    def state_value(self, s, theta=None) -> float:
        """V(s); for an action-value model, max_a Q(s, a)."""
        v = self.values(theta)[s]
        return float(np.max(v)) if self.is_action_value else float(v)

    def grad(self, s, a=None) -> np.ndarray:
        """Gradient of V(s) or Q(s, a) with respect to theta."""
        return self.features[s] if a is None else self.features[s, a]

    @classmethod
    def random(cls, rng, n_states, dim, n_actions=None, scale=1.0):
        shape = (n_states, dim) if n_actions is None else (n_states, n_actions, dim)
        return cls(rng.normal(0, scale, dim), rng.normal(0, 1, shape))

    @classmethod
    def tabular(cls, values):
        """One-hot features reproducing a table exactly."""
        values = np.asarray(values, dtype=float)
        return cls(values.ravel(), np.eye(values.size).reshape(*values.shape, values.size))


@dataclass(frozen=True)
class Transition:
    s: int
    a: int
    r: float
    s_next: int
    a_next: int = 0
    done: bool = False


def static_potential_residual(mdp: TabularMdp, q, eta: float) -> float:
    """gamma * |eta| * ||V_next - V_prev||_inf for one self-shaped backup of ``q``.

    ``V_prev = max_a q`` and ``V_next`` is the state value after the backup.
    A single fixed potential could only mimic every self-shaped update if this
    vanished, which happens exactly at the shaped fixed point.
    """
    v_prev = state_values(mdp, q)
    v_next = state_values(mdp, shaped_backup(mdp, q, eta))
    return mdp.gamma * abs(eta) * sup_norm(v_next - v_prev)


def _next_value(model, t):
    return 0.0 if t.done else model.state_value(t.s_next)


def td0_update_shaped(model: LinearModel, t: Transition, alpha, eta, gamma) -> np.ndarray:
    """TD(0) parameter delta with the bootstrapped potential ``eta * V``."""
    v_s = model.state_value(t.s)
    v_next = _next_value(model, t)
    phi_s, phi_next = eta * v_s, eta * v_next  # phi(terminal) = 0 via v_next
    td_error = t.r + gamma * phi_next - phi_s + gamma * v_next - v_s
    return alpha * model.grad(t.s) * td_error


def td0_update_rescaled(model: LinearModel, t: Transition, alpha_tilde, r_tilde, gamma) -> np.ndarray:
    """Plain TD(0) parameter delta with the supplied step size and reward."""
    v_s = model.state_value(t.s)
    td_error = r_tilde + gamma * _next_value(model, t) - v_s
    return alpha_tilde * model.grad(t.s) * td_error


def td0_equivalence_diff(model, t, alpha, eta, gamma) -> float:
    lhs = td0_update_shaped(model, t, alpha, eta, gamma)
    rhs = td0_update_rescaled(model, t, alpha * (1 + eta), t.r / (1 + eta), gamma)
    return sup_norm(lhs - rhs)


def regularization_coefficient(eta: float) -> float:
    if eta == -1:
        raise ValueError("eta = -1 is excluded")
    return 0.5 * eta / (1.0 + eta)


def advantage_sq_grad(model: LinearModel, s, a, stop_gradient=True) -> np.ndarray:
    """Gradient of A(s, a)^2 with A = Q(s, a) - max_b Q(s, b).

    With ``stop_gradient`` the state value is a constant; otherwise the
    gradient also flows through the maximizing action's features.
    """
    q_s = model.values()[s]
    adv = q_s[a] - np.max(q_s)
    grad_adv = model.grad(s, a)
    if not stop_gradient:
        grad_adv = grad_adv - model.grad(s, int(np.argmax(q_s)))
    return 2.0 * adv * grad_adv


def _sarsa_next_value(model, t, bootstrap):
    if t.done:
        return 0.0
    if bootstrap == "sarsa":
        return float(model.values()[t.s_next, t.a_next])
    return model.state_value(t.s_next)


def sarsa0_update_shaped(model, t, alpha, eta, gamma, bootstrap="max") -> np.ndarray:
    q_sa = float(model.values()[t.s, t.a])
    v_s = model.state_value(t.s)
    v_next = _sarsa_next_value(model, t, bootstrap)
    target = t.r + gamma * eta * v_next - eta * v_s + gamma * v_next
    return alpha * model.grad(t.s, t.a) * (target - q_sa)


def sarsa0_update_regularized(model, t, alpha_tilde, r_tilde, lam, gamma, bootstrap="max", stop_gradient=True):
    """Rescaled SARSA(0) delta plus ``lam * grad(A^2)``."""
    q_sa = float(model.values()[t.s, t.a])
    v_next = _sarsa_next_value(model, t, bootstrap)
    td = model.grad(t.s, t.a) * (r_tilde + gamma * v_next - q_sa)
    return alpha_tilde * (td + lam * advantage_sq_grad(model, t.s, t.a, stop_gradient))


def sarsa0_decomposition_check(model, t, alpha, eta, gamma, bootstrap="max", mode="stop_gradient"):
    """Compare the shaped SARSA(0) delta with its rescaled, advantage-regularized form.

    Returns ``(lhs, rhs, max_abs_diff)``. ``mode="online"`` differentiates the
    advantage through the state value as well; that variant is diagnostic and
    generally does not match.
    """
    if eta == -1:
        raise ValueError("eta = -1 is excluded")
    if mode not in ("stop_gradient", "online"):
        raise ValueError(f"unknown mode {mode!r}")
    lhs = sarsa0_update_shaped(model, t, alpha, eta, gamma, bootstrap)
    rhs = sarsa0_update_regularized(
        model,
        t,
        alpha * (1 + eta),
        t.r / (1 + eta),
        regularization_coefficient(eta),
        gamma,
        bootstrap,
        stop_gradient=(mode == "stop_gradient"),
    )
    return lhs, rhs, sup_norm(lhs - rhs)


def td0_objective(model: LinearModel, t: Transition, target: float, theta=None) -> float:
    """0.5 * (target - V_theta(s))^2 with the target held fixed."""
    return 0.5 * (target - model.state_value(t.s, theta)) ** 2


def random_transition(rng, n_states, n_actions=1, done_prob=0.1, reward_scale=1.0):
    return Transition(
        s=int(rng.integers(n_states)),
        a=int(rng.integers(n_actions)),
        r=float(rng.uniform(-reward_scale, reward_scale)),
        s_next=int(rng.integers(n_states)),
        a_next=int(rng.integers(n_actions)),
        done=bool(rng.random() < done_prob),
    )
