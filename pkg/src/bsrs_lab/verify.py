"""Self-contained invariant suite behind the ``verify`` command."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bsrs import admissible_eta_range, contraction_factor, fixed_point_prediction, shaped_backup, self_shaped_solve
from .equivalence import (
    LinearModel,
    random_transition,
    sarsa0_decomposition_check,
    static_potential_residual,
    td0_equivalence_diff,
    td0_objective,
)
from .mdp import GridworldSpec, build_gridworld, random_mdp
from .operators import argmax_sets, pbrs_transform, solve, sup_norm
from .sampler import make_rng

MUTATIONS = {
    "flip-eta-sign": lambda mdp, q, eta: shaped_backup(mdp, q, -eta),
}


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str


def _gamma(rng, gamma, high=0.95):
    return float(rng.uniform(0.0, high)) if gamma is None else gamma


def _interior_etas(gamma):
    lo, hi = admissible_eta_range(gamma)
    return [0.75 * lo, 0.4 * lo, 0.0, 0.4 * hi, 0.8 * hi]


def check_contraction(backup=shaped_backup, gamma=None, draws=500, seed=0):
    rng = make_rng(seed)
    worst = 0.0
    for i in range(draws):
        g = _gamma(rng, gamma, 0.99)
        n = int(rng.integers(1, 13))
        mdp = random_mdp(n, int(rng.integers(1, 5)), g, rng, n_terminal=int(rng.integers(0, 2)) if n > 1 else 0,
                         sparsity=float(rng.choice([0.0, 0.9])))
        lo, hi = admissible_eta_range(g)
        eta = float(rng.uniform(lo, hi))
        while not lo < eta < hi:
            eta = float(rng.uniform(lo, hi))
        u = rng.normal(0, 3, (mdp.n_states, mdp.n_actions))
        w = u.copy()
        if i % 2:
            # perturb a single state, the worst case for sparse dynamics
            w[int(rng.integers(n))] += rng.normal(0, 3, mdp.n_actions)
        else:
            w = rng.normal(0, 3, u.shape)
        lhs = sup_norm(backup(mdp, u, eta) - backup(mdp, w, eta))
        rhs = contraction_factor(g, eta) * sup_norm(u - w)
        if lhs > rhs * (1 + 1e-12) + 1e-12:
            return CheckResult("contraction", False, f"draw {i}: {lhs:.6g} > {rhs:.6g} (gamma={g:.3g}, eta={eta:.3g})")
        if rhs > 0:
            worst = max(worst, lhs / rhs)
    return CheckResult("contraction", True, f"{draws} draws, max ratio {worst:.4f}")


def fixed_point_mdps(gamma=None, count=20, seed=1):
    rng = make_rng(seed)
    mdps = [build_gridworld(GridworldSpec(7, 7, gamma=0.8 if gamma is None else gamma))]
    for _ in range(count):
        n = int(rng.integers(2, 101))
        mdps.append(random_mdp(n, int(rng.integers(1, 5)), _gamma(rng, gamma, 0.9), rng,
                               n_terminal=int(rng.integers(0, 3))))
    return mdps


def check_fixed_points(backup=shaped_backup, gamma=None, count=20, tol=1e-9, seed=1):
    worst_err = worst_res = 0.0
    for mdp in fixed_point_mdps(gamma, count, seed):
        q0 = solve(mdp)
        zero = np.zeros_like(q0)
        for eta in _interior_etas(mdp.gamma):
            q_pred, v_pred, phi_pred = fixed_point_prediction(q0, eta)
            q_lim, report = self_shaped_solve(mdp, zero, eta, tol, 100_000, backup=backup)
            err = sup_norm(q_lim - q_pred)
            res = sup_norm(backup(mdp, q_pred, eta) - q_pred)
            worst_err, worst_res = max(worst_err, err), max(worst_res, res)
            if not report.converged or err >= 1e-5 or res >= 10 * tol:
                return CheckResult(
                    "fixed_point", False,
                    f"n={mdp.n_states} gamma={mdp.gamma:.3g} eta={eta:.3g}: error {err:.3g}, residual {res:.3g}",
                )
            if not np.array_equal(phi_pred, eta * v_pred):
                return CheckResult("fixed_point", False, "phi_inf != eta * V_inf")
    return CheckResult("fixed_point", True, f"max error {worst_err:.2e}, max residual {worst_res:.2e}")


def check_pbrs_invariance(gamma=None, potentials=20, seed=2):
    mdp = build_gridworld(GridworldSpec(7, 7, gamma=0.8 if gamma is None else gamma, slip_prob=0.1))
    rng = make_rng(seed)
    q_star = solve(mdp)
    sets = argmax_sets(q_star, atol=1e-9)
    worst = 0.0
    for i in range(potentials):
        phi = rng.uniform(-5, 5, mdp.n_states)
        phi[mdp.terminal_mask] = 0.0
        q_tilde = solve(pbrs_transform(mdp, phi))
        worst = max(worst, sup_norm(q_tilde - (q_star - phi[:, None])))
        if argmax_sets(q_tilde, atol=1e-9) != sets:
            return CheckResult("pbrs_invariance", False, f"potential {i}: argmax sets differ")
    ok = worst < 1e-6
    return CheckResult("pbrs_invariance", ok, f"max |Q~ - (Q* - phi)| = {worst:.2e}")


def _equivalence_draw(rng, action_value):
    n_states = int(rng.integers(1, 10))
    n_actions = int(rng.integers(1, 5)) if action_value else None
    model = LinearModel.random(rng, n_states, int(rng.integers(1, 8)), n_actions)
    t = random_transition(rng, n_states, n_actions or 1)
    alpha = float(rng.uniform(0, 1))
    eta = float(rng.uniform(-0.9, 0.9))
    gamma = float(rng.uniform(0, 1))
    return model, t, alpha, eta, gamma


def check_td0(draws=1000, seed=3, gamma=None):
    rng = make_rng(seed)
    worst = 0.0
    for _ in range(draws):
        model, t, alpha, eta, g = _equivalence_draw(rng, False)
        worst = max(worst, td0_equivalence_diff(model, t, alpha, eta, g if gamma is None else gamma))
    return CheckResult("td0_rescaling", worst < 1e-10, f"{draws} draws, max diff {worst:.2e}")


def check_sarsa0(draws=1000, seed=4, gamma=None):
    rng = make_rng(seed)
    worst = 0.0
    for i in range(draws):
        model, t, alpha, eta, g = _equivalence_draw(rng, True)
        boot = "sarsa" if i % 2 else "max"
        _l, _r, diff = sarsa0_decomposition_check(model, t, alpha, eta, g if gamma is None else gamma, boot)
        worst = max(worst, diff)
    return CheckResult("sarsa0_regularization", worst < 1e-10, f"{draws} draws, max diff {worst:.2e}")


def check_gradients(draws=50, seed=5, h=1e-6):
    rng = make_rng(seed)
    worst = 0.0
    for _ in range(draws):
        model = LinearModel.random(rng, 5, 4)
        t = random_transition(rng, 5)
        target = float(rng.normal())
        analytic = -model.grad(t.s) * (target - model.state_value(t.s))
        fd = np.zeros_like(model.theta)
        for j in range(model.theta.size):
            e = np.zeros_like(model.theta)
            e[j] = h
            fd[j] = (td0_objective(model, t, target, model.theta + e) - td0_objective(model, t, target, model.theta - e)) / (2 * h)
        rel = sup_norm(analytic - fd) / max(sup_norm(fd), 1e-8)
        worst = max(worst, rel)
    return CheckResult("gradient_fd", worst < 1e-6, f"max relative error {worst:.2e}")


def check_static_potential(backup=shaped_backup, gamma=None, eta=0.05, tol=1e-9):
    g = 0.8 if gamma is None else gamma
    mdp = build_gridworld(GridworldSpec(7, 7, gamma=g, terminal_goal=False))
    q = np.zeros((mdp.n_states, mdp.n_actions))
    residuals = []
    for _ in range(100_000):
        residuals.append(static_potential_residual(mdp, q, eta))
        q_next = backup(mdp, q, eta)
        done = sup_norm(q_next - q) < tol
        q = q_next
        if done:
            break
    final = static_potential_residual(mdp, q, eta)
    expect_positive = g > 0 and eta != 0
    # every entry of residuals belongs to an iterate before the converged one
    if expect_positive:
        ok = min(residuals) > 0 and final < 1e-5
    else:
        ok = max(residuals) == 0 and final == 0
    return CheckResult(
        "static_potential", ok, f"{len(residuals)} iterates, min pre-convergence {min(residuals):.2e}, final {final:.2e}"
    )


def run_all(gamma=None, mutation=None):
    backup = MUTATIONS[mutation] if mutation else shaped_backup
    return [
        check_contraction(backup, gamma),
        check_fixed_points(backup, gamma),
        check_pbrs_invariance(gamma),
        check_td0(gamma=gamma),
        check_sarsa0(gamma=gamma),
        check_gradients(),
        check_static_potential(backup, gamma),
    ]
