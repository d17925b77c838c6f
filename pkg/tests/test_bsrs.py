import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bsrs_lab.bsrs import (
    ShapeConfig,
    admissible_eta_range,
    contraction_factor,
    fixed_point_prediction,
    self_shaped_solve,
    shaped_backup,
    shaped_backup_lagged,
)
from bsrs_lab.mdp import TabularMdp, random_mdp
from bsrs_lab.operators import (
    argmax_sets,
    bellman_backup,
    greedy_policy,
    pbrs_transform,
    solve,
    state_values,
    sup_norm,
    value_iteration,
)


def one_state():
    return TabularMdp(np.ones((1, 1, 1)), [[1.0]], 0.5)


def test_admissible_range_values():
    assert admissible_eta_range(0.8) == pytest.approx((-1.0, 1 / 9), abs=1e-15)
    assert admissible_eta_range(0.0) == (-1.0, 1.0)
    lo, hi = admissible_eta_range(0.99)
    assert lo == -1.0 and hi == pytest.approx(0.01 / 1.99, rel=1e-12)
    assert hi == pytest.approx(0.005025, abs=1e-6)


@pytest.mark.parametrize("gamma", [-0.1, 1.0, 2.0])
def test_admissible_range_rejects_gamma(gamma):
    with pytest.raises(ValueError):
        admissible_eta_range(gamma)


def test_contraction_factor_values():
    assert contraction_factor(0.8, 0.0) == 0.8
    assert contraction_factor(0.8, 1 / 9) == pytest.approx(1.0, abs=1e-15)
    for gamma in (0.0, 0.3, 0.95):
        assert contraction_factor(gamma, -1.0) == 1.0


@settings(max_examples=200, deadline=None)
@given(st.floats(0, 0.999), st.floats(-3, 3))
def test_factor_below_one_iff_inside_range(gamma, eta):
    lo, hi = admissible_eta_range(gamma)
    inside = lo < eta < hi
    alpha = contraction_factor(gamma, eta)
    if inside:
        assert alpha < 1 + 1e-12
    elif min(abs(eta - lo), abs(eta - hi)) > 1e-9:
        assert alpha >= 1 - 1e-12


def test_eta_zero_matches_bellman_bitwise(grid7):
    rng = np.random.default_rng(0)
    for _ in range(10):
        q = rng.uniform(-1, 1, (49, 4))
        assert shaped_backup(grid7, q, 0.0).tobytes() == bellman_backup(grid7, q).tobytes()


def test_single_state_fixed_point():
    # Q0 = V0 = 1 / (1 - 0.5) = 2; Q_inf = 2 - (0.1 / 1.1) * 2
    expected = 2 - (0.1 / 1.1) * 2
    q, report = self_shaped_solve(one_state(), [[0.0]], 0.1, tol=1e-13, max_steps=10_000)
    assert report.converged
    assert q[0, 0] == pytest.approx(expected, abs=1e-11)
    assert expected == pytest.approx(1.8182, abs=1e-4)
    q_inf, v_inf, phi_inf = fixed_point_prediction([[2.0]], 0.1)
    assert q_inf[0, 0] == pytest.approx(expected, abs=1e-15)
    assert v_inf[0] == pytest.approx(expected, abs=1e-15)
    assert phi_inf[0] == pytest.approx(0.1 * expected, abs=1e-15)
    assert phi_inf[0] == pytest.approx(0.1818, abs=1e-4)


def test_grid_eta_005_matches_prediction(grid7, grid7_qstar):
    q_pred, _v, _phi = fixed_point_prediction(grid7_qstar, 0.05)
    q, report = self_shaped_solve(grid7, np.zeros((49, 4)), 0.05, tol=1e-10, max_steps=10_000)
    assert report.converged
    assert sup_norm(q - q_pred) < 1e-6


def test_prediction_eta_zero(grid7_qstar):
    q, v, phi = fixed_point_prediction(grid7_qstar, 0.0)
    np.testing.assert_array_equal(q, grid7_qstar)
    np.testing.assert_array_equal(v, grid7_qstar.max(axis=1))
    np.testing.assert_array_equal(phi, 0.0)


def test_prediction_rejects_minus_one(grid7_qstar):
    with pytest.raises(ValueError):
        fixed_point_prediction(grid7_qstar, -1.0)


@pytest.mark.parametrize("eta", [-0.6, -0.2, 0.03, 0.1])
def test_prediction_self_consistent(grid7, grid7_qstar, eta):
    q_inf, v_inf, phi_inf = fixed_point_prediction(grid7_qstar, eta)
    np.testing.assert_array_equal(phi_inf, eta * v_inf)
    np.testing.assert_allclose(q_inf.max(axis=1), v_inf, atol=1e-14)
    assert sup_norm(shaped_backup(grid7, q_inf, eta) - q_inf) < 1e-12
    # the argmax is literally unchanged since each row shifts by a constant
    assert argmax_sets(q_inf, 1e-9) == argmax_sets(grid7_qstar, 1e-9)


def test_fresh_lagged_equals_online(grid7):
    q = np.random.default_rng(1).uniform(-1, 1, (49, 4))
    phi = 0.07 * state_values(grid7, q)
    np.testing.assert_array_equal(shaped_backup_lagged(grid7, q, phi, 0.07), shaped_backup(grid7, q, 0.07))


def test_zero_lagged_equals_bellman(grid7):
    q = np.random.default_rng(2).uniform(-1, 1, (49, 4))
    np.testing.assert_array_equal(shaped_backup_lagged(grid7, q, np.zeros(49), 0.0), bellman_backup(grid7, q))


def test_frozen_potential_matches_static_pbrs(grid7, grid7_qstar):
    eta = 0.05
    phi = eta * grid7_qstar.max(axis=1)
    q = np.zeros((49, 4))
    for _ in range(2000):
        q_next = shaped_backup_lagged(grid7, q, phi, eta)
        if sup_norm(q_next - q) < 1e-13:
            break
        q = q_next
    oracle, report = value_iteration(pbrs_transform(grid7, phi), np.zeros((49, 4)), tol=1e-13, max_steps=5000)
    assert report.converged
    np.testing.assert_allclose(q, oracle, atol=1e-10)
    np.testing.assert_allclose(q, grid7_qstar - phi[:, None], atol=1e-10)


def test_eta_zero_same_steps_as_value_iteration(grid7):
    q0 = np.random.default_rng(4).uniform(-1, 1, (49, 4))
    _a, ra = self_shaped_solve(grid7, q0, 0.0, 1e-6, 5000)
    _b, rb = value_iteration(grid7, q0, 1e-6, 5000)
    assert ra.steps == rb.steps and ra.residuals == rb.residuals


def test_far_outside_range_is_flagged(grid7):
    q0 = np.random.default_rng(5).uniform(-1, 1, (49, 4))
    q, report = self_shaped_solve(grid7, q0, -2.0, 1e-6, 10_000)
    assert report.diverged and not report.converged
    assert np.all(np.isfinite(q))
    assert report.residuals[-1] > 1e12 or not np.isfinite(report.residuals[-1])


def test_lagged_solve_converges_to_same_limit(grid7, grid7_qstar):
    q_pred, _v, _phi = fixed_point_prediction(grid7_qstar, 0.05)
    q, report = self_shaped_solve(grid7, np.zeros((49, 4)), 0.05, 1e-10, 20_000, lag=5)
    assert report.converged
    assert sup_norm(q - q_pred) < 1e-6


def test_lag_one_is_online(grid7):
    q0 = np.random.default_rng(6).uniform(-1, 1, (49, 4))
    a, ra = self_shaped_solve(grid7, q0, 0.08, 1e-6, 5000)
    b, rb = self_shaped_solve(grid7, q0, 0.08, 1e-6, 5000, lag=1)
    assert a.tobytes() == b.tobytes() and ra.steps == rb.steps


def test_shape_config_validation():
    assert ShapeConfig(0.1).online
    assert not ShapeConfig(0.1, lag=3).online
    with pytest.raises(ValueError):
        ShapeConfig(np.inf)
    with pytest.raises(ValueError):
        ShapeConfig(0.1, lag=0)


@settings(max_examples=120, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0, 0.99), st.floats(0.01, 0.99))
def test_shaped_contraction(seed, gamma, frac):
    rng = np.random.default_rng(seed)
    lo, hi = admissible_eta_range(gamma)
    for eta in (lo * frac, lo * frac / 2, 0.0, hi * frac / 2, hi * frac):
        mdp = random_mdp(int(rng.integers(1, 8)), int(rng.integers(1, 4)), gamma, rng,
                         sparsity=0.7)
        u, w = rng.normal(0, 4, (2, mdp.n_states, mdp.n_actions))
        lhs = sup_norm(shaped_backup(mdp, u, eta) - shaped_backup(mdp, w, eta))
        assert lhs <= contraction_factor(gamma, eta) * sup_norm(u - w) * (1 + 1e-12) + 1e-12


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.0, 0.9), st.floats(-0.9, 0.95))
def test_fixed_point_residual_random(seed, gamma, frac):
    rng = np.random.default_rng(seed)
    mdp = random_mdp(8, 3, gamma, rng, n_terminal=1)
    lo, hi = admissible_eta_range(gamma)
    eta = frac * (hi if frac > 0 else -lo)
    tol = 1e-10
    q_inf, v_inf, phi_inf = fixed_point_prediction(solve(mdp, tol=1e-13), eta)
    assert sup_norm(shaped_backup(mdp, q_inf, eta) - q_inf) < 10 * tol
    np.testing.assert_array_equal(phi_inf, eta * v_inf)
    q0 = solve(mdp, tol=1e-13)
    if all(len(s) == 1 for s in argmax_sets(q0, 1e-9)):
        np.testing.assert_array_equal(greedy_policy(q_inf), greedy_policy(q0))
