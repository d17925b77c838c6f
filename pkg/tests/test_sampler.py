import numpy as np
import pytest

from bsrs_lab.bsrs import ShapeConfig, admissible_eta_range
from bsrs_lab.mdp import GridworldSpec, build_gridworld
from bsrs_lab.operators import argmax_sets, greedy_policy, solve
from bsrs_lab.sampler import QLearnConfig, evaluate_policy, make_rng, q_learn


def optimal_everywhere(mdp, q, q_star):
    sets = argmax_sets(q_star, 1e-9)
    policy = greedy_policy(q)
    return all(policy[s] in sets[s] for s in range(mdp.n_states) if not mdp.terminal_mask[s])


def reference_q_learning(mdp, cfg):
    """Unshaped tabular Q-learning with the same random draws, written separately."""
    rng = make_rng(cfg.seed)
    q = np.zeros((mdp.n_states, mdp.n_actions))
    starts = np.flatnonzero(~mdp.terminal_mask)
    cdf = np.cumsum(mdp.transition, axis=2)
    s = int(rng.choice(starts))
    length = 0
    for step in range(cfg.total_steps):
        if rng.random() < cfg.epsilon(step):
            a = int(rng.integers(mdp.n_actions))
        else:
            a = int(np.argmax(q[s]))
        s2 = min(int(np.searchsorted(cdf[s, a], rng.random(), side="right")), mdp.n_states - 1)
        done = mdp.terminal_mask[s2]
        target = mdp.reward[s, a] + (0.0 if done else mdp.gamma * q[s2].max())
        q[s, a] += cfg.alpha * (target - q[s, a])
        length += 1
        if done or length >= cfg.max_episode_steps:
            s, length = int(rng.choice(starts)), 0
        else:
            s = s2
    return q


@pytest.fixture(scope="module")
def runs(grid7):
    hi = admissible_eta_range(grid7.gamma)[1]
    out = {}
    for eta in (0.0, 0.5 * hi):
        cfg = QLearnConfig(alpha=0.5, total_steps=30_000, shape=ShapeConfig(eta), seed=7)
        out[eta] = q_learn(grid7, cfg)
    return out


def test_unshaped_learns_optimal_policy(grid7, grid7_qstar, runs):
    q, log = runs[0.0]
    assert not log.diverged
    assert optimal_everywhere(grid7, q, grid7_qstar)


def test_shaped_policy_matches_unshaped(grid7, grid7_qstar, runs):
    (q0, _), (q1, log1) = runs.values()
    assert not log1.diverged
    assert optimal_everywhere(grid7, q1, grid7_qstar)
    assert optimal_everywhere(grid7, q0, grid7_qstar)
    unique = [s for s, acts in enumerate(argmax_sets(grid7_qstar, 1e-9)) if len(acts) == 1]
    np.testing.assert_array_equal(greedy_policy(q0)[unique], greedy_policy(q1)[unique])


def test_lagged_potential_learns(grid7, grid7_qstar):
    cfg = QLearnConfig(alpha=0.5, total_steps=30_000, shape=ShapeConfig(0.05, lag=50), seed=3)
    q, log = q_learn(grid7, cfg)
    assert optimal_everywhere(grid7, q, grid7_qstar)


def test_zero_steps(grid7):
    q, log = q_learn(grid7, QLearnConfig(total_steps=0))
    np.testing.assert_array_equal(q, 0.0)
    assert log.returns == [] and log.lengths == [] and log.q_hashes == []


def test_seed_determinism(grid7):
    cfg = QLearnConfig(total_steps=5000, shape=ShapeConfig(0.08, lag=10), seed=2**63 + 5)
    qa, la = q_learn(grid7, cfg)
    qb, lb = q_learn(grid7, cfg)
    assert qa.tobytes() == qb.tobytes()
    assert la == lb


def test_eta_zero_bit_identical_to_reference(grid7):
    cfg = QLearnConfig(alpha=0.3, total_steps=8000, seed=11)
    q, _ = q_learn(grid7, cfg)
    assert q.tobytes() == reference_q_learning(grid7, cfg).tobytes()


def test_logged_returns_use_original_reward():
    mdp = build_gridworld(GridworldSpec(5, 5, gamma=0.9, slip_prob=0.1))
    cfg = QLearnConfig(alpha=0.5, total_steps=4000, shape=ShapeConfig(0.3), seed=9, max_episode_steps=30)
    trace = []
    _q, log = q_learn(mdp, cfg, trace=trace)
    assert len(trace) == 4000
    pos = 0
    for ret, length in zip(log.returns, log.lengths):
        raw = sum(mdp.gamma ** k * trace[pos + k][2] for k in range(length))
        assert ret == pytest.approx(raw, abs=1e-12)
        assert all(trace[pos + k][2] == mdp.reward[trace[pos + k][0], trace[pos + k][1]] for k in range(length))
        pos += length
    assert any(r > 0 for r in log.returns)


def test_epsilon_schedule():
    cfg = QLearnConfig(epsilon_schedule=(1.0, 0.1, 0.5), total_steps=100)
    assert cfg.epsilon(0) == 1.0
    assert cfg.epsilon(25) == pytest.approx(0.55)
    assert cfg.epsilon(50) == pytest.approx(0.1)
    assert cfg.epsilon(99) == pytest.approx(0.1)


@pytest.mark.parametrize(
    "kwargs",
    [dict(alpha=0.0), dict(epsilon_schedule=(0.1, 0.5, 0.1)), dict(epsilon_schedule=(1.5, 0.1, 0.1)), dict(max_episode_steps=0)],
)
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        QLearnConfig(**kwargs)


def test_evaluate_optimal_from_far_corner(grid7, grid7_qstar):
    # shortest path from (0,0) to (6,6) is 12 moves; reward arrives on the 12th
    ret = evaluate_policy(grid7, greedy_policy(grid7_qstar), episodes=3, horizon=100, seed=0, start=0)
    assert ret == pytest.approx(0.8 ** 11, abs=1e-15)


def test_evaluate_single_cell():
    mdp = build_gridworld(GridworldSpec(1, 1, gamma=0.9))
    assert evaluate_policy(mdp, [2], episodes=5, horizon=10, seed=1) == 0.0


def test_evaluate_zero_horizon(grid7):
    assert evaluate_policy(grid7, np.zeros(49, dtype=int), 5, 0, seed=0) == 0.0


def test_evaluate_deterministic_with_slip():
    mdp = build_gridworld(GridworldSpec(5, 5, slip_prob=0.2, gamma=0.9))
    policy = greedy_policy(solve(mdp))
    a = evaluate_policy(mdp, policy, 50, 50, seed=4)
    b = evaluate_policy(mdp, policy, 50, 50, seed=4)
    assert a == b and a > 0
