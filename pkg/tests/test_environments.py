import math

import numpy as np
import pytest
from scipy import stats

from outerppo.envs import REGISTRY, CartPole, ChainMDP, MazeGrid, Pendulum, env_reset, make_env
from outerppo.errors import ConfigError
from outerppo.rng import Streams


def test_unknown_env_id():
    with pytest.raises(ConfigError, match="chain-mdp"):
        make_env("atari")


@pytest.mark.parametrize("env_id", sorted(REGISTRY))
def test_reset_is_deterministic_per_seed(env_id):
    _, s1, o1 = env_reset(env_id, 42, 3)
    _, s2, o2 = env_reset(env_id, 42, 3)
    _, _, o3 = env_reset(env_id, 43, 3)
    assert np.array_equal(o1, o2)
    assert o1.shape == (3, make_env(env_id).spec.obs_dim)
    if env_id != "chain-mdp":
        assert not np.array_equal(o1, o3)


@pytest.mark.parametrize("env_id", sorted(REGISTRY))
def test_trajectory_determinism_and_length_bound(env_id):
    env = make_env(env_id)
    rng = np.random.default_rng(0)
    spec = env.spec
    acts = [rng.integers(spec.action_dim, size=2) if spec.action_kind == "discrete" else rng.normal(size=(2, 1)) for _ in range(spec.max_episode_steps + 5)]

    def run():
        state, obs = env.reset(7, 2)
        trace = [obs]
        for a in acts:
            state, obs, r, term, trunc = env.step(state, a)
            assert np.all(state.steps <= spec.max_episode_steps)
            trace.append(np.concatenate([obs.ravel(), r, term, trunc]))
            if np.any(term | trunc):
                state, obs = env.reset_where(state, term | trunc)
        return np.concatenate([t.ravel() for t in trace])

    assert np.array_equal(run(), run())


def test_chain_always_right_hand_trace():
    env = ChainMDP()
    state, obs = env.reset(123, 1)
    assert obs[0].tolist() == [1, 0, 0, 0, 0]
    rewards = []
    for t in range(4):
        state, obs, r, term, trunc = env.step(state, np.array([1]))
        rewards.append(r[0])
        assert term[0] == (t == 3)
    assert rewards == [0, 0, 0, 1]
    assert obs[0].tolist() == [0, 0, 0, 0, 1]


def test_chain_left_at_zero_and_truncation():
    env = ChainMDP()
    state, _ = env.reset(0, 1)
    for t in range(20):
        state, obs, r, term, trunc = env.step(state, np.array([0]))
        assert obs[0, 0] == 1 and r[0] == 0 and not term[0]
        assert trunc[0] == (t == 19)


def test_chain_optimal_return_matches_brute_force():
    env = ChainMDP()
    # Best discounted return over every action sequence, by exhaustive search over the 20-step horizon.
    def brute(gamma, horizon):
        best = 0.0
        frontier = {0: 0.0}
        for t in range(horizon):
            nxt = {}
            for s, val in frontier.items():
                for step in (-1, 1):
                    s2 = min(max(s + step, 0), 4)
                    if s2 == 4:
                        best = max(best, val + gamma**t)
                    else:
                        nxt[s2] = max(nxt.get(s2, -1.0), val)
            frontier = nxt
        return best

    for gamma in (1.0, 0.9, 0.5):
        assert env.optimal_return(gamma) == pytest.approx(brute(gamma, 20), abs=1e-12)
    assert env.optimal_return(0.9) == pytest.approx(0.9**3)


def cartpole_reference(s, a):
    """Scalar transcription of the classic cart-pole equations."""
    x, x_dot, th, th_dot = s
    force = 10.0 if a == 1 else -10.0
    c, sn = math.cos(th), math.sin(th)
    temp = (force + 0.05 * th_dot**2 * sn) / 1.1
    th_acc = (9.8 * sn - c * temp) / (0.5 * (4.0 / 3.0 - 0.1 * c**2 / 1.1))
    x_acc = temp - 0.05 * th_acc * c / 1.1
    return [x + 0.02 * x_dot, x_dot + 0.02 * x_acc, th + 0.02 * th_dot, th_dot + 0.02 * th_acc]


def test_cartpole_matches_scalar_reference():
    env = CartPole()
    state, obs = env.reset(5, 1)
    s = obs[0].tolist()
    for a in [0, 1, 1, 0, 1, 0, 0, 1, 1, 1]:
        state, obs, r, term, _ = env.step(state, np.array([a]))
        s = cartpole_reference(s, a)
        np.testing.assert_allclose(obs[0], s, rtol=0, atol=1e-14)
        assert r[0] == 1.0


def test_cartpole_upright_single_push_survives():
    env = CartPole()
    state, _ = env.reset(0, 1)
    state.phys[:] = 0.0
    # there is no zero-force action; one push from rest must not topple the pole
    state, obs, _, term, _ = env.step(state, np.array([1]))
    assert not term[0] and abs(obs[0, 2]) < env.theta_threshold


def test_cartpole_terminates_on_angle():
    env = CartPole()
    state, _ = env.reset(0, 1)
    state.phys[:] = [0.0, 0.0, 0.25, 0.0]
    _, _, _, term, trunc = env.step(state, np.array([0]))
    assert term[0] and not trunc[0]


def test_pendulum_clamps_and_counts():
    env = Pendulum()
    state, _ = env.reset(1, 2)
    state2, _, r, term, _ = env.step(state, np.array([[5.0], [-1.0]]))
    assert state2.clamp_count == 1
    ref, _, r_ref, _, _ = env.step(state, np.array([[2.0], [-1.0]]))
    assert np.array_equal(state2.phys, ref.phys) and np.array_equal(r, r_ref)
    assert not term.any()


def test_pendulum_reward_at_rest_upright():
    env = Pendulum()
    state, _ = env.reset(1, 1)
    state.phys[:] = [0.0, 0.0]
    _, obs, r, _, _ = env.step(state, np.array([[0.0]]))
    assert r[0] == 0.0
    np.testing.assert_allclose(obs[0], [1.0, 0.0, 0.0])


def test_maze_wall_leaves_position_unchanged():
    env = MazeGrid()
    state, _ = env.reset(0, 1)
    state.phys[:] = [0, 0]
    state2, obs, r, term, _ = env.step(state, np.array([0]))  # up: off grid
    assert state2.phys[0].tolist() == [0, 0] and r[0] == 0 and not term[0]
    state.phys[:] = [0, 2]
    state2, _, r, _, _ = env.step(state, np.array([1]))  # right into wall at (0, 3)
    assert state2.phys[0].tolist() == [0, 2] and r[0] == 0
    state.phys[:] = [1, 4]
    state2, _, r, term, _ = env.step(state, np.array([0]))  # up into goal
    assert r[0] == 1.0 and term[0]


def test_maze_start_cells_uniform_chi_square():
    env = MazeGrid()
    n = 10_000
    state, _ = env.reset(2024, n)
    cells = state.phys[:, 0] * env.w + state.phys[:, 1]
    free = env.free_starts[:, 0] * env.w + env.free_starts[:, 1]
    counts = np.array([(cells == c).sum() for c in free])
    assert counts.sum() == n
    assert stats.chisquare(counts).pvalue > 1e-3


def test_maze_start_follows_declared_rng_rule():
    env = MazeGrid()
    state, _ = env.reset(99, 4)
    keys = env.slot_keys(99, 4)
    u = Streams.from_keys(keys).uniform()
    idx = np.floor(u * len(env.free_starts)).astype(int)
    np.testing.assert_array_equal(state.phys, env.free_starts[idx])


def test_slot_equals_single_env_with_same_key():
    env = CartPole()
    keys = env.slot_keys(11, 3)
    big, _ = env.reset(keys=keys)
    small, _ = env.reset(keys=[keys[1]])
    acts = np.array([1, 0, 1])
    for _ in range(30):
        big, ob, rb, tb, _ = env.step(big, acts)
        small, os_, rs, ts, _ = env.step(small, acts[1:2])
        assert np.array_equal(ob[1], os_[0])
        if tb[1]:
            break


def test_invalid_discrete_action():
    env = ChainMDP()
    state, _ = env.reset(0, 1)
    with pytest.raises(ValueError, match="out of range"):
        env.step(state, np.array([2]))
