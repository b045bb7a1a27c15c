"""Environment contract tests: determinism, reward range, absorbing states."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from resetrl.envs import CliffRunner, PlanarPeg, SpillReacher, make_env

ALL_ENVS = ["cliff-runner", "planar-peg", "spill-reacher"]


def rollout(env, state, actions):
    rewards = []
    for a in actions:
        res = env.step(state, a)
        rewards.append(res.reward)
        state = res.next_state
    return state, rewards


@pytest.mark.parametrize("name", ALL_ENVS)
class TestContract:
    def test_reset_is_initial(self, name):
        env = make_env(name)
        for seed in range(2000):
            state = env.reset(np.random.default_rng(seed))
            assert env.is_initial(state)
            assert not state.irrecoverable
            assert np.isfinite(state.observation).all()
            assert state.observation.shape == (env.spec.state_dim,)

    def test_determinism(self, name):
        env = make_env(name)
        rng = np.random.default_rng(7)
        actions = rng.uniform(-1, 1, (50, env.spec.action_dim))
        s1 = env.reset(np.random.default_rng(3))
        s2 = env.reset(np.random.default_rng(3))
        assert np.array_equal(s1.observation, s2.observation)
        e1, r1 = rollout(env, s1, actions)
        e2, r2 = rollout(env, s2, actions)
        assert np.array_equal(e1.observation, e2.observation)
        assert r1 == r2

    def test_reward_range(self, name):
        env = make_env(name)
        rng = np.random.default_rng(11)
        state = env.reset(rng)
        for _ in range(500):
            res = env.step(state, rng.uniform(-1, 1, env.spec.action_dim))
            assert 0.0 <= res.reward <= 1.0
            state = res.next_state

    def test_nonfinite_action_rejected(self, name):
        env = make_env(name)
        state = env.reset(np.random.default_rng(0))
        bad = np.full(env.spec.action_dim, np.nan)
        with pytest.raises(ValueError):
            env.step(state, bad)

    def test_actions_clipped_internally(self, name):
        env = make_env(name)
        state = env.reset(np.random.default_rng(0))
        big = env.step(state, np.full(env.spec.action_dim, 5.0))
        unit = env.step(state, np.ones(env.spec.action_dim))
        assert np.array_equal(big.next_state.observation, unit.next_state.observation)
        assert big.reward == unit.reward

    def test_max_reset_steps_doubles_forward(self, name):
        env = make_env(name)
        assert env.spec.max_reset_steps == 2 * env.spec.max_forward_steps

    def test_reset_reward_modes(self, name):
        env = make_env(name)
        state = env.reset(np.random.default_rng(1))
        assert env.reset_reward(state, "sparse") == 1.0
        assert env.reset_reward(state, "shaped") == pytest.approx(1.0, abs=0.06)
        rng = np.random.default_rng(2)
        for _ in range(200):
            state = env.step(state, rng.uniform(-1, 1, env.spec.action_dim)).next_state
        assert env.reset_reward(state, "sparse") in (0.0, 1.0)
        assert 0.0 <= env.reset_reward(state, "shaped") <= 1.0
        with pytest.raises(ValueError):
            env.reset_reward(state, "dense")


class TestCliffRunner:
    def test_reset_bounds(self):
        env = CliffRunner()
        for seed in range(10_000):
            obs = env.reset(np.random.default_rng(seed)).observation
            assert -0.05 <= obs[0] <= 0.05
            assert obs[1] == 0.0 and obs[2] == 0.0

    def test_dynamics_step(self):
        env = CliffRunner()
        state = env.reset(np.random.default_rng(0))
        x0 = state.observation[0]
        res = env.step(state, np.array([1.0]))
        # v' = clip(0 + 2*1*0.05) = 0.1; x' = x0 + 0.005; reward = 0.05
        assert res.next_state.observation[1] == pytest.approx(0.1)
        assert res.next_state.observation[0] == pytest.approx(x0 + 0.005)
        assert res.reward == pytest.approx(0.05)

    def test_velocity_clip(self):
        env = CliffRunner()
        state = env.reset(np.random.default_rng(0))
        for _ in range(50):
            state = env.step(state, np.array([1.0])).next_state
        assert state.observation[1] == pytest.approx(2.0)

    def test_fall_is_absorbing_for_any_action(self):
        env = CliffRunner()
        from resetrl.envs import EnvState
        state = EnvState(np.array([9.99, 2.0, 0.0]))
        res = env.step(state, np.array([1.0]))
        assert res.next_state.irrecoverable
        frozen = res.next_state
        rng = np.random.default_rng(5)
        for _ in range(200):
            res = env.step(frozen, rng.uniform(-1, 1, 1))
            assert res.reward == 0.0
            assert np.array_equal(res.next_state.observation, frozen.observation)
            assert not env.is_initial(res.next_state)
            frozen = res.next_state

    def test_is_initial_region(self):
        env = CliffRunner()
        from resetrl.envs import EnvState
        assert env.is_initial(EnvState(np.array([0.09, -0.09, 0.0])))
        assert not env.is_initial(EnvState(np.array([5.0, 0.0, 0.0])))
        assert not env.is_initial(EnvState(np.array([0.0, 0.2, 0.0])))


class TestPlanarPeg:
    def test_zero_action_is_fixed_point(self):
        env = PlanarPeg("insert")
        state = env.reset(np.random.default_rng(1))
        res1 = env.step(state, np.zeros(2))
        res2 = env.step(res1.next_state, np.zeros(2))
        assert np.allclose(res1.next_state.observation, state.observation, atol=1e-12)
        assert res1.reward == pytest.approx(res2.reward)

    def test_reward_one_at_goal(self):
        env = PlanarPeg("insert")
        from resetrl.envs import EnvState
        goal_state = EnvState(PlanarPeg._obs(*PlanarPeg.IN_POSE))
        # step with zero action keeps the tip at the goal
        res = env.step(goal_state, np.zeros(2))
        assert res.reward == pytest.approx(1.0)
        assert res.distance_to_goal == pytest.approx(0.0, abs=1e-12)

    def test_insert_remove_swap(self):
        ins, rem = PlanarPeg("insert"), PlanarPeg("remove")
        assert np.allclose(ins.tip_init, rem.tip_goal)
        assert np.allclose(ins.tip_goal, rem.tip_init)

    def test_reversibility_exact_kinematic_inverse(self, rng):
        env = PlanarPeg("insert")
        state = env.reset(np.random.default_rng(3))
        start_tip = env.tip_of(state)
        actions = rng.uniform(-1, 1, (40, 2))
        s = state
        for a in actions:
            s = env.step(s, a).next_state
        for a in actions[::-1]:
            s = env.step(s, -a).next_state
        assert np.linalg.norm(env.tip_of(s) - start_tip) < 1e-9

    def test_no_irrecoverable_states(self, rng):
        env = PlanarPeg("remove")
        state = env.reset(np.random.default_rng(0))
        for _ in range(300):
            res = env.step(state, rng.uniform(-1, 1, 2))
            assert not res.next_state.irrecoverable
            state = res.next_state

    def test_reset_jitter_within_tolerance(self):
        env = PlanarPeg("insert")
        dists = [env.distance_to_initial(env.reset(np.random.default_rng(s)))
                 for s in range(5000)]
        assert max(dists) <= 0.05


class TestSpillReacher:
    def test_tilt_spills_and_absorbs(self):
        env = SpillReacher()
        from resetrl.envs import EnvState
        state = EnvState(np.array([0.0, 0.0, 0.0, 0.0, 0.45, 0.0]))
        # positive x-action pushes the tilt over 0.5
        for _ in range(10):
            res = env.step(state, np.array([1.0, 0.0]))
            state = res.next_state
            if state.irrecoverable:
                break
        assert state.irrecoverable
        obs_before = state.observation.copy()
        res = env.step(state, np.array([-1.0, -1.0]))
        assert np.array_equal(res.next_state.observation, obs_before)
        assert res.reward == 0.0

    def test_reward_ignores_tilt(self):
        env = SpillReacher()
        from resetrl.envs import EnvState
        a = np.zeros(2)
        s_upright = EnvState(np.array([0.5, 0.0, 0.0, 0.0, 0.0, 0.0]))
        s_tilted = EnvState(np.array([0.5, 0.0, 0.0, 0.0, 0.4, 0.0]))
        assert env.step(s_upright, a).reward == pytest.approx(env.step(s_tilted, a).reward)

    def test_velocity_and_position_update(self):
        env = SpillReacher()
        state = env.reset(np.random.default_rng(0))
        p0 = state.observation[:2].copy()
        res = env.step(state, np.array([1.0, -1.0]))
        assert res.next_state.observation[2] == pytest.approx(0.05)
        assert res.next_state.observation[3] == pytest.approx(-0.05)
        assert np.allclose(res.next_state.observation[:2],
                           p0 + np.array([0.05, -0.05]) * 0.05)


@pytest.mark.parametrize("name", ["cliff-runner", "spill-reacher"])
def test_absorbing_never_reaches_initial(name, rng):
    """From an irrecoverable state, random actions never reach is_initial."""
    env = make_env(name)
    from resetrl.envs import EnvState
    if name == "cliff-runner":
        state = EnvState(np.array([10.5, 2.0, 1.0]), irrecoverable=True)
    else:
        state = EnvState(np.array([0.3, 0.1, 0.0, 0.0, 0.6, 1.0]), irrecoverable=True)
    for _ in range(10_000):
        state = env.step(state, rng.uniform(-1, 1, env.spec.action_dim)).next_state
        assert not env.is_initial(state)


@given(st.integers(0, 10_000))
@settings(max_examples=40, deadline=None)
def test_cliff_reset_sampler_property(seed):
    env = CliffRunner()
    obs = env.reset(np.random.default_rng(seed)).observation
    assert abs(obs[0]) <= 0.05 and obs[1] == 0.0


def test_make_env_rejects_unknown():
    with pytest.raises(ValueError):
        make_env("mujoco-humanoid")
    with pytest.raises(ValueError):
        make_env("planar-peg", "throw")
