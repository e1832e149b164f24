import numpy as np
import pytest

from meshdse.planner import (BLEND_MPC, MPC_EPS_GATE, STATE_CLIP, WorldModel,
                             _OBS_AREA, _OBS_PERF, _OBS_POWER, blend,
                             mpc_active, mpc_plan, surrogate_reward,
                             wm_predict, wm_train_step)
from meshdse.rlenv import (ACTION_DIM_CONT, SUBSET_DIM, TCC_ACTION_IDX,
                           ActionVector)


def small_wm(seed=0, state_dim=6, action_dim=3):
    return WorldModel(np.random.default_rng(seed), state_dim, action_dim)


class TestWorldModel:
    def test_zero_net_residual_identity(self):
        wm = small_wm()
        for k in wm.net.params:
            wm.net.params[k][:] = 0.0
        s = np.arange(6, dtype=float)
        assert wm.predict(s, np.zeros(3)) == pytest.approx(s, abs=1e-15)

    def test_batch_and_single_agree(self):
        wm = small_wm(1)
        rng = np.random.default_rng(2)
        s = rng.normal(size=(4, 6))
        a = rng.normal(size=(4, 3))
        batch = wm.predict(s, a)
        for i in range(4):
            assert batch[i] == pytest.approx(wm.predict(s[i], a[i]), rel=1e-12)

    def test_forward_counter(self):
        wm = small_wm(3)
        wm.predict(np.zeros(6), np.zeros(3))
        wm.predict(np.zeros((5, 6)), np.zeros((5, 3)))
        assert wm.n_forwards == 6

    def test_learns_linear_dynamics(self):
        # s' = s + A a with fixed A; residual target is exactly linear
        rng = np.random.default_rng(4)
        wm = small_wm(4)
        wm.opt.lr = 3e-3
        amat = rng.normal(size=(6, 3)) * 0.3
        for _ in range(3000):
            s = rng.uniform(-1, 1, size=(32, 6))
            a = rng.uniform(-1, 1, size=(32, 3))
            loss = wm_train_step(wm, {"s": s, "a": a,
                                      "s_next": s + a @ amat.T})
        assert loss < 1e-3
        assert wm.train_steps == 3000

    def test_wm_predict_wrapper(self):
        wm = small_wm(5)
        s, a = np.zeros(6), np.zeros(3)
        assert np.array_equal(wm_predict(wm, s, a), wm.predict(s, a))


class TestSurrogateReward:
    def test_formula(self):
        s = np.zeros(SUBSET_DIM)
        s[_OBS_PERF] = 0.8
        s[_OBS_POWER] = 0.5
        s[_OBS_AREA] = 0.25
        want = 0.8 - 0.3 * 0.5 - 0.2 * 0.25
        assert surrogate_reward(s)[0] == pytest.approx(want, abs=1e-15)

    def test_metric_positions_distinct(self):
        assert len({_OBS_POWER, _OBS_PERF, _OBS_AREA}) == 3


class TestGate:
    def test_requires_low_epsilon_and_training(self):
        wm = small_wm(6)
        assert not mpc_active(0.1, wm)  # untrained
        wm.train_steps = 1
        assert mpc_active(0.1, wm)
        assert not mpc_active(MPC_EPS_GATE, wm)  # strict inequality
        assert not mpc_active(0.5, wm)


class TestMpcPlan:
    def _policy(self, const=0.0):
        def policy_mean(s):
            s2 = np.atleast_2d(s)
            return np.full((s2.shape[0], ACTION_DIM_CONT), const)
        return policy_mean

    def _full_wm(self, seed):
        return WorldModel(np.random.default_rng(seed))

    def test_exact_forward_budget(self):
        wm = self._full_wm(7)
        rng = np.random.default_rng(8)
        mpc_plan(self._policy(), wm, np.zeros(SUBSET_DIM), rng, k=16, h=4)
        assert wm.n_forwards == 16 * 4

    def test_k1_sigma0_returns_policy_mean(self):
        wm = self._full_wm(9)
        rng = np.random.default_rng(10)
        a = mpc_plan(self._policy(0.4), wm, np.zeros(SUBSET_DIM), rng,
                     k=1, h=2, sigma=0.0)
        assert a == pytest.approx(np.full(ACTION_DIM_CONT, 0.4), abs=1e-15)

    def test_actions_clipped(self):
        wm = self._full_wm(11)
        rng = np.random.default_rng(12)
        a = mpc_plan(self._policy(0.99), wm, np.zeros(SUBSET_DIM), rng,
                     k=32, h=1, sigma=5.0)
        assert np.all(np.abs(a) <= 1.0)

    def test_tie_breaks_to_first_candidate(self):
        # zeroed network makes every rollout identical, so argmax returns 0
        wm = self._full_wm(13)
        for k in wm.net.params:
            wm.net.params[k][:] = 0.0

        rng = np.random.default_rng(14)
        first_draws = np.clip(
            0.3 * np.random.default_rng(14).standard_normal(
                (8, ACTION_DIM_CONT)), -1, 1)
        a = mpc_plan(self._policy(), wm, np.zeros(SUBSET_DIM), rng, k=8, h=3)
        assert a == pytest.approx(first_draws[0], abs=1e-12)

    def test_rollout_states_clamped(self):
        wm = self._full_wm(15)
        for k in wm.net.params:
            wm.net.params[k][:] = 0.0
        wm.net.params["b2"][:] = 100.0  # residual pushes far out of range
        seen = []

        def policy_mean(s):
            s2 = np.atleast_2d(s)
            seen.append(s2.copy())
            return np.zeros((s2.shape[0], ACTION_DIM_CONT))

        mpc_plan(policy_mean, wm, np.zeros(SUBSET_DIM),
                 np.random.default_rng(16), k=4, h=3)
        for s in seen[1:]:  # post-rollout states
            assert s.max() <= STATE_CLIP[1]

    def test_picks_higher_surrogate_return(self):
        # dynamics: perf head of next state equals first action dim
        wm = WorldModel(np.random.default_rng(17))
        for k in wm.net.params:
            wm.net.params[k][:] = 0.0

        def fake_predict(states, actions):
            wm.n_forwards += np.atleast_2d(states).shape[0]
            out = np.zeros_like(np.atleast_2d(states))
            out[:, _OBS_PERF] = np.atleast_2d(actions)[:, 0]
            return out

        wm.predict = fake_predict

        def policy_mean(s):
            return np.zeros((np.atleast_2d(s).shape[0], ACTION_DIM_CONT))

        rng = np.random.default_rng(18)
        a = mpc_plan(policy_mean, wm, np.zeros(SUBSET_DIM), rng, k=64, h=1,
                     sigma=0.5)
        draws = np.clip(
            0.5 * np.random.default_rng(18).standard_normal(
                (64, ACTION_DIM_CONT)), -1, 1)
        assert a[0] == pytest.approx(draws[:, 0].max(), abs=1e-12)


class TestBlend:
    def test_tcc_dims_blended_everything_else_kept(self):
        a_mpc = np.full(ACTION_DIM_CONT, 0.8)
        sac = ActionVector(np.full(ACTION_DIM_CONT, -0.4), (1, -2, 0, 2))
        out = blend(a_mpc, sac)
        tcc = set(TCC_ACTION_IDX)
        for i in range(ACTION_DIM_CONT):
            if i in tcc:
                want = BLEND_MPC * 0.8 + (1 - BLEND_MPC) * -0.4
            else:
                want = -0.4
            assert out.continuous[i] == pytest.approx(want, abs=1e-12)
        assert out.discrete == sac.discrete

    def test_blend_output_clipped(self):
        a_mpc = np.full(ACTION_DIM_CONT, 1.0)
        sac = ActionVector(np.full(ACTION_DIM_CONT, 1.0), (0, 0, 0, 0))
        out = blend(a_mpc, sac)
        assert np.all(out.continuous <= 1.0)
