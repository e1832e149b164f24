import math

import numpy as np
import pytest

from meshdse.neural import LOG_STD_MAX, LOG_STD_MIN
from meshdse.rlenv import ActionVector
from meshdse.sac import (ACTOR_OUT, ALPHA_PER, BETA_START, PRIORITY_EPS,
                         EpsilonSchedule, ReplayBuffer, SacConfig, SacState,
                         gae_advantages, policy_forward, sample_discrete,
                         uniform_action)


def small_sac(seed=0, **overrides):
    overrides.setdefault("warmup", 0)
    cfg = SacConfig(hidden=32, batch_size=16, **overrides)
    return SacState(cfg, np.random.default_rng(seed)), cfg


def fill_buffer(sac, rng, n=64, reward_fn=None):
    for _ in range(n):
        s = rng.normal(size=sac.cfg.state_dim)
        a = rng.uniform(-1, 1, size=sac.cfg.action_dim)
        r = reward_fn(s, a) if reward_fn else rng.normal()
        sac.buffer.store(s, a, r, rng.normal(size=sac.cfg.state_dim), False)


class TestReplayBuffer:
    def test_new_entries_get_max_priority(self):
        buf = ReplayBuffer(8, 2, 2)
        buf.store(np.zeros(2), np.zeros(2), 0.0, np.zeros(2), False)
        assert buf.priorities[0] == 1.0
        buf.update_priorities(np.array([0]), np.array([3.0]))
        buf.store(np.zeros(2), np.zeros(2), 0.0, np.zeros(2), False)
        assert buf.priorities[1] == pytest.approx(buf.priorities[0])

    def test_priority_exponent_oracle(self):
        buf = ReplayBuffer(8, 2, 2)
        for _ in range(4):
            buf.store(np.zeros(2), np.zeros(2), 0.0, np.zeros(2), False)
        td = np.array([0.0, 0.5, -2.0, 10.0])
        buf.update_priorities(np.arange(4), td)
        want = (np.abs(td) + PRIORITY_EPS) ** ALPHA_PER
        assert buf.priorities[:4] == pytest.approx(want, rel=1e-12)

    def test_ring_eviction(self):
        buf = ReplayBuffer(4, 1, 1)
        for i in range(6):
            buf.store(np.array([float(i)]), np.zeros(1), float(i),
                      np.zeros(1), False)
        assert buf.size == 4
        assert buf.states[:, 0].tolist() == [4.0, 5.0, 2.0, 3.0]

    def test_empty_sample_raises(self):
        with pytest.raises(ValueError):
            ReplayBuffer(4, 1, 1).sample(2, np.random.default_rng(0))

    def test_uniform_priorities_sample_uniformly_3_sigma(self):
        buf = ReplayBuffer(16, 1, 1)
        for i in range(4):
            buf.store(np.array([float(i)]), np.zeros(1), 0.0, np.zeros(1), False)
        rng = np.random.default_rng(1)
        n = 100_000
        counts = np.zeros(4)
        _, _, idx = buf.sample(n, rng)
        for i in idx:
            counts[i] += 1
        p = 0.25
        sigma = math.sqrt(n * p * (1 - p))
        assert np.all(np.abs(counts - n * p) <= 3 * sigma)

    def test_proportional_sampling_3_sigma(self):
        buf = ReplayBuffer(16, 1, 1)
        for _ in range(2):
            buf.store(np.zeros(1), np.zeros(1), 0.0, np.zeros(1), False)
        buf.priorities[:2] = [1.0, 3.0]
        rng = np.random.default_rng(2)
        n = 100_000
        _, _, idx = buf.sample(n, rng)
        hits = int((idx == 1).sum())
        p = 0.75
        sigma = math.sqrt(n * p * (1 - p))
        assert abs(hits - n * p) <= 3 * sigma

    def test_is_weights_formula_and_beta_anneal(self):
        buf = ReplayBuffer(16, 1, 1)
        for _ in range(4):
            buf.store(np.zeros(1), np.zeros(1), 0.0, np.zeros(1), False)
        buf.priorities[:4] = [1.0, 2.0, 3.0, 4.0]
        assert buf.beta == BETA_START
        rng = np.random.default_rng(3)
        _, w, idx = buf.sample(8, rng)
        probs = buf.priorities[:4] / buf.priorities[:4].sum()
        raw = (4 * probs[idx]) ** (-BETA_START)
        assert w == pytest.approx(raw / raw.max(), rel=1e-12)
        assert buf.beta == pytest.approx(BETA_START + 0.001)

    def test_beta_one_uniform_weights_are_one(self):
        buf = ReplayBuffer(16, 1, 1)
        for _ in range(4):
            buf.store(np.zeros(1), np.zeros(1), 0.0, np.zeros(1), False)
        buf.beta = 1.0
        _, w, _ = buf.sample(16, np.random.default_rng(4))
        assert np.all(w == pytest.approx(1.0))
        assert buf.beta == 1.0  # capped


class TestEpsilonSchedule:
    def test_decay_formula(self):
        sched = EpsilonSchedule.for_budget(0.5, 0.1, 4000)
        assert sched.decay == pytest.approx((0.1 / 0.5) ** (1 / 4000), rel=1e-12)
        assert sched.decay == pytest.approx(0.999598, abs=1e-6)

    def test_reaches_min_at_horizon(self):
        sched = EpsilonSchedule.for_budget(0.5, 0.1, 200)
        for _ in range(200):
            sched.step(feasible_found=True)
        assert sched.eps == pytest.approx(0.1, rel=1e-9)
        sched.step(True)
        assert sched.eps == 0.1  # floored

    def test_stuck_decay_slows(self):
        a = EpsilonSchedule.for_budget(0.5, 0.1, 100)
        b = EpsilonSchedule.for_budget(0.5, 0.1, 100)
        a.step(feasible_found=True)
        b.step(feasible_found=False)
        d = a.decay
        assert b.eps == pytest.approx(0.5 * (1 - (1 - d) * 0.1), rel=1e-12)
        assert b.eps > a.eps

    def test_invalid_args(self):
        with pytest.raises(ValueError):
            EpsilonSchedule.for_budget(0.1, 0.5, 100)


class TestPolicyHeads:
    def test_forward_shapes_and_ranges(self):
        sac, cfg = small_sac()
        s = np.zeros(cfg.state_dim)
        logits, means, log_stds = policy_forward(sac.actor, s)
        assert logits.shape == (4, 5)
        assert means.shape == (30,)
        assert log_stds.shape == (30,)
        assert np.all(np.abs(means) < 1.0)
        assert np.all((log_stds >= LOG_STD_MIN) & (log_stds <= LOG_STD_MAX))

    def test_actor_out_dim(self):
        assert ACTOR_OUT == 80

    def test_sample_discrete_range(self):
        rng = np.random.default_rng(5)
        logits = rng.normal(size=(4, 5))
        for _ in range(50):
            d = sample_discrete(logits, rng)
            assert len(d) == 4
            assert all(-2 <= x <= 2 for x in d)

    def test_uniform_action_bounds(self):
        rng = np.random.default_rng(6)
        a = uniform_action(rng)
        assert isinstance(a, ActionVector)
        assert np.all(np.abs(a.continuous) <= 1.0)
        assert all(-2 <= d <= 2 for d in a.discrete)

    def test_warmup_actions_are_uniform(self):
        sac, cfg = small_sac(warmup=10)
        rng_a = np.random.default_rng(7)
        rng_b = np.random.default_rng(7)
        got = sac.select_action(np.zeros(cfg.state_dim), rng_a)
        want = uniform_action(rng_b)
        assert np.array_equal(got.continuous, want.continuous)
        assert got.discrete == want.discrete


class TestUpdates:
    def test_terminal_target_is_reward(self):
        sac, cfg = small_sac(seed=1)
        rng = np.random.default_rng(8)
        n = 8
        batch = {
            "s": rng.normal(size=(n, cfg.state_dim)),
            "a": rng.uniform(-1, 1, size=(n, cfg.action_dim)),
            "r": rng.normal(size=n),
            "s_next": rng.normal(size=(n, cfg.state_dim)),
            "done": np.ones(n),
        }
        xin = np.concatenate([batch["s"], batch["a"]], axis=1)
        p1 = sac.q1.forward(xin)[:, 0]
        p2 = sac.q2.forward(xin)[:, 0]
        td, _ = sac.critic_update(batch, np.ones(n), rng)
        # with done=1 the bootstrap vanishes, so y = r exactly
        assert td == pytest.approx((p1 + p2) / 2 - batch["r"], rel=1e-9)

    def test_critic_update_moves_toward_target(self):
        sac, cfg = small_sac(seed=2)
        rng = np.random.default_rng(9)
        n = 16
        batch = {
            "s": np.zeros((n, cfg.state_dim)),
            "a": np.zeros((n, cfg.action_dim)),
            "r": np.full(n, 5.0),
            "s_next": np.zeros((n, cfg.state_dim)),
            "done": np.ones(n),
        }
        xin = np.concatenate([batch["s"], batch["a"]], axis=1)
        before = abs(sac.q1.forward(xin)[0, 0] - 5.0)
        for _ in range(300):
            sac.critic_update(batch, np.ones(n), rng)
        after = abs(sac.q1.forward(xin)[0, 0] - 5.0)
        assert after < before

    def test_soft_update_limits(self):
        sac, _ = small_sac(seed=3)
        sac.q1.params["W0"] += 1.0
        snapshot = sac.q1_target.params["W0"].copy()
        sac.soft_update(tau=0.0)
        assert np.array_equal(sac.q1_target.params["W0"], snapshot)
        sac.soft_update(tau=1.0)
        assert np.array_equal(sac.q1_target.params["W0"], sac.q1.params["W0"])

    def test_soft_update_tau_blend(self):
        sac, _ = small_sac(seed=4)
        live = sac.q1.params["W0"].copy() + 2.0
        sac.q1.params["W0"] = live
        tgt = sac.q1_target.params["W0"].copy()
        sac.soft_update(tau=0.25)
        assert sac.q1_target.params["W0"] == pytest.approx(
            0.75 * tgt + 0.25 * live, rel=1e-12)

    def test_log_alpha_clamped(self):
        sac, cfg = small_sac(seed=5)
        sac.log_alpha["log_alpha"] = np.array([9.9999])
        sac.opt_alpha.lr = 10.0
        rng = np.random.default_rng(10)
        fill_buffer(sac, rng)
        batch, _, _ = sac.buffer.sample(8, rng)
        sac.alpha_update(batch, rng)
        assert abs(sac.log_alpha["log_alpha"][0]) <= 10.0

    def test_update_returns_finite_stats(self):
        sac, cfg = small_sac(seed=6)
        rng = np.random.default_rng(11)
        fill_buffer(sac, rng)
        stats = sac.update(rng)
        assert set(stats) == {"critic_loss", "actor_loss", "alpha"}
        assert all(np.isfinite(v) for v in stats.values())

    def test_update_refreshes_priorities(self):
        sac, cfg = small_sac(seed=7)
        rng = np.random.default_rng(12)
        fill_buffer(sac, rng, n=32)
        sac.update(rng)
        pri = sac.buffer.priorities[:32]
        assert not np.all(pri == 1.0)

    def test_actor_update_improves_q_of_mean_action(self):
        # bandit: reward depends only on the first action dim, peak at 0.3
        sac, cfg = small_sac(seed=8)
        rng = np.random.default_rng(13)
        fill_buffer(sac, rng, n=256,
                    reward_fn=lambda s, a: -(a[0] - 0.3) ** 2)
        s0 = np.zeros(cfg.state_dim)
        for _ in range(400):
            sac.update(rng)
        mean = sac.policy_mean_action(s0)
        assert abs(mean[0] - 0.3) < 0.25


class TestGae:
    def test_matches_recursive_oracle(self):
        rng = np.random.default_rng(14)
        r = rng.normal(size=6)
        v = rng.normal(size=6)
        gamma, lam = 0.99, 0.95
        got = gae_advantages(r, v, gamma, lam)

        def oracle(t):
            if t == len(r):
                return 0.0
            v_next = v[t + 1] if t + 1 < len(v) else 0.0
            return (r[t] + gamma * v_next - v[t]) + gamma * lam * oracle(t + 1)

        want = [oracle(t) for t in range(len(r))]
        assert got == pytest.approx(want, rel=1e-10)

    def test_single_step(self):
        adv = gae_advantages(np.array([2.0]), np.array([0.5]), 0.9, 0.9)
        assert adv[0] == pytest.approx(1.5)
