"""Soft actor-critic trainer: twin critics with Polyak-averaged targets,
prioritized replay with importance-sampling correction, automatic entropy
temperature, and an epsilon-greedy exploration overlay with adaptive decay.

All gradients are computed analytically on the numpy MLPs from `neural`;
the tanh-Gaussian policy gradient is derived by hand and covered by
finite-difference tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .neural import (LOG_STD_MAX, LOG_STD_MIN, Adam, Mlp, gaussian_tanh_sample,
                     softmax)
from .rlenv import ACTION_DIM_CONT, ACTION_DIM_DISC, SUBSET_DIM, ActionVector

N_DISCRETE_CHOICES = len((-2, -1, 0, 1, 2))
ACTOR_OUT = 4 * N_DISCRETE_CHOICES + 2 * ACTION_DIM_CONT  # 20 + 30 + 30


@dataclass
class SacConfig:
    state_dim: int = SUBSET_DIM
    action_dim: int = ACTION_DIM_CONT
    hidden: int = 256
    lr_actor: float = 3e-4
    lr_critic: float = 3e-4
    lr_alpha: float = 3e-4
    gamma: float = 0.99
    tau: float = 0.005
    batch_size: int = 256
    warmup: int = 1000
    target_entropy: float = -30.0
    buffer_capacity: int = 100_000
    grad_clip: float = 1.0
    eps_start: float = 0.5
    eps_min: float = 0.1
    eps_horizon: int = 4000
    updates_per_episode: int = 1


# --- prioritized replay -------------------------------------------------------

ALPHA_PER = 0.6
PRIORITY_EPS = 1e-6
BETA_START = 0.4
BETA_STEP = 0.001


class ReplayBuffer:
    """Ring buffer with proportional prioritized sampling.

    Priorities are stored already raised to the 0.6 exponent, so sampling
    probabilities are p_i / sum(p).
    """

    def __init__(self, capacity: int, state_dim: int, action_dim: int):
        self.capacity = capacity
        self.states = np.zeros((capacity, state_dim))
        self.actions = np.zeros((capacity, action_dim))
        self.discretes = np.zeros((capacity, ACTION_DIM_DISC), dtype=int)
        self.rewards = np.zeros(capacity)
        self.next_states = np.zeros((capacity, state_dim))
        self.dones = np.zeros(capacity)
        self.priorities = np.zeros(capacity)
        self.size = 0
        self.pos = 0
        self.beta = BETA_START

    def store(self, s, a, r, s_next, done: bool,
              disc: tuple[int, ...] | None = None) -> None:
        p = self.priorities[: self.size].max() if self.size else 1.0
        i = self.pos
        self.states[i] = s
        self.actions[i] = a
        self.discretes[i] = disc if disc is not None else (0,) * ACTION_DIM_DISC
        self.rewards[i] = r
        self.next_states[i] = s_next
        self.dones[i] = float(done)
        self.priorities[i] = p
        self.pos = (self.pos + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def update_priorities(self, indices: np.ndarray, td_errors: np.ndarray) -> None:
        self.priorities[indices] = (np.abs(td_errors) + PRIORITY_EPS) ** ALPHA_PER

    def sample(self, batch_size: int, rng: np.random.Generator
               ) -> tuple[dict, np.ndarray, np.ndarray]:
        """Returns (batch dict, IS weights normalized by their max, indices).
        Each call anneals beta by +0.001 toward 1.0."""
        if self.size == 0:
            raise ValueError("cannot sample from an empty buffer")
        p = self.priorities[: self.size]
        probs = p / p.sum()
        idx = rng.choice(self.size, size=batch_size, p=probs)
        weights = (self.size * probs[idx]) ** (-self.beta)
        weights = weights / weights.max()
        self.beta = min(1.0, self.beta + BETA_STEP)
        batch = {
            "s": self.states[idx], "a": self.actions[idx],
            "disc": self.discretes[idx],
            "r": self.rewards[idx], "s_next": self.next_states[idx],
            "done": self.dones[idx],
        }
        return batch, weights, idx


# --- epsilon schedule -----------------------------------------------------------

@dataclass
class EpsilonSchedule:
    eps: float = 0.5
    eps_min: float = 0.1
    decay: float = field(default=0.0)

    @classmethod
    def for_budget(cls, eps0: float, eps_min: float, horizon: int) -> "EpsilonSchedule":
        """Geometric decay reaching eps_min from eps0 in `horizon` episodes:
        d = (eps_min / eps0)^(1/horizon)."""
        if not (0 < eps_min <= eps0 <= 1):
            raise ValueError("need 0 < eps_min <= eps0 <= 1")
        d = (eps_min / eps0) ** (1.0 / max(1, horizon))
        return cls(eps=eps0, eps_min=eps_min, decay=d)

    def step(self, feasible_found: bool) -> float:
        """Decay toward eps_min; when no feasible config has been found the
        decay slows to d' = 1 - (1 - d) * 0.1 to keep exploring."""
        d = self.decay if feasible_found else 1.0 - (1.0 - self.decay) * 0.1
        self.eps = max(self.eps_min, self.eps * d)
        return self.eps


# --- policy heads ----------------------------------------------------------------

def policy_forward(actor: Mlp, s: np.ndarray, cache: dict | None = None
                   ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(discrete logits (..., 4, 5), tanh-squashed means, clamped log-stds)."""
    out = actor.forward(s, cache=cache)
    logits = out[..., :20].reshape(*out.shape[:-1], 4, N_DISCRETE_CHOICES)
    means = np.tanh(out[..., 20:50])
    log_stds = np.clip(out[..., 50:80], LOG_STD_MIN, LOG_STD_MAX)
    return logits, means, log_stds


def sample_discrete(logits: np.ndarray, rng: np.random.Generator) -> tuple[int, ...]:
    """One delta per 5-way head, mapped onto {-2..+2}."""
    deltas = []
    for head in logits:
        p = softmax(head)
        u = rng.random()
        idx = int(np.searchsorted(np.cumsum(p), u * p.sum(), side="right"))
        deltas.append(min(idx, N_DISCRETE_CHOICES - 1) - 2)
    return tuple(deltas)


def uniform_action(rng: np.random.Generator) -> ActionVector:
    cont = rng.uniform(-1.0, 1.0, size=ACTION_DIM_CONT)
    disc = tuple(int(rng.integers(-2, 3)) for _ in range(ACTION_DIM_DISC))
    return ActionVector(cont, disc)


# --- trainer ----------------------------------------------------------------------

class SacState:
    def __init__(self, cfg: SacConfig, rng: np.random.Generator):
        self.cfg = cfg
        sd, ad, h = cfg.state_dim, cfg.action_dim, cfg.hidden
        self.actor = Mlp([sd, h, h, ACTOR_OUT], rng)
        self.q1 = Mlp([sd + ad, h, h, 1], rng)
        self.q2 = Mlp([sd + ad, h, h, 1], rng)
        self.q1_target = self.q1.clone()
        self.q2_target = self.q2.clone()
        self.opt_actor = Adam(lr=cfg.lr_actor)
        self.opt_q1 = Adam(lr=cfg.lr_critic)
        self.opt_q2 = Adam(lr=cfg.lr_critic)
        self.opt_alpha = Adam(lr=cfg.lr_alpha)
        self.log_alpha = {"log_alpha": np.zeros(1)}
        self.reward_baseline = 0.0  # EMA baseline for the discrete-head update
        self.buffer = ReplayBuffer(cfg.buffer_capacity, sd, ad)
        self.epsilon = EpsilonSchedule.for_budget(
            cfg.eps_start, cfg.eps_min, cfg.eps_horizon)
        self.step = 0

    @property
    def alpha(self) -> float:
        return float(np.exp(self.log_alpha["log_alpha"][0]))

    def select_action(self, s: np.ndarray, rng: np.random.Generator,
                      feasible_found: bool = True) -> ActionVector:
        """Warmup and epsilon-greedy draws are uniform; otherwise sample the
        tanh-Gaussian policy and the four categorical mesh heads."""
        self.step += 1
        if self.step <= self.cfg.warmup or rng.random() < self.epsilon.eps:
            return uniform_action(rng)
        logits, means, log_stds = policy_forward(self.actor, s)
        noise = rng.standard_normal(self.cfg.action_dim)
        cont, _ = gaussian_tanh_sample(means, log_stds, noise)
        disc = sample_discrete(logits, rng)
        return ActionVector(cont, disc)

    def policy_mean_action(self, s: np.ndarray) -> np.ndarray:
        _, means, _ = policy_forward(self.actor, s)
        return means

    # -- updates ----------------------------------------------------------

    def _clip(self, grads: dict) -> dict:
        c = self.cfg.grad_clip
        return {k: np.clip(g, -c, c) for k, g in grads.items()}

    def critic_update(self, batch: dict, weights: np.ndarray,
                      rng: np.random.Generator) -> tuple[np.ndarray, float]:
        """Clipped double-Q Bellman step on both critics; returns the TD
        errors (for priority refresh) and the mean critic loss."""
        cfg = self.cfg
        s, a, r = batch["s"], batch["a"], batch["r"]
        s_next, done = batch["s_next"], batch["done"]
        n = len(r)

        _, means, log_stds = policy_forward(self.actor, s_next)
        noise = rng.standard_normal(means.shape)
        a_next, log_pi = gaussian_tanh_sample(means, log_stds, noise)
        xin_next = np.concatenate([s_next, a_next], axis=1)
        q_next = np.minimum(self.q1_target.forward(xin_next)[:, 0],
                            self.q2_target.forward(xin_next)[:, 0])
        y = r + cfg.gamma * (1.0 - done) * (q_next - self.alpha * log_pi)

        xin = np.concatenate([s, a], axis=1)
        losses = []
        td_errors = np.zeros(n)
        for q, opt in ((self.q1, self.opt_q1), (self.q2, self.opt_q2)):
            cache = {}
            pred = q.forward(xin, cache=cache)[:, 0]
            delta = pred - y
            losses.append(float(np.mean(weights * delta ** 2)))
            upstream = (2.0 * weights * delta / n)[:, None]
            grads, _ = q.backward(cache, upstream)
            opt.step(q.params, self._clip(grads))
            td_errors += delta / 2.0
        return td_errors, sum(losses) / 2.0

    def actor_update(self, batch: dict, rng: np.random.Generator) -> float:
        """Minimize E[alpha * log pi(a|s) - min(Q1, Q2)(s, a)] with the
        reparameterized tanh-Gaussian gradient."""
        s = batch["s"]
        n = len(s)
        cache = {}
        out = self.actor.forward(s, cache=cache)
        pre_mu = out[:, 20:50]
        raw_ls = out[:, 50:80]
        mu = np.tanh(pre_mu)
        log_stds = np.clip(raw_ls, LOG_STD_MIN, LOG_STD_MAX)
        stds = np.exp(log_stds)
        noise = rng.standard_normal(mu.shape)
        a, log_pi = gaussian_tanh_sample(mu, log_stds, noise)

        xin = np.concatenate([s, a], axis=1)
        qc1, qc2 = {}, {}
        v1 = self.q1.forward(xin, cache=qc1)[:, 0]
        v2 = self.q2.forward(xin, cache=qc2)[:, 0]
        ones = np.ones((n, 1))
        _, gin1 = self.q1.backward(qc1, ones)
        _, gin2 = self.q2.backward(qc2, ones)
        use1 = (v1 <= v2)[:, None]
        dq_da = np.where(use1, gin1[:, self.cfg.state_dim:],
                         gin2[:, self.cfg.state_dim:])

        alpha = self.alpha
        sig_eps = stds * noise
        one_m_a2 = 1.0 - a ** 2
        # dL/dmu and dL/dlog_sigma per dimension (loss = alpha*logpi - Qmin)
        g_mu = alpha * 2.0 * a + (-dq_da) * one_m_a2
        g_ls = alpha * (-1.0 + 2.0 * a * sig_eps) + (-dq_da) * one_m_a2 * sig_eps
        clamp_mask = (raw_ls > LOG_STD_MIN) & (raw_ls < LOG_STD_MAX)

        upstream = np.zeros_like(out)
        upstream[:, 20:50] = g_mu * (1.0 - mu ** 2) / n
        upstream[:, 50:80] = g_ls * clamp_mask / n

        # The mesh/supercluster heads get an advantage-weighted likelihood
        # step on the stored discrete deltas: the critics never see the
        # discrete action, so reward-minus-baseline stands in for Q.
        if "disc" in batch and "r" in batch:
            rewards = batch["r"]
            self.reward_baseline = 0.99 * self.reward_baseline \
                + 0.01 * float(np.mean(rewards))
            adv = rewards - self.reward_baseline
            logits = out[:, :20].reshape(n, 4, N_DISCRETE_CHOICES)
            probs = softmax(logits)
            onehot = np.zeros_like(probs)
            heads = np.asarray(batch["disc"], dtype=int) + 2
            rows = np.arange(n)[:, None]
            cols = np.arange(4)[None, :]
            onehot[rows, cols, heads] = 1.0
            g_disc = -adv[:, None, None] * (onehot - probs) / n
            upstream[:, :20] = g_disc.reshape(n, 20)

        grads, _ = self.actor.backward(cache, upstream)
        self.opt_actor.step(self.actor.params, self._clip(grads))
        loss = float(np.mean(alpha * log_pi - np.minimum(v1, v2)))
        self._nan_guard()
        return loss

    def alpha_update(self, batch: dict, rng: np.random.Generator) -> float:
        """Temperature step toward the target entropy; log_alpha clamped to
        [-10, 10]."""
        _, means, log_stds = policy_forward(self.actor, batch["s"])
        noise = rng.standard_normal(means.shape)
        _, log_pi = gaussian_tanh_sample(means, log_stds, noise)
        grad = -float(np.mean(log_pi + self.cfg.target_entropy))
        self.opt_alpha.step(self.log_alpha,
                            {"log_alpha": np.clip(np.array([grad]), -1.0, 1.0)})
        self.log_alpha["log_alpha"] = np.clip(self.log_alpha["log_alpha"], -10.0, 10.0)
        return self.alpha

    def soft_update(self, tau: float | None = None) -> None:
        t = self.cfg.tau if tau is None else tau
        for target, live in ((self.q1_target, self.q1), (self.q2_target, self.q2)):
            for k in live.params:
                target.params[k] = (1.0 - t) * target.params[k] + t * live.params[k]

    def update(self, rng: np.random.Generator) -> dict:
        """One training iteration: critic, actor, temperature, soft targets."""
        batch, weights, idx = self.buffer.sample(self.cfg.batch_size, rng)
        td, critic_loss = self.critic_update(batch, weights, rng)
        self.buffer.update_priorities(idx, td)
        actor_loss = self.actor_update(batch, rng)
        alpha = self.alpha_update(batch, rng)
        self.soft_update()
        return {"critic_loss": critic_loss, "actor_loss": actor_loss, "alpha": alpha}

    def _nan_guard(self) -> None:
        for net in (self.actor, self.q1, self.q2):
            for k, v in net.params.items():
                if not np.all(np.isfinite(v)):
                    raise FloatingPointError(f"non-finite parameter {k}")


def gae_advantages(rewards: np.ndarray, values: np.ndarray, gamma: float = 0.99,
                   lam: float = 0.95) -> np.ndarray:
    """Generalized advantage estimation over a trajectory; optional alternate
    advantage estimator (unused by the default SAC path)."""
    n = len(rewards)
    adv = np.zeros(n)
    last = 0.0
    for t in reversed(range(n)):
        v_next = values[t + 1] if t + 1 < len(values) else 0.0
        delta = rewards[t] + gamma * v_next - values[t]
        last = delta + gamma * lam * last
        adv[t] = last
    return adv
