"""Learned world model over state residuals and MPC action refinement.

The world model is an MLP on concat(state, action) predicting the state
delta.  MPC samples noisy first actions around the policy mean, rolls each
candidate out for a short horizon with policy-mean actions, scores rollouts
with the surrogate PPA reward, and returns the first action of the best
rollout, blended with the raw policy action on the per-core parameter dims.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .neural import Adam, Mlp
from .rlenv import ACTION_DIM_CONT, SUBSET_DIM, SUBSET_IDX, ActionVector, TCC_ACTION_IDX

WM_HIDDEN = (128, 64)
WM_LR = 1.5e-4

MPC_CANDIDATES = 64
MPC_HORIZON = 5
MPC_NOISE = 0.3
MPC_GAMMA = 0.99
MPC_EPS_GATE = 0.15
BLEND_MPC = 0.7

# Positions of the observed (power, perf, area) metrics inside the actor's
# state subset.
_OBS_POWER = SUBSET_IDX.index(50)
_OBS_PERF = SUBSET_IDX.index(51)
_OBS_AREA = SUBSET_IDX.index(52)

# Rollout states are clamped to the widest normalization bounds used by any
# state entry to keep multi-step predictions from diverging.
STATE_CLIP = (-1.0, 2.0)


class WorldModel:
    def __init__(self, rng: np.random.Generator,
                 state_dim: int = SUBSET_DIM, action_dim: int = ACTION_DIM_CONT):
        self.state_dim = state_dim
        self.action_dim = action_dim
        self.net = Mlp([state_dim + action_dim, *WM_HIDDEN, state_dim], rng)
        self.opt = Adam(lr=WM_LR)
        self.train_steps = 0
        self.n_forwards = 0  # per-sample forward count, for the K*H budget

    def predict(self, s: np.ndarray, a: np.ndarray) -> np.ndarray:
        """Residual next-state prediction: s' = s + f([s; a])."""
        x = np.concatenate([np.atleast_2d(s), np.atleast_2d(a)], axis=-1)
        self.n_forwards += x.shape[0]
        delta = self.net.forward(x)
        out = np.atleast_2d(s) + delta
        return out[0] if np.asarray(s).ndim == 1 else out

    def train_step(self, s: np.ndarray, a: np.ndarray, s_next: np.ndarray) -> float:
        """One MSE step on the observed state deltas."""
        x = np.concatenate([s, a], axis=1)
        target = s_next - s
        cache = {}
        pred = self.net.forward(x, cache=cache)
        err = pred - target
        loss = float(np.mean(err ** 2))
        upstream = 2.0 * err / err.size
        grads, _ = self.net.backward(cache, upstream)
        self.opt.step(self.net.params, grads)
        self.train_steps += 1
        return loss


def wm_predict(wm: WorldModel, s: np.ndarray, a: np.ndarray) -> np.ndarray:
    return wm.predict(s, a)


def wm_train_step(wm: WorldModel, batch: dict) -> float:
    return wm.train_step(batch["s"], batch["a"], batch["s_next"])


def surrogate_reward(s: np.ndarray) -> np.ndarray:
    """Surrogate PPA reward of a (batch of) state(s): the observed
    performance head minus 0.3 * power and 0.2 * area."""
    s = np.atleast_2d(s)
    return s[:, _OBS_PERF] - 0.3 * s[:, _OBS_POWER] - 0.2 * s[:, _OBS_AREA]


def mpc_active(epsilon: float, wm: WorldModel) -> bool:
    """MPC refines actions only during exploitation with a trained model."""
    return epsilon < MPC_EPS_GATE and wm.train_steps >= 1


def mpc_plan(policy_mean, wm: WorldModel, s: np.ndarray,
             rng: np.random.Generator, k: int = MPC_CANDIDATES,
             h: int = MPC_HORIZON, sigma: float = MPC_NOISE,
             gamma: float = MPC_GAMMA) -> np.ndarray:
    """Pick the best first action over k noisy candidates rolled out h steps.

    `policy_mean` maps a state batch to deterministic continuous actions.
    Exactly k*h world-model forwards are spent.  Ties break toward the
    lowest candidate index.
    """
    base = np.asarray(policy_mean(s))
    first = np.clip(base + sigma * rng.standard_normal((k, wm.action_dim)), -1.0, 1.0)

    states = np.repeat(np.atleast_2d(s), k, axis=0)
    returns = np.zeros(k)
    actions = first
    for step in range(h):
        states = np.clip(wm.predict(states, actions), *STATE_CLIP)
        returns += gamma ** step * surrogate_reward(states)
        if step + 1 < h:
            actions = policy_mean(states)
    best = int(np.argmax(returns))  # argmax takes the first maximum
    return first[best]


def blend(a_mpc: np.ndarray, a_sac: ActionVector) -> ActionVector:
    """0.7 MPC / 0.3 SAC on the per-core parameter dims; everything else,
    including the discrete mesh deltas, stays pure SAC."""
    cont = a_sac.continuous.copy()
    idx = list(TCC_ACTION_IDX)
    cont[idx] = BLEND_MPC * a_mpc[idx] + (1.0 - BLEND_MPC) * cont[idx]
    return ActionVector(np.clip(cont, -1.0, 1.0), a_sac.discrete)
