"""Node-conditioned PPA surrogate: a shared MLP trunk over
(state, action, process-node one-hot) with power/performance/area heads,
weighted-MSE training against the analytical model, and a rolling-residual
acceptance gate used to pre-filter candidates cheaply.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .neural import Adam, Mlp
from .procnode import NODE_NMS
from .rlenv import ACTION_DIM_CONT, SUBSET_DIM

N_NODES = len(NODE_NMS)
HEADS = ("power", "perf", "area")
DEFAULT_HEAD_WEIGHTS = (1.0, 1.0, 1.0)
TAU_SUR = 0.05   # residual-variance gate threshold on the normalized scale
SUR_LR = 3e-4
RESIDUAL_WINDOW = 32


def node_onehot(node_nm: int) -> np.ndarray:
    v = np.zeros(N_NODES)
    v[NODE_NMS.index(node_nm)] = 1.0
    return v


class SurrogateModel:
    def __init__(self, rng: np.random.Generator,
                 state_dim: int = SUBSET_DIM, action_dim: int = ACTION_DIM_CONT,
                 hidden: int = 128,
                 head_weights: tuple[float, float, float] = DEFAULT_HEAD_WEIGHTS,
                 tau: float = TAU_SUR):
        in_dim = state_dim + action_dim + N_NODES
        self.net = Mlp([in_dim, hidden, hidden, len(HEADS)], rng)
        self.opt = Adam(lr=SUR_LR)
        self.head_weights = np.asarray(head_weights, dtype=float)
        self.tau = tau
        # rolling residual variance per node, for the retrospective gate
        self.residuals: dict[int, deque] = {nm: deque(maxlen=RESIDUAL_WINDOW)
                                            for nm in NODE_NMS}

    def _input(self, s: np.ndarray, a: np.ndarray, node_nm) -> np.ndarray:
        s2, a2 = np.atleast_2d(s), np.atleast_2d(a)
        if np.isscalar(node_nm):
            onehot = np.repeat(node_onehot(int(node_nm))[None, :], s2.shape[0], axis=0)
        else:
            onehot = np.stack([node_onehot(int(n)) for n in node_nm])
        return np.concatenate([s2, a2, onehot], axis=1)

    def predict(self, s: np.ndarray, a: np.ndarray, node_nm) -> np.ndarray:
        """(power, perf, area) on the training scale; (3,) for single inputs."""
        out = self.net.forward(self._input(s, a, node_nm))
        return out[0] if np.asarray(s).ndim == 1 else out

    def train_step(self, s: np.ndarray, a: np.ndarray, node_nm,
                   targets: np.ndarray) -> float:
        """Weighted MSE over the three heads: sum_q w_q * mean (m_q - m̂_q)^2."""
        x = self._input(s, a, node_nm)
        cache = {}
        pred = self.net.forward(x, cache=cache)
        err = pred - np.atleast_2d(targets)
        w = self.head_weights
        loss = float(np.sum(w * np.mean(err ** 2, axis=0)))
        upstream = 2.0 * w * err / err.shape[0]
        grads, _ = self.net.backward(cache, upstream)
        self.opt.step(self.net.params, grads)
        return loss


def sur_uncertainty(pred: np.ndarray, truth: np.ndarray) -> float:
    """Residual variance across the three heads: (1/3) * sum (m - m̂)^2."""
    diff = np.asarray(pred, dtype=float) - np.asarray(truth, dtype=float)
    return float(np.mean(diff ** 2))


def accept(sigma_sq: float, tau: float = TAU_SUR) -> bool:
    """Strict threshold: a residual exactly at tau is rejected."""
    return sigma_sq < tau


def observe_residual(model: SurrogateModel, node_nm: int, sigma_sq: float) -> None:
    model.residuals[node_nm].append(sigma_sq)


def gate_open(model: SurrogateModel, node_nm: int) -> bool:
    """The pre-filter trusts the surrogate for a node only while its recent
    verified residuals stay under tau; an empty history keeps the gate shut
    so nothing is ever skipped before evidence accumulates."""
    hist = model.residuals[node_nm]
    if not hist:
        return False
    return accept(sum(hist) / len(hist), model.tau)
