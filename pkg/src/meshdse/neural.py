"""Minimal differentiable building blocks on numpy: dense MLPs with exact
GELU, tanh-squashed Gaussian and categorical heads, MoE gating, and Adam.

Gradients are hand-derived and verified against central finite differences
in the test suite.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from scipy.special import erf  # exact GELU; scipy ships with numpy here

LOG_STD_MIN = -20.0
LOG_STD_MAX = 2.0
_SQRT2 = math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


def gelu(x: np.ndarray) -> np.ndarray:
    return 0.5 * x * (1.0 + erf(x / _SQRT2))


def gelu_grad(x: np.ndarray) -> np.ndarray:
    phi = _INV_SQRT_2PI * np.exp(-0.5 * x * x)
    return 0.5 * (1.0 + erf(x / _SQRT2)) + x * phi


class Mlp:
    """Dense MLP with GELU on hidden layers and a linear output layer.

    Parameters live in `params` as W0, b0, W1, b1, ...  `backward` returns
    both parameter gradients and the input gradient.
    """

    def __init__(self, dims: list[int], rng: np.random.Generator,
                 hidden_activation: str = "gelu"):
        if len(dims) < 2:
            raise ValueError("need at least input and output dims")
        self.dims = list(dims)
        self.hidden_activation = hidden_activation
        self.params: dict[str, np.ndarray] = {}
        for i, (fan_in, fan_out) in enumerate(zip(dims, dims[1:])):
            bound = 1.0 / math.sqrt(fan_in)
            self.params[f"W{i}"] = rng.uniform(-bound, bound, size=(fan_out, fan_in))
            self.params[f"b{i}"] = rng.uniform(-bound, bound, size=fan_out)

    @property
    def n_layers(self) -> int:
        return len(self.dims) - 1

    def forward(self, x: np.ndarray, cache: dict | None = None) -> np.ndarray:
        """x: (batch, in) or (in,).  Linear output on the last layer."""
        squeeze = x.ndim == 1
        h = np.atleast_2d(x).astype(float)
        if cache is not None:
            cache["acts"] = [h]
            cache["pre"] = []
        for i in range(self.n_layers):
            z = h @ self.params[f"W{i}"].T + self.params[f"b{i}"]
            if i < self.n_layers - 1:
                h = gelu(z)
            else:
                h = z
            if cache is not None:
                cache["pre"].append(z)
                cache["acts"].append(h)
        return h[0] if squeeze else h

    def backward(self, cache: dict, upstream: np.ndarray
                 ) -> tuple[dict[str, np.ndarray], np.ndarray]:
        """Backprop `upstream` (batch, out) through a cached forward pass.

        Returns (parameter gradients, gradient w.r.t. the input).
        """
        grads = {}
        delta = np.atleast_2d(upstream).astype(float)
        for i in reversed(range(self.n_layers)):
            if i < self.n_layers - 1:
                delta = delta * gelu_grad(cache["pre"][i])
            a_prev = cache["acts"][i]
            grads[f"W{i}"] = delta.T @ a_prev
            grads[f"b{i}"] = delta.sum(axis=0)
            delta = delta @ self.params[f"W{i}"]
        return grads, delta

    def copy_from(self, other: "Mlp") -> None:
        for k, v in other.params.items():
            self.params[k] = v.copy()

    def clone(self) -> "Mlp":
        out = Mlp.__new__(Mlp)
        out.dims = list(self.dims)
        out.hidden_activation = self.hidden_activation
        out.params = {k: v.copy() for k, v in self.params.items()}
        return out


# --- stochastic heads --------------------------------------------------------

def gaussian_tanh_sample(means: np.ndarray, log_stds: np.ndarray,
                         noise: np.ndarray, eps: float = 1e-6
                         ) -> tuple[np.ndarray, np.ndarray]:
    """Reparameterized tanh-squashed Gaussian sample and its log-density.

    log_stds are clamped to [-20, 2] before use.  The log-prob includes the
    tanh change-of-variables correction.  Accepts (dim,) or (batch, dim).
    """
    log_stds = np.clip(log_stds, LOG_STD_MIN, LOG_STD_MAX)
    stds = np.exp(log_stds)
    u = means + stds * noise
    a = np.tanh(u)
    log_gauss = -0.5 * noise ** 2 - log_stds - 0.5 * math.log(2 * math.pi)
    log_prob = (log_gauss - np.log(1.0 - a ** 2 + eps)).sum(axis=-1)
    return a, log_prob


def gaussian_tanh_log_prob(action: np.ndarray, means: np.ndarray,
                           log_stds: np.ndarray, eps: float = 1e-6) -> np.ndarray:
    """Density of an already-squashed action under the tanh Gaussian."""
    log_stds = np.clip(log_stds, LOG_STD_MIN, LOG_STD_MAX)
    a = np.clip(action, -1 + eps, 1 - eps)
    u = np.arctanh(a)
    z = (u - means) / np.exp(log_stds)
    log_gauss = -0.5 * z ** 2 - log_stds - 0.5 * math.log(2 * math.pi)
    return (log_gauss - np.log(1.0 - a ** 2 + eps)).sum(axis=-1)


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def categorical_sample(logits: np.ndarray, u: float) -> tuple[int, float]:
    """Inverse-CDF categorical draw from 5 logits; returns (index, log_prob)."""
    p = softmax(np.asarray(logits, dtype=float))
    cdf = np.cumsum(p)
    idx = int(np.searchsorted(cdf, u * cdf[-1], side="right"))
    idx = min(idx, len(p) - 1)
    return idx, float(np.log(p[idx] + 1e-30))


# --- mixture-of-experts gating ------------------------------------------------

def moe_gate(gate_params: np.ndarray, state: np.ndarray) -> np.ndarray:
    """Softmax routing weights g_k = exp(u_k . s) / sum_j exp(u_j . s)."""
    return softmax(gate_params @ state)


def moe_balance_loss(batch_gates: np.ndarray, lambda_lb: float = 0.01) -> float:
    """Load-balance regularizer lambda * K * sum(mean_gate_k^2); minimized
    at uniform routing where it equals lambda."""
    g_bar = np.atleast_2d(batch_gates).mean(axis=0)
    k = g_bar.shape[0]
    return float(lambda_lb * k * (g_bar ** 2).sum())


# --- optimizer ----------------------------------------------------------------

@dataclass
class Adam:
    lr: float = 3e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        b1t = 1.0 - self.beta1 ** self.t
        b2t = 1.0 - self.beta2 ** self.t
        for k, g in grads.items():
            if k not in self.m:
                self.m[k] = np.zeros_like(params[k])
                self.v[k] = np.zeros_like(params[k])
            self.m[k] = self.beta1 * self.m[k] + (1 - self.beta1) * g
            self.v[k] = self.beta2 * self.v[k] + (1 - self.beta2) * g * g
            m_hat = self.m[k] / b1t
            v_hat = self.v[k] / b2t
            params[k] -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


# --- checkpointing -------------------------------------------------------------

CHECKPOINT_VERSION = 1


def save_params(path: str | Path, named: dict[str, dict[str, np.ndarray]]) -> None:
    """JSON checkpoint of named parameter groups with shape headers."""
    blob = {"version": CHECKPOINT_VERSION, "groups": {}}
    for group, params in named.items():
        blob["groups"][group] = {
            k: {"shape": list(v.shape), "data": v.ravel().tolist()}
            for k, v in params.items()
        }
    Path(path).write_text(json.dumps(blob))


def load_params(path: str | Path) -> dict[str, dict[str, np.ndarray]]:
    blob = json.loads(Path(path).read_text())
    if blob.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {blob.get('version')}")
    out = {}
    for group, params in blob["groups"].items():
        out[group] = {
            k: np.asarray(spec["data"], dtype=float).reshape(spec["shape"])
            for k, spec in params.items()
        }
    return out
