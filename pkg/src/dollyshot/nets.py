"""Dense network core: exact-backprop MLPs, Adam, and the policy heads.

Everything here is plain float64 numpy. Each network keeps its parameters
in one contiguous flat vector; the per-layer weight/bias arrays are views
into it, so an optimizer update on the flat vector is immediately visible
to the next forward pass.
"""

from __future__ import annotations

import json
import math
import os
from typing import Optional, Sequence

import numpy as np

HIDDEN_SIZES = (64, 64)
CHECKPOINT_FORMAT_VERSION = 1

_LOG_2PI = math.log(2.0 * math.pi)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x, dtype=np.float64)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def softplus(x: np.ndarray) -> np.ndarray:
    """log(1 + e^x), stable for large |x|."""
    return np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))


class Mlp:
    """Fully-connected network: tanh hidden layers, identity output.

    Parameters live in `self.params` (flat float64); layout is
    W1, b1, W2, b2, ... with weights stored row-major as (fan_in, fan_out).
    """

    def __init__(
        self,
        sizes: Sequence[int],
        rng: Optional[np.random.Generator] = None,
        out_gain: float = 1.0,
        params: Optional[np.ndarray] = None,
    ):
        self.sizes = tuple(int(s) for s in sizes)
        if len(self.sizes) < 2 or any(s < 1 for s in self.sizes):
            raise ValueError("need at least an input and an output layer")
        self.n_params = sum(
            (fan_in + 1) * fan_out
            for fan_in, fan_out in zip(self.sizes, self.sizes[1:])
        )
        if params is None:
            params = np.zeros(self.n_params, dtype=np.float64)
        if params.shape != (self.n_params,):
            raise ValueError(f"params must have shape ({self.n_params},)")
        self.params = params
        self._weights: list[np.ndarray] = []
        self._biases: list[np.ndarray] = []
        offset = 0
        for fan_in, fan_out in zip(self.sizes, self.sizes[1:]):
            self._weights.append(params[offset:offset + fan_in * fan_out].reshape(fan_in, fan_out))
            offset += fan_in * fan_out
            self._biases.append(params[offset:offset + fan_out])
            offset += fan_out
        if rng is not None:
            self.init_params(rng, out_gain)

    @property
    def in_dim(self) -> int:
        return self.sizes[0]

    @property
    def out_dim(self) -> int:
        return self.sizes[-1]

    def init_params(self, rng: np.random.Generator, out_gain: float = 1.0) -> None:
        """Scaled uniform fan-in init; `out_gain` shrinks the output layer."""
        last = len(self._weights) - 1
        for i, (w, b) in enumerate(zip(self._weights, self._biases)):
            gain = out_gain if i == last else 1.0
            bound = gain / math.sqrt(w.shape[0])
            w[...] = rng.uniform(-bound, bound, size=w.shape)
            b[...] = 0.0

    def forward(self, x: np.ndarray) -> np.ndarray:
        """Forward pass without caching; accepts (d,) or (n, d) input."""
        h = np.asarray(x, dtype=np.float64)
        if h.shape[-1] != self.in_dim:
            raise ValueError(f"expected input dim {self.in_dim}, got {h.shape[-1]}")
        last = len(self._weights) - 1
        for i, (w, b) in enumerate(zip(self._weights, self._biases)):
            h = h @ w + b
            if i < last:
                h = np.tanh(h)
        return h

    def forward_cached(self, x: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
        """Forward pass that records per-layer activations for backward()."""
        h = np.atleast_2d(np.asarray(x, dtype=np.float64))
        if h.shape[-1] != self.in_dim:
            raise ValueError(f"expected input dim {self.in_dim}, got {h.shape[-1]}")
        acts = [h]
        last = len(self._weights) - 1
        for i, (w, b) in enumerate(zip(self._weights, self._biases)):
            h = h @ w + b
            if i < last:
                h = np.tanh(h)
            acts.append(h)
        return h, acts

    def backward(
        self, cache: list[np.ndarray], output_grad: np.ndarray
    ) -> tuple[np.ndarray, np.ndarray]:
        """Exact gradients of the scalar loss whose output gradient is given.

        `cache` must come from a matching forward_cached call. Returns
        (flat parameter gradient, input gradient); the batch dimension is
        summed into the parameter gradient.
        """
        if len(cache) != len(self._weights) + 1:
            raise ValueError("cache does not match this network")
        g = np.atleast_2d(np.asarray(output_grad, dtype=np.float64))
        if g.shape != cache[-1].shape:
            raise ValueError("output_grad shape does not match cached forward output")
        grad = np.zeros_like(self.params)
        offset = self.n_params
        for i in range(len(self._weights) - 1, -1, -1):
            h_in = cache[i]
            n_b = self._biases[i].size
            n_w = self._weights[i].size
            grad[offset - n_b:offset] = g.sum(axis=0)
            offset -= n_b
            grad[offset - n_w:offset] = (h_in.T @ g).ravel()
            offset -= n_w
            g = g @ self._weights[i].T
            if i > 0:
                g = g * (1.0 - h_in**2)  # tanh derivative via cached activation
        return grad, g


class Adam:
    """Bias-corrected Adam over a flat parameter vector (in-place update)."""

    def __init__(
        self,
        n_params: int,
        lr: float,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = np.zeros(n_params, dtype=np.float64)
        self.v = np.zeros(n_params, dtype=np.float64)
        self.t = 0

    def step(self, params: np.ndarray, grad: np.ndarray) -> np.ndarray:
        if grad.shape != self.m.shape or params.shape != self.m.shape:
            raise ValueError("parameter/gradient shape mismatch")
        self.t += 1
        self.m += (1.0 - self.beta1) * (grad - self.m)
        self.v += (1.0 - self.beta2) * (grad * grad - self.v)
        m_hat = self.m / (1.0 - self.beta1**self.t)
        v_hat = self.v / (1.0 - self.beta2**self.t)
        params -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)
        return params


def tanh_log_jacobian(u: np.ndarray) -> np.ndarray:
    """log(1 - tanh(u)^2) per component, numerically stable."""
    return 2.0 * (math.log(2.0) - u - softplus(-2.0 * u))


class GaussianPolicy:
    """tanh-squashed diagonal Gaussian policy.

    The mean comes from an MLP; log-std is a free per-action vector
    appended to the same flat parameter vector. Log-densities include the
    tanh change-of-variables term, evaluated at the pre-squash sample `u`,
    so stored samples can be re-scored exactly under updated parameters.
    """

    def __init__(
        self,
        obs_dim: int,
        act_dim: int,
        hidden: Sequence[int] = HIDDEN_SIZES,
        rng: Optional[np.random.Generator] = None,
        log_std_init: float = -0.5,
    ):
        self.obs_dim = obs_dim
        self.act_dim = act_dim
        self.hidden = tuple(hidden)
        sizes = (obs_dim, *self.hidden, act_dim)
        n_mean = Mlp(sizes).n_params
        self.params = np.zeros(n_mean + act_dim, dtype=np.float64)
        self.mean_net = Mlp(sizes, params=self.params[:n_mean])
        self.log_std = self.params[n_mean:]
        self.log_std[...] = log_std_init
        if rng is not None:
            self.mean_net.init_params(rng, out_gain=0.01)

    @property
    def n_params(self) -> int:
        return self.params.size

    def sample(
        self, obs: np.ndarray, rng: np.random.Generator
    ) -> tuple[np.ndarray, np.ndarray, float]:
        """Draw one action; returns (squashed action, pre-squash u, logprob)."""
        mean = self.mean_net.forward(obs)
        std = np.exp(self.log_std)
        u = mean + std * rng.standard_normal(self.act_dim)
        z = (u - mean) / std
        logp = float(
            np.sum(-0.5 * z * z - self.log_std - 0.5 * _LOG_2PI)
            - np.sum(tanh_log_jacobian(u))
        )
        return np.tanh(u), u, logp

    def deterministic(self, obs: np.ndarray) -> np.ndarray:
        """Squashed mean action (no sampling), used for evaluation."""
        return np.tanh(self.mean_net.forward(obs))

    def logprob(
        self, obs: np.ndarray, u: np.ndarray
    ) -> tuple[np.ndarray, tuple]:
        """Log-density of pre-squash samples `u` under the current policy.

        Batched; returns (logp per row, cache for logprob_backward)."""
        u = np.atleast_2d(np.asarray(u, dtype=np.float64))
        mean, net_cache = self.mean_net.forward_cached(obs)
        std = np.exp(self.log_std)
        z = (u - mean) / std
        logp = np.sum(-0.5 * z * z - self.log_std - 0.5 * _LOG_2PI, axis=1)
        logp = logp - np.sum(tanh_log_jacobian(u), axis=1)
        return logp, (net_cache, z, std)

    def logprob_backward(self, cache: tuple, dlogp: np.ndarray) -> np.ndarray:
        """Gradient of sum(dlogp * logp) over the flat parameter vector."""
        net_cache, z, std = cache
        dlogp = np.asarray(dlogp, dtype=np.float64).reshape(-1, 1)
        # d logp / d mean = z / std ; d logp / d log_std = z^2 - 1
        mean_grad_out = dlogp * (z / std)
        net_grad, _ = self.mean_net.backward(net_cache, mean_grad_out)
        log_std_grad = np.sum(dlogp * (z * z - 1.0), axis=0)
        return np.concatenate([net_grad, log_std_grad])


class Discriminator:
    """MLP scoring (observation, action) pairs; D = sigmoid(logit) in (0, 1)."""

    def __init__(
        self,
        obs_dim: int,
        act_dim: int,
        hidden: Sequence[int] = HIDDEN_SIZES,
        rng: Optional[np.random.Generator] = None,
    ):
        self.obs_dim = obs_dim
        self.act_dim = act_dim
        self.net = Mlp((obs_dim + act_dim, *hidden, 1), rng=rng)

    @property
    def params(self) -> np.ndarray:
        return self.net.params

    def logits(self, obs: np.ndarray, act: np.ndarray) -> np.ndarray:
        x = np.concatenate(
            [np.atleast_2d(obs), np.atleast_2d(act)], axis=1
        )
        return self.net.forward(x)[:, 0]

    def prob(self, obs: np.ndarray, act: np.ndarray) -> np.ndarray:
        return _sigmoid(self.logits(obs, act))


def value_net(obs_dim: int, rng: Optional[np.random.Generator] = None) -> Mlp:
    """State-value network with the standard hidden sizes."""
    return Mlp((obs_dim, *HIDDEN_SIZES, 1), rng=rng)


# ---------------------------------------------------------------------------
# Checkpoints: a single JSON document with a versioned header. Floats are
# serialized with repr, so save -> load round-trips bit-exactly.

def save_policy_checkpoint(
    path: str,
    policy: GaussianPolicy,
    value: Optional[Mlp],
    task: str,
    meta: Optional[dict] = None,
) -> None:
    # No wall-clock stamp: identical training invocations must produce
    # byte-identical checkpoints. Run provenance lives in `meta`.
    doc = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "kind": "policy",
        "task": task,
        "obs_dim": policy.obs_dim,
        "act_dim": policy.act_dim,
        "hidden": list(policy.hidden),
        "hidden_activation": "tanh",
        "output_activation": "identity",
        "meta": meta or {},
        "log_std": policy.log_std.tolist(),
        "mean_params": policy.mean_net.params.tolist(),
        "value_params": value.params.tolist() if value is not None else None,
    }
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w") as fh:
        json.dump(doc, fh)


def load_policy_checkpoint(path: str) -> tuple[GaussianPolicy, Optional[Mlp], dict]:
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("format_version") != CHECKPOINT_FORMAT_VERSION:
        raise ValueError(
            f"unsupported checkpoint format version {doc.get('format_version')!r}"
        )
    if doc.get("kind") != "policy":
        raise ValueError(f"not a policy checkpoint: kind={doc.get('kind')!r}")
    policy = GaussianPolicy(doc["obs_dim"], doc["act_dim"], hidden=doc["hidden"])
    policy.mean_net.params[...] = doc["mean_params"]
    policy.log_std[...] = doc["log_std"]
    value = None
    if doc.get("value_params") is not None:
        value = value_net(doc["obs_dim"])
        if len(doc["value_params"]) != value.n_params:
            raise ValueError("value parameter count mismatch in checkpoint")
        value.params[...] = doc["value_params"]
    return policy, value, doc
