"""Policy and value networks: 2x64 tanh MLPs with manual backprop.

Gradients are hand-derived (no autodiff dependency) so they can be
verified against finite differences to tight tolerances. All math is
float64 numpy.

The on-disk container (one MLP per file, shared by policies and the
pose-validity predicate hook):

    magic    8 bytes  b"CSPOLICY"
    version  u32      1
    n_dims   u32      number of layer sizes (input, hidden..., output)
    dims     u32[n]
    has_norm u32      0 or 1
    log_std  u32      0 or 1 (Gaussian head present)
    payload  f64[]    per layer: W row-major (in x out), then b;
                      then log_std if present;
                      then normalizer count, mean[in], m2[in] if present

All integers little-endian.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"CSPOLICY"
FORMAT_VERSION = 1


class PolicyFormatError(Exception):
    pass


class ObsNormalizer:
    """Running mean/variance via exact pairwise (Chan) merging.

    After any sequence of update() calls, mean and variance equal the
    single-pass statistics of the concatenated data up to float roundoff.
    """

    def __init__(self, dim: int):
        self.dim = dim
        self.count = 0.0
        self.mean = np.zeros(dim)
        self.m2 = np.zeros(dim)

    def update(self, batch: np.ndarray) -> None:
        batch = np.asarray(batch, dtype=np.float64).reshape(-1, self.dim)
        n = batch.shape[0]
        if n == 0:
            return
        b_mean = batch.mean(axis=0)
        b_m2 = ((batch - b_mean) ** 2).sum(axis=0)
        if self.count == 0.0:
            self.count = float(n)
            self.mean = b_mean
            self.m2 = b_m2
            return
        delta = b_mean - self.mean
        total = self.count + n
        self.mean = self.mean + delta * (n / total)
        self.m2 = self.m2 + b_m2 + delta ** 2 * (self.count * n / total)
        self.count = total

    @property
    def var(self) -> np.ndarray:
        if self.count < 2:
            return np.ones(self.dim)
        return self.m2 / self.count

    def normalize(self, obs: np.ndarray) -> np.ndarray:
        if self.count < 2:
            return np.asarray(obs, dtype=np.float64)
        std = np.sqrt(self.var + 1e-8)
        return np.clip((np.asarray(obs, dtype=np.float64) - self.mean) / std,
                       -10.0, 10.0)


class Mlp:
    """Fully-connected tanh network; linear output layer."""

    def __init__(self, dims: list[int], rng=None, init_scale: float = 1.0):
        self.dims = list(dims)
        self.W: list[np.ndarray] = []
        self.b: list[np.ndarray] = []
        for i in range(len(dims) - 1):
            fan_in = dims[i]
            if rng is None:
                w = np.zeros((dims[i], dims[i + 1]))
            else:
                scale = init_scale * np.sqrt(2.0 / fan_in)
                w = np.array([[rng.normal(0.0, scale) for _ in range(dims[i + 1])]
                              for _ in range(dims[i])])
            self.W.append(w)
            self.b.append(np.zeros(dims[i + 1]))
        self.log_std: np.ndarray | None = None
        self.normalizer: ObsNormalizer | None = None

    @property
    def input_dim(self) -> int:
        return self.dims[0]

    @property
    def output_dim(self) -> int:
        return self.dims[-1]

    def forward(self, x, cache: dict | None = None) -> np.ndarray:
        """x: (batch, in) or (in,). Hidden layers tanh, output linear."""
        h = np.asarray(x, dtype=np.float64)
        squeeze = h.ndim == 1
        if squeeze:
            h = h[None, :]
        acts = [h]
        n_layers = len(self.W)
        for i in range(n_layers):
            z = h @ self.W[i] + self.b[i]
            h = np.tanh(z) if i < n_layers - 1 else z
            acts.append(h)
        if cache is not None:
            cache["acts"] = acts
        return h[0] if squeeze else h

    def backward(self, cache: dict, dy: np.ndarray):
        """Given d(loss)/d(output), return (dW list, db list, dx)."""
        acts = cache["acts"]
        n_layers = len(self.W)
        dW = [None] * n_layers
        db = [None] * n_layers
        grad = np.asarray(dy, dtype=np.float64)
        if grad.ndim == 1:
            grad = grad[None, :]
        for i in range(n_layers - 1, -1, -1):
            # output layer is linear; hidden activations are tanh
            if i < n_layers - 1:
                grad = grad * (1.0 - acts[i + 1] ** 2)
            dW[i] = acts[i].T @ grad
            db[i] = grad.sum(axis=0)
            grad = grad @ self.W[i].T
        return dW, db, grad

    # -- flat parameter views (optimizer and gradient checking) -------------

    def parameters(self) -> list[np.ndarray]:
        params = []
        for w, b in zip(self.W, self.b):
            params.append(w)
            params.append(b)
        if self.log_std is not None:
            params.append(self.log_std)
        return params

    def flat_parameters(self) -> np.ndarray:
        return np.concatenate([p.ravel() for p in self.parameters()])

    def set_flat_parameters(self, flat: np.ndarray) -> None:
        i = 0
        for p in self.parameters():
            p[...] = flat[i:i + p.size].reshape(p.shape)
            i += p.size
        if i != flat.size:
            raise ValueError("flat parameter size mismatch")

    # -- container io --------------------------------------------------------

    def save(self, path) -> None:
        path = Path(path)
        parts = [MAGIC, struct.pack("<II", FORMAT_VERSION, len(self.dims))]
        parts.append(struct.pack(f"<{len(self.dims)}I", *self.dims))
        parts.append(struct.pack("<II", int(self.normalizer is not None),
                                 int(self.log_std is not None)))
        payload = []
        for w, b in zip(self.W, self.b):
            payload.append(w.ravel())
            payload.append(b.ravel())
        if self.log_std is not None:
            payload.append(self.log_std.ravel())
        if self.normalizer is not None:
            payload.append(np.array([self.normalizer.count]))
            payload.append(self.normalizer.mean.ravel())
            payload.append(self.normalizer.m2.ravel())
        data = np.concatenate(payload) if payload else np.zeros(0)
        parts.append(data.astype("<f8").tobytes())
        path.write_bytes(b"".join(parts))

    @staticmethod
    def load(path) -> "Mlp":
        raw = Path(path).read_bytes()
        if raw[:8] != MAGIC:
            raise PolicyFormatError(f"{path}: bad magic bytes")
        version, n_dims = struct.unpack_from("<II", raw, 8)
        if version != FORMAT_VERSION:
            raise PolicyFormatError(f"{path}: unsupported version {version}")
        dims = list(struct.unpack_from(f"<{n_dims}I", raw, 16))
        off = 16 + 4 * n_dims
        has_norm, has_std = struct.unpack_from("<II", raw, off)
        off += 8
        data = np.frombuffer(raw, dtype="<f8", offset=off)
        net = Mlp(dims)
        i = 0
        for k in range(len(dims) - 1):
            size = dims[k] * dims[k + 1]
            net.W[k] = data[i:i + size].reshape(dims[k], dims[k + 1]).copy()
            i += size
            net.b[k] = data[i:i + dims[k + 1]].copy()
            i += dims[k + 1]
        if has_std:
            net.log_std = data[i:i + dims[-1]].copy()
            i += dims[-1]
        if has_norm:
            norm = ObsNormalizer(dims[0])
            norm.count = float(data[i])
            i += 1
            norm.mean = data[i:i + dims[0]].copy()
            i += dims[0]
            norm.m2 = data[i:i + dims[0]].copy()
            i += dims[0]
            net.normalizer = norm
        if i != data.size:
            raise PolicyFormatError(f"{path}: trailing payload ({data.size - i} floats)")
        return net


LOG_2PI = np.log(2.0 * np.pi)


class GaussianPolicy:
    """Diagonal-Gaussian policy: 2x64 tanh trunk for the mean, global log-std."""

    def __init__(self, obs_dim: int, action_dim: int, rng=None,
                 hidden: tuple = (64, 64), init_log_std: float = -0.7):
        self.net = Mlp([obs_dim] + list(hidden) + [action_dim], rng=rng)
        if rng is not None:
            # small final layer for near-zero initial actions
            self.net.W[-1] *= 0.01
        self.net.log_std = np.full(action_dim, float(init_log_std))
        self.net.normalizer = ObsNormalizer(obs_dim)

    @property
    def obs_dim(self) -> int:
        return self.net.input_dim

    @property
    def action_dim(self) -> int:
        return self.net.output_dim

    def act(self, obs, rng, deterministic: bool = False):
        """Sample an action; returns (action, log_prob)."""
        x = self.net.normalizer.normalize(obs)
        mean = self.net.forward(x)
        if deterministic:
            return mean, self.log_prob_single(mean, mean)
        std = np.exp(self.net.log_std)
        noise = np.array([rng.normal() for _ in range(self.action_dim)])
        action = mean + std * noise
        return action, self.log_prob_single(action, mean)

    def log_prob_single(self, action, mean) -> float:
        std = np.exp(self.net.log_std)
        z = (np.asarray(action) - mean) / std
        return float(-0.5 * np.sum(z ** 2) - np.sum(self.net.log_std)
                     - 0.5 * LOG_2PI * self.action_dim)

    def log_probs(self, obs_n: np.ndarray, actions: np.ndarray,
                  cache: dict | None = None) -> np.ndarray:
        """Batch log-probabilities; obs_n must already be normalized."""
        mean = self.net.forward(obs_n, cache=cache)
        std = np.exp(self.net.log_std)
        z = (actions - mean) / std
        if cache is not None:
            cache["z"] = z
            cache["std"] = std
        return (-0.5 * (z ** 2).sum(axis=1) - self.net.log_std.sum()
                - 0.5 * LOG_2PI * self.action_dim)

    def log_prob_grads(self, cache: dict, dlogp: np.ndarray):
        """Backprop d(loss)/d(logp_i) into parameter gradients.

        Returns (dW, db, dlog_std) matching net.parameters() order.
        """
        z = cache["z"]
        std = cache["std"]
        # dlogp/dmean = z / std ; dlogp/dlog_std = z^2 - 1
        dmean = (z / std) * dlogp[:, None]
        dW, db, _ = self.net.backward(cache, dmean)
        dlog_std = ((z ** 2 - 1.0) * dlogp[:, None]).sum(axis=0)
        return dW, db, dlog_std

    def entropy(self) -> float:
        return float(np.sum(self.net.log_std) +
                     0.5 * self.action_dim * (1.0 + LOG_2PI))

    def save(self, path) -> None:
        self.net.save(path)

    @staticmethod
    def load(path) -> "GaussianPolicy":
        net = Mlp.load(path)
        if net.log_std is None:
            raise PolicyFormatError(f"{path}: no Gaussian head in container")
        pol = GaussianPolicy.__new__(GaussianPolicy)
        pol.net = net
        if net.normalizer is None:
            net.normalizer = ObsNormalizer(net.input_dim)
        return pol


class ValueNet:
    """State-value estimator, same trunk shape as the policy."""

    def __init__(self, obs_dim: int, rng=None, hidden: tuple = (64, 64)):
        self.net = Mlp([obs_dim] + list(hidden) + [1], rng=rng)

    def values(self, obs_n: np.ndarray, cache: dict | None = None) -> np.ndarray:
        return self.net.forward(obs_n, cache=cache)[:, 0]

    def value_grads(self, cache: dict, dv: np.ndarray):
        dW, db, _ = self.net.backward(cache, dv[:, None])
        return dW, db


class Adam:
    """Adam over a list of parameter arrays (paired with gradient lists)."""

    def __init__(self, params: list[np.ndarray], lr: float = 3e-4,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, grads: list[np.ndarray]) -> None:
        self.t += 1
        b1t = 1.0 - self.beta1 ** self.t
        b2t = 1.0 - self.beta2 ** self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g ** 2
            p -= self.lr * (m / b1t) / (np.sqrt(v / b2t) + self.eps)
