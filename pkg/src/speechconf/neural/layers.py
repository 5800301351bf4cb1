"""From-scratch layers with analytic backward passes.

Every layer caches what its backward needs during forward and exposes its
parameters as Param objects (value mutated in place by optimizers). The
finite-difference harness in gradcheck.py pins all gradients.
"""

from __future__ import annotations

import numpy as np

from speechconf.errors import BatchTooSmallForBatchNorm, DimMismatch

GELU_C = float(np.sqrt(2.0 / np.pi))
GELU_A = 0.044715


class Param:
    __slots__ = ("name", "value", "grad")

    def __init__(self, name: str, value: np.ndarray):
        self.name = name
        self.value = value
        self.grad = np.zeros_like(value)


class Layer:
    def params(self) -> list[Param]:
        return []

    def forward(self, x: np.ndarray, train: bool, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    def backward(self, dout: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def spec(self) -> dict:
        raise NotImplementedError


class Dense(Layer):
    def __init__(self, in_dim: int, out_dim: int, rng: np.random.Generator):
        limit = np.sqrt(6.0 / (in_dim + out_dim))
        self.w = Param("w", rng.uniform(-limit, limit, size=(in_dim, out_dim)))
        self.b = Param("b", np.zeros(out_dim))
        self.in_dim, self.out_dim = in_dim, out_dim
        self._x: np.ndarray | None = None

    def params(self):
        return [self.w, self.b]

    def forward(self, x, train, rng):
        if x.shape[1] != self.in_dim:
            raise DimMismatch(f"dense expects {self.in_dim} inputs, got {x.shape[1]}")
        self._x = x
        return x @ self.w.value + self.b.value

    def backward(self, dout):
        self.w.grad = self._x.T @ dout
        self.b.grad = dout.sum(axis=0)
        return dout @ self.w.value.T

    def spec(self):
        return {"kind": "dense", "in_dim": self.in_dim, "out_dim": self.out_dim}


class BatchNorm(Layer):
    """Batch normalization, eps 1e-5, running-stat momentum 0.1.

    `frozen_stats` makes train-mode forward use the running statistics
    (still training gamma/beta); gradient checking relies on it.
    """

    def __init__(self, dim: int, momentum: float = 0.1, eps: float = 1e-5):
        self.gamma = Param("gamma", np.ones(dim))
        self.beta = Param("beta", np.zeros(dim))
        self.running_mean = np.zeros(dim)
        self.running_var = np.ones(dim)
        self.momentum = momentum
        self.eps = eps
        self.dim = dim
        self.frozen_stats = False
        self._cache = None

    def params(self):
        return [self.gamma, self.beta]

    def forward(self, x, train, rng):
        if x.shape[1] != self.dim:
            raise DimMismatch(f"batch_norm expects dim {self.dim}, got {x.shape[1]}")
        if train and not self.frozen_stats:
            if x.shape[0] < 2:
                raise BatchTooSmallForBatchNorm("train-mode batch_norm needs n >= 2")
            mu = x.mean(axis=0)
            var = x.var(axis=0)
            n = x.shape[0]
            self.running_mean = (1 - self.momentum) * self.running_mean + self.momentum * mu
            self.running_var = (
                (1 - self.momentum) * self.running_var + self.momentum * var * n / (n - 1)
            )
            inv_std = 1.0 / np.sqrt(var + self.eps)
            xhat = (x - mu) * inv_std
            self._cache = ("batch", xhat, inv_std)
        else:
            inv_std = 1.0 / np.sqrt(self.running_var + self.eps)
            xhat = (x - self.running_mean) * inv_std
            self._cache = ("frozen", xhat, inv_std)
        return xhat * self.gamma.value + self.beta.value

    def backward(self, dout):
        mode, xhat, inv_std = self._cache
        self.gamma.grad = (dout * xhat).sum(axis=0)
        self.beta.grad = dout.sum(axis=0)
        if mode == "frozen":
            return dout * self.gamma.value * inv_std
        n = dout.shape[0]
        dxhat = dout * self.gamma.value
        return (inv_std / n) * (
            n * dxhat - dxhat.sum(axis=0) - xhat * (dxhat * xhat).sum(axis=0)
        )

    def spec(self):
        return {"kind": "batch_norm", "dim": self.dim}


class Gelu(Layer):
    """GELU, tanh approximation."""

    def __init__(self):
        self._x = None

    def forward(self, x, train, rng):
        self._x = x
        u = GELU_C * (x + GELU_A * x**3)
        return 0.5 * x * (1.0 + np.tanh(u))

    def backward(self, dout):
        x = self._x
        u = GELU_C * (x + GELU_A * x**3)
        t = np.tanh(u)
        du = GELU_C * (1.0 + 3.0 * GELU_A * x**2)
        return dout * (0.5 * (1.0 + t) + 0.5 * x * (1.0 - t**2) * du)

    def spec(self):
        return {"kind": "gelu"}


class Relu(Layer):
    def __init__(self):
        self._mask = None

    def forward(self, x, train, rng):
        self._mask = x > 0
        return x * self._mask

    def backward(self, dout):
        return dout * self._mask

    def spec(self):
        return {"kind": "relu"}


class Dropout(Layer):
    def __init__(self, p: float):
        if not 0.0 <= p < 1.0:
            raise ValueError("dropout p must be in [0, 1)")
        self.p = p
        self._mask = None

    def forward(self, x, train, rng):
        if not train or self.p == 0.0:
            self._mask = None
            return x
        self._mask = (rng.random(x.shape) >= self.p) / (1.0 - self.p)
        return x * self._mask

    def backward(self, dout):
        return dout if self._mask is None else dout * self._mask

    def spec(self):
        return {"kind": "dropout", "p": self.p}


class SigmoidGate(Layer):
    """Elementwise learnable mask: out = sigmoid(g) * x, g initialized to 0
    so every gate starts half-open."""

    def __init__(self, dim: int):
        self.g = Param("g", np.zeros(dim))
        self.dim = dim
        self._x = None

    def params(self):
        return [self.g]

    def forward(self, x, train, rng):
        if x.shape[1] != self.dim:
            raise DimMismatch(f"sigmoid_gate expects dim {self.dim}, got {x.shape[1]}")
        self._x = x
        return x / (1.0 + np.exp(-self.g.value))

    def backward(self, dout):
        s = 1.0 / (1.0 + np.exp(-self.g.value))
        self.g.grad = (dout * self._x * s * (1.0 - s)).sum(axis=0)
        return dout * s

    def spec(self):
        return {"kind": "sigmoid_gate", "dim": self.dim}


class Softmax(Layer):
    def __init__(self):
        self._out = None

    def forward(self, x, train, rng):
        z = x - x.max(axis=1, keepdims=True)
        e = np.exp(z)
        self._out = e / e.sum(axis=1, keepdims=True)
        return self._out

    def backward(self, dout):
        s = self._out
        return s * (dout - (dout * s).sum(axis=1, keepdims=True))

    def spec(self):
        return {"kind": "softmax"}


def layer_from_spec(spec: dict, rng: np.random.Generator) -> Layer:
    kind = spec["kind"]
    if kind == "dense":
        return Dense(spec["in_dim"], spec["out_dim"], rng)
    if kind == "batch_norm":
        return BatchNorm(spec["dim"])
    if kind == "gelu":
        return Gelu()
    if kind == "relu":
        return Relu()
    if kind == "dropout":
        return Dropout(spec["p"])
    if kind == "sigmoid_gate":
        return SigmoidGate(spec["dim"])
    if kind == "softmax":
        return Softmax()
    raise ValueError(f"unknown layer kind {kind!r}")
