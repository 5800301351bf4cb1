"""Sequential MLP container with seeded initialization and train/eval modes."""

from __future__ import annotations

import numpy as np

from speechconf.errors import DimMismatch
from speechconf.neural.layers import BatchNorm, Layer, Param, layer_from_spec


class MlpModel:
    """Ordered layers + one RNG that owns all stochastic decisions.

    Construction from the same specs and seed is bit-reproducible; eval-mode
    forward is deterministic (running stats, no dropout).
    """

    def __init__(self, layer_specs: list[dict], seed: int = 0):
        self.layer_specs = [dict(s) for s in layer_specs]
        self.seed = seed
        self.rng = np.random.default_rng(seed)
        self.layers: list[Layer] = [layer_from_spec(s, self.rng) for s in self.layer_specs]
        self.mode = "train"

    # -- modes -------------------------------------------------------------

    def train(self) -> "MlpModel":
        self.mode = "train"
        return self

    def eval(self) -> "MlpModel":
        self.mode = "eval"
        return self

    def freeze_stats(self, frozen: bool = True) -> "MlpModel":
        for layer in self.layers:
            if isinstance(layer, BatchNorm):
                layer.frozen_stats = frozen
        return self

    # -- passes ------------------------------------------------------------

    @property
    def in_dim(self) -> int | None:
        for s in self.layer_specs:
            if s["kind"] == "dense":
                return s["in_dim"]
            if s["kind"] in ("batch_norm", "sigmoid_gate"):
                return s["dim"]
        return None

    def forward(self, x: np.ndarray, train: bool | None = None) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2:
            raise DimMismatch("forward expects a (batch, dim) matrix")
        want = self.in_dim
        if want is not None and x.shape[1] != want:
            raise DimMismatch(f"model expects input dim {want}, got {x.shape[1]}")
        train = self.mode == "train" if train is None else train
        for layer in self.layers:
            x = layer.forward(x, train, self.rng)
        return x

    def backward(self, dout: np.ndarray) -> np.ndarray:
        for layer in reversed(self.layers):
            dout = layer.backward(dout)
        return dout

    # -- parameters ----------------------------------------------------------

    def params(self) -> list[tuple[str, Param]]:
        out = []
        for i, layer in enumerate(self.layers):
            for p in layer.params():
                out.append((f"{i}.{p.name}", p))
        return out

    def get_state(self) -> dict[str, np.ndarray]:
        state = {k: p.value.copy() for k, p in self.params()}
        for i, layer in enumerate(self.layers):
            if isinstance(layer, BatchNorm):
                state[f"{i}.running_mean"] = layer.running_mean.copy()
                state[f"{i}.running_var"] = layer.running_var.copy()
        return state

    def set_state(self, state: dict[str, np.ndarray]) -> None:
        for k, p in self.params():
            p.value[...] = state[k]
        for i, layer in enumerate(self.layers):
            if isinstance(layer, BatchNorm):
                layer.running_mean[...] = state[f"{i}.running_mean"]
                layer.running_var[...] = state[f"{i}.running_var"]

    def n_params(self) -> int:
        return sum(p.value.size for _, p in self.params())


def mlp_specs(in_dim: int, hidden: list[int], n_classes: int, activation: str = "relu",
              dropout: float = 0.0) -> list[dict]:
    """Plain MLP: dense(+activation) per hidden layer, optional dropout, head."""
    specs: list[dict] = []
    prev = in_dim
    for h in hidden:
        specs.append({"kind": "dense", "in_dim": prev, "out_dim": h})
        specs.append({"kind": activation})
        prev = h
    if dropout > 0:
        specs.append({"kind": "dropout", "p": dropout})
    specs.append({"kind": "dense", "in_dim": prev, "out_dim": n_classes})
    return specs


def gated_feature_specs(in_dim: int, hidden: tuple[int, int], n_classes: int,
                        dropout: float = 0.3) -> list[dict]:
    """Feature stream: sigmoid gate, then two dense+BN+GELU blocks, dropout, head."""
    h1, h2 = hidden
    return [
        {"kind": "sigmoid_gate", "dim": in_dim},
        {"kind": "dense", "in_dim": in_dim, "out_dim": h1},
        {"kind": "batch_norm", "dim": h1},
        {"kind": "gelu"},
        {"kind": "dense", "in_dim": h1, "out_dim": h2},
        {"kind": "batch_norm", "dim": h2},
        {"kind": "gelu"},
        {"kind": "dropout", "p": dropout},
        {"kind": "dense", "in_dim": h2, "out_dim": n_classes},
    ]
