"""Small dense feed-forward network trained with plain SGD.

ReLU on hidden layers, identity on the output. Weights are stored as
``(fan_in, fan_out)`` matrices so a batch ``X`` of shape ``(B, n_in)`` maps to
``X @ W + b``.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np

CHECKPOINT_FORMAT = "irs-mlp"
CHECKPOINT_VERSION = 1


class CheckpointError(ValueError):
    pass


@dataclass(frozen=True)
class MlpSpec:
    input_size: int
    hidden_size: int = 32
    layers: int = 2
    output_size: int = 1
    learning_rate: float = 0.1

    def __post_init__(self):
        for name in ("input_size", "hidden_size", "output_size"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.layers < 0:
            raise ValueError(f"layers must be >= 0, got {self.layers}")
        if not self.learning_rate > 0:
            raise ValueError(f"learning_rate must be > 0, got {self.learning_rate}")

    @property
    def sizes(self) -> list[int]:
        return [self.input_size] + [self.hidden_size] * self.layers + [self.output_size]


class Mlp:
    def __init__(self, spec: MlpSpec, weights: list[np.ndarray], biases: list[np.ndarray]):
        sizes = spec.sizes
        if len(weights) != len(sizes) - 1 or len(biases) != len(weights):
            raise ValueError("layer count does not match spec")
        for k, (w, b) in enumerate(zip(weights, biases)):
            if w.shape != (sizes[k], sizes[k + 1]) or b.shape != (sizes[k + 1],):
                raise ValueError(f"layer {k}: shapes {w.shape}/{b.shape} do not chain")
        self.spec = spec
        self.weights = [np.asarray(w, dtype=np.float64) for w in weights]
        self.biases = [np.asarray(b, dtype=np.float64) for b in biases]
        self.learning_rate = spec.learning_rate

    @classmethod
    def init(cls, spec: MlpSpec, seed: Union[int, np.random.Generator, None] = 0) -> "Mlp":
        rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        sizes = spec.sizes
        weights, biases = [], []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
            biases.append(np.zeros(fan_out))
        return cls(spec, weights, biases)

    def copy(self) -> "Mlp":
        return Mlp(self.spec, [w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def forward(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.spec.input_size:
            raise ValueError(f"input has {x.shape[-1]} features, network expects {self.spec.input_size}")
        h = x
        last = len(self.weights) - 1
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w + b
            if k < last:
                h = np.maximum(h, 0.0)
        return h

    __call__ = forward

    def loss_and_gradients(self, inputs, targets) -> tuple[float, list[np.ndarray], list[np.ndarray]]:
        """Loss ``mean_b sum_o (y - t)^2`` and its gradients w.r.t. weights and biases."""
        x = np.atleast_2d(np.asarray(inputs, dtype=np.float64))
        t = np.atleast_2d(np.asarray(targets, dtype=np.float64))
        if x.shape[1] != self.spec.input_size:
            raise ValueError(f"inputs have {x.shape[1]} features, network expects {self.spec.input_size}")
        if t.shape != (x.shape[0], self.spec.output_size):
            raise ValueError(f"targets shape {t.shape}, expected {(x.shape[0], self.spec.output_size)}")
        acts = [x]
        pre = []
        h = x
        last = len(self.weights) - 1
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = h @ w + b
            pre.append(z)
            h = np.maximum(z, 0.0) if k < last else z
            acts.append(h)
        n = x.shape[0]
        diff = h - t
        loss = float(np.sum(diff * diff) / n)
        delta = 2.0 * diff / n
        gw = [None] * len(self.weights)
        gb = [None] * len(self.weights)
        for k in range(last, -1, -1):
            gw[k] = acts[k].T @ delta
            gb[k] = delta.sum(axis=0)
            if k > 0:
                delta = (delta @ self.weights[k].T) * (pre[k - 1] > 0.0)
        return loss, gw, gb

    def train_batch(self, inputs, targets, learning_rate: Optional[float] = None) -> float:
        """One SGD step; returns the loss measured before the update.

        ``learning_rate`` overrides ``spec.learning_rate`` for this step only (0 is
        allowed here and leaves the weights untouched).
        """
        loss, gw, gb = self.loss_and_gradients(inputs, targets)
        lr = self.learning_rate if learning_rate is None else float(learning_rate)
        if lr < 0:
            raise ValueError(f"learning_rate must be >= 0, got {lr}")
        for w, b, dw, db in zip(self.weights, self.biases, gw, gb):
            w -= lr * dw
            b -= lr * db
        return loss

    # -- checkpoints ---------------------------------------------------------

    def to_dict(self, meta: Optional[dict] = None) -> dict:
        return {
            "format": CHECKPOINT_FORMAT,
            "version": CHECKPOINT_VERSION,
            "spec": asdict(self.spec),
            "weights": [w.tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
            "meta": meta or {},
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Mlp":
        if not isinstance(data, dict) or data.get("format") != CHECKPOINT_FORMAT:
            raise CheckpointError("not a network checkpoint")
        if data.get("version") != CHECKPOINT_VERSION:
            raise CheckpointError(f"unsupported checkpoint version {data.get('version')!r}")
        try:
            spec = MlpSpec(**data["spec"])
            weights = [np.array(w, dtype=np.float64).reshape(a, b) for w, a, b in
                       zip(data["weights"], spec.sizes[:-1], spec.sizes[1:])]
            biases = [np.array(b, dtype=np.float64) for b in data["biases"]]
            return cls(spec, weights, biases)
        except (KeyError, TypeError, ValueError) as exc:
            raise CheckpointError(f"corrupt checkpoint: {exc}") from exc

    def save(self, path: Union[str, Path], meta: Optional[dict] = None) -> None:
        Path(path).write_text(json.dumps(self.to_dict(meta)), encoding="utf-8")


def load_checkpoint(path: Union[str, Path]) -> tuple[Mlp, dict]:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    return Mlp.from_dict(data), data.get("meta", {})
