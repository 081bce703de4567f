"""Explicit affine + activation layer stacks and their JSON weight format.

JSON layout (``format = "layerwise-stack/1"``)::

    {
      "format": "layerwise-stack/1",
      "input_dim": d,
      "layers": [{"rows", "cols", "weights" (row-major), "bias", "activations"}],
      "heads":  [{"name", "source", "rows", "cols", "weights", "bias", "activations"}]
    }

``activations`` holds one tag per output channel: ``"sin"``, ``"relu"`` or
``"identity"``.  A head reads the post-activation state of hidden layer
``source`` (0-based) through its own affine map.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

FORMAT = "layerwise-stack/1"
_ACTIVATIONS = ("sin", "relu", "identity")


@dataclass
class DenseLayer:
    weight: np.ndarray
    bias: np.ndarray
    activations: tuple[str, ...]

    def __post_init__(self):
        self.weight = np.asarray(self.weight, dtype=float)
        self.bias = np.asarray(self.bias, dtype=float)
        self.activations = tuple(self.activations)
        rows = self.weight.shape[0]
        if self.bias.shape != (rows,) or len(self.activations) != rows:
            raise ValueError("weight, bias and activation tags disagree on output size")
        bad = set(self.activations) - set(_ACTIVATIONS)
        if bad:
            raise ValueError(f"unknown activation tags {sorted(bad)}")

    @property
    def rows(self) -> int:
        return self.weight.shape[0]

    @property
    def cols(self) -> int:
        return self.weight.shape[1]

    def __call__(self, x: np.ndarray) -> np.ndarray:
        z = x @ self.weight.T + self.bias
        out = np.empty_like(z)
        tags = np.array(self.activations)
        for tag in set(self.activations):
            cols = tags == tag
            if tag == "sin":
                out[:, cols] = np.sin(z[:, cols])
            elif tag == "relu":
                out[:, cols] = np.maximum(z[:, cols], 0.0)
            else:
                out[:, cols] = z[:, cols]
        return out

    def parameter_count(self, nonzero: bool = False) -> int:
        if nonzero:
            return int(np.count_nonzero(self.weight) + np.count_nonzero(self.bias))
        return self.weight.size + self.bias.size

    def to_dict(self) -> dict:
        return {
            "rows": self.rows,
            "cols": self.cols,
            "weights": self.weight.ravel().tolist(),
            "bias": self.bias.tolist(),
            "activations": list(self.activations),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "DenseLayer":
        w = np.asarray(data["weights"], dtype=float).reshape(data["rows"], data["cols"])
        return cls(w, np.asarray(data["bias"], dtype=float), tuple(data["activations"]))


@dataclass
class Head:
    name: str
    source: int
    layer: DenseLayer


@dataclass
class LayerStack:
    input_dim: int
    layers: list[DenseLayer] = field(default_factory=list)
    heads: list[Head] = field(default_factory=list)

    @property
    def width(self) -> int:
        return max((layer.rows for layer in self.layers), default=0)

    @property
    def widths(self) -> list[int]:
        return [layer.rows for layer in self.layers]

    def hidden_states(self, x: np.ndarray) -> list[np.ndarray]:
        state = np.atleast_2d(np.asarray(x, dtype=float))
        if state.shape[1] != self.input_dim:
            raise ValueError(f"expected inputs with {self.input_dim} columns")
        states = []
        for layer in self.layers:
            state = layer(state)
            states.append(state)
        return states

    def evaluate(self, x: np.ndarray) -> dict[str, np.ndarray]:
        """Run every head; returns ``{head name: (n, out_dim) array}``."""
        states = self.hidden_states(x)
        return {h.name: h.layer(states[h.source]) for h in self.heads}

    def parameter_count(self, nonzero: bool = False) -> int:
        total = sum(layer.parameter_count(nonzero) for layer in self.layers)
        return total + sum(h.layer.parameter_count(nonzero) for h in self.heads)

    def to_dict(self) -> dict:
        return {
            "format": FORMAT,
            "input_dim": self.input_dim,
            "layers": [layer.to_dict() for layer in self.layers],
            "heads": [{"name": h.name, "source": h.source, **h.layer.to_dict()} for h in self.heads],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict) -> "LayerStack":
        if data.get("format") != FORMAT:
            raise ValueError(f"unsupported stack format {data.get('format')!r}")
        layers = [DenseLayer.from_dict(item) for item in data["layers"]]
        heads = [Head(item["name"], int(item["source"]), DenseLayer.from_dict(item)) for item in data["heads"]]
        return cls(int(data["input_dim"]), layers, heads)


def identity_tags(n: int) -> tuple[str, ...]:
    return ("identity",) * n

