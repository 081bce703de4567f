"""Continuous cell localization: the step proxy, the two-variable refinement
map and their one-hidden-layer ReLU realizations.

The functional forms here are the reference semantics; the weight stacks
are realizations whose agreement with them is checked by the test suite.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import PartitionConfig
from .stack import DenseLayer, Head, LayerStack, identity_tags

# Slopes 1/delta above 1e12 lose the 1e-9 agreement between the two forms.
MIN_WEIGHT_DELTA = 1e-12


def step_proxy(z: np.ndarray | float, N: int, delta: float) -> np.ndarray | float:
    """Continuous surrogate of floor on [0, N - 1].

    Equal to ``j`` on ``[j, j + 1 - delta]``, rises linearly with slope
    ``1 / delta`` on ``[j + 1 - delta, j + 1]``, constant outside ``[0, N - 1]``.
    """
    z = np.clip(np.asarray(z, dtype=float), 0.0, N - 1)
    j = np.floor(z)
    frac = z - j
    out = np.where(frac <= 1.0 - delta, j, j + (frac - (1.0 - delta)) / delta)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class StepProxy:
    N: int
    delta: float

    def __call__(self, z):
        return step_proxy(z, self.N, self.delta)

    @property
    def piece_count(self) -> int:
        return 2 * self.N - 1

    def ramp_form(self, z):
        """The same function written as a sum of 2(N - 1) ReLU units."""
        z = np.asarray(z, dtype=float)
        total = np.zeros_like(z)
        for m in range(1, self.N):
            total += np.maximum(z - (m - self.delta), 0.0) - np.maximum(z - m, 0.0)
        return total / self.delta


@dataclass(frozen=True)
class EncoderState:
    x: float
    y: float


def refine(x: np.ndarray, y: np.ndarray, level: int, N: int, delta: float) -> np.ndarray:
    """Second component of the level map: y + N^-l h(N^l (x - y))."""
    scale = float(N) ** level
    return y + step_proxy(scale * (x - y), N, delta) / scale


def h_ell_apply(state: EncoderState, level: int, N: int, delta: float, mode: str = "functional") -> EncoderState:
    if mode == "functional":
        return EncoderState(state.x, float(refine(state.x, state.y, level, N, delta)))
    if mode != "weights":
        raise ValueError(f"unknown mode {mode!r}")
    if state.x < 0 or state.y < 0:
        raise ValueError("weights mode is only valid on the nonnegative quadrant")
    block = h_ell_block(level, N, delta)
    out = block.evaluate(np.array([[state.x, state.y]]))["h"][0]
    return EncoderState(float(out[0]), float(out[1]))


def encode_levels(x: np.ndarray, N: int, delta: float, upto: int) -> list[np.ndarray]:
    """Psi_1 .. Psi_upto at the rows of ``x`` (each entry shaped like x)."""
    x = np.asarray(x, dtype=float)
    y = np.zeros_like(x)
    out = []
    for level in range(1, upto + 1):
        y = refine(x, y, level, N, delta)
        out.append(y)
    return out


def encode(x, level: int, config: PartitionConfig) -> np.ndarray:
    """Left-corner code Psi_l(x); equals beta / N^l on the interior cube Q_{l, beta}."""
    if not 1 <= level <= config.L:
        raise ValueError(f"encode needs 1 <= level <= {config.L}")
    return encode_levels(x, config.N, config.delta, level)[-1]


# -- ReLU realization ------------------------------------------------------
#
# Per coordinate the hidden block holds 2N channels:
#   [x, y, r_1^+, r_1^-, ..., r_{N-1}^+, r_{N-1}^-]
# with r_m^+ = relu(z - (m - delta)), r_m^- = relu(z - m), z = N^l (x - y).
# The refined y is the affine read-out y + N^-l / delta * sum(r^+ - r^-).


def block_width(N: int) -> int:
    return 2 * N


def refined_y_form(src_dim: int, offset: int, level: int, N: int, delta: float) -> np.ndarray:
    """Row over a hidden state giving the refined y of the block at ``offset``."""
    row = np.zeros(src_dim)
    row[offset + 1] = 1.0
    c = float(N) ** (-level) / delta
    for m in range(N - 1):
        row[offset + 2 + 2 * m] = c
        row[offset + 3 + 2 * m] = -c
    return row


def block_rows(
    x_row: np.ndarray,
    y_row: np.ndarray,
    y_const: float,
    level: int | None,
    N: int,
    delta: float,
    x_const: float = 0.0,
):
    """Affine rows (2N, src) and bias producing a block for the next level.

    ``x_row`` and ``y_row`` (plus constants) express x and the current y over
    the source state.
    ``level`` is the level whose ramps are formed; ``None`` leaves them zero.
    """
    src = x_row.shape[0]
    W = np.zeros((2 * N, src))
    b = np.zeros(2 * N)
    W[0] = x_row
    b[0] = x_const
    W[1] = y_row
    b[1] = y_const
    if level is not None:
        scale = float(N) ** level
        z_row = scale * (x_row - y_row)
        z_const = scale * (x_const - y_const)
        for m in range(1, N):
            W[2 * m] = z_row
            b[2 * m] = z_const - (m - delta)
            W[2 * m + 1] = z_row
            b[2 * m + 1] = z_const - m
    return W, b


def _check_weight_delta(delta: float) -> None:
    if delta < MIN_WEIGHT_DELTA:
        raise ValueError(f"delta {delta!r} below {MIN_WEIGHT_DELTA}: ReLU slopes would exceed 1e12")


def h_ell_block(level: int, N: int, delta: float) -> LayerStack:
    """One hidden ReLU layer of width 2N realizing (x, y) -> h_l(x, y) on [0, inf)^2."""
    _check_weight_delta(delta)
    W, b = block_rows(np.array([1.0, 0.0]), np.array([0.0, 1.0]), 0.0, level, N, delta)
    hidden = DenseLayer(W, b, ("relu",) * (2 * N))
    out_w = np.zeros((2, 2 * N))
    out_w[0, 0] = 1.0
    out_w[1] = refined_y_form(2 * N, 0, level, N, delta)
    head = DenseLayer(out_w, np.zeros(2), identity_tags(2))
    return LayerStack(2, [hidden], [Head("h", 0, head)])


def build_encoder_weights(config: PartitionConfig) -> LayerStack:
    """ReLU stack with L hidden layers; head ``psi_l`` reproduces Psi_l on [0, 1]^d."""
    d, N, delta = config.d, config.N, config.delta
    _check_weight_delta(delta)
    bw = block_width(N)
    width = d * bw
    layers: list[DenseLayer] = []
    heads: list[Head] = []
    for level in range(1, config.L + 1):
        src = d if level == 1 else width
        W = np.zeros((width, src))
        b = np.zeros(width)
        for c in range(d):
            if level == 1:
                x_row = np.eye(d)[c]
                y_row = np.zeros(d)
            else:
                x_row = np.eye(width)[c * bw]
                y_row = refined_y_form(width, c * bw, level - 1, N, delta)
            Wc, bc = block_rows(x_row, y_row, 0.0, level, N, delta)
            W[c * bw:(c + 1) * bw] = Wc
            b[c * bw:(c + 1) * bw] = bc
        layers.append(DenseLayer(W, b, ("relu",) * width))
        head_w = np.stack([refined_y_form(width, c * bw, level, N, delta) for c in range(d)])
        heads.append(Head(f"psi_{level}", level - 1, DenseLayer(head_w, np.zeros(d), identity_tags(d))))
    return LayerStack(d, layers, heads)
