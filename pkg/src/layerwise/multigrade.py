"""Multigrade construction: residual cell averages, grades, readouts and the
explicit mixed-activation weight stack.

Each grade ``Gamma_l`` is a decoder evaluated at the continuous cell label
``Lambda_l(Psi_l(x))``; the readout ``Phi_l`` is the prefix sum of grades
``0..l``.  Level ``l`` fits the residual averages
``A_Q(f) - (constant of Phi_{l-1} on Q)`` and never revisits earlier levels.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .decoder import (
    Decoder,
    FitBudget,
    FitFailure,
    SineDecoder,
    TableDecoder,
    decoder_from_dict,
    fit_two_sine,
)
from .encoder import _check_weight_delta, block_rows, encode_levels, refined_y_form
from .geometry import PartitionConfig
from .quadrature import CellAverageEngine, ProductRegion, _reference_rule, box, integrate
from .stack import DenseLayer, Head, LayerStack, identity_tags

NET_FORMAT = "layerwise-net/1"
# Cells processed together when forming level averages.
_CELL_CHUNK = 1 << 20


@dataclass(frozen=True)
class TargetFunction:
    """A vectorized target ``(n, d) -> (n,)`` on a box (default the unit cube).

    ``regularity`` is an optional ``(alpha, lambda)`` Hoelder pair used only
    for theoretical bounds.
    """

    fn: Callable[[np.ndarray], np.ndarray]
    d: int
    regularity: tuple[float, float] | None = None
    lower: tuple[float, ...] | None = None
    upper: tuple[float, ...] | None = None
    name: str = "f"

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return np.broadcast_to(np.asarray(self.fn(x), dtype=float), (x.shape[0],)).copy()

    @property
    def domain(self) -> ProductRegion:
        lo, hi = self.bounds()
        return box(lo, hi)

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        lo = np.zeros(self.d) if self.lower is None else np.asarray(self.lower, dtype=float)
        hi = np.ones(self.d) if self.upper is None else np.asarray(self.upper, dtype=float)
        if lo.shape != (self.d,) or hi.shape != (self.d,) or np.any(hi <= lo):
            raise ValueError("degenerate or mis-sized target domain")
        return lo, hi

    def on_box(self, lower, upper) -> "TargetFunction":
        return TargetFunction(self.fn, self.d, self.regularity, tuple(map(float, lower)), tuple(map(float, upper)), self.name)

    def pulled_back(self) -> "TargetFunction":
        """The same target read on [0, 1]^d through y -> lower + (upper - lower) y."""
        lo, hi = self.bounds()
        if np.all(lo == 0.0) and np.all(hi == 1.0):
            return self
        fn = self.fn
        return TargetFunction(lambda y: fn(lo + (hi - lo) * y), self.d, None, None, None, self.name)


# -- cell averages ---------------------------------------------------------


def cell_average(f: Callable, cube: ProductRegion, engine: CellAverageEngine) -> float:
    vol = cube.volume
    if not vol > 0:
        raise ValueError("cell average over a zero-volume region")
    return integrate(f, cube, engine) / vol


def _reference_points(d: int, engine: CellAverageEngine, level: int) -> tuple[np.ndarray, np.ndarray] | None:
    if engine.scheme != "tensor":
        return None
    x, w = _reference_rule(engine.rule, engine.resolution)
    grids = np.meshgrid(*([x] * d), indexing="ij")
    wgrids = np.meshgrid(*([w] * d), indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=1)
    wts = np.prod(np.stack([g.ravel() for g in wgrids], axis=1), axis=1)
    return pts, wts


def labels_to_multi(k0: np.ndarray, d: int, n: int) -> np.ndarray:
    """Zero-based labels (k - 1) to multi-indices, first coordinate fastest."""
    out = np.empty((k0.size, d), dtype=np.int64)
    rest = k0.astype(np.int64)
    for c in range(d):
        rest, out[:, c] = np.divmod(rest, n)
    return out


def multi_to_labels(beta: np.ndarray, n: int) -> np.ndarray:
    """Multi-indices to zero-based labels (k - 1)."""
    k0 = np.zeros(beta.shape[0], dtype=np.int64)
    for c in range(beta.shape[1] - 1, -1, -1):
        k0 = k0 * n + beta[:, c]
    return k0


def level_averages(f: Callable, config: PartitionConfig, level: int, engine: CellAverageEngine) -> np.ndarray:
    """A_Q(f) for every interior cube of ``level``, in label order k = 1..N^{dl}."""
    d, N = config.d, config.N
    n = N**level
    K = n**d
    side = config.level(level).side
    ref = _reference_points(d, engine, level)
    rng = np.random.default_rng(np.random.SeedSequence([engine.seed, level]))
    per_cell = ref[0].shape[0] if ref is not None else engine.resolution
    step = max(1, _CELL_CHUNK // per_cell)
    out = np.empty(K)
    for start in range(0, K, step):
        k0 = np.arange(start, min(K, start + step))
        lower = labels_to_multi(k0, d, n) / n
        if ref is not None:
            pts, wts = ref
            sample = lower[:, None, :] + side * pts[None, :, :]
            vals = f(sample.reshape(-1, d)).reshape(k0.size, -1)
            out[k0] = vals @ wts
        else:
            sample = lower[:, None, :] + side * rng.random((k0.size, per_cell, d))
            out[k0] = f(sample.reshape(-1, d)).reshape(k0.size, -1).mean(axis=1)
    return out


def parent_labels(config: PartitionConfig, level: int) -> np.ndarray:
    """Zero-based label of the level-(l-1) cube containing each level-l cube."""
    d, N = config.d, config.N
    beta = labels_to_multi(np.arange(N ** (d * level)), d, N**level)
    return multi_to_labels(beta // N, N ** (level - 1))


def cell_label(y: np.ndarray, level: int, N: int) -> np.ndarray:
    """Continuous label Lambda_l(y) = 1 + sum_c N^{c l} y_c (c = 1..d)."""
    y = np.atleast_2d(y)
    powers = float(N) ** (level * np.arange(1, y.shape[1] + 1))
    return 1.0 + y @ powers


# -- the net ---------------------------------------------------------------


@dataclass(frozen=True)
class GradeTerm:
    level: int
    decoder: Decoder
    cell_values: np.ndarray

    def to_dict(self) -> dict:
        return {"level": self.level, "decoder": self.decoder.to_dict(), "cell_values": np.asarray(self.cell_values).tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "GradeTerm":
        return cls(int(data["level"]), decoder_from_dict(data["decoder"]), np.asarray(data["cell_values"], dtype=float))


@dataclass(frozen=True)
class DecoderMode:
    """``kind`` is "table" or "sine"; sine fits may fall back to a table."""

    kind: str = "table"
    eps: float = 1e-2
    budget: FitBudget = FitBudget()
    fallback: bool = False

    def __post_init__(self):
        if self.kind not in ("table", "sine"):
            raise ValueError(f"unknown decoder mode {self.kind!r}")
        if not self.eps > 0:
            raise ValueError("decoder eps must be positive")


@dataclass
class MultigradeNet:
    config: PartitionConfig
    grades: list[GradeTerm]
    p: float
    lower: tuple[float, ...] | None = None
    upper: tuple[float, ...] | None = None
    weight_stack: LayerStack | None = field(default=None, repr=False)

    @property
    def L(self) -> int:
        return len(self.grades) - 1

    def to_unit(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if self.lower is None:
            return x
        lo, hi = np.asarray(self.lower), np.asarray(self.upper)
        return (x - lo) / (hi - lo)

    def grade_values(self, x: np.ndarray, upto: int | None = None) -> np.ndarray:
        """Gamma_0..Gamma_upto at the rows of ``x``; shape (n, upto + 1)."""
        upto = self.L if upto is None else upto
        if not 0 <= upto <= self.L:
            raise ValueError(f"level {upto} outside [0, {self.L}]")
        u = self.to_unit(x)
        cfg = self.config
        out = np.empty((u.shape[0], upto + 1))
        out[:, 0] = self.grades[0].decoder.evaluate(np.ones(u.shape[0]))
        ys = encode_levels(u, cfg.N, cfg.delta, upto)
        for level in range(1, upto + 1):
            out[:, level] = self.grades[level].decoder.evaluate(cell_label(ys[level - 1], level, cfg.N))
        return out

    def readout(self, x: np.ndarray, level: int) -> np.ndarray:
        return self.grade_values(x, level).sum(axis=1)

    def readouts(self, x: np.ndarray) -> np.ndarray:
        """Phi_0..Phi_L as columns."""
        return np.cumsum(self.grade_values(x), axis=1)

    def cube_constants(self, level: int) -> np.ndarray:
        """Value of Phi_level on each interior cube of that level, in label order."""
        phi = np.array([float(self.grades[0].decoder.evaluate(1.0))])
        for j in range(1, level + 1):
            vals = self.grades[j].decoder.values()
            phi = phi[parent_labels(self.config, j)] + vals
        return phi

    def to_dict(self) -> dict:
        return {
            "format": NET_FORMAT,
            "config": self.config.to_dict(),
            "p": self.p,
            "lower": None if self.lower is None else list(self.lower),
            "upper": None if self.upper is None else list(self.upper),
            "grades": [g.to_dict() for g in self.grades],
            "weights": None if self.weight_stack is None else self.weight_stack.to_dict(),
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "MultigradeNet":
        if data.get("format") != NET_FORMAT:
            raise ValueError(f"unsupported net format {data.get('format')!r}")
        c = data["config"]
        config = PartitionConfig(int(c["d"]), int(c["N"]), int(c["L"]), float(c["delta"]))
        grades = [GradeTerm.from_dict(g) for g in data["grades"]]
        stack = None if data.get("weights") is None else LayerStack.from_dict(data["weights"])
        lower = None if data.get("lower") is None else tuple(data["lower"])
        upper = None if data.get("upper") is None else tuple(data["upper"])
        return cls(config, grades, float(data["p"]), lower, upper, stack)


class BuildFailure(RuntimeError):
    """A sine fit failed without fallback; ``partial`` holds the grades built so far."""

    def __init__(self, level: int, cause: FitFailure, partial: MultigradeNet):
        super().__init__(f"decoder fit failed at level {level}: {cause}")
        self.level = level
        self.cause = cause
        self.partial = partial


def _fit(values: np.ndarray, mode: DecoderMode) -> Decoder:
    if mode.kind == "table":
        return TableDecoder.from_values(values)
    try:
        return fit_two_sine(values, mode.eps, mode.budget)
    except FitFailure:
        if mode.fallback:
            return TableDecoder.from_values(values)
        raise


def build(
    f: TargetFunction,
    config: PartitionConfig,
    p: float = 2.0,
    engine: CellAverageEngine | None = None,
    mode: DecoderMode = DecoderMode(),
) -> MultigradeNet:
    """Run the residual recursion for levels 0..L and return the net."""
    if p < 1:
        raise ValueError("p must be >= 1")
    if f.d != config.d:
        raise ValueError(f"target has d={f.d}, config has d={config.d}")
    engine = engine or CellAverageEngine.for_cells(config.d)
    lower = upper = None
    if f.lower is not None or f.upper is not None:
        lo, hi = f.bounds()
        lower, upper = tuple(lo.tolist()), tuple(hi.tolist())
    g = f.pulled_back()
    grades: list[GradeTerm] = []
    phi = np.zeros(1)
    for level in range(config.L + 1):
        avg = level_averages(g, config, level, engine)
        parent = phi if level == 0 else phi[parent_labels(config, level)]
        y = avg - parent
        try:
            dec = _fit(y, mode)
        except FitFailure as exc:
            raise BuildFailure(level, exc, MultigradeNet(config, grades, p, lower, upper)) from exc
        grades.append(GradeTerm(level, dec, y))
        phi = parent + dec.values()
    return MultigradeNet(config, grades, p, lower, upper)


def transition_free_bound(f_norm: float, config: PartitionConfig) -> float:
    """M = 2^{d+2} (d + 1) N^{dL} ||f||_p, the sup bound on every grade."""
    return 2 ** (config.d + 2) * (config.d + 1) * float(config.N) ** (config.d * config.L) * f_norm


# -- explicit weights ------------------------------------------------------
#
# State channels (width 2dN + d + 2):
#   0: s1 (sin)  inner sine of the next decoder, sin(w_l * Lambda_l)
#   1: s2 (sin)  outer sine, sin(v_l * s1)
#   2: carry (relu)  B + sum of completed grades, B > sum |u_l| keeps it positive
#   3 .. d+1: unused (relu, zero)
#   d+2 + c*2N .. : encoder block for coordinate c, [x, y, ramps]
# Hidden state S_i holds y = Psi_i with level-(i+1) ramps, s1 for grade i and
# s2 for grade i-1.  Head l reads S_{l+1}: Phi_l = carry - B + u_l * s2.


def stack_width(d: int, N: int) -> int:
    return 2 * d * N + d + 2


def export_weights(net: MultigradeNet) -> LayerStack:
    decs = [g.decoder for g in net.grades]
    if not all(isinstance(dec, SineDecoder) for dec in decs):
        raise TypeError("weight export needs sine decoders at every level; table-mode nets are unsupported")
    cfg = net.config
    d, N, L, delta = cfg.d, cfg.N, cfg.L, cfg.delta
    _check_weight_delta(delta)
    n = stack_width(d, N)
    bw = 2 * N
    offs = [d + 2 + c * bw for c in range(d)]
    B = 1.0 + sum(abs(dec.u) for dec in decs)
    if net.lower is None:
        lo, hi = np.zeros(d), np.ones(d)
    else:
        lo, hi = np.asarray(net.lower), np.asarray(net.upper)
    tags = ("sin", "sin") + ("relu",) * (n - 2)
    eye = np.eye(n)

    W = np.zeros((n, d))
    b = np.zeros(n)
    b[0] = decs[0].w
    b[2] = B
    for c, off in enumerate(offs):
        scale = 1.0 / (hi[c] - lo[c])
        Wc, bc = block_rows(np.eye(d)[c] * scale, np.zeros(d), 0.0, 1 if L >= 1 else None, N, delta, -lo[c] * scale)
        W[off:off + bw], b[off:off + bw] = Wc, bc
    layers = [DenseLayer(W, b, tags)]

    for i in range(L + 1):
        W = np.zeros((n, n))
        b = np.zeros(n)
        ramps = i + 1 <= L
        y_rows = []
        for off in offs:
            y_row = refined_y_form(n, off, i + 1, N, delta) if ramps else eye[off + 1]
            y_rows.append(y_row)
            Wc, bc = block_rows(eye[off], y_row, 0.0, i + 2 if i + 2 <= L else None, N, delta)
            W[off:off + bw], b[off:off + bw] = Wc, bc
        if ramps:
            dec = decs[i + 1]
            powers = float(N) ** ((i + 1) * np.arange(1, d + 1))
            W[0] = dec.w * sum(pw * row for pw, row in zip(powers, y_rows))
            b[0] = dec.w
        W[1, 0] = decs[i].v
        W[2, 2] = 1.0
        if i >= 1:
            W[2, 1] = decs[i - 1].u
        layers.append(DenseLayer(W, b, tags))

    heads = []
    for level in range(L + 1):
        hw = np.zeros((1, n))
        hw[0, 2] = 1.0
        hw[0, 1] = decs[level].u
        heads.append(Head(f"phi_{level}", level + 1, DenseLayer(hw, np.array([-B]), identity_tags(1))))
    return LayerStack(d, layers, heads)


def stack_readouts(stack: LayerStack, x: np.ndarray) -> np.ndarray:
    """Evaluate every ``phi_l`` head; columns ordered by level."""
    out = stack.evaluate(x)
    names = sorted((h.name for h in stack.heads), key=lambda s: int(s.split("_")[1]))
    return np.stack([out[name][:, 0] for name in names], axis=1)


def count_parameters(net_or_stack: MultigradeNet | LayerStack, nonzero: bool = False) -> int:
    """Affine weight and bias entries across hidden layers and output heads."""
    stack = net_or_stack
    if isinstance(net_or_stack, MultigradeNet):
        stack = net_or_stack.weight_stack or export_weights(net_or_stack)
    return stack.parameter_count(nonzero)


def dense_parameter_count(d: int, N: int, L: int) -> int:
    """Closed form of :func:`count_parameters` for the exported layout."""
    n = stack_width(d, N)
    return n * (d + 1) + (L + 1) * (n * n + n) + (L + 1) * (n + 1)


def depth_for_accuracy(alpha: float, lambda_p: float, d: int, N: int, eps: float) -> int:
    """Smallest depth m guaranteeing (2d+1) lambda N^{-alpha m} <= eps (at least 1)."""
    if not 0 < alpha <= 1:
        raise ValueError("alpha must lie in (0, 1]")
    if not (lambda_p > 0 and eps > 0 and N >= 2):
        raise ValueError("need lambda_p > 0, eps > 0 and N >= 2")
    ratio = (2 * d + 1) * lambda_p / eps
    if ratio <= 1.0:
        return 1
    m = math.log(ratio) / (alpha * math.log(N))
    return max(1, math.ceil(m - 1e-12))
