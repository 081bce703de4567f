"""Tensor-product and Monte Carlo quadrature over unions of axis-aligned boxes.

Every region handled here is a finite union of disjoint ``ProductRegion``
pieces; each piece is a Cartesian product of per-axis unions of intervals.
That shape covers single boxes, the union of interior cubes at one level,
and the slab decomposition of the transition region.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Iterable, Iterator, Sequence

import numpy as np

Interval = tuple[float, float]
Evaluator = Callable[[np.ndarray], np.ndarray]

# Points materialized at once; larger tensor grids are streamed in slabs.
_CHUNK = 1 << 21


@dataclass(frozen=True)
class ProductRegion:
    """Cartesian product of per-axis unions of disjoint closed intervals."""

    axes: tuple[tuple[Interval, ...], ...]

    @property
    def dim(self) -> int:
        return len(self.axes)

    @property
    def volume(self) -> float:
        return math.prod(sum(b - a for a, b in ax) for ax in self.axes)

    def mapped(self, lower: Sequence[float], upper: Sequence[float]) -> "ProductRegion":
        """Push the region through x -> lower + (upper - lower) * x."""
        axes = []
        for ax, lo, hi in zip(self.axes, lower, upper):
            scale = hi - lo
            axes.append(tuple((lo + scale * a, lo + scale * b) for a, b in ax))
        return ProductRegion(tuple(axes))


def box(lower: Sequence[float], upper: Sequence[float]) -> ProductRegion:
    lower = [float(a) for a in lower]
    upper = [float(b) for b in upper]
    if len(lower) != len(upper):
        raise ValueError("lower and upper corners differ in dimension")
    for a, b in zip(lower, upper):
        if not b > a:
            raise ValueError(f"degenerate box side [{a}, {b}]")
    return ProductRegion(tuple(((a, b),) for a, b in zip(lower, upper)))


def unit_cube(d: int) -> ProductRegion:
    return box([0.0] * d, [1.0] * d)


def as_regions(region: ProductRegion | Iterable[ProductRegion]) -> list[ProductRegion]:
    if isinstance(region, ProductRegion):
        return [region]
    return list(region)


@dataclass(frozen=True)
class CellAverageEngine:
    """Integration plan shared by cell averages and L^p norms.

    ``resolution`` is the minimum number of nodes per interval (tensor) or
    the number of samples per region piece (Monte Carlo).  ``axis_points``
    spreads an additional per-axis budget over the intervals of an axis in
    proportion to their length, so a single long interval is not starved.
    """

    scheme: str = "tensor"
    resolution: int = 8
    rule: str = "midpoint"
    axis_points: int = 0
    seed: int = 0

    def __post_init__(self):
        if self.scheme not in ("tensor", "monte-carlo"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.rule not in ("midpoint", "gauss"):
            raise ValueError(f"unknown rule {self.rule!r}")
        if self.resolution < 1:
            raise ValueError("resolution must be positive")

    @classmethod
    def for_cells(cls, d: int, seed: int = 0) -> "CellAverageEngine":
        """Default cell-average plan: 8 midpoints per axis per cell, MC above d=3."""
        if d <= 3:
            return cls("tensor", 8, "midpoint", 0, seed)
        return cls("monte-carlo", 4096, "midpoint", 0, seed)

    @classmethod
    def for_norms(cls, d: int, seed: int = 0) -> "CellAverageEngine":
        """Default plan for global L^p norms (about 256 nodes per axis at d <= 2)."""
        if d <= 2:
            return cls("tensor", 4, "gauss", 256, seed)
        if d == 3:
            return cls("tensor", 2, "gauss", 64, seed)
        return cls("monte-carlo", 1 << 16, "midpoint", 0, seed)

    def describe(self) -> dict:
        return {
            "scheme": self.scheme,
            "resolution": self.resolution,
            "rule": self.rule,
            "axis_points": self.axis_points,
            "seed": self.seed,
        }


@lru_cache(maxsize=64)
def _reference_rule(rule: str, m: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights on [0, 1]."""
    if rule == "midpoint":
        nodes = (np.arange(m) + 0.5) / m
        weights = np.full(m, 1.0 / m)
    else:
        x, w = np.polynomial.legendre.leggauss(m)
        nodes = 0.5 * (x + 1.0)
        weights = 0.5 * w
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def axis_rule(intervals: Sequence[Interval], engine: CellAverageEngine) -> tuple[np.ndarray, np.ndarray]:
    """Composite 1-d rule over a union of intervals."""
    total = sum(b - a for a, b in intervals)
    nodes, weights = [], []
    for a, b in intervals:
        m = engine.resolution
        if engine.axis_points and total > 0:
            m = max(m, math.ceil(engine.axis_points * (b - a) / total))
        ref_x, ref_w = _reference_rule(engine.rule, m)
        nodes.append(a + (b - a) * ref_x)
        weights.append((b - a) * ref_w)
    return np.concatenate(nodes), np.concatenate(weights)


def tensor_grid(rules: Sequence[tuple[np.ndarray, np.ndarray]]) -> Iterator[tuple[np.ndarray, np.ndarray]]:
    """Yield (points, weights) chunks of the tensor product of 1-d rules."""
    sizes = [len(x) for x, _ in rules]
    inner = math.prod(sizes[1:])
    step = max(1, _CHUNK // max(inner, 1))
    x0, w0 = rules[0]
    for start in range(0, sizes[0], step):
        parts = [(x0[start:start + step], w0[start:start + step])] + list(rules[1:])
        grids = np.meshgrid(*[x for x, _ in parts], indexing="ij")
        wgrids = np.meshgrid(*[w for _, w in parts], indexing="ij")
        pts = np.stack([g.ravel() for g in grids], axis=1)
        wts = np.prod(np.stack([g.ravel() for g in wgrids], axis=1), axis=1)
        yield pts, wts


def _mc_samples(piece: ProductRegion, n: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    cols = []
    for ax in piece.axes:
        lo = np.array([a for a, _ in ax])
        length = np.array([b - a for a, b in ax])
        which = rng.choice(len(ax), size=n, p=length / length.sum())
        cols.append(lo[which] + length[which] * rng.random(n))
    pts = np.stack(cols, axis=1)
    return pts, np.full(n, piece.volume / n)


def nodes(region: ProductRegion | Iterable[ProductRegion], engine: CellAverageEngine) -> Iterator[tuple[np.ndarray, np.ndarray]]:
    """Quadrature nodes and weights covering ``region``."""
    pieces = as_regions(region)
    rng = np.random.default_rng(engine.seed)
    for piece in pieces:
        if piece.volume <= 0:
            continue
        if engine.scheme == "tensor":
            yield from tensor_grid([axis_rule(ax, engine) for ax in piece.axes])
        else:
            yield _mc_samples(piece, engine.resolution, rng)


def integrate(fn: Evaluator, region: ProductRegion | Iterable[ProductRegion], engine: CellAverageEngine) -> float:
    total = 0.0
    for pts, wts in nodes(region, engine):
        total += float(np.dot(wts, fn(pts)))
    return total


def volume(region: ProductRegion | Iterable[ProductRegion]) -> float:
    return sum(piece.volume for piece in as_regions(region))
