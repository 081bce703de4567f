"""Multiscale partition of the unit cube into interior cubes and transition gaps.

At level ``l`` each axis is split into the closed intervals
``[j / N**l, (j + 1) / N**l - delta]`` for ``j = 0 .. N**l - 1``.  Interior
cubes are products of these intervals; whatever is left over is the
transition region.  Cells carry a multi-index ``beta`` and a scalar label
``k = 1 + sum_i N**((i - 1) * l) * beta_i`` (first coordinate fastest).
"""

from __future__ import annotations

import configparser
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .quadrature import CellAverageEngine, ProductRegion, integrate

MAX_CELLS = 2**62
DEFAULT_DELTA_FACTOR = 1e-3


class GeometryError(ValueError):
    pass


@dataclass(frozen=True)
class TransitionRegion:
    """Marker returned by :meth:`PartitionConfig.locate` for points in no interior cube."""

    level: int

    def __bool__(self) -> bool:
        return False


@dataclass(frozen=True)
class CellLabel:
    level: int
    beta: tuple[int, ...]
    k: int


@dataclass(frozen=True)
class GridLevel:
    level: int
    side: float
    cube_count: int
    N: int
    delta: float

    def left_edges(self) -> np.ndarray:
        n = self.N**self.level
        return np.arange(n) / n

    def intervals(self) -> tuple[tuple[float, float], ...]:
        n = self.N**self.level
        return tuple((j / n, (j + 1) / n - self.delta) for j in range(n))

    def gaps(self) -> tuple[tuple[float, float], ...]:
        n = self.N**self.level
        return tuple(((j + 1) / n - self.delta, (j + 1) / n) for j in range(n))


@dataclass(frozen=True)
class PartitionConfig:
    d: int
    N: int
    L: int
    delta: float = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if not (isinstance(self.d, (int, np.integer)) and self.d >= 1):
            raise GeometryError(f"d must be a positive integer, got {self.d!r}")
        if not (isinstance(self.N, (int, np.integer)) and self.N >= 2):
            raise GeometryError(f"N must be an integer >= 2, got {self.N!r}")
        if not (isinstance(self.L, (int, np.integer)) and self.L >= 0):
            raise GeometryError(f"L must be a nonnegative integer, got {self.L!r}")
        if self.N ** (self.d * self.L) > MAX_CELLS:
            raise GeometryError(f"N^(dL) = {self.N}^{self.d * self.L} exceeds 2^62 cells")
        if self.delta is None:
            object.__setattr__(self, "delta", DEFAULT_DELTA_FACTOR * float(self.N) ** (-self.L))
        delta = float(self.delta)
        object.__setattr__(self, "delta", delta)
        if not 0.0 < delta < 0.5 * float(self.N) ** (-self.L):
            raise GeometryError(f"delta must lie in (0, 1/(2 N^L)) = (0, {0.5 * self.N ** -self.L!r}), got {delta!r}")

    def with_delta(self, delta: float) -> "PartitionConfig":
        return PartitionConfig(self.d, self.N, self.L, delta)

    def level(self, level: int) -> GridLevel:
        self._check_level(level)
        return GridLevel(
            level=level,
            side=float(self.N) ** (-level) - self.delta,
            cube_count=self.N ** (self.d * level),
            N=self.N,
            delta=self.delta,
        )

    def _check_level(self, level: int) -> None:
        if not 0 <= level <= self.L:
            raise GeometryError(f"level {level} outside [0, {self.L}]")

    # -- labels -----------------------------------------------------------

    def label_to_index(self, beta: Sequence[int], level: int) -> int:
        self._check_level(level)
        if len(beta) != self.d:
            raise GeometryError(f"multi-index {tuple(beta)} has wrong length for d={self.d}")
        n = self.N**level
        k = 1
        for i, b in enumerate(beta):
            b = int(b)
            if not 0 <= b < n:
                raise GeometryError(f"multi-index component {b} outside [0, {n - 1}]")
            k += n**i * b
        return k

    def index_to_label(self, k: int, level: int) -> tuple[int, ...]:
        self._check_level(level)
        k = int(k)
        count = self.N ** (self.d * level)
        if not 1 <= k <= count:
            raise GeometryError(f"label {k} outside [1, {count}]")
        n = self.N**level
        rest = k - 1
        beta = []
        for _ in range(self.d):
            rest, b = divmod(rest, n)
            beta.append(b)
        return tuple(beta)

    # -- point location ---------------------------------------------------

    def locate_indices(self, x: np.ndarray, level: int) -> tuple[np.ndarray, np.ndarray]:
        """Vectorized location: returns (beta array (n, d), inside mask (n,))."""
        self._check_level(level)
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[1] != self.d:
            raise GeometryError(f"points must have {self.d} coordinates")
        if np.any(x < 0.0) or np.any(x > 1.0) or not np.all(np.isfinite(x)):
            raise GeometryError("point outside [0, 1]^d")
        n = self.N**level
        j = np.clip(np.floor(x * n).astype(np.int64), 0, n - 1)
        # Re-check against the exact interval endpoints j / n.
        j = np.where(x < j / n, j - 1, j)
        j = np.where((j + 1 < n) & (x >= (j + 1) / n), j + 1, j)
        inside = np.all(x <= (j + 1) / n - self.delta, axis=1)
        return j, inside

    def locate(self, x: Sequence[float], level: int) -> CellLabel | TransitionRegion:
        beta, inside = self.locate_indices(np.asarray(x, dtype=float)[None, :], level)
        if not inside[0]:
            return TransitionRegion(level)
        b = tuple(int(v) for v in beta[0])
        return CellLabel(level, b, self.label_to_index(b, level))

    # -- measures and regions ---------------------------------------------

    def transition_mass(self, level: int) -> float:
        self._check_level(level)
        return 1.0 - (1.0 - float(self.N) ** level * self.delta) ** self.d

    def interior_region(self, level: int) -> ProductRegion:
        ivs = self.level(level).intervals()
        return ProductRegion(tuple(ivs for _ in range(self.d)))

    def transition_regions(self, level: int) -> list[ProductRegion]:
        """Disjoint slab pieces whose union is the transition region."""
        grid = self.level(level)
        inner, gaps = grid.intervals(), grid.gaps()
        full = tuple(sorted(inner + gaps))
        pieces = []
        for i in range(self.d):
            axes = [inner] * i + [gaps] + [full] * (self.d - i - 1)
            pieces.append(ProductRegion(tuple(axes)))
        return pieces

    def breakpoint_region(self, level: int) -> ProductRegion:
        """All of [0, 1]^d, with axis breakpoints at the level's interval ends."""
        grid = self.level(level)
        full = tuple(sorted(grid.intervals() + grid.gaps()))
        return ProductRegion(tuple(full for _ in range(self.d)))

    # -- serialization ----------------------------------------------------

    def to_dict(self) -> dict:
        return {"d": self.d, "N": self.N, "L": self.L, "delta": self.delta}

    def dumps(self) -> str:
        parser = configparser.ConfigParser()
        parser.optionxform = str
        parser["partition"] = {"d": str(self.d), "N": str(self.N), "L": str(self.L), "delta": repr(self.delta)}
        buf = io.StringIO()
        parser.write(buf)
        return buf.getvalue()

    @classmethod
    def loads(cls, text: str) -> "PartitionConfig":
        parser = configparser.ConfigParser()
        parser.optionxform = str
        parser.read_string(text)
        if "partition" not in parser:
            raise GeometryError("missing [partition] section")
        sec = parser["partition"]
        missing = [key for key in ("d", "N", "L") if key not in sec]
        if missing:
            raise GeometryError(f"missing keys: {', '.join(missing)}")
        delta = float(sec["delta"]) if "delta" in sec else None
        return cls(int(sec["d"]), int(sec["N"]), int(sec["L"]), delta)


# -- delta selection ------------------------------------------------------


@dataclass(frozen=True)
class DeltaChoice:
    delta: float
    margin: float
    trials: int
    lhs: tuple[float, ...]


class DeltaSelectionError(RuntimeError):
    def __init__(self, smallest_delta: float, margin: float, trials: int):
        super().__init__(f"no admissible delta down to {smallest_delta:.3e} (residual margin {margin:.3e})")
        self.smallest_delta = smallest_delta
        self.margin = margin
        self.trials = trials


def lp_mass(fn: Callable[[np.ndarray], np.ndarray], regions, p: float, engine: CellAverageEngine) -> float:
    return integrate(lambda x: np.abs(fn(x)) ** p, regions, engine) ** (1.0 / p)


def transition_budget(f, config: PartitionConfig, p: float, engine: CellAverageEngine, f_norm: float | None = None) -> list[float]:
    """Per-level value of ||f||_{L^p(gap)} + (L + 1) M |gap|^{1/p}."""
    d, N, L = config.d, config.N, config.L
    if f_norm is None:
        f_norm = lp_mass(f, config.breakpoint_region(0), p, engine)
    M = 2 ** (d + 2) * (d + 1) * float(N) ** (d * L) * f_norm
    out = []
    for level in range(L + 1):
        gap = lp_mass(f, config.transition_regions(level), p, engine)
        out.append(gap + (L + 1) * M * config.transition_mass(level) ** (1.0 / p))
    return out


def choose_delta(
    f,
    d: int,
    N: int,
    L: int,
    p: float,
    eta: float,
    engine: CellAverageEngine | None = None,
    floor: float = 1e-14,
) -> DeltaChoice:
    """Largest delta in 1/(4 N^L) * 10^-j meeting the transition-mass budget eta."""
    if not eta > 0:
        raise ValueError("eta must be strictly positive")
    if p < 1:
        raise ValueError("p must be >= 1")
    engine = engine or CellAverageEngine.for_norms(d)
    delta = 0.25 * float(N) ** (-L)
    f_norm = None
    trials = 0
    worst = math.inf
    last = delta
    while delta >= floor:
        trials += 1
        config = PartitionConfig(d, N, L, delta)
        if f_norm is None:
            f_norm = lp_mass(f, config.breakpoint_region(0), p, engine)
        lhs = transition_budget(f, config, p, engine, f_norm)
        worst = eta - max(lhs)
        last = delta
        if worst >= 0:
            return DeltaChoice(delta, worst, trials, tuple(lhs))
        delta /= 10.0
    raise DeltaSelectionError(last, worst, trials)
