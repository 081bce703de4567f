"""Target functions with analytic facts for oracles, and a sampled-grid loader.

Grid file format (whitespace separated, ``#`` starts a comment)::

    d n_1 ... n_d
    v_0 v_1 ...            # prod(n_i) values, row-major (last axis fastest)

Axis ``i`` carries ``n_i >= 2`` equally spaced nodes on [0, 1]; evaluation is
multilinear interpolation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .multigrade import TargetFunction


@dataclass(frozen=True)
class TargetSpec:
    """A target plus whatever is known about it in closed form.

    ``omega(t, p)`` is the exact L^p modulus where given, valid for
    ``t <= omega_range``; ``omega_upper(t, p)`` is a known upper bound.
    ``holder`` is an (alpha, lambda) pair valid for every p.
    """

    name: str
    d: int
    target: TargetFunction
    omega: Callable[[float, float], float] | None = None
    omega_range: float = 0.0
    omega_upper: Callable[[float, float], float] | None = None
    holder: tuple[float, float] | None = None
    params: dict = field(default_factory=dict)

    def __call__(self, x):
        return self.target(x)


def _spec(name, d, fn, holder=None, params=None, **facts) -> TargetSpec:
    target = TargetFunction(fn, d, holder, name=name)
    return TargetSpec(name, d, target, holder=holder, params=params or {}, **facts)


def _ramp_omega(t: float, p: float) -> float:
    # ||f(. + s) - f||_p = s (1 - s)^(1/p), increasing up to s = p / (p + 1).
    s = min(t, 1.0, p / (p + 1.0))
    return s * (1.0 - s) ** (1.0 / p)


def ramp(d: int = 1) -> TargetSpec:
    return _spec("ramp", d, lambda x: x[:, 0], (1.0, 1.0), omega=_ramp_omega, omega_range=math.inf)


def average(d: int = 1) -> TargetSpec:
    # |sum h_i| / d <= |h|_2 / sqrt(d)
    return _spec("average", d, lambda x: x.mean(axis=1), (1.0, 1.0 / math.sqrt(d)))


def indicator(d: int = 1) -> TargetSpec:
    return _spec(
        "indicator", d, lambda x: (x[:, 0] > 0.5).astype(float),
        omega=lambda t, p: t ** (1.0 / p), omega_range=0.5,
    )


def tent(d: int = 1, eps: float = 0.1) -> TargetSpec:
    if not 0 < eps <= 0.5:
        raise ValueError("tent width must lie in (0, 1/2]")
    return _spec(
        "tent", d, lambda x: np.maximum(1.0 - np.abs(x[:, 0] - 0.5) / eps, 0.0), (1.0, 1.0 / eps),
        params={"eps": eps},
        omega_upper=lambda t, p: (3.0 * t) ** (1.0 / p) if t <= eps else 2.0,
    )


def sine(d: int = 1, m: int = 1) -> TargetSpec:
    return _spec("sine", d, lambda x: np.sin(2.0 * math.pi * m * x[:, 0]), (1.0, 2.0 * math.pi * m), params={"m": m})


def holder(d: int = 1, alpha: float = 0.5) -> TargetSpec:
    if not 0 < alpha <= 1:
        raise ValueError("alpha must lie in (0, 1]")
    # ||a|^alpha - |b|^alpha| <= |a - b|^alpha, so lambda = 1 pointwise and in every L^p.
    return _spec("holder", d, lambda x: np.abs(x[:, 0] - 0.5) ** alpha, (alpha, 1.0), params={"alpha": alpha})


def constant(d: int = 1, c: float = 1.0) -> TargetSpec:
    return _spec(
        "constant", d, lambda x: np.full(x.shape[0], float(c)),
        params={"c": c}, omega=lambda t, p: 0.0, omega_range=math.inf,
    )


def zero(d: int = 1) -> TargetSpec:
    return _spec("zero", d, lambda x: np.zeros(x.shape[0]), omega=lambda t, p: 0.0, omega_range=math.inf)


_FACTORIES = {
    "ramp": ramp,
    "average": average,
    "indicator": indicator,
    "tent": tent,
    "sine": sine,
    "holder": holder,
    "constant": constant,
    "zero": zero,
}


def catalog(d: int = 1) -> list[TargetSpec]:
    return [factory(d) for factory in _FACTORIES.values()]


def target_names() -> list[str]:
    return list(_FACTORIES)


def get_target(spec: str, d: int = 1) -> TargetSpec:
    """Resolve ``"name"`` or ``"name:key=value,..."`` (e.g. ``tent:eps=0.2``)."""
    name, _, rest = spec.partition(":")
    if name not in _FACTORIES:
        raise KeyError(f"unknown target {name!r}; known: {', '.join(_FACTORIES)}")
    kwargs = {}
    for item in filter(None, rest.split(",")):
        key, sep, value = item.partition("=")
        if not sep:
            raise ValueError(f"bad target parameter {item!r}")
        kwargs[key.strip()] = int(value) if value.strip().lstrip("-").isdigit() else float(value)
    return _FACTORIES[name](d, **kwargs)


# -- sampled grids ---------------------------------------------------------


class GridFormatError(ValueError):
    def __init__(self, message: str, line: int, offset: int):
        super().__init__(f"line {line}, token {offset}: {message}")
        self.line = line
        self.offset = offset


def _tokens(text: str):
    for lineno, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0]
        for offset, tok in enumerate(body.split()):
            yield lineno, offset, tok


def parse_grid(text: str) -> tuple[int, tuple[int, ...], np.ndarray]:
    toks = list(_tokens(text))
    if not toks:
        raise GridFormatError("empty grid file", 1, 0)

    def as_int(i: int) -> int:
        if i >= len(toks):
            line, off = (toks[-1][0], toks[-1][1] + 1)
            raise GridFormatError("header truncated", line, off)
        line, off, tok = toks[i]
        try:
            return int(tok)
        except ValueError:
            raise GridFormatError(f"expected an integer, got {tok!r}", line, off) from None

    d = as_int(0)
    if d < 1:
        raise GridFormatError("dimension must be positive", toks[0][0], toks[0][1])
    shape = tuple(as_int(1 + i) for i in range(d))
    for i, n in enumerate(shape):
        if n < 2:
            raise GridFormatError("each axis needs at least 2 nodes", toks[1 + i][0], toks[1 + i][1])
    body = toks[1 + d:]
    count = math.prod(shape)
    if len(body) != count:
        line, off = (body[-1][0], body[-1][1]) if body else (toks[d][0], toks[d][1])
        raise GridFormatError(f"expected {count} values, found {len(body)}", line, off)
    values = np.empty(count)
    for j, (line, off, tok) in enumerate(body):
        try:
            v = float(tok)
        except ValueError:
            raise GridFormatError(f"not a number: {tok!r}", line, off) from None
        if not math.isfinite(v):
            raise GridFormatError(f"non-finite value {tok!r}", line, off)
        values[j] = v
    return d, shape, values.reshape(shape)


def grid_target(values: np.ndarray, name: str = "grid") -> TargetSpec:
    values = np.asarray(values, dtype=float)
    axes = tuple(np.linspace(0.0, 1.0, n) for n in values.shape)
    interp = RegularGridInterpolator(axes, values, method="linear")
    d = values.ndim

    def fn(x: np.ndarray) -> np.ndarray:
        return interp(np.clip(x, 0.0, 1.0))

    return TargetSpec(name, d, TargetFunction(fn, d, None, name=name))


def grid_lipschitz(values: np.ndarray) -> float:
    """Largest slope between adjacent nodes along any axis."""
    values = np.asarray(values, dtype=float)
    slopes = [np.abs(np.diff(values, axis=i)).max() * (n - 1) for i, n in enumerate(values.shape)]
    return float(max(slopes))


def load_target(path: str | Path) -> TargetSpec:
    path = Path(path)
    _, _, values = parse_grid(path.read_text())
    return grid_target(values, name=path.stem)
