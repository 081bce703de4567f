"""L^p norms, the L^p modulus of continuity, layer-wise bound checks and the
oscillation inequality around cell averages."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .geometry import PartitionConfig
from .multigrade import DecoderMode, MultigradeNet, TargetFunction, build, level_averages, multi_to_labels
from .quadrature import CellAverageEngine, ProductRegion, _reference_rule, as_regions, integrate, nodes

BOUND_SCHEMA = "layerwise-bound-report/1"
MODULUS_SCHEMA = "layerwise-modulus/1"
MODULUS_HEADROOM = 1.1


class ConfigurationError(ValueError):
    pass


def lp_norm(g, region: ProductRegion | list[ProductRegion], p: float, engine: CellAverageEngine | None = None) -> float:
    """(integral over region of |g|^p)^(1/p) by the engine's quadrature."""
    if p < 1:
        raise ValueError("p must be >= 1")
    pieces = as_regions(region)
    engine = engine or CellAverageEngine.for_norms(pieces[0].dim)
    return integrate(lambda x: np.abs(g(x)) ** p, pieces, engine) ** (1.0 / p)


# -- modulus of continuity --------------------------------------------------


@dataclass(frozen=True)
class ModulusPlan:
    """Sampling plan for the sup over translations.

    Directions are the axis vectors +-e_i plus ``direction_count`` random unit
    vectors; magnitudes are t * j / magnitude_count, j = 1..magnitude_count.
    Each shifted integral uses a midpoint grid of about ``points`` nodes.
    """

    direction_count: int = 8
    magnitude_count: int = 8
    points: int = 1 << 16
    seed: int = 0

    def axis_points(self, d: int) -> int:
        return int(min(8192, max(16, math.floor(self.points ** (1.0 / d) + 1e-9))))

    def directions(self, d: int) -> np.ndarray:
        axes = np.concatenate([np.eye(d), -np.eye(d)])
        rng = np.random.default_rng(self.seed)
        extra = rng.standard_normal((self.direction_count, d))
        extra /= np.linalg.norm(extra, axis=1, keepdims=True)
        return np.concatenate([axes, extra])


@dataclass(frozen=True)
class ModulusEstimate:
    t: float
    p: float
    value: float
    direction_count: int
    magnitude_count: int
    axis_points: int
    seed: int
    is_lower_bound: bool = True
    argmax: tuple[float, ...] = ()

    def row(self) -> dict:
        return {
            "t": self.t,
            "p": self.p,
            "value": self.value,
            "direction_count": self.direction_count,
            "magnitude_count": self.magnitude_count,
            "axis_points": self.axis_points,
            "seed": self.seed,
            "is_lower_bound": self.is_lower_bound,
        }


def _shift_difference(f, h: np.ndarray, lo: np.ndarray, hi: np.ndarray, p: float, m: int) -> float:
    """||f(. + h) - f||_{L^p(E_h)} (or the sup for p = inf) on a midpoint grid."""
    a = np.where(h >= 0, lo, lo - h)
    b = np.where(h >= 0, hi - h, hi)
    if np.any(b <= a):
        return 0.0
    axes = [a[i] + (b[i] - a[i]) * (np.arange(m) + 0.5) / m for i in range(len(h))]
    grids = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=1)
    diff = np.abs(f(pts + h) - f(pts))
    if math.isinf(p):
        return float(diff.max())
    vol = float(np.prod(b - a))
    return float((diff**p).mean() * vol) ** (1.0 / p)


def estimate_modulus(f: TargetFunction, t: float, p: float, plan: ModulusPlan = ModulusPlan()) -> ModulusEstimate:
    """Sampled lower estimate of sup_{|h| <= t} ||f(. + h) - f||_{L^p(E_h)}.

    ``p = inf`` gives the classical modulus of continuity (diagnostic only).
    """
    if t < 0:
        raise ValueError("t must be nonnegative")
    if not (p >= 1 or math.isinf(p)):
        raise ValueError("p must be >= 1")
    d = f.d
    lo, hi = f.bounds()
    m = plan.axis_points(d)
    best, arg = 0.0, np.zeros(d)
    if t > 0:
        for u in plan.directions(d):
            for j in range(1, plan.magnitude_count + 1):
                h = u * (t * j / plan.magnitude_count)
                val = _shift_difference(f, h, lo, hi, p, m)
                if val > best:
                    best, arg = val, h
    return ModulusEstimate(float(t), float(p), best, plan.direction_count, plan.magnitude_count, m, plan.seed, True, tuple(arg.tolist()))


def modulus_csv(estimates: list[ModulusEstimate]) -> str:
    buf = io.StringIO()
    buf.write(f"# schema: {MODULUS_SCHEMA}\n")
    fields = list(ModulusEstimate(0, 1, 0, 0, 0, 0, 0).row())
    writer = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
    writer.writeheader()
    for est in estimates:
        writer.writerow({k: _fmt(v) for k, v in est.row().items()})
    return buf.getvalue()


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return v


# -- bound verification ----------------------------------------------------


@dataclass(frozen=True)
class Holder:
    """Hoelder class: ||f(. + h) - f||_p <= lam |h|^alpha."""

    alpha: float
    lam: float

    def __post_init__(self):
        if not (0 < self.alpha <= 1 and self.lam > 0):
            raise ValueError("need alpha in (0, 1] and lambda > 0")


@dataclass(frozen=True)
class BoundRow:
    level: int
    measured_error: float
    bound: float
    tolerance: float
    margin: float
    passed: bool
    modulus: float
    transition_error: float
    decoder_eps: float


@dataclass
class BoundReport:
    mode: str
    p: float
    d: int
    N: int
    L: int
    rows: list[BoundRow]
    tolerances: dict = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)
    moduli: list[ModulusEstimate] = field(default_factory=list, repr=False)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# schema: {BOUND_SCHEMA}\n")
        fields = list(BoundRow.__dataclass_fields__)
        writer = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
        writer.writeheader()
        for r in self.rows:
            writer.writerow({k: _fmt(v) for k, v in asdict(r).items()})
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "schema": BOUND_SCHEMA,
            "mode": self.mode,
            "p": self.p,
            "d": self.d,
            "N": self.N,
            "L": self.L,
            "passed": self.passed,
            "tolerances": self.tolerances,
            "notes": self.notes,
            "rows": [asdict(r) for r in self.rows],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def readout_errors(f: TargetFunction, net: MultigradeNet, p: float, engine: CellAverageEngine | None = None):
    """Per-level ||f - Phi_l||_p over the target's domain, and the part on Omega_l.

    Quadrature runs on the unit cube with breakpoints at every level-L
    interval end, so each interior cube and gap is integrated separately.
    """
    cfg = net.config
    engine = engine or CellAverageEngine.for_norms(cfg.d)
    lo, hi = f.bounds()
    total = np.zeros(cfg.L + 1)
    trans = np.zeros(cfg.L + 1)
    for pts, wts in nodes(cfg.breakpoint_region(cfg.L), engine):
        x = lo + (hi - lo) * pts
        err = np.abs(f(x)[:, None] - net.readouts(x)) ** p
        total += wts @ err
        for level in range(cfg.L + 1):
            _, inside = cfg.locate_indices(pts, level)
            trans[level] += wts[~inside] @ err[~inside, level]
    scale = float(np.prod(hi - lo))
    return (scale * total) ** (1.0 / p), (scale * trans) ** (1.0 / p)


def verify_bounds(
    f: TargetFunction,
    net: MultigradeNet,
    p: float,
    mode: str | Holder = "modulus",
    engine: CellAverageEngine | None = None,
    plan: ModulusPlan = ModulusPlan(),
    quad_rel: float = 1e-3,
) -> BoundReport:
    """Measured ||f - Phi_l||_p against (2d+1) omega(side N^-l) or the Hoelder rate.

    On a box Q the scale is the longest side and, in Hoelder mode, the bound
    carries the factor |Q|^(1/p) (max side)^alpha.  A row passes when
    ``measured <= bound + tolerance`` where the tolerance is the relative
    quadrature budget plus the accumulated decoder eps plus the measured
    error on the transition region.
    """
    if float(p) != float(net.p):
        raise ConfigurationError(f"net was built for p={net.p}, verification asked for p={p}")
    cfg = net.config
    d, N = cfg.d, cfg.N
    lo, hi = f.bounds()
    vol_factor = float(np.prod(hi - lo)) ** (1.0 / p)
    side = float(np.max(hi - lo))
    measured, trans = readout_errors(f, net, p, engine)
    notes = []
    rows = []
    eps_acc = 0.0
    omegas = []
    for level in range(cfg.L + 1):
        t = side * float(N) ** (-level)
        eps_acc += net.grades[level].decoder.achieved_eps
        est = estimate_modulus(f, t, p, plan)
        omega = est.value
        omegas.append(est)
        if isinstance(mode, Holder):
            bound = (2 * d + 1) * mode.lam * vol_factor * side**mode.alpha * float(N) ** (-mode.alpha * level)
        elif mode == "modulus":
            bound = (2 * d + 1) * MODULUS_HEADROOM * omega
        else:
            raise ConfigurationError(f"unknown bound mode {mode!r}")
        dec_term = eps_acc * vol_factor
        tol = quad_rel * measured[level] + dec_term + trans[level] + 1e-12
        margin = bound + tol - measured[level]
        rows.append(BoundRow(level, float(measured[level]), float(bound), float(tol), float(margin), bool(margin >= 0), float(omega), float(trans[level]), float(dec_term)))
    omega_L = omegas[-1].value
    if omega_L <= 0 or omega_L < 1e-12:
        notes.append("target is numerically constant: eta taken as max(omega/2, 1e-12)")
    mode_name = "modulus" if mode == "modulus" else f"holder(alpha={mode.alpha!r}, lambda={mode.lam!r})"
    tolerances = {
        "quadrature_relative": quad_rel,
        "modulus_headroom": MODULUS_HEADROOM,
        "eta": max(omega_L / 2.0, 1e-12),
        "engine": (engine or CellAverageEngine.for_norms(d)).describe(),
    }
    return BoundReport(mode_name, float(p), d, N, cfg.L, rows, tolerances, notes, omegas)


def box_rescale_verify(
    f: TargetFunction,
    config: PartitionConfig,
    p: float,
    mode: str | Holder = "modulus",
    engine: CellAverageEngine | None = None,
    decoder: DecoderMode = DecoderMode(),
) -> tuple[MultigradeNet, BoundReport]:
    """Build on the unit cube through the affine pullback of f's box, then verify on the box."""
    net = build(f, config, p, mode=decoder)
    return net, verify_bounds(f, net, p, mode, engine)


def direct_box_error(f: TargetFunction, net: MultigradeNet, level: int, p: float, engine: CellAverageEngine | None = None) -> float:
    """||f - Phi_level||_{L^p(Q)} by quadrature directly on the box (no pullback)."""
    lo, hi = f.bounds()
    cfg = net.config
    region = cfg.breakpoint_region(cfg.L).mapped(lo, hi)
    engine = engine or CellAverageEngine.for_norms(cfg.d)
    return lp_norm(lambda x: f(x) - net.readout(x, level), region, p, engine)


# -- oscillation around cell averages --------------------------------------


@dataclass(frozen=True)
class OscillationCheck:
    lhs: float
    rhs: float
    tolerance: float
    passed: bool


def _gauss_box(lo: np.ndarray, hi: np.ndarray, m: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = _reference_rule("gauss", m)
    axes = [lo[i] + (hi[i] - lo[i]) * x for i in range(lo.size)]
    ws = [(hi[i] - lo[i]) * w for i in range(lo.size)]
    grids = np.meshgrid(*axes, indexing="ij")
    wgrids = np.meshgrid(*ws, indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=1)
    wts = np.prod(np.stack([g.ravel() for g in wgrids], axis=1), axis=1)
    return pts, wts


def check_oscillation_inequality(
    f,
    lower,
    side: float,
    p: float,
    points: int | None = None,
    shift_points: int = 16,
    tol: float = 1e-6,
) -> OscillationCheck:
    """Compare ||f - A_Q f||_p^p with the averaged-translation bound on a cube Q.

    rhs = d^(p-1) / s * int_{-s}^{s} sum_i int_{Q cap (Q - h e_i)} |f(x + h e_i) - f(x)|^p dx dh,
    both sides by Gauss-Legendre (the h integral split at 0).
    """
    lo = np.asarray(lower, dtype=float)
    d = lo.size
    if not side > 0:
        raise ValueError("degenerate cube")
    if p < 1:
        raise ValueError("p must be >= 1")
    hi = lo + side
    m = points or {1: 64, 2: 24, 3: 12}.get(d, 8)
    pts, wts = _gauss_box(lo, hi, m)
    vals = f(pts)
    vol = side**d
    avg = float(wts @ vals) / vol
    lhs = float(wts @ np.abs(vals - avg) ** p)
    hx, hw = _reference_rule("gauss", shift_points)
    rhs = 0.0
    for sign in (-1.0, 1.0):
        for h, wh in zip(sign * side * hx, side * hw):
            for i in range(d):
                a, b = lo.copy(), hi.copy()
                if h >= 0:
                    b[i] -= h
                else:
                    a[i] -= h
                if b[i] <= a[i]:
                    continue
                q, qw = _gauss_box(a, b, m)
                e = np.zeros(d)
                e[i] = h
                rhs += wh * float(qw @ np.abs(f(q + e) - f(q)) ** p)
    rhs *= d ** (p - 1) / side
    tolerance = tol + 1e-9 * max(lhs, rhs)
    return OscillationCheck(lhs, float(rhs), float(tolerance), bool(lhs <= rhs + tolerance))


def piecewise_average_diagnostic(f, config: PartitionConfig, level: int, p: float, engine: CellAverageEngine | None = None, cell_engine: CellAverageEngine | None = None) -> float:
    """||f - chi_l||_{L^p(U_l)} for the exact-average piecewise constant chi_l on interior cubes."""
    if p < 1:
        raise ValueError("p must be >= 1")
    d = config.d
    engine = engine or CellAverageEngine.for_norms(d)
    avgs = level_averages(f, config, level, cell_engine or CellAverageEngine.for_cells(d))
    n = config.N**level
    total = 0.0
    for pts, wts in nodes(config.interior_region(level), engine):
        beta, _ = config.locate_indices(pts, level)
        chi = avgs[multi_to_labels(beta, n)]
        total += float(wts @ np.abs(f(pts) - chi) ** p)
    return total ** (1.0 / p)
