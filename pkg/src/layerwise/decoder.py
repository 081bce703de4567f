"""Cell-value decoders: the two-sine map k -> u sin(v sin(k w)) and a table.

Fitting the two-sine map is a simultaneous inhomogeneous Diophantine
problem: with ``xi_k = arcsin(y_k / u)`` we need an integer ``n`` such that
``n sin(k w) / 2pi`` is within ``eps / (2 pi u)`` of ``xi_k / 2pi`` modulo 1
for every ``k``.  The search samples ``w``, enumerates every ``n`` in the
budget that satisfies one coordinate (via a Dirichlet denominator, so the
cost is about ``sqrt(n_max)`` per ``w`` rather than ``n_max``), checks the
survivors against all coordinates and finally polishes ``(v, w)`` by
Gauss-Newton.  Success is certified by direct re-evaluation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * math.pi


class FitFailure(RuntimeError):
    """Search budget exhausted; ``best`` holds the best decoder found."""

    def __init__(self, best: "SineDecoder", eps: float):
        super().__init__(f"two-sine fit reached {best.achieved_eps:.3e}, target {eps:.3e}")
        self.best = best
        self.eps = eps

    @property
    def achieved_eps(self) -> float:
        return self.best.achieved_eps


@dataclass(frozen=True)
class SineDecoder:
    u: float
    v: float
    w: float
    achieved_eps: float
    K: int

    def evaluate(self, k) -> np.ndarray:
        k = np.asarray(k, dtype=float)
        return self.u * np.sin(self.v * np.sin(k * self.w))

    def values(self) -> np.ndarray:
        return self.evaluate(np.arange(1, self.K + 1))

    def to_dict(self) -> dict:
        return {"kind": "sine", "u": self.u, "v": self.v, "w": self.w, "achieved_eps": self.achieved_eps, "K": self.K}


@dataclass(frozen=True)
class TableDecoder:
    values_: tuple[float, ...]

    @classmethod
    def from_values(cls, values) -> "TableDecoder":
        return cls(tuple(float(v) for v in np.asarray(values, dtype=float).ravel()))

    @property
    def K(self) -> int:
        return len(self.values_)

    @property
    def achieved_eps(self) -> float:
        return 0.0

    @property
    def u(self) -> float:
        return max((abs(v) for v in self.values_), default=0.0)

    def values(self) -> np.ndarray:
        return np.array(self.values_)

    def evaluate(self, k) -> np.ndarray:
        """Exact at integer labels; linear interpolation between them elsewhere.

        Labels within a relative 1e-9 of an integer are snapped to it, so the
        rounding left by the encoder does not leak into interior cubes.
        """
        table = np.array(self.values_)
        k = np.clip(np.asarray(k, dtype=float), 1.0, self.K)
        r = np.rint(k)
        k = np.where(np.abs(k - r) <= 1e-9 * r, r, k)
        lo = np.floor(k)
        frac = k - lo
        i = lo.astype(np.int64) - 1
        j = np.minimum(i + 1, self.K - 1)
        return np.where(frac == 0.0, table[i], (1.0 - frac) * table[i] + frac * table[j])

    def to_dict(self) -> dict:
        return {"kind": "table", "values": list(self.values_)}


Decoder = SineDecoder | TableDecoder


def decoder_from_dict(data: dict) -> Decoder:
    if data["kind"] == "sine":
        return SineDecoder(float(data["u"]), float(data["v"]), float(data["w"]), float(data["achieved_eps"]), int(data["K"]))
    if data["kind"] == "table":
        return TableDecoder.from_values(data["values"])
    raise ValueError(f"unknown decoder kind {data['kind']!r}")


def decode(dec: Decoder, k: int) -> float:
    if not 1 <= int(k) <= dec.K or int(k) != k:
        raise IndexError(f"label {k} outside [1, {dec.K}]")
    return float(dec.evaluate(int(k)))


# -- Kronecker search ------------------------------------------------------


@dataclass(frozen=True)
class FitBudget:
    n_max: int = 10**7
    w_candidates: int = 256
    seed: int = 0
    small_scan: int = 1000
    refine: bool = True
    filter_factor: float = 2.0
    prune_factor: float = 3.0


def _dist(t: np.ndarray) -> np.ndarray:
    return np.abs(t - np.rint(t))


def _near_nonneg(alpha: float, beta: float, eta: float, M: int) -> np.ndarray:
    """All n in [0, M] with ||n alpha - beta|| < eta (|| || = distance to Z)."""
    alpha = alpha - math.floor(alpha)
    Q = max(1, math.isqrt(M) + 1)
    qs = np.arange(1, Q + 1)
    prods = qs * alpha
    q = int(qs[np.argmin(_dist(prods))])
    e = q * alpha - round(q * alpha)
    R = min(q, M + 1)
    r = np.arange(R)
    J = (M - r) // q
    c = r * alpha - beta
    c = c - np.floor(c)
    end = c + J * e
    lo = np.minimum(c, end)
    hi = np.maximum(c, end)
    m_lo = np.ceil(lo - eta).astype(np.int64) - 1
    m_hi = np.floor(hi + eta).astype(np.int64) + 1
    counts = np.maximum(m_hi - m_lo + 1, 0)
    if counts.sum() == 0:
        return np.empty(0, dtype=np.int64)
    rr = np.repeat(r, counts)
    starts = np.repeat(m_lo, counts)
    offs = np.arange(counts.sum()) - np.repeat(np.cumsum(counts) - counts, counts)
    mm = starts + offs
    cc = c[rr]
    JJ = J[rr]
    if e == 0.0:
        ok = np.abs(cc - mm) < eta
        j_lo = np.zeros_like(JJ)
        j_hi = np.where(ok, JJ, -1)
    else:
        a = (mm - eta - cc) / e
        b = (mm + eta - cc) / e
        lo_j = np.clip(np.minimum(a, b), -1.0, JJ + 1.0)
        hi_j = np.clip(np.maximum(a, b), -1.0, JJ + 1.0)
        # The m range and the j range both get one step of slack against
        # rounding at their ends; the exact test below removes extras.
        j_lo = np.ceil(lo_j).astype(np.int64) - 1
        j_hi = np.floor(hi_j).astype(np.int64) + 1
        j_lo = np.maximum(j_lo, 0)
        j_hi = np.minimum(j_hi, JJ)
    span = np.maximum(j_hi - j_lo + 1, 0)
    if span.sum() == 0:
        return np.empty(0, dtype=np.int64)
    base = np.repeat(rr + q * j_lo, span)
    step = np.arange(span.sum()) - np.repeat(np.cumsum(span) - span, span)
    n = np.unique(base + q * step)
    return n[_dist(n * alpha - beta) < eta]


def near_solutions(alpha: float, beta: float, eta: float, n_max: int) -> np.ndarray:
    """Sorted integers n in [-n_max, n_max] with ||n alpha - beta|| < eta."""
    # Enumerate with a slightly wider window, then decide membership with the
    # unreduced alpha so rounding matches a direct evaluation.
    wide = eta * (1.0 + 1e-9) + 1e-15
    pos = _near_nonneg(alpha, beta, wide, n_max)
    neg = _near_nonneg(-alpha, beta, wide, n_max)
    n = np.unique(np.concatenate([-neg[neg > 0], pos]))
    return n[_dist(n * alpha - beta) < eta]


def _argument_error(v: float, w: float, xi: np.ndarray, ks: np.ndarray) -> np.ndarray:
    t = (v * np.sin(ks * w) - xi) / TWO_PI
    return TWO_PI * _dist(t)


def _polish(v: float, w: float, xi: np.ndarray, ks: np.ndarray, iters: int = 8) -> tuple[float, float]:
    best = (v, w)
    best_err = _argument_error(v, w, xi, ks).max()
    r = np.rint((v * np.sin(ks * w) - xi) / TWO_PI)
    target = xi + TWO_PI * r
    for _ in range(iters):
        s = np.sin(ks * w)
        resid = v * s - target
        jac = np.stack([s, v * ks * np.cos(ks * w)], axis=1)
        step, *_ = np.linalg.lstsq(jac, -resid, rcond=None)
        v, w = v + step[0], w + step[1]
        err = _argument_error(v, w, xi, ks).max()
        if err < best_err:
            best, best_err = (v, w), err
    return best


def _screen(cands: np.ndarray, alpha: np.ndarray, beta: np.ndarray, limit: float):
    """Drop candidates whose distance on any coordinate exceeds ``limit``."""
    worst = np.zeros(cands.size)
    for a, b in zip(alpha, beta):
        dk = _dist(cands * a - b)
        keep = dk <= limit
        cands, worst = cands[keep], np.maximum(worst[keep], dk[keep])
        if cands.size == 0:
            break
    return cands, worst


def fit_two_sine(y, eps: float, budget: FitBudget = FitBudget()) -> SineDecoder:
    """Fit u sin(v sin(k w)) to y_1..y_K within ``eps``; raises :class:`FitFailure`."""
    y = np.asarray(y, dtype=float).ravel()
    K = y.size
    if K < 1:
        raise ValueError("need at least one value")
    if not eps > 0:
        raise ValueError("eps must be positive")
    u = float(np.max(np.abs(y)))
    if u == 0.0:
        return SineDecoder(0.0, 0.0, 0.0, 0.0, K)
    ks = np.arange(1, K + 1, dtype=float)
    xi = np.arcsin(np.clip(y / u, -1.0, 1.0))
    beta = xi / TWO_PI
    tol = eps / u
    eta = tol / TWO_PI
    rng = np.random.default_rng(budget.seed)
    ws = rng.uniform(0.0, TWO_PI, size=budget.w_candidates)
    small = np.arange(-budget.small_scan, budget.small_scan + 1)
    best: SineDecoder | None = None

    def certify(v: float, w: float) -> SineDecoder:
        dec = SineDecoder(u, float(v), float(w), 0.0, K)
        err = float(np.max(np.abs(dec.evaluate(ks) - y)))
        return SineDecoder(u, float(v), float(w), err, K)

    # Raw distance of the best candidate so far; later candidates that cannot
    # beat it (or the filter width) are pruned coordinate by coordinate.
    best_raw = math.inf
    for w in ws:
        s = np.sin(ks * w)
        if np.any(np.abs(s) < 1e-6):
            continue
        alpha = s / TWO_PI
        filt = min(0.5, budget.filter_factor * eta)
        far = near_solutions(alpha[0], beta[0], filt, budget.n_max)
        for cands in (small, far):
            cands, worst = _screen(cands, alpha, beta, max(filt, budget.prune_factor * best_raw))
            order = np.argsort(worst, kind="stable")[:4]
            for idx in order:
                v = float(cands[idx])
                best_raw = min(best_raw, float(worst[idx]))
                trial = certify(v, w)
                if budget.refine:
                    pv, pw = _polish(v, float(w), xi, ks)
                    polished = certify(pv, pw)
                    if polished.achieved_eps < trial.achieved_eps:
                        trial = polished
                if best is None or trial.achieved_eps < best.achieved_eps:
                    best = trial
                if trial.achieved_eps < eps:
                    return trial
    if best is None:
        best = certify(0.0, 0.0)
    raise FitFailure(best, eps)


@dataclass(frozen=True)
class ConditioningReport:
    v_abs: float
    outer_argument: float
    argument_ulp: float
    output_sensitivity: float
    flagged: bool

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def decoder_conditioning_report(dec: SineDecoder, threshold: float = 1e-8) -> ConditioningReport:
    """Magnitude of the outer-sine argument and the float error it implies.

    ``flagged`` is raised when the relative precision of the outer argument,
    ``max_k |v sin(k w)| * machine_eps``, exceeds ``threshold``.
    """
    if dec.u == 0.0 or dec.K == 0:
        return ConditioningReport(abs(dec.v), 0.0, 0.0, 0.0, False)
    ks = np.arange(1, dec.K + 1)
    arg = float(np.max(np.abs(dec.v * np.sin(ks * dec.w))))
    ulp = float(np.spacing(arg))
    precision = arg * np.finfo(float).eps
    return ConditioningReport(abs(dec.v), arg, ulp, dec.u * ulp, bool(precision > threshold))
