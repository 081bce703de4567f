"""Acceptance criteria, each at its stated tolerance.

Every test records one PASS/FAIL line, printed in the terminal summary.
"""

import math
import time

import numpy as np

from layerwise.analysis import Holder, ModulusPlan, box_rescale_verify, check_oscillation_inequality, estimate_modulus, verify_bounds
from layerwise.decoder import FitBudget, FitFailure, SineDecoder, fit_two_sine
from layerwise.encoder import build_encoder_weights, encode
from layerwise.geometry import PartitionConfig
from layerwise.multigrade import (
    GradeTerm,
    MultigradeNet,
    TargetFunction,
    build,
    count_parameters,
    depth_for_accuracy,
    export_weights,
    stack_width,
)
from layerwise.targets import get_target


def _level_lines(rows, bound):
    return all(r.measured_error <= bound(r.level) for r in rows)


def test_lipschitz_rate_one_d(criterion_log):
    start = time.perf_counter()
    f = get_target("ramp", 1).target
    net = build(f, PartitionConfig(1, 2, 6), p=2.0)
    report = verify_bounds(f, net, 2.0, Holder(1.0, 1.0), quad_rel=1e-3)
    elapsed = time.perf_counter() - start
    ok = _level_lines(report.rows, lambda l: 3 * 2.0**-l) and report.passed and elapsed < 10
    worst = max(r.measured_error * 2.0**r.level / 3 for r in report.rows)
    criterion_log(1, ok, f"ramp d=1 L=6 p=2: max error/bound {worst:.3f}, {elapsed:.2f}s")
    assert ok


def test_lipschitz_rate_two_d(criterion_log):
    start = time.perf_counter()
    f = get_target("average", 2).target
    net = build(f, PartitionConfig(2, 2, 4), p=1.0)
    report = verify_bounds(f, net, 1.0, Holder(1.0, 1.0))
    elapsed = time.perf_counter() - start
    ok = _level_lines(report.rows, lambda l: 5 * 2.0**-l) and elapsed < 60
    worst = max(r.measured_error * 2.0**r.level / 5 for r in report.rows)
    criterion_log(2, ok, f"(x+y)/2 d=2 L=4 p=1: max error/bound {worst:.3f}, {elapsed:.2f}s")
    assert ok


def test_modulus_identities(criterion_log):
    plan = ModulusPlan()
    ind = get_target("indicator").target
    rel = []
    for t in (0.1, 0.25):
        for p in (1.0, 2.0):
            est = estimate_modulus(ind, t, p, plan).value
            rel.append(abs(est / t ** (1 / p) - 1))
    tent = get_target("tent:eps=0.1").target
    tent_ok = all(estimate_modulus(tent, 0.1, p, plan).value <= 0.3 ** (1 / p) * 1.05 for p in (1.0, 2.0))
    classical = estimate_modulus(tent, 0.1, math.inf, plan).value
    ok = max(rel) <= 0.05 and tent_ok and abs(classical - 1) <= 0.02
    criterion_log(3, ok, f"indicator max rel dev {max(rel):.4f}; tent bound {tent_ok}; classical {classical:.4f}")
    assert ok


def test_encoder_exactness(criterion_log):
    rng = np.random.default_rng(0)
    worst_code = worst_weights = 0.0
    for N in (2, 3):
        for d in (1, 2):
            cfg = PartitionConfig(d, N, 4)
            stack = build_encoder_weights(cfg)
            for level in range(1, 5):
                n = N**level
                beta = rng.integers(0, n, size=(10**4, d))
                # Interior of a level-l cube is interior at every coarser level too.
                x = (beta + rng.random((10**4, d)) * (1 - cfg.delta * n)) / n
                code = encode(x, level, cfg)
                worst_code = max(worst_code, float(np.abs(code - beta / n).max()))
                heads = stack.evaluate(x)
                worst_weights = max(worst_weights, float(np.abs(heads[f"psi_{level}"] - code).max()))
    ok = worst_code <= 1e-12 and worst_weights <= 1e-9
    criterion_log(4, ok, f"code deviation {worst_code:.2e}, weights vs functional {worst_weights:.2e}")
    assert ok


def test_decoder_certificate(criterion_log):
    rng = np.random.default_rng(2024)
    budget = FitBudget()
    successes = false_certificates = 0
    sizes = rng.integers(1, 17, size=50)
    for K in sizes:
        y = rng.uniform(-1, 1, int(K))
        try:
            dec = fit_two_sine(y, 1e-2, budget)
        except FitFailure as exc:
            dec = exc.best
            succeeded = False
        else:
            succeeded = True
        recheck = float(np.max(np.abs(dec.evaluate(np.arange(1, K + 1)) - y)))
        if recheck > dec.achieved_eps or (succeeded and not dec.achieved_eps < 1e-2):
            false_certificates += 1
        successes += succeeded
    rate = successes / 50
    ok = false_certificates == 0 and rate >= 0.8
    criterion_log(5, ok, f"success rate {rate:.2f} (need 0.80), false certificates {false_certificates}")
    assert false_certificates == 0
    assert rate >= 0.8


def _random_polynomial(rng, d):
    terms = [(rng.uniform(-2, 2), rng.integers(0, 4, size=d)) for _ in range(rng.integers(1, 4))]
    return lambda x: sum(c * np.prod(x**e, axis=1) for c, e in terms)


def test_oscillation_inequality(criterion_log):
    rng = np.random.default_rng(5)
    failures = 0
    for _ in range(100):
        d = int(rng.integers(1, 4))
        p = float(rng.choice([1.0, 2.0]))
        res = check_oscillation_inequality(_random_polynomial(rng, d), rng.uniform(-1, 1, d), float(rng.uniform(0.05, 1.5)), p)
        failures += not res.lhs <= res.rhs + res.tolerance
    oracle = check_oscillation_inequality(lambda x: x[:, 0], [0.0], 1.0, 1.0)
    ok = failures == 0 and abs(oracle.lhs - 0.25) <= 1e-3
    criterion_log(6, ok, f"{failures} violations in 100 triples; f(x)=x lhs {oracle.lhs:.6f}")
    assert ok


def test_nestedness(criterion_log):
    f = TargetFunction(lambda x: np.sin(4 * x[:, 0]) * x[:, 1] + x[:, 1] ** 2, 2)
    delta = 1e-3 * 2.0**-6
    short = build(f, PartitionConfig(2, 2, 3, delta))
    long = build(f, PartitionConfig(2, 2, 6, delta))
    same = all(
        a.decoder == b.decoder and np.array_equal(a.cell_values, b.cell_values)
        for a, b in zip(short.grades, long.grades[:4])
    )
    criterion_log(7, same, "grades 0..3 bitwise identical between L=3 and L=6" if same else "grades differ")
    assert same


def _zero_sine_net(d, N, L):
    grades = [GradeTerm(l, SineDecoder(0.0, 0.0, 0.0, 0.0, N ** (d * l)), np.zeros(N ** (d * l))) for l in range(L + 1)]
    return MultigradeNet(PartitionConfig(d, N, L), grades, 2.0)


def test_width_and_depth_formulas(criterion_log):
    widths_ok = all(
        export_weights(_zero_sine_net(d, N, 1)).width == 2 * d * N + d + 2 == stack_width(d, N)
        for d, N in [(1, 2), (2, 3), (3, 2)]
    )
    depth_ok = depth_for_accuracy(1, 1, 1, 2, 3 / 8) == 3
    offset = count_parameters(_zero_sine_net(1, 2, 0))
    per_level = [(count_parameters(_zero_sine_net(1, 2, L)) - offset) / L for L in (2, 4, 8)]
    spread = max(per_level) / min(per_level) - 1
    ok = widths_ok and depth_ok and spread <= 0.1
    criterion_log(8, ok, f"widths {widths_ok}; depth {depth_ok}; per-level parameter spread {spread:.3f}")
    assert ok


def test_box_rescaling(criterion_log):
    start = time.perf_counter()
    f = TargetFunction(lambda x: x[:, 0], 1, lower=(0.0,), upper=(2.0,))
    _, report = box_rescale_verify(f, PartitionConfig(1, 2, 4), 1.0, Holder(1.0, 1.0))
    elapsed = time.perf_counter() - start
    ok = _level_lines(report.rows, lambda l: 3 * 2 * 2 * 2.0**-l) and elapsed < 10
    worst = max(r.measured_error / (12 * 2.0**-r.level) for r in report.rows)
    criterion_log(9, ok, f"x on [0,2] L=4 p=1: max error/bound {worst:.3f}, {elapsed:.2f}s")
    assert ok
