import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from layerwise.analysis import (
    BOUND_SCHEMA,
    MODULUS_HEADROOM,
    ConfigurationError,
    Holder,
    ModulusPlan,
    box_rescale_verify,
    check_oscillation_inequality,
    direct_box_error,
    estimate_modulus,
    lp_norm,
    modulus_csv,
    piecewise_average_diagnostic,
    verify_bounds,
)
from layerwise.geometry import PartitionConfig
from layerwise.multigrade import TargetFunction, build
from layerwise.quadrature import CellAverageEngine, box, unit_cube
from layerwise.targets import get_target
from layerwise.targets import ramp as ramp_spec

ramp = TargetFunction(lambda x: x[:, 0], 1, name="ramp")
step = TargetFunction(lambda x: (x[:, 0] > 0.5).astype(float), 1)
SMALL = ModulusPlan(points=4096)


def test_lp_norm_oracles():
    one = lambda x: np.ones(x.shape[0])
    assert lp_norm(one, unit_cube(3), 1.0) == pytest.approx(1.0, abs=1e-12)
    assert lp_norm(ramp, unit_cube(1), 2.0) == pytest.approx(1 / math.sqrt(3), abs=1e-12)
    halves = [box([0.0], [0.5]), box([0.5], [1.0])]
    assert lp_norm(step, halves, 1.0) == pytest.approx(0.5, abs=1e-12)
    with pytest.raises(ValueError):
        lp_norm(ramp, unit_cube(1), 0.5)


@pytest.mark.parametrize("p", [1.0, 2.0, 3.0])
@pytest.mark.parametrize("t", [0.05, 0.3, 0.7])
def test_ramp_modulus_closed_form(t, p):
    est = estimate_modulus(ramp, t, p, SMALL)
    exact = ramp_spec().omega(t, p)
    if t <= p / (p + 1):
        assert est.value == pytest.approx(exact, rel=1e-9)
        assert abs(est.argmax[0]) == pytest.approx(t)
    else:
        # The peak sits between sampled magnitudes; sampling stays below it.
        assert exact * 0.98 <= est.value <= exact
    assert est.is_lower_bound


def test_modulus_properties():
    f = TargetFunction(lambda x: np.sin(7 * x[:, 0]) * x[:, 1] + (x[:, 1] > 0.4), 2)
    ts = [0.0, 0.05, 0.1, 0.2, 0.4]
    norm = {p: lp_norm(f, [box([0, 0], [1, 0.4]), box([0, 0.4], [1, 1])], p) for p in (1.0, 2.0)}
    for p in (1.0, 2.0):
        vals = [estimate_modulus(f, t, p, SMALL).value for t in ts]
        assert vals[0] == 0.0
        # Directions and magnitudes scale with t, so a sup over a superset.
        assert all(a <= b + 1e-12 for a, b in zip(vals, vals[1:]))
        assert vals[-1] <= 2 * norm[p] * 1.01
    for t in ts[1:]:
        # E_h has measure <= 1, so the L^1 value cannot exceed the L^2 value for the same h.
        assert estimate_modulus(f, t, 1.0, SMALL).value <= estimate_modulus(f, t, 2.0, SMALL).value + 1e-12


def test_classical_modulus_of_a_jump():
    est = estimate_modulus(step, 0.1, math.inf, SMALL)
    assert est.value == 1.0


def test_modulus_validation_and_csv():
    with pytest.raises(ValueError):
        estimate_modulus(ramp, -0.1, 2.0)
    with pytest.raises(ValueError):
        estimate_modulus(ramp, 0.1, 0.9)
    text = modulus_csv([estimate_modulus(ramp, t, 2.0, SMALL) for t in (0.1, 0.2)])
    lines = text.splitlines()
    assert lines[0] == "# schema: layerwise-modulus/1"
    assert lines[1].startswith("t,p,value,")
    assert len(lines) == 4


def test_ramp_bounds_pass_in_both_modes():
    net = build(ramp, PartitionConfig(1, 2, 6), p=2.0)
    for mode in ("modulus", Holder(1.0, 1.0)):
        report = verify_bounds(ramp, net, 2.0, mode)
        assert report.passed
        assert [r.level for r in report.rows] == list(range(7))
    holder_rows = verify_bounds(ramp, net, 2.0, Holder(1.0, 1.0)).rows
    for r in holder_rows:
        assert r.bound == pytest.approx(3 * 2.0 ** -r.level)
        assert r.measured_error < r.bound


def test_measured_error_matches_oracle_at_level_zero():
    delta = 1e-3 / 64
    net = build(ramp, PartitionConfig(1, 2, 6, delta), p=2.0)
    report = verify_bounds(ramp, net, 2.0, Holder(1.0, 1.0))
    c = 0.5 - delta / 2
    exact = math.sqrt(1 / 3 - c + c * c)
    assert report.rows[0].measured_error == pytest.approx(exact, rel=1e-9)


def test_report_serialization():
    net = build(ramp, PartitionConfig(1, 2, 2), p=1.0)
    report = verify_bounds(ramp, net, 1.0, plan=SMALL)
    text = report.to_csv()
    assert text.splitlines()[0] == f"# schema: {BOUND_SCHEMA}"
    assert len(text.splitlines()) == 2 + 3
    data = json.loads(report.to_json())
    assert data["schema"] == BOUND_SCHEMA and data["passed"] is True
    assert data["tolerances"]["modulus_headroom"] == 1.1


def test_p_mismatch_rejected():
    net = build(ramp, PartitionConfig(1, 2, 2), p=2.0)
    with pytest.raises(ConfigurationError):
        verify_bounds(ramp, net, 1.0)
    with pytest.raises(ConfigurationError):
        verify_bounds(ramp, net, 2.0, mode="holder")


def test_constant_target_gets_note():
    f = TargetFunction(lambda x: np.full(x.shape[0], 3.0), 1)
    report = verify_bounds(f, build(f, PartitionConfig(1, 2, 3)), 2.0, plan=SMALL)
    assert report.passed
    assert any("constant" in n for n in report.notes)


def test_box_rescaling_example():
    f = TargetFunction(lambda x: x[:, 0], 1, lower=(0.0,), upper=(2.0,))
    net, report = box_rescale_verify(f, PartitionConfig(1, 2, 4), 1.0, Holder(1.0, 1.0))
    assert report.passed
    for r in report.rows:
        assert r.bound == pytest.approx(3 * 2 * 2 * 2.0 ** -r.level)
    # Pulled-back measurement agrees with quadrature directly on the box.
    for level in (0, 2, 4):
        assert report.rows[level].measured_error == pytest.approx(direct_box_error(f, net, level, 1.0), rel=1e-9)
    assert report.rows[0].measured_error == pytest.approx(1.0, rel=1e-3)


def test_box_rescaling_two_d():
    f = TargetFunction(lambda x: np.sin(x[:, 0]) + 0.5 * x[:, 1], 2, lower=(-1.0, 0.0), upper=(1.0, 3.0))
    net, report = box_rescale_verify(f, PartitionConfig(2, 2, 3), 2.0, Holder(1.0, 1.0))
    assert report.passed
    x = np.array([[-1.0, 0.0], [0.999, 2.999]])
    assert np.all(np.isfinite(net.readouts(x)))


def test_oscillation_identity_oracle():
    res = check_oscillation_inequality(ramp, [0.0], 1.0, 1.0)
    assert res.lhs == pytest.approx(0.25, abs=1e-3)
    # rhs = int_{-1}^{1} (1 - |h|) |h| dh = 1/3
    assert res.rhs == pytest.approx(1 / 3, abs=1e-9)
    assert res.passed


def _poly(coeffs, d):
    coeffs = np.asarray(coeffs).reshape(-1, d + 1)

    def fn(x):
        out = np.zeros(x.shape[0])
        for row in coeffs:
            out += row[0] * np.prod(x ** row[1:].astype(int), axis=1)
        return out

    return fn


@settings(max_examples=40, deadline=None)
@given(
    d=st.integers(1, 3),
    data=st.data(),
    p=st.sampled_from([1.0, 2.0]),
)
def test_oscillation_inequality_random_polynomials(d, data, p):
    terms = data.draw(st.integers(1, 3))
    coeffs = []
    for _ in range(terms):
        coeffs.append(data.draw(st.floats(-3, 3)))
        coeffs.extend(data.draw(st.integers(0, 3)) for _ in range(d))
    lower = [data.draw(st.floats(-1, 1)) for _ in range(d)]
    side = data.draw(st.floats(0.05, 2))
    res = check_oscillation_inequality(_poly(coeffs, d), lower, side, p)
    assert res.lhs <= res.rhs + res.tolerance


def test_oscillation_validation():
    with pytest.raises(ValueError):
        check_oscillation_inequality(ramp, [0.0], 0.0, 1.0)
    with pytest.raises(ValueError):
        check_oscillation_inequality(ramp, [0.0], 1.0, 0.5)


def test_piecewise_diagnostic_ramp():
    delta = 1e-6
    cfg = PartitionConfig(1, 2, 1, delta)
    # Two cells of length a = 1/2 - delta; int |x - mid| over each is a^2 / 4.
    a = 0.5 - delta
    # The kink of |x - mid| limits Gauss accuracy.
    assert piecewise_average_diagnostic(ramp, cfg, 1, 1.0) == pytest.approx(2 * a * a / 4, rel=1e-4)
    assert piecewise_average_diagnostic(ramp, cfg, 1, 1.0) == pytest.approx(0.125, abs=1e-5)


def test_piecewise_diagnostic_matches_table_readout():
    f = TargetFunction(lambda x: np.cos(3 * x[:, 0]) * x[:, 1], 2)
    cfg = PartitionConfig(2, 2, 3)
    net = build(f, cfg, p=2.0)
    for level in range(4):
        direct = lp_norm(lambda x: f(x) - net.readout(x, level), cfg.interior_region(level), 2.0)
        assert piecewise_average_diagnostic(f, cfg, level, 2.0) == pytest.approx(direct, rel=1e-9, abs=1e-13)


def test_piecewise_diagnostic_within_oscillation_bound():
    # Cell by cell the oscillation inequality bounds the diagnostic.
    f = TargetFunction(lambda x: np.abs(x[:, 0] - 0.3) ** 0.5, 1)
    cfg = PartitionConfig(1, 3, 2, 1e-6)
    level = 2
    diag = piecewise_average_diagnostic(f, cfg, level, 1.0, engine=CellAverageEngine("tensor", 64, "gauss", 0, 0), cell_engine=CellAverageEngine("tensor", 64, "gauss", 0, 0))
    side = 1 / 9 - 1e-6
    rhs = sum(check_oscillation_inequality(f, [j / 9], side, 1.0, points=64).rhs for j in range(9))
    assert diag <= rhs + 1e-6


def test_oscillation_product_on_small_square():
    f = TargetFunction(lambda x: x[:, 0] * x[:, 1], 2)
    res = check_oscillation_inequality(f, [0.0, 0.0], 0.5, 2.0)
    # Brute-force lhs: Var(xy) * |Q| with x, y uniform on [0, 1/2].
    mean, second = 1 / 16, (1 / 12) ** 2
    assert res.lhs == pytest.approx((second - mean**2) * 0.25, rel=1e-9)
    assert res.passed


@pytest.mark.parametrize("name", ["ramp", "indicator", "sine", "tent"])
@pytest.mark.parametrize("p", [1.0, 2.0])
def test_piecewise_diagnostic_bounded_by_modulus(name, p):
    spec = get_target(name, 1)
    cfg = PartitionConfig(1, 2, 3)
    for level in range(4):
        diag = piecewise_average_diagnostic(spec.target, cfg, level, p)
        omega = estimate_modulus(spec.target, 2.0**-level, p, SMALL).value
        assert diag <= 2 ** (1 / p) * omega * MODULUS_HEADROOM + 1e-9
