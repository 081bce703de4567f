import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from layerwise.analysis import ModulusPlan, estimate_modulus
from layerwise.targets import (
    GridFormatError,
    catalog,
    get_target,
    grid_lipschitz,
    grid_target,
    load_target,
    parse_grid,
    target_names,
)

PLAN = ModulusPlan(points=1 << 14)


def test_catalog_covers_every_name():
    for d in (1, 2, 3):
        specs = catalog(d)
        assert [s.name for s in specs] == target_names()
        x = np.random.default_rng(d).random((20, d))
        for s in specs:
            assert s(x).shape == (20,)
            assert s.target.d == d


def test_catalog_point_values():
    x = np.array([[0.55, 0.1], [0.5, 0.9], [0.2, 0.2]])
    np.testing.assert_allclose(get_target("tent", 2)(x), [0.5, 1.0, 0.0])
    np.testing.assert_allclose(get_target("average", 2)(x), [0.325, 0.7, 0.2])
    np.testing.assert_allclose(get_target("indicator", 2)(x), [1.0, 0.0, 0.0])
    np.testing.assert_allclose(get_target("holder:alpha=0.5", 2)(x), [math.sqrt(0.05), 0.0, math.sqrt(0.3)])
    np.testing.assert_allclose(get_target("sine:m=2", 2)(x)[1], 0.0, atol=1e-12)
    np.testing.assert_allclose(get_target("constant:c=-2.5", 2)(x), -2.5)


def test_target_parameters_parsed():
    assert get_target("tent:eps=0.2").params == {"eps": 0.2}
    assert get_target("sine:m=3").params == {"m": 3}
    with pytest.raises(KeyError):
        get_target("wiggle")
    with pytest.raises(ValueError):
        get_target("tent:eps")
    with pytest.raises(ValueError):
        get_target("tent:eps=0.9")
    with pytest.raises(ValueError):
        get_target("holder:alpha=1.5")


@pytest.mark.parametrize("name", ["ramp", "indicator", "constant", "zero"])
@pytest.mark.parametrize("p", [1.0, 2.0])
def test_analytic_modulus_matches_estimate(name, p):
    spec = get_target(name)
    for t in (0.05, 0.2, 0.4):
        if t > spec.omega_range:
            continue
        exact = spec.omega(t, p)
        est = estimate_modulus(spec.target, t, p, PLAN).value
        assert est == pytest.approx(exact, rel=0.05, abs=1e-12)


@pytest.mark.parametrize("p", [1.0, 2.0])
def test_known_upper_bounds_hold(p):
    tent = get_target("tent")
    for t in (0.02, 0.05, 0.1, 0.3):
        assert estimate_modulus(tent.target, t, p, PLAN).value <= tent.omega_upper(t, p)
    for name in ("ramp", "average", "tent", "sine", "holder", "holder:alpha=0.25"):
        for d in (1, 2):
            spec = get_target(name, d)
            alpha, lam = spec.holder
            for t in (0.03, 0.1, 0.3):
                assert estimate_modulus(spec.target, t, p, PLAN).value <= lam * t**alpha * (1 + 1e-9)


def test_grid_identity_and_constants():
    spec = grid_target(parse_grid("1 2\n0 1\n")[2])
    x = np.linspace(0, 1, 11)[:, None]
    np.testing.assert_allclose(spec(x), x[:, 0], atol=1e-15)
    const = grid_target(np.full((3, 4), 2.5))
    np.testing.assert_allclose(const(np.random.default_rng(0).random((30, 2))), 2.5)


def test_grid_interpolation_examples():
    spec = grid_target(parse_grid("1 3\n0 1 0")[2])
    np.testing.assert_allclose(spec(np.array([[0.25], [0.5], [0.75], [1.2], [-1.0]])), [0.5, 1.0, 0.5, 0.0, 0.0])
    d, shape, values = parse_grid("# a 2x3 grid\n2 2 3\n0 1 2  # first row\n3 4 5\n")
    assert (d, shape) == (2, (2, 3))
    spec = grid_target(values)
    # Row-major: value at (x0=1, x1=0.5) is 4.
    assert spec(np.array([[1.0, 0.5]]))[0] == pytest.approx(4.0)
    assert spec(np.array([[0.5, 0.25]]))[0] == pytest.approx(2.0)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=2, max_size=9), st.floats(0, 1))
def test_grid_interpolant_is_linear_between_nodes(vals, x):
    values = np.array(vals)
    n = values.size
    f = grid_target(values)
    expected = np.interp(x, np.linspace(0, 1, n), values)
    assert f(np.array([[x]]))[0] == pytest.approx(expected, abs=1e-12)
    assert grid_lipschitz(values) == pytest.approx(np.abs(np.diff(values)).max() * (n - 1))


def test_grid_lipschitz_bounds_modulus():
    values = np.random.default_rng(1).random((5, 7))
    spec = grid_target(values)
    lip = grid_lipschitz(values)
    for t in (0.05, 0.2):
        # Each axis contributes at most its own slope, so sqrt(d) covers any direction.
        assert estimate_modulus(spec.target, t, math.inf, PLAN).value <= math.sqrt(2) * lip * t * (1 + 1e-9)
    assert grid_lipschitz(parse_grid("1 3\n0 1 0")[2]) == 2.0


@pytest.mark.parametrize(
    "text,line,offset",
    [
        ("", 1, 0),
        ("x 2\n0 1", 1, 0),
        ("2 3", 1, 2),
        ("1 1\n0", 1, 1),
        ("0 2\n0 1", 1, 0),
        ("1 3\n0 1", 2, 1),
        ("1 2\n0 abc", 2, 1),
        ("1 2\n0\n# note\n nan", 4, 0),
        ("1 2\n0 1 2", 2, 2),
    ],
)
def test_grid_errors_report_position(text, line, offset):
    with pytest.raises(GridFormatError) as info:
        parse_grid(text)
    assert (info.value.line, info.value.offset) == (line, offset)
    assert f"line {line}" in str(info.value)


def test_load_target_from_file(tmp_path):
    path = tmp_path / "bump.grid"
    path.write_text("1 5\n0 0.5 1 0.5 0\n")
    spec = load_target(path)
    assert spec.name == "bump"
    assert spec(np.array([[0.5], [0.125]])).tolist() == pytest.approx([1.0, 0.25])
