import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from dbgeom import implicit
from dbgeom.curvature import (
    ChartFrame,
    curvature_at,
    gaussian_curvature,
    gaussian_curvature_arrays,
    planar_curvature,
    planar_curvature_arrays,
    select_chart,
    signed_planar_curvature,
)
from dbgeom.derivatives import DerivativeBundle, bundle, derivatives
from dbgeom.errors import ContractError
from dbgeom.levelset import sample_boundary_points
from dbgeom.network import Activation, random_network


def graph_curvature_2d(b):
    """Oracle from implicit differentiation: y' = -fx/fy and the graph formula for y''."""
    fx, fy = b.grad
    fxx, fxy, fyy = b.hess[0, 0], b.hess[0, 1], b.hess[1, 1]
    y1 = -fx / fy
    y2 = -(fxx * fy - 2 * fx * fxy + fx * fx * fyy / fy) / fy ** 2
    return abs(y2) * (1 + y1 ** 2) ** -1.5


@pytest.mark.parametrize("r", [0.5, 1.0, 3.0])
def test_circle_curvature(r):
    fn = implicit.circle(r)
    for t in np.linspace(0.1, 6.0, 9):
        b = bundle(fn, r * np.array([math.cos(t), math.sin(t)]))
        assert planar_curvature(b, select_chart(b.grad)) == pytest.approx(1 / r, rel=1e-12)
        assert signed_planar_curvature(b) == pytest.approx(1 / r, rel=1e-12)


def test_signed_curvature_flips_with_f():
    fn = implicit.circle(2.0)
    b = bundle(fn, np.array([2.0, 0.0]))
    neg = DerivativeBundle(-b.value, -b.grad, -b.hess)
    assert signed_planar_curvature(neg) == pytest.approx(-0.5)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_planar_formula_matches_graph_oracle(seed):
    net = random_network(2, [5], Activation.tanh(), seed=seed)
    x = np.random.default_rng(seed).normal(size=2)
    b = bundle(net, x)
    if abs(b.grad[1]) < 0.3 * np.linalg.norm(b.grad):
        return
    k = planar_curvature(b, ChartFrame.for_axis(1, 2))
    assert k == pytest.approx(graph_curvature_2d(b), rel=1e-10, abs=1e-12)


def test_paraboloid_gaussian_curvature():
    # z = x^2 + y^2 has K = 4 / (1 + 4x^2 + 4y^2)^2
    x, y, z = sp.symbols("x1:4")
    fn = implicit.ImplicitFunction(x ** 2 + y ** 2 - z, (x, y, z))
    for px, py in [(0.0, 0.0), (0.3, -0.2), (1.0, 0.5)]:
        p = np.array([px, py, px ** 2 + py ** 2])
        b = bundle(fn, p)
        expect = 4 / (1 + 4 * px ** 2 + 4 * py ** 2) ** 2
        assert gaussian_curvature(b) == pytest.approx(expect, rel=1e-12)


def test_saddle_gaussian_curvature_is_negative():
    # z = x y has K = -1 / (1 + x^2 + y^2)^2
    x, y, z = sp.symbols("x1:4")
    fn = implicit.ImplicitFunction(x * y - z, (x, y, z))
    p = np.array([0.5, 2.0, 1.0])
    assert gaussian_curvature(bundle(fn, p)) == pytest.approx(-1 / (1 + 0.25 + 4) ** 2, rel=1e-12)


@pytest.mark.parametrize("r", [0.5, 2.0])
def test_sphere_gaussian_curvature(r):
    fn = implicit.sphere(r)
    P = sample_boundary_points(fn, 50, [(-r - 0.5, r + 0.5)] * 3, seed=1)
    _, g, h, _ = derivatives(fn, P, 2)
    assert np.allclose(gaussian_curvature_arrays(g, h), 1 / r ** 2, rtol=1e-12)


def test_torus_curvature_sign_pattern():
    fn = implicit.torus(2.0, 0.5)
    outer = bundle(fn, np.array([2.5, 0.0, 0.0]))
    inner = bundle(fn, np.array([1.5, 0.0, 0.0]))
    # K = cos(v) / (r (R + r cos v)) on the outer and inner equators
    assert gaussian_curvature(outer) == pytest.approx(1 / (0.5 * 2.5), rel=1e-12)
    assert gaussian_curvature(inner) == pytest.approx(-1 / (0.5 * 1.5), rel=1e-12)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_gaussian_curvature_is_chart_invariant(seed):
    net = random_network(3, [6], Activation.sigmoid(), seed=seed)
    b = bundle(net, np.random.default_rng(seed).normal(size=3))
    ref = gaussian_curvature(b)
    for axis in range(3):
        if abs(b.grad[axis]) > 0.2 * np.linalg.norm(b.grad):
            K = gaussian_curvature(b, ChartFrame.for_axis(axis, 3))
            assert K == pytest.approx(ref, rel=1e-8, abs=1e-12)


def test_array_versions_match_scalar():
    net = random_network(3, [5, 3], seed=4)
    X = np.random.default_rng(2).normal(size=(20, 3))
    _, g, h, _ = derivatives(net, X, 2)
    K = gaussian_curvature_arrays(g, h)
    for i in range(len(X)):
        assert K[i] == pytest.approx(gaussian_curvature(DerivativeBundle(0.0, g[i], h[i])), rel=1e-10)
    net2 = random_network(2, [5], seed=4)
    _, g, h, _ = derivatives(net2, X[:, :2], 2)
    k = planar_curvature_arrays(g, h)
    for i in range(len(X)):
        assert k[i] == pytest.approx(planar_curvature(DerivativeBundle(0.0, g[i], h[i]), select_chart(g[i])), rel=1e-10)


def test_chart_selection_tie_breaks_to_lowest_index():
    assert select_chart(np.array([1.0, -1.0, 0.5])).dependent_axis == 0
    assert select_chart(np.array([0.1, 0.2, -0.9])).dependent_axis == 2


def test_curvature_at_flags_singular_points():
    fn = implicit.sphere(1.0)
    out = curvature_at(fn, np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]]))
    assert out[0].flag == "singular" and math.isnan(out[0].value)
    assert out[1].flag == "ok" and out[1].value == pytest.approx(1.0)


def test_curvature_at_rejects_other_dimensions():
    with pytest.raises(ContractError):
        curvature_at(implicit.hypersphere(4), np.zeros((1, 4)))
