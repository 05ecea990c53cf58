import itertools

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from dbgeom import implicit
from dbgeom.derivatives import bundle, derivatives, fd_check, gradient, hessian, third_derivatives, third_method
from dbgeom.errors import ContractError
from dbgeom.network import Activation, random_network


def symbolic_net(net):
    """Independent oracle: the network as a sympy expression in x1..xd."""
    xs = sp.symbols(f"x1:{net.d + 1}")
    act = {
        "tanh": sp.tanh,
        "sigmoid": lambda t: 1 / (1 + sp.exp(-t)),
        "softplus": lambda t: sp.log(1 + sp.exp(net.activation.alpha * t)) / net.activation.alpha,
    }[net.activation.name]
    h = list(xs)
    for layer in net.layers:
        h = [act(sum(sp.Float(w) * v for w, v in zip(row, h)) + sp.Float(b)) for row, b in zip(layer.W, layer.b)]
    return sum(sp.Float(a) * v for a, v in zip(net.a, h)) + sp.Float(net.c), xs


def symbolic_derivs(net, x):
    f, xs = symbolic_net(net)
    sub = dict(zip(xs, x))
    d = net.d
    g = np.array([float(sp.diff(f, xs[i]).evalf(subs=sub)) for i in range(d)])
    H = np.empty((d, d))
    T = np.empty((d, d, d))
    for i, j in itertools.combinations_with_replacement(range(d), 2):
        fij = sp.diff(f, xs[i], xs[j])
        H[i, j] = H[j, i] = float(fij.evalf(subs=sub))
        for k in range(j, d):
            v = float(sp.diff(fij, xs[k]).evalf(subs=sub))
            for p in set(itertools.permutations((i, j, k))):
                T[p] = v
    return g, H, T


@pytest.mark.parametrize("act", [Activation.tanh(), Activation.sigmoid(), Activation.softplus(1.7)], ids=str)
@pytest.mark.parametrize("widths", [[4], [3, 3]])
def test_against_symbolic_network(act, widths):
    net = random_network(3, widths, act, seed=5)
    x = np.array([0.4, -0.3, 0.2])
    g, H, T = symbolic_derivs(net, x)
    b = bundle(net, x, want_third=True)
    assert np.allclose(b.grad, g, rtol=1e-12, atol=1e-13)
    assert np.allclose(b.hess, H, rtol=1e-10, atol=1e-12)
    # exact for one hidden layer, finite differences of the Hessian for deeper nets
    tol = 1e-10 if len(widths) == 1 else 1e-6
    assert np.allclose(b.third, T, rtol=tol, atol=tol)


def test_third_method_labels():
    assert third_method(random_network(2, [3], seed=0)) == "exact"
    assert third_method(random_network(2, [3, 3], seed=0)) != "exact"


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 5000), depth=st.integers(1, 3), d=st.integers(2, 4))
def test_hessian_and_third_are_symmetric(seed, depth, d):
    net = random_network(d, [4] * depth, seed=seed)
    x = np.random.default_rng(seed).normal(size=d)
    H = hessian(net, x)
    T = third_derivatives(net, x)
    assert np.allclose(H, H.T, atol=1e-14)
    for p in itertools.permutations(range(3)):
        assert np.allclose(T, np.transpose(T, p), atol=1e-12)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 5000), act=st.sampled_from(["tanh", "sigmoid"]))
def test_fd_oracle_tolerances(seed, act):
    net = random_network(3, [5], Activation(act), seed=seed, scale=0.8)
    x = np.random.default_rng(seed).normal(size=3)
    e = fd_check(net, x)
    assert e["grad"] < 1e-6 and e["hess"] < 1e-5 and e["third"] < 1e-3


def test_batched_matches_single_point():
    net = random_network(3, [6, 4], seed=2)
    X = np.random.default_rng(1).normal(size=(7, 3))
    val, G, H, _ = derivatives(net, X, 2)
    for i, x in enumerate(X):
        assert np.allclose(G[i], gradient(net, x))
        assert np.allclose(H[i], hessian(net, x))


def test_implicit_function_derivatives():
    fn = implicit.sphere(2.0)
    x = np.array([1.0, 2.0, -1.0])
    val, g, H, T = derivatives(fn, x[None], 3)
    assert val[0] == pytest.approx(2.0)
    assert np.allclose(g[0], 2 * x)
    assert np.allclose(H[0], 2 * np.eye(3))
    assert np.allclose(T[0], 0.0)


def test_fd_check_rejects_bad_step():
    with pytest.raises(ContractError):
        fd_check(random_network(2, [2], seed=0), np.zeros(2), h=0.0)
