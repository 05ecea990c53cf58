import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dbgeom.curvature import gaussian_curvature_arrays, planar_curvature_arrays
from dbgeom.derivatives import derivatives
from dbgeom.errors import ContractError
from dbgeom.flatness import (
    CASES,
    chain_screen,
    check_flat,
    check_t61,
    check_t63,
    check_t64,
    make_flat_network,
    parse_dims,
    verdict_for_case,
)
from dbgeom.levelset import sample_boundary_points
from dbgeom.network import Activation, Layer, MlpNetwork, random_network

DIMS = {"t61a": "2x12", "t61b": "2x12", "t63a": "3x16", "t63b": "3x16", "t64-linear": "3x6x5", "t64-axis": "4x6x5x4"}


def brute_force_chains(net):
    """Oracle: enumerate every chain a_i W^L_ij ... W^2_mn explicitly."""
    mats = [layer.W for layer in net.layers[1:]]
    d1 = net.layers[0].W.shape[0]
    s, m = np.zeros(d1), np.zeros(d1)
    sizes = [len(net.a)] + [W.shape[1] for W in reversed(mats)]
    for idx in itertools.product(*[range(k) for k in sizes]):
        val = abs(net.a[idx[0]])
        for W, (row, col) in zip(reversed(mats), zip(idx, idx[1:])):
            val *= abs(W[row, col])
        s[idx[-1]] += val
        m[idx[-1]] = max(m[idx[-1]], val)
    return s, m


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 1000), depth=st.integers(2, 4))
def test_chain_screen_matches_enumeration(seed, depth):
    net = random_network(2, [3] * depth, seed=seed)
    s, m = chain_screen(net)
    s_ref, m_ref = brute_force_chains(net)
    assert np.allclose(s, s_ref, rtol=1e-12)
    assert np.allclose(m, m_ref, rtol=1e-12)


@pytest.mark.parametrize("case", CASES)
@pytest.mark.parametrize("act", [Activation.tanh(), Activation.sigmoid(), Activation.softplus(1.0)], ids=str)
def test_constructed_networks_satisfy_condition_exactly(case, act):
    net = make_flat_network(case, DIMS[case], seed=3, activation=act)
    v = verdict_for_case(check_flat(net), case)
    assert v.satisfied and v.max_violation == 0.0


@pytest.mark.parametrize("case", CASES[:5])
def test_constructed_boundaries_are_flat(case):
    net = make_flat_network(case, DIMS[case], seed=11)
    P = sample_boundary_points(net, 50, [(-2, 2)] * net.d, seed=0)
    _, g, h, _ = derivatives(net, P, 2)
    curv = planar_curvature_arrays(g, h) if net.d == 2 else gaussian_curvature_arrays(g, h)
    assert np.max(np.abs(curv)) < 1e-6


@pytest.mark.parametrize("axis", [0, 1, 2])
def test_axis_construction_is_invariant_along_axis(axis):
    net = make_flat_network("t64-axis", "3x6x5", seed=4, axis=axis)
    P = sample_boundary_points(net, 30, [(-2, 2)] * 3, seed=1)
    e = np.eye(3)[axis]
    for t in (-1.0, -0.5, 0.5, 1.0):
        _, g, _, _ = derivatives(net, P + t * e, 1)
        assert np.all(np.abs(g[:, axis]) < 1e-14)
    assert verdict_for_case(check_flat(net), "t64-axis", axis).satisfied


def test_random_networks_violate_conditions():
    assert not any(v.satisfied for v in check_t63(random_network(3, [5], seed=0)))
    assert not any(v.satisfied for v in check_t61(random_network(2, [5], seed=0)))
    assert not any(v.satisfied for v in check_t64(random_network(3, [5, 4], seed=0)))


def test_mixed_columns_do_not_satisfy_axis_condition():
    # unit 0 ignores y and unit 1 ignores x: f = g(x) + h(y) has a curved boundary
    W = np.array([[1.0, 0.0], [0.0, 1.0]])
    net = MlpNetwork((Layer(W, np.array([0.3, -0.2])),), np.array([1.0, 1.0]), 0.0, Activation.tanh())
    assert not check_t61(net)[0].satisfied
    P = sample_boundary_points(net.replace(c=-0.5), 20, [(-2, 2)] * 2, seed=0)
    _, g, h, _ = derivatives(net, P, 2)
    assert np.max(np.abs(planar_curvature_arrays(g, h))) > 1e-3


def test_t61a_boundary_is_a_straight_line():
    net = make_flat_network("t61a", "2x12", seed=5)
    P = sample_boundary_points(net, 100, [(-2, 2)] * 2, seed=2)
    centered = P - P.mean(axis=0)
    normal = np.linalg.svd(centered)[2][-1]
    assert np.max(np.abs(centered @ normal)) < 1e-6


def test_t61b_minor_witness():
    net = make_flat_network("t61b", "2x5", seed=0)
    W = net.layers[0].W.copy()
    W[2, 1] += 0.5
    bad = net.replace(layers=(net.layers[0].__class__(W, net.layers[0].b),))
    v = check_t61(bad)[1]
    assert not v.satisfied and 2 in v.witness


def test_architecture_guards():
    with pytest.raises(ContractError):
        check_t63(random_network(2, [3], seed=0))
    with pytest.raises(ContractError):
        check_t64(random_network(3, [3], seed=0))
    with pytest.raises(ContractError):
        make_flat_network("t63a", "2x5", seed=0)
    with pytest.raises(ContractError):
        make_flat_network("t64-linear", "3x5", seed=0)
    with pytest.raises(ContractError):
        make_flat_network("t99", "3x5", seed=0)


def test_parse_dims():
    assert parse_dims("3x40") == (3, [40])
    assert parse_dims("4X8x6") == (4, [8, 6])
    with pytest.raises(ContractError):
        parse_dims("3")
