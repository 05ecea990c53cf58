"""Acceptance criteria at their stated tolerances.

Each test records a one-line PASS/FAIL summary, printed in the pytest
terminal summary. Running this file directly prints the same lines:

    python tests/test_acceptance.py
"""

import math

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from dbgeom import flatness, implicit, levelset, topology
from dbgeom.curvature import ChartFrame, gaussian_curvature, gaussian_curvature_arrays, planar_curvature_arrays
from dbgeom.derivatives import bundle, derivatives, fd_check, value
from dbgeom.network import Activation, random_network
from dbgeom.pipeline import ExperimentConfig, run_experiment_43
from dbgeom.riemann import metric_at, sectional_12, tensors_at


def record(name, ok, detail):
    ACCEPTANCE_LINES.append((name, bool(ok), detail))
    print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
    assert ok, f"{name}: {detail}"


def surface_report(fn, spec):
    field = levelset.sample_grid(fn, spec)
    mesh = levelset.extract_surface_3d(field, spec, fn)
    return topology.euler_characteristic(fn, mesh, spec.lam)


def boundary_sample(fn, n, half=2.0, seed=0):
    return levelset.sample_boundary_points(fn, n, [(-half, half)] * fn.d, seed=seed)


@pytest.fixture(scope="module")
def trained_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("trained")
    return run_experiment_43(out, ExperimentConfig(figures=False))


def test_c1_trained_two_sphere_classifier(trained_run):
    report, _, result = trained_run
    ok = (result.accuracy >= 0.95 and 12.2 <= report.integral_K <= 13.1 and report.chi_rounded == 2)
    record("C1 trained classifier", ok,
           f"accuracy={result.accuracy:.4f} integral_K={report.integral_K:.4f} "
           f"chi_rounded={report.chi_rounded} chi_mesh={report.chi_mesh}")


def test_c2_sphere():
    fn = implicit.sphere(2.0)
    rep = surface_report(fn, levelset.GridSpec.cube(2.5, 3, 0.05))
    P = boundary_sample(fn, 200, 2.5)
    _, g, h, _ = derivatives(fn, P, 2)
    K = gaussian_curvature_arrays(g, h)
    err_int = abs(rep.integral_K - 4 * math.pi) / (4 * math.pi)
    err_pt = float(np.max(np.abs(K - 0.25)))
    record("C2 sphere r=2", err_int <= 0.01 and err_pt <= 1e-9,
           f"integral_K={rep.integral_K:.5f} rel_err={err_int:.2e} max|K-0.25|={err_pt:.1e}")


def test_c3_torus():
    fn = implicit.torus(2.0, 0.5)
    spec = levelset.GridSpec(((-2.75, 2.75), (-2.75, 2.75), (-0.75, 0.75)), 0.02)
    rep = surface_report(fn, spec)
    ok = abs(rep.integral_K) <= 0.2 and rep.chi_mesh == 0
    record("C3 torus", ok, f"integral_K={rep.integral_K:.4f} chi_mesh={rep.chi_mesh}")


def test_c4_two_spheres():
    fn = implicit.two_spheres(1.0, 2.0)
    spec = levelset.GridSpec(((-3.5, 3.5), (-1.5, 1.5), (-1.5, 1.5)), 0.05)
    rep = surface_report(fn, spec)
    err = abs(rep.integral_K - 8 * math.pi) / (8 * math.pi)
    ok = err <= 0.02 and rep.components == 2 and rep.chi_mesh == 4
    record("C4 two spheres", ok,
           f"integral_K={rep.integral_K:.4f} rel_err={err:.2e} components={rep.components} chi_mesh={rep.chi_mesh}")


def _random_nets(depth, count, seed):
    rng = np.random.default_rng(seed)
    acts = [Activation.tanh(), Activation.sigmoid(), Activation.softplus(1.0)]
    nets = []
    for k in range(count):
        widths = [int(rng.integers(4, 10)) for _ in range(depth)]
        nets.append(random_network(3, widths, acts[k % 3], rng=rng))
    return nets


def _intrinsic_vs_extrinsic(depth):
    worst_k, worst_e = 0.0, 0.0
    for k, net in enumerate(_random_nets(depth, 20, 100 + depth)):
        for x in boundary_sample(net, 50, 1.5, seed=k):
            b = bundle(net, x, want_third=True)
            rep = tensors_at(net, x)
            K = gaussian_curvature(b, rep.metric.frame)
            K_int = sectional_12(rep.metric, rep.curvature)
            worst_k = max(worst_k, abs(K - K_int) / (abs(K) + 1e-12))
            density = K * math.sqrt(rep.metric.det_g) / (2 * math.pi)
            worst_e = max(worst_e, abs(rep.curvature.euler_density - density) / (abs(density) + 1e-12))
    return worst_k, worst_e


@pytest.fixture(scope="module")
def intrinsic_results():
    return {depth: _intrinsic_vs_extrinsic(depth) for depth in (1, 2)}


def test_c5_extrinsic_matches_intrinsic(intrinsic_results):
    e1, e2 = intrinsic_results[1][0], intrinsic_results[2][0]
    record("C5 K from f vs R_1212/det g", e1 <= 1e-6 and e2 <= 1e-3,
           f"one hidden layer max_rel={e1:.1e} (tol 1e-6), two hidden layers max_rel={e2:.1e} (tol 1e-3)")


def test_c6_euler_density(intrinsic_results):
    e = max(intrinsic_results[1][1], intrinsic_results[2][1])
    record("C6 Euler density in 2D", e <= 1e-6, f"max_rel={e:.1e} (tol 1e-6)")


def test_c6b_four_sphere_density():
    fn = implicit.hypersphere(5, 1.0)
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(20):
        u = rng.normal(size=5)
        x = u / np.linalg.norm(u)
        rep = tensors_at(fn, x)
        expect = 3 * math.sqrt(rep.metric.det_g) / (4 * math.pi ** 2)
        worst = max(worst, abs(rep.curvature.euler_density - expect) / expect)
    record("C6b unit 4-sphere density", worst <= 1e-4, f"max_rel={worst:.1e} (tol 1e-4)")


FLAT_CASES = [
    ("t61a", "2x20"), ("t61b", "2x20"), ("t63a", "3x40"),
    ("t63b", "3x40"), ("t64-linear", "3x10x8"), ("t64-axis", "3x10x8"),
]


def test_c7_flat_constructions():
    lines, ok = [], True
    for case, dims in FLAT_CASES:
        net = flatness.make_flat_network(case, dims, seed=7)
        verdict = flatness.verdict_for_case(flatness.check_flat(net), case)
        P = boundary_sample(net, 200, 2.0, seed=1)
        _, g, h, _ = derivatives(net, P, 2)
        curv = planar_curvature_arrays(g, h) if net.d == 2 else gaussian_curvature_arrays(g, h)
        worst = float(np.max(np.abs(curv)))
        case_ok = verdict.satisfied and len(P) == 200 and worst < 1e-6
        if case in ("t61a", "t63a", "t64-axis"):
            shift = 0.0
            for t in (-1.0, -0.5, -0.25, 0.25, 0.5, 1.0):
                Q = P.copy()
                Q[:, 0] += t
                shift = max(shift, float(np.max(np.abs(value(net, Q)))))
            case_ok &= shift < 1e-8
            lines.append(f"{case} max|curv|={worst:.0e} max|f(p+te)|={shift:.0e}")
        else:
            lines.append(f"{case} max|curv|={worst:.0e}")
        ok &= case_ok
    record("C7 flat constructions", ok, "; ".join(lines))


def test_c8_derivative_oracles():
    rng = np.random.default_rng(8)
    acts = [Activation.tanh(), Activation.sigmoid(), Activation.softplus(1.0)]
    worst = {"grad": 0.0, "hess": 0.0, "third": 0.0}
    for act in acts:
        for k in range(10):
            widths = [int(rng.integers(3, 9))] if k % 2 == 0 else [int(rng.integers(3, 7)), int(rng.integers(3, 7))]
            net = random_network(3, widths, act, rng=rng, scale=0.8)
            for x in rng.normal(size=(50, 3)):
                e = fd_check(net, x)
                for key in worst:
                    worst[key] = max(worst[key], e[key])
    ok = worst["grad"] <= 1e-6 and worst["hess"] <= 1e-5 and worst["third"] <= 1e-3
    record("C8 derivative oracles", ok,
           f"grad={worst['grad']:.1e} hess={worst['hess']:.1e} third={worst['third']:.1e}")


def test_c9_tensor_invariants():
    rng = np.random.default_rng(9)
    sym, chart, flat = 0.0, 0.0, 0.0
    for k in range(6):
        net = random_network(3, [int(rng.integers(4, 9))], Activation.tanh(), rng=rng)
        for x in boundary_sample(net, 10, 1.5, seed=k):
            rep = tensors_at(net, x)
            c = rep.checks
            sym = max(sym, c["riemann_antisym_ik"], c["riemann_antisym_ab"], c["bianchi"],
                      c["two_form_antisym_ik"], c["two_form_antisym_ab"])
            b = bundle(net, x)
            ref = gaussian_curvature(b)
            for axis in range(3):
                if abs(b.grad[axis]) >= 0.2 * np.linalg.norm(b.grad):
                    K = gaussian_curvature(b, ChartFrame.for_axis(axis, 3))
                    chart = max(chart, abs(K - ref) / (abs(ref) + 1e-12))
    for case, dims in FLAT_CASES[2:]:
        net = flatness.make_flat_network(case, dims, seed=7)
        for x in boundary_sample(net, 10, 2.0, seed=2):
            flat = max(flat, tensors_at(net, x).checks["riemann_norm"])
    ok = sym <= 1e-8 and chart <= 1e-8 and flat <= 1e-8
    record("C9 tensor invariants", ok,
           f"symmetry_resid={sym:.1e} chart_rel={chart:.1e} flat|R|={flat:.1e}")


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))
