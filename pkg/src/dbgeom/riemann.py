"""Intrinsic curvature of the (d-1)-dimensional boundary f = 0 in R^d.

The boundary is treated locally as a graph x_d = h(x_1, ..., x_{d-1}) over
the chart coordinates (dependent axis last, see :class:`ChartFrame`).
Index conventions, all zero-based:

* ``dg[k, i, j]``          = d_k g_ij
* ``gamma[m, i, k]``       = Gamma^m_{ik}
* ``dgamma[i, a, k, b]``   = d_i Gamma^a_{kb}
* ``riemann[a, b, i, k]``  = R^a_{bik}
* ``two_form[a, b, i, k]`` = Omega_{ab} coefficient of dx^i ^ dx^k, with
  Omega_{ab} = 1/2 sum_{ik} two_form[a, b, i, k] dx^i ^ dx^k
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .curvature import ChartFrame, is_singular, select_chart
from .derivatives import DerivativeBundle, bundle, derivatives, third_method
from .errors import ChartError, ContractError, UnsupportedDimensionError

H_MANIFOLD = 1e-4
CHART_REL = 1e-8


@dataclass(frozen=True)
class MetricData:
    g: np.ndarray
    g_inv: np.ndarray
    det_g: float
    dg: np.ndarray
    frame: ChartFrame
    ddg: Optional[np.ndarray] = None

    @property
    def dim(self):
        return self.g.shape[0]


@dataclass(frozen=True)
class ConnectionData:
    gamma: np.ndarray
    dgamma: Optional[np.ndarray] = None


@dataclass(frozen=True)
class CurvatureData:
    riemann: np.ndarray
    two_form: Optional[np.ndarray] = None
    euler_density: Optional[float] = None


def _chart_derivs(b: DerivativeBundle, frame: ChartFrame):
    """Derivatives of the graph function h: slopes p_i, p_ik and (if available) p_ikl."""
    g, H, T = frame.apply(b.grad, b.hess, b.third)
    fd = g[-1]
    if is_singular(float(np.linalg.norm(b.grad)), b.value) or abs(fd) < CHART_REL * np.linalg.norm(g):
        raise ChartError(f"derivative along dependent axis {frame.dependent_axis} is {fd:.3e}")
    n = len(g) - 1
    p = -g[:n] / fd
    # tangent vectors of the graph embedded in R^d: T_i = e_i + p_i e_d
    tan = np.zeros((n, n + 1))
    tan[:, :n] = np.eye(n)
    tan[:, n] = p
    HT = tan @ H @ tan.T
    p2 = -HT / fd
    p3 = None
    if T is not None:
        # differentiate f_d p_ik + H(T_i, T_k) = 0 once more along the chart
        HdT = H[n] @ tan.T  # H(e_d, T_l)
        TTT = np.einsum("abc,ia,kb,lc->ikl", T, tan, tan, tan)
        p3 = -(
            TTT
            + p2[:, :, None] * HdT[None, None, :]
            + p2[:, None, :] * HdT[None, :, None]
            + p2[None, :, :] * HdT[:, None, None]
        ) / fd
    return g, H, p, p2, p3


def metric_at(b: DerivativeBundle, frame: ChartFrame | None = None) -> MetricData:
    """Induced metric g_ij = delta_ij + f_i f_j / f_d^2 and its first chart derivatives.

    ``dg`` follows the closed form in terms of f's first and second
    derivatives. When the bundle carries third derivatives, ``ddg`` (second
    chart derivatives of g) is filled in as well.
    """
    frame = frame or select_chart(b.grad)
    if b.d < 2:
        raise ContractError("the boundary needs d >= 2")
    grad, H, p, p2, p3 = _chart_derivs(b, frame)
    n = len(p)
    fu, fd = grad[:n], grad[n]
    g = np.eye(n) + np.outer(fu, fu) / fd ** 2
    Huu, Hud, Hdd = H[:n, :n], H[:n, n], H[n, n]
    fi = fu[None, :, None]
    fj = fu[None, None, :]
    fk = fu[:, None, None]
    dg = (
        fj * fd ** 2 * Huu.T[:, :, None]
        + fi * fd ** 2 * Huu.T[:, None, :]
        - fj * fk * fd * Hud[None, :, None]
        - fi * fk * fd * Hud[None, None, :]
        - 2 * fi * fj * fd * Hud[:, None, None]
        + 2 * fi * fj * fk * Hdd
    ) / fd ** 4
    dg = 0.5 * (dg + np.swapaxes(dg, 1, 2))
    ddg = None
    if p3 is not None:
        # d_l d_k g_ij with g_ij = delta_ij + p_i p_j
        ddg = (
            np.einsum("ikl,j->lkij", p3, p)
            + np.einsum("ik,jl->lkij", p2, p2)
            + np.einsum("il,jk->lkij", p2, p2)
            + np.einsum("i,jkl->lkij", p, p3)
        )
    try:
        chol = np.linalg.cholesky(g)
    except np.linalg.LinAlgError as exc:
        raise ChartError("induced metric is not positive definite") from exc
    det_g = float(np.prod(np.diag(chol)) ** 2)
    g_inv = np.linalg.inv(g)
    g_inv = 0.5 * (g_inv + g_inv.T)
    return MetricData(g, g_inv, det_g, dg, frame, ddg)


def _christoffel_from(g_inv, dg):
    S = np.einsum("kij->ikj", dg) + dg - np.einsum("jik->ikj", dg)
    # S[i, k, j] = d_k g_ij + d_i g_kj - d_j g_ik
    return 0.5 * np.einsum("mj,ikj->mik", g_inv, S)


def christoffel(metric: MetricData) -> ConnectionData:
    gamma = _christoffel_from(metric.g_inv, metric.dg)
    return ConnectionData(0.5 * (gamma + np.swapaxes(gamma, 1, 2)))


def solve_on_boundary(fn, x, frame: ChartFrame, tol=1e-13, max_iter=50):
    """Newton iteration on the dependent coordinate until f = 0, other coordinates fixed."""
    x = np.array(x, dtype=float)
    ax = frame.dependent_axis
    for _ in range(max_iter):
        val, grad, _, _ = derivatives(fn, x, 1)
        if grad[ax] == 0.0:
            raise ChartError("dependent derivative vanished while solving for the boundary")
        step = val / grad[ax]
        x[ax] -= step
        if abs(step) <= tol * (1.0 + abs(x[ax])):
            break
    return x


def _gamma_at(fn, x, frame):
    return christoffel(metric_at(bundle(fn, x), frame)).gamma


def christoffel_derivative(fn, x, frame: ChartFrame | None = None, method="analytic",
                           h_manifold=H_MANIFOLD):
    """``dgamma[i, a, k, b] = d_i Gamma^a_{kb}`` at a boundary point.

    ``method="analytic"`` differentiates the Christoffel formula in closed
    form, using third derivatives of f and d(g^-1) = -g^-1 (dg) g^-1.
    ``method="fd"`` takes central differences of Gamma between neighbouring
    boundary points, re-solving the dependent coordinate at each.
    """
    x = np.asarray(x, dtype=float)
    b = bundle(fn, x, want_third=(method == "analytic"))
    frame = frame or select_chart(b.grad)
    if method == "analytic":
        m = metric_at(b, frame)
        gi, dg, ddg = m.g_inv, m.dg, m.ddg
        dginv = -np.einsum("mk,lkn,nj->lmj", gi, dg, gi)
        S = np.einsum("kij->ikj", dg) + dg - np.einsum("jik->ikj", dg)
        dS = (
            np.einsum("lkij->likj", ddg)
            + np.einsum("likj->likj", ddg)
            - np.einsum("ljik->likj", ddg)
        )
        dgamma = 0.5 * np.einsum("lmj,ikj->lmik", dginv, S) + 0.5 * np.einsum("mj,likj->lmik", gi, dS)
    elif method == "fd":
        n = len(x) - 1
        dgamma = np.empty((n, n, n, n))
        for i in range(n):
            step = np.zeros(len(x))
            step[frame.permutation[i]] = h_manifold
            gp = _gamma_at(fn, solve_on_boundary(fn, x + step, frame), frame)
            gm = _gamma_at(fn, solve_on_boundary(fn, x - step, frame), frame)
            dgamma[i] = (gp - gm) / (2 * h_manifold)
    else:
        raise ContractError(f"unknown method {method!r}")
    return 0.5 * (dgamma + np.swapaxes(dgamma, 2, 3))


def riemann_tensor(conn: ConnectionData) -> CurvatureData:
    G, dG = conn.gamma, conn.dgamma
    if dG is None:
        raise ContractError("connection has no derivative data")
    R = (
        np.einsum("iakb->abik", dG)
        - np.einsum("kaib->abik", dG)
        + np.einsum("aic,ckb->abik", G, G)
        - np.einsum("akc,cib->abik", G, G)
    )
    return CurvatureData(R)


def lowered(metric: MetricData, curvature: CurvatureData):
    """R_{abik} = g_{ac} R^c_{bik}."""
    return np.einsum("ac,cbik->abik", metric.g, curvature.riemann)


def curvature_two_form(metric: MetricData, curvature: CurvatureData) -> np.ndarray:
    R = lowered(metric, curvature)
    return 0.5 * (R - np.swapaxes(R, 2, 3))


def _perm_sign(p):
    sign, p = 1, list(p)
    for i in range(len(p)):
        while p[i] != i:
            j = p[i]
            p[i], p[j] = p[j], p[i]
            sign = -sign
    return sign


def euler_form_density(metric: MetricData, curvature: CurvatureData) -> float:
    """Coefficient e of the Euler form, so chi = integral of e over chart coordinates.

    Supported for even boundary dimension 2n with n in {1, 2}.
    """
    dim = metric.dim
    if dim % 2:
        raise UnsupportedDimensionError(
            f"boundary dimension {dim} is odd; the Euler characteristic of a closed odd-dimensional manifold is 0"
        )
    n = dim // 2
    if n not in (1, 2):
        raise UnsupportedDimensionError(f"Euler density implemented for boundary dimension 2 or 4, got {dim}")
    omega = curvature.two_form if curvature.two_form is not None else curvature_two_form(metric, curvature)
    up = np.einsum("ac,bd,cdik->abik", metric.g_inv, metric.g_inv, omega)
    perms = [(p, _perm_sign(p)) for p in itertools.permutations(range(dim))]
    total = 0.0
    for sig, s_sig in perms:
        for tau, s_tau in perms:
            term = s_sig * s_tau
            for j in range(n):
                term *= up[sig[2 * j], sig[2 * j + 1], tau[2 * j], tau[2 * j + 1]]
            total += term
    # each 2-form contributes a factor 1/2 converting coefficients to the wedge basis
    total /= 2 ** n
    return math.sqrt(metric.det_g) * total / (2 ** n * (2 * math.pi) ** n * math.factorial(n))


def sectional_12(metric: MetricData, curvature: CurvatureData) -> float:
    """R_{1212} / det g; for a 2D boundary this is the Gaussian curvature."""
    return float(lowered(metric, curvature)[0, 1, 0, 1] / metric.det_g)


@dataclass(frozen=True)
class TensorReport:
    point: np.ndarray
    metric: MetricData
    connection: ConnectionData
    curvature: CurvatureData
    method_third: str
    checks: dict


def symmetry_checks(metric: MetricData, conn: ConnectionData, curv: CurvatureData) -> dict:
    """Relative residuals of the tensor symmetries (0 means exact)."""
    R = curv.riemann
    Rl = lowered(metric, curv)
    scale = max(float(np.max(np.abs(R))), 1e-300)
    lscale = max(float(np.max(np.abs(Rl))), 1e-300)
    bianchi = R + np.einsum("akbi->abik", R) + np.einsum("aikb->abik", R)
    out = {
        "metric_inverse": float(np.max(np.abs(metric.g @ metric.g_inv - np.eye(metric.dim)))),
        "dg_symmetric": float(np.max(np.abs(metric.dg - np.swapaxes(metric.dg, 1, 2)))),
        "gamma_symmetric": float(np.max(np.abs(conn.gamma - np.swapaxes(conn.gamma, 1, 2)))),
        "riemann_antisym_ik": float(np.max(np.abs(R + np.swapaxes(R, 2, 3)))) / scale,
        "riemann_antisym_ab": float(np.max(np.abs(Rl + np.swapaxes(Rl, 0, 1)))) / lscale,
        "bianchi": float(np.max(np.abs(bianchi))) / scale,
        "riemann_norm": float(np.linalg.norm(R)),
    }
    if curv.two_form is not None:
        W = curv.two_form
        out["two_form_antisym_ik"] = float(np.max(np.abs(W + np.swapaxes(W, 2, 3))))
        out["two_form_antisym_ab"] = float(np.max(np.abs(W + np.swapaxes(W, 0, 1))))
    return out


def tensors_at(fn, x, frame: ChartFrame | None = None, method="analytic") -> TensorReport:
    """Metric, connection, Riemann tensor, 2-form and Euler density at a boundary point."""
    x = np.asarray(x, dtype=float)
    b = bundle(fn, x, want_third=(method == "analytic"))
    frame = frame or select_chart(b.grad)
    m = metric_at(b, frame)
    conn = christoffel(m)
    conn = ConnectionData(conn.gamma, christoffel_derivative(fn, x, frame, method))
    curv = riemann_tensor(conn)
    omega = curvature_two_form(m, curv)
    euler = None
    if m.dim % 2 == 0 and m.dim // 2 in (1, 2):
        euler = euler_form_density(m, CurvatureData(curv.riemann, omega))
    curv = CurvatureData(curv.riemann, omega, euler)
    method_third = third_method(fn) if method == "analytic" else "none"
    return TensorReport(x, m, conn, curv, method_third, symmetry_checks(m, conn, curv))
