"""Curvature of the implicit boundary f = 0 in 2D (planar k) and 3D (Gaussian K).

Both formulas treat the boundary locally as a graph over the coordinates other
than a *dependent axis*. The chart puts the dependent axis last; by default it
is the axis with the largest gradient component.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .derivatives import DerivativeBundle, derivatives
from .errors import ChartError, ContractError, SingularPointError

SINGULAR_REL = 1e-8
WEAK_GRADIENT_REL = 1e-5


@dataclass(frozen=True)
class ChartFrame:
    dependent_axis: int
    permutation: tuple

    def __post_init__(self):
        if sorted(self.permutation) != list(range(len(self.permutation))):
            raise ContractError(f"{self.permutation} is not a permutation")
        if self.permutation[-1] != self.dependent_axis:
            raise ContractError("the dependent axis must be placed last")

    @classmethod
    def for_axis(cls, axis, d):
        if not 0 <= axis < d:
            raise ContractError(f"axis {axis} out of range for d={d}")
        return cls(axis, tuple(i for i in range(d) if i != axis) + (axis,))

    def apply(self, grad, hess=None, third=None):
        """Reorder derivative arrays (trailing axes) into chart order."""
        p = list(self.permutation)
        g = np.asarray(grad)[..., p]
        h = None if hess is None else np.asarray(hess)[..., p, :][..., :, p]
        t = None if third is None else np.asarray(third)[..., p, :, :][..., :, p, :][..., :, :, p]
        return g, h, t


@dataclass(frozen=True)
class CurvatureSample:
    point: np.ndarray
    value: float
    frame: ChartFrame
    grad_norm: float
    flag: str = "ok"


def is_singular(grad_norm, f=0.0):
    return grad_norm < SINGULAR_REL * (1.0 + abs(f))


def select_chart(grad) -> ChartFrame:
    """Dependent axis = argmax |grad_i| (lowest index on ties)."""
    grad = np.asarray(grad, dtype=float)
    if not np.any(grad):
        raise SingularPointError("gradient is zero; no chart exists")
    return ChartFrame.for_axis(int(np.argmax(np.abs(grad))), len(grad))


def _check_bundle(b, d):
    if b.d != d:
        raise ContractError(f"expected a {d}D derivative bundle, got {b.d}D")
    gn = float(np.linalg.norm(b.grad))
    if is_singular(gn, b.value):
        raise SingularPointError(f"|grad f| = {gn:.3e} below singularity threshold")
    return gn


def _planar_terms(g, H):
    fx, fy = g[..., 0], g[..., 1]
    fxx, fxy, fyy = H[..., 0, 0], H[..., 0, 1], H[..., 1, 1]
    return fx, fy, fxx, fxy, fyy


def planar_curvature_arrays(grad, hess):
    """Vectorized planar curvature, each point in its best chart.

    Returns NaN where the dependent derivative vanishes.
    """
    grad = np.asarray(grad, dtype=float)
    hess = np.asarray(hess, dtype=float)
    swap = np.abs(grad[..., 0]) >= np.abs(grad[..., 1])
    g = np.where(swap[..., None], grad[..., ::-1], grad)
    H = np.where(swap[..., None, None], hess[..., ::-1, ::-1], hess)
    fx, fy, fxx, fxy, fyy = _planar_terms(g, H)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = (fxx * fy ** 2 - 2 * fx * fy * fxy + fx ** 2 * fyy) / fy ** 3
        return np.abs(ratio) * (1 + fx ** 2 / fy ** 2) ** -1.5


def planar_curvature(b: DerivativeBundle, frame: ChartFrame | None = None) -> float:
    """Unsigned planar curvature k of the level curve through the bundle's point."""
    _check_bundle(b, 2)
    frame = frame or select_chart(b.grad)
    g, H, _ = frame.apply(b.grad, b.hess)
    fx, fy, fxx, fxy, fyy = _planar_terms(g, H)
    if fy == 0.0:
        raise ChartError(f"f along dependent axis {frame.dependent_axis} is zero")
    k = abs((fxx * fy ** 2 - 2 * fx * fy * fxy + fx ** 2 * fyy) / fy ** 3)
    return float(k * (1 + fx ** 2 / fy ** 2) ** -1.5)


def signed_planar_curvature(b: DerivativeBundle) -> float:
    """Divergence of the unit normal grad f/|grad f| along the curve.

    Positive where the curve bends toward the f < 0 side, so a circle
    with f < 0 inside has k = +1/r. Chart-free.
    """
    _check_bundle(b, 2)
    fx, fy, fxx, fxy, fyy = _planar_terms(b.grad, b.hess)
    num = fxx * fy ** 2 - 2 * fx * fy * fxy + fx ** 2 * fyy
    return float(num / np.hypot(fx, fy) ** 3)


def signed_planar_curvature_arrays(grad, hess):
    fx, fy, fxx, fxy, fyy = _planar_terms(np.asarray(grad), np.asarray(hess))
    with np.errstate(divide="ignore", invalid="ignore"):
        return (fxx * fy ** 2 - 2 * fx * fy * fxy + fx ** 2 * fyy) / np.hypot(fx, fy) ** 3


def _gauss_terms(g, H):
    fx, fy, fz = g[..., 0], g[..., 1], g[..., 2]
    fxx, fyy, fzz = H[..., 0, 0], H[..., 1, 1], H[..., 2, 2]
    fxy, fxz, fyz = H[..., 0, 1], H[..., 0, 2], H[..., 1, 2]
    A = 2 * fx * fz * fxz - fxx * fz ** 2 - fzz * fx ** 2
    B = 2 * fy * fz * fyz - fyy * fz ** 2 - fzz * fy ** 2
    C = fx * fz * fyz + fy * fz * fxz - fx * fy * fzz - fxy * fz ** 2
    den = fz ** 2 * (fx ** 2 + fy ** 2 + fz ** 2) ** 2
    return A * B - C ** 2, den


def gaussian_curvature(b: DerivativeBundle, frame: ChartFrame | None = None) -> float:
    """Signed Gaussian curvature K of the level surface through the bundle's point."""
    _check_bundle(b, 3)
    frame = frame or select_chart(b.grad)
    g, H, _ = frame.apply(b.grad, b.hess)
    num, den = _gauss_terms(g, H)
    if den == 0.0:
        raise ChartError(f"f along dependent axis {frame.dependent_axis} is zero")
    return float(num / den)


def gaussian_curvature_arrays(grad, hess):
    """Vectorized Gaussian curvature, each point charted on its largest gradient axis."""
    grad = np.asarray(grad, dtype=float)
    hess = np.asarray(hess, dtype=float)
    axis = np.argmax(np.abs(grad), axis=-1)
    perms = np.array([[1, 2, 0], [0, 2, 1], [0, 1, 2]])[axis]
    g = np.take_along_axis(grad, perms, axis=-1)
    H = np.take_along_axis(hess, perms[..., :, None], axis=-2)
    H = np.take_along_axis(H, perms[..., None, :], axis=-1)
    num, den = _gauss_terms(g, H)
    with np.errstate(divide="ignore", invalid="ignore"):
        return num / den


def curvature_at(fn, points):
    """Curvature (k for d=2, K for d=3) at each point with a quality flag.

    Returns a list of CurvatureSample. Singular points get NaN and flag
    ``"singular"``; points with a weak gradient are computed but flagged.
    """
    P = np.atleast_2d(np.asarray(points, dtype=float))
    d = P.shape[1]
    if d not in (2, 3):
        raise ContractError(f"curvature_at supports d = 2 or 3, got {d}")
    val, grad, hess, _ = derivatives(fn, P, 2)
    out = []
    for i in range(len(P)):
        gn = float(np.linalg.norm(grad[i]))
        b = DerivativeBundle(float(val[i]), grad[i], hess[i])
        if is_singular(gn, val[i]):
            out.append(CurvatureSample(P[i], float("nan"), ChartFrame.for_axis(d - 1, d), gn, "singular"))
            continue
        frame = select_chart(grad[i])
        value = planar_curvature(b, frame) if d == 2 else gaussian_curvature(b, frame)
        flag = "weak_gradient" if gn < WEAK_GRADIENT_REL * (1.0 + abs(val[i])) else "ok"
        out.append(CurvatureSample(P[i], value, frame, gn, flag))
    return out
