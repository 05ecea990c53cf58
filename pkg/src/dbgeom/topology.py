"""Euler characteristic of closed decision surfaces by integrating Gaussian curvature."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .curvature import gaussian_curvature_arrays, is_singular, signed_planar_curvature_arrays
from .derivatives import derivatives
from .errors import ContractError
from .levelset import Polyline, TriMesh, boundary_points


@dataclass(frozen=True)
class TopologyReport:
    integral_K: float
    chi_estimate: float
    chi_rounded: int
    chi_mesh: int
    components: int
    dropped_faces: int
    lam: float
    n_faces: int
    area: float
    closed: bool
    oriented: bool

    @property
    def compact(self):
        return self.closed

    def to_dict(self):
        out = asdict(self)
        out["lambda"] = out.pop("lam")
        return out


def nearest_even(x: float) -> int:
    return int(2 * round(x / 2.0))


@dataclass
class CurvatureField:
    """Per-face Gaussian curvature at refined representative points."""

    K: np.ndarray
    points: np.ndarray
    valid: np.ndarray


def face_curvatures(fn, mesh: TriMesh, lam) -> CurvatureField:
    ref = boundary_points(fn, mesh, lam)
    val, grad, hess, _ = derivatives(fn, ref.points, 2)
    K = gaussian_curvature_arrays(grad, hess)
    gn = np.linalg.norm(grad, axis=1)
    valid = ref.ok & ~is_singular(gn, np.abs(val)) & np.isfinite(K)
    return CurvatureField(K, ref.points, valid)


def integrate_gaussian_curvature(fn, mesh: TriMesh, lam, field: CurvatureField | None = None):
    """Sum of K(representative point) * face area; returns ``(integral, dropped_faces)``."""
    if len(mesh.faces) == 0:
        return 0.0, 0
    field = field or face_curvatures(fn, mesh, lam)
    terms = field.K[field.valid] * mesh.per_face_area[field.valid]
    return math.fsum(terms), int(np.sum(~field.valid))


def euler_characteristic(fn, mesh: TriMesh, lam, field: CurvatureField | None = None) -> TopologyReport:
    if len(mesh.faces) == 0:
        raise ContractError("mesh is empty; there is no boundary inside the grid")
    integral, dropped = integrate_gaussian_curvature(fn, mesh, lam, field)
    chi = integral / (2 * math.pi)
    return TopologyReport(
        integral_K=integral,
        chi_estimate=chi,
        chi_rounded=nearest_even(chi),
        chi_mesh=int(mesh.euler_characteristic()),
        components=mesh.n_components(),
        dropped_faces=dropped,
        lam=float(lam),
        n_faces=len(mesh.faces),
        area=mesh.area,
        closed=mesh.is_closed(),
        oriented=mesh.is_oriented(),
    )


def total_turning_2d(fn, poly: Polyline, lam, loop=None) -> float:
    """Sum of signed curvature times segment length over closed loops.

    Curvature is signed with respect to grad f, so a simple loop around an
    f < 0 region gives +2*pi and one around an f > 0 region gives -2*pi.
    """
    idx = range(len(poly.loops)) if loop is None else [loop]
    loops, closed = [], []
    for i in idx:
        if not poly.closed[i]:
            raise ContractError(f"loop {i} is an open chain; turning is defined for closed loops only")
        loops.append(poly.loops[i])
        closed.append(True)
    sub = Polyline(loops, closed)
    ref = boundary_points(fn, sub, lam)
    _, grad, hess, _ = derivatives(fn, ref.points, 2)
    k = signed_planar_curvature_arrays(grad, hess)
    ds = sub.segment_lengths()
    ok = ref.ok & np.isfinite(k)
    return math.fsum(k[ok] * ds[ok])
