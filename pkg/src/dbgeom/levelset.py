"""Explicit geometry of the zero level set: grid sampling, marching squares/cubes,
and bisection refinement of boundary samples.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .derivatives import derivatives, value
from .errors import ContractError, GridTooLargeError

DEFAULT_LAMBDA = 0.02
DEFAULT_MAX_CELLS = 64_000_000
REFINE_TOL = 1e-10
BISECT_ITERS = 80


@dataclass(frozen=True)
class GridSpec:
    bounds: tuple
    lam: float = DEFAULT_LAMBDA

    def __post_init__(self):
        b = tuple((float(lo), float(hi)) for lo, hi in self.bounds)
        object.__setattr__(self, "bounds", b)
        if not self.lam > 0:
            raise ContractError(f"grid spacing must be positive, got {self.lam}")
        for i, (lo, hi) in enumerate(b):
            if not lo < hi:
                raise ContractError(f"axis {i}: min {lo} must be below max {hi}")
        if min(self.counts) < 2:
            raise ContractError("every axis needs at least two grid points")

    @classmethod
    def cube(cls, half_width, d=3, lam=DEFAULT_LAMBDA):
        return cls(((-half_width, half_width),) * d, lam)

    @classmethod
    def around(cls, points, lam=DEFAULT_LAMBDA, inflate=0.25):
        """Bounding box of ``points`` grown by ``inflate`` of its extent on every axis."""
        P = np.asarray(points, dtype=float)
        lo, hi = P.min(axis=0), P.max(axis=0)
        pad = 0.5 * inflate * (hi - lo)
        return cls(tuple(zip(lo - pad, hi + pad)), lam)

    @property
    def dim(self):
        return len(self.bounds)

    @property
    def counts(self):
        return tuple(int(math.floor((hi - lo) / self.lam + 1e-9)) + 1 for lo, hi in self.bounds)

    @property
    def n_cells(self):
        return math.prod(c - 1 for c in self.counts)

    def axes(self):
        return [lo + self.lam * np.arange(n) for (lo, _), n in zip(self.bounds, self.counts)]

    def contains(self, P):
        P = np.atleast_2d(P)
        lo = np.array([b[0] for b in self.bounds])
        hi = np.array([b[1] for b in self.bounds])
        return np.all((P >= lo) & (P <= hi), axis=1)


def sample_grid(fn, spec: GridSpec, max_cells=DEFAULT_MAX_CELLS, chunk=1 << 18):
    """f at every grid point, shaped ``spec.counts`` with ``ij`` indexing."""
    if fn.d != spec.dim:
        raise ContractError(f"function has d={fn.d}, grid has {spec.dim} axes")
    if spec.dim not in (2, 3):
        raise ContractError("grids are 2D or 3D")
    if spec.n_cells > max_cells:
        raise GridTooLargeError(f"grid has {spec.n_cells} cells, cap is {max_cells}; raise lambda or the cap")
    axes = spec.axes()
    shape = spec.counts
    out = np.empty(shape)
    flat = out.reshape(-1)
    inner = math.prod(shape[1:])
    rows = max(1, chunk // inner)
    rest = np.stack(np.meshgrid(*axes[1:], indexing="ij"), axis=-1).reshape(-1, spec.dim - 1)
    for s in range(0, shape[0], rows):
        x0 = axes[0][s:s + rows]
        pts = np.concatenate([np.repeat(x0, len(rest))[:, None], np.tile(rest, (len(x0), 1))], axis=1)
        flat[s * inner:(s + len(x0)) * inner] = value(fn, pts)
    return out


# --- 3D surfaces ---------------------------------------------------------

@dataclass(frozen=True, eq=False)
class TriMesh:
    vertices: np.ndarray
    faces: np.ndarray

    @cached_property
    def per_face_area(self):
        if len(self.faces) == 0:
            return np.zeros(0)
        v = self.vertices
        a, b, c = v[self.faces[:, 0]], v[self.faces[:, 1]], v[self.faces[:, 2]]
        return 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)

    @property
    def area(self):
        return float(math.fsum(self.per_face_area))

    @cached_property
    def face_normals(self):
        v = self.vertices
        a, b, c = v[self.faces[:, 0]], v[self.faces[:, 1]], v[self.faces[:, 2]]
        n = np.cross(b - a, c - a)
        return n / np.linalg.norm(n, axis=1, keepdims=True)

    @property
    def centroids(self):
        return self.vertices[self.faces].mean(axis=1)

    @cached_property
    def _edge_info(self):
        F = self.faces
        directed = np.concatenate([F[:, [0, 1]], F[:, [1, 2]], F[:, [2, 0]]])
        undirected = np.sort(directed, axis=1)
        uniq, counts = np.unique(undirected, axis=0, return_counts=True)
        _, dcounts = np.unique(directed, axis=0, return_counts=True)
        return uniq, counts, dcounts

    @property
    def n_edges(self):
        return len(self._edge_info[0])

    def euler_characteristic(self):
        """Combinatorial V - E + F over referenced vertices."""
        if len(self.faces) == 0:
            return 0
        used = len(np.unique(self.faces))
        return used - self.n_edges + len(self.faces)

    def is_closed(self):
        return len(self.faces) > 0 and bool(np.all(self._edge_info[1] == 2))

    def is_oriented(self):
        """Every directed edge appears once: adjacent faces traverse shared edges oppositely."""
        uniq, counts, dcounts = self._edge_info
        return bool(np.all(dcounts == 1)) and bool(np.all(counts <= 2))

    def component_labels(self):
        """Connected component id per face (union-find over shared vertices)."""
        from scipy.sparse import coo_matrix
        from scipy.sparse.csgraph import connected_components

        nv = len(self.vertices)
        F = self.faces
        rows = np.concatenate([F[:, 0], F[:, 1]])
        cols = np.concatenate([F[:, 1], F[:, 2]])
        adj = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(nv, nv))
        _, labels = connected_components(adj, directed=False)
        _, comp = np.unique(labels[F[:, 0]], return_inverse=True)
        return comp.ravel()

    def n_components(self):
        if len(self.faces) == 0:
            return 0
        return int(self.component_labels().max()) + 1

    def subset(self, face_mask):
        return TriMesh(self.vertices, self.faces[face_mask])


def _weld(vertices, faces, tol):
    key = np.round(vertices / tol).astype(np.int64)
    _, first, inverse = np.unique(key, axis=0, return_index=True, return_inverse=True)
    faces = inverse.ravel()[faces]
    ok = (faces[:, 0] != faces[:, 1]) & (faces[:, 1] != faces[:, 2]) & (faces[:, 0] != faces[:, 2])
    return vertices[first], faces[ok]


def extract_surface_3d(field, spec: GridSpec, fn=None) -> TriMesh:
    """Triangle mesh of the zero level set, vertices linearly interpolated on cell edges.

    Faces are oriented with normals toward f > 0. Exact zeros at grid points
    produce coincident vertices; these are welded and the collapsed faces
    dropped, which preserves V - E + F.
    """
    from skimage.measure import marching_cubes

    field = np.asarray(field, dtype=float)
    if field.ndim != 3 or field.shape != spec.counts:
        raise ContractError(f"field shape {field.shape} does not match grid {spec.counts}")
    if not (np.any(field > 0) and np.any(field <= 0)):
        return TriMesh(np.zeros((0, 3)), np.zeros((0, 3), dtype=np.int64))
    verts, faces, _, _ = marching_cubes(field, 0.0, spacing=(spec.lam,) * 3, method="lewiner")
    verts = verts + np.array([lo for lo, _ in spec.bounds])
    verts, faces = _weld(verts, faces.astype(np.int64), spec.lam * 1e-9)
    mesh = TriMesh(verts, faces)
    if len(faces) == 0:
        return mesh
    if fn is not None:
        grad = derivatives(fn, mesh.centroids, 1)[1]
    else:
        gi = np.stack(np.gradient(field, spec.lam), axis=-1)
        lo = np.array([b[0] for b in spec.bounds])
        idx = np.clip(np.rint((mesh.centroids - lo) / spec.lam).astype(int), 0, np.array(spec.counts) - 1)
        grad = gi[idx[:, 0], idx[:, 1], idx[:, 2]]
    agree = np.einsum("ij,ij->i", mesh.face_normals, grad)
    if np.sum(agree < 0) > np.sum(agree > 0):
        mesh = TriMesh(verts, faces[:, ::-1].copy())
    return mesh


def write_obj(mesh: TriMesh, path):
    with open(path, "w", encoding="utf-8") as fh:
        for x, y, z in mesh.vertices.tolist():
            fh.write(f"v {x!r} {y!r} {z!r}\n")
        for f in mesh.faces + 1:
            fh.write(f"f {f[0]} {f[1]} {f[2]}\n")


def read_obj(path) -> TriMesh:
    verts, faces = [], []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            if parts[0] == "v":
                verts.append([float(p) for p in parts[1:4]])
            elif parts[0] == "f":
                faces.append([int(p.split("/")[0]) - 1 for p in parts[1:4]])
    return TriMesh(np.array(verts).reshape(-1, 3), np.array(faces, dtype=np.int64).reshape(-1, 3))


# --- 2D curves -----------------------------------------------------------

@dataclass
class Polyline:
    loops: list
    closed: list = field(default_factory=list)

    @property
    def open_flags(self):
        return [not c for c in self.closed]

    def segments(self):
        """All segments as ``(start, end)`` arrays of shape (m, 2)."""
        starts, ends = [], []
        for pts, closed in zip(self.loops, self.closed):
            nxt = np.roll(pts, -1, axis=0) if closed else pts[1:]
            cur = pts if closed else pts[:-1]
            starts.append(cur)
            ends.append(nxt)
        if not starts:
            return np.zeros((0, 2)), np.zeros((0, 2))
        return np.concatenate(starts), np.concatenate(ends)

    def length(self, i=None):
        loops = self.loops if i is None else [self.loops[i]]
        closed = self.closed if i is None else [self.closed[i]]
        return float(Polyline(loops, closed).segment_lengths().sum())

    def segment_lengths(self):
        a, b = self.segments()
        return np.linalg.norm(b - a, axis=1)


# segments per marching-squares case, as pairs of local edge ids
# corners: 0=(i,j) 1=(i+1,j) 2=(i+1,j+1) 3=(i,j+1); edges: 0=c0c1 1=c1c2 2=c2c3 3=c3c0
_MS_TABLE = {
    1: [(3, 0)], 2: [(0, 1)], 3: [(3, 1)], 4: [(1, 2)], 6: [(0, 2)], 7: [(2, 3)],
    8: [(2, 3)], 9: [(0, 2)], 11: [(1, 2)], 12: [(3, 1)], 13: [(0, 1)], 14: [(3, 0)],
}
# saddles (5: c0,c2 positive; 10: c1,c3 positive), keyed by whether the centre is positive
_MS_SADDLE = {
    (5, True): [(0, 1), (2, 3)], (5, False): [(3, 0), (1, 2)],
    (10, True): [(3, 0), (1, 2)], (10, False): [(0, 1), (2, 3)],
}


def extract_curve_2d(field, spec: GridSpec, fn=None) -> Polyline:
    """Marching squares on the zero level set.

    Saddle cells are split according to the sign of f at the cell centre,
    evaluated with ``fn`` when given and bilinearly otherwise. Chains that
    leave the grid are returned with ``closed=False``.
    """
    F = np.asarray(field, dtype=float)
    if F.ndim != 2 or F.shape != spec.counts:
        raise ContractError(f"field shape {F.shape} does not match grid {spec.counts}")
    nx, ny = F.shape
    ax, ay = spec.axes()
    pos = F > 0
    case = (pos[:-1, :-1].astype(int) | pos[1:, :-1] << 1 | pos[1:, 1:] << 2 | pos[:-1, 1:] << 3)
    n_h = (nx - 1) * ny

    def edge_ids(i, j):
        return np.stack([i * ny + j, (i + 1) * (ny - 1) + j + n_h, i * ny + j + 1, i * (ny - 1) + j + n_h], axis=-1)

    seg_edges = []
    for c, pairs in _MS_TABLE.items():
        ci, cj = np.nonzero(case == c)
        if len(ci):
            e = edge_ids(ci, cj)
            for p, q in pairs:
                seg_edges.append(np.stack([e[:, p], e[:, q]], axis=1))
    si, sj = np.nonzero((case == 5) | (case == 10))
    if len(si):
        centers = np.stack([ax[si] + 0.5 * spec.lam, ay[sj] + 0.5 * spec.lam], axis=1)
        if fn is not None:
            cval = value(fn, centers)
        else:
            cval = 0.25 * (F[si, sj] + F[si + 1, sj] + F[si + 1, sj + 1] + F[si, sj + 1])
        e = edge_ids(si, sj)
        for k in range(len(si)):
            for p, q in _MS_SADDLE[int(case[si[k], sj[k]]), bool(cval[k] > 0)]:
                seg_edges.append(np.array([[e[k, p], e[k, q]]]))
    if not seg_edges:
        return Polyline([], [])
    segs = np.concatenate(seg_edges)

    def edge_point(eid):
        if eid < n_h:
            i, j = divmod(eid, ny)
            f0, f1 = F[i, j], F[i + 1, j]
            t = f0 / (f0 - f1)
            return (ax[i] + t * spec.lam, ay[j])
        i, j = divmod(eid - n_h, ny - 1)
        f0, f1 = F[i, j], F[i, j + 1]
        t = f0 / (f0 - f1)
        return (ax[i], ay[j] + t * spec.lam)

    incident = {}
    for s, (p, q) in enumerate(segs):
        incident.setdefault(int(p), []).append(s)
        incident.setdefault(int(q), []).append(s)
    used = np.zeros(len(segs), dtype=bool)

    def walk(start_seg, start_edge):
        chain = [start_edge]
        s, e = start_seg, start_edge
        while True:
            used[s] = True
            p, q = int(segs[s, 0]), int(segs[s, 1])
            e = q if e == p else p
            if e == chain[0]:
                return chain, True
            chain.append(e)
            nxt = [t for t in incident[e] if not used[t]]
            if not nxt:
                return chain, False
            s = nxt[0]

    loops, closed = [], []
    # open chains first, started from their free ends
    for eid, segs_at in sorted(incident.items()):
        if len(segs_at) == 1 and not used[segs_at[0]]:
            chain, _ = walk(segs_at[0], eid)
            loops.append(np.array([edge_point(e) for e in chain]))
            closed.append(False)
    for s in range(len(segs)):
        if not used[s]:
            chain, is_closed = walk(s, int(segs[s, 0]))
            loops.append(np.array([edge_point(e) for e in chain]))
            closed.append(is_closed)
    return Polyline(loops, closed)


def write_polyline_csv(poly: Polyline, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["loop_id", "closed", "x", "y"])
        for k, (pts, c) in enumerate(zip(poly.loops, poly.closed)):
            for x, y in pts:
                w.writerow([k, int(c), repr(float(x)), repr(float(y))])


# --- refinement ----------------------------------------------------------

def _bisect(fn, P0, U, t_lo, t_hi, f_lo, f_hi, iters=BISECT_ITERS):
    """Vectorized bisection of t -> f(P0 + t U) on brackets with f_lo <= 0 < f_hi or the reverse."""
    lo_neg = f_lo <= 0
    for _ in range(iters):
        tm = 0.5 * (t_lo + t_hi)
        fm = value(fn, P0 + tm[:, None] * U)
        go_hi = (fm <= 0) == lo_neg
        t_lo = np.where(go_hi, tm, t_lo)
        t_hi = np.where(go_hi, t_hi, tm)
        if np.all(t_hi - t_lo <= 4e-16 * (1 + np.abs(t_lo))):
            break
    a = P0 + t_lo[:, None] * U
    b = P0 + t_hi[:, None] * U
    fa, fb = np.abs(value(fn, a)), np.abs(value(fn, b))
    return np.where((fa <= fb)[:, None], a, b), np.minimum(fa, fb)


@dataclass
class RefinedPoints:
    points: np.ndarray
    ok: np.ndarray
    residual: np.ndarray

    @property
    def dropped(self):
        return int(np.sum(~self.ok))


def refine_to_boundary(fn, P, lam, tol=REFINE_TOL):
    """Move each point along its gradient line onto f = 0 by bisection within +-2*lam.

    Points without a sign change in that window, or whose residual stays
    above ``tol``, are marked not ok.
    """
    P = np.atleast_2d(np.asarray(P, dtype=float))
    grad = derivatives(fn, P, 1)[1]
    gn = np.linalg.norm(grad, axis=1)
    U = grad / np.where(gn > 0, gn, 1.0)[:, None]
    span = 2.0 * lam
    t_lo = np.full(len(P), -span)
    t_hi = np.full(len(P), span)
    f_lo = value(fn, P + t_lo[:, None] * U)
    f_hi = value(fn, P + t_hi[:, None] * U)
    bracket = ((f_lo <= 0) != (f_hi <= 0)) & (gn > 0)
    out = P.copy()
    res = np.full(len(P), np.inf)
    if np.any(bracket):
        idx = np.nonzero(bracket)[0]
        pts, r = _bisect(fn, P[idx], U[idx], t_lo[idx], t_hi[idx], f_lo[idx], f_hi[idx])
        out[idx] = pts
        res[idx] = r
    return RefinedPoints(out, res <= tol, res)


def boundary_points(fn, geometry, lam, tol=REFINE_TOL) -> RefinedPoints:
    """One refined boundary sample per mesh face (centroid) or polyline segment (midpoint)."""
    if isinstance(geometry, TriMesh):
        seeds = geometry.centroids
    elif isinstance(geometry, Polyline):
        a, b = geometry.segments()
        seeds = 0.5 * (a + b)
    else:
        raise ContractError(f"expected TriMesh or Polyline, got {type(geometry).__name__}")
    if len(seeds) == 0:
        raise ContractError("geometry is empty")
    return refine_to_boundary(fn, seeds, lam, tol)


def sample_boundary_points(fn, n, bounds, seed=0, tol=REFINE_TOL, samples_per_line=64, max_rounds=50):
    """``n`` points on f = 0 inside ``bounds``, found on random lines through the box."""
    rng = np.random.default_rng(seed)
    lo = np.array([b[0] for b in bounds], dtype=float)
    hi = np.array([b[1] for b in bounds], dtype=float)
    d = len(lo)
    half = 0.5 * float(np.linalg.norm(hi - lo))
    found = []
    ts = np.linspace(-half, half, samples_per_line)
    for _ in range(max_rounds):
        m = max(2 * (n - len(found)), 16)
        P0 = lo + (hi - lo) * rng.random((m, d))
        U = rng.normal(size=(m, d))
        U /= np.linalg.norm(U, axis=1, keepdims=True)
        pts = P0[:, None, :] + ts[None, :, None] * U[:, None, :]
        F = value(fn, pts.reshape(-1, d)).reshape(m, len(ts))
        inside = np.all((pts >= lo) & (pts <= hi), axis=2)
        change = ((F[:, :-1] <= 0) != (F[:, 1:] <= 0)) & inside[:, :-1] & inside[:, 1:]
        has = change.any(axis=1)
        if not np.any(has):
            continue
        k = np.argmax(change, axis=1)[has]
        rows = np.nonzero(has)[0]
        pts_r, res = _bisect(fn, P0[rows], U[rows], ts[k], ts[k + 1], F[rows, k], F[rows, k + 1])
        good = res <= tol
        found.extend(pts_r[good])
        if len(found) >= n:
            return np.array(found[:n])
    raise ContractError(f"found only {len(found)} of {n} boundary points in the box")
