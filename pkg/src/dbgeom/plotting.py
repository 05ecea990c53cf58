"""Figures for reports: data scatter, boundary render, curvature histogram, loss curve.

All functions draw with the non-interactive Agg backend and write PNG files.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from mpl_toolkits.mplot3d.art3d import Poly3DCollection  # noqa: E402

MAX_RENDER_FACES = 40_000


def _save(fig, path):
    path = Path(path)
    fig.savefig(path, dpi=110, bbox_inches="tight")
    plt.close(fig)
    return path


def plot_dataset(points, labels, path, title="training data"):
    fig = plt.figure(figsize=(5, 5))
    if points.shape[1] == 3:
        ax = fig.add_subplot(projection="3d")
        for lab, color in ((0, "tab:blue"), (1, "tab:orange")):
            p = points[labels == lab]
            ax.scatter(p[:, 0], p[:, 1], p[:, 2], s=3, c=color, label=f"class {lab}")
    else:
        ax = fig.add_subplot()
        for lab, color in ((0, "tab:blue"), (1, "tab:orange")):
            p = points[labels == lab]
            ax.scatter(p[:, 0], p[:, 1], s=4, c=color, label=f"class {lab}")
        ax.set_aspect("equal")
    ax.legend(loc="upper right")
    ax.set_title(title)
    return _save(fig, path)


def render_proxy(fn, mesh, max_faces=MAX_RENDER_FACES):
    """Re-extract the surface of ``fn`` at a spacing that yields about ``max_faces`` faces,
    with Gaussian curvature per face. Used to draw very large meshes."""
    from .levelset import GridSpec, extract_surface_3d, sample_grid
    from .topology import face_curvatures

    lam = float(np.sqrt(2.0 * mesh.area / max_faces))
    lo, hi = mesh.vertices.min(axis=0) - 2 * lam, mesh.vertices.max(axis=0) + 2 * lam
    spec = GridSpec(tuple(zip(lo, hi)), lam)
    coarse = extract_surface_3d(sample_grid(fn, spec), spec, fn)
    return coarse, face_curvatures(fn, coarse, lam).K


def plot_mesh(mesh, path, values=None, title="decision boundary", seed=0, fn=None):
    """Render a triangle mesh, colored by per-face ``values`` when given.

    Meshes above MAX_RENDER_FACES are re-extracted coarser when ``fn`` is given
    and otherwise drawn from a random face subset.
    """
    if fn is not None and len(mesh.faces) > MAX_RENDER_FACES:
        mesh, proxy_vals = render_proxy(fn, mesh)
        values = None if values is None else proxy_vals
    faces = mesh.faces
    vals = None if values is None else np.asarray(values, dtype=float)
    if len(faces) > MAX_RENDER_FACES:
        keep = np.random.default_rng(seed).choice(len(faces), MAX_RENDER_FACES, replace=False)
        faces = faces[keep]
        vals = None if vals is None else vals[keep]
    tris = mesh.vertices[faces]
    fig = plt.figure(figsize=(6, 6))
    ax = fig.add_subplot(projection="3d")
    coll = Poly3DCollection(tris, linewidths=0)
    if vals is not None:
        finite = np.isfinite(vals)
        lo, hi = (np.percentile(vals[finite], [2, 98]) if finite.any() else (0.0, 1.0))
        norm = matplotlib.colors.Normalize(lo, hi if hi > lo else lo + 1)
        coll.set_facecolor(plt.cm.viridis(norm(np.where(finite, vals, lo))))
        fig.colorbar(plt.cm.ScalarMappable(norm=norm, cmap="viridis"), ax=ax, shrink=0.6, label="K")
    else:
        coll.set_facecolor("tab:cyan")
    ax.add_collection3d(coll)
    lo, hi = mesh.vertices.min(axis=0), mesh.vertices.max(axis=0)
    ax.set_xlim(lo[0], hi[0])
    ax.set_ylim(lo[1], hi[1])
    ax.set_zlim(lo[2], hi[2])
    ax.set_box_aspect(hi - lo)
    ax.set_title(title)
    return _save(fig, path)


def plot_curve(poly, path, title="decision boundary"):
    fig, ax = plt.subplots(figsize=(5, 5))
    for loop, closed in zip(poly.loops, poly.closed):
        pts = np.vstack([loop, loop[:1]]) if closed else loop
        ax.plot(pts[:, 0], pts[:, 1], lw=1)
    ax.set_aspect("equal")
    ax.set_title(title)
    return _save(fig, path)


def plot_curvature_hist(K, weights, path, title="Gaussian curvature over the boundary"):
    fig, ax = plt.subplots(figsize=(6, 4))
    K = np.asarray(K, dtype=float)
    ok = np.isfinite(K)
    ax.hist(K[ok], bins=80, weights=None if weights is None else np.asarray(weights)[ok])
    ax.set_xlabel("K")
    ax.set_ylabel("area" if weights is not None else "count")
    ax.set_title(title)
    return _save(fig, path)


def plot_losses(losses, path):
    it = [i for i, _ in losses]
    val = [v for _, v in losses]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.semilogy(np.maximum(it, 1), val)
    ax.set_xscale("log")
    ax.set_xlabel("iteration")
    ax.set_ylabel("cross-entropy")
    return _save(fig, path)


def experiment_figures(out_dir, data, result, mesh, curv, report):
    """Write the standard figure set for a trained-classifier run; returns name -> path."""
    out = Path(out_dir)
    return {
        "fig_data": plot_dataset(data.points, data.labels, out / "data.png"),
        "fig_loss": plot_losses(result.losses, out / "loss.png"),
        "fig_mesh": plot_mesh(mesh, out / "boundary.png", curv.K, fn=result.net,
                              title=f"boundary, integral of K = {report.integral_K:.3f}"),
        "fig_K": plot_curvature_hist(curv.K, mesh.per_face_area, out / "curvature_hist.png"),
    }
