"""Command-line interface: ``dbgeom <subcommand> ...``.

Tabular results go to stdout as CSV, structured results as JSON. Failures
print ``error [<stage>]: <message>`` to stderr and exit with status 1.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import flatness, levelset, pipeline, topology
from .curvature import curvature_at
from .derivatives import FD_STEP_GRAD, FD_STEP_HESS, FD_STEP_THIRD, fd_check
from .errors import ContractError
from .network import Activation, forward, load_model, random_network, save_model

DERIV_TOL = {"grad": 1e-6, "hess": 1e-5, "third": 1e-3}


class StageError(Exception):
    def __init__(self, stage, cause):
        super().__init__(str(cause))
        self.stage = stage
        self.cause = cause


def _stage(name, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except StageError:
        raise
    except Exception as exc:  # any failure is reported with the stage it happened in
        raise StageError(getattr(exc, "stage", name), exc) from exc


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _emit_json(obj, out=None):
    text = json.dumps(obj, indent=2, default=_json_default, allow_nan=True)
    (out or sys.stdout).write(text + "\n")


def parse_floats(text, name="value"):
    try:
        return [float(v) for v in text.replace(";", ",").split(",") if v.strip()]
    except ValueError as exc:
        raise ContractError(f"{name}: expected comma-separated numbers, got {text!r}") from exc


def parse_bounds(text, d):
    """``"lo,hi"`` for every axis, or ``"lo,hi;lo,hi;..."`` per axis."""
    parts = [p for p in text.split(";") if p.strip()]
    pairs = [parse_floats(p, "bounds") for p in parts]
    if len(pairs) == 1 and len(pairs[0]) == 2:
        pairs = pairs * d
    elif len(pairs) == 1 and len(pairs[0]) == 2 * d:
        flat = pairs[0]
        pairs = [flat[2 * i: 2 * i + 2] for i in range(d)]
    if len(pairs) != d or any(len(p) != 2 for p in pairs):
        raise ContractError(f"bounds {text!r} do not describe {d} axes")
    return tuple(tuple(p) for p in pairs)


def parse_activation(text):
    if text.startswith("softplus"):
        alpha = 1.0
        if ":" in text:
            alpha = float(text.split(":", 1)[1])
        return Activation.softplus(alpha)
    return Activation(text)


def read_points_csv(path, d):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    if rows and not pipeline._is_numeric(rows[0]):
        rows = rows[1:]
    P = np.array([[float(v) for v in r[:d]] for r in rows], dtype=float)
    if P.ndim != 2 or P.shape[1] != d:
        raise ContractError(f"{path}: expected {d} coordinates per row")
    return P


# --- subcommands ---------------------------------------------------------

def cmd_check_derivs(args):
    rng = np.random.default_rng(args.seed)
    if args.model:
        nets = [("model", _stage("load", load_model, args.model))]
    else:
        acts = [Activation.tanh(), Activation.sigmoid(), Activation.softplus(1.0)]
        nets = []
        for act in acts:
            for k in range(args.nets):
                widths = [int(rng.integers(3, 9))] if k % 2 == 0 else [int(rng.integers(3, 7)), int(rng.integers(3, 7))]
                nets.append((str(act), random_network(args.dim, widths, act, rng=rng, scale=0.8)))
    worst = {"grad": 0.0, "hess": 0.0, "third": 0.0}
    per = []
    for label, net in nets:
        X = rng.normal(size=(args.points, net.d))
        errs = _stage("check", lambda: [fd_check(net, x) for x in X])
        row = {"activation": label, "widths": net.widths}
        for key in worst:
            m = max(e[key] for e in errs)
            row[key] = m
            worst[key] = max(worst[key], m)
        row["method_third"] = errs[0]["method_third"]
        per.append(row)
    report = {
        "steps": {"grad": FD_STEP_GRAD, "hess": FD_STEP_HESS, "third": FD_STEP_THIRD},
        "tolerance": DERIV_TOL,
        "max_rel_error": worst,
        "pass": all(worst[k] <= DERIV_TOL[k] for k in worst),
        "networks": per,
    }
    _emit_json(report)
    return 0 if report["pass"] else 1


def cmd_curvature(args):
    net = _stage("load", load_model, args.model)
    P = _stage("read-points", read_points_csv, args.points, net.d)
    samples = _stage("curvature", curvature_at, net, P)
    w = csv.writer(sys.stdout)
    w.writerow(["point", "k" if net.d == 2 else "K", "grad_norm", "flag"])
    for s in samples:
        w.writerow([" ".join(repr(float(v)) for v in s.point), repr(float(s.value)), repr(s.grad_norm), s.flag])
    return 0


def cmd_tensors(args):
    from .riemann import tensors_at

    net = _stage("load", load_model, args.model)
    x = np.array(_stage("parse", parse_floats, args.point, "point"))
    if len(x) != net.d:
        raise StageError("parse", ContractError(f"point has {len(x)} coordinates, model expects {net.d}"))
    rep = _stage("tensors", tensors_at, net, x, None, args.method)
    m, c, k = rep.metric, rep.connection, rep.curvature
    _emit_json({
        "point": rep.point,
        "f": float(forward(net, x)[0]),
        "dependent_axis": m.frame.dependent_axis,
        "permutation": list(m.frame.permutation),
        "g": m.g,
        "det_g": m.det_g,
        "christoffel": c.gamma,
        "riemann": k.riemann,
        "two_form": k.two_form,
        "euler_density": k.euler_density,
        "method_third": rep.method_third,
        "checks": rep.checks,
    })
    return 0


def _extract(net, lam, bounds):
    spec = _stage("grid", levelset.GridSpec, bounds, lam)
    field = _stage("sample", levelset.sample_grid, net, spec)
    if net.d == 3:
        return spec, _stage("extract", levelset.extract_surface_3d, field, spec, net)
    if net.d == 2:
        return spec, _stage("extract", levelset.extract_curve_2d, field, spec, net)
    raise StageError("extract", ContractError(f"level-set extraction supports d = 2 or 3, got {net.d}"))


def cmd_extract(args):
    net = _stage("load", load_model, args.model)
    bounds = _stage("parse", parse_bounds, args.bounds, net.d)
    spec, geom = _extract(net, args.lam, bounds)
    if net.d == 3:
        _stage("write", levelset.write_obj, geom, args.out)
        summary = {"vertices": len(geom.vertices), "faces": len(geom.faces),
                   "chi_mesh": geom.euler_characteristic(), "closed": geom.is_closed()}
    else:
        _stage("write", levelset.write_polyline_csv, geom, args.out)
        summary = {"loops": len(geom.loops), "closed": [bool(c) for c in geom.closed],
                   "length": geom.length()}
    summary.update({"out": args.out, "grid": spec.counts})
    if args.figure:
        from . import plotting

        fig = plotting.plot_mesh(geom, args.figure, fn=net) if net.d == 3 else plotting.plot_curve(geom, args.figure)
        summary["figure"] = fig
    _emit_json(summary)
    return 0


def cmd_euler(args):
    net = _stage("load", load_model, args.model)
    if net.d != 3:
        raise StageError("parse", ContractError(f"euler needs a 3D model, got d={net.d}"))
    if args.data:
        data = _stage("read-data", pipeline.read_dataset_csv, args.data)
        spec0 = levelset.GridSpec.around(data.points, args.lam, args.inflate)
        bounds = spec0.bounds
    else:
        bounds = _stage("parse", parse_bounds, args.bounds, 3)
    _, mesh = _extract(net, args.lam, bounds)
    if args.mesh_out:
        _stage("write", levelset.write_obj, mesh, args.mesh_out)
    curv = _stage("integrate", topology.face_curvatures, net, mesh, args.lam)
    rep = _stage("integrate", topology.euler_characteristic, net, mesh, args.lam, curv)
    out = rep.to_dict()
    if args.figure:
        from . import plotting

        out["figure"] = plotting.plot_mesh(mesh, args.figure, curv.K, fn=net)
    _emit_json(out)
    return 0


def cmd_check_flat(args):
    net = _stage("load", load_model, args.model)
    verdicts = _stage("check", flatness.check_flat, net)
    _emit_json({
        "d": net.d,
        "widths": net.widths,
        "verdicts": [v.to_dict() for v in verdicts],
        "any_satisfied": any(v.satisfied for v in verdicts),
    })
    return 0


def cmd_make_flat(args):
    act = parse_activation(args.act)
    net = _stage("construct", flatness.make_flat_network, args.case, args.dims, args.seed, act, args.axis)
    _stage("write", save_model, net, args.out)
    v = flatness.verdict_for_case(flatness.check_flat(net), args.case.lower().replace("_", "-"), args.axis)
    _emit_json({"out": args.out, "verdict": v.to_dict()})
    return 0


def cmd_gen_data(args):
    radii = _stage("parse", parse_floats, args.radii, "radii")
    if len(radii) != 2:
        raise StageError("parse", ContractError("radii must be two numbers r1,r2"))
    data = _stage("gen-data", pipeline.gen_spheres_dataset, args.n, tuple(radii), args.seed)
    _stage("write", pipeline.write_dataset_csv, data, args.out)
    _emit_json({"out": args.out, "points": len(data)})
    return 0


def cmd_train(args):
    data = _stage("read-data", pipeline.read_dataset_csv, args.data)
    widths = [int(w) for w in str(args.hidden).split(",")]
    act = parse_activation(args.act)
    net0 = pipeline.init_network(data.points.shape[1], widths, act, args.init_std, args.seed)
    cfg = _stage("train", pipeline.TrainConfig, args.lr, args.iters, args.init_std, args.seed)
    res = _stage("train", pipeline.train, net0, data, cfg)
    _stage("write", save_model, res.net, args.out)
    _emit_json({"out": args.out, "accuracy": res.accuracy, "final_loss": res.losses[-1][1],
                "loss_monotone": res.monotone, "seconds": res.seconds})
    return 0


def cmd_experiment43(args):
    overrides = {"iters": args.iters, "lam": args.lam, "data_seed": args.seed, "init_seed": args.seed,
                 "figures": not args.no_figures}
    report, artifacts, res = _stage("experiment", pipeline.run_experiment_43, args.out, **overrides)
    _emit_json({"topology": report.to_dict(), "accuracy": res.accuracy,
                "artifacts": {k: str(v) for k, v in artifacts.items()}})
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="dbgeom", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("check-derivs", help="compare analytic derivatives with finite differences")
    s.add_argument("--model")
    s.add_argument("--nets", type=int, default=10, help="random networks per activation")
    s.add_argument("--points", type=int, default=50)
    s.add_argument("--dim", type=int, default=3)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_check_derivs)

    s = sub.add_parser("curvature", help="k (2D) or K (3D) at points from a CSV file")
    s.add_argument("--model", required=True)
    s.add_argument("--points", required=True)
    s.set_defaults(func=cmd_curvature)

    s = sub.add_parser("tensors", help="metric, connection and curvature tensors at a boundary point")
    s.add_argument("--model", required=True)
    s.add_argument("--point", required=True)
    s.add_argument("--method", choices=["analytic", "fd"], default="analytic")
    s.set_defaults(func=cmd_tensors)

    s = sub.add_parser("extract", help="extract the zero level set on a grid")
    s.add_argument("--model", required=True)
    s.add_argument("--lambda", dest="lam", type=float, default=levelset.DEFAULT_LAMBDA)
    s.add_argument("--bounds", required=True, help='"lo,hi" for every axis or "lo,hi;lo,hi;lo,hi"')
    s.add_argument("--out", required=True)
    s.add_argument("--figure")
    s.set_defaults(func=cmd_extract)

    s = sub.add_parser("euler", help="Euler characteristic of the boundary by integrating K")
    s.add_argument("--model", required=True)
    s.add_argument("--lambda", dest="lam", type=float, default=levelset.DEFAULT_LAMBDA)
    s.add_argument("--bounds", default="-2.5,2.5")
    s.add_argument("--data", help="derive bounds from this dataset's bounding box")
    s.add_argument("--inflate", type=float, default=0.25)
    s.add_argument("--mesh-out")
    s.add_argument("--figure")
    s.set_defaults(func=cmd_euler)

    s = sub.add_parser("check-flat", help="evaluate the flatness weight conditions")
    s.add_argument("--model", required=True)
    s.set_defaults(func=cmd_check_flat)

    s = sub.add_parser("make-flat", help="build a network satisfying a flatness condition")
    s.add_argument("--case", required=True, choices=flatness.CASES)
    s.add_argument("--dims", required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--act", default="tanh")
    s.add_argument("--axis", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_make_flat)

    s = sub.add_parser("gen-data", help="points on two concentric spheres")
    s.add_argument("--n", type=int, default=600, help="points per class")
    s.add_argument("--radii", default="1,2")
    s.add_argument("--seed", type=int, default=1)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_gen_data)

    s = sub.add_parser("train", help="full-batch gradient descent on a CSV dataset")
    s.add_argument("--data", required=True)
    s.add_argument("--hidden", default="40", help="width, or comma-separated widths")
    s.add_argument("--act", default="tanh", help="tanh, sigmoid, softplus or softplus:<alpha>")
    s.add_argument("--lr", type=float, default=0.5)
    s.add_argument("--iters", type=int, default=500_000)
    s.add_argument("--init-std", type=float, default=0.1)
    s.add_argument("--seed", type=int, default=1)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("experiment43", help="train on two spheres and report the boundary topology")
    s.add_argument("--out", required=True)
    s.add_argument("--iters", type=int, default=500_000)
    s.add_argument("--lambda", dest="lam", type=float, default=0.02)
    s.add_argument("--seed", type=int, default=1)
    s.add_argument("--no-figures", action="store_true")
    s.set_defaults(func=cmd_experiment43)
    return p


VALUE_OPTIONS = ("--bounds", "--point", "--radii")


def _attach_values(argv):
    """Join ``--bounds -1,1`` into ``--bounds=-1,1`` so negative numbers are not read as flags."""
    out, i = [], 0
    while i < len(argv):
        if argv[i] in VALUE_OPTIONS and i + 1 < len(argv):
            out.append(f"{argv[i]}={argv[i + 1]}")
            i += 2
        else:
            out.append(argv[i])
            i += 1
    return out


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    args = build_parser().parse_args(_attach_values(argv))
    try:
        return args.func(args)
    except StageError as exc:
        print(f"error [{exc.stage}]: {type(exc.cause).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
