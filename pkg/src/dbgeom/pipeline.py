"""Synthetic two-sphere data, full-batch gradient-descent training, and the
end-to-end Euler-characteristic experiment on a trained 3D classifier."""

from __future__ import annotations

import csv
import json
import logging
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.special import expit

from .errors import ContractError, TrainingDivergedError
from .network import Activation, Layer, MlpNetwork, forward, save_model

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class LabeledDataset:
    points: np.ndarray
    labels: np.ndarray
    seed: int = 0

    def __post_init__(self):
        if len(self.points) != len(self.labels):
            raise ContractError("points and labels differ in length")

    def __len__(self):
        return len(self.labels)


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 0.5
    iters: int = 500_000
    init_std: float = 0.1
    seed: int = 1
    log_every: int = 1000

    def __post_init__(self):
        if not self.lr >= 0:
            raise ContractError("lr must be non-negative")
        if self.iters < 1:
            raise ContractError("iters must be >= 1")
        if self.init_std < 0:
            raise ContractError("init_std must be >= 0")


def gen_spheres_dataset(n_per_class=600, radii=(1.0, 2.0), seed=1) -> LabeledDataset:
    """Class 0: standard-normal draws projected to radius r1. Class 1: the same
    directions scaled to radius r2."""
    r1, r2 = radii
    if n_per_class < 1 or not 0 < r1 < r2:
        raise ContractError(f"need n_per_class >= 1 and 0 < r1 < r2, got {n_per_class}, {radii}")
    rng = np.random.default_rng(seed)
    dirs = rng.normal(size=(n_per_class, 3))
    norms = np.linalg.norm(dirs, axis=1)
    while np.any(norms == 0):
        bad = norms == 0
        dirs[bad] = rng.normal(size=(int(bad.sum()), 3))
        norms = np.linalg.norm(dirs, axis=1)
    unit = dirs / norms[:, None]
    points = np.concatenate([r1 * unit, r2 * unit])
    labels = np.concatenate([np.zeros(n_per_class, int), np.ones(n_per_class, int)])
    return LabeledDataset(points, labels, seed)


def init_network(d, widths, activation=None, init_std=0.1, seed=1) -> MlpNetwork:
    """Gaussian weights with the given std, all biases zero."""
    rng = np.random.default_rng(seed)
    layers, prev = [], d
    for w in widths:
        layers.append(Layer(rng.normal(0.0, init_std, (w, prev)), np.zeros(w)))
        prev = w
    a = rng.normal(0.0, init_std, prev)
    return MlpNetwork(tuple(layers), a, 0.0, activation or Activation.tanh())


def bce_loss(f, y):
    """Mean binary cross-entropy of logistic(f) against labels in {0, 1}."""
    return float(np.mean(np.logaddexp(0.0, f) - y * f))


def accuracy(net, data: LabeledDataset) -> float:
    f = forward(net, data.points)[0]
    return float(np.mean((f > 0) == (data.labels == 1)))


@dataclass
class TrainResult:
    net: MlpNetwork
    accuracy: float
    losses: list = field(default_factory=list)
    monotone: bool = True
    seconds: float = 0.0


def _derivative_from_output(act):
    """sigma'(z), reusing sigma(z) where a closed form in the output exists."""
    if act.name == "tanh":
        return lambda z, h: 1.0 - h * h
    if act.name == "sigmoid":
        return lambda z, h: h * (1.0 - h)
    return lambda z, h: act(z, 1)


def train(net0: MlpNetwork, data: LabeledDataset, cfg: TrainConfig) -> TrainResult:
    """Full-batch gradient descent on the mean cross-entropy of logistic(f(x))."""
    X = np.asarray(data.points, dtype=float)
    y = np.asarray(data.labels, dtype=float)
    if X.shape[1] != net0.d:
        raise ContractError(f"data has dimension {X.shape[1]}, network expects {net0.d}")
    act = net0.activation
    dact = _derivative_from_output(act)
    Ws = [l.W.copy() for l in net0.layers]
    bs = [l.b.copy() for l in net0.layers]
    a = net0.a.copy()
    c = net0.c
    n = len(y)
    losses = []
    t0 = time.perf_counter()
    for it in range(cfg.iters):
        hs, zs = [X], []
        for W, b in zip(Ws, bs):
            z = hs[-1] @ W.T + b
            zs.append(z)
            hs.append(act(z))
        f = hs[-1] @ a + c
        if it % cfg.log_every == 0 or it == cfg.iters - 1:
            loss = bce_loss(f, y)
            params_ok = all(np.isfinite(W).all() and np.isfinite(b).all() for W, b in zip(Ws, bs))
            if not (np.isfinite(loss) and params_ok and np.isfinite(a).all()):
                raise TrainingDivergedError(it, loss)
            losses.append((it, loss))
        df = (expit(f) - y) / n
        ga = hs[-1].T @ df
        gc = df.sum()
        delta = np.outer(df, a) * dact(zs[-1], hs[-1])
        for l in range(len(Ws) - 1, -1, -1):
            gW = delta.T @ hs[l]
            gb = delta.sum(axis=0)
            if l > 0:
                delta = (delta @ Ws[l]) * dact(zs[l - 1], hs[l])
            Ws[l] -= cfg.lr * gW
            bs[l] -= cfg.lr * gb
        a -= cfg.lr * ga
        c -= cfg.lr * gc
        if not np.isfinite(c):
            raise TrainingDivergedError(it, float("nan"))
    net = MlpNetwork(tuple(Layer(W, b) for W, b in zip(Ws, bs)), a, c, act)
    vals = [l for _, l in losses]
    monotone = all(b <= a_ + 1e-12 for a_, b in zip(vals, vals[1:]))
    if not monotone:
        log.warning("training loss increased within a %d-iteration window", cfg.log_every)
    return TrainResult(net, accuracy(net, data), losses, monotone, time.perf_counter() - t0)


def write_dataset_csv(data: LabeledDataset, path):
    d = data.points.shape[1]
    names = ["x", "y", "z"] if d == 3 else [f"x{i + 1}" for i in range(d)]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(names + ["label"])
        for p, l in zip(data.points, data.labels):
            w.writerow([repr(float(v)) for v in p] + [int(l)])


def read_dataset_csv(path, seed=0) -> LabeledDataset:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ContractError(f"{path} is empty")
    header = rows[0]
    body = rows[1:] if not _is_numeric(header) else rows
    arr = np.array([[float(v) for v in r] for r in body if r])
    return LabeledDataset(arr[:, :-1], arr[:, -1].astype(int), seed)


def _is_numeric(row):
    try:
        [float(v) for v in row]
        return True
    except ValueError:
        return False


# --- end-to-end experiment ----------------------------------------------

@dataclass(frozen=True)
class ExperimentConfig:
    n_per_class: int = 600
    radii: tuple = (1.0, 2.0)
    hidden: int = 40
    activation: str = "tanh"
    lr: float = 0.5
    iters: int = 500_000
    init_std: float = 0.1
    data_seed: int = 1
    init_seed: int = 1
    lam: float = 0.02
    inflate: float = 0.25
    figures: bool = True


def run_experiment_43(out_dir, cfg: ExperimentConfig | None = None, **overrides):
    """Generate data, train, extract the boundary, integrate K, write artifacts.

    Returns ``(TopologyReport, artifacts)`` where ``artifacts`` maps names to
    paths inside ``out_dir``. On failure the exception carries a ``stage``
    attribute and files written so far are kept.
    """
    from . import levelset, topology

    cfg = replace(cfg or ExperimentConfig(), **overrides)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    artifacts = {}
    handler = logging.FileHandler(out / "log.txt", mode="w", encoding="utf-8")
    handler.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(name)s: %(message)s"))
    root = logging.getLogger("dbgeom")
    root.addHandler(handler)
    root.setLevel(logging.INFO)
    artifacts["log"] = out / "log.txt"
    stage = "setup"
    try:
        stage = "gen-data"
        data = gen_spheres_dataset(cfg.n_per_class, tuple(cfg.radii), cfg.data_seed)
        write_dataset_csv(data, out / "data.csv")
        artifacts["data"] = out / "data.csv"
        log.info("dataset: %d points, seed %d", len(data), cfg.data_seed)

        stage = "train"
        act = Activation(cfg.activation)
        net0 = init_network(3, [cfg.hidden], act, cfg.init_std, cfg.init_seed)
        tcfg = TrainConfig(cfg.lr, cfg.iters, cfg.init_std, cfg.init_seed)
        result = train(net0, data, tcfg)
        save_model(result.net, out / "model.json")
        artifacts["model"] = out / "model.json"
        log.info("trained %d iterations in %.1fs, accuracy %.4f, final loss %.6f",
                 cfg.iters, result.seconds, result.accuracy, result.losses[-1][1])

        stage = "extract"
        spec = levelset.GridSpec.around(data.points, cfg.lam, cfg.inflate)
        field_ = levelset.sample_grid(result.net, spec)
        mesh = levelset.extract_surface_3d(field_, spec, result.net)
        levelset.write_obj(mesh, out / "mesh.obj")
        artifacts["mesh"] = out / "mesh.obj"
        log.info("grid %s, mesh with %d vertices and %d faces", spec.counts, len(mesh.vertices), len(mesh.faces))

        stage = "integrate"
        curv = topology.face_curvatures(result.net, mesh, cfg.lam)
        report = topology.euler_characteristic(result.net, mesh, cfg.lam, curv)
        payload = {
            "topology": report.to_dict(),
            "training": {
                "accuracy": result.accuracy,
                "final_loss": result.losses[-1][1],
                "loss_monotone": result.monotone,
                "seconds": result.seconds,
            },
            "config": asdict(cfg),
            "grid": {"bounds": spec.bounds, "counts": spec.counts},
        }
        (out / "report.json").write_text(json.dumps(payload, indent=2), encoding="utf-8")
        artifacts["report"] = out / "report.json"
        log.info("integral of K = %.6f, chi estimate %.4f", report.integral_K, report.chi_estimate)

        if cfg.figures:
            stage = "figures"
            from . import plotting

            artifacts.update(plotting.experiment_figures(out, data, result, mesh, curv, report))
        return report, artifacts, result
    except Exception as exc:
        exc.stage = stage
        log.exception("experiment failed during %s", stage)
        raise
    finally:
        root.removeHandler(handler)
        handler.close()
