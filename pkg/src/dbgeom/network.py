"""Fully-connected feed-forward networks f(x) = a^T s(W^L ... s(W^1 x + b^1) ... + b^L) + c.

Networks are immutable. Every evaluation routine accepts either a single
point of shape ``(d,)`` or a batch of shape ``(n, d)``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.special import expit

from .errors import ContractError, ModelParseError

TOL_BOUNDARY = 1e-9


@dataclass(frozen=True)
class Activation:
    """Smooth, strictly increasing activation with closed-form derivatives up to order 3."""

    name: str
    alpha: float = 1.0

    def __post_init__(self):
        if self.name not in ("tanh", "sigmoid", "softplus"):
            raise ContractError(f"unknown activation {self.name!r}")
        if self.name == "softplus" and not (self.alpha > 0 and math.isfinite(self.alpha)):
            raise ContractError(f"softplus alpha must be positive, got {self.alpha}")

    @classmethod
    def tanh(cls):
        return cls("tanh")

    @classmethod
    def sigmoid(cls):
        return cls("sigmoid")

    @classmethod
    def softplus(cls, alpha=1.0):
        return cls("softplus", float(alpha))

    def __call__(self, t, order=0):
        return activation_eval(self, t, order)

    def to_json(self):
        if self.name == "softplus":
            return {"softplus": {"alpha": self.alpha}}
        return self.name

    def __str__(self):
        return f"softplus(alpha={self.alpha:g})" if self.name == "softplus" else self.name


def _logistic_pair(t):
    # l and 1 - l, each evaluated without cancellation
    return expit(t), expit(-t)


def activation_eval(kind: Activation, t, order: int = 0):
    """Value or derivative of order 0..3 of the activation, elementwise."""
    if order not in (0, 1, 2, 3):
        raise ContractError(f"derivative order must be 0..3, got {order}")
    t = np.asarray(t, dtype=float)
    if kind.name == "tanh":
        s = np.tanh(t)
        if order == 0:
            return s
        sech2 = 1.0 - s * s
        if order == 1:
            return sech2
        if order == 2:
            return -2.0 * s * sech2
        return -2.0 * sech2 * (1.0 - 3.0 * s * s)
    if kind.name == "sigmoid":
        l, m = _logistic_pair(t)
        if order == 0:
            return l
        if order == 1:
            return l * m
        if order == 2:
            return l * m * (m - l)
        return l * m * (1.0 - 6.0 * l * m)
    # softplus: (1/alpha) log(1 + exp(alpha t))
    al = kind.alpha
    u = al * t
    if order == 0:
        return np.logaddexp(0.0, u) / al
    l, m = _logistic_pair(u)
    if order == 1:
        return l
    if order == 2:
        return al * l * m
    return al * al * l * m * (m - l)


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Layer:
    W: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "W", _frozen(self.W))
        object.__setattr__(self, "b", _frozen(self.b))


@dataclass(frozen=True, eq=False)
class MlpNetwork:
    layers: tuple
    a: np.ndarray
    c: float
    activation: Activation = field(default_factory=Activation.tanh)

    def __post_init__(self):
        layers = tuple(l if isinstance(l, Layer) else Layer(*l) for l in self.layers)
        object.__setattr__(self, "layers", layers)
        object.__setattr__(self, "a", _frozen(self.a))
        object.__setattr__(self, "c", float(self.c))
        if not layers:
            raise ContractError("network needs at least one hidden layer")
        prev = None
        for i, layer in enumerate(layers, start=1):
            W, b = layer.W, layer.b
            if W.ndim != 2 or W.shape[0] < 1 or W.shape[1] < 1:
                raise ContractError(f"layers[{i}].W must be a non-empty matrix, got shape {W.shape}")
            if b.shape != (W.shape[0],):
                raise ContractError(f"layers[{i}].b has shape {b.shape}, expected ({W.shape[0]},)")
            if prev is not None and W.shape[1] != prev:
                raise ContractError(f"layers[{i}].W has {W.shape[1]} columns, previous layer width is {prev}")
            prev = W.shape[0]
        if self.a.shape != (prev,):
            raise ContractError(f"a has shape {self.a.shape}, expected ({prev},)")

    @property
    def d(self) -> int:
        return self.layers[0].W.shape[1]

    @property
    def depth(self) -> int:
        return len(self.layers)

    @property
    def widths(self) -> list[int]:
        return [l.W.shape[0] for l in self.layers]

    def __call__(self, x):
        return forward(self, x)[0]

    def replace(self, **changes) -> "MlpNetwork":
        kw = dict(layers=self.layers, a=self.a, c=self.c, activation=self.activation)
        kw.update(changes)
        return MlpNetwork(**kw)

    def __eq__(self, other):
        if not isinstance(other, MlpNetwork):
            return NotImplemented
        return (
            self.activation == other.activation
            and self.c == other.c
            and np.array_equal(self.a, other.a)
            and len(self.layers) == len(other.layers)
            and all(
                np.array_equal(p.W, q.W) and np.array_equal(p.b, q.b)
                for p, q in zip(self.layers, other.layers)
            )
        )

    __hash__ = None


def random_network(d, widths, activation=None, seed=0, scale=1.0, rng=None):
    """Gaussian random network, mostly for tests. ``c`` is chosen so f(0) = 0."""
    rng = np.random.default_rng(seed) if rng is None else rng
    activation = activation or Activation.tanh()
    layers, prev = [], d
    for w in widths:
        layers.append(Layer(rng.normal(0.0, scale, (w, prev)), rng.normal(0.0, 0.5 * scale, w)))
        prev = w
    a = rng.normal(0.0, 1.0, prev)
    net = MlpNetwork(tuple(layers), a, 0.0, activation)
    return net.replace(c=-forward(net, np.zeros(d))[0])


def _check_input(net, x):
    x = np.asarray(x, dtype=float)
    if x.ndim not in (1, 2) or x.shape[-1] != net.d:
        raise ContractError(f"input has shape {x.shape}, network expects last axis of length {net.d}")
    return x


def forward(net: MlpNetwork, x):
    """Evaluate f and return ``(f, preacts)``.

    ``preacts[l]`` holds x^{l+1} = W^{l+1} h^l + b^{l+1}, the pre-activation of
    hidden layer l+1, with the same leading shape as ``x``.
    """
    x = _check_input(net, x)
    h = x
    preacts = []
    for layer in net.layers:
        z = h @ layer.W.T + layer.b
        preacts.append(z)
        h = net.activation(z)
    return h @ net.a + net.c, preacts


def evaluate(net: MlpNetwork, X, chunk=1 << 16):
    """Batched f over an ``(n, d)`` array, chunked to bound memory."""
    X = _check_input(net, np.atleast_2d(X))
    out = np.empty(len(X))
    for s in range(0, len(X), chunk):
        out[s:s + chunk] = forward(net, X[s:s + chunk])[0]
    return out


def predict_class(net, x, tol=TOL_BOUNDARY):
    f = float(forward(net, _check_input(net, x).reshape(-1))[0])
    if abs(f) <= tol:
        return "boundary"
    return "positive" if f > 0 else "negative"


# --- model files ---------------------------------------------------------

def to_dict(net: MlpNetwork) -> dict:
    return {
        "activation": net.activation.to_json(),
        "layers": [{"W": l.W.tolist(), "b": l.b.tolist()} for l in net.layers],
        "a": net.a.tolist(),
        "c": net.c,
    }


def _number(value, path):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ModelParseError(path, f"expected a number, got {type(value).__name__}")
    if not math.isfinite(value):
        raise ModelParseError(path, "non-finite number")
    return float(value)


def _vector(value, path):
    if not isinstance(value, list) or not value:
        raise ModelParseError(path, "expected a non-empty array of numbers")
    return [_number(v, f"{path}[{i}]") for i, v in enumerate(value)]


def _activation_from_json(spec):
    if spec in ("tanh", "sigmoid"):
        return Activation(spec)
    if isinstance(spec, dict) and set(spec) == {"softplus"}:
        inner = spec["softplus"]
        if not isinstance(inner, dict) or set(inner) != {"alpha"}:
            raise ModelParseError("activation.softplus", "expected {\"alpha\": <number>}")
        alpha = _number(inner["alpha"], "activation.softplus.alpha")
        if alpha <= 0:
            raise ModelParseError("activation.softplus.alpha", "must be positive")
        return Activation.softplus(alpha)
    raise ModelParseError("activation", f"unknown activation {spec!r}")


def from_dict(obj) -> MlpNetwork:
    if not isinstance(obj, dict):
        raise ModelParseError("$", "model must be a JSON object")
    for key in ("activation", "layers", "a", "c"):
        if key not in obj:
            raise ModelParseError(key, "missing field")
    act = _activation_from_json(obj["activation"])
    if not isinstance(obj["layers"], list) or not obj["layers"]:
        raise ModelParseError("layers", "expected a non-empty array")
    layers, prev = [], None
    for i, entry in enumerate(obj["layers"]):
        p = f"layers[{i}]"
        if not isinstance(entry, dict) or "W" not in entry or "b" not in entry:
            raise ModelParseError(p, "expected an object with W and b")
        if not isinstance(entry["W"], list) or not entry["W"]:
            raise ModelParseError(f"{p}.W", "expected a non-empty array of rows")
        rows = [_vector(r, f"{p}.W[{j}]") for j, r in enumerate(entry["W"])]
        ncol = len(rows[0])
        for j, r in enumerate(rows):
            if len(r) != ncol:
                raise ModelParseError(f"{p}.W[{j}]", f"row has {len(r)} entries, expected {ncol}")
        if prev is not None and ncol != prev:
            raise ModelParseError(f"{p}.W", f"{ncol} columns but previous layer has width {prev}")
        b = _vector(entry["b"], f"{p}.b")
        if len(b) != len(rows):
            raise ModelParseError(f"{p}.b", f"length {len(b)} does not match {len(rows)} rows of W")
        layers.append(Layer(np.array(rows), np.array(b)))
        prev = len(rows)
    a = _vector(obj["a"], "a")
    if len(a) != prev:
        raise ModelParseError("a", f"length {len(a)} does not match last layer width {prev}")
    c = _number(obj["c"], "c")
    return MlpNetwork(tuple(layers), np.array(a), c, act)


def save_model(net: MlpNetwork, path) -> None:
    Path(path).write_text(json.dumps(to_dict(net), indent=1), encoding="utf-8")


def load_model(path) -> MlpNetwork:
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ModelParseError("$", f"invalid JSON: {exc}") from exc
    return from_dict(obj)


def from_arrays(Ws: Sequence, bs: Sequence, a, c=0.0, activation=None) -> MlpNetwork:
    return MlpNetwork(tuple(Layer(W, b) for W, b in zip(Ws, bs)), a, c, activation or Activation.tanh())
