"""Input-space derivatives of a network output: gradient, Hessian, third-order tensor.

The gradient uses one backward sweep over the cached pre-activations. The
Hessian is exact for any depth, propagating per-layer Jacobians and Hessian
blocks forward. The third-order tensor is exact for one hidden layer and a
central difference of the exact Hessian otherwise.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ContractError
from .network import MlpNetwork, _check_input, forward

# finite-difference steps, all central differences
FD_STEP_GRAD = 1e-5
FD_STEP_HESS = 1e-4
FD_STEP_THIRD = 1e-4

CHUNK = 4096


@dataclass(frozen=True)
class DerivativeBundle:
    value: float
    grad: np.ndarray
    hess: np.ndarray
    third: Optional[np.ndarray] = None
    method_third: Optional[str] = None

    @property
    def d(self):
        return len(self.grad)


def _symmetrize3(T):
    perms = list(itertools.permutations((-3, -2, -1)))
    out = np.zeros_like(T)
    for p in perms:
        out += np.moveaxis(T, (-3, -2, -1), p)
    return out / len(perms)


def _backward(net, preacts):
    act = net.activation
    delta = net.a * act(preacts[-1], 1)
    for l in range(net.depth - 1, 0, -1):
        delta = (delta @ net.layers[l].W) * act(preacts[l - 1], 1)
    return delta @ net.layers[0].W


def gradient(net: MlpNetwork, x):
    x = _check_input(net, x)
    return _backward(net, forward(net, x)[1])


def _hessian_from_cache(net, x, preacts):
    act = net.activation
    if net.depth == 1:
        W = net.layers[0].W
        s2 = act(preacts[0], 2)
        return np.einsum("i,...i,ip,iq->...pq", net.a, s2, W, W)
    lead = x.shape[:-1]
    Jz = np.broadcast_to(net.layers[0].W, lead + net.layers[0].W.shape)
    Hz = None
    for l, layer in enumerate(net.layers):
        if l > 0:
            Jz = np.einsum("ij,...jp->...ip", layer.W, Jh)
            Hz = np.einsum("ij,...jpq->...ipq", layer.W, Hh)
        z = preacts[l]
        s1, s2 = act(z, 1), act(z, 2)
        Jh = s1[..., None] * Jz
        Hh = s2[..., None, None] * Jz[..., :, None] * Jz[..., None, :]
        if Hz is not None:
            Hh = Hh + s1[..., None, None] * Hz
    H = np.einsum("i,...ipq->...pq", net.a, Hh)
    return 0.5 * (H + np.swapaxes(H, -1, -2))


def hessian(net: MlpNetwork, x):
    x = _check_input(net, x)
    return _hessian_from_cache(net, x, forward(net, x)[1])


def third_derivatives(net: MlpNetwork, x, h=FD_STEP_THIRD):
    """Rank-3 tensor f_{pqr}; exact for one hidden layer, central FD of the Hessian otherwise."""
    x = _check_input(net, x)
    if net.depth == 1:
        W = net.layers[0].W
        s3 = net.activation(forward(net, x)[1][0], 3)
        return np.einsum("i,...i,ip,iq,ir->...pqr", net.a, s3, W, W, W)
    d = net.d
    T = np.empty(x.shape[:-1] + (d, d, d))
    for r in range(d):
        e = np.zeros(d)
        e[r] = h
        T[..., r] = (hessian(net, x + e) - hessian(net, x - e)) / (2 * h)
    return _symmetrize3(T)


def third_method(fn):
    if isinstance(fn, MlpNetwork) and fn.depth > 1:
        return "finite-difference"
    return "exact"


def derivatives(fn, X, order=2):
    """Batched ``(value, grad, hess, third)`` for a network or an implicit function.

    Entries above ``order`` are None. ``X`` may be ``(d,)`` or ``(n, d)``.
    """
    if order not in (1, 2, 3):
        raise ContractError(f"order must be 1, 2 or 3, got {order}")
    if not isinstance(fn, MlpNetwork):
        return fn.derivatives(np.asarray(X, dtype=float), order)
    X = _check_input(fn, X)
    if X.ndim == 2 and len(X) > CHUNK:
        parts = [derivatives(fn, X[s:s + CHUNK], order) for s in range(0, len(X), CHUNK)]
        return tuple(None if p[0] is None else np.concatenate(p) for p in zip(*parts))
    val, preacts = forward(fn, X)
    grad = _backward(fn, preacts)
    hess = _hessian_from_cache(fn, X, preacts) if order >= 2 else None
    third = third_derivatives(fn, X) if order >= 3 else None
    return val, grad, hess, third


def value(fn, X):
    """Batched function value for a network or an implicit function."""
    if isinstance(fn, MlpNetwork):
        X = _check_input(fn, X)
        if X.ndim == 2 and len(X) > 4 * CHUNK:
            return np.concatenate([forward(fn, X[s:s + 4 * CHUNK])[0] for s in range(0, len(X), 4 * CHUNK)])
        return forward(fn, X)[0]
    return fn.value(X)


def bundle(fn, x, want_third=False) -> DerivativeBundle:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ContractError("bundle expects a single point; use derivatives() for batches")
    val, grad, hess, third = derivatives(fn, x, 3 if want_third else 2)
    return DerivativeBundle(
        float(val), grad, hess, third, third_method(fn) if want_third else None
    )


def _rel_err(approx, exact):
    scale = max(float(np.max(np.abs(exact))), 1e-12)
    return float(np.max(np.abs(approx - exact))) / scale


def fd_gradient(fn, x, h=FD_STEP_GRAD):
    x = np.asarray(x, dtype=float)
    E = np.eye(len(x)) * h
    return (value(fn, x + E) - value(fn, x - E)) / (2 * h)


def fd_hessian(fn, x, h=FD_STEP_HESS):
    """Central differences of the analytic gradient, symmetrized."""
    x = np.asarray(x, dtype=float)
    E = np.eye(len(x)) * h
    gp = derivatives(fn, x + E, 1)[1]
    gm = derivatives(fn, x - E, 1)[1]
    H = (gp - gm) / (2 * h)
    return 0.5 * (H + H.T)


def fd_third(fn, x, h=FD_STEP_THIRD):
    """Nested central differences of the analytic gradient (no Hessian involved)."""
    x = np.asarray(x, dtype=float)
    d = len(x)
    T = np.empty((d, d, d))
    for p in range(d):
        for q in range(d):
            ep = np.zeros(d)
            eq = np.zeros(d)
            ep[p] = h
            eq[q] = h
            pts = np.array([x + ep + eq, x + ep - eq, x - ep + eq, x - ep - eq])
            g = derivatives(fn, pts, 1)[1]
            T[p, q] = (g[0] - g[1] - g[2] + g[3]) / (4 * h * h)
    return _symmetrize3(T)


def fd_check(fn, x, h=None) -> dict:
    """Maximum relative discrepancy between analytic and finite-difference derivatives.

    With ``h=None`` each order uses its documented default step; an explicit
    ``h`` is used for all three orders. Never raises on large errors.
    """
    if h is not None and not h > 0:
        raise ContractError("finite-difference step must be positive")
    x = np.asarray(x, dtype=float)
    b = bundle(fn, x, want_third=True)
    return {
        "grad": _rel_err(b.grad, fd_gradient(fn, x, h or FD_STEP_GRAD)),
        "hess": _rel_err(b.hess, fd_hessian(fn, x, h or FD_STEP_HESS)),
        "third": _rel_err(b.third, fd_third(fn, x, h or FD_STEP_THIRD)),
        "method_third": b.method_third,
    }
