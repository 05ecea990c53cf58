"""Weight conditions that force flat or developable decision boundaries.

Checkers evaluate the algebraic conditions on stored weights; constructors
build networks that satisfy a chosen condition exactly. The conditions are
sufficient only: a violated condition says nothing about curvature.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .derivatives import derivatives
from .errors import ConstructionError, ContractError
from .network import Activation, Layer, MlpNetwork, forward

TOL_COND = 1e-12
RANK_REL = 1e-10

CASES = ("t61a", "t61b", "t63a", "t63b", "t64-linear", "t64-axis")


@dataclass(frozen=True)
class ConditionVerdict:
    condition: str
    satisfied: bool
    max_violation: float
    witness: Optional[tuple] = None

    def to_dict(self):
        return {
            "condition": self.condition,
            "satisfied": self.satisfied,
            "max_violation": self.max_violation,
            "witness": None if self.witness is None else list(self.witness),
        }


def _verdict(name, violation, witness):
    violation = float(violation)
    return ConditionVerdict(name, violation <= TOL_COND, violation, witness)


def _one_hidden(net, d):
    if net.depth != 1:
        raise ContractError(f"condition applies to one-hidden-layer networks, got {net.depth} layers")
    if net.d != d:
        raise ContractError(f"condition applies to d={d}, got d={net.d}")
    return net.a, net.layers[0].W


def _axis_or_condition(a, W, name):
    # one input column q with a_i W_iq = 0 for every unit i; the witness is that column
    per_column = np.max(np.abs(a[:, None] * W), axis=0)
    q = int(np.argmin(per_column))
    return _verdict(name, per_column[q], (q,))


def _pair_minor_condition(a, W, p, q, name):
    M = np.abs(np.outer(a, a) * (np.outer(W[:, p], W[:, q]) - np.outer(W[:, q], W[:, p])))
    i, j = np.unravel_index(int(np.argmax(M)), M.shape)
    return _verdict(name, M[i, j], (int(i), int(j)))


def check_t61(net: MlpNetwork):
    """2D input, one hidden layer: (a) a_i W_i1 = 0 for every i, or a_i W_i2 = 0 for every i;
    (b) a_i a_j (W_i1 W_j2 - W_i2 W_j1) = 0 for every i, j."""
    a, W = _one_hidden(net, 2)
    return [_axis_or_condition(a, W, "t61a"), _pair_minor_condition(a, W, 0, 1, "t61b")]


def check_t63(net: MlpNetwork):
    """3D input, one hidden layer: (a) some column q has a_i W_iq = 0 for every i;
    (b) a_i a_j (W_i2 W_j3 - W_i3 W_j2) = 0 for every i, j."""
    a, W = _one_hidden(net, 3)
    return [_axis_or_condition(a, W, "t63a"), _pair_minor_condition(a, W, 1, 2, "t63b")]


def chain_screen(net: MlpNetwork):
    """For each first-layer unit n: the sum and the max over all index chains of
    |a_i W^L_ij ... W^2_mn|. Both vanish exactly when every chain product does."""
    s = np.abs(net.a)
    m = np.abs(net.a)
    for layer in reversed(net.layers[1:]):
        A = np.abs(layer.W)
        s = s @ A
        m = np.max(m[:, None] * A, axis=0)
    return s, m


def _rank_excess(rows):
    """How far a set of row vectors is from spanning at most one direction."""
    if len(rows) <= 1:
        return 0.0
    sv = np.linalg.svd(rows, compute_uv=False)
    if sv[0] == 0.0:
        return 0.0
    return max(0.0, float(sv[1]) - RANK_REL * float(sv[0]))


def check_t64(net: MlpNetwork):
    """Deep networks: chains into first-layer unit n vanish, and the remaining
    first-layer rows are collinear (linear case) or have zero q-th entries
    (axis case, one verdict per axis q). The best unit n is reported as witness."""
    if net.depth < 2:
        raise ContractError("use check_t61 / check_t63 for one-hidden-layer networks")
    _, chain_max = chain_screen(net)
    W1 = net.layers[0].W
    d1 = W1.shape[0]
    lin = []
    axis = {q: [] for q in range(net.d)}
    for n in range(d1):
        rest = np.delete(W1, n, axis=0)
        lin.append(max(chain_max[n], _rank_excess(rest)))
        for q in range(net.d):
            axis[q].append(max(chain_max[n], float(np.max(np.abs(rest[:, q]), initial=0.0))))
    n_best = int(np.argmin(lin))
    out = [_verdict("t64-linear", lin[n_best], (n_best,))]
    for q in range(net.d):
        nq = int(np.argmin(axis[q]))
        out.append(_verdict(f"t64-axis({q})", axis[q][nq], (nq, q)))
    return out


def check_flat(net: MlpNetwork):
    """Every condition applicable to the network's architecture."""
    if net.depth >= 2:
        return check_t64(net)
    if net.d == 2:
        return check_t61(net)
    if net.d == 3:
        return check_t63(net)
    return []


# --- constructors --------------------------------------------------------

def _dyadic(rng, size, denom=8, lo=1, hi=16):
    """Nonzero dyadic rationals k/denom, so products and differences are exact in floats."""
    k = rng.integers(lo, hi + 1, size=size) * rng.choice([-1, 1], size=size)
    return k / denom


def _center(net: MlpNetwork, d):
    """Shift c so the origin lies on the boundary; the gradient there must not vanish."""
    net = net.replace(c=0.0)
    f0 = float(forward(net, np.zeros(d))[0])
    net = net.replace(c=-f0)
    g = derivatives(net, np.zeros(d), 1)[1]
    if not np.linalg.norm(g) > 1e-6:
        raise ConstructionError("boundary through the origin is singular; try another seed")
    return net


def parse_dims(dims):
    """``"3x40"`` -> (3, [40]); ``"4x8x6"`` -> (4, [8, 6])."""
    if isinstance(dims, str):
        parts = [int(p) for p in dims.lower().split("x")]
    else:
        parts = [int(p) for p in dims]
    if len(parts) < 2 or min(parts) < 1:
        raise ContractError(f"dims must be d x width [x width ...], got {dims!r}")
    return parts[0], parts[1:]


def make_flat_network(case, dims, seed=0, activation=None, axis=0) -> MlpNetwork:
    """A network satisfying the named condition exactly, with its boundary through the origin.

    ``case`` is one of :data:`CASES`; ``dims`` is ``d x width [x width ...]``.
    For the axis case ``axis`` selects the coordinate the boundary is straight along.
    """
    case = case.lower().replace("_", "-")
    if case not in CASES:
        raise ContractError(f"unknown case {case!r}; expected one of {CASES}")
    d, widths = parse_dims(dims)
    act = activation or Activation.tanh()
    rng = np.random.default_rng(seed)
    if case.startswith("t61") or case.startswith("t63"):
        want_d = 2 if case.startswith("t61") else 3
        if d != want_d or len(widths) != 1:
            raise ContractError(f"{case} needs dims {want_d}x<width>, got {dims!r}")
        h = widths[0]
        W = _dyadic(rng, (h, d))
        if case in ("t61a", "t63a"):
            W[:, axis] = 0.0
        elif case == "t61b":
            W = np.outer(_dyadic(rng, h), _dyadic(rng, 2))
        else:
            W[:, 1:] = np.outer(_dyadic(rng, h), _dyadic(rng, 2))
        b = rng.normal(0.0, 0.5, h)
        a = _dyadic(rng, h)
        net = MlpNetwork((Layer(W, b),), a, 0.0, act)
        return _center(net, d)

    if len(widths) < 2:
        raise ContractError(f"{case} needs at least two hidden layers, got dims {dims!r}")
    if widths[0] < 2:
        raise ContractError("first hidden layer needs width >= 2")
    n = int(rng.integers(widths[0]))
    layers = []
    W1 = rng.normal(0.0, 1.0, (widths[0], d))
    if case == "t64-linear":
        rows = np.outer(_dyadic(rng, widths[0]), _dyadic(rng, d))
        W1 = np.where(np.arange(widths[0])[:, None] == n, W1, rows)
    else:
        if not 0 <= axis < d:
            raise ContractError(f"axis {axis} out of range for d={d}")
        keep = np.arange(widths[0]) != n
        W1[keep, axis] = 0.0
    layers.append(Layer(W1, rng.normal(0.0, 0.5, widths[0])))
    prev = widths[0]
    for k, w in enumerate(widths[1:]):
        W = rng.normal(0.0, 1.0, (w, prev))
        if k == 0:
            W[:, n] = 0.0  # cut every chain into unit n at the second layer
        layers.append(Layer(W, rng.normal(0.0, 0.5, w)))
        prev = w
    a = rng.normal(0.0, 1.0, prev)
    return _center(MlpNetwork(tuple(layers), a, 0.0, act), d)


def verdict_for_case(verdicts, case, axis=0):
    name = f"t64-axis({axis})" if case == "t64-axis" else case
    return next(v for v in verdicts if v.condition == name)
