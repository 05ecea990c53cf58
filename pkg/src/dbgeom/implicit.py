"""Closed-form implicit functions used as geometric test oracles.

An :class:`ImplicitFunction` wraps a sympy expression and exposes the same
batched value/derivative interface as a network, so every curvature and
extraction routine accepts either.
"""

from __future__ import annotations

import itertools

import numpy as np
import sympy as sp


class ImplicitFunction:
    """f: R^d -> R given symbolically; derivatives up to order 3 are exact."""

    def __init__(self, expr, symbols, name="f"):
        self.expr = sp.sympify(expr)
        self.symbols = tuple(symbols)
        self.name = name
        d = len(self.symbols)
        xs = self.symbols
        self._f = sp.lambdify(xs, self.expr, "numpy")
        grad = [sp.diff(self.expr, s) for s in xs]
        hess = [[sp.diff(g, s) for s in xs] for g in grad]
        self._g = [sp.lambdify(xs, g, "numpy") for g in grad]
        self._h = {}
        self._t = {}
        for i, j in itertools.combinations_with_replacement(range(d), 2):
            self._h[i, j] = sp.lambdify(xs, hess[i][j], "numpy")
        for i, j, k in itertools.combinations_with_replacement(range(d), 3):
            self._t[i, j, k] = sp.lambdify(xs, sp.diff(hess[i][j], xs[k]), "numpy")

    @property
    def d(self):
        return len(self.symbols)

    def __repr__(self):
        return f"ImplicitFunction({self.name}: {self.expr})"

    def __call__(self, x):
        return self.value(x)

    @staticmethod
    def _cols(X):
        return [X[..., i] for i in range(X.shape[-1])]

    def value(self, X):
        X = np.asarray(X, dtype=float)
        return np.broadcast_to(self._f(*self._cols(X)), X.shape[:-1]).astype(float)

    def derivatives(self, X, order=2):
        """Return ``(value, grad, hess, third)``; entries above ``order`` are None."""
        X = np.asarray(X, dtype=float)
        cols = self._cols(X)
        lead = X.shape[:-1]
        d = self.d
        val = self.value(X)
        grad = np.stack([np.broadcast_to(g(*cols), lead) for g in self._g], axis=-1).astype(float)
        hess = third = None
        if order >= 2:
            hess = np.empty(lead + (d, d))
            for (i, j), fn in self._h.items():
                hess[..., i, j] = hess[..., j, i] = fn(*cols)
        if order >= 3:
            third = np.empty(lead + (d, d, d))
            for (i, j, k), fn in self._t.items():
                v = fn(*cols)
                for p in set(itertools.permutations((i, j, k))):
                    third[(Ellipsis,) + p] = v
        return val, grad, hess, third


def _xyz(d=3):
    return sp.symbols(" ".join(f"x{i + 1}" for i in range(d)), real=True)


def sphere(radius=1.0, center=(0.0, 0.0, 0.0)):
    xs = _xyz(len(center))
    expr = sum((s - c) ** 2 for s, c in zip(xs, center)) - radius ** 2
    return ImplicitFunction(expr, xs, f"sphere(r={radius})")


def circle(radius=1.0, center=(0.0, 0.0)):
    return sphere(radius, center)


def hypersphere(d, radius=1.0):
    return sphere(radius, (0.0,) * d)


def torus(major=2.0, minor=0.5):
    x, y, z = xs = _xyz(3)
    expr = (sp.sqrt(x ** 2 + y ** 2) - major) ** 2 + z ** 2 - minor ** 2
    return ImplicitFunction(expr, xs, f"torus(R={major}, r={minor})")


def two_spheres(radius=1.0, offset=2.0):
    """Product of two sphere functions: the zero set is two disjoint spheres."""
    x, y, z = xs = _xyz(3)
    s1 = (x - offset) ** 2 + y ** 2 + z ** 2 - radius ** 2
    s2 = (x + offset) ** 2 + y ** 2 + z ** 2 - radius ** 2
    return ImplicitFunction(s1 * s2, xs, "two_spheres")


def double_torus(scale=1.0, thickness=0.15):
    """Genus-2 surface: a tube of the lemniscate (x^2+y^2)^2 = x^2 - y^2.

    The tube is g^2 + z^2 = thickness^2 with g the lemniscate polynomial; it is
    smooth and of genus 2 while thickness < 1/4 (the critical value of |g|).
    """
    x, y, z = xs = _xyz(3)
    u, v, w = x / scale, y / scale, z / scale
    g = (u ** 2 + v ** 2) ** 2 - u ** 2 + v ** 2
    return ImplicitFunction(g ** 2 + w ** 2 - thickness ** 2, xs, "double_torus")


def linear(coeffs, offset=0.0):
    xs = _xyz(len(coeffs))
    return ImplicitFunction(sum(c * s for c, s in zip(coeffs, xs)) + offset, xs, "linear")
