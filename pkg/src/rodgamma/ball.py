"""Quadrature and polynomial bases on the unit ball of R^m."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.special import gammaln, roots_jacobi, roots_legendre

Array = np.ndarray


def ball_volume(m: int) -> float:
    return float(np.exp(0.5 * m * np.log(np.pi) - gammaln(0.5 * m + 1.0)))


def sphere_rule(m: int, degree: int) -> tuple[Array, Array]:
    """Nodes/weights on S^{m-1} in R^m, exact for polynomials of total degree <= degree."""
    if m == 1:
        return np.array([[-1.0], [1.0]]), np.array([1.0, 1.0])
    if m == 2:
        K = degree + 1
        th = 2 * np.pi * (np.arange(K) + 0.5) / K
        return np.stack([np.cos(th), np.sin(th)], axis=1), np.full(K, 2 * np.pi / K)
    a = 0.5 * (m - 3)
    nt = degree // 2 + 1
    t, wt = roots_jacobi(nt, a, a)
    sub_x, sub_w = sphere_rule(m - 1, degree)
    s = np.sqrt(1.0 - t**2)
    nodes = np.concatenate(
        [
            (s[:, None, None] * sub_x[None, :, :]).reshape(-1, m - 1),
            np.repeat(t, len(sub_w))[:, None],
        ],
        axis=1,
    )
    return nodes, np.outer(wt, sub_w).ravel()


@lru_cache(maxsize=None)
def _ball_rule_cached(m: int, degree: int):
    if m == 1:
        x, w = roots_legendre(degree // 2 + 1)
        return x[:, None], w
    nr = degree // 2 + 1
    u, wu = roots_jacobi(nr, 0.0, m - 1.0)
    r = 0.5 * (1.0 + u)
    wr = wu / 2.0**m
    th, wth = sphere_rule(m, degree)
    nodes = (r[:, None, None] * th[None, :, :]).reshape(-1, m)
    return nodes, np.outer(wr, wth).ravel()


def ball_rule(m: int, degree: int = 10) -> tuple[Array, Array]:
    """Nodes (N, m) and weights (N,) with sum(w) = |B_1|; exact up to total degree."""
    x, w = _ball_rule_cached(int(m), int(degree))
    return x.copy(), w.copy()


def monomial_integral(alpha) -> float:
    """Exact integral of x^alpha over the unit ball."""
    alpha = np.asarray(alpha, int)
    if np.any(alpha % 2):
        return 0.0
    b = 0.5 * (alpha + 1.0)
    m = len(alpha)
    return float(2.0 * np.exp(np.sum(gammaln(b)) - gammaln(np.sum(b))) / (alpha.sum() + m))


def monomial_average(alpha) -> float:
    return monomial_integral(alpha) / ball_volume(len(alpha))


def ball_moments(m: int, degree: int = 10) -> dict:
    """Second and fourth moments of x_1 averaged over B_1(0) in R^m."""
    x, w = ball_rule(m, degree)
    vol = ball_volume(m)
    return {
        "I2": 1.0 / (m + 2),
        "I4": 3.0 / ((m + 2) * (m + 4)),
        "I2_quad": float(w @ x[:, 0] ** 2 / vol),
        "I4_quad": float(w @ x[:, 0] ** 4 / vol),
    }


def monomial_exponents(m: int, degree: int) -> list[tuple[int, ...]]:
    """Graded lexicographic order: by total degree, then lexicographically descending."""
    out = []
    for d in range(degree + 1):
        block = [e for e in itertools.product(range(d + 1), repeat=m) if sum(e) == d]
        block.sort(reverse=True)
        out.extend(block)
    return out


@dataclass(eq=False)
class PolyBasis:
    """Monomials of total degree <= degree in m variables (graded lex)."""

    m: int
    degree: int
    exps: Array = field(init=False)

    def __post_init__(self):
        self.exps = np.array(monomial_exponents(self.m, self.degree), dtype=int).reshape(-1, self.m)
        self._index = {tuple(e): i for i, e in enumerate(self.exps)}

    def __len__(self):
        return len(self.exps)

    def index(self, e) -> int:
        return self._index[tuple(int(v) for v in e)]

    def eval(self, X) -> Array:
        X = np.asarray(X, float)
        return np.prod(X[..., None, :] ** self.exps, axis=-1)

    def grad(self, X) -> Array:
        """(..., nmon, m) partial derivatives of every monomial."""
        X = np.asarray(X, float)
        out = np.empty(X.shape[:-1] + (len(self.exps), self.m))
        for j in range(self.m):
            e = self.exps.copy()
            c = e[:, j].astype(float)
            e[:, j] = np.maximum(e[:, j] - 1, 0)
            out[..., j] = c * np.prod(X[..., None, :] ** e, axis=-1)
        return out

    def averages(self, shift=None) -> Array:
        """Ball averages of x^(e + shift) for every monomial e."""
        sh = np.zeros(self.m, int) if shift is None else np.asarray(shift, int)
        return np.array([monomial_average(e + sh) for e in self.exps])
