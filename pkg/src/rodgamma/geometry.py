"""Coordinate charts, Christoffel symbols and the Riemann tensor.

Index conventions used throughout:

* ``dg[..., i, j, a] = d_a g_ij`` and ``d2g[..., i, j, a, b] = d_a d_b g_ij``
* ``Gamma[..., k, i, j]`` is the Christoffel symbol with upper index k
* ``R[..., i, j, k, l] = g(e_i, Rm(e_k, e_l) e_j)`` where
  ``Rm(X, Y) Z = nabla_X nabla_Y Z - nabla_Y nabla_X Z - nabla_[X,Y] Z``.
  With this choice a space of constant curvature K has
  ``R_ijkl = K (g_ik g_jl - g_il g_jk)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import ChartValidityError, ConventionError, DomainError
from .expr import parse_metric_source

Array = np.ndarray


@dataclass(frozen=True, eq=False)
class Chart:
    """A single coordinate patch carrying a metric field.

    ``metric_fn`` maps points of shape (..., n) to (..., n, n).  When the
    analytic derivative closures are missing, central finite differences
    with steps ``eta1`` (first) and ``eta2`` (second) are used.
    """

    n: int
    lower: Array
    upper: Array
    metric_fn: Callable[[Array], Array]
    dmetric_fn: Optional[Callable[[Array], Array]] = None
    d2metric_fn: Optional[Callable[[Array], Array]] = None
    eta1: float = 1e-5
    eta2: float = 1e-4
    name: str = "chart"
    curvature_K: Optional[float] = None
    r_inj: float = 10.0
    valid_fn: Optional[Callable[[Array], Array]] = field(default=None, repr=False)
    christoffel_fn: Optional[Callable[[Array], Array]] = field(default=None, repr=False)
    # gradient of the log conformal factor, when the metric is conformally flat
    conformal_dphi: Optional[Callable[[Array], Array]] = field(default=None, repr=False)

    @property
    def analytic(self) -> bool:
        return self.dmetric_fn is not None and self.d2metric_fn is not None

    def contains(self, x) -> Array:
        x = np.asarray(x, dtype=float)
        ok = np.all((x > self.lower) & (x < self.upper), axis=-1)
        if self.valid_fn is not None:
            ok = ok & self.valid_fn(x)
        return ok

    def check_domain(self, x):
        if not np.all(self.contains(x)):
            raise DomainError(f"point outside the domain of chart {self.name!r}")

    def g(self, x) -> Array:
        return self.metric_fn(np.asarray(x, dtype=float))

    def dg(self, x) -> Array:
        x = np.asarray(x, dtype=float)
        if self.dmetric_fn is not None:
            return self.dmetric_fn(x)
        eta = self.eta1
        out = np.empty(x.shape[:-1] + (self.n, self.n, self.n))
        for a in range(self.n):
            e = np.zeros(self.n)
            e[a] = eta
            self.check_domain(x + e)
            self.check_domain(x - e)
            out[..., a] = (self.metric_fn(x + e) - self.metric_fn(x - e)) / (2 * eta)
        return out

    def d2g(self, x) -> Array:
        x = np.asarray(x, dtype=float)
        if self.d2metric_fn is not None:
            return self.d2metric_fn(x)
        eta = self.eta2
        n = self.n
        out = np.empty(x.shape[:-1] + (n, n, n, n))
        g0 = self.metric_fn(x)
        for a in range(n):
            ea = np.zeros(n)
            ea[a] = eta
            self.check_domain(x + ea)
            self.check_domain(x - ea)
            out[..., a, a] = (self.metric_fn(x + ea) - 2 * g0 + self.metric_fn(x - ea)) / eta**2
            for b in range(a + 1, n):
                eb = np.zeros(n)
                eb[b] = eta
                val = (
                    self.metric_fn(x + ea + eb)
                    - self.metric_fn(x + ea - eb)
                    - self.metric_fn(x - ea + eb)
                    + self.metric_fn(x - ea - eb)
                ) / (4 * eta**2)
                out[..., a, b] = val
                out[..., b, a] = val
        return out


# ---------------------------------------------------------------- formulas


def christoffel_from_derivs(g: Array, dg: Array) -> Array:
    """Gamma^k_ij from the lowered symbols 1/2 (d_i g_jk + d_j g_ki - d_k g_ij)."""
    low = 0.5 * (
        np.einsum("...jki->...kij", dg)
        + np.einsum("...kij->...kij", dg)
        - np.einsum("...ijk->...kij", dg)
    )
    ginv = np.linalg.inv(g)
    return np.einsum("...km,...mij->...kij", ginv, low)


def curvature_from_derivs(g: Array, dg: Array, d2g: Array) -> Array:
    """All-lower Riemann tensor from the metric and its first two derivatives."""
    ginv = np.linalg.inv(g)
    gam = christoffel_from_derivs(g, dg)
    # d_a of the lowered symbols low[m, j, k]
    dlow = 0.5 * (
        np.einsum("...kmja->...mjka", d2g)
        + np.einsum("...mjka->...mjka", d2g)
        - np.einsum("...jkma->...mjka", d2g)
    )
    # d_a Gamma^i_jk = -g^ip d_a g_pq Gamma^q_jk + g^im d_a low_mjk
    dgam = -np.einsum("...ip,...pqa,...qjk->...ijka", ginv, dg, gam) + np.einsum(
        "...im,...mjka->...ijka", ginv, dlow
    )
    # R^i_jkl = d_k Gamma^i_lj - d_l Gamma^i_kj + Gamma^i_kp Gamma^p_lj - Gamma^i_lp Gamma^p_kj
    r_up = (
        np.einsum("...iljk->...ijkl", dgam)
        - np.einsum("...ikjl->...ijkl", dgam)
        + np.einsum("...ikp,...plj->...ijkl", gam, gam)
        - np.einsum("...ilp,...pkj->...ijkl", gam, gam)
    )
    return np.einsum("...im,...mjkl->...ijkl", g, r_up)


def symmetry_defect(R: Array) -> float:
    """Max violation of the algebraic curvature identities."""
    anti1 = R + np.swapaxes(R, -4, -3)
    anti2 = R + np.swapaxes(R, -2, -1)
    pair = R - np.einsum("...ijkl->...klij", R)
    bianchi = R + np.einsum("...ijkl->...iljk", R) + np.einsum("...ijkl->...iklj", R)
    return float(max(np.max(np.abs(a)) for a in (anti1, anti2, pair, bianchi)))


def project_curvature(R: Array) -> Array:
    """Orthogonal projection onto tensors with the curvature symmetries."""
    R = 0.5 * (R - np.swapaxes(R, -4, -3))
    R = 0.5 * (R - np.swapaxes(R, -2, -1))
    R = 0.5 * (R + np.einsum("...ijkl->...klij", R))
    b = (R + np.einsum("...ijkl->...iljk", R) + np.einsum("...ijkl->...iklj", R)) / 3.0
    return R - b


def lower_index(T: Array, g: Array, axis: int = 0) -> Array:
    """Lower the index at ``axis`` (counted among the last T.ndim - g.ndim + 2 axes)."""
    T = np.moveaxis(T, axis, -1)
    T = np.einsum("...a,ab->...b", T, g)
    return np.moveaxis(T, -1, axis)


def raise_index(T: Array, g: Array, axis: int = 0) -> Array:
    return lower_index(T, np.linalg.inv(g), axis)


def frame_components(R: Array, E: Array) -> Array:
    """R(E_a, E_b, E_c, E_d) for a basis given by the columns of E."""
    return np.einsum("...pqrs,...pa,...qb,...rc,...sd->...abcd", R, E, E, E, E, optimize=True)


# -------------------------------------------------------------- public ops


def _check_spd(g: Array, tol: float = 1e-12):
    asym = np.max(np.abs(g - np.swapaxes(g, -1, -2)))
    if asym > tol * max(1.0, float(np.max(np.abs(g)))):
        raise ChartValidityError(f"metric not symmetric (defect {asym:.3e})")
    if np.min(np.linalg.eigvalsh(g)) <= 0:
        raise ChartValidityError("metric not positive definite")


def metric_at(chart: Chart, x) -> Array:
    x = np.asarray(x, dtype=float)
    chart.check_domain(x)
    g = chart.g(x)
    _check_spd(g)
    return g


def christoffel_at(chart: Chart, x) -> Array:
    x = np.asarray(x, dtype=float)
    chart.check_domain(x)
    return christoffel_from_derivs(chart.g(x), chart.dg(x))


def christoffel(chart: Chart, x) -> Array:
    """Batched Christoffel symbols without the domain check."""
    if chart.christoffel_fn is not None:
        return chart.christoffel_fn(np.asarray(x, dtype=float))
    return christoffel_from_derivs(chart.g(x), chart.dg(x))


def curvature(chart: Chart, x) -> Array:
    """Batched all-lower Riemann tensor without validation."""
    return curvature_from_derivs(chart.g(x), chart.dg(x), chart.d2g(x))


def curvature_at(chart: Chart, x, frame: Optional[Array] = None, tol: Optional[float] = None) -> Array:
    """Riemann 0-4 tensor; in coordinates, or in the basis ``frame`` (columns)."""
    x = np.asarray(x, dtype=float)
    chart.check_domain(x)
    R = curvature(chart, x)
    if frame is not None:
        R = frame_components(R, np.asarray(frame, dtype=float))
    if tol is None:
        tol = 1e-6 if chart.analytic else 1e-4
    scale = 1.0 + float(np.max(np.abs(R)))
    if symmetry_defect(R) > tol * scale:
        raise ConventionError("curvature symmetries violated; check derivative step")
    return R


def orthonormal_frame(g: Array) -> Array:
    """g-orthonormal basis (columns) from Gram-Schmidt of the coordinate axes."""
    n = g.shape[-1]
    E = np.zeros((n, n))
    for a in range(n):
        v = np.zeros(n)
        v[a] = 1.0
        for b in range(a):
            v = v - (E[:, b] @ g @ v) * E[:, b]
        E[:, a] = v / np.sqrt(v @ g @ v)
    return E


def sectional_curvature(chart: Chart, x, u, v) -> float:
    R = curvature(chart, np.asarray(x, dtype=float))
    g = chart.g(x)
    num = np.einsum("ijkl,i,j,k,l->", R, u, v, u, v)
    den = (u @ g @ u) * (v @ g @ v) - (u @ g @ v) ** 2
    return float(num / den)


# ----------------------------------------------------------------- builtins


def euclidean(n: int, half_width: float = 50.0) -> Chart:
    def metric(x):
        return np.broadcast_to(np.eye(n), np.shape(x)[:-1] + (n, n)).copy()

    def dmetric(x):
        return np.zeros(np.shape(x)[:-1] + (n, n, n))

    def d2metric(x):
        return np.zeros(np.shape(x)[:-1] + (n, n, n, n))

    return Chart(
        n=n,
        lower=np.full(n, -half_width),
        upper=np.full(n, half_width),
        metric_fn=metric,
        dmetric_fn=dmetric,
        d2metric_fn=d2metric,
        name=f"euclidean{n}",
        conformal_dphi=lambda x: np.zeros(np.shape(x)),
        curvature_K=0.0,
        r_inj=10.0,
    )


def conformal_constant_curvature(n: int, K: float, half_width: Optional[float] = None) -> Chart:
    """Metric 4/(1+K|x|^2)^2 * delta: stereographic sphere (K>0) or Poincare ball (K<0)."""
    if K == 0:
        return euclidean(n)
    eye = np.eye(n)

    def f_and_s(x):
        s = np.sum(x * x, axis=-1)
        return 4.0 / (1.0 + K * s) ** 2, s

    def metric(x):
        f, _ = f_and_s(x)
        return f[..., None, None] * eye

    def dmetric(x):
        s = np.sum(x * x, axis=-1)
        df = -16.0 * K * x / (1.0 + K * s)[..., None] ** 3
        return eye[..., None] * df[..., None, None, :]

    def d2metric(x):
        s = np.sum(x * x, axis=-1)
        q = 1.0 + K * s
        d2f = -16.0 * K * eye / q[..., None, None] ** 3 + 96.0 * K**2 * np.einsum(
            "...a,...b->...ab", x, x
        ) / q[..., None, None] ** 4
        return eye[..., None, None] * d2f[..., None, None, :, :]

    def dphi_fn(x):
        s = np.sum(x * x, axis=-1)
        return -2.0 * K * x / (1.0 + K * s)[..., None]

    def gamma(x):
        # Gamma^k_ij = d_i(k) dphi_j + d_jk dphi_i - d_ij dphi_k, phi = log of the conformal factor
        s = np.sum(x * x, axis=-1)
        dphi = -2.0 * K * x / (1.0 + K * s)[..., None]
        a = eye[:, :, None] * dphi[..., None, None, :]
        return a + np.swapaxes(a, -1, -2) - eye[None, :, :] * dphi[..., :, None, None]

    if K > 0:
        hw = 3.0 if half_width is None else half_width
        return Chart(
            n=n,
            lower=np.full(n, -hw),
            upper=np.full(n, hw),
            metric_fn=metric,
            dmetric_fn=dmetric,
            d2metric_fn=d2metric,
            name=f"sphere{n}(K={K:g})",
            christoffel_fn=gamma,
            conformal_dphi=dphi_fn,
            curvature_K=float(K),
            r_inj=np.pi / (2 * np.sqrt(K)),
        )
    rad = 1.0 / np.sqrt(-K)
    hw = rad if half_width is None else half_width

    def valid(x):
        return np.sum(x * x, axis=-1) < (0.999 * rad) ** 2

    return Chart(
        n=n,
        lower=np.full(n, -hw),
        upper=np.full(n, hw),
        metric_fn=metric,
        dmetric_fn=dmetric,
        d2metric_fn=d2metric,
        name=f"hyperbolic{n}(K={K:g})",
        christoffel_fn=gamma,
        conformal_dphi=dphi_fn,
        curvature_K=float(K),
        r_inj=10.0,
        valid_fn=valid,
    )


def sphere(n: int, K: float = 1.0) -> Chart:
    if K <= 0:
        raise ValueError("sphere needs K > 0")
    return conformal_constant_curvature(n, K)


def hyperbolic(n: int, K: float = -1.0) -> Chart:
    if K >= 0:
        raise ValueError("hyperbolic space needs K < 0")
    return conformal_constant_curvature(n, K)


def parse_metric_expression(
    source: str,
    lower=None,
    upper=None,
    name: str = "expr",
    r_inj: float = 10.0,
) -> Chart:
    n, metric_fn = parse_metric_source(source)
    lo = np.full(n, -10.0) if lower is None else np.broadcast_to(np.asarray(lower, float), (n,)).copy()
    hi = np.full(n, 10.0) if upper is None else np.broadcast_to(np.asarray(upper, float), (n,)).copy()
    return Chart(n=n, lower=lo, upper=hi, metric_fn=metric_fn, name=name, r_inj=r_inj)
