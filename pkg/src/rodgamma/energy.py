"""Finite-thickness elastic energy of thin tubes and the recovery construction."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.interpolate import CubicSpline

from .ball import ball_rule, ball_volume
from .errors import PreconditionError
from .fermi import TField, pullback_metric, sqrt_metric
from .geodesic import FramedGeodesic
from .limit import RodState, _basis, eval_I

Array = np.ndarray

FD_STEP = 1e-5
DISK_DEGREE = 10


def dist_SO(M) -> Array:
    """Frobenius distance to SO(n) from the singular values, batched."""
    M = np.asarray(M, float)
    s = np.linalg.svd(M, compute_uv=False)
    neg = np.linalg.det(M) < 0
    d2 = np.sum((s - 1.0) ** 2, axis=-1)
    if np.any(neg):
        flip = (s[..., -1] + 1.0) ** 2 - (s[..., -1] - 1.0) ** 2
        d2 = np.where(neg, d2 + flip, d2)
    return np.sqrt(d2)


def rescaled_gradient(v_fn: Callable[[Array], Array], x, h: float, eps: float = FD_STEP) -> Array:
    """d_h v at points x (..., n): column 1 is d_1 v, columns j >= 2 are d_j v / h.

    Central differences of step ``eps`` in every reference direction.
    """
    x = np.asarray(x, float)
    n = x.shape[-1]
    E = np.eye(n) * eps
    shp = (n,) + (1,) * (x.ndim - 1) + (n,)
    vp = v_fn(x[None] + E.reshape(shp))
    vm = v_fn(x[None] - E.reshape(shp))
    D = np.moveaxis((vp - vm) / (2 * eps), 0, -1)
    D[..., 1:] /= h
    return D


@dataclass(eq=False)
class TubeDeformation:
    """Lifted map v on [-L, L] x B_1, sampled on stations times disk nodes.

    ``v`` holds target Fermi coordinates (S, N, n); ``dhv`` the rescaled
    gradient (S, N, n, n).  ``disk_w`` are disk weights summing to one.
    """

    h: float
    t: Array
    disk_x: Array
    disk_w: Array
    v: Array
    dhv: Array
    fg_src: FramedGeodesic
    fg_tgt: FramedGeodesic
    v_fn: Optional[Callable[[Array], Array]] = None

    @property
    def n(self) -> int:
        return self.v.shape[-1]

    def reference_points(self) -> Array:
        S, N = len(self.t), len(self.disk_x)
        X = np.empty((S, N, self.n))
        X[..., 0] = self.t[:, None]
        X[..., 1:] = self.disk_x[None]
        return X

    def quadrature_weights(self) -> Array:
        """(S, N) weights for the average over [-L, L] x B_1."""
        wt = _trapezoid_weights(self.t)
        return wt[:, None] * self.disk_w[None]

    @classmethod
    def from_callable(
        cls,
        v_fn: Callable[[Array], Array],
        h: float,
        t: Array,
        fg_src: FramedGeodesic,
        fg_tgt: FramedGeodesic,
        degree: int = DISK_DEGREE,
        eps: float = FD_STEP,
    ) -> "TubeDeformation":
        t = np.asarray(t, float)
        n = fg_src.n
        X, w = ball_rule(n - 1, degree)
        w = w / ball_volume(n - 1)
        ref = np.empty((len(t), len(X), n))
        ref[..., 0] = t[:, None]
        ref[..., 1:] = X[None]
        v = v_fn(ref)
        dhv = rescaled_gradient(v_fn, ref, h, eps)
        return cls(h, t, X, w, v, dhv, fg_src, fg_tgt, v_fn)

    def to_dict(self) -> dict:
        return {
            "h": self.h,
            "t": self.t.tolist(),
            "disk_x": self.disk_x.tolist(),
            "disk_w": self.disk_w.tolist(),
            "v": self.v.tolist(),
            "dhv": self.dhv.tolist(),
        }


def _trapezoid_weights(t: Array) -> Array:
    if len(t) == 1:
        return np.ones(1)
    w = np.zeros(len(t))
    d = np.diff(t)
    w[:-1] += 0.5 * d
    w[1:] += 0.5 * d
    return w / (t[-1] - t[0])


def energy_density(td: TubeDeformation) -> tuple[Array, Array]:
    """(dist^2 integrand, sqrt det g weight) at every node."""
    X = td.reference_points()
    src = X.copy()
    src[..., 1:] *= td.h
    g_src = pullback_metric(td.fg_src, src)
    g_tgt = pullback_metric(td.fg_tgt, td.v)
    half_t, _ = sqrt_metric(g_tgt)
    _, inv_half_s = sqrt_metric(g_src)
    M = half_t @ td.dhv @ inv_half_s
    return dist_SO(M) ** 2, np.sqrt(np.linalg.det(g_src))


def energy_Eh(td: TubeDeformation) -> float:
    """Volume-weighted average of dist^2(g_tgt(v)^(1/2) dv g_src^(-1/2), SO(n))."""
    d2, vol = energy_density(td)
    W = td.quadrature_weights() * vol
    return float(np.sum(W * d2) / np.sum(W))


# ---------------------------------------------------------------- recovery


def recovery_map(rs: RodState, h: float) -> Callable[[Array], Array]:
    """v(x) = (x1 + h^2 w - h^2 x'.y' + h^3 beta_1, h x' + h y + h^2 Z x' + h^3 beta')."""
    sw = CubicSpline(rs.t, rs.w)
    sy = CubicSpline(rs.t, rs.y, axis=0)
    sdy = CubicSpline(rs.t, rs.dy, axis=0)
    sZ = CubicSpline(rs.t, rs.Z, axis=0)
    sb = CubicSpline(rs.t, rs.beta, axis=0)
    basis = _basis(rs.m, rs.degree)

    def v(x):
        x = np.asarray(x, float)
        x1, xp = x[..., 0], x[..., 1:]
        beta = np.einsum("...cp,...p->...c", sb(x1), basis.eval(xp))
        out = np.empty_like(x)
        out[..., 0] = x1 + h**2 * sw(x1) - h**2 * np.einsum("...k,...k->...", xp, sdy(x1)) + h**3 * beta[..., 0]
        out[..., 1:] = (
            h * xp + h * sy(x1) + h**2 * np.einsum("...jk,...k->...j", sZ(x1), xp) + h**3 * beta[..., 1:]
        )
        return out

    return v


def recovery_deformation(
    rs: RodState,
    h: float,
    fg_src: FramedGeodesic,
    fg_tgt: FramedGeodesic,
    degree: int = DISK_DEGREE,
) -> TubeDeformation:
    if h <= 0:
        raise PreconditionError("thickness must be positive")
    return TubeDeformation.from_callable(recovery_map(rs, h), h, rs.t, fg_src, fg_tgt, degree)


def _slope(h, gap):
    h, gap = np.asarray(h, float), np.asarray(gap, float)
    ok = gap > 0
    if ok.sum() < 2:
        return float("nan")
    return float(np.polyfit(np.log(h[ok]), np.log(gap[ok]), 1)[0])


@dataclass
class ConvergenceTable:
    rows: list
    slope: float
    I: float

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\r\n")
        w.writerow(["h", "Eh_over_h4", "I", "gap", "slope_running"])
        for r in self.rows:
            w.writerow([repr(float(r[k])) for k in ("h", "Eh_over_h4", "I", "gap", "slope_running")])
        return buf.getvalue()


def convergence_study(
    rs: RodState,
    h_list: Sequence[float],
    fg_src: FramedGeodesic,
    fg_tgt: FramedGeodesic,
    T_src: TField,
    T_tgt: TField,
    reference: Optional[float] = None,
    degree: int = DISK_DEGREE,
) -> ConvergenceTable:
    """h^-4 E_h of the recovery family against I (or a supplied reference value)."""
    h_list = [float(h) for h in h_list]
    if len(h_list) < 2 or any(b >= a for a, b in zip(h_list, h_list[1:])):
        raise PreconditionError("h list must be strictly decreasing with at least two entries")
    I = eval_I(rs, T_src, T_tgt) if reference is None else float(reference)
    rows = []
    for k, h in enumerate(h_list):
        E = energy_Eh(recovery_deformation(rs, h, fg_src, fg_tgt, degree))
        val = E / h**4
        gap = abs(val - I)
        running = float("nan")
        if k > 0 and gap > 0 and rows[-1]["gap"] > 0:
            running = float(np.log(rows[-1]["gap"] / gap) / np.log(h_list[k - 1] / h))
        rows.append({"h": h, "Eh_over_h4": val, "I": I, "gap": gap, "slope_running": running})
    return ConvergenceTable(rows, _slope([r["h"] for r in rows], [r["gap"] for r in rows]), I)
