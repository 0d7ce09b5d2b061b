"""Recover a framed target geodesic and the limit quadruple from a tube deformation."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import least_squares
from scipy.special import roots_legendre

from .ball import ball_rule, ball_volume
from .energy import TubeDeformation
from .errors import KarcherError, LiftError, PreconditionError
from .fermi import CurvatureField, fermi_map, lift
from .geodesic import (
    FramedGeodesic,
    _norm_g,
    exp_map,
    exp_with_velocity,
    framed_geodesic,
    geodesic_distance,
    jacobi_solve,
    log_map,
    skew_from_params,
)
from .karcher import karcher_mean
from .limit import RodState, _basis, apply_equivalence, normalize_B

Array = np.ndarray

CELL_GAUSS = 4
CELL_DISK_DEGREE = 4


def cell_grid(L: float, h: float):
    """Breakpoints t_i = i eps (i = -N..N) with N = ceil(L / h), and midpoints s_i."""
    N = int(np.ceil(L / h - 1e-12))
    eps = L / N
    t = eps * np.arange(-N, N + 1)
    return t, 0.5 * (t[:-1] + t[1:]), eps


def cell_means(td: TubeDeformation, L: Optional[float] = None):
    """(s_i, Karcher means of the deformed cells in target chart coordinates, eps)."""
    if td.v_fn is None:
        raise PreconditionError("cell means need the deformation as a callable")
    L = float(td.t[-1]) if L is None else L
    t, s, eps = cell_grid(L, td.h)
    n = td.n
    gx, gw = roots_legendre(CELL_GAUSS)
    dx, dw = ball_rule(n - 1, CELL_DISK_DEGREE)
    dw = dw / ball_volume(n - 1)
    x1 = s[:, None] + 0.5 * eps * gx[None]  # (C, G)
    X = np.empty((len(s), CELL_GAUSS, len(dx), n))
    X[..., 0] = x1[:, :, None]
    X[..., 1:] = dx[None, None]
    W = (0.5 * gw)[:, None] * dw[None]
    pts = fermi_map(td.fg_tgt, td.v_fn(X)).reshape(len(s), -1, n)
    try:
        means = karcher_mean(td.fg_tgt.chart, pts, np.broadcast_to(W.ravel(), pts.shape[:-1]))
    except KarcherError as exc:
        raise KarcherError(f"cell spread too large for a center of mass: {exc}") from exc
    return s, means, eps


@dataclass(eq=False)
class PiecewiseGeodesic:
    """Broken geodesic through the cell means; segment i runs from s_i to s_{i+1}."""

    chart: object
    s: Array
    points: Array
    vel_out: Array  # velocity at s_i of segment i
    vel_in: Array  # velocity at s_{i+1} of segment i
    jumps: Array  # F_j at interior breakpoints s_1..s_{K-2}

    @property
    def eps(self) -> float:
        return float(self.s[1] - self.s[0])

    def _segment(self, x1):
        return np.clip(np.floor((np.asarray(x1, float) - self.s[0]) / self.eps).astype(int), 0, len(self.s) - 2)

    def __call__(self, x1) -> Array:
        """Points, with the end segments extended as geodesics."""
        x1 = np.asarray(x1, float)
        k = self._segment(x1)
        return exp_map(self.chart, self.points[k], (x1 - self.s[k])[..., None] * self.vel_out[k])

    def velocity(self, x1):
        x1 = np.asarray(x1, float)
        k = self._segment(x1)
        d = (x1 - self.s[k])[..., None]
        # unit-time velocity of tau -> exp(tau d u) is d times the x1-velocity
        safe = np.where(np.abs(d) > 1e-14, d, 1.0)
        _p, v = exp_with_velocity(self.chart, self.points[k], safe * self.vel_out[k])
        return np.where(np.abs(d) > 1e-14, v / safe, self.vel_out[k])

    def speeds(self) -> Array:
        return _norm_g(self.chart, self.points[:-1], self.vel_out)

    def continuity_defect(self) -> float:
        end = exp_map(self.chart, self.points[:-1], self.eps * self.vel_out)
        return float(np.max(np.linalg.norm(end - self.points[1:], axis=-1), initial=0.0))


def build_piecewise(chart, s, means) -> PiecewiseGeodesic:
    s = np.asarray(s, float)
    means = np.asarray(means, float)
    if len(s) < 2:
        raise PreconditionError("need at least two cell means")
    eps = float(s[1] - s[0])
    u = log_map(chart, means[:-1], means[1:]) / eps
    _end, vin = exp_with_velocity(chart, means[:-1], eps * u)
    vin = vin / eps
    jumps = _norm_g(chart, means[1:-1], u[1:] - vin[:-1])
    return PiecewiseGeodesic(chart, s, means, u, vin, jumps)


@dataclass
class SmoothingReport:
    geodesic: FramedGeodesic
    sup_distance: float
    bound: float
    F0: float
    jumps: list = field(default_factory=list)


def omega(t, breaks, F0: float, F: Array, C: float = 1.0) -> Array:
    """e^{C|t|} F0 + sum over breakpoints between 0 and t of C e^{C|t - t_k|} F_k."""
    t = np.asarray(t, float)
    out = np.exp(C * np.abs(t)) * F0
    for tk, Fk in zip(breaks, F):
        between = (np.sign(t) == np.sign(tk)) & (np.abs(tk) < np.abs(t))
        out = out + np.where(between, C * np.exp(C * np.abs(t - tk)) * Fk, 0.0)
    return out


def smooth_to_geodesic(
    pw: PiecewiseGeodesic,
    L: float,
    C: float = 1.0,
    dt: Optional[float] = None,
    n_check: int = 201,
) -> SmoothingReport:
    """Unit-speed geodesic through gamma_pw(0) with the normalized one-sided velocity.

    The distance to the broken curve is compared with the Gronwall-type bound
    2 omega(t), propagated from 0 in both directions.
    """
    F = np.asarray(pw.jumps, float)
    p0 = pw(np.array(0.0))
    v0 = pw.velocity(np.array(0.0))
    speed = float(_norm_g(pw.chart, p0, v0))
    F0 = abs(speed - 1.0)
    if F0 + F.sum() > 0.5:
        raise PreconditionError(f"total jump {F0 + F.sum():.3f} exceeds 1/2")
    fg = framed_geodesic(pw.chart, p0, v0 / speed, L, dt=dt)
    tc = np.linspace(-L, L, n_check)
    gp = fg.state_at(tc)[0]
    dist = geodesic_distance(pw.chart, gp, pw(tc))
    bound = 2.0 * omega(tc, pw.s[1:-1], F0, F, C)
    return SmoothingReport(fg, float(np.max(dist)), float(np.max(bound)), F0, F.tolist())


# ------------------------------------------------------------- extraction


def _polar(M: Array) -> Array:
    U, _s, Vt = np.linalg.svd(M)
    D = np.eye(len(M))
    D[-1, -1] = np.sign(np.linalg.det(U @ Vt))
    return U @ D @ Vt


def _reframe(fg: FramedGeodesic, Rot: Array, tau: float, L: float, dt: Optional[float]) -> FramedGeodesic:
    """Geodesic x1 -> gamma(x1 + tau) with normal frame nu @ Rot."""
    pos, vel, frame = fg.state_at(np.array(tau))
    return framed_geodesic(fg.chart, pos, vel, L, frame0=frame @ Rot, dt=dt)


@dataclass
class Extraction:
    state: RodState
    geodesic: FramedGeodesic
    rotation: Array
    tau: float


def lifted_values(td: TubeDeformation, fg_fit: FramedGeodesic) -> Array:
    """Deformation values in the Fermi coordinates of fg_fit."""
    q = fermi_map(td.fg_tgt, td.v)
    try:
        return lift(fg_fit, q, s=td.v[..., 0], x0=td.v)
    except LiftError as exc:
        raise LiftError(f"deformation does not lift against the fitted geodesic: {exc}") from exc


def extract_limits(
    td: TubeDeformation,
    fg_fit: FramedGeodesic,
    degree: int = 3,
    align: bool = True,
    dt: Optional[float] = None,
) -> Extraction:
    """Rescaled averages of the lifted deformation; optional frame fit and x1 shift."""
    h = td.h
    n = td.n
    m = n - 1
    X = td.disk_x
    w = td.disk_w
    I2 = 1.0 / (m + 2)
    v = lifted_values(td, fg_fit)
    Rot = np.eye(m)
    tau = 0.0
    fg = fg_fit
    if align:
        # frame: polar factor of the averaged lower block of d_h v
        wt = td.quadrature_weights()
        M = np.einsum("sa,saj,sak->jk", wt, v[..., 1:], X[None]) / (h * I2)
        Rot = _polar(M)
        tau = float(np.sum(wt * (v[..., 0] - td.t[:, None])))
        v = v.copy()
        v[..., 1:] = v[..., 1:] @ Rot
        v[..., 0] -= tau
        fg = _reframe(fg_fit, Rot, tau, fg_fit.L, dt if dt is not None else fg_fit.dt)
    t = td.t
    x1 = t[:, None]
    wv = np.einsum("a,sa->s", w, v[..., 0] - x1) / h**2
    y = np.einsum("a,saj->sj", w, v[..., 1:]) / h
    mom = np.einsum("a,sai,saj->sij", w, np.broadcast_to(X, v[..., 1:].shape), v[..., 1:])
    Z = -(mom - np.swapaxes(mom, 1, 2)) / (2 * I2 * h**2)
    dy = np.gradient(y, t, axis=0, edge_order=2)
    beta1 = ((v[..., 0] - x1) / h**2 - wv[:, None] + np.einsum("ak,sk->sa", X, dy)) / h
    betap = ((v[..., 1:] - h * X[None]) / h - y[:, None, :] - h * np.einsum("sjk,ak->saj", Z, X)) / h**2
    vals = np.concatenate([beta1[..., None], betap], axis=-1)  # (S, N, n)
    basis = _basis(m, degree)
    P = basis.eval(X)  # (N, nmon)
    G = P.T @ (w[:, None] * P)
    coef = np.linalg.solve(G, np.einsum("ap,a,sac->scp", P, w, vals).reshape(-1, len(basis)).T).T
    beta = normalize_B(coef.reshape(len(t), n, len(basis)), degree)
    rs = RodState.from_values(t, wv, y, Z, beta, degree)
    return Extraction(rs, fg, Rot, tau)


# -------------------------------------------------------------- alignment


def _to_params(x, m):
    J0 = np.concatenate([[0.0], x[:m]])
    dJ0 = np.concatenate([[0.0], x[m : 2 * m]])
    W0 = skew_from_params(x[2 * m : 2 * m + m * (m - 1) // 2], m)
    return J0, dJ0, W0, x[-1]


def align_states(planted: RodState, extracted: RodState, curv: CurvatureField):
    """Least squares over Jacobi initial data and a w offset; returns (aligned planted, rel L2 error)."""
    m = planted.m
    t = planted.t
    npar = 2 * m + m * (m - 1) // 2 + 1

    def transform(x):
        J0, dJ0, W0, c = _to_params(x, m)
        jd = jacobi_solve(curv, J0, dJ0, W0, t=t)
        rs = apply_equivalence(planted, jd, curv)
        rs.w = rs.w + c
        return rs

    def resid(x):
        return _field_vector(transform(x), t) - _field_vector(extracted, t)

    sol = least_squares(resid, np.zeros(npar), method="lm", xtol=1e-12, ftol=1e-12)
    aligned = transform(sol.x)
    ref = _field_vector(aligned, t)
    rel = float(np.linalg.norm(sol.fun) / max(np.linalg.norm(ref), 1e-300))
    return aligned, rel, sol.x


def _field_vector(rs: RodState, t) -> Array:
    """(w, y, Z) weighted for a trapezoid L2 norm."""
    wt = np.sqrt(np.gradient(t))
    parts = [rs.w * wt, (rs.y * wt[:, None]).ravel(), (rs.Z * wt[:, None, None]).ravel()]
    return np.concatenate(parts)


def relative_l2(a: RodState, b: RodState) -> float:
    """|(w, y, Z)_a - (w, y, Z)_b| / |(w, y, Z)_b| in L2 over the grid."""
    va, vb = _field_vector(a, a.t), _field_vector(b, b.t)
    return float(np.linalg.norm(va - vb) / max(np.linalg.norm(vb), 1e-300))


# ---------------------------------------------------------------- pipeline


@dataclass
class FitReport:
    geodesic: FramedGeodesic
    smoothing: SmoothingReport
    extraction: Extraction
    cells: int
    speed_deviation: float

    def to_dict(self) -> dict:
        fg = self.extraction.geodesic
        i0 = len(fg.t) // 2
        return {
            "cells": self.cells,
            "initial_point": fg.pos[i0].tolist(),
            "initial_frame": fg.E[i0].tolist(),
            "jumps": self.smoothing.jumps,
            "F0": self.smoothing.F0,
            "sup_distance": self.smoothing.sup_distance,
            "bound": self.smoothing.bound,
            "speed_deviation": self.speed_deviation,
            "rotation": self.extraction.rotation.tolist(),
            "tau": self.extraction.tau,
            "state": self.extraction.state.to_dict(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def fit_rod(td: TubeDeformation, L: Optional[float] = None, margin: float = 0.2, C: float = 1.0) -> FitReport:
    """Cells -> broken geodesic -> smoothed geodesic -> aligned frame -> limit quadruple."""
    L = float(td.t[-1]) if L is None else L
    s, means, eps = cell_means(td, L)
    pw = build_piecewise(td.fg_tgt.chart, s, means)
    sm = smooth_to_geodesic(pw, L + margin, C=C, dt=td.fg_tgt.dt)
    ex = extract_limits(td, sm.geodesic)
    dev = float(np.max(np.abs(pw.speeds() - 1.0)))
    return FitReport(sm.geodesic, sm, ex, len(s), dev)
