"""Geodesics, parallel frames, exp/log maps and Jacobi fields.

All integrators are the classical fixed-step fourth order Runge-Kutta
scheme and work on batches of initial conditions at once.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import expm

from .errors import InjectivityError, OrientationError, PreconditionError, TruncationError
from .geometry import Chart, christoffel

Array = np.ndarray


def _rk4_step(f, y, dt):
    k1 = f(y)
    k2 = f(y + 0.5 * dt * k1)
    k3 = f(y + 0.5 * dt * k2)
    k4 = f(y + dt * k3)
    return y + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


def _transport_rhs(chart: Chart, n_vec: int):
    """Right-hand side for (x, v, V_1..V_k) with V_a parallel along x."""
    n = chart.n

    if chart.conformal_dphi is not None:
        return _conformal_rhs(chart, n_vec)

    def f(y):
        x = y[..., :n]
        v = y[..., n : 2 * n]
        gam = christoffel(chart, x)
        out = np.empty_like(y)
        out[..., :n] = v
        out[..., n : 2 * n] = -np.einsum("...kij,...i,...j->...k", gam, v, v)
        if n_vec:
            V = y[..., 2 * n :].reshape(y.shape[:-1] + (n_vec, n))
            dV = -np.einsum("...kij,...i,...aj->...ak", gam, v, V)
            out[..., 2 * n :] = dV.reshape(y.shape[:-1] + (n_vec * n,))
        return out

    return f


def _conformal_rhs(chart: Chart, n_vec: int):
    # Gamma(v, V) = (dphi.v) V + (dphi.V) v - (v.V) dphi
    n = chart.n

    def f(y):
        x = y[..., :n]
        v = y[..., n : 2 * n]
        d = chart.conformal_dphi(x)
        dv = np.sum(d * v, axis=-1)[..., None]
        out = np.empty_like(y)
        out[..., :n] = v
        out[..., n : 2 * n] = -(2.0 * dv * v - np.sum(v * v, axis=-1)[..., None] * d)
        if n_vec:
            V = y[..., 2 * n :].reshape(y.shape[:-1] + (n_vec, n))
            dV = -(
                dv[..., None] * V
                + np.sum(d[..., None, :] * V, axis=-1)[..., None] * v[..., None, :]
                - np.sum(v[..., None, :] * V, axis=-1)[..., None] * d[..., None, :]
            )
            out[..., 2 * n :] = dV.reshape(y.shape[:-1] + (n_vec * n,))
        return out

    return f


def _integrate(chart, y0, dt, nsteps, n_vec=0, t0=0.0, store=True):
    f = _transport_rhs(chart, n_vec)
    n = chart.n
    y = np.array(y0, dtype=float)
    traj = [y] if store else None
    for k in range(nsteps):
        y = _rk4_step(f, y, dt)
        if not np.all(np.isfinite(y)) or not np.all(chart.contains(y[..., :n])):
            raise TruncationError(
                f"geodesic left the domain of chart {chart.name!r}", t_exit=t0 + (k + 1) * dt
            )
        if store:
            traj.append(y)
    return np.stack(traj) if store else y


def _norm_g(chart, x, v):
    g = chart.g(x)
    return np.sqrt(np.einsum("...i,...ij,...j->...", v, g, v))


def default_normal_frame(chart: Chart, p, v) -> Array:
    """Gram-Schmidt of the coordinate axes against v; columns, positively oriented."""
    p = np.asarray(p, float)
    v = np.asarray(v, float)
    g = chart.g(p)
    n = chart.n
    basis = [v / np.sqrt(v @ g @ v)]
    for a in range(n):
        e = np.zeros(n)
        e[a] = 1.0
        for b in basis:
            e = e - (b @ g @ e) * b
        nrm = np.sqrt(e @ g @ e)
        if nrm > 1e-8:
            basis.append(e / nrm)
        if len(basis) == n:
            break
    E = np.stack(basis, axis=1)
    if np.linalg.det(E) < 0:
        E[:, -1] *= -1
    return E[:, 1:]


@dataclass(eq=False)
class FramedGeodesic:
    """A unit-speed geodesic on a uniform grid, optionally with a parallel normal frame.

    ``frame`` has shape (M, n, n-1); column a is the coordinate vector of
    nu_{a+2}.  ``E`` stacks (gamma', nu_2, ..., nu_n) as columns.
    """

    chart: Chart
    t: Array
    pos: Array
    vel: Array
    frame: Optional[Array] = None

    @property
    def n(self) -> int:
        return self.chart.n

    @property
    def L(self) -> float:
        return 0.5 * (self.t[-1] - self.t[0])

    @property
    def dt(self) -> float:
        return float(self.t[1] - self.t[0])

    @property
    def E(self) -> Array:
        return np.concatenate([self.vel[:, :, None], self.frame], axis=2)

    def _states(self):
        parts = [self.pos, self.vel]
        if self.frame is not None:
            parts.append(np.swapaxes(self.frame, 1, 2).reshape(len(self.t), -1))
        return np.concatenate(parts, axis=1)

    def state_at(self, s):
        """(pos, vel, frame) at arbitrary parameters via a partial RK4 step from the nearest station."""
        s = np.asarray(s, dtype=float)
        idx = np.clip(np.rint((s - self.t[0]) / self.dt).astype(int), 0, len(self.t) - 1)
        y = self._states()[idx]
        h = (s - self.t[idx])[..., None]
        n_vec = 0 if self.frame is None else self.n - 1
        y = _rk4_step(_transport_rhs(self.chart, n_vec), y, h)
        n = self.n
        pos, vel = y[..., :n], y[..., n : 2 * n]
        frame = None
        if n_vec:
            frame = np.swapaxes(y[..., 2 * n :].reshape(s.shape + (n_vec, n)), -1, -2)
        return pos, vel, frame

    def to_csv(self, path):
        n = self.n
        header = ["t"] + [f"x{i+1}" for i in range(n)] + [f"v{i+1}" for i in range(n)]
        if self.frame is not None:
            header += [f"nu{a+2}_{i+1}" for a in range(n - 1) for i in range(n)]
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for k in range(len(self.t)):
                row = [self.t[k], *self.pos[k], *self.vel[k]]
                if self.frame is not None:
                    row += list(self.frame[k].T.ravel())
                w.writerow([repr(float(c)) for c in row])


def default_step(length: float) -> float:
    return min(1e-3, length / 2000.0)


def integrate_geodesic(chart: Chart, p, v, T: float, dt: Optional[float] = None) -> FramedGeodesic:
    """Geodesic path on [0, T] starting at p with unit initial velocity v."""
    p = np.asarray(p, float)
    v = np.asarray(v, float)
    speed = float(_norm_g(chart, p, v))
    if abs(speed - 1.0) > 1e-10:
        raise PreconditionError(f"initial velocity must have unit length (got {speed:.12f})")
    chart.check_domain(p)
    step = default_step(T) if dt is None else dt
    N = int(np.ceil(T / step - 1e-12))
    dt = T / N
    traj = _integrate(chart, np.concatenate([p, v]), dt, N)
    n = chart.n
    return FramedGeodesic(chart, np.linspace(0.0, T, N + 1), traj[:, :n], traj[:, n:])


def framed_geodesic(
    chart: Chart, p, v, L: float, frame0: Optional[Array] = None, dt: Optional[float] = None
) -> FramedGeodesic:
    """Framed unit-speed geodesic on [-L, L] with gamma(0) = p, gamma'(0) = v."""
    p = np.asarray(p, float)
    v = np.asarray(v, float)
    n = chart.n
    speed = float(_norm_g(chart, p, v))
    if abs(speed - 1.0) > 1e-10:
        raise PreconditionError(f"initial velocity must have unit length (got {speed:.12f})")
    chart.check_domain(p)
    if frame0 is None:
        frame0 = default_normal_frame(chart, p, v)
    frame0 = np.asarray(frame0, float)
    g = chart.g(p)
    E0 = np.concatenate([v[:, None], frame0], axis=1)
    if np.max(np.abs(E0.T @ g @ E0 - np.eye(n))) > 1e-8:
        raise OrientationError("initial frame is not orthonormal")
    if np.linalg.det(E0) <= 0:
        raise OrientationError("initial frame is not positively oriented")
    step = default_step(L) if dt is None else dt
    N = int(np.ceil(L / step - 1e-12))
    dt = L / N
    y0 = np.concatenate([p, v, frame0.T.ravel()])
    fwd = _integrate(chart, y0, dt, N, n - 1, t0=0.0)
    y0b = np.concatenate([p, -v, frame0.T.ravel()])
    bwd = _integrate(chart, y0b, dt, N, n - 1, t0=0.0)
    bwd = bwd[::-1]
    bwd[:, n : 2 * n] *= -1
    traj = np.concatenate([bwd[:-1], fwd], axis=0)
    t = np.linspace(-L, L, 2 * N + 1)
    M = len(t)
    frame = np.swapaxes(traj[:, 2 * n :].reshape(M, n - 1, n), 1, 2)
    return FramedGeodesic(chart, t, traj[:, :n], traj[:, n : 2 * n], frame)


def parallel_frame(chart: Chart, path: FramedGeodesic, frame0: Optional[Array] = None) -> FramedGeodesic:
    """Attach a parallel orthonormal normal frame to a geodesic path.

    The transport equation is integrated jointly with the geodesic from the
    path's first station on the same grid.
    """
    p, v = path.pos[0], path.vel[0]
    n = chart.n
    if frame0 is None:
        frame0 = default_normal_frame(chart, p, v)
    frame0 = np.asarray(frame0, float)
    E0 = np.concatenate([v[:, None], frame0], axis=1)
    g = chart.g(p)
    if np.max(np.abs(E0.T @ g @ E0 - np.eye(n))) > 1e-8 or np.linalg.det(E0) <= 0:
        raise OrientationError("degenerate or negatively oriented initial frame")
    M = len(path.t)
    y0 = np.concatenate([p, v, frame0.T.ravel()])
    traj = _integrate(chart, y0, path.dt, M - 1, n - 1, t0=path.t[0])
    frame = np.swapaxes(traj[:, 2 * n :].reshape(M, n - 1, n), 1, 2)
    return FramedGeodesic(chart, path.t.copy(), traj[:, :n], traj[:, n : 2 * n], frame)


# ------------------------------------------------------------- exp and log

EXP_STEP = 2e-3


def _exp_nsteps(chart, p, v):
    r = float(np.max(_norm_g(chart, p, v), initial=0.0))
    return max(8, int(np.ceil(r / EXP_STEP)))


def exp_map(chart: Chart, p, v, nsteps: Optional[int] = None) -> Array:
    """exp_p(v) by integrating the geodesic for unit time; batched over leading axes."""
    p = np.asarray(p, float)
    v = np.asarray(v, float)
    p, v = np.broadcast_arrays(p, v)
    if nsteps is None:
        nsteps = _exp_nsteps(chart, p, v)
    y = _integrate(chart, np.concatenate([p, v], axis=-1), 1.0 / nsteps, nsteps, store=False)
    return y[..., : chart.n]


def exp_with_velocity(chart: Chart, p, v, nsteps: Optional[int] = None):
    p, v = np.broadcast_arrays(np.asarray(p, float), np.asarray(v, float))
    if nsteps is None:
        nsteps = _exp_nsteps(chart, p, v)
    y = _integrate(chart, np.concatenate([p, v], axis=-1), 1.0 / nsteps, nsteps, store=False)
    return y[..., : chart.n], y[..., chart.n :]


def _exp_jacobian(chart, p, v, nsteps, delta=1e-6):
    n = chart.n
    eye = np.eye(n) * delta
    vp = v[None] + eye.reshape((n,) + (1,) * (v.ndim - 1) + (n,))
    vm = v[None] - eye.reshape((n,) + (1,) * (v.ndim - 1) + (n,))
    vv = np.concatenate([vp, vm])
    both = exp_map(chart, np.broadcast_to(p, vv.shape), vv, nsteps)
    diff = (both[:n] - both[n:]) / (2 * delta)
    return np.moveaxis(diff, 0, -1)


def log_map(
    chart: Chart,
    p,
    q,
    tol: float = 1e-10,
    max_iter: int = 50,
    r_inj: Optional[float] = None,
) -> Array:
    """exp_p^{-1}(q) by damped Gauss-Newton shooting; batched."""
    p = np.asarray(p, float)
    q = np.asarray(q, float)
    p, q = np.broadcast_arrays(p, q)
    r_inj = chart.r_inj if r_inj is None else r_inj
    v = (q - p).copy()
    try:
        res = exp_map(chart, p, v) - q
        err = np.linalg.norm(res, axis=-1)
        for _ in range(max_iter):
            if np.all(err <= tol):
                break
            ns = _exp_nsteps(chart, p, v)
            Jac = _exp_jacobian(chart, p, v, ns)
            step = -np.linalg.solve(Jac, res[..., None])[..., 0]
            lam = np.ones(err.shape)
            active = err > tol
            for _damp in range(30):
                trial = v + np.where(active, lam, 0.0)[..., None] * step
                try:
                    res_t = exp_map(chart, p, trial) - q
                except TruncationError:
                    # overshoot out of the chart: damp every active point
                    lam = np.where(active, 0.5 * lam, lam)
                    continue
                err_t = np.linalg.norm(res_t, axis=-1)
                worse = active & (err_t > err)
                if not np.any(worse):
                    break
                lam = np.where(worse, 0.5 * lam, lam)
            v, res, err = trial, res_t, err_t
    except (TruncationError, np.linalg.LinAlgError) as exc:
        raise InjectivityError(f"shooting failed: {exc}") from exc
    if not np.all(err <= tol):
        raise InjectivityError(f"shooting did not converge (residual {np.max(err):.3e})")
    if np.any(_norm_g(chart, p, v) > r_inj):
        raise InjectivityError("points are beyond the injectivity bound")
    return v


def geodesic_distance(chart: Chart, p, q) -> Array:
    return _norm_g(chart, np.asarray(p, float), log_map(chart, p, q))


# ----------------------------------------------------------- Jacobi fields


@dataclass(eq=False)
class JacobiData:
    """Jacobi field J and skew frame variation B along a framed geodesic (Fermi components)."""

    t: Array
    J: Array
    B: Array
    dB: Array

    @property
    def dJ(self) -> Array:
        return self.B[:, :, 0]

    @property
    def ddJ(self) -> Array:
        return self.dB[:, :, 0]


def skew_from_params(params, m: int) -> Array:
    W = np.zeros((m, m))
    iu = np.triu_indices(m, 1)
    W[iu] = params
    return W - W.T


def jacobi_solve(curv, J0, dJ0, W0=None, t: Optional[Array] = None) -> JacobiData:
    """Solve J'' = -R(J, e1) e1 and B' = -R(J, e1) from the first grid point.

    ``curv`` provides ``t`` and ``at(s) -> R[s, a, b, c, d]`` in the frame
    (gamma', nu).  B(t0) has first column dJ0 and lower block W0.
    """
    J0 = np.asarray(J0, float)
    dJ0 = np.asarray(dJ0, float)
    n = J0.shape[0]
    if abs(J0[0]) > 1e-8 or abs(dJ0[0]) > 1e-8:
        raise PreconditionError("Jacobi data must be normal: J0_1 = dJ0_1 = 0")
    t = curv.t if t is None else np.asarray(t, float)
    B0 = np.zeros((n, n))
    B0[:, 0] = dJ0
    B0[0, :] = -dJ0
    if W0 is not None:
        B0[1:, 1:] = np.asarray(W0, float)
    if np.max(np.abs(B0 + B0.T)) > 1e-12:
        raise PreconditionError("initial frame variation must be skew")

    def rhs_at(R):
        def f(y):
            J = y[:n]
            out = np.empty_like(y)
            out[:n] = y[n : 2 * n]
            out[n : 2 * n] = -R[:, 0, :, 0] @ J
            out[2 * n :] = -np.einsum("kjl,l->kj", R[:, :, :, 0], J).ravel()
            return out

        return f

    M = len(t)
    Y = np.empty((M, 2 * n + n * n))
    Y[0] = np.concatenate([J0, dJ0, B0.ravel()])
    for i in range(M - 1):
        dt = t[i + 1] - t[i]
        R0, Rm, R1 = curv.at(np.array([t[i], t[i] + 0.5 * dt, t[i + 1]]))
        y = Y[i]
        k1 = rhs_at(R0)(y)
        k2 = rhs_at(Rm)(y + 0.5 * dt * k1)
        k3 = rhs_at(Rm)(y + 0.5 * dt * k2)
        k4 = rhs_at(R1)(y + dt * k3)
        Y[i + 1] = y + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    J = Y[:, :n]
    B = Y[:, 2 * n :].reshape(M, n, n)
    if np.max(np.abs(J[:, 0])) > 1e-8:
        raise PreconditionError("J_1 drifted from zero; curvature field lacks symmetries")
    Rs = curv.at(t)
    dB = -np.einsum("skjl,sl->skj", Rs[:, :, :, :, 0], J)
    return JacobiData(t=t, J=J, B=B, dB=dB)


def rotation_from_params(params, n: int) -> Array:
    return expm(skew_from_params(params, n))


def exp_comparison_residual(chart: Chart, p, q, v) -> Array:
    """|psi(v) - psi(0) - dpsi(0) v|_g(q) for psi = exp_q^{-1} o exp_p; batched over v.

    dpsi(0) is the inverse of d exp_q at psi(0), since d exp_p(0) is the identity.
    """
    p = np.asarray(p, float)
    q = np.asarray(q, float)
    v = np.asarray(v, float)
    psi0 = log_map(chart, q, p, tol=1e-13)
    ns = 4 * _exp_nsteps(chart, q, psi0)
    D = _exp_jacobian(chart, q, psi0, ns)
    dpsi = np.linalg.inv(D)
    pts = exp_map(chart, np.broadcast_to(p, v.shape), v)
    psi = log_map(chart, np.broadcast_to(q, v.shape), pts, tol=1e-13)
    res = psi - psi0 - v @ dpsi.T
    return _norm_g(chart, np.broadcast_to(q, v.shape), res)
