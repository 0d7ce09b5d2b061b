"""Fermi coordinates along framed geodesics.

Points of the tube are written x = (x1, x') with x1 the arclength along the
geodesic and x' the coefficients of the normal frame at gamma(x1).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import ChartValidityError, LiftError, PreconditionError
from .geodesic import (
    EXP_STEP,
    FramedGeodesic,
    _rk4_step,
    _transport_rhs,
    exp_map,
)
from .geometry import (
    christoffel_from_derivs,
    curvature,
    frame_components,
    project_curvature,
    symmetry_defect,
)

Array = np.ndarray

ETA_PSI = 1e-5


# ----------------------------------------------------------- curvature field


@dataclass(eq=False)
class CurvatureField:
    """R[s, a, b, c, d] = R(E_a, E_b, E_c, E_d) at gamma(t_s), E = (gamma', nu_2, ..., nu_n)."""

    t: Array
    R: Array
    defect: float = 0.0
    _spline: Optional[CubicSpline] = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return self.R.shape[-1]

    def at(self, s) -> Array:
        s = np.asarray(s, float)
        if self._spline is None:
            self._spline = CubicSpline(self.t, self.R, axis=0)
        return self._spline(s)

    def resample(self, t) -> "CurvatureField":
        return CurvatureField(np.asarray(t, float), self.at(t), self.defect)

    def rotate_normal(self, Rot: Array) -> "CurvatureField":
        """Components after replacing the normal frame nu by nu @ Rot."""
        n = self.n
        F = np.eye(n)
        F[1:, 1:] = Rot
        return CurvatureField(self.t, frame_components(self.R, F), self.defect)

    def __sub__(self, other: "CurvatureField") -> "CurvatureField":
        if len(self.t) != len(other.t) or np.max(np.abs(self.t - other.t)) > 1e-12:
            raise PreconditionError("curvature fields live on different grids")
        return CurvatureField(self.t, self.R - other.R, max(self.defect, other.defect))


def curvature_field(fg: FramedGeodesic) -> CurvatureField:
    Rc = curvature(fg.chart, fg.pos)
    Rf = frame_components(Rc, fg.E)
    defect = symmetry_defect(Rf)
    return CurvatureField(fg.t.copy(), project_curvature(Rf), defect)


# ----------------------------------------------------------------- T tensor


def t_coefficients(R: Array) -> Array:
    """C[..., i, j, k, l] with T_ij(x') = sum_kl C_ijkl x'_k x'_l.

    T_ij = -c_ij * sum_kl R_{j k i l} x_k x_l with c = 1/2, 1/3, 1/6 for
    none, one or two indices among i, j normal.
    """
    n = R.shape[-1]
    c = np.full((n, n), 1.0 / 6.0)
    c[0, :] = c[:, 0] = 1.0 / 3.0
    c[0, 0] = 0.5
    # R[j, k, i, l] with k, l normal -> (i, j, k, l)
    A = np.einsum("...jkil->...ijkl", R[..., :, 1:, :, 1:])
    C = -c[:, :, None, None] * A
    return 0.5 * (C + np.swapaxes(C, -1, -2))


@dataclass(eq=False)
class TField:
    """Quadratic forms T(x1, .) on a station grid."""

    t: Array
    C: Array
    _spline: Optional[CubicSpline] = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return self.C.shape[-3]

    def coeffs_at(self, s) -> Array:
        if self._spline is None:
            self._spline = CubicSpline(self.t, self.C, axis=0)
        return self._spline(np.asarray(s, float))

    def resample(self, t) -> "TField":
        return TField(np.asarray(t, float), self.coeffs_at(t))

    def __call__(self, x1, xp) -> Array:
        """T(x1, x') as an n x n matrix; x1 (...), xp (..., n-1)."""
        C = self.coeffs_at(x1)
        return np.einsum("...ijkl,...k,...l->...ij", C, xp, xp)

    def __sub__(self, other: "TField") -> "TField":
        if len(self.t) != len(other.t) or np.max(np.abs(self.t - other.t)) > 1e-12:
            raise PreconditionError("T fields live on different grids")
        return TField(self.t, self.C - other.C)

    def __mul__(self, a: float) -> "TField":
        return TField(self.t, a * self.C)

    __rmul__ = __mul__


def t_tensor(curv: CurvatureField) -> TField:
    return TField(curv.t.copy(), t_coefficients(curv.R))


def evaluate_quadratic(C: Array, xp: Array) -> Array:
    """Evaluate per-station coefficients C (S, n, n, m, m) at nodes xp (N, m) -> (S, N, n, n)."""
    return np.einsum("sijkl,ak,al->saij", C, xp, xp)


def shifted_coefficients(C: Array, a: Array):
    """Split T(a + x') = T(a) + linear(x') + T(x').

    Returns (const (S,n,n), lin (S,n,n,m)) with lin_ijl = 2 sum_k C_ijkl a_k.
    """
    const = np.einsum("sijkl,sk,sl->sij", C, a, a)
    lin = 2.0 * np.einsum("sijkl,sk->sijl", C, a)
    return const, lin


# --------------------------------------------------------------- Fermi maps


def _nsteps_for(chart, pos, V):
    g = chart.g(pos)
    r = float(np.max(np.sqrt(np.einsum("...i,...ij,...j->...", V, g, V)), initial=0.0))
    return max(8, int(np.ceil(r / EXP_STEP)))


def fermi_map(fg: FramedGeodesic, x, nsteps: Optional[int] = None) -> Array:
    """psi(x1, x') = exp_{gamma(x1)}(sum_k x_k nu_k(x1)); batched over leading axes."""
    x = np.asarray(x, float)
    pos, _vel, frame = fg.state_at(x[..., 0])
    V = np.einsum("...ia,...a->...i", frame, x[..., 1:])
    if nsteps is None:
        nsteps = _nsteps_for(fg.chart, pos, V)
    return exp_map(fg.chart, pos, V, nsteps)


def fermi_jacobian(fg: FramedGeodesic, x, eta: float = ETA_PSI, nsteps: Optional[int] = None):
    """(psi(x), D psi(x)) with central differences of step eta; columns are d_a psi."""
    x = np.asarray(x, float)
    n = fg.n
    if nsteps is None:
        pos, _v, frame = fg.state_at(x[..., 0])
        V = np.einsum("...ia,...a->...i", frame, x[..., 1:])
        nsteps = _nsteps_for(fg.chart, pos, V) + 2
    E = np.eye(n) * eta
    shp = (n,) + (1,) * (x.ndim - 1) + (n,)
    stencil = np.concatenate([x[None], x[None] + E.reshape(shp), x[None] - E.reshape(shp)])
    pts = fermi_map(fg, stencil, nsteps)
    D = (pts[1 : n + 1] - pts[n + 1 :]) / (2 * eta)
    return pts[0], np.moveaxis(D, 0, -1)


def pullback_metric(fg: FramedGeodesic, x, eta: float = ETA_PSI) -> Array:
    """g(psi(x))(D psi e_i, D psi e_j) with the differential from central differences."""
    p, D = fermi_jacobian(fg, x, eta)
    g = fg.chart.g(p)
    return np.einsum("...ai,...ab,...bj->...ij", D, g, D)


def pullback_metric_jacobi(fg: FramedGeodesic, x, nsteps: Optional[int] = None) -> Array:
    """Metric in Fermi coordinates from Jacobi fields along the radial geodesic.

    Along c(t) = exp_{gamma(x1)}(t V), V = sum x_k nu_k, the parallel frame
    E(t) is carried and the coefficient matrix a (columns = Jacobi fields in
    that frame) solves a'' = K a with K_kl = -R(E_k, c', E_l, c').  The
    column for x1 starts at (e_1, 0), the normal ones at (0, e_i).  At t = 1
    the metric is a^T a.
    """
    x = np.asarray(x, float)
    chart = fg.chart
    n = fg.n
    shape = x.shape[:-1]
    pos, vel, frame = fg.state_at(x[..., 0])
    E0 = np.concatenate([vel[..., :, None], frame], axis=-1)
    V = np.einsum("...ia,...a->...i", frame, x[..., 1:])
    if nsteps is None:
        nsteps = _nsteps_for(chart, pos, V)
    dt = 1.0 / nsteps
    transport = _transport_rhs(chart, n)

    def rhs(y):
        geo = y[..., : 2 * n + n * n]
        a = y[..., 2 * n + n * n : 2 * n + 2 * n * n].reshape(shape + (n, n))
        ap = y[..., 2 * n + 2 * n * n :].reshape(shape + (n, n))
        dgeo = transport(geo)
        c = geo[..., :n]
        E = np.swapaxes(geo[..., 2 * n :].reshape(shape + (n, n)), -1, -2)
        Rc = curvature(chart, c)
        cdot = geo[..., n : 2 * n]
        K = -np.einsum("...pqrs,...pk,...q,...rl,...s->...kl", Rc, E, cdot, E, cdot, optimize=True)
        da = ap
        dap = np.einsum("...kl,...lj->...kj", K, a)
        return np.concatenate(
            [dgeo, da.reshape(shape + (n * n,)), dap.reshape(shape + (n * n,))], axis=-1
        )

    a0 = np.zeros(shape + (n, n))
    a0[..., 0, 0] = 1.0
    ap0 = np.zeros(shape + (n, n))
    for i in range(1, n):
        ap0[..., i, i] = 1.0
    y = np.concatenate(
        [
            pos,
            V,
            np.swapaxes(E0, -1, -2).reshape(shape + (n * n,)),
            a0.reshape(shape + (n * n,)),
            ap0.reshape(shape + (n * n,)),
        ],
        axis=-1,
    )
    for _ in range(nsteps):
        y = _rk4_step(rhs, y, dt)
    a = y[..., 2 * n + n * n : 2 * n + 2 * n * n].reshape(shape + (n, n))
    if not np.all(np.isfinite(a)):
        raise ChartValidityError("Jacobi system blew up; tube radius too large")
    return np.einsum("...ki,...kj->...ij", a, a)


def sqrt_metric(g) -> tuple[Array, Array]:
    """SPD square root and its inverse via the eigendecomposition."""
    g = np.asarray(g, float)
    w, U = np.linalg.eigh(g)
    if np.min(w) <= 0:
        raise ChartValidityError("matrix is not positive definite")
    s = np.sqrt(w)
    half = np.einsum("...ik,...k,...jk->...ij", U, s, U)
    inv_half = np.einsum("...ik,...k,...jk->...ij", U, 1.0 / s, U)
    return half, inv_half


def default_tube_radius(max_abs_sectional: float) -> float:
    return 0.3 / np.sqrt(max_abs_sectional + 1.0)


# ------------------------------------------------------- expansion checks


def christoffel_model(R: Array, xp: Array) -> Array:
    """Linear model for the Fermi Christoffel symbols, Gamma[k, i, j]."""
    n = R.shape[-1]
    X = np.concatenate([np.zeros(xp.shape[:-1] + (1,)), xp], axis=-1)
    G = np.empty(xp.shape[:-1] + (n, n, n))
    # i, j normal: -1/3 (R_kjil + R_kijl) x_l
    G[...] = -(np.einsum("...kjil,...l->...kij", R, X) + np.einsum("...kijl,...l->...kij", R, X)) / 3.0
    # Gamma^k_i1 = Gamma^k_1i = -R_ki1l x_l
    first = -np.einsum("...kil,...l->...ki", R[..., :, :, 0, :], X)
    G[..., :, :, 0] = first
    G[..., :, 0, :] = first
    return G


def _fit_slope(r, res):
    r = np.asarray(r, float)
    res = np.maximum(np.asarray(res, float), 1e-300)
    return float(np.polyfit(np.log(r), np.log(res), 1)[0])


def validate_expansion(
    fg: FramedGeodesic,
    radii,
    n_dirs: int = 6,
    n_stations: int = 3,
    eta_gamma: float = 1e-4,
    seed: int = 0,
) -> dict:
    """Residuals of the metric, square-root and Christoffel expansions per radius."""
    radii = [float(r) for r in radii]
    if len(radii) < 3:
        raise PreconditionError("need at least three radii")
    n = fg.n
    m = n - 1
    rng = np.random.default_rng(seed)
    if m == 1:
        dirs = np.array([[1.0], [-1.0]])
    else:
        dirs = rng.normal(size=(n_dirs, m))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    L = fg.L
    x1s = np.linspace(-0.5 * L, 0.5 * L, n_stations)
    curv = curvature_field(fg)
    T = t_tensor(curv)
    out = {"radii": radii, "metric": [], "sqrt": [], "christoffel": []}
    for r in radii:
        X1, D = np.meshgrid(x1s, np.arange(len(dirs)), indexing="ij")
        xp = r * dirs[D]
        x = np.concatenate([X1[..., None], xp], axis=-1)
        gbar = pullback_metric(fg, x)
        Tm = T(X1, xp)
        eye = np.eye(n)
        out["metric"].append(float(np.max(np.abs(gbar - eye - 2 * Tm))))
        half, inv_half = sqrt_metric(gbar)
        out["sqrt"].append(
            float(max(np.max(np.abs(half - eye - Tm)), np.max(np.abs(inv_half - eye + Tm))))
        )
        # Christoffels of the Fermi metric by central differences of the smooth Jacobi route
        g0 = pullback_metric_jacobi(fg, x)
        dg = np.empty(x.shape[:-1] + (n, n, n))
        for a in range(n):
            e = np.zeros(n)
            e[a] = eta_gamma
            nst = _nsteps_for(fg.chart, *_base_and_offset(fg, x)) + 2
            dg[..., a] = (
                pullback_metric_jacobi(fg, x + e, nst) - pullback_metric_jacobi(fg, x - e, nst)
            ) / (2 * eta_gamma)
        gam = christoffel_from_derivs(g0, dg)
        model = christoffel_model(curv.at(X1), xp)
        out["christoffel"].append(float(np.max(np.abs(gam - model))))
    out["exact"] = bool(max(max(out["metric"]), max(out["sqrt"]), max(out["christoffel"])) <= 1e-10)
    out["slopes"] = {
        key: (None if out["exact"] else _fit_slope(radii, out[key]))
        for key in ("metric", "sqrt", "christoffel")
    }
    return out


def _base_and_offset(fg, x):
    pos, _v, frame = fg.state_at(x[..., 0])
    return pos, np.einsum("...ia,...a->...i", frame, x[..., 1:])


# -------------------------------------------------------------------- lift


def lift(
    fg: FramedGeodesic,
    q,
    s=None,
    tol: float = 1e-10,
    max_iter: int = 50,
    x0=None,
) -> Array:
    """Solve psi(x) = q by damped Newton started at (s, 0); batched over leading axes."""
    q = np.asarray(q, float)
    n = fg.n
    shape = q.shape[:-1]
    if x0 is None:
        x = np.zeros(shape + (n,))
        x[..., 0] = 0.0 if s is None else np.broadcast_to(np.asarray(s, float), shape)
    else:
        x = np.array(x0, float)
    res = fermi_map(fg, x) - q
    err = np.linalg.norm(res, axis=-1)
    for _ in range(max_iter):
        if np.all(err <= tol):
            break
        _p, D = fermi_jacobian(fg, x)
        step = -np.linalg.solve(D, res[..., None])[..., 0]
        active = err > tol
        lam = np.ones(shape)
        for _damp in range(30):
            trial = x + np.where(active, lam, 0.0)[..., None] * step
            res_t = fermi_map(fg, trial) - q
            err_t = np.linalg.norm(res_t, axis=-1)
            worse = active & (err_t > err)
            if not np.any(worse):
                break
            lam = np.where(worse, 0.5 * lam, lam)
        x, res, err = trial, res_t, err_t
    if not np.all(err <= tol):
        raise LiftError(f"lift did not converge (residual {np.max(err):.3e})")
    return x


def chart_transition_check(
    fg_a: FramedGeodesic,
    fg_b: FramedGeodesic,
    h: float,
    n_stations: int = 5,
    n_dirs: int = 6,
    seed: int = 0,
) -> dict:
    """Compare the metric defect of Phi = lift_a o psi_b with the curvature model.

    With z = (z1, h zeta') the scaled defect (D Phi^T D Phi - Id) / h^2 is
    compared with 2 [T_a(z1, zeta') - T_a(z1, J + zeta')], where J is the
    normal part of Phi(z1, 0) / h.
    """
    n = fg_b.n
    m = n - 1
    rng = np.random.default_rng(seed)
    L = min(fg_a.L, fg_b.L)
    z1 = np.linspace(-0.5 * L, 0.5 * L, n_stations)
    if m == 1:
        dirs = np.array([[0.0], [0.5], [-0.5], [1.0], [-1.0]])
    else:
        dirs = rng.normal(size=(n_dirs, m))
        dirs *= (rng.uniform(0.2, 1.0, n_dirs) / np.linalg.norm(dirs, axis=1))[:, None]
        dirs = np.concatenate([np.zeros((1, m)), dirs])
    Z1, Di = np.meshgrid(z1, np.arange(len(dirs)), indexing="ij")
    zeta = dirs[Di]
    z = np.concatenate([Z1[..., None], h * zeta], axis=-1)
    qz, Db = fermi_jacobian(fg_b, z)
    phi = lift(fg_a, qz, s=Z1, tol=1e-12)
    _qa, Da = fermi_jacobian(fg_a, phi)
    DPhi = np.linalg.solve(Da, Db)
    defect = (np.einsum("...ki,...kj->...ij", DPhi, DPhi) - np.eye(n)) / h**2
    axis = np.concatenate([z1[:, None], np.zeros((n_stations, m))], axis=-1)
    eta = lift(fg_a, fermi_map(fg_b, axis), s=z1, tol=1e-12)
    J = eta[:, 1:] / h
    Ta = t_tensor(curvature_field(fg_a))
    model = 2.0 * (Ta(Z1, zeta) - Ta(Z1, J[:, None, :] + zeta))
    dev = float(np.max(np.abs(defect - model)))
    return {"h": float(h), "deficit": dev, "J_max": float(np.max(np.abs(J)))}
