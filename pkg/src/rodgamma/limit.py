"""The limit functional of thin rods and its reduced forms.

A rod state is the quadruple (w, y, Z, beta) on a grid over [-L, L]; beta
is stored per station as vector polynomials on the unit ball of the normal
space.  Shapes: S stations, m = n - 1 normal directions, N quadrature
nodes on the ball.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np
from scipy.integrate import cumulative_trapezoid, trapezoid

from .ball import PolyBasis, ball_rule, ball_volume
from .errors import DomainError, PreconditionError, RodGammaError
from .fermi import (
    CurvatureField,
    TField,
    curvature_field,
    evaluate_quadratic,
    shifted_coefficients,
    t_coefficients,
)
from .geodesic import FramedGeodesic, JacobiData, framed_geodesic, rotation_from_params
from .geometry import orthonormal_frame, symmetry_defect

Array = np.ndarray

BETA_DEGREE = 3
QUAD_DEGREE = 10


def station_average(values: Array, t: Array) -> float:
    """Trapezoid mean over the x1 grid."""
    if len(t) == 1:
        return float(values[0])
    return float(trapezoid(values, t) / (t[-1] - t[0]))


# ------------------------------------------------------------------ state


def assemble_A(dy: Array, Z: Array) -> Array:
    """A = [[0, -dy^T], [dy, Z]] per station."""
    dy = np.asarray(dy, float)
    S, m = dy.shape
    A = np.zeros((S, m + 1, m + 1))
    A[:, 1:, 0] = dy
    A[:, 0, 1:] = -dy
    A[:, 1:, 1:] = Z
    return A


@dataclass(eq=False)
class RodState:
    """Limit quadruple with explicitly stored derivatives."""

    t: Array
    w: Array
    dw: Array
    y: Array
    dy: Array
    ddy: Array
    Z: Array
    dZ: Array
    beta: Array
    degree: int = BETA_DEGREE

    @property
    def n(self) -> int:
        return self.y.shape[1] + 1

    @property
    def m(self) -> int:
        return self.y.shape[1]

    @property
    def basis(self) -> PolyBasis:
        return _basis(self.m, self.degree)

    def A(self) -> Array:
        return assemble_A(self.dy, self.Z)

    @classmethod
    def zeros(cls, t, n: int, degree: int = BETA_DEGREE) -> "RodState":
        t = np.asarray(t, float)
        S, m = len(t), n - 1
        nmon = len(_basis(m, degree))
        z1, zm, zmm = np.zeros(S), np.zeros((S, m)), np.zeros((S, m, m))
        return cls(t, z1, z1.copy(), zm, zm.copy(), zm.copy(), zmm, zmm.copy(), np.zeros((S, n, nmon)), degree)

    @classmethod
    def from_values(cls, t, w, y, Z=None, beta=None, degree: int = BETA_DEGREE) -> "RodState":
        """Derivatives by second-order finite differences of the grid values."""
        t = np.asarray(t, float)
        w = np.asarray(w, float)
        y = np.asarray(y, float)
        S, m = y.shape
        Z = np.zeros((S, m, m)) if Z is None else np.asarray(Z, float)
        if beta is None:
            beta = np.zeros((S, m + 1, len(_basis(m, degree))))
        dy = np.gradient(y, t, axis=0, edge_order=2)
        return cls(
            t=t,
            w=w,
            dw=np.gradient(w, t, edge_order=2),
            y=y,
            dy=dy,
            ddy=np.gradient(dy, t, axis=0, edge_order=2),
            Z=Z,
            dZ=np.gradient(Z, t, axis=0, edge_order=2),
            beta=normalize_B(np.asarray(beta, float), degree),
            degree=degree,
        )

    def check_invariants(self, tol: float = 1e-10):
        if np.max(np.abs(self.Z + np.swapaxes(self.Z, 1, 2)), initial=0.0) > 1e-12:
            raise PreconditionError("Z is not skew")
        if self.n == 2 and np.max(np.abs(self.Z)) > 0:
            raise PreconditionError("Z must vanish for n = 2")
        mean, skew = class_B_defect(self.beta, self.degree)
        if mean > tol or skew > tol:
            raise PreconditionError(f"beta not in the admissible class (mean {mean:.2e}, skew {skew:.2e})")

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "degree": self.degree,
            "monomials": [list(map(int, e)) for e in self.basis.exps],
            "t": self.t.tolist(),
            "w": self.w.tolist(),
            "dw": self.dw.tolist(),
            "y": self.y.tolist(),
            "dy": self.dy.tolist(),
            "ddy": self.ddy.tolist(),
            "Z": self.Z.tolist(),
            "dZ": self.dZ.tolist(),
            "beta": self.beta.tolist(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "RodState":
        a = {k: np.asarray(d[k], float) for k in ("t", "w", "dw", "y", "dy", "ddy", "Z", "dZ", "beta")}
        return cls(degree=int(d["degree"]), **a)


@lru_cache(maxsize=None)
def _basis(m: int, degree: int) -> PolyBasis:
    return PolyBasis(m, degree)


def class_B_defect(beta: Array, degree: int) -> tuple[float, float]:
    """Max |mean| and max |skew first moment| (normal components) of beta."""
    S, n, _ = beta.shape
    m = n - 1
    basis = _basis(m, degree)
    avg0 = basis.averages()
    mean = float(np.max(np.abs(beta @ avg0)))
    skew = 0.0
    for i in range(m):
        ai = basis.averages(np.eye(m, dtype=int)[i])
        mom = beta[:, 1:, :] @ ai  # avg beta_c x_i, shape (S, m)
        for j in range(m):
            if j != i:
                skew = max(skew, float(np.max(np.abs(mom[:, j] - _moment(beta, basis, i, j)))))
    return mean, skew


def _moment(beta, basis, c, i):
    """avg of beta_{c+1} * x_i per station."""
    m = basis.m
    return beta[:, 1 + c, :] @ basis.averages(np.eye(m, dtype=int)[i])


def normalize_B(beta: Array, degree: int) -> Array:
    """Project onto the admissible class: zero mean, zero skew moments.

    The skew moments are removed by adding W x' to the normal components, W
    skew; this leaves sym grad beta' unchanged.
    """
    beta = np.array(beta, float)
    S, n, nmon = beta.shape
    m = n - 1
    basis = _basis(m, degree)
    c0 = basis.index((0,) * m)
    lin = [basis.index(np.eye(m, dtype=int)[k]) for k in range(m)]
    I2 = 1.0 / (m + 2)
    mom = np.stack(
        [beta[:, 1:, :] @ basis.averages(np.eye(m, dtype=int)[i]) for i in range(m)], axis=-1
    )  # mom[s, c, i] = avg beta'_c x_i
    Mskew = np.swapaxes(mom, 1, 2) - mom  # M_ij = avg(beta_j x_i - beta_i x_j)
    W = Mskew / (2 * I2)
    for c in range(m):
        for k in range(m):
            beta[:, 1 + c, lin[k]] += W[:, c, k]
    beta[:, :, c0] -= beta @ basis.averages()
    return beta


# --------------------------------------------------------------- Q forms


def q1(Apar) -> float:
    Apar = np.asarray(Apar, float)
    if np.max(np.abs(Apar - Apar.T), initial=0.0) > 1e-10 * (1 + np.max(np.abs(Apar))):
        raise PreconditionError("Apar must be symmetric")
    n = Apar.shape[0] + 1
    return float(
        np.sum(Apar**2) / (2 * (n + 1) * (n + 3)) - np.trace(Apar) ** 2 / (2 * (n + 1) ** 2 * (n + 3))
    )


def q1_bruteforce(Apar, degree: int = QUAD_DEGREE) -> float:
    """1/4 [avg (Apar x.x)^2 - (avg Apar x.x)^2] by ball quadrature."""
    Apar = np.asarray(Apar, float)
    m = Apar.shape[0]
    X, w = ball_rule(m, degree)
    w = w / ball_volume(m)
    q = np.einsum("ak,kl,al->a", X, Apar, X)
    return float(0.25 * (w @ q**2 - (w @ q) ** 2))


class CrossSection:
    """Galerkin solvers for the two cross-section minimizations on B_1 in R^m.

    * scalar: min avg |grad b + f|^2 over b
    * vector: min avg |sym grad b + F|^2 over b (R^m valued)

    Trial spaces are polynomials of total degree <= degree.
    """

    def __init__(self, m: int, degree: int = BETA_DEGREE, quad_degree: Optional[int] = None):
        self.m = m
        self.degree = degree
        qd = max(QUAD_DEGREE, 2 * degree + 2) if quad_degree is None else quad_degree
        X, w = ball_rule(m, qd)
        self.X = X
        self.w = w / ball_volume(m)
        self.basis = _basis(m, degree)
        grad = self.basis.grad(X)[:, 1:, :]  # drop the constant, (N, nb, m)
        self.Gs = grad
        self.Ms = np.einsum("a,apj,aqj->pq", self.w, grad, grad)
        nb = grad.shape[1]
        # vector basis: component c times monomial p; sym grad
        Sv = np.zeros((len(X), m * nb, m, m))
        for c in range(m):
            for p in range(nb):
                k = c * nb + p
                Sv[:, k, c, :] += 0.5 * grad[:, p, :]
                Sv[:, k, :, c] += 0.5 * grad[:, p, :]
        self.Sv = Sv
        Mv = np.einsum("a,apij,aqij->pq", self.w, Sv, Sv)
        self.Mv_pinv = np.linalg.pinv(Mv, rcond=1e-12, hermitian=True)
        self.Ms_inv = np.linalg.inv(self.Ms)

    def nodes_values(self, C: Array) -> Array:
        return evaluate_quadratic(C, self.X)

    def solve_scalar(self, f: Array):
        """f (S, N, m) -> (coeffs over nonconstant monomials (S, nb), objective (S,))."""
        rhs = -np.einsum("a,apj,saj->sp", self.w, self.Gs, f)
        c = rhs @ self.Ms_inv.T
        r = np.einsum("apj,sp->saj", self.Gs, c) + f
        return c, np.einsum("a,saj,saj->s", self.w, r, r)

    def solve_vector(self, F: Array):
        """F (S, N, m, m) symmetric -> (coeffs (S, m, nb), objective (S,))."""
        rhs = -np.einsum("a,apij,saij->sp", self.w, self.Sv, F)
        c = rhs @ self.Mv_pinv.T
        r = np.einsum("apij,sp->saij", self.Sv, c) + F
        return c.reshape(len(c), self.m, -1), np.einsum("a,saij,saij->s", self.w, r, r)

    def minimize(self, C: Array) -> dict:
        """Optimal beta for T_hat coefficients C (S, n, n, m, m)."""
        C = np.asarray(C, float)
        single = C.ndim == 4
        if single:
            C = C[None]
        Tv = self.nodes_values(C)
        S = len(C)
        t11 = Tv[:, :, 0, 0]
        mean11 = t11 @ self.w
        var = (t11 - mean11[:, None]) ** 2 @ self.w
        c1, obj1 = self.solve_scalar(2.0 * Tv[:, :, 0, 1:])
        cv, objv = self.solve_vector(Tv[:, :, 1:, 1:])
        nmon = len(self.basis)
        beta = np.zeros((S, self.m + 1, nmon))
        beta[:, 0, 1:] = c1
        beta[:, 1:, 1:] = cv
        beta = normalize_B(beta, self.degree)
        out = {
            "beta": beta[0] if single else beta,
            "dw": -mean11[0] if single else -mean11,
            "var11": var,
            "first_row": 0.5 * obj1,
            "normal_block": objv,
        }
        if single:
            out = {k: (v[0] if k in ("var11", "first_row", "normal_block") else v) for k, v in out.items()}
        return out

    def beta_gradients(self, beta: Array) -> Array:
        """(S, n, nmon) -> (S, N, n, m) gradients at the nodes."""
        G = self.basis.grad(self.X)
        return np.einsum("scp,apj->sacj", beta, G)


@lru_cache(maxsize=None)
def cross_section(m: int, degree: int = BETA_DEGREE) -> CrossSection:
    return CrossSection(m, degree)


def cross_section_minimize(C: Array, degree: int = BETA_DEGREE) -> dict:
    C = np.asarray(C, float)
    return cross_section(C.shape[-1], degree).minimize(C)


def _check_tensor(A: Array, tol: float = 1e-10):
    scale = 1.0 + float(np.max(np.abs(A)))
    if symmetry_defect(A) > tol * scale:
        raise PreconditionError("tensor lacks the curvature symmetries")


def q2(Aprime: Array, degree: int = BETA_DEGREE) -> float:
    """1/2 min avg sum_j (d_j b - 2/3 A'_jkl x_k x_l)^2 with A'_jkl = A_1kjl."""
    Aprime = np.asarray(Aprime, float)
    m = Aprime.shape[0]
    cs = cross_section(m, degree)
    f = -(2.0 / 3.0) * np.einsum("jkl,ak,al->aj", Aprime, cs.X, cs.X)
    _c, obj = cs.solve_scalar(f[None])
    return float(0.5 * obj[0])


def q3(Add: Array, degree: int = BETA_DEGREE) -> float:
    """min avg |sym grad b' - 1/6 A''_ikjl x_k x_l|^2."""
    Add = np.asarray(Add, float)
    m = Add.shape[0]
    cs = cross_section(m, degree)
    F = -(1.0 / 6.0) * np.einsum("ikjl,ak,al->aij", Add, cs.X, cs.X)
    _c, obj = cs.solve_vector(F[None])
    return float(obj[0])


def split_tensor(A: Array):
    """(Apar, A', A'') index blocks of a 4-tensor."""
    A = np.asarray(A, float)
    Apar = A[0, 1:, 0, 1:]
    Aprime = np.einsum("kjl->jkl", A[0, 1:, 1:, 1:])
    Add = A[1:, 1:, 1:, 1:]
    return Apar, Aprime, Add


def q_total(A: Array, degree: int = BETA_DEGREE) -> float:
    A = np.asarray(A, float)
    _check_tensor(A)
    Apar, Ap, Add = split_tensor(A)
    return q1(Apar) + q2(Ap, degree) + q3(Add, degree)


def q_stations(A: Array, degree: int = BETA_DEGREE) -> Array:
    """Vectorized Q over stations, A of shape (S, n, n, n, n)."""
    A = np.asarray(A, float)
    _check_tensor(A)
    C = t_coefficients(A)
    res = cross_section(A.shape[-1] - 1, degree).minimize(C)
    return res["var11"] + res["first_row"] + res["normal_block"]


# ------------------------------------------------------------- functionals


def _G_minus_T(rs: RodState, Cs: Array, Ct: Array, cs: CrossSection) -> Array:
    X = cs.X
    S, n = len(rs.t), rs.n
    A = rs.A()
    A2 = A @ A
    G = np.zeros((S, len(X), n, n))
    G[:, :, 0, 0] = rs.dw[:, None] - rs.ddy @ X.T
    G[:, :, 1:, 0] = np.einsum("sjk,ak->saj", rs.dZ, X)
    G[:, :, :, 1:] = cs.beta_gradients(rs.beta)
    G -= 0.5 * A2[:, None]
    symG = 0.5 * (G + np.swapaxes(G, -1, -2))
    Tsrc = evaluate_quadratic(Cs, X)
    const, lin = shifted_coefficients(Ct, rs.y)
    Ttgt = const[:, None] + np.einsum("sijl,al->saij", lin, X) + evaluate_quadratic(Ct, X)
    return symG - (Tsrc - Ttgt)


def eval_I_density(rs: RodState, T_src: TField, T_tgt: TField) -> Array:
    cs = cross_section(rs.m, rs.degree)
    Cs = T_src.coeffs_at(rs.t)
    Ct = T_tgt.coeffs_at(rs.t)
    E = _G_minus_T(rs, Cs, Ct, cs)
    return np.einsum("a,saij,saij->s", cs.w, E, E)


def eval_I(rs: RodState, T_src: TField, T_tgt: TField) -> float:
    """Averaged double integral of |sym G - T|^2."""
    if T_src.n != rs.n or T_tgt.n != rs.n:
        raise PreconditionError("dimension mismatch between state and T fields")
    for T in (T_src, T_tgt):
        if rs.t[0] < T.t[0] - 1e-12 or rs.t[-1] > T.t[-1] + 1e-12:
            raise PreconditionError("state grid exceeds the curvature grid")
    return station_average(eval_I_density(rs, T_src, T_tgt), rs.t)


def eval_J_density(beta: Array, C_hat: Array, degree: int = BETA_DEGREE) -> Array:
    S, n, _ = beta.shape
    cs = cross_section(n - 1, degree)
    Tv = evaluate_quadratic(C_hat, cs.X)
    t11 = Tv[:, :, 0, 0]
    var = (t11 - (t11 @ cs.w)[:, None]) ** 2 @ cs.w
    gb = cs.beta_gradients(beta)
    r1 = gb[:, :, 0, :] + 2.0 * Tv[:, :, 0, 1:]
    sgb = 0.5 * (gb[:, :, 1:, :] + np.swapaxes(gb[:, :, 1:, :], -1, -2))
    r2 = sgb + Tv[:, :, 1:, 1:]
    return var + 0.5 * np.einsum("a,saj,saj->s", cs.w, r1, r1) + np.einsum("a,saij,saij->s", cs.w, r2, r2)


def eval_J(beta: Array, T_hat, t: Optional[Array] = None, degree: int = BETA_DEGREE) -> float:
    """Reduced functional: variance of T_11 + first-row term + normal-block term.

    ``T_hat`` is a TField (resampled at ``t``) or a coefficient array (S, n, n, m, m).
    """
    if isinstance(T_hat, TField):
        t = T_hat.t if t is None else np.asarray(t, float)
        C = T_hat.coeffs_at(t)
    else:
        C = np.asarray(T_hat, float)
        t = np.arange(len(C), dtype=float) if t is None else np.asarray(t, float)
    return station_average(eval_J_density(np.asarray(beta, float), C, degree), t)


def optimal_state(T_src: TField, T_tgt: TField, t: Array, degree: int = BETA_DEGREE) -> RodState:
    """Zero y and Z, with w and beta minimizing the functional."""
    t = np.asarray(t, float)
    C_hat = T_tgt.coeffs_at(t) - T_src.coeffs_at(t)
    res = cross_section(C_hat.shape[-1], degree).minimize(C_hat)
    rs = RodState.zeros(t, C_hat.shape[1], degree)
    rs.dw = np.asarray(res["dw"], float)
    rs.w = cumulative_trapezoid(rs.dw, t, initial=0.0)
    rs.beta = res["beta"]
    return rs


def m_energy(
    fg_src: FramedGeodesic,
    fg_tgt: FramedGeodesic,
    degree: int = BETA_DEGREE,
    curv_src: Optional[CurvatureField] = None,
    curv_tgt: Optional[CurvatureField] = None,
    return_stations: bool = False,
):
    """Trapezoid mean of Q(R_tgt - R_src) along the stations."""
    if len(fg_src.t) != len(fg_tgt.t) or np.max(np.abs(fg_src.t - fg_tgt.t)) > 1e-12:
        raise PreconditionError("framed geodesics on different grids")
    cs_ = curvature_field(fg_src) if curv_src is None else curv_src
    ct_ = curvature_field(fg_tgt) if curv_tgt is None else curv_tgt
    q = q_stations(ct_.R - cs_.R, degree)
    val = station_average(q, fg_src.t)
    return (val, q) if return_stations else val


# ---------------------------------------------------------- equivalence


def _integrate_linear_gradient(c: Array, M: Array) -> tuple[Array, Array]:
    """Potential of the field c + M x by integration along coordinate paths.

    Returns (linear coeffs (S, m), quadratic matrix Q (S, m, m)) with the
    potential c.x + x^T Q x; exact when M is symmetric.
    """
    S, m = c.shape
    Q = np.zeros((S, m, m))
    for j in range(m):
        Q[:, j, j] = 0.5 * M[:, j, j]
        for l in range(j):
            Q[:, j, l] = M[:, j, l]
    return c, Q


def _add_quadratic(beta: Array, comp: int, lin: Array, Q: Array, degree: int):
    """beta[:, comp] += lin.x + x^T Q x."""
    m = lin.shape[1]
    basis = _basis(m, degree)
    eye = np.eye(m, dtype=int)
    for k in range(m):
        beta[:, comp, basis.index(eye[k])] += lin[:, k]
    for j in range(m):
        for l in range(m):
            beta[:, comp, basis.index(eye[j] + eye[l])] += Q[:, j, l]


@dataclass
class EquivalenceReport:
    state: RodState
    compatibility_defect: float


def apply_equivalence(
    rs: RodState,
    jd: JacobiData,
    curv_tgt: CurvatureField,
    negctl: bool = False,
    report: bool = False,
    beta1_sign: float = 1.0,
):
    """Move a rod state along the equivalence orbit given by Jacobi data (J, B).

    ``negctl`` flips the sign of the 1/2 (A_new^2 - A_old^2)_11 term in the
    w transform; this deliberately wrong transform is a negative control.
    ``beta1_sign`` is the sign in front of e_j . d(Z_old - Z_new) x' in the
    first-row transform.  Only +1 gives a curl-free gradient field; the
    defect is reported as ``compatibility_defect``.
    """
    t = rs.t
    if len(jd.t) != len(t) or np.max(np.abs(jd.t - t)) > 1e-12:
        raise PreconditionError("Jacobi data and state on different grids")
    m = rs.m
    Rt = curv_tgt.at(t)
    dB_chk = -np.einsum("skjl,sl->skj", Rt[:, :, :, :, 0], jd.J)
    scale = 1.0 + np.max(np.abs(jd.dB))
    if np.max(np.abs(dB_chk - jd.dB)) > 1e-8 * scale or np.max(np.abs(jd.J[:, 0])) > 1e-8:
        raise PreconditionError("Jacobi data inconsistent with the curvature field")
    Ct = t_coefficients(Rt)
    B = jd.B
    dB = jd.dB
    y_new = rs.y + jd.J[:, 1:]
    dy_new = rs.dy + jd.dJ[:, 1:]
    ddy_new = rs.ddy + jd.ddJ[:, 1:]
    Z_new = rs.Z + B[:, 1:, 1:]
    dZ_new = rs.dZ + dB[:, 1:, 1:]
    A_old = rs.A()
    A_new = assemble_A(dy_new, Z_new)
    D2 = A_new @ A_new - A_old @ A_old
    const_o, lin_o = shifted_coefficients(Ct, rs.y)
    const_n, lin_n = shifted_coefficients(Ct, y_new)
    wsign = -1.0 if negctl else 1.0
    dw_new = rs.dw + const_o[:, 0, 0] - const_n[:, 0, 0] + wsign * 0.5 * D2[:, 0, 0]
    w_new = rs.w + cumulative_trapezoid(dw_new - rs.dw, t, initial=0.0)

    c1 = 2.0 * (const_o - const_n)[:, 0, 1:] + D2[:, 0, 1:]
    M1 = 2.0 * (lin_o - lin_n)[:, 0, 1:, :] + beta1_sign * (rs.dZ - dZ_new)
    compat = float(np.max(np.abs(M1 - np.swapaxes(M1, 1, 2)), initial=0.0))
    beta = rs.beta.copy()
    lin1, Q1 = _integrate_linear_gradient(c1, M1)
    _add_quadratic(beta, 0, lin1, Q1, rs.degree)

    # sym grad of the change in beta' is E0 + E1 x
    E0 = (const_o - const_n)[:, 1:, 1:] + 0.5 * D2[:, 1:, 1:]
    E1 = (lin_o - lin_n)[:, 1:, 1:, :]
    P = E1 + np.swapaxes(E1, 2, 3) - np.einsum("sjli->sijl", E1)
    basis = _basis(m, rs.degree)
    eye = np.eye(m, dtype=int)
    for i in range(m):
        for j in range(m):
            beta[:, 1 + i, basis.index(eye[j])] += E0[:, i, j]
            for l in range(m):
                beta[:, 1 + i, basis.index(eye[j] + eye[l])] += 0.5 * P[:, i, j, l]
    beta = normalize_B(beta, rs.degree)
    out = RodState(
        t=t.copy(),
        w=w_new,
        dw=dw_new,
        y=y_new,
        dy=dy_new,
        ddy=ddy_new,
        Z=0.5 * (Z_new - np.swapaxes(Z_new, 1, 2)),
        dZ=0.5 * (dZ_new - np.swapaxes(dZ_new, 1, 2)),
        beta=beta,
        degree=rs.degree,
    )
    return EquivalenceReport(out, compat) if report else out


# ---------------------------------------------------- optimization over G


def framed_geodesic_from_params(chart, params: Array, L: float, dt: Optional[float] = None) -> FramedGeodesic:
    """params = (point (n), rotation parameters (n(n-1)/2)) -> framed geodesic."""
    n = chart.n
    p = np.asarray(params[:n], float)
    Q = rotation_from_params(params[n:], n)
    E = orthonormal_frame(chart.g(p)) @ Q
    if np.linalg.det(E) < 0:
        E[:, -1] *= -1
    return framed_geodesic(chart, p, E[:, 0], L, frame0=E[:, 1:], dt=dt)


def minimize_over_geodesics(
    chart_src,
    fg_src: FramedGeodesic,
    chart_tgt,
    seeds: Sequence[Array],
    step0: float = 0.1,
    step_min: float = 1e-6,
    degree: int = BETA_DEGREE,
    max_evals: int = 2000,
) -> tuple[FramedGeodesic, float, list]:
    """Coordinate pattern search of m over framed target geodesics from each seed."""
    del chart_src  # the source enters through fg_src
    L = fg_src.L
    dt = fg_src.dt
    curv_src = curvature_field(fg_src)

    def energy(params):
        try:
            fg = framed_geodesic_from_params(chart_tgt, params, L, dt)
            if len(fg.t) != len(fg_src.t):
                return np.inf, None
            return m_energy(fg_src, fg, degree, curv_src=curv_src), fg
        except (RodGammaError, np.linalg.LinAlgError):  # integration left the chart: infeasible
            return np.inf, None

    best = (np.inf, None, None)
    history = []
    for seed in seeds:
        x = np.asarray(seed, float).copy()
        fx, fgx = energy(x)
        seed_val = fx
        step = step0
        evals = 1
        while step >= step_min and evals < max_evals:
            improved = False
            for k in range(len(x)):
                for sgn in (1.0, -1.0):
                    trial = x.copy()
                    trial[k] += sgn * step
                    ft, fgt = energy(trial)
                    evals += 1
                    if ft < fx - 1e-15:
                        x, fx, fgx = trial, ft, fgt
                        improved = True
                        break
            if not improved:
                step *= 0.5
        history.append({"seed": np.asarray(seed, float).tolist(), "m_seed": seed_val, "m_opt": fx, "params": x.tolist()})
        if fx < best[0]:
            best = (fx, fgx, x)
    if best[1] is None:
        raise DomainError("every seed failed geodesic integration")
    return best[1], float(best[0]), history
