"""Linear finite elements on a triangulated unit disk.

An independent discretization of the two cross-section minimizations, used
as an oracle for the polynomial Galerkin solver when m = 2.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve
from scipy.spatial import Delaunay

Array = np.ndarray

# degree-4 rule on the reference triangle (barycentric coordinates, weights sum to 1)
_A1, _B1, _W1 = 0.445948490915965, 0.108103018168070, 0.223381589678011
_A2, _B2, _W2 = 0.091576213509771, 0.816847572980459, 0.109951743655322
_TRI_BARY = np.array(
    [
        [_A1, _A1, _B1],
        [_A1, _B1, _A1],
        [_B1, _A1, _A1],
        [_A2, _A2, _B2],
        [_A2, _B2, _A2],
        [_B2, _A2, _A2],
    ]
)
_TRI_W = np.array([_W1] * 3 + [_W2] * 3)


@lru_cache(maxsize=4)
def disk_mesh(h: float = 0.02):
    """Quasi-uniform nodes on concentric rings, Delaunay triangulated."""
    nr = int(np.ceil(1.0 / h))
    pts = [np.zeros((1, 2))]
    for k in range(1, nr + 1):
        r = k / nr
        nk = max(6, int(round(2 * np.pi * r / h)))
        th = 2 * np.pi * (np.arange(nk) + 0.5 * (k % 2)) / nk
        pts.append(np.stack([r * np.cos(th), r * np.sin(th)], axis=1))
    P = np.concatenate(pts)
    tri = Delaunay(P).simplices
    return P, tri


class DiskFEM:
    def __init__(self, h: float = 0.02):
        P, tri = disk_mesh(h)
        self.P, self.tri = P, tri
        V = P[tri]  # (T, 3, 2)
        D = np.stack([V[:, 1] - V[:, 0], V[:, 2] - V[:, 0]], axis=-1)  # columns edges
        det = np.linalg.det(D)
        self.area = 0.5 * np.abs(det)
        self.total = self.area.sum()
        Dinv = np.linalg.inv(D)
        ref = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
        self.grads = np.einsum("ak,tkj->taj", ref, Dinv)  # (T, 3 basis, 2)
        self.qx = np.einsum("qa,tad->tqd", _TRI_BARY, V)  # quadrature points
        self.qw = self.area[:, None] * _TRI_W[None] / self.total
        self.N = len(P)

    def _assemble(self, K_loc, dof):
        rows = np.repeat(dof[:, :, None], dof.shape[1], axis=2)
        cols = np.repeat(dof[:, None, :], dof.shape[1], axis=1)
        return sp.csr_matrix((K_loc.ravel(), (rows.ravel(), cols.ravel())), shape=(self.ndof, self.ndof))

    def scalar(self, f_fn) -> float:
        """min avg |grad b + f|^2 with f_fn(X (..., 2)) -> (..., 2)."""
        self.ndof = self.N
        fq = f_fn(self.qx)  # (T, Q, 2)
        fbar = np.einsum("tq,tqj->tj", self.qw, fq)
        w = self.area / self.total
        K = np.einsum("t,taj,tbj->tab", w, self.grads, self.grads)
        rhs_loc = -np.einsum("taj,tj->ta", self.grads, fbar)
        A = self._assemble(K, self.tri)
        rhs = np.bincount(self.tri.ravel(), rhs_loc.ravel(), minlength=self.N)
        u = _pinned_solve(A, rhs, [0])
        gu = np.einsum("taj,ta->tj", self.grads, u[self.tri])
        r = gu[:, None, :] + fq
        return float(np.einsum("tq,tqj->", self.qw, r * r))

    def vector(self, F_fn) -> float:
        """min avg |sym grad b + F|^2 with F_fn(X) -> (..., 2, 2) symmetric."""
        self.ndof = 2 * self.N
        Fq = F_fn(self.qx)
        Fbar = np.einsum("tq,tqij->tij", self.qw, Fq)
        w = self.area / self.total
        # strain of basis (node a, component c): sym(e_c (x) grad phi_a)
        T = len(self.tri)
        Sb = np.zeros((T, 6, 2, 2))
        for a in range(3):
            for c in range(2):
                k = 2 * a + c
                Sb[:, k, c, :] += 0.5 * self.grads[:, a, :]
                Sb[:, k, :, c] += 0.5 * self.grads[:, a, :]
        K = np.einsum("t,tpij,tqij->tpq", w, Sb, Sb)
        rhs_loc = -np.einsum("tpij,tij->tp", Sb, Fbar)
        dof = np.stack([2 * self.tri[:, a] + c for a in range(3) for c in range(2)], axis=1)
        A = self._assemble(K, dof)
        rhs = np.bincount(dof.ravel(), rhs_loc.ravel(), minlength=self.ndof)
        # kill rigid motions: pin the center and the tangential component at one ring node
        right = int(np.argmax(self.P[:, 0]))
        u = _pinned_solve(A, rhs, [0, 1, 2 * right + 1])
        ue = u[dof]
        strain = np.einsum("tpij,tp->tij", Sb, ue)
        r = strain[:, None] + Fq
        return float(np.einsum("tq,tqij->", self.qw, r * r))


def _pinned_solve(A, rhs, pinned):
    keep = np.setdiff1d(np.arange(A.shape[0]), pinned)
    u = np.zeros(A.shape[0])
    u[keep] = spsolve(A[keep][:, keep].tocsc(), rhs[keep])
    return u


def fem_q23(A: Array, h: float = 0.02) -> float:
    """Q2 + Q3 of a curvature tensor with n = 3, by linear finite elements."""
    from .limit import split_tensor

    _, Ap, Add = split_tensor(A)
    fem = DiskFEM(h)
    f = lambda X: -(2.0 / 3.0) * np.einsum("jkl,...k,...l->...j", Ap, X, X)
    F = lambda X: -(1.0 / 6.0) * np.einsum("ikjl,...k,...l->...ij", Add, X, X)
    return 0.5 * fem.scalar(f) + fem.vector(F)
