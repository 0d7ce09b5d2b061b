"""Numerical engine for the limit energy of thin geodesic rods between Riemannian manifolds."""

from . import ball, energy, errors, fermi, geodesic, geometry, karcher, limit, rodfit
from .energy import TubeDeformation, dist_SO, energy_Eh, recovery_deformation
from .fermi import CurvatureField, TField, curvature_field, t_tensor
from .geodesic import FramedGeodesic, framed_geodesic, jacobi_solve
from .geometry import Chart, euclidean, hyperbolic, sphere
from .limit import RodState, eval_I, eval_J, m_energy, q_total

__version__ = "0.1.0"

__all__ = [
    "Chart",
    "CurvatureField",
    "FramedGeodesic",
    "RodState",
    "TField",
    "TubeDeformation",
    "ball",
    "curvature_field",
    "dist_SO",
    "energy",
    "energy_Eh",
    "errors",
    "euclidean",
    "eval_I",
    "eval_J",
    "fermi",
    "framed_geodesic",
    "geodesic",
    "geometry",
    "hyperbolic",
    "jacobi_solve",
    "karcher",
    "limit",
    "m_energy",
    "q_total",
    "recovery_deformation",
    "rodfit",
    "sphere",
    "t_tensor",
]
