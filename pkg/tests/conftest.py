import numpy as np
import pytest

from rodgamma import fermi, geometry
from rodgamma.geodesic import framed_geodesic


def _axis_geodesic(chart, L, dt, p=None, frame0=None):
    n = chart.n
    p = np.zeros(n) if p is None else np.asarray(p, float)
    e1 = np.eye(n)[0]
    v = e1 / np.sqrt(e1 @ chart.g(p) @ e1)
    return framed_geodesic(chart, p, v, L, frame0=frame0, dt=dt)


@pytest.fixture(scope="session")
def axis_geodesic():
    return _axis_geodesic


@pytest.fixture(scope="session")
def flat_sphere2():
    """Unit-length flat strip and equator of the unit sphere, n = 2."""
    fs = _axis_geodesic(geometry.euclidean(2), 1.0, 0.01)
    ft = _axis_geodesic(geometry.sphere(2), 1.3, 0.01)
    cs, ct = fermi.curvature_field(fs), fermi.curvature_field(ft)
    return fs, ft, fermi.t_tensor(cs), fermi.t_tensor(ct)


@pytest.fixture(scope="session")
def sphere3_pair():
    fs = _axis_geodesic(geometry.euclidean(3), 1.0, 0.01)
    ft = _axis_geodesic(geometry.sphere(3), 1.0, 0.01, p=[0.1, -0.1, 0.05])
    return fs, ft


def random_curvature(rng, n, scale=1.0):
    """Random tensor with the algebraic curvature symmetries."""
    R = rng.normal(size=(n, n, n, n)) * scale
    return geometry.project_curvature(R)


def random_rotation(rng, m):
    Q, R = np.linalg.qr(rng.normal(size=(m, m)))
    Q = Q * np.sign(np.diag(R))
    if np.linalg.det(Q) < 0:
        Q[:, 0] *= -1
    return Q


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
