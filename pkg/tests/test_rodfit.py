import json

import numpy as np
import pytest

from rodgamma import geometry, rodfit
from rodgamma.energy import TubeDeformation, recovery_deformation, recovery_map
from rodgamma.errors import PreconditionError
from rodgamma.fermi import curvature_field, t_tensor
from rodgamma.geodesic import exp_map, framed_geodesic, geodesic_distance
from rodgamma.limit import RodState, eval_I
from rodgamma.rodfit import (
    align_states,
    build_piecewise,
    cell_grid,
    cell_means,
    extract_limits,
    fit_rod,
    omega,
    relative_l2,
    smooth_to_geodesic,
)


def planted(t, n):
    S = len(t)
    y = np.stack([0.3 * np.sin(2 * t), 0.2 * np.cos(t)], axis=1)[:, : n - 1]
    Z = np.zeros((S, n - 1, n - 1))
    if n > 2:
        Z[:, 0, 1] = 0.4 * np.cos(1.5 * t)
        Z[:, 1, 0] = -Z[:, 0, 1]
    return RodState.from_values(t, 0.2 * np.sin(t) + 0.1 * t, y, Z)


def _flat(n, L=1.0, dt=0.01):
    ch = geometry.euclidean(n)
    return framed_geodesic(ch, np.zeros(n), np.eye(n)[0], L, dt=dt)


@pytest.fixture(scope="module")
def sphere_fit(axis_geodesic):
    fs = _flat(3)
    ft = axis_geodesic(geometry.sphere(3), 1.3, 0.01, p=[0.1, -0.1, 0.05])
    rs = planted(fs.t, 3)
    h = 0.05
    td = recovery_deformation(rs, h, fs, ft)
    return rs, td, ft, fit_rod(td, 1.0, margin=0.3)


def test_cell_grid():
    t, s, eps = cell_grid(1.0, 0.3)
    assert len(s) == 2 * 4 and eps == pytest.approx(0.25)
    assert t[0] == pytest.approx(-1.0) and t[-1] == pytest.approx(1.0)


def test_cell_means_identity_tube():
    fg = _flat(3)
    td = recovery_deformation(RodState.zeros(fg.t, 3), 0.1, fg, fg)
    s, means, _eps = cell_means(td)
    assert np.allclose(means, np.stack([s, 0 * s, 0 * s], axis=1), atol=1e-12)


def test_cell_means_translate():
    fg = _flat(2)
    h = 0.1
    base = recovery_map(RodState.zeros(fg.t, 2), h)
    c = np.array([0.02, -0.03])
    td0 = TubeDeformation.from_callable(base, h, fg.t, fg, fg, degree=4)
    td1 = TubeDeformation.from_callable(lambda x: base(x) + c, h, fg.t, fg, fg, degree=4)
    assert np.allclose(cell_means(td1)[1], cell_means(td0)[1] + c, atol=1e-12)


def test_cell_means_need_callable():
    fg = _flat(2)
    td = recovery_deformation(RodState.zeros(fg.t, 2), 0.1, fg, fg)
    td.v_fn = None
    with pytest.raises(PreconditionError):
        cell_means(td)


def test_piecewise_collinear_flat():
    ch = geometry.euclidean(2)
    s = np.linspace(-1, 1, 9)
    pw = build_piecewise(ch, s, np.stack([s, 0.5 * s], axis=1))
    assert np.max(pw.jumps) <= 1e-12
    assert pw.continuity_defect() <= 1e-10


def test_piecewise_on_great_circle():
    fg = framed_geodesic(geometry.sphere(2), np.zeros(2), np.array([0.5, 0.0]), 1.0, dt=0.01)
    s = np.linspace(-0.9, 0.9, 10)
    pw = build_piecewise(fg.chart, s, fg.state_at(s)[0])
    assert np.max(pw.jumps) <= 1e-8
    assert pw.continuity_defect() <= 1e-10
    assert np.allclose(pw.speeds(), 1.0, atol=1e-8)
    assert np.allclose(pw(np.array([0.05, 0.31])), fg.state_at(np.array([0.05, 0.31]))[0], atol=1e-8)


def test_piecewise_noise_scaling():
    ch = geometry.sphere(3)
    rng = np.random.default_rng(0)
    fg = framed_geodesic(ch, np.zeros(3), np.array([0.5, 0, 0]), 1.0, dt=0.01)
    totals = []
    for h in (0.1, 0.05, 0.025):
        _t, s, _e = cell_grid(1.0, h)
        pts = fg.state_at(s)[0] + h**3 * rng.normal(size=(len(s), 3))
        totals.append(build_piecewise(ch, s, pts).jumps.sum())
    slope = np.polyfit(np.log([0.1, 0.05, 0.025]), np.log(totals), 1)[0]
    assert 0.6 <= slope <= 1.4
    assert totals[-1] <= 0.5


def test_omega_values():
    F = np.array([0.1, 0.2])
    w = omega(np.array([0.0, 0.5, -0.5, 1.0]), [0.25, -0.25], 0.0, F, C=1.0)
    assert w[0] == 0.0
    assert w[1] == pytest.approx(0.1 * np.exp(0.25))
    assert w[2] == pytest.approx(0.2 * np.exp(0.25))


def test_smoothing_zero_jumps():
    ch = geometry.sphere(2)
    fg = framed_geodesic(ch, np.zeros(2), np.array([0.5, 0.0]), 1.0, dt=0.01)
    s = np.linspace(-1, 1, 11)
    rep = smooth_to_geodesic(build_piecewise(ch, s, fg.state_at(s)[0]), 1.0, dt=0.01)
    assert rep.sup_distance <= 1e-7
    assert np.allclose(rep.geodesic.pos, fg.pos, atol=1e-7)


def test_smoothing_flat_kink_linear():
    ch = geometry.euclidean(2)
    s = np.linspace(-1, 1, 9)
    dists = []
    for F in (0.05, 0.1):
        y = np.where(s > 0.5, F * (s - 0.5), 0.0)
        pw = build_piecewise(ch, s, np.stack([s, y], axis=1))
        rep = smooth_to_geodesic(pw, 1.0, dt=0.01)
        assert rep.sup_distance <= 2 * np.exp(1.0) * pw.jumps.sum() + 1e-12
        assert rep.sup_distance <= rep.bound
        dists.append(rep.sup_distance)
    assert dists[1] / dists[0] == pytest.approx(2.0, rel=0.05)


def test_smoothing_rejects_large_jumps():
    ch = geometry.euclidean(2)
    s = np.linspace(-1, 1, 5)
    pw = build_piecewise(ch, s, np.stack([s, np.array([0, 0.6, 0, 0.6, 0])], axis=1))
    with pytest.raises(PreconditionError):
        smooth_to_geodesic(pw, 1.0)


def test_extract_zero_state():
    fg = _flat(3)
    td = recovery_deformation(RodState.zeros(fg.t, 3), 0.05, fg, fg)
    ex = extract_limits(td, fg)
    for k in ("w", "y", "Z", "beta"):
        assert np.max(np.abs(getattr(ex.state, k))) <= 1e-8


def test_extract_flat_roundtrip():
    # flat to flat the recovery map is inverted exactly by the moment formulas
    fg = _flat(3)
    rs = planted(fg.t, 3)
    for h in (0.04, 0.02):
        ex = extract_limits(recovery_deformation(rs, h, fg, fg), fg, align=False)
        assert relative_l2(ex.state, rs) <= 1e-8


def test_sphere_fit_geodesic_close(sphere_fit):
    rs, td, ft, rep = sphere_fit
    h = td.h
    tc = np.linspace(-1, 1, 41)
    d = geodesic_distance(ft.chart, rep.extraction.geodesic.state_at(tc)[0], ft.state_at(tc)[0])
    assert np.max(d) <= 5 * h
    assert rep.smoothing.sup_distance <= rep.smoothing.bound
    assert rep.speed_deviation <= 10 * h**1.5


def test_sphere_fit_cell_means_near_target(sphere_fit):
    _rs, td, ft, rep = sphere_fit
    s, means, _eps = cell_means(td, 1.0)
    d = geodesic_distance(ft.chart, means, ft.state_at(s)[0])
    assert np.max(d) <= 2 * td.h


def test_sphere_fit_aligned_state(sphere_fit):
    rs, td, ft, rep = sphere_fit
    _al, rel, _x = align_states(rs, rep.extraction.state, curvature_field(ft))
    assert rel <= 0.1


def test_fit_report_json(sphere_fit):
    d = json.loads(sphere_fit[3].to_json())
    assert d["cells"] == 40
    assert {"initial_point", "initial_frame", "jumps", "sup_distance", "bound", "state"} <= set(d)


def test_pipeline_energy_consistency():
    # extracted energies approach the planted energy as h decreases
    fs = _flat(2, L=0.6, dt=0.01)
    ft = framed_geodesic(geometry.sphere(2), np.zeros(2), np.array([0.5, 0.0]), 0.9, dt=0.01)
    Ts, Tt = t_tensor(curvature_field(fs)), t_tensor(curvature_field(ft))
    rs = planted(fs.t, 2)
    I0 = eval_I(rs, Ts, Tt)
    hs = [0.1, 0.05, 0.025]
    gaps = []
    for h in hs:
        rep = fit_rod(recovery_deformation(rs, h, fs, ft), 0.6, margin=0.3)
        ex = rep.extraction
        Tt_fit = t_tensor(curvature_field(ex.geodesic))
        gaps.append(abs(eval_I(ex.state, Ts, Tt_fit) - I0))
    assert np.polyfit(np.log(hs), np.log(gaps), 1)[0] >= 0.8
