import csv
import json
from pathlib import Path

import numpy as np
import pytest

from rodgamma import cli
from rodgamma.limit import RodState

CONFIGS = Path(__file__).resolve().parent.parent / "scripts" / "configs"

FLAT2 = """
[source]
kind = euclidean
n = 2

[run]
L = 0.5
dt = 0.01
h_list = 0.2, 0.1
draws = 3
"""

FLAT_SPHERE2 = """
[source]
kind = euclidean
n = 2

[target]
kind = sphere
n = 2

[run]
L = 0.5
dt = 0.01
h_list = 0.2, 0.1, 0.05
draws = 3
"""


def _cfg(tmp_path, text, name="run.ini"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return str(p)


def _run(tmp_path, command, cfg, *extra, out="out"):
    return cli.main([command, "--config", cfg, "--out", str(tmp_path / out), *extra])


def test_bad_metric_exit_2(tmp_path):
    assert _run(tmp_path, "fermi-validate", str(CONFIGS / "bad_metric.ini")) == 2


def test_missing_config_exit_2(tmp_path):
    assert _run(tmp_path, "limit-energy", str(tmp_path / "nope.ini")) == 2


def test_unknown_command_exit_2(tmp_path):
    assert cli.main(["frobnicate", "--config", "x.ini"]) == 2


def test_dimension_mismatch_exit_2(tmp_path):
    text = FLAT2.replace("[run]", "[target]\nkind = sphere\nn = 3\n\n[run]")
    assert _run(tmp_path, "limit-energy", _cfg(tmp_path, text)) == 2


def test_bad_h_list_exit_2(tmp_path):
    assert _run(tmp_path, "gamma-converge", _cfg(tmp_path, FLAT2.replace("0.2, 0.1", "0.1, 0.2"))) == 2


def test_missing_deformation_exit_2(tmp_path):
    text = FLAT2 + "deformation = missing.json\n"
    assert _run(tmp_path, "fit-rod", _cfg(tmp_path, text)) == 2
    assert _run(tmp_path, "fit-rod", _cfg(tmp_path, FLAT2)) == 2


def test_metric_file_missing_exit_2(tmp_path):
    text = "[source]\nkind = metric\nmetric_file = absent.txt\n"
    assert _run(tmp_path, "fermi-validate", _cfg(tmp_path, text)) == 2


def test_fermi_validate_flat_exact(tmp_path):
    text = "[source]\nkind = euclidean\nn = 3\n[run]\nL = 0.5\ndt = 0.01\n"
    assert _run(tmp_path, "fermi-validate", _cfg(tmp_path, text)) == 0
    rep = json.loads((tmp_path / "out" / "fermi_validate.json").read_text())
    assert rep["status"] == "exact"


def test_limit_energy_flat_zero(tmp_path):
    assert _run(tmp_path, "limit-energy", _cfg(tmp_path, FLAT2)) == 0
    rep = json.loads((tmp_path / "out" / "limit_energy.json").read_text())
    assert abs(rep["m"]) <= 1e-10
    assert len(rep["Q"]) == len(rep["t"])


def test_limit_energy_flat_sphere(tmp_path):
    assert _run(tmp_path, "limit-energy", _cfg(tmp_path, FLAT_SPHERE2)) == 0
    rep = json.loads((tmp_path / "out" / "limit_energy.json").read_text())
    assert rep["m"] == pytest.approx(1 / 45, rel=1e-8)


def test_gamma_converge_flat_zero_gap(tmp_path):
    assert _run(tmp_path, "gamma-converge", _cfg(tmp_path, FLAT2)) == 0
    with open(tmp_path / "out" / "gamma_converge.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert [float(r["h"]) for r in rows] == [0.2, 0.1]
    assert all(float(r["gap"]) <= 1e-10 for r in rows)


def test_gamma_converge_threads_deterministic(tmp_path):
    cfg = _cfg(tmp_path, FLAT_SPHERE2)
    assert _run(tmp_path, "gamma-converge", cfg, out="a") == 0
    assert _run(tmp_path, "gamma-converge", cfg, "--threads", "3", out="b") == 0
    a = (tmp_path / "a" / "gamma_converge.csv").read_bytes()
    assert a == (tmp_path / "b" / "gamma_converge.csv").read_bytes()
    assert b"\r\n" in a


def test_equiv_check_deterministic(tmp_path):
    cfg = _cfg(tmp_path, FLAT_SPHERE2)
    assert _run(tmp_path, "equiv-check", cfg, "--seed", "7", out="a") == 0
    assert _run(tmp_path, "equiv-check", cfg, "--seed", "7", out="b") == 0
    a = (tmp_path / "a" / "equiv_check.json").read_bytes()
    assert a == (tmp_path / "b" / "equiv_check.json").read_bytes()
    assert json.loads(a)["max_violation"] <= 1e-8


def test_equiv_check_negctl_fails(tmp_path):
    cfg = _cfg(tmp_path, FLAT_SPHERE2)
    assert _run(tmp_path, "equiv-check", cfg, "--debug-negctl") == 1
    rep = json.loads((tmp_path / "out" / "equiv_check.json").read_text())
    assert rep["negctl"] and rep["max_violation"] > 1e-5


def test_fit_rod_identity_tube(tmp_path):
    (tmp_path / "zero.json").write_text(json.dumps({"h": 0.1}))
    text = FLAT2 + "deformation = zero.json\n"
    assert _run(tmp_path, "fit-rod", _cfg(tmp_path, text)) == 0
    rep = json.loads((tmp_path / "out" / "fit_rod.json").read_text())
    assert rep["planted_distance"] <= 1e-8
    assert rep["aligned_abs_l2"] <= 1e-6


def test_fit_rod_grid_mismatch_exit_2(tmp_path):
    t = np.linspace(-1, 1, 11)
    rs = RodState.zeros(t, 2)
    (tmp_path / "d.json").write_text(json.dumps({"h": 0.1, "state": rs.to_dict()}))
    text = FLAT2 + "deformation = d.json\n"
    assert _run(tmp_path, "fit-rod", _cfg(tmp_path, text)) == 2
