"""h^-4 E_h of the recovery family for flat -> unit sphere, n = 2."""

import argparse

import numpy as np

from rodgamma import energy, fermi, geometry, limit
from rodgamma.geodesic import framed_geodesic


def main():
    p = argparse.ArgumentParser()
    p.add_argument("--state", choices=["zero", "optimal"], default="zero")
    p.add_argument("--h", default="0.2,0.1,0.05,0.025")
    a = p.parse_args()
    hs = [float(v) for v in a.h.split(",")]
    fs = framed_geodesic(geometry.euclidean(2), np.zeros(2), np.array([1.0, 0.0]), 1.0, dt=0.01)
    ft = framed_geodesic(geometry.sphere(2), np.zeros(2), np.array([0.5, 0.0]), 1.3, dt=0.01)
    Ts, Tt = fermi.t_tensor(fermi.curvature_field(fs)), fermi.t_tensor(fermi.curvature_field(ft))
    if a.state == "zero":
        rs = limit.RodState.zeros(fs.t, 2)
    else:
        rs = limit.optimal_state(Ts, Tt, fs.t)
    tab = energy.convergence_study(rs, hs, fs, ft, Ts, Tt)
    print(f"I = {tab.I:.12f}   m = 1/45 = {1 / 45:.12f}")
    print(f"{'h':>8} {'h^-4 E_h':>16} {'gap':>12} {'slope':>7}")
    for r in tab.rows:
        print(f"{r['h']:8.4f} {r['Eh_over_h4']:16.12f} {r['gap']:12.4e} {r['slope_running']:7.3f}")
    print(f"fitted slope {tab.slope:.3f}")


if __name__ == "__main__":
    main()
