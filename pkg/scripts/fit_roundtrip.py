"""Plant a recovery deformation in the unit 3-sphere and recover the rod from it."""

import argparse

import numpy as np

from make_planted import planted_state
from rodgamma import energy, fermi, geometry
from rodgamma.geodesic import framed_geodesic, geodesic_distance
from rodgamma.rodfit import align_states, fit_rod


def main():
    p = argparse.ArgumentParser()
    p.add_argument("--h", default="0.1,0.05")
    a = p.parse_args()
    fs = framed_geodesic(geometry.euclidean(3), np.zeros(3), np.eye(3)[0], 1.0, dt=0.01)
    ch = geometry.sphere(3)
    q = np.array([0.1, -0.1, 0.05])
    ft = framed_geodesic(ch, q, np.eye(3)[0] / np.sqrt(ch.g(q)[0, 0]), 1.3, dt=0.01)
    rs = planted_state()
    tc = np.linspace(-1, 1, 81)
    print(f"{'h':>6} {'cells':>6} {'sum F':>10} {'sup dist':>10} {'bound':>10} {'aligned err':>12}")
    for h in (float(v) for v in a.h.split(",")):
        rep = fit_rod(energy.recovery_deformation(rs, h, fs, ft), 1.0)
        d = np.max(geodesic_distance(ch, rep.extraction.geodesic.state_at(tc)[0], ft.state_at(tc)[0]))
        _al, rel, _x = align_states(rs, rep.extraction.state, fermi.curvature_field(ft))
        sm = rep.smoothing
        print(f"{h:6.3f} {rep.cells:6d} {sum(sm.jumps):10.3e} {d:10.3e} {sm.bound:10.3e} {rel:12.3e}")


if __name__ == "__main__":
    main()
