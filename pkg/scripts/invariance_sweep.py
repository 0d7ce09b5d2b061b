"""Invariance of I under the equivalence action, with and without the sign-flipped control."""

import argparse

import numpy as np

from rodgamma import geometry
from rodgamma.cli import equivalence_sweep
from rodgamma.geodesic import framed_geodesic


def main():
    p = argparse.ArgumentParser()
    p.add_argument("--draws", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    a = p.parse_args()
    fs = framed_geodesic(geometry.euclidean(3), np.zeros(3), np.eye(3)[0], 1.0, dt=0.01)
    ch = geometry.sphere(3)
    q = np.array([0.1, -0.1, 0.05])
    v = np.eye(3)[0] / np.sqrt(ch.g(q)[0, 0])
    ft = framed_geodesic(ch, q, v, 1.3, dt=0.01)
    for neg in (False, True):
        rows = equivalence_sweep(fs, ft, a.draws, a.seed, negctl=neg)
        v = np.array([r["violation"] for r in rows])
        tag = "sign-flipped" if neg else "correct"
        print(f"{tag:>12}: max {v.max():.3e}  median {np.median(v):.3e}")


if __name__ == "__main__":
    main()
