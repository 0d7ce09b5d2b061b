"""Write a planted rod state as a deformation file for the fit-rod command."""

import argparse
import json

import numpy as np

from rodgamma.limit import RodState


def planted_state(L=1.0, dt=0.01, n=3):
    N = int(round(L / dt))
    t = np.linspace(-L, L, 2 * N + 1)
    S = len(t)
    y = np.stack([0.3 * np.sin(2 * t), 0.2 * np.cos(t)], axis=1)[:, : n - 1]
    w = 0.2 * np.sin(t) + 0.1 * t
    Z = np.zeros((S, n - 1, n - 1))
    if n > 2:
        Z[:, 0, 1] = 0.4 * np.cos(1.5 * t)
        Z[:, 1, 0] = -Z[:, 0, 1]
    return RodState.from_values(t, w, y, Z)


def main():
    p = argparse.ArgumentParser()
    p.add_argument("--h", type=float, default=0.05)
    p.add_argument("--n", type=int, default=3)
    p.add_argument("--out", default="scripts/configs/planted_h005.json")
    a = p.parse_args()
    rs = planted_state(n=a.n)
    with open(a.out, "w", encoding="utf-8") as fh:
        json.dump({"h": a.h, "state": rs.to_dict()}, fh)
    print(f"wrote {a.out}")


if __name__ == "__main__":
    main()
