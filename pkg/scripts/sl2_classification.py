"""Residuals of the SL(2) rank-one-affine system for the affine family and some non-members."""

import argparse

import numpy as np

from gquasi.potentials import Potential, sl2_affine_family
from gquasi.convexity import sl2_system_residual


def chart_potential(name, fn):
    return Potential(name, "SLn", lambda F: fn(F[..., 0, 0], F[..., 0, 1], F[..., 1, 0]), chart=fn)


NON_MEMBERS = {
    "Y^2": lambda X, Y, Z: Y**2,
    "XY": lambda X, Y, Z: X * Y,
    "X^2": lambda X, Y, Z: X**2,
    "YZ": lambda X, Y, Z: Y * Z,
}


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--families", type=int, default=10)
    p.add_argument("--points", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args()
    rng = np.random.default_rng(args.seed)

    def points():
        X = rng.uniform(0.2, 3.0, args.points) * rng.choice([-1.0, 1.0], args.points)
        return X, rng.uniform(-2, 2, args.points), rng.uniform(-2, 2, args.points)

    print("family member                          max residual")
    for _ in range(args.families):
        params = rng.uniform(-3, 3, 5)
        r = sl2_system_residual(sl2_affine_family(*params), *points())
        print(f"  {np.array2string(params, precision=2):36s} {np.abs(r).max():.2e}")
    print("non-member   max residual per equation")
    for name, fn in NON_MEMBERS.items():
        r = np.abs(sl2_system_residual(chart_potential(name, fn), *points())).max(axis=0)
        print(f"  {name:10s} {np.array2string(r, precision=3)}")


if __name__ == "__main__":
    main()
