"""Energy along oscillating sequences for a list of potentials; one table row per scale."""

import argparse

import numpy as np

from gquasi.cli import resolve_potential
from gquasi.groups import group
from gquasi.lsc import GENERATORS, SequenceSpec, lsc_experiment


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("potentials", nargs="*",
                   default=["iso:log_sum_inv", "iso:neg_sum_log", "det", "frobenius_sq",
                            "neg:frobenius_sq"])
    p.add_argument("--generator", choices=GENERATORS, default="laminate_scaling")
    p.add_argument("--scales", type=int, nargs="+", default=[4, 8, 16, 32, 64])
    p.add_argument("--F0", type=float, nargs=4, default=[1.1, 0.2, -0.1, 0.9])
    p.add_argument("--tol", type=float, default=1e-6)
    args = p.parse_args()
    G = group("gl+", 2)
    F0 = np.reshape(args.F0, (2, 2))
    spec = SequenceSpec(generator=args.generator, scales=tuple(args.scales))
    for name in args.potentials:
        rep = lsc_experiment(resolve_potential(name), F0, spec, G, args.tol)
        print(f"{name}: limit {rep.limit_energy:.10f}  verdict {rep.verdict}  drop {rep.drop:.3e}")
        for h, e in rep.energies:
            print(f"  h={h:<4g} E={e:.10f}  E-limit={e - rep.limit_energy:+.3e}")


if __name__ == "__main__":
    main()
