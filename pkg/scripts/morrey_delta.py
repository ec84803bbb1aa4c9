"""How far the Morrey delta tensor is from the rank-one tensor a⊗b⊗a⊗b as |b| grows.

With eta = u(|x|^2) sin(b.x) a the tensor factors as a⊗a⊗M with
M = int grad(psi) grad(psi)^T; the cutoff term keeps M off the b⊗b line, so
the rank-one fit residual only decays as |b| grows.
"""

import argparse

import numpy as np

from gquasi.fields import delta_tensor, morrey_field


def fit_residual(D, a, b):
    T = np.einsum("i,j,k,l->ijkl", a, b, a, b)
    lam = np.sum(D * T) / np.sum(T * T)
    return np.linalg.norm(D - lam * T) / np.linalg.norm(D)


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--n", type=int, default=2, choices=[2, 3])
    p.add_argument("--pairs", type=int, default=5)
    p.add_argument("--scales", type=float, nargs="+", default=[1, 2, 4, 8, 16, 32, 64])
    p.add_argument("--order", type=int, default=6)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args()
    rng = np.random.default_rng(args.seed)
    print("scale  " + "  ".join(f"pair{i}" for i in range(args.pairs)) + "   symmetry defect")
    pairs = [(rng.standard_normal(args.n), rng.standard_normal(args.n)) for _ in range(args.pairs)]
    for t in args.scales:
        res, sym = [], 0.0
        for a, b in pairs:
            D = delta_tensor(morrey_field(a, t * b), args.order)
            res.append(fit_residual(D, a, t * b))
            sym = max(sym, np.abs(D - np.transpose(D, (0, 3, 2, 1))).max())
        print(f"{t:5g}  " + "  ".join(f"{r:.3f}" for r in res) + f"   {sym:.1e}")


if __name__ == "__main__":
    main()
