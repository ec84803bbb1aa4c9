"""Search for and verify a negative energy gap of w(F) = log tr(U_F^-1) on GL+(2).

A probe witness is replayed three ways: the field energy at the witness scale,
the same laminate at finer scales, and the exact one-dimensional Jensen gap
along F(1 + t a⊗b). A negative Jensen gap means w is not even rank-one convex
at F, so no amount of refinement can close the gap.
"""

import argparse

import numpy as np

from gquasi.convexity import check_line_convexity
from gquasi.energy import energy, laminate_jensen_gap, quasiconvexity_probe
from gquasi.fields import laminate_field
from gquasi.groups import group
from gquasi.potentials import builtin, gauge, iso_family


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--budget", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args()
    G = group("gl+", 2)
    w = iso_family(gauge("log_sum_inv"))
    ref = builtin("log_trace_inv_stretch")
    rep = quasiconvexity_probe(w, G, budget=args.budget, seed=args.seed)
    print(f"probe: {rep.verdict}, {rep.violations} of {rep.samples_run} fields below tolerance")
    if not rep.witnesses:
        return
    wit = min(rep.witnesses, key=lambda x: x["gap"])
    F, a, b = (np.asarray(wit[k]) for k in ("F", "a", "b"))
    slopes, fractions = wit["slopes"], wit["fractions"]
    print("F =", np.array2string(F, precision=4).replace("\n", ""))
    print("a =", a, " b =", b, " slopes =", np.round(slopes, 4), " fractions =", np.round(fractions, 4))
    print(f"builtin agrees with iso family at F: {abs(ref(F) - w(F)):.1e}")
    for h in (wit["h"], 8.0, 16.0, 32.0, 64.0):
        f = laminate_field(G, a, b, slopes, fractions, h, delta=0.2 * 4.0 / max(h, 4.0))
        print(f"  h={h:<7.3f} gap={energy(w, F, f) - float(w(F)):+.6f}")
    print(f"Jensen gap along F(1 + t a⊗b): {laminate_jensen_gap(w, F, a, b, slopes, fractions):+.6f}")
    line = check_line_convexity(w, F, a, b)
    print(f"second derivative along the line: {line.verdict}, worst {line.worst_margin:+.4e}")


if __name__ == "__main__":
    main()
