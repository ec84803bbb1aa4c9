"""Exact energies of test fields and randomized quasiconvexity probes."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from .fields import MorreyField, TestField, ball_quadrature, laminate_field, perturbation_field
from .groups import GroupSpec, sample_group_elements, sample_rank_one_pairs
from .linalg import det, random_rotation
from .potentials import DomainError, Potential
from .report import CheckReport

__all__ = [
    "energy",
    "energy_parts",
    "ProbeFamily",
    "quasiconvexity_probe",
    "laminate_jensen_gap",
    "conditional_gap",
    "conditional_gap_identity",
]


def _integrand(w: Potential, F0, grads, side):
    F0 = np.asarray(F0, float)
    M = F0 @ grads if side == "left" else grads @ F0
    try:
        vals = np.asarray(w(M), float)
    except (DomainError, ValueError) as exc:
        # locate the first offending cell for the error message
        for i in range(len(M)):
            try:
                w(M[i:i + 1])
            except (DomainError, ValueError):
                raise DomainError(f"cell {i}: {exc}") from exc
        raise
    bad = ~np.isfinite(vals)
    if np.any(bad):
        raise DomainError(f"cell {int(np.flatnonzero(bad)[0])}: non-finite energy density")
    return vals


def energy(w: Potential, F0, field, quadrature_order: int = 6, side: str = "left") -> float:
    """``sum_cells |cell| w(F0 Du)`` (or ``w(Du F0)`` for ``side="right"``).

    For a ``MorreyField`` the integrand ``w(F0 (1 + D eta))`` is integrated
    with a composite Gauss rule of the given order on the unit ball.
    """
    if side not in ("left", "right"):
        raise ValueError("side must be 'left' or 'right'")
    if isinstance(field, MorreyField):
        pts, wts = ball_quadrature(field.n, quadrature_order)
        grads = np.eye(field.n) + field.grad(pts)
        return float(wts @ _integrand(w, F0, grads, side))
    vals = _integrand(w, F0, field.gradients, side)
    return float(field.domain.volumes @ vals)


def energy_parts(w: Potential, F0, field: TestField, side: str = "left") -> dict:
    """Total energy split into cutoff-band cells and the rest."""
    vals = _integrand(w, F0, field.gradients, side) * field.domain.volumes
    band = field.band if field.band is not None else np.zeros(len(vals), bool)
    return {"total": float(np.sum(vals)), "band": float(np.sum(vals[band])),
            "interior": float(np.sum(vals[~band])), "band_volume": float(field.domain.volumes[band].sum())}


@dataclass(frozen=True)
class ProbeFamily:
    """Parameter ranges for the fields drawn by ``quasiconvexity_probe``."""

    kinds: tuple = ("laminate", "perturbation")
    h_range: tuple = (2.0, 6.0)
    slope_range: tuple = (0.1, 1.5)
    fraction_range: tuple = (0.2, 0.8)
    delta: float = 0.25
    resolution: int = 4
    shape: str = "unit_cube"
    amplitude: float = 0.5
    spread: float = 0.5     # base points are sampled as exp(spread * X) when F is None
    max_tries: int = 20


def _draw_laminate(G, fam, rng):
    pairs = sample_rank_one_pairs(G, rng, 1)
    if pairs is None:
        return None, None
    a, b = pairs[0][0], pairs[1][0]
    lam = rng.uniform(*fam.fraction_range)
    s1 = rng.uniform(*fam.slope_range) * rng.choice([-1.0, 1.0])
    s2 = -lam * s1 / (1.0 - lam)
    h = float(rng.uniform(*fam.h_range))
    params = {"kind": "laminate", "a": a, "b": b, "slopes": [s1, s2], "fractions": [lam, 1 - lam],
              "h": h}
    f = laminate_field(G, a, b, (s1, s2), (lam, 1.0 - lam), h, fam.delta, fam.shape,
                       fam.resolution)
    return f, params


def _draw_perturbation(G, fam, rng):
    seed = int(rng.integers(2**63))
    f = perturbation_field(G, fam.amplitude, seed, fam.resolution, fam.shape)
    return f, {"kind": "perturbation", "seed": seed, "amplitude": f.params["amplitude"]}


def quasiconvexity_probe(w: Potential, G: GroupSpec, F=None, family: Optional[ProbeFamily] = None,
                         budget: int = 1000, seed=0, tol: float = 1e-7) -> CheckReport:
    """Search test fields for ``energy(w, F, u) - |Omega| w(F) < -tol``.

    ``F=None`` draws a fresh base point from G for every field. A negative
    worst gap certifies failure of quasiconvexity; a nonnegative one is
    evidence only. Fields whose parameters turn out infeasible are redrawn.
    """
    fam = family or ProbeFamily()
    kinds = [k for k in fam.kinds if k != "perturbation" or G.tag in ("GLn", "GLnPlus")]
    meta = {"potential": w.name, "group": str(G), "tol": tol, "budget": budget,
            "family": asdict(fam), "base_point": "sampled" if F is None else np.asarray(F)}
    if not kinds:
        return CheckReport.vacuous(f"no admissible field kinds for {G}", **meta)
    if "perturbation" not in kinds and sample_rank_one_pairs(G, np.random.default_rng(0), 1) is None:
        return CheckReport.vacuous(f"rank-one cone of {G} is {{0}}", **meta)
    rng = np.random.default_rng(seed)
    report = CheckReport(metadata=meta)
    rejected = 0
    gaps = []
    for k in range(budget):
        kind = kinds[k % len(kinds)]
        for _ in range(fam.max_tries):
            base = (sample_group_elements(G, fam.spread, rng, None) if F is None
                    else np.asarray(F, float))
            try:
                if kind == "laminate":
                    field, params = _draw_laminate(G, fam, rng)
                else:
                    field, params = _draw_perturbation(G, fam, rng)
                e = energy(w, base, field)
            except (ValueError, DomainError):
                rejected += 1
                continue
            break
        else:
            raise RuntimeError(f"could not draw an admissible {kind} field in {fam.max_tries} tries")
        gap = e - field.domain.measure * float(w(base))
        gaps.append(gap)
        report.record(gap, tol, {"F": base, "gap": gap, **params})
    report.metadata.update(rejected_draws=rejected,
                           min_gap=float(np.min(gaps)) if gaps else None)
    return report.finish()


def laminate_jensen_gap(w: Potential, F, a, b, slopes, fractions) -> float:
    """1-d oracle ``lam w(F(1+s1 a⊗b)) + (1-lam) w(F(1+s2 a⊗b)) - w(F)``."""
    F = np.asarray(F, float)
    X = np.outer(a, b)
    eye = np.eye(len(F))
    lam = fractions[0]
    return float(lam * w(F @ (eye + slopes[0] * X)) + (1 - lam) * w(F @ (eye + slopes[1] * X))
                 - w(F))


def conditional_gap(w: Potential, A, R, eps):
    """``w(A R / eps) - w(A)``: the energy gap of a field with uniform gradient ``R / eps``."""
    A = np.asarray(A, float)
    R = np.asarray(R, float)
    eps = np.asarray(eps, float)
    return w(A @ R / eps[..., None, None]) - w(A)


def conditional_gap_identity(w: Potential, n: int, samples: int = 100, seed=0,
                             eps_range=(0.1, 0.9), tol: float = 1e-12) -> CheckReport:
    """Compare ``w(A R/eps) - w(A)`` with ``n log eps`` for random ``A``, ``R in O(n)``."""
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((samples, n, n))
    A = A[np.abs(det(A)) > 1e-3]
    R = random_rotation(rng, n, len(A), proper=False)
    eps = rng.uniform(*eps_range, len(A))
    lhs = conditional_gap(w, A, R, eps)
    rhs = n * np.log(eps)
    err = np.abs(lhs - rhs)
    report = CheckReport(metadata={"potential": w.name, "n": n, "tol": tol,
                                   "max_error": float(err.max()), "max_gap": float(lhs.max())})
    report.record_many(-err, tol * (1.0 + np.abs(rhs)),
                       lambda i: {"A": A[i], "R": R[i], "eps": eps[i], "error": err[i]})
    return report.finish()
