"""Sampled testers for rank-one convexity notions on matrix groups."""

from __future__ import annotations

from typing import Callable, Optional

import numpy as np

from .derivatives import DEFAULT_SCHEME, FDScheme, group_d1, group_d2, line_second_derivative
from .groups import (
    GroupSpec,
    TOL_MEMBER,
    sample_group_elements,
    sample_rank_one_pairs,
)
from .linalg import det, rank_one
from .potentials import Potential
from .report import CheckReport

__all__ = [
    "DEFAULT_TOL",
    "SIGN_NOTE",
    "check_g_rank_one_convex",
    "check_rank_one_affine",
    "check_sl_rank_one_condition",
    "sl2_system_residual",
    "sl2_system_terms",
    "check_sl2_system",
    "check_classical_ellipticity",
    "check_line_convexity",
]

DEFAULT_TOL = 1e-7

SIGN_NOTE = ("necessary condition tested as D2w(F)(a⊗b, a⊗b) >= 0; the variant "
             "reading the integrated second variation as '= 0' is not used")

CURVES = ("line", "exp")


def _rng(seed):
    return np.random.default_rng(seed)


def _witness(F, a, b, value, **extra):
    return {"F": F, "a": a, "b": b, "value": value, **extra}


def check_g_rank_one_convex(w: Potential, G: GroupSpec, n_samples: int = 1000,
                            tol: float = DEFAULT_TOL, seed=0,
                            scheme: FDScheme = DEFAULT_SCHEME, spread: float = 0.5,
                            where: Optional[Callable] = None, curve: str = "line") -> CheckReport:
    """Sample ``D^2 w(F)(a⊗b, a⊗b) >= 0`` over ``F in G`` and ``(a, b) in RO(g)``.

    ``exp(t a⊗b) = 1 + (e^{t a.b} - 1)/(a.b) a⊗b`` runs along the rank-one
    line at non-constant speed when ``a.b != 0``, which adds the drift
    ``(a.b) Dw(F)(a⊗b)`` to the second derivative. ``curve="line"`` removes
    it, giving convexity along ``t -> F(1 + t a⊗b)`` (identical to the raw
    exp-curve value whenever ``a.b = 0``, e.g. on SL and Sp). ``curve="exp"``
    keeps the raw value. ``where`` optionally restricts the sampled base
    points ``F``.
    """
    if curve not in CURVES:
        raise ValueError(f"curve must be one of {CURVES}")
    meta = {"potential": w.name, "group": str(G), "tol": tol, "spread": spread,
            "scheme": {"step": scheme.step, "order": scheme.order,
                       "richardson": scheme.richardson},
            "curve": curve, "sign_convention": SIGN_NOTE}
    rng = _rng(seed)
    F = sample_group_elements(G, spread, rng, n_samples)
    pairs = sample_rank_one_pairs(G, rng, n_samples)
    if pairs is None:
        return CheckReport.vacuous(f"rank-one cone of {G} is {{0}}", **meta)
    a, b = pairs
    if where is not None:
        keep = np.asarray(where(F), dtype=bool)
        F, a, b = F[keep], a[keep], b[keep]
    report = CheckReport(metadata=meta)
    if len(F) == 0:
        return report.finish()
    X = rank_one(a, b)
    q = group_d2(w, F, X, scheme=scheme)
    if curve == "line":
        drift = np.sum(a * b, axis=-1)
        if np.any(drift != 0.0):
            q = q - drift * group_d1(w, F, X, scheme=scheme)
    w0 = w(F)
    report.record_many(q, tol * (1.0 + np.abs(w0)), lambda i: _witness(F[i], a[i], b[i], q[i]))
    return report.finish()


def check_rank_one_affine(w: Potential, G: GroupSpec, n_samples: int = 1000,
                          tol: float = DEFAULT_TOL, seed=0, spread: float = 0.5,
                          ts=(-0.4, -0.2, 0.0, 0.2, 0.4), step: float = 0.1) -> CheckReport:
    """Check ``t -> w(F(1 + t a⊗b))`` has vanishing second differences.

    The normalised second difference ``(f(t+h) - 2f(t) + f(t-h)) / h^2`` at
    each ``t`` in ``ts`` must be within ``tol (1 + |f(t)|)`` of zero.
    """
    meta = {"potential": w.name, "group": str(G), "tol": tol, "ts": list(ts), "step": step}
    rng = _rng(seed)
    F = sample_group_elements(G, spread, rng, n_samples)
    pairs = sample_rank_one_pairs(G, rng, n_samples)
    if pairs is None:
        return CheckReport.vacuous(f"rank-one cone of {G} is {{0}}", **meta)
    a, b = pairs
    X = rank_one(a, b)
    eye = np.eye(G.n)

    def f(t):
        return w(F @ (eye + t * X))

    report = CheckReport(metadata=meta)
    for t in ts:
        ft = f(t)
        d2 = (f(t + step) - 2.0 * ft + f(t - step)) / step**2
        report.record_many(-np.abs(d2), tol * (1.0 + np.abs(ft)),
                           lambda i, t=t, d2=d2: _witness(F[i], a[i], b[i], d2[i], t=t))
    return report.finish()


def check_sl_rank_one_condition(w: Potential, F, a, b, scheme: FDScheme = DEFAULT_SCHEME):
    """Ambient second derivative of ``t -> w(F + t (Fa)⊗b)`` for ``a.b = 0``, ``F in SL``."""
    F = np.asarray(F, dtype=float)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if np.any(np.abs(np.sum(a * b, axis=-1)) > 1e-12):
        raise ValueError("the SL condition requires a.b = 0")
    if np.any(np.abs(det(F) - 1.0) > TOL_MEMBER):
        raise ValueError("F must lie in SL(n)")
    Fa = np.einsum("...ij,...j->...i", F, a)
    return line_second_derivative(w, F, rank_one(Fa, b), scheme)


def _chart_partials(w: Potential, X, Y, Z, step):
    """Second partials of the chart function by 4th-order central differences."""
    P = np.stack(np.broadcast_arrays(*(np.asarray(v, float) for v in (X, Y, Z))), axis=-1)
    h = step[..., None]
    offs = np.array([-2.0, -1.0, 1.0, 2.0])
    wd1 = np.array([1.0, -8.0, 8.0, -1.0]) / 12.0

    def f(Q):
        return w.chart_eval(Q[..., 0], Q[..., 1], Q[..., 2])

    E = np.eye(3)
    f0 = f(P)
    d = {}
    names = "XYZ"
    for i in range(3):
        acc = -30.0 * f0
        for o, c in zip((-2.0, -1.0, 1.0, 2.0), (-1.0, 16.0, 16.0, -1.0)):
            acc = acc + c * f(P + o * h * E[i])
        d[names[i] * 2] = acc / (12.0 * step**2)
        for j in range(i + 1, 3):
            acc = 0.0
            for oi, ci in zip(offs, wd1):
                for oj, cj in zip(offs, wd1):
                    acc = acc + ci * cj * f(P + oi * h * E[i] + oj * h * E[j])
            d[names[i] + names[j]] = acc / step**2
    return d


def sl2_system_terms(w: Potential, X, Y, Z, scheme: FDScheme = DEFAULT_SCHEME):
    """Left and right sides of the five equations as arrays of shape (..., 5)."""
    X, Y, Z = np.broadcast_arrays(*(np.asarray(v, float) for v in (X, Y, Z)))
    if np.any(np.abs(X) <= 1e-6):
        raise ValueError("chart guard: |X| must exceed 1e-6")
    if scheme.step is not None:
        step = np.full(X.shape, scheme.step)
    else:
        step = 1e-3 * np.minimum(1.0, np.abs(X))
    d = _chart_partials(w, X, Y, Z, step)
    lhs = np.stack([d["XX"] * X**2, d["XZ"] * X, d["XY"] * X, d["YY"], d["ZZ"]], axis=-1)
    rhs = np.stack([2.0 * d["YZ"] * (1.0 + Y * Z), -d["YZ"] * Y, -d["YZ"] * Z,
                    np.zeros_like(X), np.zeros_like(X)], axis=-1)
    return lhs, rhs


def sl2_system_residual(w: Potential, X, Y, Z, scheme: FDScheme = DEFAULT_SCHEME):
    """Residuals ``LHS - RHS`` of the second-order system whose solutions are
    exactly the rank-one affine functions on SL(2), written in the chart
    ``F = [[X, Y], [Z, (1+YZ)/X]]``::

        w_XX X^2 = 2 w_YZ (1 + YZ)
        w_XZ X   = -w_YZ Y
        w_XY X   = -w_YZ Z
        w_YY     = 0
        w_ZZ     = 0
    """
    lhs, rhs = sl2_system_terms(w, X, Y, Z, scheme)
    return lhs - rhs


def check_sl2_system(w: Potential, X, Y, Z, tol: float = 1e-6,
                     scheme: FDScheme = DEFAULT_SCHEME) -> CheckReport:
    """Relative residual test: ``|LHS - RHS| <= tol (1 + |LHS| + |RHS|)``."""
    lhs, rhs = sl2_system_terms(w, X, Y, Z, scheme)
    res = lhs - rhs
    rel = np.abs(res) / (1.0 + np.abs(lhs) + np.abs(rhs))
    report = CheckReport(metadata={"potential": w.name, "tol": tol,
                                   "max_abs_residual": float(np.max(np.abs(res))),
                                   "max_rel_residual": float(np.max(rel))})
    Xb, Yb, Zb = np.broadcast_arrays(X, Y, Z)
    flat = rel.reshape(-1, 5)
    worst_eq = np.argmax(flat, axis=-1)
    report.record_many(-np.max(flat, axis=-1), tol, lambda i: {
        "chart": [Xb.ravel()[i], Yb.ravel()[i], Zb.ravel()[i]],
        "equation": int(worst_eq[i]) + 1, "value": res.reshape(-1, 5)[i]})
    return report.finish()


def check_classical_ellipticity(w: Potential, n: int = 2, n_samples: int = 1000,
                                tol: float = DEFAULT_TOL, seed=0,
                                scheme: FDScheme = DEFAULT_SCHEME) -> CheckReport:
    """Legendre-Hadamard condition on random ``(H, a, b)`` in the full matrix space."""
    rng = _rng(seed)
    H = rng.standard_normal((n_samples, n, n))
    a = rng.standard_normal((n_samples, n))
    b = rng.standard_normal((n_samples, n))
    a /= np.linalg.norm(a, axis=-1, keepdims=True)
    b /= np.linalg.norm(b, axis=-1, keepdims=True)
    q = line_second_derivative(w, H, rank_one(a, b), scheme)
    w0 = w(H)
    report = CheckReport(metadata={"potential": w.name, "n": n, "tol": tol})
    report.record_many(q, tol * (1.0 + np.abs(w0)), lambda i: _witness(H[i], a[i], b[i], q[i]))
    return report.finish()


def check_line_convexity(w: Potential, F, a, b, center: float = 0.0, radius: float = 0.5,
                         n_pairs: int = 64, tol: float = DEFAULT_TOL, seed=0) -> CheckReport:
    """Midpoint convexity of ``t -> w(F(1 + t a⊗b))`` on symmetric pairs around ``center``."""
    F = np.asarray(F, dtype=float)
    rng = _rng(seed)
    r = rng.uniform(0.0, radius, n_pairs)
    r[0] = radius * 1e-3
    X = rank_one(np.asarray(a, float), np.asarray(b, float))
    eye = np.eye(F.shape[-1])

    def f(t):
        return w(F @ (eye + t[:, None, None] * X))

    fm, fp, f0 = f(center - r), f(center + r), f(np.full_like(r, center))
    margin = 0.5 * (fm + fp) - f0
    report = CheckReport(metadata={"potential": w.name, "center": center, "radius": radius})
    report.record_many(margin, tol * (1.0 + np.abs(f0)),
                       lambda i: _witness(F, a, b, margin[i], t=[center - r[i], center + r[i]]))
    return report.finish()
