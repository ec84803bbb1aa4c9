"""Stored-energy potentials on matrix groups.

A ``Potential`` wraps a vectorised map ``(..., n, n) -> (...)``. Besides the
built-in potentials this module provides the involution
``F -> |det F| w(F^-1)``, the isotropic family ``F -> g(sigma(F))`` driven by
a symmetric gauge ``g``, the SL(2) affine chart family, and sampled checkers
for two sets of hypotheses on the gauge: convexity/symmetry/monotonicity of
``g`` itself, and convexity plus partial-sum monotonicity of ``h = g o exp``.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .linalg import det, inv, singular_values
from .report import CheckReport

__all__ = [
    "DomainError",
    "Potential",
    "SymmetricGauge",
    "BUILTINS",
    "GAUGES",
    "builtin",
    "gauge",
    "constant",
    "involution",
    "iso_family",
    "sl2_affine_family",
    "chart_to_matrix",
    "check_log_gauge_hypotheses",
    "check_convex_gauge_hypotheses",
    "calibrate_sort_order",
]

SINGULAR_TOL = 1e-12
CHART_GUARD = 1e-10


class DomainError(ValueError):
    """A potential was evaluated outside its domain."""


@dataclass(frozen=True)
class Potential:
    """Real function on (a subset of) GL(n).

    ``group`` is the canonical tag of the group the potential is meant to
    live on. ``chart`` is only set for SL(2) potentials given in the
    coordinates ``F = [[X, Y], [Z, (1 + YZ)/X]]``.
    """

    name: str
    group: str
    fn: Callable = field(repr=False, compare=False)
    chart: Optional[Callable] = field(default=None, repr=False, compare=False)
    params: dict = field(default_factory=dict, compare=False)

    def __call__(self, F):
        return self.fn(np.asarray(F, dtype=float))

    def chart_eval(self, X, Y, Z):
        if self.chart is None:
            raise TypeError(f"potential {self.name} has no chart representation")
        return self.chart(np.asarray(X, float), np.asarray(Y, float), np.asarray(Z, float))

    def __neg__(self):
        chart = None if self.chart is None else (lambda X, Y, Z, c=self.chart: -c(X, Y, Z))
        return Potential(f"-{self.name}", self.group, lambda F, f=self.fn: -f(F), chart)

    def scaled(self, c: float) -> "Potential":
        chart = None if self.chart is None else (lambda X, Y, Z, k=self.chart: c * k(X, Y, Z))
        return Potential(f"{c}*{self.name}", self.group, lambda F, f=self.fn: c * f(F), chart)

    def where(self, predicate: Callable, name: Optional[str] = None) -> "Potential":
        """Same potential, raising ``DomainError`` where ``predicate(F)`` is False."""

        def _eval(F, f=self.fn):
            if not np.all(predicate(F)):
                raise DomainError(f"{self.name}: argument outside restricted domain")
            return f(F)

        return Potential(name or f"{self.name}|restricted", self.group, _eval, self.chart)


# -- built-ins -----------------------------------------------------------------


def _nonsingular(F, name):
    d = det(F)
    if np.any(np.abs(d) < SINGULAR_TOL):
        raise DomainError(f"{name}: |det F| < {SINGULAR_TOL:g}")
    return d


def _neg_log_abs_det(F):
    return -np.log(np.abs(_nonsingular(F, "neg_log_abs_det")))


def _det_log_trace_stretch(F):
    d = det(F)
    if np.any(d <= SINGULAR_TOL):
        raise DomainError("det_log_trace_stretch is defined on GL(n)+ only")
    return d * np.log(np.sum(singular_values(F), axis=-1))


def _log_trace_inv_stretch(F):
    sigma = singular_values(F)
    if np.any(sigma[..., -1] <= SINGULAR_TOL):
        raise DomainError("log_trace_inv_stretch: singular argument")
    return np.log(np.sum(1.0 / sigma, axis=-1))


def _frobenius_sq(F):
    return np.sum(F * F, axis=(-2, -1))


BUILTINS = {
    "neg_log_abs_det": ("GLn", _neg_log_abs_det),
    "det_log_trace_stretch": ("GLnPlus", _det_log_trace_stretch),
    "log_trace_inv_stretch": ("GLnPlus", _log_trace_inv_stretch),
    "frobenius_sq": ("GLn", _frobenius_sq),
    "det": ("GLn", det),
}


def builtin(name: str) -> Potential:
    try:
        grp, fn = BUILTINS[name]
    except KeyError:
        raise KeyError(f"unknown built-in potential {name!r}; choose from {sorted(BUILTINS)}") from None
    return Potential(name, grp, fn)


def constant(c: float, group: str = "GLn") -> Potential:
    return Potential(f"const({c})", group, lambda F: np.full(np.shape(F)[:-2], float(c)))


def involution(w: Potential, singular_value: Optional[float] = None) -> Potential:
    """``F -> |det F| * w(F^-1)``.

    With ``singular_value`` set, matrices with ``|det F| < 1e-12`` evaluate to
    that value instead of raising (the continuous prolongation to det F = 0).
    """

    def _eval(F):
        d = det(F)
        small = np.abs(d) < SINGULAR_TOL
        if np.any(small):
            if singular_value is None:
                raise DomainError(f"involution({w.name}): |det F| < {SINGULAR_TOL:g}")
            out = np.full(d.shape, float(singular_value))
            ok = ~small
            if np.any(ok):
                out[ok] = np.abs(d[ok]) * w(inv(F[ok]))
            return out
        return np.abs(d) * w(inv(F))

    return Potential(f"inv({w.name})", w.group, _eval)


# -- isotropic family ---------------------------------------------------------


@dataclass(frozen=True)
class SymmetricGauge:
    """Permutation-symmetric ``g: (0, inf)^n -> R`` acting on the last axis."""

    name: str
    g: Callable = field(repr=False, compare=False)
    params: dict = field(default_factory=dict)

    def __call__(self, s):
        return self.g(np.asarray(s, dtype=float))

    def h(self, x):
        """``h(x) = g(exp x_1, ..., exp x_n)``."""
        return self.g(np.exp(np.asarray(x, dtype=float)))


def _power(s, alpha):
    return np.sum(s ** alpha, axis=-1)


GAUGES = {
    "neg_sum_log": lambda: lambda s: -np.sum(np.log(s), axis=-1),
    "log_sum_inv": lambda: lambda s: np.log(np.sum(1.0 / s, axis=-1)),
    "sum": lambda: lambda s: np.sum(s, axis=-1),
    "max": lambda: lambda s: np.max(s, axis=-1),
    "power_sum": lambda alpha=2.0: lambda s: _power(s, alpha),
    "log_power_sum": lambda alpha=1.0: lambda s: np.log(_power(s, alpha)),
    "ogden": lambda alpha=1.0: lambda s: _power(s, alpha) + _power(s, -alpha),
}


def gauge(name: str, **params) -> SymmetricGauge:
    try:
        factory = GAUGES[name]
    except KeyError:
        raise KeyError(f"unknown gauge {name!r}; choose from {sorted(GAUGES)}") from None
    return SymmetricGauge(name, factory(**params), dict(params))


def iso_family(gz: SymmetricGauge) -> Potential:
    """The isotropic potential ``F -> g(sigma(F))`` on GL(n)+."""

    def _eval(F):
        sigma = singular_values(F)
        if np.any(sigma[..., -1] <= SINGULAR_TOL):
            raise DomainError(f"iso({gz.name}): singular value <= {SINGULAR_TOL:g}")
        return gz(sigma)

    return Potential(f"iso({gz.name})", "GLnPlus", _eval, params={"gauge": gz.name, **gz.params})


# -- SL(2) chart family -------------------------------------------------------


def chart_to_matrix(X, Y, Z):
    X, Y, Z = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (X, Y, Z)))
    F = np.empty(X.shape + (2, 2))
    F[..., 0, 0] = X
    F[..., 0, 1] = Y
    F[..., 1, 0] = Z
    F[..., 1, 1] = (1.0 + Y * Z) / X
    return F


def sl2_affine_family(k: float, b: float, c: float, e: float, f: float) -> Potential:
    """``w(X, Y, Z) = k (1 + YZ)/X + bY + cZ + eX + f`` on SL(2).

    Matrix evaluation reads the first chart ``X = F11, Y = F12, Z = F21`` and
    switches to the second chart (``X' = F22``) where ``|F11| <= 1e-10``.
    """

    def chart(X, Y, Z):
        if np.any(np.abs(X) <= CHART_GUARD):
            raise DomainError("chart guard: |X| <= 1e-10")
        return k * (1.0 + Y * Z) / X + b * Y + c * Z + e * X + f

    def _eval(F):
        X, Y, Z, X2 = F[..., 0, 0], F[..., 0, 1], F[..., 1, 0], F[..., 1, 1]
        first = np.abs(X) > CHART_GUARD
        if np.any(~first & (np.abs(X2) <= CHART_GUARD)):
            raise DomainError("matrix lies outside both SL(2) charts")
        Xs = np.where(first, X, 1.0)
        X2s = np.where(first, 1.0, X2)
        one = k * (1.0 + Y * Z) / Xs + b * Y + c * Z + e * X + f
        two = k * X2 + b * Y + c * Z + e * (1.0 + Y * Z) / X2s + f
        return np.where(first, one, two)

    params = dict(k=k, b=b, c=c, e=e, f=f)
    return Potential(f"sl2_affine{tuple(params.values())}", "SLn", _eval, chart, params)


# -- hypothesis checkers ------------------------------------------------------

SORT_ORDERS = ("ascending", "descending")


def _sorted(x, order):
    x = np.sort(x, axis=-1)
    return x if order == "ascending" else x[..., ::-1]


def _fd_hessian(fun, x, step):
    """Central-difference Hessian of a batched scalar function."""
    n = x.shape[-1]
    H = np.empty(x.shape + (n,))
    f0 = fun(x)
    E = np.eye(n) * step
    for i in range(n):
        fp = fun(x + E[i])
        fm = fun(x - E[i])
        H[..., i, i] = (fp - 2.0 * f0 + fm) / step**2
        for j in range(i + 1, n):
            fpp = fun(x + E[i] + E[j])
            fpm = fun(x + E[i] - E[j])
            fmp = fun(x - E[i] + E[j])
            fmm = fun(x - E[i] - E[j])
            H[..., i, j] = H[..., j, i] = (fpp - fpm - fmp + fmm) / (4.0 * step**2)
    return H


def _partial_sum_gradient(gz, S, step):
    """Gradient of ``p(S) = h(x(S))`` where ``x_k = S_k - S_{k-1}``."""
    n = S.shape[-1]

    def p(S):
        x = np.diff(S, axis=-1, prepend=0.0)
        return gz.h(x)

    grad = np.empty_like(S)
    for k in range(n):
        e = np.zeros(n)
        e[k] = step
        grad[..., k] = (p(S + e) - p(S - e)) / (2.0 * step)
    return grad


def check_log_gauge_hypotheses(gz: SymmetricGauge, n: int = 2, samples: int = 2000, seed=0,
                           sort_order: Optional[str] = None, tol: float = 1e-6,
                           box: float = 3.0) -> CheckReport:
    """Sample hypotheses (a) convexity of h and (b) monotonicity of p.

    ``p`` is read in partial-sum coordinates ``S_k = x_1 + ... + x_k`` of the
    coordinates sorted in ``sort_order``. With ``sort_order=None`` the order
    comes from ``calibrate_sort_order`` and the calibration table is stored in
    the report metadata.
    """
    calibration = None
    if sort_order is None:
        calibration = calibrate_sort_order(n)
        sort_order = calibration["chosen"]
    if sort_order not in SORT_ORDERS:
        raise ValueError(f"sort_order must be one of {SORT_ORDERS}")
    rng = np.random.default_rng(seed)
    report = CheckReport(metadata={"gauge": gz.name, "params": gz.params, "n": n,
                                   "sort_order": sort_order, "tol": tol, "box": box})
    if calibration is not None:
        report.metadata["calibration"] = calibration
    failed = []

    # (a) midpoint convexity on random segments
    x = rng.uniform(-box, box, (samples, n))
    y = rng.uniform(-box, box, (samples, n))
    hx, hy, hm = gz.h(x), gz.h(y), gz.h(0.5 * (x + y))
    margin = 0.5 * (hx + hy) - hm
    sub = CheckReport()
    sub.record_many(margin, tol * (1.0 + np.abs(hm)),
                    lambda i: {"condition": "a-midpoint", "x": x[i], "y": y[i], "value": margin[i]})
    # (a) finite-difference Hessian is PSD
    z = rng.uniform(-box, box, (max(samples // 4, 1), n))
    Hs = _fd_hessian(gz.h, z, 1e-4)
    lam = np.linalg.eigvalsh(0.5 * (Hs + np.swapaxes(Hs, -1, -2)))[..., 0]
    hz = gz.h(z)
    sub.record_many(lam, 1e2 * tol * (1.0 + np.abs(hz)),
                    lambda i: {"condition": "a-hessian", "x": z[i], "value": lam[i]})
    if sub.violations:
        failed.append("a")
    report.merge(sub)

    # (b) p nonincreasing in each partial-sum coordinate
    xs = _sorted(rng.uniform(-box, box, (samples, n)), sort_order)
    S = np.cumsum(xs, axis=-1)
    grad = _partial_sum_gradient(gz, S, 1e-5)
    scale = tol * (1.0 + np.abs(gz.h(xs)))
    sub = CheckReport()
    for k in range(n):
        gk = grad[:, k]
        sub.record_many(-gk, scale, lambda i, k=k, gk=gk: {
            "condition": "b", "x": xs[i], "coordinate": k, "value": gk[i]})
    if sub.violations:
        failed.append("b")
    report.merge(sub)
    report.metadata["failed_conditions"] = failed
    return report.finish()


@functools.lru_cache(maxsize=None)
def _calibrate(n: int, samples: int, seed: int):
    endorsed = ("neg_sum_log", "log_sum_inv")
    table = {}
    for order in SORT_ORDERS:
        table[order] = {
            name: check_log_gauge_hypotheses(gauge(name), n, samples, seed, sort_order=order).verdict
            for name in endorsed
        }
    passing = [o for o in SORT_ORDERS if all(v == "pass" for v in table[o].values())]
    return {"chosen": passing[0] if passing else "ascending", "verdicts": table,
            "endorsed": list(endorsed), "consistent": bool(passing)}


def calibrate_sort_order(n: int = 2, samples: int = 500, seed: int = 12345) -> dict:
    """Pick the sort order under which both endorsed members of the family pass.

    The members ``-sum log s`` and ``log sum 1/s`` are known to satisfy the
    hypotheses, so they fix the sign/order convention of the partial-sum
    reparametrisation.
    """
    out = _calibrate(n, samples, seed)
    return {"chosen": out["chosen"], "verdicts": {k: dict(v) for k, v in out["verdicts"].items()},
            "endorsed": list(out["endorsed"]), "consistent": out["consistent"]}


def check_convex_gauge_hypotheses(gz: SymmetricGauge, n: int = 2, samples: int = 2000, seed=0,
                           tol: float = 1e-9, box=(0.05, 4.0)) -> CheckReport:
    """Convexity, symmetry and monotonicity of ``g``; then convexity of ``g(sigma(F))``."""
    rng = np.random.default_rng(seed)
    lo, hi = box
    report = CheckReport(metadata={"gauge": gz.name, "params": gz.params, "n": n, "tol": tol})
    failed = []

    x = rng.uniform(lo, hi, (samples, n))
    y = rng.uniform(lo, hi, (samples, n))
    gx, gy, gm = gz(x), gz(y), gz(0.5 * (x + y))
    m = 0.5 * (gx + gy) - gm
    sub = CheckReport()
    sub.record_many(m, tol * (1.0 + np.abs(gm)),
                    lambda i: {"condition": "convex", "x": x[i], "y": y[i], "value": m[i]})
    if sub.violations:
        failed.append("convex")
    report.merge(sub)

    perms = np.array([rng.permutation(n) for _ in range(samples)])
    gp = gz(np.take_along_axis(x, perms, axis=-1))
    d = -np.abs(gp - gx)
    sub = CheckReport()
    sub.record_many(d, tol * (1.0 + np.abs(gx)),
                    lambda i: {"condition": "symmetric", "x": x[i], "perm": perms[i], "value": d[i]})
    if sub.violations:
        failed.append("symmetric")
    report.merge(sub)

    sub = CheckReport()
    for i in range(n):
        step = rng.uniform(0.0, 1.0, samples)
        xp = x.copy()
        xp[:, i] += step
        inc = gz(xp) - gx
        sub.record_many(inc, tol * (1.0 + np.abs(gx)),
                        lambda j, i=i, inc=inc: {"condition": "monotone", "x": x[j],
                                                 "coordinate": i, "value": inc[j]})
    if sub.violations:
        failed.append("monotone")
    report.merge(sub)

    if not failed:
        A = rng.standard_normal((samples, n, n))
        B = rng.standard_normal((samples, n, n))
        wA, wB = gz(singular_values(A)), gz(singular_values(B))
        wM = gz(singular_values(0.5 * (A + B)))
        m = 0.5 * (wA + wB) - wM
        sub = CheckReport()
        sub.record_many(m, tol * (1.0 + np.abs(wM)),
                        lambda i: {"condition": "matrix-convex", "F": A[i], "P": B[i], "value": m[i]})
        report.metadata["conclusion"] = sub.finish().verdict
        report.merge(sub)
    report.metadata["failed_conditions"] = failed
    return report.finish()
