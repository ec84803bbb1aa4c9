"""Finite-difference derivatives of potentials along one-parameter subgroups.

``group_d1`` differentiates ``t -> w(F exp(tH))`` at 0. ``group_d2`` is the
iterated derivative ``D(Dw(.)H)(F)P``: the inner derivative is taken along
``H`` at the moving point ``F exp(tP)``, so the mixed stencil samples
``w(F exp(tP) exp(sH))``. All routines broadcast over leading axes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .linalg import frob, mat_exp, rank_one

__all__ = [
    "FDScheme",
    "DEFAULT_SCHEME",
    "default_step",
    "group_d1",
    "group_d2",
    "classical_hessian_quadform",
    "line_second_derivative",
]

ORDERS = ("central2", "central4")

# central stencils as (offsets, integer weights, denominator); integer weights
# cancel exactly on constants
_D1 = {
    "central2": (np.array([-1.0, 1.0]), np.array([-1.0, 1.0]), 2.0),
    "central4": (np.array([-2.0, -1.0, 1.0, 2.0]), np.array([1.0, -8.0, 8.0, -1.0]), 12.0),
}
_D2 = {
    "central2": (np.array([-1.0, 0.0, 1.0]), np.array([1.0, -2.0, 1.0]), 1.0),
    "central4": (np.array([-2.0, -1.0, 0.0, 1.0, 2.0]),
                 np.array([-1.0, 16.0, -30.0, 16.0, -1.0]), 12.0),
}
_ERROR_ORDER = {"central2": 2, "central4": 4}


@dataclass(frozen=True)
class FDScheme:
    """``step=None`` selects the default ``c * (1 + |F|)`` step per sample."""

    step: Optional[float] = None
    order: str = "central4"
    richardson: bool = False

    def __post_init__(self):
        if self.order not in ORDERS:
            raise ValueError(f"order must be one of {ORDERS}")
        if self.step is not None and not (0.0 < self.step <= 0.1):
            raise ValueError("step must lie in (0, 0.1]")


DEFAULT_SCHEME = FDScheme()


def default_step(F, derivative: int, *directions):
    """``c (1 + |F|)``, shrunk by ``1 + max |H|`` over exp-curve directions.

    The parameter along ``t -> F exp(tH)`` is measured in units of ``1/|H|``,
    so long directions get proportionally shorter steps.
    """
    base = 1e-4 if derivative == 1 else 1e-3
    h = base * (1.0 + frob(F))
    if directions:
        h = h / (1.0 + np.max([frob(D) for D in directions], axis=0))
    return h


def _steps(scheme, F, derivative, *directions):
    if scheme.step is not None:
        return np.broadcast_to(scheme.step, np.shape(F)[:-2]).astype(float)
    return default_step(F, derivative, *directions)


def _richardson(estimate, h, order, richardson):
    if not richardson:
        return estimate(h)
    p = 2.0 ** _ERROR_ORDER[order]
    return (p * estimate(0.5 * h) - estimate(h)) / (p - 1.0)


def _along(w, F, H, t):
    """``w(F exp(t H))`` for a batch of parameters ``t`` (shape = batch)."""
    return w(F @ mat_exp(t[..., None, None] * H))


def _one_dim(w, F, H, h, stencil, power):
    offsets, weights, denom = stencil
    total = 0.0
    for o, c in zip(offsets, weights):
        total = total + c * (_along(w, F, H, o * h) if o != 0.0 else w(F))
    return total / (denom * h**power)


def group_d1(w, F, H, scheme: FDScheme = DEFAULT_SCHEME):
    """``d/dt w(F exp(tH))`` at ``t = 0`` by central differences."""
    F = np.asarray(F, dtype=float)
    H = np.asarray(H, dtype=float)
    F, H = np.broadcast_arrays(F, H)
    h = _steps(scheme, F, 1, H)
    return _richardson(lambda s: _one_dim(w, F, H, s, _D1[scheme.order], 1),
                       h, scheme.order, scheme.richardson)


def _mixed(w, F, H, P, h, order):
    offsets, weights, denom = _D1[order]
    total = 0.0
    for oi, ci in zip(offsets, weights):
        EP = F @ mat_exp((oi * h)[..., None, None] * P)
        for oj, cj in zip(offsets, weights):
            total = total + ci * cj * w(EP @ mat_exp((oj * h)[..., None, None] * H))
    return total / (denom**2 * h**2)


def group_d2(w, F, H, P=None, scheme: FDScheme = DEFAULT_SCHEME):
    """``D^2 w(F)(H, P) = d/dt [d/ds w(F exp(tP) exp(sH))]`` at ``s = t = 0``.

    For ``P is None`` (or ``P`` identical to ``H``) the 1-d second difference
    of ``t -> w(F exp(tH))`` is used.
    """
    F = np.asarray(F, dtype=float)
    H = np.asarray(H, dtype=float)
    same = P is None or P is H or (np.shape(P) == H.shape and np.array_equal(P, H))
    if same:
        F, H = np.broadcast_arrays(F, H)
        h = _steps(scheme, F, 2, H)
        return _richardson(lambda s: _one_dim(w, F, H, s, _D2[scheme.order], 2),
                           h, scheme.order, scheme.richardson)
    P = np.asarray(P, dtype=float)
    F, H, P = np.broadcast_arrays(F, H, P)
    h = _steps(scheme, F, 2, H, P)
    return _richardson(lambda s: _mixed(w, F, H, P, s, scheme.order),
                       h, scheme.order, scheme.richardson)


def line_second_derivative(w, F, D, scheme: FDScheme = DEFAULT_SCHEME):
    """Second derivative of ``t -> w(F + t D)`` at 0 (ambient matrix space)."""
    F = np.asarray(F, dtype=float)
    D = np.asarray(D, dtype=float)
    F, D = np.broadcast_arrays(F, D)
    offsets, weights, denom = _D2[scheme.order]

    def estimate(h):
        total = 0.0
        for o, c in zip(offsets, weights):
            total = total + c * w(F + (o * h)[..., None, None] * D)
        return total / (denom * h**2)

    return _richardson(estimate, _steps(scheme, F, 2), scheme.order, scheme.richardson)


def classical_hessian_quadform(w, H, a, b, scheme: FDScheme = DEFAULT_SCHEME):
    """``d^2 w / dH_ij dH_kl (H) a_i b_j a_k b_l`` via the line ``H + t a⊗b``."""
    return line_second_derivative(w, H, rank_one(a, b), scheme)
