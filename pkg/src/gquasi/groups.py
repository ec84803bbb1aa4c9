"""Matrix Lie subgroups of GL(n, R): membership, algebras, rank-one cones."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .linalg import det, inv, mat_exp, rank_one

__all__ = [
    "TAGS",
    "TOL_DET",
    "TOL_MEMBER",
    "GroupSpec",
    "RankOnePair",
    "ConstraintError",
    "group",
    "symplectic_form",
    "in_group",
    "in_algebra",
    "project_algebra",
    "sample_algebra",
    "sample_rank_one_cone",
    "sample_rank_one_pairs",
    "sample_group_element",
    "sample_group_elements",
    "conjugate_potential",
]

TOL_DET = 1e-12
TOL_MEMBER = 1e-9

# CLI spelling -> canonical tag
TAGS = {
    "gl": "GLn",
    "gl+": "GLnPlus",
    "sl": "SLn",
    "so": "SOn",
    "co": "COn",
    "sp": "SPn",
}


class ConstraintError(ValueError):
    """A construction left the group it was supposed to stay in."""


@dataclass(frozen=True)
class GroupSpec:
    tag: str
    n: int

    def __post_init__(self):
        if self.tag not in TAGS.values():
            raise ValueError(f"unknown group tag {self.tag!r}")
        if not 2 <= self.n <= 4:
            raise ValueError(f"dimension must be 2..4, got {self.n}")
        if self.tag == "SPn" and self.n % 2:
            raise ValueError("Sp(n) requires even n")

    @property
    def name(self) -> str:
        return {v: k for k, v in TAGS.items()}[self.tag]

    def __str__(self):
        return f"{self.name}({self.n})"


@dataclass(frozen=True)
class RankOnePair:
    a: np.ndarray
    b: np.ndarray

    @property
    def matrix(self):
        return rank_one(self.a, self.b)


def group(name: str, n: int) -> GroupSpec:
    """Resolve a CLI group string ("gl", "sl", ...) or canonical tag."""
    tag = TAGS.get(name, name)
    return GroupSpec(tag, n)


def symplectic_form(n: int) -> np.ndarray:
    m = n // 2
    J = np.zeros((n, n))
    J[:m, m:] = np.eye(m)
    J[m:, :m] = -np.eye(m)
    return J


def _norm(A):
    return np.sqrt(np.sum(A * A, axis=(-2, -1)))


def _T(A):
    return np.swapaxes(A, -1, -2)


def in_group(G: GroupSpec, F, tol: float = TOL_MEMBER):
    F = np.asarray(F, dtype=float)
    n = G.n
    if F.shape[-2:] != (n, n):
        raise ValueError(f"expected {n}x{n} matrices for {G}")
    d = det(F)
    eye = np.eye(n)
    if G.tag == "GLn":
        return np.abs(d) > TOL_DET
    if G.tag == "GLnPlus":
        return d > TOL_DET
    if G.tag == "SLn":
        return np.abs(d - 1.0) <= tol
    if G.tag == "SOn":
        return (_norm(_T(F) @ F - eye) <= tol) & (d > 0)
    if G.tag == "COn":
        scale = np.abs(d) ** (2.0 / n)
        return (_norm(_T(F) @ F - scale[..., None, None] * eye) <= tol) & (d > TOL_DET)
    J = symplectic_form(n)
    return _norm(_T(F) @ J @ F - J) <= tol


def in_algebra(G: GroupSpec, H, tol: float = TOL_MEMBER):
    H = np.asarray(H, dtype=float)
    n = G.n
    if H.shape[-2:] != (n, n):
        raise ValueError(f"expected {n}x{n} matrices for {G}")
    if G.tag in ("GLn", "GLnPlus"):
        return np.ones(H.shape[:-2], dtype=bool) if H.ndim > 2 else np.bool_(True)
    tr = np.trace(H, axis1=-2, axis2=-1)
    if G.tag == "SLn":
        return np.abs(tr) <= tol
    if G.tag == "SOn":
        return _norm(H + _T(H)) <= tol
    if G.tag == "COn":
        K = H - (tr / n)[..., None, None] * np.eye(n)
        return _norm(K + _T(K)) <= tol
    J = symplectic_form(n)
    return _norm(_T(H) @ J + J @ H) <= tol


def project_algebra(G: GroupSpec, H):
    """Orthogonal projection of arbitrary matrices onto the Lie algebra."""
    H = np.asarray(H, dtype=float)
    n = G.n
    eye = np.eye(n)
    tr = np.trace(H, axis1=-2, axis2=-1)[..., None, None]
    if G.tag in ("GLn", "GLnPlus"):
        return H.copy()
    if G.tag == "SLn":
        return H - tr / n * eye
    skew = 0.5 * (H - _T(H))
    if G.tag == "SOn":
        return skew
    if G.tag == "COn":
        return skew + tr / n * eye
    # sp = J * Sym; J is orthogonal so this is the orthogonal projection
    J = symplectic_form(n)
    S = -J @ H
    return J @ (0.5 * (S + _T(S)))


def sample_algebra(G: GroupSpec, rng, size=None):
    shape = () if size is None else (size,) if np.isscalar(size) else tuple(size)
    return project_algebra(G, rng.standard_normal(shape + (G.n, G.n)))


def sample_group_elements(G: GroupSpec, spread: float, rng, size):
    """Batch version of ``sample_group_element`` drawing from ``rng``."""
    if spread < 0:
        raise ValueError("spread must be nonnegative")
    return mat_exp(spread * sample_algebra(G, rng, size))


def sample_group_element(G: GroupSpec, spread: float, seed) -> np.ndarray:
    """``exp`` of a random algebra element with entries scaled by ``spread``."""
    rng = np.random.default_rng(seed)
    return sample_group_elements(G, spread, rng, None)


def _null_space(M, tol=1e-10):
    _, s, vt = np.linalg.svd(M)
    rank = int(np.sum(s > tol * max(s[0], 1.0)))
    return vt[rank:]


def _unit(v):
    return v / np.linalg.norm(v)


def sample_rank_one_cone(G: GroupSpec, seed) -> Optional[RankOnePair]:
    """Draw (a, b) with ``a ⊗ b`` in the Lie algebra, or None if the cone is {0}.

    For SO(n) and CO(n) a nonzero ``a ⊗ b`` cannot be skew (plus a multiple of
    the identity), so the cone is reported empty.
    """
    rng = np.random.default_rng(seed)
    return _draw_pair(G, rng)


def _draw_pair(G: GroupSpec, rng) -> Optional[RankOnePair]:
    n = G.n
    if G.tag in ("SOn", "COn"):
        return None
    a = _unit(rng.standard_normal(n))
    b = rng.standard_normal(n)
    if G.tag in ("GLn", "GLnPlus"):
        return RankOnePair(a, _unit(b))
    if G.tag == "SLn":
        b = b - np.dot(a, b) * a
        b = _unit(b)
        # one more projection pass brings |a.b| to roundoff level
        b = b - np.dot(a, b) * a
        return RankOnePair(a, b)
    # Sp: the constraint (a⊗b)^T J + J (a⊗b) = 0 is linear in b for fixed a
    J = symplectic_form(n)
    cols = []
    for k in range(n):
        e = np.zeros(n)
        e[k] = 1.0
        X = rank_one(a, e)
        cols.append((X.T @ J + J @ X).ravel())
    basis = _null_space(np.array(cols).T)
    if len(basis) == 0:
        return None
    b = _unit(rng.standard_normal(len(basis)) @ basis)
    return RankOnePair(a, b)


def sample_rank_one_pairs(G: GroupSpec, rng, size):
    """Stack ``size`` cone samples into arrays ``(a, b)`` or return None."""
    pairs = [_draw_pair(G, rng) for _ in range(size)]
    if pairs and pairs[0] is None:
        return None
    return np.array([p.a for p in pairs]), np.array([p.b for p in pairs])


def conjugate_potential(w, U, G: Optional[GroupSpec] = None, samples: int = 64, seed=0):
    """The potential ``F -> w(U F U^-1)``.

    When ``G`` is given, conjugation-closure ``U G U^-1 ⊂ G`` is checked on
    sampled elements and a ``ConstraintError`` raised if a conjugate leaves G.
    """
    from .potentials import Potential

    U = np.asarray(U, dtype=float)
    if abs(det(U)) <= TOL_DET:
        raise ValueError("conjugator must be invertible")
    Uinv = inv(U)
    if G is not None:
        rng = np.random.default_rng(seed)
        F = sample_group_elements(G, 1.0, rng, samples)
        C = U @ F @ Uinv
        ok = in_group(G, C, tol=1e-8 * (1.0 + _norm(C)))
        if not np.all(ok):
            raise ConstraintError(f"U G U^-1 is not contained in {G}")

    def _eval(F):
        return w(U @ np.asarray(F, dtype=float) @ Uinv)

    return Potential(f"conj({w.name})", w.group, _eval)
