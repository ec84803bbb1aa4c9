"""Small dense matrix kernels for n in {2, 3, 4}.

Every function accepts a single matrix of shape ``(n, n)`` or a stack of
shape ``(..., n, n)`` and broadcasts over the leading axes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

__all__ = [
    "ConvergenceError",
    "SingularData",
    "det",
    "adjugate",
    "inv",
    "mat_exp",
    "polar_svd",
    "singular_values",
    "rank_one",
    "frob",
    "random_rotation",
]

JACOBI_MAX_SWEEPS = 100
JACOBI_TOL = 1e-14


class ConvergenceError(RuntimeError):
    """Raised when the Jacobi SVD exhausts its sweep budget."""


def _check_square(F):
    F = np.asarray(F, dtype=float)
    if F.ndim < 2 or F.shape[-1] != F.shape[-2]:
        raise ValueError(f"expected (..., n, n) array, got shape {F.shape}")
    if not 2 <= F.shape[-1] <= 4:
        raise ValueError(f"dimension must be 2, 3 or 4, got {F.shape[-1]}")
    return F


def _det2(A):
    return A[..., 0, 0] * A[..., 1, 1] - A[..., 0, 1] * A[..., 1, 0]


def _det3(A):
    return (
        A[..., 0, 0] * (A[..., 1, 1] * A[..., 2, 2] - A[..., 1, 2] * A[..., 2, 1])
        - A[..., 0, 1] * (A[..., 1, 0] * A[..., 2, 2] - A[..., 1, 2] * A[..., 2, 0])
        + A[..., 0, 2] * (A[..., 1, 0] * A[..., 2, 1] - A[..., 1, 1] * A[..., 2, 0])
    )


def _minor(A, i, j):
    rows = [r for r in range(A.shape[-1]) if r != i]
    cols = [c for c in range(A.shape[-1]) if c != j]
    return A[..., rows, :][..., :, cols]


def _det_any(A):
    n = A.shape[-1]
    if n == 1:
        return A[..., 0, 0]
    if n == 2:
        return _det2(A)
    if n == 3:
        return _det3(A)
    # Laplace expansion along the first row
    return sum((-1) ** j * A[..., 0, j] * _det3(_minor(A, 0, j)) for j in range(n))


def det(F):
    """Closed-form determinant (cofactor expansion for n = 4)."""
    return _det_any(_check_square(F))


def adjugate(F):
    """Transpose of the cofactor matrix, so that ``F @ adj(F) = det(F) * 1``."""
    F = _check_square(F)
    n = F.shape[-1]
    adj = np.empty_like(F)
    for i in range(n):
        for j in range(n):
            adj[..., j, i] = (-1) ** (i + j) * _det_any(_minor(F, i, j))
    return adj


def inv(F):
    """Closed-form inverse via the adjugate. No singularity guard."""
    F = _check_square(F)
    return adjugate(F) / _det_any(F)[..., None, None]


def mat_exp(H):
    """Matrix exponential (scaling and squaring with Pade approximants)."""
    H = _check_square(H)
    return scipy.linalg.expm(H)


def frob(F):
    return np.sqrt(np.sum(np.asarray(F) ** 2, axis=(-2, -1)))


def rank_one(a, b):
    """Tensor product ``a ⊗ b`` with entries ``a_i * b_j``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape[-1] != b.shape[-1]:
        raise ValueError("a and b must have the same dimension")
    return a[..., :, None] * b[..., None, :]


@dataclass(frozen=True)
class SingularData:
    """Singular values and polar factors ``F = rotation @ stretch``.

    ``sigma`` is sorted nonincreasing along the last axis. ``rotation`` has
    determinant ``sign(det F)`` and ``stretch`` is symmetric positive
    semidefinite.
    """

    sigma: np.ndarray
    rotation: np.ndarray
    stretch: np.ndarray
    left: np.ndarray
    right: np.ndarray


def _jacobi(F):
    """One-sided Jacobi: returns (A V, V) with mutually orthogonal columns in A V."""
    n = F.shape[-1]
    A = F.copy()
    V = np.broadcast_to(np.eye(n), F.shape).copy()
    pairs = [(p, q) for p in range(n - 1) for q in range(p + 1, n)]
    # columns that collapse to roundoff size stop rotating
    floor = np.finfo(float).eps * np.sum(F * F, axis=(-2, -1))
    for _ in range(JACOBI_MAX_SWEEPS):
        converged = True
        for p, q in pairs:
            ap = A[..., :, p]
            aq = A[..., :, q]
            alpha = np.einsum("...i,...i->...", ap, ap)
            beta = np.einsum("...i,...i->...", aq, aq)
            gamma = np.einsum("...i,...i->...", ap, aq)
            active = (np.abs(gamma) > JACOBI_TOL * np.sqrt(alpha) * np.sqrt(beta)) & (
                np.abs(gamma) > floor)
            if not np.any(active):
                continue
            converged = False
            safe_gamma = np.where(active, gamma, 1.0)
            zeta = (beta - alpha) / (2.0 * safe_gamma)
            t = np.sign(zeta) / (np.abs(zeta) + np.sqrt(1.0 + zeta * zeta))
            t = np.where(zeta == 0.0, 1.0, t)
            c = 1.0 / np.sqrt(1.0 + t * t)
            s = c * t
            c = np.where(active, c, 1.0)[..., None]
            s = np.where(active, s, 0.0)[..., None]
            for M in (A, V):
                mp = M[..., :, p].copy()
                mq = M[..., :, q]
                M[..., :, p] = c * mp - s * mq
                M[..., :, q] = s * mp + c * mq
        if converged:
            return A, V
    raise ConvergenceError(
        f"one-sided Jacobi did not converge in {JACOBI_MAX_SWEEPS} sweeps"
    )


def _complete_basis(U, sigma, scale):
    """Replace columns of U belonging to (numerically) zero singular values."""
    n = U.shape[-1]
    bad = sigma <= 1e-14 * np.maximum(scale, 1e-300)[..., None]
    if not np.any(bad):
        return U
    U = U.copy()
    idx = np.argwhere(np.any(bad, axis=-1))
    for k in map(tuple, idx):
        cols = [U[k][:, j] for j in range(n) if not bad[k][j]]
        basis = list(cols)
        for e in np.eye(n):
            if len(basis) == n:
                break
            v = e - sum(np.dot(e, q) * q for q in basis)
            if np.linalg.norm(v) > 1e-8:
                basis.append(v / np.linalg.norm(v))
        it = iter(basis[len(cols):])
        for j in range(n):
            if bad[k][j]:
                U[k][:, j] = next(it)
    return U


def polar_svd(F):
    """SVD and polar decomposition by one-sided Jacobi.

    Returns ``SingularData`` with ``F = left @ diag(sigma) @ right.T`` and
    ``F = rotation @ stretch``. When ``det F < 0`` the rotation factor is an
    improper orthogonal matrix and the stretch stays positive semidefinite.
    """
    F = _check_square(F)
    if not np.all(np.isfinite(F)):
        raise ValueError("polar_svd requires finite entries")
    A, V = _jacobi(F)
    sigma = np.sqrt(np.einsum("...ij,...ij->...j", A, A))
    order = np.argsort(-sigma, axis=-1, kind="stable")
    sigma = np.take_along_axis(sigma, order, axis=-1)
    A = np.take_along_axis(A, order[..., None, :], axis=-1)
    V = np.take_along_axis(V, order[..., None, :], axis=-1)
    safe = np.where(sigma > 0, sigma, 1.0)
    U = _complete_basis(A / safe[..., None, :], sigma, frob(F))
    # U and V may carry independent reflections; fix det(U V^T) = sign(det F)
    target = np.where(_det_any(F) < 0, -1.0, 1.0)
    flip = np.sign(_det_any(U) * _det_any(V)) != target
    if np.any(flip):
        U = U.copy()
        U[..., :, -1] = np.where(flip[..., None], -U[..., :, -1], U[..., :, -1])
    Vt = np.swapaxes(V, -1, -2)
    rotation = U @ Vt
    stretch = (V * sigma[..., None, :]) @ Vt
    stretch = 0.5 * (stretch + np.swapaxes(stretch, -1, -2))
    return SingularData(sigma=sigma, rotation=rotation, stretch=stretch, left=U, right=V)


def singular_values(F):
    return polar_svd(F).sigma


def random_rotation(rng, n, size=None, proper=True):
    """Haar-distributed orthogonal matrices (det +1 when ``proper``)."""
    shape = () if size is None else (size,) if np.isscalar(size) else tuple(size)
    Z = rng.standard_normal(shape + (n, n))
    Q, R = np.linalg.qr(Z)
    d = np.sign(np.diagonal(R, axis1=-2, axis2=-1))
    d = np.where(d == 0, 1.0, d)
    Q = Q * d[..., None, :]
    if proper:
        neg = np.linalg.det(Q) < 0
        Q[..., :, 0] = np.where(neg[..., None], -Q[..., :, 0], Q[..., :, 0])
    return Q
