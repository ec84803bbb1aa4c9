"""Simplicial meshes of the unit cube and unit ball.

Meshes are Kuhn (Freudenthal) triangulations of tensor grids, possibly with
non-uniform node spacing, laid out in a reference frame and mapped to
physical coordinates by ``x = center + frame @ (y - center)``. Bisecting
every grid interval produces a triangulation that refines the old one, so
piecewise-affine fields can be re-represented exactly on finer meshes.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .linalg import det, inv

__all__ = [
    "SHAPES",
    "MeshedDomain",
    "cube_mesh",
    "ball_mesh",
    "tensor_mesh",
    "refine",
    "locate",
    "interpolate",
    "frame_for",
]

SHAPES = ("unit_cube", "unit_ball")


def _perms(n):
    return np.array(list(itertools.permutations(range(n))), dtype=np.int64)


def _perm_lookup(n):
    """Map base-n permutation codes to their index in ``_perms(n)``."""
    perms = _perms(n)
    codes = perms @ (n ** np.arange(n))
    table = np.full(n**n, -1, dtype=np.int64)
    table[codes] = np.arange(len(perms))
    return table


@dataclass(eq=False)
class MeshedDomain:
    shape: str
    n: int
    resolution: int
    nodes: np.ndarray          # (N, n) physical coordinates
    cells: np.ndarray          # (M, n+1) node indices
    volumes: np.ndarray        # (M,)
    boundary: np.ndarray       # (N,) nodes on the mesh boundary
    frame: np.ndarray          # (n, n) rotation reference -> physical
    center: np.ndarray         # (n,)
    axes: Optional[tuple] = None       # reference grid coordinates per axis
    cell_ids: Optional[np.ndarray] = None  # index into the full Kuhn enumeration
    _edge_inv: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def measure(self) -> float:
        return float(np.sum(self.volumes))

    @property
    def is_tensor(self) -> bool:
        return self.axes is not None

    @property
    def grid_shape(self):
        return tuple(len(a) for a in self.axes)

    def to_reference(self, x):
        return self.center + (np.asarray(x, float) - self.center) @ self.frame

    def to_physical(self, y):
        return self.center + (np.asarray(y, float) - self.center) @ self.frame.T

    @property
    def reference_nodes(self):
        return self.to_reference(self.nodes)

    @property
    def edge_inverse(self):
        """Per-cell inverse of the edge matrix ``[x1-x0, ..., xn-x0]``."""
        if self._edge_inv is None:
            P = self.nodes[self.cells]
            E = np.swapaxes(P[:, 1:] - P[:, :1], -1, -2)
            self._edge_inv = inv(E)
        return self._edge_inv

    def cell_gradients(self, values):
        """Exact gradients of the P1 interpolant of nodal ``values`` (N, m)."""
        V = np.asarray(values, float)[self.cells]
        D = np.swapaxes(V[:, 1:] - V[:, :1], -1, -2)
        return D @ self.edge_inverse

    def centroids(self):
        return self.nodes[self.cells].mean(axis=1)


def frame_for(direction) -> np.ndarray:
    """A proper rotation whose first column is ``direction / |direction|``."""
    d = np.asarray(direction, float)
    n = d.size
    norm = np.linalg.norm(d)
    if norm == 0.0:
        return np.eye(n)
    M = np.eye(n)
    k = int(np.argmax(np.abs(d)))
    cols = [d / norm] + [M[:, j] for j in range(n) if j != k]
    Q, R = np.linalg.qr(np.stack(cols, axis=1))
    Q = Q * np.sign(np.diag(R))
    if det(Q) < 0:
        Q[:, -1] *= -1.0
    return Q


def _kuhn(axes):
    """All Kuhn simplices of a tensor grid, ordered as (box, permutation)."""
    n = len(axes)
    shape = tuple(len(a) for a in axes)
    boxes = np.stack(np.meshgrid(*[np.arange(m - 1) for m in shape], indexing="ij"),
                     axis=-1).reshape(-1, n)
    perms = _perms(n)
    eye = np.eye(n, dtype=np.int64)
    steps = np.cumsum(eye[perms], axis=1)  # (n!, n, n)
    verts = np.concatenate([np.zeros((len(perms), 1, n), np.int64), steps], axis=1)
    multi = boxes[:, None, None, :] + verts[None]  # (B, n!, n+1, n)
    flat = np.ravel_multi_index(tuple(np.moveaxis(multi, -1, 0)), shape)
    return flat.reshape(-1, n + 1)


def _volumes(nodes, cells):
    P = nodes[cells]
    E = np.swapaxes(P[:, 1:] - P[:, :1], -1, -2)
    n = nodes.shape[1]
    return np.abs(det(E)) / math.factorial(n)


def _boundary_nodes(n_nodes, cells):
    n1 = cells.shape[1]
    faces = np.concatenate([np.delete(cells, k, axis=1) for k in range(n1)], axis=0)
    faces = np.sort(faces, axis=1)
    uniq, counts = np.unique(faces, axis=0, return_counts=True)
    flag = np.zeros(n_nodes, dtype=bool)
    flag[uniq[counts == 1].ravel()] = True
    used = np.zeros(n_nodes, dtype=bool)
    used[cells.ravel()] = True
    # nodes not touched by any cell carry no degrees of freedom
    flag |= ~used
    return flag


def _axis(lo, hi, resolution, breaks):
    pts = np.linspace(lo, hi, resolution + 1)
    if breaks is not None and len(breaks):
        b = np.unique(np.asarray(breaks, float))
        b = b[(b > lo) & (b < hi)]
        if b.size:
            # drop uniform nodes that would form slivers next to a break
            gap = np.min(np.abs(pts[:, None] - b[None, :]), axis=1)
            ends = (pts == lo) | (pts == hi)
            pts = np.concatenate([pts[ends | (gap > 1e-9 * (hi - lo))], b])
            b_gap = np.diff(np.sort(b))
            if np.any(b_gap <= 1e-12 * (hi - lo)):
                raise ValueError("break points closer than 1e-12")
    pts = np.unique(pts)
    keep = np.concatenate([[True], np.diff(pts) > 1e-12 * (hi - lo)])
    return pts[keep]


def tensor_mesh(shape: str, axes: Sequence[np.ndarray], frame=None, resolution=None,
                keep_ids=None) -> MeshedDomain:
    """Build a domain from explicit reference axes."""
    axes = tuple(np.asarray(a, float) for a in axes)
    n = len(axes)
    if shape not in SHAPES:
        raise ValueError(f"shape must be one of {SHAPES}")
    center = np.full(n, 0.5) if shape == "unit_cube" else np.zeros(n)
    frame = np.eye(n) if frame is None else np.asarray(frame, float)
    grids = np.meshgrid(*axes, indexing="ij")
    ref = np.stack([g.ravel() for g in grids], axis=-1)
    nodes = center + (ref - center) @ frame.T
    cells = _kuhn(axes)
    ids = np.arange(len(cells))
    if keep_ids is not None:
        ids = np.asarray(keep_ids, dtype=np.int64)
        cells = cells[ids]
    elif shape == "unit_ball":
        cen = ref[cells].mean(axis=1)
        inside = np.sum(cen * cen, axis=1) < 1.0
        ids, cells = ids[inside], cells[inside]
    vols = _volumes(nodes, cells)
    if resolution is None:
        resolution = max(len(a) - 1 for a in axes)
    return MeshedDomain(shape, n, int(resolution), nodes, cells, vols,
                        _boundary_nodes(len(nodes), cells), frame, center, axes, ids)


def cube_mesh(n: int, resolution: int, breaks=None, frame=None) -> MeshedDomain:
    """Kuhn mesh of the unit cube. ``breaks[i]`` adds extra nodes on axis ``i``."""
    breaks = breaks or [None] * n
    axes = [_axis(0.0, 1.0, resolution, breaks[i]) for i in range(n)]
    return tensor_mesh("unit_cube", axes, frame, resolution)


def ball_mesh(n: int, resolution: int, breaks=None, frame=None) -> MeshedDomain:
    """Cut-cell mesh of the unit ball: grid simplices whose centroid lies inside.

    ``resolution`` counts cells per unit length, so the enclosing box
    ``[-1, 1]^n`` carries ``2 * resolution`` intervals per axis.
    """
    breaks = breaks or [None] * n
    axes = [_axis(-1.0, 1.0, 2 * resolution, breaks[i]) for i in range(n)]
    return tensor_mesh("unit_ball", axes, frame, resolution)


def locate(domain: MeshedDomain, ref_points):
    """Kuhn simplex and barycentric data for points given in reference coordinates.

    Returns ``(full_ids, vertices, weights)`` where ``vertices`` are node
    indices (P, n+1) and ``weights`` the barycentric coordinates.
    """
    if not domain.is_tensor:
        raise ValueError("point location needs a tensor-grid mesh")
    y = np.atleast_2d(np.asarray(ref_points, float))
    n = domain.n
    shape = domain.grid_shape
    box = np.empty(y.shape, dtype=np.int64)
    t = np.empty(y.shape)
    for i, ax in enumerate(domain.axes):
        k = np.clip(np.searchsorted(ax, y[:, i], side="right") - 1, 0, len(ax) - 2)
        box[:, i] = k
        t[:, i] = np.clip((y[:, i] - ax[k]) / (ax[k + 1] - ax[k]), 0.0, 1.0)
    perm = np.argsort(-t, axis=1, kind="stable")
    ts = np.take_along_axis(t, perm, axis=1)
    weights = np.empty((len(y), n + 1))
    weights[:, 0] = 1.0 - ts[:, 0]
    weights[:, 1:n] = ts[:, :-1] - ts[:, 1:]
    weights[:, n] = ts[:, -1]
    steps = np.cumsum(np.eye(n, dtype=np.int64)[perm], axis=1)
    multi = np.concatenate([box[:, None, :], box[:, None, :] + steps], axis=1)
    verts = np.ravel_multi_index(tuple(np.moveaxis(multi, -1, 0)), shape)
    box_lin = np.ravel_multi_index(tuple(box.T), tuple(m - 1 for m in shape))
    code = perm @ (n ** np.arange(n))
    full = box_lin * math.factorial(n) + _perm_lookup(n)[code]
    return full, verts, weights


def interpolate(domain: MeshedDomain, values, ref_points):
    """Evaluate the P1 interpolant of nodal ``values`` at reference points."""
    _, verts, weights = locate(domain, ref_points)
    V = np.asarray(values, float)[verts]
    return np.einsum("pk,pk...->p...", weights, V)


def refine(domain: MeshedDomain) -> MeshedDomain:
    """Bisect every grid interval; each new simplex lies inside an old one."""
    if not domain.is_tensor:
        raise ValueError("only tensor-grid meshes can be refined")
    axes = [np.sort(np.concatenate([a, 0.5 * (a[1:] + a[:-1])])) for a in domain.axes]
    # keep exactly the fine cells sitting inside retained coarse cells
    all_cells = _kuhn(axes)
    grids = np.meshgrid(*axes, indexing="ij")
    ref = np.stack([g.ravel() for g in grids], axis=-1)
    parent, _, _ = locate(domain, ref[all_cells].mean(axis=1))
    kept = np.zeros(len(_kuhn(domain.axes)), dtype=bool)
    kept[domain.cell_ids] = True
    ids = np.flatnonzero(kept[parent])
    return tensor_mesh(domain.shape, axes, domain.frame, 2 * domain.resolution, keep_ids=ids)
