"""Piecewise-affine test fields and the smooth bump field.

A ``TestField`` stores nodal values of the displacement ``v = u - id`` on a
simplicial mesh. Gradients ``Du = 1 + Dv`` are computed exactly per cell, so
every energy on such a field is a finite sum with no quadrature error.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .groups import TOL_DET, ConstraintError, GroupSpec, in_group
from .linalg import det, rank_one
from .mesh import (
    MeshedDomain,
    _boundary_nodes,
    _volumes,
    ball_mesh,
    cube_mesh,
    frame_for,
    interpolate,
    locate,
    refine,
    tensor_mesh,
)
from .report import to_jsonable

__all__ = [
    "FIELD_FORMAT",
    "TestField",
    "identity_field",
    "sawtooth",
    "laminate_field",
    "perturbation_field",
    "refine_field",
    "ball_to_eta_conversion",
    "eta_gradients",
    "right_transport",
    "MorreyField",
    "PROFILES",
    "morrey_field",
    "ball_quadrature",
    "delta_tensor",
    "field_to_dict",
    "field_from_dict",
    "save_field",
    "load_field",
]

FIELD_FORMAT = "gquasi-field/1"


@dataclass(eq=False)
class TestField:
    """Piecewise-affine map ``u = id + v`` with ``v = 0`` on the boundary."""

    __test__ = False  # keep pytest from collecting this class

    domain: MeshedDomain
    displacement: np.ndarray              # (N, n) nodal values of v
    group: Optional[str] = None           # tag of the group claimed for the gradients
    claim: Optional[np.ndarray] = None    # (M,) cells whose gradient is claimed in the group
    band: Optional[np.ndarray] = None     # (M,) cells in the cutoff band
    params: dict = field(default_factory=dict)
    _grad: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return self.domain.n

    @property
    def gradients(self) -> np.ndarray:
        """Per-cell ``Du`` (M, n, n)."""
        if self._grad is None:
            self._grad = np.eye(self.n) + self.domain.cell_gradients(self.displacement)
        return self._grad

    @property
    def offsets(self) -> np.ndarray:
        """Per-cell ``c`` with ``u(x) = Du x + c`` on the cell."""
        x0 = self.domain.nodes[self.domain.cells[:, 0]]
        u0 = x0 + self.displacement[self.domain.cells[:, 0]]
        return u0 - np.einsum("mij,mj->mi", self.gradients, x0)

    @property
    def support(self) -> np.ndarray:
        """Cells on which ``u`` differs from the identity."""
        v = self.displacement[self.domain.cells]
        return np.any(v != 0.0, axis=(1, 2))

    def image_nodes(self):
        return self.domain.nodes + self.displacement

    def continuity_defect(self) -> float:
        """Largest mismatch between a cell's affine map and the shared nodal values."""
        P = self.domain.nodes[self.domain.cells]
        U = P + self.displacement[self.domain.cells]
        A = np.einsum("mij,mkj->mki", self.gradients, P) + self.offsets[:, None, :]
        return float(np.max(np.abs(A - U))) if len(P) else 0.0

    def boundary_defect(self) -> float:
        b = self.domain.boundary
        return float(np.max(np.abs(self.displacement[b]))) if np.any(b) else 0.0

    def mean_gradient(self) -> np.ndarray:
        vol = self.domain.volumes
        return np.einsum("m,mij->ij", vol, self.gradients)

    def check_claims(self, G: Optional[GroupSpec] = None, tol: float = 1e-9):
        """Raise ``ConstraintError`` if a claimed cell gradient leaves the group."""
        if G is None:
            return
        mask = np.ones(len(self.domain.cells), bool) if self.claim is None else self.claim
        if not np.any(mask):
            return
        ok = in_group(G, self.gradients[mask], tol)
        if not np.all(ok):
            bad = int(np.flatnonzero(mask)[np.flatnonzero(~ok)[0]])
            raise ConstraintError(f"cell {bad}: gradient not in {G}")

    def evaluate(self, x):
        """``u`` at physical points (tensor-grid meshes only)."""
        x = np.atleast_2d(np.asarray(x, float))
        y = self.domain.to_reference(x)
        return x + interpolate(self.domain, self.displacement, y)


def identity_field(domain: MeshedDomain) -> TestField:
    return TestField(domain, np.zeros_like(domain.nodes))


def _with_displacement(f: TestField, disp, **updates) -> TestField:
    kw = dict(group=f.group, claim=f.claim, band=f.band, params=dict(f.params))
    kw.update(updates)
    return TestField(f.domain, np.asarray(disp, float), **kw)


# --- laminates ---------------------------------------------------------------

def sawtooth(tau, s1: float, s2: float, lam: float):
    """1-periodic, zero-mean, piecewise-linear profile with slopes ``s1`` on
    ``[0, lam)`` and ``s2`` on ``[lam, 1)``; requires ``lam s1 + (1-lam) s2 = 0``."""
    frac = np.asarray(tau, float) - np.floor(tau)
    up = s1 * frac
    down = s1 * lam + s2 * (frac - lam)
    return np.where(frac < lam, up, down) - 0.5 * s1 * lam


def _sawtooth_breaks(h, b, center, lo, hi, lam):
    """Reference coordinates along axis 0 at which the sawtooth kinks."""
    bnorm = np.linalg.norm(b)
    offset = float(b @ center)
    taus = sorted([h * (offset + bnorm * (lo - center[0])), h * (offset + bnorm * (hi - center[0]))])
    ks = np.arange(math.floor(taus[0]) - 1, math.ceil(taus[1]) + 2)
    kinks = np.concatenate([ks, ks + lam])
    return center[0] + (kinks / h - offset) / bnorm


def _cube_ramp(y, delta):
    r = np.clip(np.minimum(y, 1.0 - y) / delta, 0.0, 1.0)
    return np.prod(r, axis=-1)


def _ball_ramp(y, delta):
    return np.clip((1.0 - np.linalg.norm(y, axis=-1)) / delta, 0.0, 1.0)


def laminate_field(G: GroupSpec, a, b, slopes, fractions, h: float, delta: float = 0.2,
                   shape: str = "unit_cube", resolution: int = 4, check: bool = True) -> TestField:
    """Compactly supported laminate with interior gradients ``1 + s_i a⊗b``.

    ``v(x) = ramp(x) chi(h b.x) / h * a`` where ``chi`` is the zero-mean
    sawtooth and the ramp is a piecewise-linear hat equal to 1 at distance
    ``>= delta`` from the boundary. The mesh carries a node line at every
    kink of ``chi`` and at every kink of the ramp, so interior cells see one
    slope each.
    """
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    n = G.n
    if a.shape != (n,) or b.shape != (n,):
        raise ValueError(f"a and b must be vectors of length {n}")
    s1, s2 = (float(s) for s in slopes)
    lam = float(fractions[0])
    if len(fractions) > 1 and abs(fractions[0] + fractions[1] - 1.0) > 1e-12:
        raise ValueError("fractions must sum to 1")
    if not 0.0 < lam < 1.0:
        raise ValueError("infeasible slope/fraction combination: fraction outside (0, 1)")
    if abs(lam * s1 + (1.0 - lam) * s2) > 1e-12 * (1.0 + abs(s1) + abs(s2)):
        raise ValueError("infeasible slope/fraction combination: lam*s1 + (1-lam)*s2 != 0")
    if h <= 0 or not 0.0 < delta < 0.5:
        raise ValueError("need h > 0 and 0 < delta < 1/2")
    ab = float(a @ b)
    if G.tag == "SLn" and abs(ab) > 1e-12:
        raise ValueError("SL laminate requires a.b = 0")
    if G.tag == "GLnPlus" and min(1.0 + s1 * ab, 1.0 + s2 * ab) <= 0.0:
        raise ValueError("GL+ laminate requires 1 + s_i a.b > 0")
    if G.tag in ("SOn", "COn"):
        raise ValueError(f"{G} has an empty rank-one cone; no laminate exists")

    bnorm = np.linalg.norm(b)
    frame = frame_for(b) if bnorm > 0 else np.eye(n)
    if shape == "unit_cube":
        lo, hi, ramp_breaks = 0.0, 1.0, [delta, 1.0 - delta]
        center = np.full(n, 0.5)
    elif shape == "unit_ball":
        lo, hi, ramp_breaks = -1.0, 1.0, []
        center = np.zeros(n)
    else:
        raise ValueError(f"unknown shape {shape!r}")
    breaks = [list(ramp_breaks) for _ in range(n)]
    if bnorm > 0 and (s1 != 0.0 or s2 != 0.0):
        kinks = _sawtooth_breaks(h, b, center, lo, hi, lam)
        breaks[0] = list(ramp_breaks) + list(kinks[(kinks > lo) & (kinks < hi)])
    mk = cube_mesh if shape == "unit_cube" else ball_mesh
    dom = mk(n, resolution, breaks=breaks, frame=frame)

    y = dom.reference_nodes
    ramp = _cube_ramp(y, delta) if shape == "unit_cube" else _ball_ramp(y, delta)
    ramp[dom.boundary] = 0.0
    chi = sawtooth(h * (dom.nodes @ b), s1, s2, lam)
    disp = (ramp * chi / h)[:, None] * a[None, :]
    full = np.all(ramp[dom.cells] == 1.0, axis=1)
    band = ~full & np.any(disp[dom.cells] != 0.0, axis=(1, 2))
    claim = full if G.tag in ("SLn", "SPn") else np.ones(len(dom.cells), bool)
    f = TestField(dom, disp, group=G.tag, claim=claim, band=band,
                  params={"kind": "laminate", "a": a, "b": b, "slopes": [s1, s2],
                          "fractions": [lam, 1.0 - lam], "h": h, "delta": delta,
                          "shape": shape, "resolution": resolution})
    if check:
        if G.tag in ("GLn", "GLnPlus"):
            d = det(f.gradients)
            if np.any(d <= TOL_DET):
                bad = int(np.argmin(d))
                raise ValueError(f"infeasible parameters: det(Du) = {d[bad]:.3g} <= 0 at cell {bad}")
        f.check_claims(G)
    return f


def perturbation_field(G: GroupSpec, amplitude: float, seed, resolution: int = 4,
                       shape: str = "unit_cube", max_halvings: int = 30,
                       margin: float = 1e-3) -> TestField:
    """Random nodal perturbation with zero boundary values, kept orientation preserving.

    Only GL and GL+ accept arbitrary perturbations; the amplitude is halved
    until every cell has ``det(Du) > margin``.
    """
    if G.tag not in ("GLn", "GLnPlus"):
        raise ValueError(f"random perturbations cannot be projected onto {G}")
    rng = np.random.default_rng(seed)
    dom = (cube_mesh if shape == "unit_cube" else ball_mesh)(G.n, resolution)
    noise = rng.standard_normal(dom.nodes.shape) / resolution
    noise[dom.boundary] = 0.0
    amp = float(amplitude)
    for _ in range(max_halvings):
        f = TestField(dom, amp * noise, group=G.tag,
                      params={"kind": "perturbation", "amplitude": amp, "seed": seed,
                              "resolution": resolution, "shape": shape})
        if np.all(det(f.gradients) > margin):
            return f
        amp *= 0.5
    raise ValueError("could not find an orientation-preserving amplitude")


def refine_field(f: TestField) -> TestField:
    """The same piecewise-affine map on the bisected mesh."""
    fine = refine(f.domain)
    disp = interpolate(f.domain, f.displacement, fine.reference_nodes)
    disp[fine.boundary] = 0.0
    claim = band = None
    if f.claim is not None or f.band is not None:
        # fine cell inherits the flags of its parent
        parent, _, _ = locate(f.domain, fine.to_reference(fine.centroids()))
        pos = np.full(int(f.domain.cell_ids.max()) + 1, -1)
        pos[f.domain.cell_ids] = np.arange(len(f.domain.cell_ids))
        idx = pos[parent]
        claim = None if f.claim is None else f.claim[idx]
        band = None if f.band is None else f.band[idx]
    return TestField(fine, disp, f.group, claim, band, dict(f.params))


def ball_to_eta_conversion(f: TestField, F) -> TestField:
    """``eta = F (phi - id)`` as a displacement field; ``F + D eta = F D phi`` per cell.

    The returned field stores ``eta`` in ``displacement``, so its
    ``gradients`` are ``1 + D eta``; use ``eta_gradients`` for ``D eta``.
    """
    F = np.asarray(F, float)
    return _with_displacement(f, f.displacement @ F.T, group=None, claim=None,
                              params={**f.params, "eta_of": F})


def eta_gradients(eta: TestField) -> np.ndarray:
    return eta.gradients - np.eye(eta.n)


def right_transport(f: TestField, F) -> TestField:
    """``v(y) = F u(F^-1 y)`` on ``F(Omega)``, so ``Dv F = F Du`` cell-wise.

    Used to compare left energies ``w(F Du)`` with right energies ``w(Dv F)``.
    """
    F = np.asarray(F, float)
    d = f.domain
    nodes = d.nodes @ F.T
    dom = MeshedDomain(d.shape, d.n, d.resolution, nodes, d.cells, _volumes(nodes, d.cells),
                       d.boundary, d.frame, d.center @ F.T)
    return TestField(dom, f.displacement @ F.T, params={**f.params, "transported_by": F})


# --- JSON mesh format --------------------------------------------------------

def field_to_dict(f: TestField) -> dict:
    d = f.domain
    out = {
        "format": FIELD_FORMAT,
        "shape": d.shape,
        "n": d.n,
        "resolution": d.resolution,
        "frame": d.frame.tolist(),
        "center": d.center.tolist(),
        "nodes": d.nodes.tolist(),
        "cells": d.cells.tolist(),
        "volumes": d.volumes.tolist(),
        "displacement": f.displacement.tolist(),
        "gradients": f.gradients.tolist(),
        "offsets": f.offsets.tolist(),
        "group": f.group,
    }
    if d.axes is not None:
        out["axes"] = [a.tolist() for a in d.axes]
        out["cell_ids"] = d.cell_ids.tolist()
    if f.claim is not None:
        out["claim"] = f.claim.astype(int).tolist()
    if f.band is not None:
        out["band"] = f.band.astype(int).tolist()
    out["params"] = to_jsonable(f.params)
    return out


def field_from_dict(data: dict) -> TestField:
    if data.get("format") != FIELD_FORMAT:
        raise ValueError(f"unsupported field format {data.get('format')!r}")
    frame = np.array(data["frame"], float)
    if "axes" in data:
        dom = tensor_mesh(data["shape"], [np.array(a) for a in data["axes"]], frame,
                          data["resolution"], keep_ids=np.array(data["cell_ids"], dtype=np.int64))
    else:
        nodes = np.array(data["nodes"], float)
        cells = np.array(data["cells"], dtype=np.int64)
        dom = MeshedDomain(data["shape"], data["n"], data["resolution"], nodes, cells,
                           _volumes(nodes, cells), _boundary_nodes(len(nodes), cells),
                           frame, np.array(data["center"], float))
    claim = np.array(data["claim"], bool) if "claim" in data else None
    band = np.array(data["band"], bool) if "band" in data else None
    return TestField(dom, np.array(data["displacement"], float), data.get("group"),
                     claim, band, dict(data.get("params", {})))


def save_field(f: TestField, path) -> None:
    with open(path, "w") as fh:
        json.dump(field_to_dict(f), fh)


def load_field(path) -> TestField:
    with open(path) as fh:
        return field_from_dict(json.load(fh))


# --- smooth bump field on the ball -------------------------------------------

# profile(s) and its derivative; every entry vanishes at s = 1 and equals 1 at s = 0
PROFILES: dict[str, tuple[Callable, Callable]] = {
    "quadratic": (lambda s: (1.0 - s) ** 2, lambda s: -2.0 * (1.0 - s)),
    "cubic": (lambda s: (1.0 - s) ** 3, lambda s: -3.0 * (1.0 - s) ** 2),
}


@dataclass(frozen=True, eq=False)
class MorreyField:
    """``eta(x) = u(|x|^2) sin(b.x) a`` on the unit ball."""

    a: np.ndarray
    b: np.ndarray
    profile: str = "quadratic"

    @property
    def n(self):
        return len(self.a)

    def value(self, x):
        x = np.asarray(x, float)
        u, _ = PROFILES[self.profile]
        s = np.sum(x * x, axis=-1)
        return (u(s) * np.sin(x @ self.b))[..., None] * self.a

    def grad(self, x):
        """``D eta = sin(b.x) a ⊗ (2 u'(|x|^2) x) + u(|x|^2) cos(b.x) a ⊗ b``."""
        x = np.asarray(x, float)
        u, du = PROFILES[self.profile]
        s = np.sum(x * x, axis=-1)
        phase = x @ self.b
        g = (2.0 * du(s) * np.sin(phase))[..., None] * x + (u(s) * np.cos(phase))[..., None] * self.b
        return rank_one(np.broadcast_to(self.a, g.shape), g)


def morrey_field(a, b, profile: str = "quadratic") -> MorreyField:
    if profile not in PROFILES:
        raise ValueError(f"unknown profile {profile!r}; choose from {sorted(PROFILES)}")
    return MorreyField(np.asarray(a, float), np.asarray(b, float), profile)


def _gauss_panels(lo, hi, order, panels):
    x, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(lo, hi, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    pts = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    wts = (half[:, None] * w[None, :]).ravel()
    return pts, wts


def ball_quadrature(n: int, order: int = 6, panels: int = 8):
    """Composite Gauss rule on the unit ball in polar/spherical coordinates."""
    r, wr = _gauss_panels(0.0, 1.0, order, panels)
    if n == 2:
        th, wt = _gauss_panels(0.0, 2.0 * np.pi, order, 4 * panels)
        R, T = np.meshgrid(r, th, indexing="ij")
        W = np.outer(wr * r, wt)
        pts = np.stack([R * np.cos(T), R * np.sin(T)], axis=-1)
        return pts.reshape(-1, 2), W.ravel()
    if n == 3:
        mu, wm = _gauss_panels(-1.0, 1.0, order, 2 * panels)
        ph, wp = _gauss_panels(0.0, 2.0 * np.pi, order, 4 * panels)
        R, M, P = np.meshgrid(r, mu, ph, indexing="ij")
        S = np.sqrt(1.0 - M * M)
        W = (wr * r * r)[:, None, None] * wm[None, :, None] * wp[None, None, :]
        pts = np.stack([R * S * np.cos(P), R * S * np.sin(P), R * M], axis=-1)
        return pts.reshape(-1, 3), W.ravel()
    raise ValueError("ball quadrature is available for n = 2, 3")


def _panels_for(f: MorreyField) -> int:
    # resolve the oscillation sin(b.x): a few panels per half-period
    return max(4, int(math.ceil(2.0 * np.linalg.norm(f.b))) + 2)


def delta_tensor(f: MorreyField, quadrature_order: int = 6, panels: Optional[int] = None):
    """``Delta_ijkl = int_B  D eta_ij  D eta_kl``."""
    pts, wts = ball_quadrature(f.n, quadrature_order, panels or _panels_for(f))
    D = f.grad(pts)
    return np.einsum("q,qij,qkl->ijkl", wts, D, D)
