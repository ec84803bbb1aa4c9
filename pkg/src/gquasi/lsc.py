"""Lower-semicontinuity experiments along weak-* convergent field sequences.

Each generator produces piecewise-affine maps ``u_h`` with identity boundary
values, ``|u_h - u|_inf = O(1/h)`` and bounded gradients. The liminf of the
energies is approximated by the minimum over the tail half of the scales.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .fields import TestField, identity_field, laminate_field, sawtooth
from .groups import TOL_DET, GroupSpec
from .linalg import det, singular_values
from .energy import energy
from .mesh import MeshedDomain, _volumes, cube_mesh, interpolate, refine
from .potentials import Potential
from .report import to_jsonable

__all__ = [
    "GENERATORS",
    "SequenceSpec",
    "LscReport",
    "default_limit_map",
    "build_sequence",
    "compose",
    "lsc_experiment",
    "weak_star_diagnostics",
]

GENERATORS = ("laminate_scaling", "bump_scaling", "composed")


@dataclass
class SequenceSpec:
    generator: str = "laminate_scaling"
    scales: tuple = (4, 8, 16, 32, 64)
    a: tuple = (1.0, 0.0)
    b: tuple = (0.0, 1.0)
    slopes: tuple = (0.5, -0.5)
    fractions: tuple = (0.5, 0.5)
    delta: float = 0.1
    resolution: int = 4
    shape: str = "unit_cube"
    # None means the identity; otherwise a piecewise-affine map on a uniform cube mesh
    limit_map: Optional[TestField] = None

    def __post_init__(self):
        if self.generator not in GENERATORS:
            raise ValueError(f"generator must be one of {GENERATORS}")
        if len(self.scales) == 0 or any(h <= 0 for h in self.scales):
            raise ValueError("scales must be a nonempty list of positive numbers")

    def describe(self) -> dict:
        d = {k: v for k, v in asdict(self).items() if k != "limit_map"}
        d["limit_map"] = "identity" if self.limit_map is None else self.limit_map.params
        return to_jsonable(d)


@dataclass
class LscReport:
    energies: list
    limit_energy: float
    min_tail_energy: float
    tol: float
    verdict: str
    diagnostics: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"

    @property
    def drop(self) -> float:
        """How far the tail minimum falls below the limit energy."""
        return self.limit_energy - self.min_tail_energy

    def to_dict(self) -> dict:
        return to_jsonable(asdict(self))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh)
            out.writerow(["h", "energy"])
            for h, e in self.energies:
                out.writerow([repr(float(h)), repr(float(e))])


def default_limit_map(n: int = 2, resolution: int = 4, amplitude: float = 0.15,
                      direction=None) -> TestField:
    """A fixed bi-Lipschitz piecewise-affine map on a uniform cube mesh."""
    dom = cube_mesh(n, resolution)
    y = dom.reference_nodes
    d = np.ones(n) / math.sqrt(n) if direction is None else np.asarray(direction, float)
    bump = np.prod(np.sin(np.pi * y), axis=-1)
    disp = amplitude * bump[:, None] * d[None, :]
    disp[dom.boundary] = 0.0
    f = TestField(dom, disp, params={"kind": "limit_map", "amplitude": amplitude,
                                     "resolution": resolution})
    if np.any(det(f.gradients) <= TOL_DET):
        raise ValueError("limit map is not orientation preserving")
    return f


def _bump_field(G, a, b, h, resolution, shape):
    """P1 interpolant of ``x -> x + bump(x) sin(h b.x) / h a`` on a mesh fine enough for ``h``."""
    if shape != "unit_cube":
        raise ValueError("bump_scaling is implemented on the unit cube")
    n = G.n
    res = max(resolution, int(math.ceil(4 * h * max(np.linalg.norm(b), 1e-12))))
    dom = cube_mesh(n, res)
    y = dom.reference_nodes
    bump = np.prod(np.sin(np.pi * y), axis=-1) ** 2
    disp = (bump * np.sin(h * (dom.nodes @ b)) / h)[:, None] * a[None, :]
    disp[dom.boundary] = 0.0
    return TestField(dom, disp, group=G.tag,
                     params={"kind": "bump", "h": h, "resolution": res})


def compose(limit: TestField, h: float, spec: SequenceSpec, G: GroupSpec):
    """``u_h o u`` on a refinement of the limit mesh.

    ``u_h`` is the P1 interpolant, on the image mesh ``u(M)``, of the
    laminate formula. The composition is then piecewise affine on ``M`` with
    gradient ``Du_h(u(x)) Du(x)`` cell by cell. Returns
    ``(composition, u_h on the image mesh, u on M)``.
    """
    dom, disp = limit.domain, limit.displacement
    want = max(spec.resolution, int(math.ceil(2 * h)))
    while dom.resolution < want:
        fine = refine(dom)
        disp = interpolate(dom, disp, fine.reference_nodes)
        disp[fine.boundary] = 0.0
        dom = fine
    u = TestField(dom, disp, params=dict(limit.params))
    a = np.asarray(spec.a, float)
    b = np.asarray(spec.b, float)
    s1, s2 = spec.slopes
    # u fixes the boundary of the cube, so image points stay in the cube
    img = u.image_nodes()
    ramp = np.prod(np.clip(np.minimum(img, 1.0 - img) / spec.delta, 0.0, 1.0), axis=-1)
    vh = (ramp * sawtooth(h * (img @ b), s1, s2, spec.fractions[0]) / h)[:, None] * a[None, :]
    vh[dom.boundary] = 0.0
    image_dom = MeshedDomain("unit_cube", dom.n, dom.resolution, img, dom.cells,
                             _volumes(img, dom.cells), dom.boundary, np.eye(dom.n), dom.center)
    outer = TestField(image_dom, vh, group=G.tag, params={"kind": "laminate_on_image", "h": h})
    composed = TestField(dom, disp + vh, group=G.tag,
                         params={"kind": "composed", "h": h, "resolution": dom.resolution})
    return composed, outer, u


def build_sequence(spec: SequenceSpec, G: GroupSpec) -> list[TestField]:
    """Fields ``u_h`` for every scale; raises at the first inadmissible ``h``."""
    a = np.asarray(spec.a, float)
    b = np.asarray(spec.b, float)
    out = []
    for h in spec.scales:
        try:
            if spec.generator == "laminate_scaling":
                f = laminate_field(G, a, b, spec.slopes, spec.fractions, float(h), spec.delta,
                                   spec.shape, spec.resolution)
            elif spec.generator == "bump_scaling":
                f = _bump_field(G, a, b, float(h), spec.resolution, spec.shape)
            else:
                limit = spec.limit_map or default_limit_map(G.n, spec.resolution)
                f, _, _ = compose(limit, float(h), spec, G)
            if G.tag in ("GLn", "GLnPlus"):
                d = det(f.gradients)
                if np.any(d <= TOL_DET):
                    raise ValueError(f"det(Du) = {d.min():.3g} <= 0")
            if G.tag not in ("GLn", "GLnPlus"):
                f.check_claims(G)
        except ValueError as exc:
            raise ValueError(f"admissibility failure at h = {h}: {exc}") from exc
        out.append(f)
    return out


def _limit_field(spec: SequenceSpec, fields: list[TestField]) -> TestField:
    if spec.generator == "composed":
        return spec.limit_map or default_limit_map(fields[0].n, spec.resolution)
    return identity_field(fields[0].domain)


def weak_star_diagnostics(fields: list[TestField], limit_map: Optional[TestField] = None) -> dict:
    """Sup-norm distance to the limit and gradient bounds along the sequence.

    Both fields are piecewise affine on the same mesh after interpolating the
    limit, so the sup-norm of their difference is attained at a node.
    """
    rows = []
    prev = None
    for f in fields:
        if limit_map is None:
            lim = np.zeros_like(f.displacement)
        elif limit_map.domain is f.domain:
            lim = limit_map.displacement
        else:
            lim = interpolate(limit_map.domain, limit_map.displacement, f.domain.reference_nodes)
        sup = float(np.max(np.linalg.norm(f.displacement - lim, axis=-1)))
        grad = float(np.max(singular_values(f.gradients)[..., 0]))
        row = {"h": f.params.get("h"), "sup_norm": sup, "gradient_bound": grad,
               "ratio": None if prev in (None, 0.0) else sup / prev}
        rows.append(row)
        prev = sup
    sups = [r["sup_norm"] for r in rows]
    grads = [r["gradient_bound"] for r in rows]
    return {
        "rows": rows,
        "decaying": all(s2 <= s1 * (1 + 1e-12) + 1e-15 for s1, s2 in zip(sups, sups[1:])),
        "bounded": bool(np.all(np.isfinite(grads))) and max(grads) <= 2.0 * grads[0] + 1e-12,
        "max_gradient": max(grads),
    }


def lsc_experiment(w: Potential, F0, spec: SequenceSpec, G: GroupSpec,
                   tol: Optional[float] = None) -> LscReport:
    """Energies along the sequence versus the energy of the limit map."""
    F0 = np.asarray(F0, float)
    fields = build_sequence(spec, G)
    limit = _limit_field(spec, fields)
    limit_energy = energy(w, F0, limit)
    energies = [(float(h), energy(w, F0, f)) for h, f in zip(spec.scales, fields)]
    tail = [e for _, e in energies[len(energies) // 2:]]
    if tol is None:
        tol = 1e-6 * (1.0 + abs(limit_energy))
    min_tail = min(tail)
    verdict = "pass" if min_tail >= limit_energy - tol else "fail"
    diag = weak_star_diagnostics(fields, None if spec.generator != "composed" else limit)
    return LscReport(energies, limit_energy, min_tail, tol, verdict, diag,
                     {"potential": w.name, "group": str(G), "F0": F0, "spec": spec.describe()})
