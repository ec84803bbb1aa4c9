"""Numerical checks of rank-one convexity and quasiconvexity on matrix groups."""

__version__ = "0.1.0"

from .groups import GroupSpec, group  # noqa: E402
from .potentials import Potential, builtin, gauge, involution, iso_family, sl2_affine_family  # noqa: E402
from .report import CheckReport  # noqa: E402

__all__ = [
    "__version__",
    "GroupSpec",
    "group",
    "Potential",
    "builtin",
    "gauge",
    "involution",
    "iso_family",
    "sl2_affine_family",
    "CheckReport",
]
