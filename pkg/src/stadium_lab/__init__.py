"""Dirichlet eigenfunctions and quasimodes of the Bunimovich stadium."""

from .geometry import DomainError, RegionTag, StadiumGeometry, WingZone
from .kernels import BACKEND
from .mesh import BoundaryTag, DiskOnly, RectangleOnly, TriMesh, build, refine

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "BoundaryTag",
    "DiskOnly",
    "DomainError",
    "RectangleOnly",
    "RegionTag",
    "StadiumGeometry",
    "TriMesh",
    "WingZone",
    "build",
    "refine",
]
