"""Exact, mesh-free description of the Bunimovich stadium.

The stadium ``S`` is the rectangle ``R = [-alpha, alpha] x [-beta, beta]``
with two half-disks of radius ``beta`` glued to its vertical sides.  The
half-disk on the right is ``W+`` and the one on the left is ``W-``.  Inside
the wings the coordinate ``w = |x| - alpha`` is nonnegative; it vanishes on
the gluing lines.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np


class DomainError(ValueError):
    """A query point lies outside the set on which the query is defined."""


class RegionTag(enum.Enum):
    RECTANGLE = "Rectangle"
    WING_PLUS = "WingPlus"
    WING_MINUS = "WingMinus"
    OUTSIDE = "Outside"


class WingZone(enum.IntEnum):
    I = 1
    II = 2
    III = 3


# Relative tolerance used when deciding whether a point is on the closed set.
_INSIDE_TOL = 1e-12


@dataclass(frozen=True)
class StadiumGeometry:
    alpha: float
    beta: float

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta > 0):
            raise ValueError(f"alpha and beta must be positive, got {self.alpha}, {self.beta}")
        if not (math.isfinite(self.alpha) and math.isfinite(self.beta)):
            raise ValueError("alpha and beta must be finite")

    @property
    def area(self) -> float:
        return 4.0 * self.alpha * self.beta + math.pi * self.beta**2

    @property
    def perimeter(self) -> float:
        return 4.0 * self.alpha + 2.0 * math.pi * self.beta

    @property
    def snap_tol(self) -> float:
        return 1e-9 * self.beta

    def classify(self, x: float, y: float) -> RegionTag:
        if not (math.isfinite(x) and math.isfinite(y)):
            raise DomainError("coordinates must be finite")
        a, b = self.alpha, self.beta
        eps = _INSIDE_TOL * b
        if abs(x) <= a and abs(y) <= b + eps:
            return RegionTag.RECTANGLE
        cx = a if x > 0 else -a
        if (x - cx) ** 2 + y**2 <= b * b * (1 + _INSIDE_TOL):
            return RegionTag.WING_PLUS if x > 0 else RegionTag.WING_MINUS
        return RegionTag.OUTSIDE

    def contains(self, x: float, y: float) -> bool:
        return self.classify(x, y) is not RegionTag.OUTSIDE

    def weight_w(self, x: float, y: float) -> float:
        """Wing coordinate ``max(|x| - alpha, 0)``; zero on the rectangle."""
        if not self.contains(x, y):
            raise DomainError(f"point ({x}, {y}) is outside the stadium")
        return max(abs(x) - self.alpha, 0.0)

    def zone(self, x: float, y: float, lam: float, delta: float) -> WingZone:
        """Wing zone of a point for frequency ``lam`` and layer constant ``delta``.

        Zone I is the boundary layer ``w <= delta / lam**2``, zone III is
        ``w >= beta / 2`` and zone II lies between.  Points on a threshold
        go to the lower zone.
        """
        if lam <= 0 or delta <= 0:
            raise ValueError("lam and delta must be positive")
        tag = self.classify(x, y)
        if tag not in (RegionTag.WING_PLUS, RegionTag.WING_MINUS):
            raise DomainError(f"point ({x}, {y}) is not in a wing")
        return zone_of_w(abs(x) - self.alpha, self.beta, lam, delta)

    def _boundary_piece(self, x: float, y: float) -> str:
        a, b = self.alpha, self.beta
        tol = self.snap_tol
        if abs(x) <= a + tol and abs(abs(y) - b) <= tol:
            return "top" if y > 0 else "bottom"
        if abs(x) > a - tol:
            cx = a if x > 0 else -a
            if abs(math.hypot(x - cx, y) - b) <= tol:
                return "arc+" if x > 0 else "arc-"
        raise DomainError(f"point ({x}, {y}) is not on the stadium boundary")

    def boundary_normal(self, x: float, y: float) -> tuple[float, float]:
        piece = self._boundary_piece(x, y)
        if piece == "top":
            return (0.0, 1.0)
        if piece == "bottom":
            return (0.0, -1.0)
        cx = self.alpha if piece == "arc+" else -self.alpha
        r = math.hypot(x - cx, y)
        return ((x - cx) / r, y / r)

    def tangential_normal_split(self, x: float, y: float) -> tuple[float, float]:
        """Coefficients ``(p, q)`` with ``x d/dx = p d/dl + q d/dN`` at a boundary point.

        The tangent is the normal rotated counter-clockwise, so ``d/dl``
        runs along the boundary with the domain on the left.
        """
        nx, ny = self.boundary_normal(x, y)
        tx, ty = -ny, nx
        return (x * tx, x * nx)


def zone_of_w(w, beta: float, lam: float, delta: float):
    """Vectorised zone classification on the wing coordinate (ties go down)."""
    layer = delta / lam**2
    w = np.asarray(w, dtype=float)
    z = np.where(w <= layer, 1, np.where(w <= beta / 2, 2, 3))
    if z.ndim == 0:
        return WingZone(int(z))
    return z


def wing_weight(x, alpha: float):
    """``max(|x| - alpha, 0)`` on arrays, without membership checks."""
    return np.maximum(np.abs(np.asarray(x, dtype=float)) - alpha, 0.0)
