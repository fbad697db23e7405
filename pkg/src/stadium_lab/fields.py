"""Commutant vector fields ``A = a d/dx + b d/dy`` and their commutator forms.

For ``Delta = -(d_xx + d_yy)`` and any smooth ``A``,

    [Delta, A] = -2 (d_j a_i) d_i d_j - (lap a_i) d_i,

and for real ``u`` with zero trace one integration by parts (no boundary
term, since ``u`` vanishes there) gives the first-order quadratic form

    <u, [Delta, A] u> = 2 int S(grad u, grad u) + int u grad(div A) . grad u,

with ``S`` the symmetric part of ``grad A``.  P1 fields have no second
derivatives, so only this integrated form is ever evaluated.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .operators import OperatorPair, QUAD_BARY, element_gradients, quad_points


def smoothstep(t):
    """Quintic ramp 0 -> 1 on [0, 1] with first and second derivatives vanishing at both ends."""
    t = np.clip(t, 0.0, 1.0)
    return t**3 * (10.0 - 15.0 * t + 6.0 * t**2)


def smoothstep_d1(t):
    t = np.clip(t, 0.0, 1.0)
    return 30.0 * t**2 * (1.0 - t) ** 2


def smoothstep_d2(t):
    t = np.clip(t, 0.0, 1.0)
    return 60.0 * t * (1.0 - t) * (1.0 - 2.0 * t)


@dataclass(frozen=True)
class CutoffSpec:
    """Odd monotone ramp: 0 for ``|s| <= lo``, ``sign(s)`` for ``|s| >= hi``."""

    lo: float
    hi: float

    def __post_init__(self):
        if not 0 <= self.lo < self.hi:
            raise ValueError("need 0 <= lo < hi")

    def _t(self, s):
        return (np.abs(s) - self.lo) / (self.hi - self.lo)

    def value(self, s):
        return np.sign(s) * smoothstep(self._t(s))

    def d1(self, s):
        return smoothstep_d1(self._t(s)) / (self.hi - self.lo)

    def d2(self, s):
        return np.sign(s) * smoothstep_d2(self._t(s)) / (self.hi - self.lo) ** 2


def heaviside(w):
    """H(w) with H(0) = 1."""
    return (np.asarray(w) >= 0).astype(float)


class VectorField:
    """Base class; subclasses supply coefficients and their derivatives on arrays."""

    name = "field"

    def coeffs(self, x, y):
        """``(a, b)``."""
        raise NotImplementedError

    def jacobian(self, x, y):
        """``(a_x, a_y, b_x, b_y)``."""
        raise NotImplementedError

    def laplacians(self, x, y):
        """``(lap a, lap b)``."""
        raise NotImplementedError

    def grad_div(self, x, y):
        raise NotImplementedError

    def divergence(self, x, y):
        ax, _, _, by = self.jacobian(x, y)
        return ax + by

    def commutator_coefficients(self, x, y) -> dict:
        """Coefficients of ``[Delta, A] = c_xx d_xx + c_xy d_xy + c_yy d_yy + d_x d_x + d_y d_y``."""
        ax, ay, bx, by = self.jacobian(x, y)
        la, lb = self.laplacians(x, y)
        return {"c_xx": -2.0 * ax, "c_xy": -2.0 * (ay + bx), "c_yy": -2.0 * by,
                "d_x": -la, "d_y": -lb}

    def normal_component(self, points, normals):
        """``q = (a, b) . N``: on the boundary ``A u = q d_N u`` for zero-trace ``u``."""
        a, b = self.coeffs(points[:, 0], points[:, 1])
        a = np.broadcast_to(a, points[:, 0].shape)
        b = np.broadcast_to(b, points[:, 0].shape)
        return a * normals[:, 0] + b * normals[:, 1]


class XdX(VectorField):
    name = "xdx"

    def coeffs(self, x, y):
        return x, np.zeros_like(x)

    def jacobian(self, x, y):
        one, zero = np.ones_like(x), np.zeros_like(x)
        return one, zero, zero, zero

    def laplacians(self, x, y):
        return np.zeros_like(x), np.zeros_like(x)

    def grad_div(self, x, y):
        return np.zeros_like(x), np.zeros_like(x)


class Radial(VectorField):
    name = "radial"

    def coeffs(self, x, y):
        return x, y

    def jacobian(self, x, y):
        one, zero = np.ones_like(x), np.zeros_like(x)
        return one, zero, zero, one

    def laplacians(self, x, y):
        return np.zeros_like(x), np.zeros_like(x)

    def grad_div(self, x, y):
        return np.zeros_like(x), np.zeros_like(x)


@dataclass(frozen=True)
class CutoffX(VectorField):
    """``phi(x) d/dx`` with ``phi`` rising in the wings from ``w = lo`` to ``w = hi``.

    ``phi`` is odd in ``x`` so that ``phi_x >= 0`` on both wings.
    """

    alpha: float
    ramp: CutoffSpec
    name = "cutoffx"

    def _w(self, x):
        return np.sign(x) * np.maximum(np.abs(x) - self.alpha, 0.0)

    def phi(self, x):
        return self.ramp.value(self._w(x))

    def phi_x(self, x):
        return self.ramp.d1(self._w(x)) * (np.abs(x) > self.alpha)

    def phi_xx(self, x):
        return self.ramp.d2(self._w(x)) * (np.abs(x) > self.alpha)

    def coeffs(self, x, y):
        return self.phi(x), np.zeros_like(x)

    def jacobian(self, x, y):
        zero = np.zeros_like(x)
        return self.phi_x(x), zero, zero, zero

    def laplacians(self, x, y):
        return self.phi_xx(x), np.zeros_like(x)

    def grad_div(self, x, y):
        return self.phi_xx(x), np.zeros_like(x)


@dataclass(frozen=True)
class WingY(VectorField):
    """``lam^2 w_+^2 chi(y) d/dy``, supported in the wings."""

    alpha: float
    lam: float
    ramp: CutoffSpec
    name = "wingy"

    def _wp(self, x):
        return np.maximum(np.abs(x) - self.alpha, 0.0)

    def coeffs(self, x, y):
        return np.zeros_like(x), self.lam**2 * self._wp(x) ** 2 * self.ramp.value(y)

    def jacobian(self, x, y):
        l2, wp = self.lam**2, self._wp(x)
        zero = np.zeros_like(x)
        bx = 2.0 * l2 * wp * np.sign(x) * self.ramp.value(y)
        by = l2 * wp**2 * self.ramp.d1(y)
        return zero, zero, bx, by

    def laplacians(self, x, y):
        l2, wp = self.lam**2, self._wp(x)
        H = heaviside(np.abs(x) - self.alpha)
        return np.zeros_like(x), l2 * (2.0 * H * self.ramp.value(y) + wp**2 * self.ramp.d2(y))

    def grad_div(self, x, y):
        l2, wp = self.lam**2, self._wp(x)
        return (2.0 * l2 * wp * np.sign(x) * self.ramp.d1(y), l2 * wp**2 * self.ramp.d2(y))


FIELD_KINDS = ("xdx", "radial", "cutoffx", "wingy")


def make_field(kind: str, alpha: float, beta: float, lam: float | None = None,
               phi_knots=None, chi_knots=None) -> VectorField:
    """Build a commutant by name; knot defaults follow the support constraints of the cutoffs."""
    kind = kind.lower()
    if kind == "xdx":
        return XdX()
    if kind == "radial":
        return Radial()
    if kind == "cutoffx":
        lo, hi = phi_knots or (beta / 4, beta / 2)
        return CutoffX(alpha, CutoffSpec(lo, hi))
    if kind == "wingy":
        if lam is None:
            raise ValueError("the wing field needs lam")
        lo, hi = chi_knots or (beta / 20, beta / 10)
        return WingY(alpha, lam, CutoffSpec(lo, hi))
    raise ValueError(f"unknown field kind {kind!r}; expected one of {FIELD_KINDS}")


# --------------------------------------------------------------------------
# action on P1 fields

def _element_data(opair: OperatorPair, u: np.ndarray):
    mesh = opair.mesh
    qp = quad_points(mesh)
    g = element_gradients(opair, u)
    uq = np.einsum("qi,ei->eq", QUAD_BARY, opair.to_full(u)[mesh.triangles])
    wq = (mesh.signed_areas / 3.0)[:, None]
    return qp, g, uq, wq


def apply(field: VectorField, u: np.ndarray, opair: OperatorPair) -> np.ndarray:
    """``A u`` at the 3 rule points of every triangle, shape (T, 3)."""
    qp = quad_points(opair.mesh)
    g = element_gradients(opair, u)
    a, b = field.coeffs(qp[..., 0], qp[..., 1])
    return a * g[:, 0, None] + b * g[:, 1, None]


def commutator_form(field: VectorField, u: np.ndarray, lambdasq: float, opair: OperatorPair) -> float:
    """``<u, [Delta - lambda^2, A] u>`` for a zero-trace P1 field (``lambda^2`` commutes with ``A``)."""
    qp, g, uq, wq = _element_data(opair, u)
    x, y = qp[..., 0], qp[..., 1]
    ax, ay, bx, by = (np.broadcast_to(c, x.shape) for c in field.jacobian(x, y))
    gdx, gdy = (np.broadcast_to(c, x.shape) for c in field.grad_div(x, y))
    gx, gy = g[:, 0, None], g[:, 1, None]
    quad = ax * gx * gx + (ay + bx) * gx * gy + by * gy * gy
    integrand = 2.0 * quad + uq * (gdx * gx + gdy * gy)
    return float(np.sum(wq * integrand))


def divergence_at_quad(field: VectorField, opair: OperatorPair) -> np.ndarray:
    qp = quad_points(opair.mesh)
    return np.broadcast_to(field.divergence(qp[..., 0], qp[..., 1]), qp.shape[:2])


def cutoff_gradient_form(field: CutoffX, u: np.ndarray, opair: OperatorPair) -> float:
    """``int phi_x (u_x^2 + u_y^2)``, nonnegative because ``phi_x >= 0``."""
    qp, g, _, wq = _element_data(opair, u)
    px = field.phi_x(qp[..., 0])
    return float(np.sum(wq * px * (g[:, 0, None] ** 2 + g[:, 1, None] ** 2)))
