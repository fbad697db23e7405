"""Residuals of the commutator (Rellich) identity and related measured chains.

For real ``u`` vanishing on the boundary with ``(Delta - lambda^2) u = f``,

    <u, [Delta - lambda^2, A] u> = <2 A u + (div A) u, f> + int_{dS} (d_N u)(A u) dl.

Every term is computed separately: the left side from the first-order
commutator form, the volume term by element quadrature, and the boundary
term from the recovered normal derivative, using ``A u = q d_N u`` on the
boundary with ``q = (a, b) . N``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from . import fields as fl
from .mesh import ARC_TAGS
from .observables import ObservableReport, gradient_quadrature, normal_trace
from .operators import OperatorPair, QUAD_BARY, quad_points
from .quasimode import ModeField


@dataclass(frozen=True)
class RellichReport:
    field: str
    lam: float
    lhs: float
    rhs_volume: float
    rhs_boundary: float
    residual: float
    scale: float

    @property
    def relative_residual(self) -> float:
        return self.residual / self.scale

    def as_dict(self) -> dict:
        d = asdict(self)
        d["relative_residual"] = self.relative_residual
        return d


REPORT_COLUMNS = ("field", "lambda", "lhs", "rhs_volume", "rhs_boundary", "residual", "scale",
                  "relative_residual")


def _at_quad(values_full, opair):
    return np.einsum("qi,ei->eq", QUAD_BARY, values_full[opair.mesh.triangles])


def volume_term(field: fl.VectorField, u, f, opair: OperatorPair) -> float:
    """``<2 A u + (div A) u, f>`` by the 3-point rule."""
    if f is None:
        return 0.0
    Au = fl.apply(field, u, opair)
    div = fl.divergence_at_quad(field, opair)
    uq = _at_quad(opair.to_full(u), opair)
    fq = _at_quad(opair.to_full(f), opair)
    w = (opair.mesh.signed_areas / 3.0)[:, None]
    return float(np.sum(w * (2.0 * Au + div * uq) * fq))


def boundary_term(field: fl.VectorField, u, lambdasq, f, opair: OperatorPair, tags=None,
                  method: str = "variational") -> float:
    """``int (d_N u)(A u) dl`` over the selected boundary edges."""
    tr = normal_trace(u, lambdasq, f, opair, tags=tags, method=method)
    q = field.normal_component(tr.quad.points, tr.quad.normals)
    return float(np.sum(tr.quad.weights * q * tr.values**2))


def resolve_field(field, mode: ModeField, opair: OperatorPair, **kw) -> fl.VectorField:
    if isinstance(field, fl.VectorField):
        return field
    dom = opair.mesh.domain
    return fl.make_field(field, dom.alpha, dom.beta, lam=mode.lam, **kw)


def split_complex(mode: ModeField) -> list[ModeField]:
    """Real and imaginary parts of a complex mode, each checked on its own."""
    if not np.iscomplexobj(mode.vector):
        return [mode]
    parts = []
    for take in (np.real, np.imag):
        parts.append(ModeField(take(mode.vector).copy(), mode.lambdasq, take(mode.f).copy(),
                               float(np.linalg.norm(take(mode.f))), mode.provenance, dict(mode.meta)))
    return parts


def rellich_residual(mode: ModeField, field, opair: OperatorPair, **field_kw) -> RellichReport:
    if np.iscomplexobj(mode.vector):
        raise ValueError("split complex modes with split_complex() first")
    A = resolve_field(field, mode, opair, **field_kw)
    u, l2, f = mode.vector, mode.lambdasq, mode.f
    lhs = fl.commutator_form(A, u, l2, opair)
    vol = volume_term(A, u, f, opair)
    bdy = boundary_term(A, u, l2, f, opair)
    res = abs(lhs - vol - bdy)
    return RellichReport(A.name, mode.lam, lhs, vol, bdy, res, max(abs(lhs), abs(bdy), 1.0))


@dataclass(frozen=True)
class XdXChain:
    """Terms of the ``A = x d/dx`` specialisation.

    The commutator side is ``2 ||u_x||^2`` (``[Delta, x d_x] = -2 d_xx``).
    """

    ux_sq: float
    boundary: float  # int x d_x u d_N u over the whole boundary
    boundary_wing: float  # same integral over the arcs only
    f_term: float  # int (2 x u_x + u) f
    residual: float  # |2 ||u_x||^2 - boundary - f_term|
    relative: float
    wing_localisation: float  # |boundary - boundary_wing| / max(|boundary|, 1)


def chain_3_1(mode: ModeField, opair: OperatorPair) -> XdXChain:
    A = fl.XdX()
    u, l2, f = mode.vector, mode.lambdasq, mode.f
    ux2, _ = gradient_quadrature(u, opair)
    bd = boundary_term(A, u, l2, f, opair)
    bw = boundary_term(A, u, l2, f, opair, tags=ARC_TAGS)
    ft = volume_term(A, u, f, opair)
    res = abs(2.0 * ux2 - bd - ft)
    scale = max(2.0 * ux2, abs(bd), 1.0)
    return XdXChain(ux2, bd, bw, ft, res, res / scale, abs(bd - bw) / max(abs(bd), 1.0))


@dataclass(frozen=True)
class LhsTriple:
    lhs_normderiv: float  # ||f||^2 + int_{dS cap W} w |d_N u|^2
    lhs_L2: float  # ||f||^2 + lam^8 ||u||_W^2
    lhs_L2bis: float  # lam^2 ||f||^2 + lam^4 ||u||_W^2
    wing_norm_scaled: float  # lam^2 ||u||_{L^2(W)}


def theorem_lhs(report: ObservableReport) -> LhsTriple:
    return LhsTriple(report.lhs_normderiv, report.lhs_L2, report.lhs_L2bis,
                      report.lam**2 * math.sqrt(max(report.wing_mass, 0.0)))


def radial_boundary_factor(opair: OperatorPair) -> np.ndarray:
    """``(x, y) . N`` at every boundary quadrature point (nonnegative on star-shaped domains)."""
    from .mesh import boundary_quadrature

    q = boundary_quadrature(opair.mesh)
    return np.einsum("qd,qd->q", q.points, q.normals)


@dataclass(frozen=True)
class RadialConsistency:
    """Radial commutant: ``[Delta, r d_r] = 2 Delta``, so the form is ``2 ||grad u||^2``."""

    lhs: float
    expected: float  # 2 (lambda^2 ||u||^2 + <f, u>)
    relative: float


def radial_consistency(mode: ModeField, opair: OperatorPair) -> RadialConsistency:
    u, l2, f = mode.vector, mode.lambdasq, mode.f
    lhs = fl.commutator_form(fl.Radial(), u, l2, opair)
    fu = opair.m_inner(f, u) if f is not None else 0.0
    expected = 2.0 * (l2 * opair.m_inner(u, u) + fu)
    return RadialConsistency(lhs, expected, abs(lhs - expected) / max(abs(lhs), 1.0))


def verify_mode(mode: ModeField, opair: OperatorPair, kinds=fl.FIELD_KINDS, **field_kw) -> list[RellichReport]:
    return [rellich_residual(mode, k, opair, **field_kw) for k in kinds]
