"""Measured functionals of a mode: region masses, boundary flux, gradient identity."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve

from .mesh import ARC_TAGS, BoundaryQuadrature, TriMesh, boundary_quadrature
from .operators import OperatorPair, QUAD_BARY, element_gradients


# --------------------------------------------------------------------------
# masses

def _tri_mass(p, uv):
    """Exact ``int u^2`` over triangles with vertices ``p`` (..., 3, 2) and values ``uv`` (..., 3)."""
    e1 = p[..., 1, :] - p[..., 0, :]
    e2 = p[..., 2, :] - p[..., 0, :]
    area = 0.5 * np.abs(e1[..., 0] * e2[..., 1] - e1[..., 1] * e2[..., 0])
    u0, u1, u2 = uv[..., 0], uv[..., 1], uv[..., 2]
    return area / 6.0 * (u0 * u0 + u1 * u1 + u2 * u2 + u0 * u1 + u1 * u2 + u2 * u0)


def element_masses(u_full: np.ndarray, mesh: TriMesh) -> np.ndarray:
    return _tri_mass(mesh.vertices[mesh.triangles], u_full[mesh.triangles])


def _clip_halfplane(poly, x0, keep_above):
    """Sutherland-Hodgman clip of a polygon (list of (x, y, u)) to x >= x0 or x <= x0."""
    out = []
    n = len(poly)
    for i in range(n):
        a, b = poly[i], poly[(i + 1) % n]
        ina = (a[0] >= x0) if keep_above else (a[0] <= x0)
        inb = (b[0] >= x0) if keep_above else (b[0] <= x0)
        if ina:
            out.append(a)
        if ina != inb:
            t = (x0 - a[0]) / (b[0] - a[0])
            out.append((x0, a[1] + t * (b[1] - a[1]), a[2] + t * (b[2] - a[2])))
    return out


def _poly_mass(poly):
    if len(poly) < 3:
        return 0.0
    arr = np.array(poly)
    tris = np.array([[arr[0], arr[k], arr[k + 1]] for k in range(1, len(arr) - 1)])
    return float(np.sum(_tri_mass(tris[..., :2], tris[..., 2])))


def x_band_mass(u: np.ndarray, x_lo: float, x_hi: float, opair: OperatorPair) -> float:
    """``int u^2`` over ``{x_lo <= x <= x_hi}``; straddling triangles are clipped exactly."""
    mesh = opair.mesh
    uf = opair.to_full(u)
    if x_hi <= x_lo:
        return 0.0
    px = mesh.vertices[mesh.triangles][..., 0]
    xmin, xmax = px.min(axis=1), px.max(axis=1)
    inside = (xmin >= x_lo) & (xmax <= x_hi)
    cut = ~inside & (xmax > x_lo) & (xmin < x_hi)
    masses = element_masses(uf, mesh)
    total = float(np.sum(masses[inside]))
    for e in np.flatnonzero(cut):
        tri = mesh.triangles[e]
        poly = [(mesh.vertices[v, 0], mesh.vertices[v, 1], uf[v]) for v in tri]
        if xmin[e] < x_lo:
            poly = _clip_halfplane(poly, x_lo, True)
        if poly and xmax[e] > x_hi:
            poly = _clip_halfplane(poly, x_hi, False)
        total += _poly_mass(poly)
    return total


def region_mass(u: np.ndarray, predicate, opair: OperatorPair, levels: int = 4) -> float:
    """``int u^2`` over ``{predicate(x, y)}``.

    Triangles on which the predicate is not constant (tested at vertices and
    rule points) are split ``levels`` times into 4 and the pieces are
    integrated with the 3-point rule, each point assigned by the predicate.
    """
    mesh = opair.mesh
    uf = opair.to_full(u)
    p = mesh.vertices[mesh.triangles]
    uv = uf[mesh.triangles]
    masses = _tri_mass(p, uv)
    samples = np.concatenate([p, np.einsum("qi,eid->eqd", QUAD_BARY, p)], axis=1)
    flags = np.asarray(predicate(samples[..., 0], samples[..., 1]), dtype=bool)
    all_in = flags.all(axis=1)
    mixed = flags.any(axis=1) & ~all_in
    total = float(np.sum(masses[all_in]))
    if not mixed.any():
        return total
    bary = _subdivision_points(levels)  # (S, 3 points, 3 bary)
    sub_area = 1.0 / 4**levels
    for e in np.flatnonzero(mixed):
        pts = np.einsum("sqi,id->sqd", bary, p[e])
        vals = np.einsum("sqi,i->sq", bary, uv[e])
        inside = np.asarray(predicate(pts[..., 0], pts[..., 1]), dtype=bool)
        area = abs(float(mesh.signed_areas[e]))
        total += area * sub_area / 3.0 * float(np.sum(vals**2 * inside))
    return total


def _subdivision_points(levels):
    """Barycentric coordinates of the 3-point rule on each piece of a ``4**levels`` split."""
    tris = [np.eye(3)]
    for _ in range(levels):
        nxt = []
        for t in tris:
            a, b, c = t
            ab, bc, ca = (a + b) / 2, (b + c) / 2, (c + a) / 2
            nxt += [np.array([a, ab, ca]), np.array([ab, b, bc]), np.array([ca, bc, c]),
                    np.array([ab, bc, ca])]
        tris = nxt
    tris = np.array(tris)  # (S, 3, 3)
    return np.einsum("qj,sjk->sqk", QUAD_BARY, tris)


def total_mass(u: np.ndarray, opair: OperatorPair) -> float:
    return float(u @ (opair.M @ u))


def wing_masses(u: np.ndarray, opair: OperatorPair) -> tuple[float, float]:
    """Masses in ``W+`` and ``W-``."""
    a = opair.mesh.domain.alpha
    big = 10.0 * (a + opair.mesh.domain.beta)
    return x_band_mass(u, a, big, opair), x_band_mass(u, -big, -a, opair)


def strip_masses(u: np.ndarray, gamma1: float, gamma2: float, opair: OperatorPair) -> tuple[float, float]:
    """Masses in the control strips ``[-alpha, gamma1] x [-beta, beta]`` and ``[gamma2, alpha] x [-beta, beta]``."""
    a = opair.mesh.domain.alpha
    if not (-a <= gamma1 < gamma2 <= a):
        raise ValueError("need -alpha <= gamma1 < gamma2 <= alpha")
    return x_band_mass(u, -a, gamma1, opair), x_band_mass(u, gamma2, a, opair)


def strip_mass(u, gamma1, gamma2, opair) -> float:
    left, right = strip_masses(u, gamma1, gamma2, opair)
    return left + right


def zone_masses(u: np.ndarray, lam: float, delta: float, opair: OperatorPair) -> tuple[float, float, float]:
    """Wing masses in zones I (``w <= delta/lam^2``), II and III (``w >= beta/2``), both wings together."""
    dom = opair.mesh.domain
    a, b = dom.alpha, dom.beta
    t1 = min(delta / lam**2, b / 2)
    t2 = b / 2
    big = 10.0 * (a + b)
    out = []
    for lo, hi in ((0.0, t1), (t1, t2), (t2, big)):
        out.append(x_band_mass(u, a + lo, a + hi, opair) + x_band_mass(u, -a - hi, -a - lo, opair))
    return tuple(out)


# --------------------------------------------------------------------------
# normal derivative on the boundary

@dataclass(frozen=True)
class BoundaryTrace:
    quad: BoundaryQuadrature
    values: np.ndarray  # d_N u at the quadrature points
    nodal: np.ndarray | None  # recovered flux at boundary vertices (variational method)


def _boundary_mass(mesh: TriMesh):
    bverts = mesh.boundary
    pos = -np.ones(mesh.n_vertices, dtype=np.int64)
    pos[bverts] = np.arange(len(bverts))
    e = mesh.boundary_edges
    d = mesh.vertices[e[:, 1]] - mesh.vertices[e[:, 0]]
    length = np.hypot(d[:, 0], d[:, 1])
    i, j = pos[e[:, 0]], pos[e[:, 1]]
    rows = np.concatenate([i, j, i, j])
    cols = np.concatenate([i, j, j, i])
    vals = np.concatenate([length / 3, length / 3, length / 6, length / 6])
    nb = len(bverts)
    return sp.csc_matrix((vals, (rows, cols)), shape=(nb, nb)), pos


def _edge_triangles(mesh: TriMesh) -> np.ndarray:
    owner = {}
    for k, (a, b, c) in enumerate(mesh.triangles):
        for p, q in ((a, b), (b, c), (c, a)):
            owner[(p, q)] = k
    return np.array([owner[(int(p), int(q))] for p, q in mesh.boundary_edges])


def normal_trace(u: np.ndarray, lambdasq: float, f: np.ndarray | None, opair: OperatorPair,
                 tags=None, method: str = "variational", order: int = 3) -> BoundaryTrace:
    """Outward normal derivative of ``u`` on the boundary edges selected by ``tags``.

    The default recovers the flux ``g`` weakly: ``int g v dl = a(u, v) - lambda^2 (u, v) - (f, v)``
    for every boundary hat function ``v``.  ``method="raw"`` takes the
    gradient of the adjacent triangle instead.
    """
    mesh = opair.mesh
    if len(mesh.boundary_edges) == 0:
        raise ValueError("mesh has no boundary")
    quad = boundary_quadrature(mesh, tags, order)
    if method == "raw":
        g = element_gradients(opair, u)
        tri = _edge_triangles(mesh)[quad.edge]
        vals = np.einsum("qd,qd->q", g[tri], quad.normals)
        return BoundaryTrace(quad, vals, None)
    if method != "variational":
        raise ValueError(f"unknown method {method!r}")
    d, bd = opair.dof_map, mesh.boundary
    r = opair.K_full[bd][:, d] @ u - lambdasq * (opair.M_full[bd][:, d] @ u)
    if f is not None:
        r = r - opair.M_full[bd][:, d] @ f
    Mb, pos = _boundary_mass(mesh)
    nodal = spsolve(Mb, r)
    e = mesh.boundary_edges[quad.edge]
    vals = (1.0 - quad.t) * nodal[pos[e[:, 0]]] + quad.t * nodal[pos[e[:, 1]]]
    return BoundaryTrace(quad, vals, nodal)


def weighted_flux(u, lambdasq, f, opair, weight=None, method="variational") -> float:
    """``int_{dS cap W} w |d_N u|^2 dl``; ``weight(points, w)`` may replace ``w``."""
    tr = normal_trace(u, lambdasq, f, opair, tags=ARC_TAGS, method=method)
    wt = tr.quad.w if weight is None else weight(tr.quad.points, tr.quad.w)
    return float(np.sum(tr.quad.weights * wt * tr.values**2))


def unweighted_flux(u, lambdasq, f, opair, method="variational") -> float:
    tr = normal_trace(u, lambdasq, f, opair, method=method)
    return float(np.sum(tr.quad.weights * tr.values**2))


# --------------------------------------------------------------------------
# gradient identity

@dataclass(frozen=True)
class GradientIdentityReport:
    grad_norm_sq: float
    rhs: float  # lambda^2 ||u||^2 + <f, u>
    discrepancy: float  # relative
    implied_cs: float | None = None  # ||grad u||^2 / (lambda^max(2,s) ||u||^2 + lambda^-s ||f||^2)


def gradient_identity_report(u, lambdasq, f, opair, s: float | None = None) -> GradientIdentityReport:
    g2 = float(u @ (opair.K @ u))
    m2 = float(u @ (opair.M @ u))
    fu = float(f @ (opair.M @ u)) if f is not None else 0.0
    rhs = lambdasq * m2 + fu
    scale = max(abs(g2), abs(rhs))
    disc = abs(g2 - rhs) / scale if scale > 0 else 0.0
    cs = None
    if s is not None:
        lam = math.sqrt(lambdasq)
        fn2 = float(f @ (opair.M @ f)) if f is not None else 0.0
        denom = lam ** max(2.0, s) * m2 + lam ** (-s) * fn2
        cs = g2 / denom if denom > 0 else math.inf
    return GradientIdentityReport(g2, rhs, disc, cs)


def grad_norm_sq(u, opair) -> float:
    return float(u @ (opair.K @ u))


def gradient_quadrature(u, opair) -> tuple[float, float]:
    """``(||u_x||^2, ||u_y||^2)`` from element gradients, independent of the assembled K."""
    g = element_gradients(opair, u)
    a = opair.mesh.signed_areas
    return float(np.sum(a * g[:, 0] ** 2)), float(np.sum(a * g[:, 1] ** 2))


# --------------------------------------------------------------------------
# report

CSV_COLUMNS = ("lambda", "total_mass", "wing_mass", "flux_weighted", "lhs_normderiv", "lhs_L2",
               "lhs_L2bis", "strip_mass", "zoneI", "zoneII", "zoneIII", "f_norm")


@dataclass(frozen=True)
class ObservableReport:
    lam: float
    total_mass: float
    wing_mass: float
    wing_mass_plus: float
    wing_mass_minus: float
    strip_mass: float
    flux_weighted: float
    flux_unweighted: float
    grad_norm_sq: float
    zoneI: float
    zoneII: float
    zoneIII: float
    f_norm: float

    @property
    def lhs_normderiv(self) -> float:
        return self.f_norm**2 + self.flux_weighted

    @property
    def lhs_L2(self) -> float:
        return self.f_norm**2 + self.lam**8 * self.wing_mass

    @property
    def lhs_L2bis(self) -> float:
        return self.lam**2 * self.f_norm**2 + self.lam**4 * self.wing_mass

    def csv_row(self) -> list[float]:
        return [self.lam, self.total_mass, self.wing_mass, self.flux_weighted, self.lhs_normderiv,
                self.lhs_L2, self.lhs_L2bis, self.strip_mass, self.zoneI, self.zoneII, self.zoneIII,
                self.f_norm]

    def as_dict(self) -> dict:
        d = asdict(self)
        d.update(lhs_normderiv=self.lhs_normderiv, lhs_L2=self.lhs_L2, lhs_L2bis=self.lhs_L2bis)
        return d


def observe(mode, opair: OperatorPair, delta: float = 1.0, gamma1: float | None = None,
            gamma2: float | None = None) -> ObservableReport:
    dom = opair.mesh.domain
    a = dom.alpha
    gamma1 = -a / 2 if gamma1 is None else gamma1
    gamma2 = a / 2 if gamma2 is None else gamma2
    u, l2, f = mode.vector, mode.lambdasq, mode.f
    plus, minus = wing_masses(u, opair)
    z = zone_masses(u, mode.lam, delta, opair)
    if a > 0:
        sm = strip_mass(u, gamma1, gamma2, opair)
    else:
        sm = 0.0
    return ObservableReport(
        lam=mode.lam,
        total_mass=total_mass(u, opair),
        wing_mass=plus + minus,
        wing_mass_plus=plus,
        wing_mass_minus=minus,
        strip_mass=sm,
        flux_weighted=weighted_flux(u, l2, f, opair),
        flux_unweighted=unweighted_flux(u, l2, f, opair),
        grad_norm_sq=grad_norm_sq(u, opair),
        zoneI=z[0], zoneII=z[1], zoneIII=z[2],
        f_norm=mode.f_norm,
    )
