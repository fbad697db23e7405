"""Conforming triangulations of the stadium and of the oracle domains.

The mesh is a structured "union jack" grid on the rectangle glued to
fan-shaped ring meshes on the wings.  One quarter is built for
``x >= 0, y >= 0`` and mirrored into the other three quadrants, so the
result is exactly symmetric under both reflections.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from .geometry import StadiumGeometry


class MeshError(ValueError):
    pass


class BoundaryTag(enum.Enum):
    RECT_TOP = "RectTop"
    RECT_BOTTOM = "RectBottom"
    ARC_PLUS = "ArcPlus"
    ARC_MINUS = "ArcMinus"
    RECT_LEFT = "RectLeft"
    RECT_RIGHT = "RectRight"

    @property
    def is_arc(self) -> bool:
        return self in (BoundaryTag.ARC_PLUS, BoundaryTag.ARC_MINUS)


ARC_TAGS = (BoundaryTag.ARC_PLUS, BoundaryTag.ARC_MINUS)


@dataclass(frozen=True)
class RectangleOnly:
    """The rectangle ``[-alpha, alpha] x [-beta, beta]`` on its own."""

    alpha: float
    beta: float

    @property
    def area(self) -> float:
        return 4.0 * self.alpha * self.beta


@dataclass(frozen=True)
class DiskOnly:
    """The disk of radius ``beta`` centred at the origin."""

    beta: float

    alpha = 0.0

    @property
    def area(self) -> float:
        return math.pi * self.beta**2


Domain = StadiumGeometry | RectangleOnly | DiskOnly


def domain_to_dict(domain: Domain) -> dict:
    if isinstance(domain, StadiumGeometry):
        return {"kind": "stadium", "alpha": domain.alpha, "beta": domain.beta}
    if isinstance(domain, RectangleOnly):
        return {"kind": "rectangle", "alpha": domain.alpha, "beta": domain.beta}
    return {"kind": "disk", "beta": domain.beta}


def domain_from_dict(d: dict) -> Domain:
    kind = d.get("kind", "stadium")
    if kind == "stadium":
        return StadiumGeometry(float(d["alpha"]), float(d["beta"]))
    if kind == "rectangle":
        return RectangleOnly(float(d["alpha"]), float(d["beta"]))
    if kind == "disk":
        return DiskOnly(float(d["beta"]))
    raise ValueError(f"unknown domain kind {kind!r}")


@dataclass(eq=False)
class TriMesh:
    vertices: np.ndarray  # (n, 2) float
    triangles: np.ndarray  # (T, 3) int, counter-clockwise
    boundary_edges: np.ndarray  # (E, 2) int, oriented with the domain on the left
    edge_tags: tuple  # E BoundaryTag values
    h: float
    domain: Domain = field(repr=False)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @cached_property
    def signed_areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    @property
    def area(self) -> float:
        return float(self.signed_areas.sum())

    @cached_property
    def is_boundary_vertex(self) -> np.ndarray:
        mask = np.zeros(self.n_vertices, dtype=bool)
        mask[self.boundary_edges.ravel()] = True
        return mask

    @cached_property
    def interior(self) -> np.ndarray:
        """Indices of the interior vertices, i.e. the Dirichlet degrees of freedom."""
        return np.flatnonzero(~self.is_boundary_vertex)

    @cached_property
    def boundary(self) -> np.ndarray:
        return np.flatnonzero(self.is_boundary_vertex)

    @cached_property
    def tag_array(self) -> np.ndarray:
        return np.array([t.value for t in self.edge_tags])

    def edges_with_tags(self, tags=None) -> np.ndarray:
        if tags is None:
            return np.arange(len(self.boundary_edges))
        names = {BoundaryTag(t).value for t in tags}
        return np.flatnonzero(np.isin(self.tag_array, list(names)))

    @cached_property
    def mirror_x(self) -> np.ndarray | None:
        """Permutation taking vertex ``i`` to the vertex at ``(-x_i, y_i)``, if the mesh has one."""
        return _mirror_permutation(self.vertices, -1.0, 1.0)

    @cached_property
    def mirror_y(self) -> np.ndarray | None:
        return _mirror_permutation(self.vertices, 1.0, -1.0)

    def min_angle_deg(self) -> float:
        p = self.vertices[self.triangles]
        angles = []
        for k in range(3):
            a = p[:, (k + 1) % 3] - p[:, k]
            b = p[:, (k + 2) % 3] - p[:, k]
            cos = np.einsum("ij,ij->i", a, b) / (np.linalg.norm(a, axis=1) * np.linalg.norm(b, axis=1))
            angles.append(np.degrees(np.arccos(np.clip(cos, -1, 1))))
        return float(np.min(angles))

    def validate(self) -> None:
        if np.any(self.signed_areas <= 0):
            raise MeshError("mesh contains non-positive triangles")
        e = np.sort(np.concatenate([self.triangles[:, [0, 1]], self.triangles[:, [1, 2]],
                                    self.triangles[:, [2, 0]]]), axis=1)
        _, counts = np.unique(e, axis=0, return_counts=True)
        if counts.max() > 2:
            raise MeshError("an edge is shared by more than two triangles")
        if int(np.sum(counts == 1)) != len(self.boundary_edges):
            raise MeshError("boundary edge list does not match the topological boundary")


def _mirror_permutation(vertices, sx, sy):
    index = {(float(x), float(y)): i for i, (x, y) in enumerate(vertices)}
    perm = np.empty(len(vertices), dtype=np.int64)
    for i, (x, y) in enumerate(vertices):
        j = index.get((sx * x + 0.0, sy * y + 0.0))
        if j is None:
            return None
        perm[i] = j
    return perm


# --------------------------------------------------------------------------
# construction

def _quarter_rectangle(alpha, beta, nx, ny):
    xs = [alpha * i / nx for i in range(nx + 1)]
    ys = [beta * j / ny for j in range(ny + 1)]
    pts = [(x, y) for y in ys for x in xs]
    tris = []
    for j in range(ny):
        for i in range(nx):
            v00 = j * (nx + 1) + i
            v10, v01, v11 = v00 + 1, v00 + nx + 1, v00 + nx + 2
            # diagonal through the corner nearest the origin
            tris.append((v00, v10, v11))
            tris.append((v00, v11, v01))
    return pts, tris


def _quarter_wing(alpha, beta, n_rings):
    """Ring mesh of the quarter disk ``{(x - alpha)^2 + y^2 <= beta^2, x >= alpha, y >= 0}``.

    Ring ``k`` has radius ``beta * k / n_rings`` and ``2k`` arc segments,
    ``k`` in each of the two sectors ``[0, pi/4]`` and ``[pi/4, pi/2]``.
    """
    pts = [(alpha, 0.0)]
    rings = [[0]]
    for k in range(1, n_rings + 1):
        r = beta * k / n_rings
        ring = []
        for j in range(2 * k + 1):
            if j == 0:
                p = (alpha + r, 0.0)
            elif j == 2 * k:
                p = (alpha, r)
            else:
                th = 0.25 * math.pi * j / k
                p = (alpha + r * math.cos(th), r * math.sin(th))
            ring.append(len(pts))
            pts.append(p)
        rings.append(ring)
    tris = []
    for k in range(1, n_rings + 1):
        inner, outer = rings[k - 1], rings[k]
        for s in range(2):
            a = inner[s * (k - 1): (s + 1) * (k - 1) + 1] if k > 1 else inner
            b = outer[s * k: (s + 1) * k + 1]
            i = j = 0
            na, nb = len(a) - 1, len(b) - 1
            while i < na or j < nb:
                # advance on the ring whose next point comes first in angle
                if j < nb and (i == na or (j + 1) * na <= (i + 1) * nb):
                    tris.append((a[i], b[j], b[j + 1]))
                    j += 1
                else:
                    tris.append((a[i], b[j], a[i + 1]))
                    i += 1
    return pts, tris


def _assemble_quadrants(pieces):
    """Mirror quarter pieces into all four quadrants and merge shared vertices."""
    index: dict[tuple[float, float], int] = {}
    verts: list[tuple[float, float]] = []
    tris: list[tuple[int, int, int]] = []
    for sx, sy in ((1.0, 1.0), (-1.0, 1.0), (1.0, -1.0), (-1.0, -1.0)):
        for pts, ptris in pieces:
            local = []
            for x, y in pts:
                key = (sx * x + 0.0, sy * y + 0.0)
                j = index.get(key)
                if j is None:
                    j = len(verts)
                    index[key] = j
                    verts.append(key)
                local.append(j)
            for t in ptris:
                tris.append(tuple(local[v] for v in t))
    v = np.array(verts, dtype=float)
    return v, _fix_orientation(v, np.array(tris, dtype=np.int64))


def _fix_orientation(v, t):
    p = v[t]
    e1 = p[:, 1] - p[:, 0]
    e2 = p[:, 2] - p[:, 0]
    cross = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    t = t.copy()
    flip = cross < 0
    t[flip] = t[flip][:, [0, 2, 1]]
    return t


def _boundary_edges(triangles):
    directed = np.concatenate([triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [2, 0]]])
    key = np.sort(directed, axis=1)
    _, inv, counts = np.unique(key, axis=0, return_inverse=True, return_counts=True)
    inv = inv.ravel()
    on_bdry = counts[inv] == 1
    # keep original order of appearance for determinism
    return directed[on_bdry]


def _tag_edges(domain, vertices, edges):
    mid = 0.5 * (vertices[edges[:, 0]] + vertices[edges[:, 1]])
    alpha, beta = domain.alpha, domain.beta
    tags = []
    for (mx, my) in mid:
        if isinstance(domain, RectangleOnly):
            if abs(abs(my) - beta) <= 1e-12 * beta:
                tags.append(BoundaryTag.RECT_TOP if my > 0 else BoundaryTag.RECT_BOTTOM)
            else:
                tags.append(BoundaryTag.RECT_RIGHT if mx > 0 else BoundaryTag.RECT_LEFT)
        elif isinstance(domain, DiskOnly):
            tags.append(BoundaryTag.ARC_PLUS if mx > 0 else BoundaryTag.ARC_MINUS)
        else:
            if abs(mx) > alpha:
                tags.append(BoundaryTag.ARC_PLUS if mx > 0 else BoundaryTag.ARC_MINUS)
            else:
                tags.append(BoundaryTag.RECT_TOP if my > 0 else BoundaryTag.RECT_BOTTOM)
    return tuple(tags)


def build(domain: Domain, h: float) -> TriMesh:
    """Triangulate ``domain`` with target edge length ``h`` (at most ``beta / 4``)."""
    beta = domain.beta
    if not (0 < h <= beta / 4 * (1 + 1e-12)):
        raise MeshError(f"h={h} must satisfy 0 < h <= beta/4 = {beta / 4}")
    n_rings = math.ceil(beta / h - 1e-9)
    pieces = []
    if not isinstance(domain, DiskOnly):
        nx = math.ceil(domain.alpha / h - 1e-9)
        pieces.append(_quarter_rectangle(domain.alpha, beta, nx, n_rings))
    if not isinstance(domain, RectangleOnly):
        pieces.append(_quarter_wing(domain.alpha, beta, n_rings))
    vertices, triangles = _assemble_quadrants(pieces)
    edges = _boundary_edges(triangles)
    mesh = TriMesh(vertices, triangles, edges, _tag_edges(domain, vertices, edges), float(h), domain)
    return mesh


def _snap(domain, p, tag):
    if not tag.is_arc:
        return p
    cx = 0.0 if isinstance(domain, DiskOnly) else (domain.alpha if tag is BoundaryTag.ARC_PLUS else -domain.alpha)
    dx, dy = p[0] - cx, p[1]
    r = math.hypot(dx, dy)
    return (cx + domain.beta * dx / r, domain.beta * dy / r)


def refine(mesh: TriMesh) -> TriMesh:
    """Regular 1-to-4 refinement; new boundary vertices are projected onto the exact arcs."""
    t = mesh.triangles
    directed = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
    key = np.sort(directed, axis=1)
    edges, inv = np.unique(key, axis=0, return_inverse=True)
    inv = inv.ravel()
    n = mesh.n_vertices
    mids = 0.5 * (mesh.vertices[edges[:, 0]] + mesh.vertices[edges[:, 1]])
    edge_id = {(int(a), int(b)): k for k, (a, b) in enumerate(edges)}
    new_edges = []
    for (a, b), tag in zip(mesh.boundary_edges, mesh.edge_tags):
        k = edge_id[(min(a, b), max(a, b))]
        mids[k] = _snap(mesh.domain, mids[k], tag)
        new_edges.append((a, n + k))
        new_edges.append((n + k, b))
    new_tags = tuple(tag for tag in mesh.edge_tags for _ in range(2))
    nt = len(t)
    m01, m12, m20 = (n + inv[:nt], n + inv[nt:2 * nt], n + inv[2 * nt:])
    a, b, c = t[:, 0], t[:, 1], t[:, 2]
    tris = np.stack([
        np.stack([a, m01, m20], 1),
        np.stack([m01, b, m12], 1),
        np.stack([m20, m12, c], 1),
        np.stack([m01, m12, m20], 1),
    ], axis=1).reshape(-1, 3)
    vertices = np.vstack([mesh.vertices, mids])
    return TriMesh(vertices, tris, np.array(new_edges, dtype=np.int64), new_tags,
                   mesh.h / 2, mesh.domain)


def build_refined(domain: Domain, h: float, levels: int = 0) -> TriMesh:
    mesh = build(domain, h)
    for _ in range(levels):
        mesh = refine(mesh)
    return mesh


# --------------------------------------------------------------------------
# boundary quadrature

@dataclass(frozen=True)
class BoundaryQuadrature:
    points: np.ndarray  # (Q, 2)
    weights: np.ndarray  # arc-length weights
    normals: np.ndarray  # exact outward unit normals
    edge: np.ndarray  # index into mesh.boundary_edges
    t: np.ndarray  # position along the edge, 0 at its first vertex
    w: np.ndarray  # wing coordinate max(|x| - alpha, 0)
    tags: np.ndarray  # tag names


def boundary_quadrature(mesh: TriMesh, tags=None, order: int = 3) -> BoundaryQuadrature:
    """Gauss points on the boundary edges selected by ``tags`` (all edges if ``None``).

    Straight edges use the chord.  Arc edges are integrated over the exact
    circular arc they subtend: points, normals and weights come from the
    circle, parametrised linearly in angle.
    """
    gx, gw = np.polynomial.legendre.leggauss(order)
    gt = 0.5 * (gx + 1.0)
    gw = 0.5 * gw
    sel = mesh.edges_with_tags(tags)
    dom = mesh.domain
    pts, wts, nrm, eid, ts, tg = [], [], [], [], [], []
    for e in sel:
        i, j = mesh.boundary_edges[e]
        tag = mesh.edge_tags[e]
        pa, pb = mesh.vertices[i], mesh.vertices[j]
        if tag.is_arc:
            cx = 0.0 if isinstance(dom, DiskOnly) else (dom.alpha if tag is BoundaryTag.ARC_PLUS else -dom.alpha)
            ta = math.atan2(pa[1], pa[0] - cx)
            tb = math.atan2(pb[1], pb[0] - cx)
            dth = (tb - ta + math.pi) % (2 * math.pi) - math.pi
            th = ta + gt * dth
            c, s = np.cos(th), np.sin(th)
            pts.append(np.stack([cx + dom.beta * c, dom.beta * s], 1))
            wts.append(dom.beta * abs(dth) * gw)
            nrm.append(np.stack([c, s], 1))
        else:
            d = pb - pa
            length = math.hypot(d[0], d[1])
            pts.append(pa[None, :] + gt[:, None] * d[None, :])
            wts.append(length * gw)
            nrm.append(np.tile([d[1] / length, -d[0] / length], (order, 1)))
        eid.append(np.full(order, e))
        ts.append(gt)
        tg.append([tag.value] * order)
    if not pts:
        z = np.zeros((0, 2))
        return BoundaryQuadrature(z, np.zeros(0), z, np.zeros(0, int), np.zeros(0), np.zeros(0),
                                  np.zeros(0, dtype="<U10"))
    points = np.concatenate(pts)
    return BoundaryQuadrature(
        points=points,
        weights=np.concatenate(wts),
        normals=np.concatenate(nrm),
        edge=np.concatenate(eid),
        t=np.concatenate(ts),
        w=np.maximum(np.abs(points[:, 0]) - dom.alpha, 0.0),
        tags=np.array([x for g in tg for x in g]),
    )


# --------------------------------------------------------------------------
# text format

def write_mesh(mesh: TriMesh, path) -> None:
    """Plain-text export: header, vertices, triangles, tagged boundary edges."""
    d = domain_to_dict(mesh.domain)
    lines = ["# stadium_lab mesh v1",
             "domain " + " ".join(f"{k}={v!r}" if isinstance(v, str) else f"{k}={v:.17g}"
                                  for k, v in d.items()),
             f"h {mesh.h:.17g}",
             f"vertices {mesh.n_vertices}"]
    lines += [f"{x:.17g} {y:.17g}" for x, y in mesh.vertices]
    lines.append(f"triangles {mesh.n_triangles}")
    lines += [f"{a} {b} {c}" for a, b, c in mesh.triangles]
    lines.append(f"boundary_edges {len(mesh.boundary_edges)}")
    lines += [f"{a} {b} {tag.value}" for (a, b), tag in zip(mesh.boundary_edges, mesh.edge_tags)]
    Path(path).write_text("\n".join(lines) + "\n")


def read_mesh(path) -> TriMesh:
    lines = [ln for ln in Path(path).read_text().splitlines() if ln and not ln.startswith("#")]
    it = iter(lines)
    dom_fields = {}
    for tok in next(it).split()[1:]:
        k, v = tok.split("=", 1)
        dom_fields[k] = v.strip("'\"") if k == "kind" else float(v)
    domain = domain_from_dict(dom_fields)
    h = float(next(it).split()[1])
    nv = int(next(it).split()[1])
    verts = np.array([[float(s) for s in next(it).split()] for _ in range(nv)]).reshape(nv, 2)
    nt = int(next(it).split()[1])
    tris = np.array([[int(s) for s in next(it).split()] for _ in range(nt)], dtype=np.int64).reshape(nt, 3)
    ne = int(next(it).split()[1])
    edges, tags = [], []
    for _ in range(ne):
        a, b, tag = next(it).split()
        edges.append((int(a), int(b)))
        tags.append(BoundaryTag(tag))
    return TriMesh(verts, tris, np.array(edges, dtype=np.int64).reshape(ne, 2), tuple(tags), h, domain)
