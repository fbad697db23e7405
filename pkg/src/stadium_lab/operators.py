"""P1 finite-element forms for the Dirichlet Laplacian."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from . import kernels
from .mesh import TriMesh


class AssemblyError(ValueError):
    pass


# barycentric coordinates of the interior 3-point rule (degree 2), equal weights 1/3
QUAD_BARY = np.array([[2 / 3, 1 / 6, 1 / 6], [1 / 6, 2 / 3, 1 / 6], [1 / 6, 1 / 6, 2 / 3]])


def quad_points(mesh: TriMesh) -> np.ndarray:
    """Physical coordinates of the 3 rule points on every triangle, shape (T, 3, 2)."""
    p = mesh.vertices[mesh.triangles]
    return np.einsum("qi,eid->eqd", QUAD_BARY, p)


def _scatter(mesh: TriMesh, local: np.ndarray) -> sp.csr_matrix:
    t = mesh.triangles
    rows = np.repeat(t, 3, axis=1).ravel()
    cols = np.tile(t, (1, 3)).ravel()
    n = mesh.n_vertices
    return sp.coo_matrix((local.ravel(), (rows, cols)), shape=(n, n)).tocsr()


@dataclass(eq=False)
class OperatorPair:
    """Stiffness and mass forms, over all vertices and restricted to interior ones."""

    mesh: TriMesh
    K_full: sp.csr_matrix
    M_full: sp.csr_matrix
    dof_map: np.ndarray  # interior vertex indices
    K: sp.csr_matrix = field(init=False)
    M: sp.csr_matrix = field(init=False)

    def __post_init__(self):
        d = self.dof_map
        self.K = self.K_full[d][:, d].tocsr()
        self.M = self.M_full[d][:, d].tocsr()

    @property
    def n(self) -> int:
        return len(self.dof_map)

    def to_full(self, u: np.ndarray) -> np.ndarray:
        """Extend interior coefficients by zero to all mesh vertices."""
        out = np.zeros(self.mesh.n_vertices if u.ndim == 1 else (self.mesh.n_vertices, u.shape[1]))
        out[self.dof_map] = u
        return out

    def to_interior(self, u_full: np.ndarray) -> np.ndarray:
        return u_full[self.dof_map]

    @cached_property
    def _mass_lu(self):
        return splu(self.M.tocsc())

    def mass_solve(self, r: np.ndarray) -> np.ndarray:
        return self._mass_lu.solve(r)

    def m_norm(self, u: np.ndarray) -> float:
        return float(np.sqrt(max(u @ (self.M @ u), 0.0)))

    def m_inner(self, u: np.ndarray, v: np.ndarray) -> float:
        return float(u @ (self.M @ v))

    def dump(self, path_prefix) -> None:
        """Coordinate-format text dump of K and M, for debugging."""
        for name, mat in (("K", self.K), ("M", self.M)):
            c = mat.tocoo()
            np.savetxt(f"{path_prefix}_{name}.txt", np.column_stack([c.row, c.col, c.data]),
                       fmt=["%d", "%d", "%.17g"])


def assemble(mesh: TriMesh) -> OperatorPair:
    ke, me, area = kernels.p1_forms(mesh.vertices, mesh.triangles)
    if np.any(area <= 0):
        bad = int(np.flatnonzero(area <= 0)[0])
        raise AssemblyError(f"triangle {bad} is degenerate or inverted (area {area[bad]:.3e})")
    return OperatorPair(mesh, _scatter(mesh, ke), _scatter(mesh, me), mesh.interior)


def apply_scalar_weight(mesh: TriMesh, weightfn) -> sp.csr_matrix:
    """Form of ``int weight * u * v`` over all vertices, by the 3-point rule.

    ``weightfn`` takes arrays ``(x, y)`` and returns weight values.
    """
    qp = quad_points(mesh)
    wq = np.asarray(weightfn(qp[..., 0], qp[..., 1]), dtype=float)
    wq = np.broadcast_to(wq, qp.shape[:2])
    return _scatter(mesh, kernels.weighted_mass(mesh.vertices, mesh.triangles, wq))


def residual(opair: OperatorPair, u: np.ndarray, lambdasq: float) -> tuple[np.ndarray, float]:
    """M-Riesz representative ``f`` of ``K u - lambdasq M u`` and its M-norm."""
    r = opair.K @ u - lambdasq * (opair.M @ u)
    if not np.any(r):
        return np.zeros_like(u), 0.0
    f = opair.mass_solve(r)
    return f, opair.m_norm(f)


def element_gradients(opair: OperatorPair, u: np.ndarray) -> np.ndarray:
    """Per-triangle gradient of the zero-trace P1 field with interior values ``u``."""
    mesh = opair.mesh
    return kernels.p1_gradients(mesh.vertices, mesh.triangles, opair.to_full(u))


def interpolate(opair: OperatorPair, fn) -> np.ndarray:
    """Interior nodal values of ``fn(x, y)``."""
    v = opair.mesh.vertices[opair.dof_map]
    return np.asarray(fn(v[:, 0], v[:, 1]), dtype=float)
