import dataclasses
import math

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from stadium_lab import kernels
from stadium_lab.fields import heaviside
from stadium_lab.geometry import StadiumGeometry
from stadium_lab.mesh import RectangleOnly, build
from stadium_lab.operators import (AssemblyError, apply_scalar_weight, assemble, element_gradients, interpolate,
                                   residual)


@pytest.fixture(scope="module")
def op():
    return assemble(build(StadiumGeometry(1.0, 1.0), 0.1))


def test_unit_right_triangle_stiffness():
    xy = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    ke, me, area = kernels.p1_forms(xy, np.array([[0, 1, 2]]))
    expected = 0.5 * np.array([[2, -1, -1], [-1, 1, 0], [-1, 0, 1]])
    assert np.allclose(ke[0].reshape(3, 3), expected, atol=1e-15)
    assert np.allclose(me[0].reshape(3, 3), 0.5 / 12 * np.array([[2, 1, 1], [1, 2, 1], [1, 1, 2]]), atol=1e-16)
    assert area[0] == pytest.approx(0.5)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-2, 2), min_size=6, max_size=6))
def test_local_mass_row_sums(coords):
    xy = np.array(coords).reshape(3, 2)
    t = 0.5 * ((xy[1, 0] - xy[0, 0]) * (xy[2, 1] - xy[0, 1]) - (xy[2, 0] - xy[0, 0]) * (xy[1, 1] - xy[0, 1]))
    if abs(t) < 1e-3:
        return
    tri = np.array([[0, 1, 2]]) if t > 0 else np.array([[0, 2, 1]])
    ke, me, area = kernels.p1_forms(xy, tri)
    assert np.allclose(me[0].reshape(3, 3).sum(axis=1), abs(t) / 3, rtol=1e-12)
    # stiffness annihilates constants on a single element
    assert np.allclose(ke[0].reshape(3, 3).sum(axis=1), 0.0, atol=1e-12 * np.abs(ke).max())


def test_full_mass_sums_to_area(op):
    assert op.M_full.sum() == pytest.approx(op.mesh.area, rel=1e-13)


def test_symmetry_and_definiteness(op):
    for A in (op.K, op.M):
        d = abs(A - A.T).max()
        assert d <= 1e-13 * abs(A).max()
    # smallest eigenvalues of both forms are positive on the Dirichlet subspace
    from scipy.sparse.linalg import eigsh
    assert eigsh(op.M, k=1, sigma=0, which="LM", return_eigenvectors=False)[0] > 0
    assert eigsh(op.K, k=1, sigma=0, which="LM", return_eigenvectors=False)[0] > 0


def test_pattern_is_vertex_adjacency(op):
    m = op.mesh
    t = m.triangles
    rows = np.concatenate([t[:, i] for i in (0, 1, 2, 0, 1, 2, 0, 1, 2)])
    cols = np.concatenate([t[:, j] for j in (0, 0, 0, 1, 1, 1, 2, 2, 2)])
    adj = sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(m.n_vertices,) * 2)
    K = op.K_full.tocsr()
    K.sort_indices()
    adj.sort_indices()
    # compare stored structure; right angles give exact-zero couplings that stay stored
    assert np.array_equal(K.indptr, adj.indptr) and np.array_equal(K.indices, adj.indices)


def test_constant_in_kernel_of_full_stiffness(op):
    # rows of interior vertices see only their patch, so K 1 vanishes there
    r = op.K_full @ np.ones(op.mesh.n_vertices)
    assert np.abs(r[op.dof_map]).max() < 1e-12


def test_weight_one_reproduces_mass(op):
    W = apply_scalar_weight(op.mesh, lambda x, y: np.ones_like(x))
    assert abs(W - op.M_full).max() <= 1e-13 * abs(op.M_full).max()


def test_wing_heaviside_on_rectangle_is_zero():
    m = build(RectangleOnly(2.0, 1.0), 0.1)
    # quadrature points are interior, so w = |x| - alpha < 0 there
    W = apply_scalar_weight(m, lambda x, y: heaviside(np.abs(x) - 2.0))
    assert abs(W).max() == 0.0


def test_wing_weight_integral():
    m = build(StadiumGeometry(1.0, 1.0), 0.05)
    W = apply_scalar_weight(m, lambda x, y: np.maximum(np.abs(x) - 1.0, 0.0))
    one = np.ones(m.n_vertices)
    assert one @ (W @ one) == pytest.approx(4.0 / 3.0, rel=2e-3)


def test_residual_zero_and_identity(op):
    f, n = residual(op, np.zeros(op.n), 3.0)
    assert n == 0.0 and not np.any(f)
    rng = np.random.default_rng(0)
    u = rng.standard_normal(op.n)
    f, _ = residual(op, u, 7.5)
    lhs = u @ (op.K @ u)
    rhs = 7.5 * (u @ (op.M @ u)) + op.m_inner(f, u)
    assert abs(lhs - rhs) / lhs <= 1e-12


def test_gradients_match_stiffness(op):
    u = interpolate(op, lambda x, y: np.cos(x) * np.cos(np.pi * y / 2))
    g = element_gradients(op, u)
    q = np.sum(op.mesh.signed_areas * (g**2).sum(axis=1))
    assert q == pytest.approx(u @ (op.K @ u), rel=1e-12)


def test_degenerate_triangle_refused():
    m = build(RectangleOnly(1.0, 1.0), 0.25)
    v = m.vertices.copy()
    a, b, _ = m.triangles[0]
    v[b] = v[a]
    with pytest.raises(AssemblyError):
        assemble(dataclasses.replace(m, vertices=v))


def test_dump(tmp_path, op):
    op.dump(tmp_path / "op")
    assert any(tmp_path.iterdir())
