import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.polynomial.legendre import leggauss

from stadium_lab import fields as fl
from stadium_lab.eigensolve import solve_lowest
from stadium_lab.geometry import StadiumGeometry
from stadium_lab.mesh import RectangleOnly, build
from stadium_lab.observables import gradient_quadrature
from stadium_lab.operators import assemble, interpolate, quad_points
from stadium_lab.quasimode import ModeField, QuasimodeSpec, explicit_quasimode
from stadium_lab.verify import radial_consistency

GEO = StadiumGeometry(1.0, 1.0)


@pytest.fixture(scope="module")
def stadium():
    return assemble(build(GEO, 0.05))


def all_fields(lam=7.0):
    return [fl.make_field(k, 1.0, 1.0, lam=lam) for k in fl.FIELD_KINDS]


# -- coefficient data ---------------------------------------------------------

def _points_away_from_kinks(rng, n=200):
    x = rng.uniform(-2.0, 2.0, n)
    y = rng.uniform(-1.0, 1.0, n)
    w = np.abs(x) - 1.0
    ok = (np.abs(w) > 0.02) & (np.abs(np.abs(w) - 0.25) > 0.02) & (np.abs(np.abs(w) - 0.5) > 0.02)
    ok &= (np.abs(np.abs(y) - 0.05) > 0.01) & (np.abs(np.abs(y) - 0.1) > 0.01)
    return x[ok], y[ok]


@pytest.mark.parametrize("kind", fl.FIELD_KINDS)
def test_derivatives_by_finite_differences(kind):
    f = fl.make_field(kind, 1.0, 1.0, lam=3.0)
    x, y = _points_away_from_kinks(np.random.default_rng(7))
    e = 1e-6

    def ab(x, y):
        a, b = f.coeffs(x, y)
        return np.broadcast_to(a, x.shape), np.broadcast_to(b, x.shape)

    ax, ay, bx, by = (np.broadcast_to(c, x.shape) for c in f.jacobian(x, y))
    (a1, b1), (a0, b0) = ab(x + e, y), ab(x - e, y)
    (a3, b3), (a2, b2) = ab(x, y + e), ab(x, y - e)
    scale = 1 + np.abs(ax).max() + np.abs(by).max() + np.abs(bx).max()
    assert np.allclose((a1 - a0) / (2 * e), ax, atol=1e-6 * scale)
    assert np.allclose((b1 - b0) / (2 * e), bx, atol=1e-6 * scale)
    assert np.allclose((a3 - a2) / (2 * e), ay, atol=1e-6 * scale)
    assert np.allclose((b3 - b2) / (2 * e), by, atol=1e-6 * scale)

    e = 1e-4

    def lap(c):
        return (c(x + e, y) + c(x - e, y) + c(x, y + e) + c(x, y - e) - 4 * c(x, y)) / e**2

    la, lb = (np.broadcast_to(c, x.shape) for c in f.laplacians(x, y))
    sa = 1 + np.abs(la).max() + np.abs(lb).max()
    assert np.allclose(lap(lambda p, q: ab(p, q)[0]), la, atol=1e-4 * sa)
    assert np.allclose(lap(lambda p, q: ab(p, q)[1]), lb, atol=1e-4 * sa)

    div = lambda p, q: np.broadcast_to(f.divergence(p, q), p.shape)
    gx, gy = (np.broadcast_to(c, x.shape) for c in f.grad_div(x, y))
    sg = 1 + np.abs(gx).max() + np.abs(gy).max()
    assert np.allclose((div(x + e, y) - div(x - e, y)) / (2 * e), gx, atol=1e-5 * sg)
    assert np.allclose((div(x, y + e) - div(x, y - e)) / (2 * e), gy, atol=1e-5 * sg)


def test_xdx_and_radial_commutators():
    x, y = np.array([0.3, -1.2]), np.array([0.4, 0.9])
    c = fl.XdX().commutator_coefficients(x, y)
    assert np.all(c["c_xx"] == -2) and np.all(c["c_yy"] == 0) and np.all(c["c_xy"] == 0)
    c = fl.Radial().commutator_coefficients(x, y)
    assert np.all(c["c_xx"] == -2) and np.all(c["c_yy"] == -2) and np.all(c["c_xy"] == 0)
    assert np.all(fl.XdX().divergence(x, y) == 1) and np.all(fl.Radial().divergence(x, y) == 2)


def test_cutoff_commutator_matches_P():
    f = fl.make_field("cutoffx", 1.0, 1.0)
    x = np.linspace(-2, 2, 101)
    y = np.zeros_like(x)
    c = f.commutator_coefficients(x, y)
    assert np.allclose(c["c_xx"], -2 * f.phi_x(x))
    assert np.allclose(c["d_x"], -f.phi_xx(x))
    assert np.all(c["c_xy"] == 0) and np.all(c["c_yy"] == 0)


def test_wing_commutator_matches_Q():
    lam = 5.0
    f = fl.make_field("wingy", 1.0, 1.0, lam=lam)
    rng = np.random.default_rng(2)
    x, y = rng.uniform(-2, 2, 300), rng.uniform(-1, 1, 300)
    wp = np.maximum(np.abs(x) - 1, 0)
    chi, chi1, chi2 = f.ramp.value(y), f.ramp.d1(y), f.ramp.d2(y)
    H = (np.abs(x) - 1 >= 0).astype(float)
    c = f.commutator_coefficients(x, y)
    # the mixed term carries sign(x) on the left wing, where d_x w_+ = -1
    assert np.allclose(c["c_xy"], -4 * lam**2 * wp * np.sign(x) * chi)
    assert np.allclose(c["c_yy"], -2 * lam**2 * wp**2 * chi1)
    assert np.allclose(c["d_y"], -lam**2 * (2 * H * chi + wp**2 * chi2))
    assert np.all(c["c_xx"] == 0) and np.all(c["d_x"] == 0)


def test_cutoff_shapes():
    phi = fl.make_field("cutoffx", 1.0, 1.0)
    x = np.linspace(-2, 2, 4001)
    w = np.abs(x) - 1
    v = phi.phi(x)
    assert np.all(v[w <= 0.25] == 0)
    assert np.allclose(v[(w >= 0.5) & (x > 0)], 1) and np.allclose(v[(w >= 0.5) & (x < 0)], -1)
    assert np.all(phi.phi_x(x) >= 0)
    chi = fl.make_field("wingy", 1.0, 1.0, lam=1.0).ramp
    y = np.linspace(-1, 1, 4001)
    assert np.all(chi.value(y[np.abs(y) <= 0.05]) == 0)
    assert np.all(chi.value(y[y >= 0.1]) == 1) and np.all(chi.value(y[y <= -0.1]) == -1)
    assert np.all(np.diff(chi.value(y)) >= 0)


def test_ramp_is_c2_at_knots():
    r = fl.CutoffSpec(0.25, 0.5)
    for k in (0.25, 0.5):
        for fn in (r.value, r.d1, r.d2):
            assert fn(np.array([k - 1e-9]))[0] == pytest.approx(fn(np.array([k + 1e-9]))[0], abs=1e-5)
    assert r.d1(np.array([0.25, 0.5])).tolist() == [0.0, 0.0]
    assert r.d2(np.array([0.25, 0.5])).tolist() == [0.0, 0.0]


def test_make_field_errors():
    with pytest.raises(ValueError):
        fl.make_field("wingy", 1.0, 1.0)
    with pytest.raises(ValueError):
        fl.make_field("curl", 1.0, 1.0)


# -- integrated commutator form, analytic check --------------------------------

def _tensor_rule(breaks, n=24, sub=8):
    xg, wg = leggauss(n)
    pts, wts = [], []
    for a, b in zip(breaks[:-1], breaks[1:]):
        edges = np.linspace(a, b, sub + 1)
        for c, d in zip(edges[:-1], edges[1:]):
            pts.append(0.5 * (d - c) * xg + 0.5 * (c + d))
            wts.append(0.5 * (d - c) * wg)
    return np.concatenate(pts), np.concatenate(wts)


@pytest.mark.parametrize("kind", fl.FIELD_KINDS)
def test_integrated_form_equals_second_order_form(kind):
    # rectangle [-2, 2] x [-1, 1]; a field with alpha = 1 has its "wing" part inside
    f = fl.make_field(kind, 1.0, 1.0, lam=2.0)
    xs, wx = _tensor_rule([-2, -1.5, -1.25, -1, 1, 1.25, 1.5, 2])
    ys, wy = _tensor_rule([-1, -0.1, -0.05, 0.05, 0.1, 1])
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    W = np.outer(wx, wy)
    kx, ky = math.pi / 4, math.pi / 2
    sx, cx = np.sin(kx * (X + 2)), np.cos(kx * (X + 2))
    sy, cy = np.sin(ky * (Y + 1)), np.cos(ky * (Y + 1))
    u, ux, uy = sx * sy, kx * cx * sy, ky * sx * cy
    uxx, uyy, uxy = -kx**2 * u, -ky**2 * u, kx * ky * cx * cy
    c = f.commutator_coefficients(X, Y)
    direct = np.sum(W * u * (c["c_xx"] * uxx + c["c_xy"] * uxy + c["c_yy"] * uyy + c["d_x"] * ux + c["d_y"] * uy))
    ax, ay, bx, by = f.jacobian(X, Y)
    gdx, gdy = f.grad_div(X, Y)
    ibp = np.sum(W * (2 * (ax * ux * ux + (ay + bx) * ux * uy + by * uy * uy) + u * (gdx * ux + gdy * uy)))
    assert ibp == pytest.approx(direct, rel=1e-9, abs=1e-9)


# -- action on discrete fields ------------------------------------------------

def _interior_triangles(op):
    return ~op.mesh.is_boundary_vertex[op.mesh.triangles].any(axis=1)


def test_apply_xdx_patch(stadium):
    u = interpolate(stadium, lambda x, y: x)
    Au = fl.apply(fl.XdX(), u, stadium)
    inner = _interior_triangles(stadium)
    qp = quad_points(stadium.mesh)
    assert np.allclose(Au[inner], qp[inner][..., 0], atol=1e-13)


def test_apply_radial_patch(stadium):
    u = interpolate(stadium, lambda x, y: x * x + y * y)
    Au = fl.apply(fl.Radial(), u, stadium)
    inner = _interior_triangles(stadium)
    qp = quad_points(stadium.mesh)[inner]
    exact = 2 * (qp[..., 0] ** 2 + qp[..., 1] ** 2)
    assert np.abs(Au[inner] - exact).max() <= 4 * stadium.mesh.h


def test_wing_field_vanishes_on_rectangle_supported_modes():
    spec = QuasimodeSpec(2, (-0.5, 0.5))
    op = assemble(build(GEO, spec.required_h(1.0)))
    mode = explicit_quasimode(spec, op)
    f = fl.make_field("wingy", 1.0, 1.0, lam=mode.lam)
    assert np.all(fl.apply(f, mode.vector, op) == 0)
    assert fl.commutator_form(f, mode.vector, mode.lambdasq, op) == 0.0


def test_xdx_form_matches_gradient_quadrature(stadium):
    p = solve_lowest(stadium, 3)[2]
    ux2, _ = gradient_quadrature(p.vector, stadium)
    form = fl.commutator_form(fl.XdX(), p.vector, p.lambdasq, stadium)
    assert form == pytest.approx(2 * ux2, rel=1e-12)


def test_radial_form_on_eigenpair(stadium):
    for p in solve_lowest(stadium, 4):
        mode = ModeField.from_eigenpair(stadium, p)
        form = fl.commutator_form(fl.Radial(), mode.vector, mode.lambdasq, stadium)
        assert abs(form - 2 * p.lambdasq) <= 2 * max(p.residual_bound, 1e-12) * p.lambdasq + 1e-12
        assert radial_consistency(mode, stadium).relative <= 1e-10


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_cutoff_gradient_form_nonnegative(seed):
    op = _small_op()
    u = np.random.default_rng(seed).standard_normal(op.n)
    f = fl.make_field("cutoffx", 1.0, 1.0)
    assert fl.cutoff_gradient_form(f, u, op) >= -1e-12


_CACHE = {}


def _small_op():
    if "op" not in _CACHE:
        _CACHE["op"] = assemble(build(GEO, 0.1))
    return _CACHE["op"]


def test_q_decomposition_on_rectangle_mode():
    from stadium_lab.acceptance import rectangle_mode
    from stadium_lab.mesh import boundary_quadrature
    from stadium_lab.observables import normal_trace
    from stadium_lab.operators import element_gradients

    op = assemble(build(RectangleOnly(2.0, 1.0), 0.02))
    mode = rectangle_mode(op)
    tr = normal_trace(mode.vector, mode.lambdasq, mode.f, op)
    q = fl.XdX().normal_component(tr.quad.points, tr.quad.normals)
    via_q = np.sum(tr.quad.weights * q * tr.values**2)
    # x d_x u from the gradient of the element owning each boundary edge
    from stadium_lab.observables import _edge_triangles
    owner = _edge_triangles(op.mesh)[tr.quad.edge]
    ux = element_gradients(op, mode.vector)[owner, 0]
    via_grad = np.sum(tr.quad.weights * tr.quad.points[:, 0] * ux * tr.values)
    assert via_grad == pytest.approx(via_q, rel=0.01)
    assert via_q == pytest.approx(math.pi**2 / 4, rel=0.01)
