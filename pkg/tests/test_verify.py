import math

import numpy as np
import pytest

from stadium_lab.acceptance import rectangle_mode
from stadium_lab.eigensolve import solve_lowest
from stadium_lab.fields import FIELD_KINDS, XdX
from stadium_lab.geometry import StadiumGeometry
from stadium_lab.mesh import BoundaryTag, RectangleOnly, build, build_refined
from stadium_lab.observables import observe
from stadium_lab.operators import assemble
from stadium_lab.quasimode import ModeField, QuasimodeSpec, Sin4Profile, explicit_quasimode
from stadium_lab.verify import (boundary_term, chain_3_1, radial_boundary_factor, radial_consistency,
                                rellich_residual, split_complex, theorem_lhs, verify_mode)

GEO = StadiumGeometry(1.0, 1.0)


@pytest.mark.parametrize("h,tol", [(0.02, 1e-3), (0.01, 2.5e-4)])
def test_rectangle_oracle_xdx(h, tol):
    op = assemble(build(RectangleOnly(2.0, 1.0), h))
    r = rellich_residual(rectangle_mode(op), "xdx", op)
    assert r.lhs == pytest.approx(math.pi**2 / 4, rel=tol)
    assert r.rhs_boundary == pytest.approx(math.pi**2 / 4, rel=tol)
    assert r.relative_residual <= tol
    assert r.residual >= 0 and r.scale >= 1


def test_zero_mode_all_terms_zero():
    op = assemble(build(GEO, 0.1))
    mode = ModeField.from_vector(op, np.zeros(op.n), 4.0, normalize=False)
    for r in verify_mode(mode, op):
        assert (r.lhs, r.rhs_volume, r.rhs_boundary, r.residual) == (0.0, 0.0, 0.0, 0.0)


def test_wing_field_on_interior_quasimode():
    spec = QuasimodeSpec(3, (-0.5, 0.5))
    op = assemble(build(GEO, spec.required_h(1.0)))
    r = rellich_residual(explicit_quasimode(spec, op), "wingy", op)
    assert r.lhs == 0.0 and r.rhs_volume == 0.0
    # the Riesz residual is nonlocal, so the recovered trace carries a round-off-sized tail
    assert abs(r.rhs_boundary) <= 1e-20


def test_chain_rectangle_localises_to_vertical_sides():
    op = assemble(build(RectangleOnly(2.0, 1.0), 0.02))
    mode = rectangle_mode(op)
    horiz = boundary_term(XdX(), mode.vector, mode.lambdasq, mode.f, op,
                          tags=[BoundaryTag.RECT_TOP, BoundaryTag.RECT_BOTTOM])
    assert horiz == 0.0
    c = chain_3_1(mode, op)
    assert c.boundary_wing == 0.0  # rectangle has no arcs
    assert 2 * c.ux_sq == pytest.approx(math.pi**2 / 4, rel=1e-4)
    assert c.relative <= 1e-3


def test_chain_stadium_localises_to_arcs():
    op = assemble(build(GEO, 0.05))
    mode = ModeField.from_eigenpair(op, solve_lowest(op, 2)[1])
    c = chain_3_1(mode, op)
    assert c.wing_localisation <= 1e-12


def test_chain_self_convergence():
    rel = []
    for lev in range(3):
        op = assemble(build_refined(GEO, 0.08, lev))
        mode = ModeField.from_eigenpair(op, solve_lowest(op, 1)[0])
        rel.append(chain_3_1(mode, op).relative)
    assert rel[0] / rel[1] >= 2 and rel[1] / rel[2] >= 2


def test_chain_quasimode_closed_form():
    spec = QuasimodeSpec(2, (-0.5, 0.5))
    op = assemble(build(GEO, spec.required_h(1.0) / 2))
    mode = explicit_quasimode(spec, op)
    c = chain_3_1(mode, op)
    assert abs(c.boundary) <= 1e-20
    # with u = phi cos(lam y) / ||phi cos||: ||u_x||^2 = ||phi'||^2 / ||phi||^2 and f-term = 2 ||u_x||^2
    p = Sin4Profile(-0.5, 1.0)
    expected = p.d1_norm_sq() / p.norm_sq()
    assert c.ux_sq == pytest.approx(expected, rel=1e-2)
    assert c.f_term == pytest.approx(2 * expected, rel=5e-2)
    assert c.relative <= 5e-2


def test_rellich_decay_all_fields():
    worst = []
    for lev in range(3):
        op = assemble(build_refined(GEO, 0.08, lev))
        w = {k: 0.0 for k in FIELD_KINDS}
        for p in solve_lowest(op, 6):
            mode = ModeField.from_eigenpair(op, p)
            for r in verify_mode(mode, op):
                w[r.field] = max(w[r.field], r.relative_residual)
        worst.append(w)
    for k in FIELD_KINDS:
        assert worst[1][k] <= 0.7 * worst[0][k]
        assert worst[2][k] <= 0.7 * worst[1][k]


def test_radial_consistency_and_positivity():
    op = assemble(build(GEO, 0.05))
    for p in solve_lowest(op, 3):
        assert radial_consistency(ModeField.from_eigenpair(op, p), op).relative <= 1e-10
    assert radial_boundary_factor(op).min() >= -1e-12


def test_theorem_lhs_on_quasimode():
    spec = QuasimodeSpec(1, (-0.5, 0.5))
    op = assemble(build(GEO, spec.required_h(1.0) / 2))
    mode = explicit_quasimode(spec, op)
    t = theorem_lhs(observe(mode, op))
    assert t.wing_norm_scaled == 0.0
    assert t.lhs_normderiv == pytest.approx(mode.f_norm**2, rel=1e-12)
    assert t.lhs_normderiv == pytest.approx(spec.analytic_ratio() ** 2, rel=0.05)


def test_theorem_lhs_positive_on_eigenpairs():
    op = assemble(build(GEO, 0.05))
    for p in solve_lowest(op, 5):
        t = theorem_lhs(observe(ModeField.from_eigenpair(op, p), op))
        assert min(t.lhs_normderiv, t.lhs_L2, t.lhs_L2bis, t.wing_norm_scaled) > 0


def test_complex_modes_split():
    op = assemble(build(GEO, 0.1))
    pairs = solve_lowest(op, 2)
    z = pairs[0].vector + 1j * pairs[1].vector
    f = op.mass_solve(op.K @ z.real - pairs[0].lambdasq * (op.M @ z.real)) + 0j
    mode = ModeField(z, pairs[0].lambdasq, f, 0.0, "eigenpair")
    with pytest.raises(ValueError):
        rellich_residual(mode, "xdx", op)
    re, im = split_complex(mode)
    assert np.array_equal(re.vector, pairs[0].vector) and np.array_equal(im.vector, pairs[1].vector)
