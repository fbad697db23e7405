import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stadium_lab.acceptance import rectangle_mode
from stadium_lab.eigensolve import SpectralWindow, solve_lowest, solve_window
from stadium_lab.geometry import StadiumGeometry
from stadium_lab.mesh import BoundaryTag, RectangleOnly, build, build_refined
from stadium_lab.observables import (CSV_COLUMNS, gradient_identity_report, normal_trace, observe, region_mass,
                                     strip_masses, total_mass, unweighted_flux, weighted_flux, wing_masses,
                                     x_band_mass, zone_masses)
from stadium_lab.operators import assemble
from stadium_lab.quasimode import ModeField, QuasimodeSpec, explicit_quasimode

GEO = StadiumGeometry(1.0, 1.0)


@pytest.fixture(scope="module")
def stadium():
    op = assemble(build(GEO, 0.05))
    return op, solve_window(op, SpectralWindow(120.0, 60.0))


@pytest.fixture(scope="module")
def rect02():
    op = assemble(build(RectangleOnly(2.0, 1.0), 0.02))
    return op, rectangle_mode(op)


def test_masses_of_normalised_mode(stadium):
    op, pairs = stadium
    u = pairs[0].vector
    assert total_mass(u, op) == pytest.approx(1.0, abs=1e-10)
    assert region_mass(u, lambda x, y: np.ones_like(x, dtype=bool), op) == pytest.approx(1.0, abs=1e-10)
    plus, minus = wing_masses(u, op)
    rect = x_band_mass(u, -1.0, 1.0, op)
    assert plus + minus + rect == pytest.approx(1.0, abs=1e-12)


def test_region_mass_agrees_with_exact_clipping(stadium):
    op, pairs = stadium
    u = pairs[3].vector
    exact = x_band_mass(u, 0.33, 1.71, op)
    approx = region_mass(u, lambda x, y: (x >= 0.33) & (x <= 1.71), op, levels=6)
    assert approx == pytest.approx(exact, rel=1e-3)


def test_half_rectangle_mass(rect02):
    op, mode = rect02
    u = mode.vector / op.m_norm(mode.vector)
    assert region_mass(u, lambda x, y: x > 0, op) == pytest.approx(0.5, abs=1e-12)


def test_quasimode_has_no_wing_mass():
    spec = QuasimodeSpec(2, (-0.5, 0.5))
    op = assemble(build(GEO, spec.required_h(1.0)))
    u = explicit_quasimode(spec, op).vector
    assert region_mass(u, lambda x, y: np.abs(x) > 1.0, op) == 0.0
    assert wing_masses(u, op) == (0.0, 0.0)


def test_strip_masses(stadium):
    op, pairs = stadium
    even = next(p for p in pairs if p.parity[0] == 1)
    left, right = strip_masses(even.vector, -0.5, 0.5, op)
    assert left == pytest.approx(right, abs=1e-13)
    # strips meeting in the middle cover R
    l0, r0 = strip_masses(even.vector, 0.0, 0.0 + 1e-300, op)
    assert l0 + r0 == pytest.approx(x_band_mass(even.vector, -1.0, 1.0, op), rel=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.floats(-0.9, 0.0), st.floats(0.0, 0.9), st.floats(0.0, 0.09), st.floats(0.0, 0.09))
def test_strip_monotone(g1, g2, d1, d2):
    op, pairs = _stadium_small()
    u = pairs[1].vector
    a = sum(strip_masses(u, g1, g2 + 1e-9, op))
    b = sum(strip_masses(u, g1 + d1, g2 - d2 + 1e-9, op)) if g1 + d1 < g2 - d2 + 1e-9 else None
    if b is not None:
        assert b >= a - 1e-14


_C = {}


def _stadium_small():
    if "s" not in _C:
        op = assemble(build(GEO, 0.1))
        _C["s"] = (op, solve_lowest(op, 4))
    return _C["s"]


def test_zone_masses_sum_to_wing_mass(stadium):
    op, pairs = stadium
    for p in pairs[:5]:
        for delta in (0.1, 1.0, 5.0):
            z = zone_masses(p.vector, p.lam, delta, op)
            assert min(z) >= 0
            assert sum(z) == pytest.approx(sum(wing_masses(p.vector, op)), abs=1e-10)


def test_right_edge_flux(rect02):
    op, mode = rect02
    tr = normal_trace(mode.vector, mode.lambdasq, mode.f, op, tags=[BoundaryTag.RECT_RIGHT])
    val = np.sum(tr.quad.weights * tr.values**2)
    assert val == pytest.approx((math.pi / 4) ** 2, rel=0.01)


def test_raw_trace_is_coarser(rect02):
    op, mode = rect02
    tags = [BoundaryTag.RECT_RIGHT]
    exact = (math.pi / 4) ** 2
    var = normal_trace(mode.vector, mode.lambdasq, mode.f, op, tags=tags)
    raw = normal_trace(mode.vector, mode.lambdasq, mode.f, op, tags=tags, method="raw")
    e_var = abs(np.sum(var.quad.weights * var.values**2) - exact)
    e_raw = abs(np.sum(raw.quad.weights * raw.values**2) - exact)
    assert e_var < e_raw < 0.05 * exact


def test_rellich_boundary_term(rect02):
    op, mode = rect02
    tr = normal_trace(mode.vector, mode.lambdasq, mode.f, op)
    q = tr.quad.points[:, 0] * tr.quad.normals[:, 0]
    assert np.sum(tr.quad.weights * q * tr.values**2) == pytest.approx(math.pi**2 / 4, rel=0.01)


def test_zero_field_has_zero_trace(rect02):
    op, _ = rect02
    tr = normal_trace(np.zeros(op.n), 3.0, None, op)
    assert not np.any(tr.values)


def test_weighted_flux_rectangle_is_zero(rect02):
    op, mode = rect02
    assert weighted_flux(mode.vector, mode.lambdasq, mode.f, op) == 0.0


def test_weighted_flux_monotone_in_weight(stadium):
    op, pairs = stadium
    p = pairs[2]
    mode = ModeField.from_eigenpair(op, p)
    w1 = weighted_flux(mode.vector, p.lambdasq, mode.f, op)
    w2 = weighted_flux(mode.vector, p.lambdasq, mode.f, op, weight=lambda pts, w: w + 0.1)
    assert 0 < w1 <= w2
    assert unweighted_flux(mode.vector, p.lambdasq, mode.f, op) > w1


def test_weighted_flux_self_convergence():
    vals = []
    for lev in range(2):
        op = assemble(build_refined(GEO, 0.02, lev))
        mode = ModeField.from_eigenpair(op, solve_lowest(op, 1)[0])
        vals.append(weighted_flux(mode.vector, mode.lambdasq, mode.f, op))
    assert abs(vals[0] - vals[1]) / vals[1] <= 0.05


def test_gradient_identity(stadium):
    op, pairs = stadium
    for p in pairs:
        mode = ModeField.from_eigenpair(op, p)
        rep = gradient_identity_report(mode.vector, p.lambdasq, mode.f, op, s=2.0)
        assert rep.discrepancy <= 1e-12
        assert rep.implied_cs > 0
    z = gradient_identity_report(np.zeros(op.n), 5.0, None, op)
    assert (z.grad_norm_sq, z.rhs, z.discrepancy) == (0.0, 0.0, 0.0)


def test_gradient_identity_quasimode():
    spec = QuasimodeSpec(2, (-0.5, 0.5))
    op = assemble(build(GEO, spec.required_h(1.0)))
    m = explicit_quasimode(spec, op)
    assert gradient_identity_report(m.vector, m.lambdasq, m.f, op).discrepancy <= 1e-12


def test_observe_report(stadium):
    op, pairs = stadium
    mode = ModeField.from_eigenpair(op, pairs[0])
    r = observe(mode, op)
    assert len(r.csv_row()) == len(CSV_COLUMNS)
    assert r.csv_row()[0] == r.lam
    assert 0 <= r.wing_mass <= r.total_mass
    assert r.wing_mass == pytest.approx(r.zoneI + r.zoneII + r.zoneIII, abs=1e-10)
    assert min(r.lhs_normderiv, r.lhs_L2, r.lhs_L2bis) > 0
    assert r.lhs_L2 == pytest.approx(r.f_norm**2 + r.lam**8 * r.wing_mass)


def test_parity_balance(stadium):
    op, pairs = stadium
    for p in pairs:
        plus, minus = wing_masses(p.vector, op)
        assert abs(plus - minus) <= 1e-8
