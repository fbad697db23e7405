import math

import numpy as np
import pytest
from scipy.optimize import brentq
from scipy.special import j0

from stadium_lab.eigensolve import (SolverError, SpectralWindow, bouncing_ball_window, count_below, solve_lowest,
                                    solve_window, windows_below)
from stadium_lab.geometry import StadiumGeometry
from stadium_lab.mesh import DiskOnly, RectangleOnly, build
from stadium_lab.operators import assemble


def lattice(alpha, beta, upto):
    out = []
    for k in range(1, 200):
        for m in range(1, 200):
            v = (k * math.pi / (2 * alpha)) ** 2 + (m * math.pi / (2 * beta)) ** 2
            if v <= upto:
                out.append(v)
    return sorted(out)


@pytest.fixture(scope="module")
def rect02():
    return assemble(build(RectangleOnly(2.0, 1.0), 0.02))


@pytest.fixture(scope="module")
def stadium():
    return assemble(build(StadiumGeometry(1.0, 1.0), 0.05))


def test_rectangle_lowest_three(rect02):
    pairs = solve_lowest(rect02, 3)
    exact = [5 * math.pi**2 / 16, math.pi**2 / 2, 13 * math.pi**2 / 16]
    for p, e in zip(pairs, exact):
        assert abs(p.lambdasq - e) / e < 5e-3
        assert p.lambdasq > e  # conforming elements bound from above


def test_disk_fundamental_against_bessel_zero():
    z = brentq(j0, 2.0, 3.0, xtol=1e-14)
    op = assemble(build(DiskOnly(1.0), 0.025))
    lam2 = solve_lowest(op, 1)[0].lambdasq
    assert abs(lam2 - z * z) / (z * z) < 0.01


def test_normalisation_orthogonality_and_residuals(stadium):
    pairs = solve_window(stadium, SpectralWindow(60.0, 25.0))
    assert len(pairs) > 5
    X = np.column_stack([p.vector for p in pairs])
    G = X.T @ (stadium.M @ X)
    assert np.allclose(np.diag(G), 1.0, atol=1e-12)
    off = G - np.diag(np.diag(G))
    assert np.abs(off).max() <= 1e-10
    lams = [p.lambdasq for p in pairs]
    assert lams == sorted(lams)
    for p in pairs:
        r = stadium.K @ p.vector - p.lambdasq * (stadium.M @ p.vector)
        assert stadium.m_norm(stadium.mass_solve(r)) <= 1e-9 * p.lambdasq
        assert p.residual_bound <= 1e-9


def test_window_count_consistency(stadium):
    w = SpectralWindow(150.0, 30.0)
    pairs = solve_window(stadium, w)
    assert len(pairs) == count_below(stadium, w.hi) - count_below(stadium, w.lo)
    assert all(w.lo < p.lambdasq <= w.hi for p in pairs)


def test_max_count_keeps_nearest_centre(stadium):
    w = SpectralWindow(150.0, 30.0)
    full = solve_window(stadium, w)
    few = solve_window(stadium, w, max_count=3)
    nearest = sorted(sorted(full, key=lambda p: abs(p.lambdasq - 150.0))[:3], key=lambda p: p.lambdasq)
    assert [p.lambdasq for p in few] == pytest.approx([p.lambdasq for p in nearest], rel=1e-12)


def test_bouncing_ball_centres():
    assert bouncing_ball_window(10, 1.0, 5.0).center == pytest.approx((10.5 * math.pi) ** 2)
    assert bouncing_ball_window(0, 1.0, 5.0).center == pytest.approx(math.pi**2 / 4)
    assert bouncing_ball_window(3, 2.0, 5.0).center == pytest.approx(30.226, abs=1e-3)
    with pytest.raises(ValueError):
        bouncing_ball_window(-1, 1.0, 5.0)


def test_window_requires_positive_halfwidth():
    with pytest.raises(ValueError):
        SpectralWindow(10.0, 0.0)


def test_count_below_lattice():
    op = assemble(build(RectangleOnly(2.0, 1.0), 0.02))
    assert count_below(op, 1.0) == 0
    exact = len(lattice(2.0, 1.0, 20.0))
    # discrete eigenvalues sit slightly above the exact ones; 20 is far from any lattice value
    assert count_below(op, 20.0) == exact


def test_rectangle_first_ten_converge_second_order():
    exact = lattice(2.0, 1.0, 40.0)[:10]
    errs = []
    for h in (0.04, 0.02):
        pairs = solve_lowest(assemble(build(RectangleOnly(2.0, 1.0), h)), 10)
        errs.append(np.array([p.lambdasq for p in pairs]) - exact)
    assert np.all(errs[0] / errs[1] >= 3.5)


def test_windows_below_partition(stadium):
    ws = windows_below(stadium, 200.0, per_window=10)
    assert ws[0].lo == 0.0 and ws[-1].hi == pytest.approx(200.0)
    total = sum(len(solve_window(stadium, w)) for w in ws)
    assert total == count_below(stadium, 200.0)


def test_parity_labels_match_mirror(stadium):
    pairs = solve_lowest(stadium, 6)
    m = stadium.mesh
    for p in pairs:
        u = stadium.to_full(p.vector)
        sx, sy = p.parity
        assert np.allclose(u[m.mirror_x], sx * u, atol=1e-9)
        assert np.allclose(u[m.mirror_y], sy * u, atol=1e-9)


def test_deterministic(stadium):
    a = solve_window(stadium, SpectralWindow(100.0, 20.0))
    b = solve_window(stadium, SpectralWindow(100.0, 20.0))
    assert all(np.array_equal(x.vector, y.vector) and x.lambdasq == y.lambdasq for x, y in zip(a, b))


def test_solver_error_carries_residual():
    e = SolverError("boom", residual=1e-3)
    assert e.residual == 1e-3
