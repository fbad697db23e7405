"""Eigenpairs of ``K u = lambda^2 M u`` in spectral windows.

Shift-invert Lanczos in the M inner product with full reorthogonalisation.
The number of eigenvalues inside a window is known in advance from the
inertia of ``K - s M`` at the window edges, so the iteration runs until
that many Ritz pairs have converged, restarting with locked vectors when
a single Krylov sequence cannot reach a repeated eigenvalue.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy.sparse.linalg import splu

from .operators import OperatorPair

SOLVER_TOL = 1e-9
SHIFT_PERTURBATION = 1e-8


class SolverError(RuntimeError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


@dataclass(frozen=True)
class SpectralWindow:
    center: float
    halfwidth: float

    def __post_init__(self):
        if not self.halfwidth > 0:
            raise ValueError("halfwidth must be positive")

    @property
    def lo(self) -> float:
        return self.center - self.halfwidth

    @property
    def hi(self) -> float:
        return self.center + self.halfwidth

    @classmethod
    def from_bounds(cls, lo: float, hi: float) -> "SpectralWindow":
        return cls(0.5 * (lo + hi), 0.5 * (hi - lo))


@dataclass(eq=False)
class Eigenpair:
    lambdasq: float
    vector: np.ndarray  # interior coefficients, M-normalised
    residual_bound: float
    parity: tuple[int, int] | None = None
    window: SpectralWindow | None = field(default=None, repr=False)

    @property
    def lam(self) -> float:
        return math.sqrt(self.lambdasq)


def bouncing_ball_window(n: int, beta: float, halfwidth: float) -> SpectralWindow:
    """Window around ``((n + 1/2) pi / beta)^2``."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    return SpectralWindow(((n + 0.5) * math.pi / beta) ** 2, halfwidth)


# --------------------------------------------------------------------------
# factorisation and inertia

@dataclass
class _Factor:
    lu: object
    shift: float
    negative: int


def _factor(opair: OperatorPair, shift: float, scale: float | None = None) -> _Factor:
    """Symmetric-mode LU of ``K - shift M``, perturbing the shift off near-singular pivots."""
    scale = abs(shift) if scale is None else scale
    s = shift
    for attempt in range(6):
        A = (opair.K - s * opair.M).tocsc()
        try:
            lu = splu(A, permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
                      options={"SymmetricMode": True})
        except RuntimeError:  # exactly singular
            lu = None
        if lu is not None and np.array_equal(lu.perm_r, lu.perm_c):
            d = lu.U.diagonal()
            dmax = np.max(np.abs(d))
            if np.min(np.abs(d)) > 1e-13 * dmax:
                return _Factor(lu, s, int(np.sum(d < 0)))
        s = shift + SHIFT_PERTURBATION * max(scale, 1.0) * (attempt + 1)
    raise SolverError(f"could not factor K - s M near s={shift}")


def count_below(opair: OperatorPair, lambdasq_max: float) -> int:
    """Number of discrete eigenvalues below ``lambdasq_max`` (Sylvester inertia)."""
    if lambdasq_max <= 0:
        return 0
    return _factor(opair, lambdasq_max).negative


# --------------------------------------------------------------------------
# Lanczos

def _lanczos(opair, fac, lo, hi, need, locked, rng, ritz_tol):
    M = opair.M
    n = opair.n
    nlock = len(locked)
    cap = int(min(n - nlock, max(4 * need + 80, 120)))
    V = np.zeros((cap + 1, n))
    MV = np.zeros((cap + 1, n))
    L = np.array(locked).reshape(nlock, n) if nlock else np.zeros((0, n))
    ML = (M @ L.T).T if nlock else L

    def orth(w, upto):
        for _ in range(2):
            if nlock:
                w = w - L.T @ (ML @ w)
            w = w - V[:upto].T @ (MV[:upto] @ w)
        return w

    q = orth(rng.standard_normal(n), 0)
    Mq = M @ q
    q /= math.sqrt(q @ Mq)
    V[0], MV[0] = q, M @ q
    alpha, beta = [], []
    result = []
    for j in range(cap):
        w = fac.lu.solve(MV[j])
        a = MV[j] @ w
        w = w - a * V[j]
        if j > 0:
            w = w - beta[-1] * V[j - 1]
        w = orth(w, j + 1)
        Mw = M @ w
        b = math.sqrt(max(w @ Mw, 0.0))
        alpha.append(a)
        beta.append(b)
        m = j + 1
        breakdown = b <= 1e-14 * max(abs(a), 1e-300)
        if m >= need and (m % 5 == 0 or breakdown or m == cap):
            theta, S = sla.eigh_tridiagonal(np.array(alpha), np.array(beta[:-1]))
            with np.errstate(divide="ignore"):
                lam = fac.shift + 1.0 / theta
            # (K - lam M) x = -(b s_m / theta) (K - shift M) v_{m+1}; measure it as the
            # M-norm of its Riesz representative, relative to lam
            if b > 0:
                v_next = w / b
                Bv = opair.K @ v_next - fac.shift * (M @ v_next)
                gamma = opair.m_norm(opair.mass_solve(Bv))
            else:
                gamma = 0.0
            with np.errstate(divide="ignore", invalid="ignore"):
                est = np.abs(b * S[-1, :]) * gamma / (np.abs(theta) * np.abs(lam))
            inside = (lam > lo) & (lam <= hi) & (theta != 0)
            conv = inside & (est <= ritz_tol)
            if conv.sum() >= need or breakdown or m == cap:
                for i in np.flatnonzero(conv):
                    result.append((lam[i], V[:m].T @ S[:, i]))
                return result
        if breakdown:
            break
        V[m] = w / b
        MV[m] = Mw / b
    return result


def _interior_permutation(opair, perm):
    if perm is None:
        return None
    pos = -np.ones(opair.mesh.n_vertices, dtype=np.int64)
    pos[opair.dof_map] = np.arange(opair.n)
    p = pos[perm[opair.dof_map]]
    if np.any(p < 0):
        return None
    return p


PARITY_CLASSES = ((1, 1), (-1, 1), (1, -1), (-1, -1))


def _rayleigh_ritz(opair, X, symmetric=True):
    """Rayleigh-Ritz on span(X), split into reflection-parity classes when possible."""
    K, M = opair.K, opair.M
    blocks = []
    if symmetric:
        px = _interior_permutation(opair, opair.mesh.mirror_x)
        py = _interior_permutation(opair, opair.mesh.mirror_y)
        if px is not None and py is not None:
            Xx, Xy = X[px], X[py]
            Xxy = Xx[py]
            total = 0
            for sx, sy in PARITY_CLASSES:
                Y = 0.25 * (X + sx * Xx + sy * Xy + sx * sy * Xxy)
                G = Y.T @ (M @ Y)
                d, E = np.linalg.eigh(0.5 * (G + G.T))
                keep = d > 0.5
                if keep.any():
                    Z = Y @ (E[:, keep] / np.sqrt(d[keep]))
                    blocks.append(((sx, sy), Z))
                    total += int(keep.sum())
            if total != X.shape[1]:
                blocks = []
    if not blocks:
        blocks = [(None, X)]
    out = []
    for parity, Z in blocks:
        A = Z.T @ (K @ Z)
        B = Z.T @ (M @ Z)
        vals, vecs = sla.eigh(0.5 * (A + A.T), 0.5 * (B + B.T))
        U = Z @ vecs
        for i in range(len(vals)):
            out.append((vals[i], U[:, i], parity))
    out.sort(key=lambda t: t[0])
    return out


def _normalise_sign(u):
    i = int(np.argmax(np.abs(u) > 0.5 * np.max(np.abs(u))))
    return -u if u[i] < 0 else u


def true_residual(opair: OperatorPair, u: np.ndarray, lambdasq: float) -> float:
    """``||f||_M / (lambdasq ||u||_M)`` with ``f`` the M-Riesz residual."""
    r = opair.K @ u - lambdasq * (opair.M @ u)
    f = opair.mass_solve(r)
    return opair.m_norm(f) / (abs(lambdasq) * opair.m_norm(u))


def solve_window(opair: OperatorPair, window: SpectralWindow, max_count: int = 1000,
                 tol: float = SOLVER_TOL, seed: int = 0, symmetric: bool = True) -> list[Eigenpair]:
    """All discrete eigenpairs with ``window.lo < lambda^2 <= window.hi`` (at most ``max_count``).

    When more than ``max_count`` eigenvalues lie in the window, the ones
    closest to the centre are kept.
    """
    if not window.center > 0:
        raise ValueError("window centre must be positive")
    lo, hi = window.lo, window.hi
    need = count_below(opair, hi) - count_below(opair, lo)
    if need == 0:
        return []
    fac = _factor(opair, window.center)
    rng = np.random.default_rng(seed)
    found: list[tuple[float, np.ndarray]] = []
    stalls = 0
    while len(found) < need:
        got = _lanczos(opair, fac, lo, hi, need - len(found), [v for _, v in found], rng, 0.05 * tol)
        if not got:
            stalls += 1
            if stalls >= 3:
                raise SolverError(f"Lanczos found {len(found)} of {need} eigenvalues in "
                                  f"[{lo:.6g}, {hi:.6g}]", residual=None)
            continue
        for lam, v in got:
            if found:
                F = np.column_stack([u for _, u in found])
                v = v - F @ (F.T @ (opair.M @ v))
            nv = opair.m_norm(v)
            if nv < 0.5:
                continue
            found.append((lam, v / nv))
        if len(found) > need:
            found.sort(key=lambda t: abs(t[0] - window.center))
            found = found[:need]
    X = np.column_stack([v for _, v in found])
    # one block shift-invert step damps the high-frequency rounding noise left
    # by reorthogonalisation; the Rayleigh-Ritz step undoes the in-window mixing
    X = fac.lu.solve(np.asarray(opair.M @ X))
    X /= np.sqrt(np.einsum("ij,ij->j", X, np.asarray(opair.M @ X)))
    ritz = _rayleigh_ritz(opair, X, symmetric=symmetric)
    pairs = []
    worst = 0.0
    for lam, u, parity in ritz:
        u = _normalise_sign(u / opair.m_norm(u))
        res = true_residual(opair, u, lam)
        worst = max(worst, res)
        pairs.append(Eigenpair(float(lam), u, float(res), parity, window))
    if worst > tol:
        raise SolverError(f"eigen-residual {worst:.3e} exceeds tolerance {tol:.1e}", residual=worst)
    if len(pairs) > max_count:
        pairs.sort(key=lambda p: abs(p.lambdasq - window.center))
        pairs = sorted(pairs[:max_count], key=lambda p: p.lambdasq)
    return pairs


def solve_lowest(opair: OperatorPair, count: int, **kw) -> list[Eigenpair]:
    """The ``count`` lowest eigenpairs, found by widening a window from zero."""
    hi = 1.0
    while count_below(opair, hi) < count:
        hi *= 2.0
    pairs = solve_window(opair, SpectralWindow.from_bounds(0.0, hi), **kw)
    return pairs[:count]


def windows_below(opair: OperatorPair, lambdasq_max: float, per_window: int = 30) -> list[SpectralWindow]:
    """Partition ``(0, lambdasq_max]`` into windows holding roughly ``per_window`` eigenvalues each."""
    total = count_below(opair, lambdasq_max)
    if total == 0:
        return []
    nwin = max(1, math.ceil(total / per_window))
    # equal counts under the leading Weyl term N ~ c * lambda^2
    edges = [lambdasq_max * k / nwin for k in range(nwin + 1)]
    return [SpectralWindow.from_bounds(edges[k], edges[k + 1]) for k in range(nwin)]
