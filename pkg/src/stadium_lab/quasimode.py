"""Mode records and the separable quasimodes localised in the rectangle.

The family ``phi(x) cos((n + 1/2) pi y / beta)`` vanishes on the top and
bottom sides, and with ``phi`` supported in ``[gamma, delta]`` inside
``[-alpha, alpha]`` it never reaches the wings.  Its residual is
``-phi''(x) cos(...)``, whose size relative to ``u`` does not depend on ``n``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .eigensolve import Eigenpair
from .operators import OperatorPair, interpolate, residual

PROVENANCES = ("eigenpair", "explicit_quasimode", "window_combination", "interpolant")


@dataclass(eq=False)
class ModeField:
    vector: np.ndarray  # interior coefficients
    lambdasq: float
    f: np.ndarray  # M-Riesz representative of (K - lambda^2 M) u
    f_norm: float
    provenance: str
    meta: dict = field(default_factory=dict)

    @property
    def lam(self) -> float:
        return math.sqrt(self.lambdasq)

    @classmethod
    def from_vector(cls, opair: OperatorPair, u: np.ndarray, lambdasq: float,
                    provenance: str = "interpolant", normalize: bool = True, **meta) -> "ModeField":
        if provenance not in PROVENANCES:
            raise ValueError(f"unknown provenance {provenance!r}")
        u = np.asarray(u, dtype=float)
        if normalize:
            nrm = opair.m_norm(u)
            if nrm > 0:
                u = u / nrm
        f, fn = residual(opair, u, lambdasq)
        return cls(u, float(lambdasq), f, fn, provenance, dict(meta))

    @classmethod
    def from_eigenpair(cls, opair: OperatorPair, pair: Eigenpair) -> "ModeField":
        meta = {"residual_bound": pair.residual_bound}
        if pair.parity is not None:
            meta["parity"] = list(pair.parity)
        return cls.from_vector(opair, pair.vector, pair.lambdasq, "eigenpair", **meta)


# --------------------------------------------------------------------------
# profiles

@dataclass(frozen=True)
class Sin4Profile:
    """``sin^4(pi (x - gamma) / L)`` on ``[gamma, gamma + L]``."""

    gamma: float
    length: float
    name = "sin4"

    @property
    def k(self):
        return math.pi / self.length

    def _s(self, x):
        t = np.asarray(x, dtype=float) - self.gamma
        inside = (t > 0.0) & (t < self.length)
        # exact zeros outside the support (sin(pi) is not 0 in floating point)
        s = np.where(inside, np.sin(self.k * t), 0.0)
        c = np.where(inside, np.cos(self.k * t), 0.0)
        return s, c

    def phi(self, x):
        s, _ = self._s(x)
        return s**4

    def phi_x(self, x):
        s, c = self._s(x)
        return 4.0 * self.k * s**3 * c

    def phi_xx(self, x):
        s, c = self._s(x)
        return 4.0 * self.k**2 * s**2 * (3.0 * c**2 - s**2)

    # closed forms from the averages of sin^4, sin^6, sin^8 over a period
    def norm_sq(self):
        return 35.0 * self.length / 128.0

    def d1_norm_sq(self):
        return 5.0 * self.k**2 * self.length / 8.0

    def d2_norm_sq(self):
        return 4.0 * self.k**4 * self.length


@dataclass(frozen=True)
class Poly3Profile:
    """``(t (1 - t))^3`` with ``t = (x - gamma) / L``, scaled to peak 1."""

    gamma: float
    length: float
    name = "poly3"

    def _poly(self):
        p = np.polynomial.Polynomial([0.0, 1.0, -1.0]) ** 3 * 64.0
        return p

    def _t(self, x):
        return np.clip((x - self.gamma) / self.length, 0.0, 1.0)

    def phi(self, x):
        return self._poly()(self._t(x))

    def phi_x(self, x):
        return self._poly().deriv(1)(self._t(x)) / self.length

    def phi_xx(self, x):
        return self._poly().deriv(2)(self._t(x)) / self.length**2

    def _int_sq(self, p, scale):
        q = (p * p).integ()
        return float(q(1.0) - q(0.0)) * self.length * scale

    def norm_sq(self):
        return self._int_sq(self._poly(), 1.0)

    def d1_norm_sq(self):
        return self._int_sq(self._poly().deriv(1), self.length**-2)

    def d2_norm_sq(self):
        return self._int_sq(self._poly().deriv(2), self.length**-4)


PROFILES = {"sin4": Sin4Profile, "poly3": Poly3Profile}


@dataclass(frozen=True)
class QuasimodeSpec:
    n: int
    support: tuple[float, float]
    profile: str = "sin4"

    def __post_init__(self):
        if self.n < 0:
            raise ValueError("n must be nonnegative")
        g, d = self.support
        if not g < d:
            raise ValueError("support must satisfy gamma < delta")
        if self.profile not in PROFILES:
            raise ValueError(f"unknown profile {self.profile!r}")

    def make_profile(self):
        g, d = self.support
        return PROFILES[self.profile](g, d - g)

    def lam(self, beta: float) -> float:
        return (self.n + 0.5) * math.pi / beta

    def required_h(self, beta: float) -> float:
        return beta / (8.0 * (self.n + 0.5))

    def analytic_ratio(self) -> float:
        """``||f|| / ||u|| = ||phi''|| / ||phi||``; the transverse factors cancel."""
        p = self.make_profile()
        return math.sqrt(p.d2_norm_sq() / p.norm_sq())


def explicit_quasimode(spec: QuasimodeSpec, opair: OperatorPair) -> ModeField:
    mesh = opair.mesh
    dom = mesh.domain
    alpha, beta = dom.alpha, dom.beta
    g, d = spec.support
    if g < -alpha - 1e-12 or d > alpha + 1e-12:
        raise ValueError(f"support {spec.support} is not inside [-{alpha}, {alpha}]")
    if mesh.h > spec.required_h(beta) * (1 + 1e-12):
        raise ValueError(f"mesh h={mesh.h:.4g} does not resolve n={spec.n}; "
                         f"need h <= {spec.required_h(beta):.4g}")
    prof = spec.make_profile()
    lam = spec.lam(beta)
    ky = lam

    def u_fn(x, y):
        return prof.phi(x) * np.cos(ky * y)

    u = interpolate(opair, u_fn)
    ratio = spec.analytic_ratio()
    return ModeField.from_vector(
        opair, u, lam * lam, "explicit_quasimode",
        n=spec.n, support=list(spec.support), profile=spec.profile,
        analytic_ratio=ratio,
        analytic_norm=math.sqrt(prof.norm_sq() * beta),
        analytic_f_norm=math.sqrt(prof.d2_norm_sq() * beta),
    )


def wing_mass_of_quasimode(spec: QuasimodeSpec, opair: OperatorPair) -> float:
    from .observables import wing_masses

    mode = explicit_quasimode(spec, opair)
    plus, minus = wing_masses(mode.vector, opair)
    return plus + minus


def window_combination(opair: OperatorPair, eigenpairs: list[Eigenpair], coefficients,
                       lambdasq: float | None = None) -> ModeField:
    """``u = sum c_i u_i`` over eigenpairs from one window, residual taken at ``lambdasq``.

    ``lambdasq`` defaults to the window centre.
    """
    if not eigenpairs:
        raise ValueError("need at least one eigenpair")
    windows = {p.window for p in eigenpairs}
    if len(windows) != 1:
        raise ValueError("eigenpairs come from different spectral windows")
    c = np.asarray(coefficients, dtype=float)
    if c.shape != (len(eigenpairs),):
        raise ValueError("one coefficient per eigenpair is required")
    if abs(float(c @ c) - 1.0) > 1e-10:
        raise ValueError("coefficients must have unit Euclidean norm")
    window = windows.pop()
    if lambdasq is None:
        if window is None:
            raise ValueError("eigenpairs carry no window; pass lambdasq")
        lambdasq = window.center
    u = sum(ci * p.vector for ci, p in zip(c, eigenpairs))
    f, fn = residual(opair, u, lambdasq)
    return ModeField(u, float(lambdasq), f, fn, "window_combination",
                     {"lambdasq_i": [p.lambdasq for p in eigenpairs], "coefficients": c.tolist()})
