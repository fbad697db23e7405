"""Study sweeps: solve, observe and verify over a list of spectral windows.

Windows run in a thread pool, but every per-window pipeline is seeded and
independent, BLAS is pinned to one thread, and rows are serialised in window
order, so the CSV does not depend on the worker count.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import svgplot
from .eigensolve import SpectralWindow, bouncing_ball_window, count_below, solve_window, windows_below
from .fields import FIELD_KINDS
from .geometry import StadiumGeometry
from .mesh import build_refined, read_mesh, refine
from .observables import observe
from .operators import OperatorPair, assemble
from .quasimode import ModeField
from .verify import rellich_residual

OUTPUT_ENV = "STADIUM_LAB_OUTPUT"


class ConfigError(ValueError):
    pass


class StudyError(RuntimeError):
    def __init__(self, message, manifest_path=None):
        super().__init__(message)
        self.manifest_path = manifest_path


@dataclass
class StudyConfig:
    alpha: float = 1.0
    beta: float = 1.0
    h: float = 0.02
    refinements: int = 1
    mesh_file: str | None = None
    # window selection, first non-empty wins: explicit windows, lambdasq_max sweep, bouncing-ball range
    windows: list | None = None
    lambdasq_max: float | None = None
    per_window: int = 30
    n_range: list = field(default_factory=lambda: [3, 15])
    halfwidth: float = 10.0
    delta: float = 1.0
    gamma1: float | None = None
    gamma2: float | None = None
    phi_knots: list | None = None
    chi_knots: list | None = None
    verify_fields: list = field(default_factory=lambda: list(FIELD_KINDS))
    output_dir: str = "runs/study"
    threads: int = 1
    seed: int = 0

    def validate(self) -> None:
        if not (self.alpha > 0 and self.beta > 0):
            raise ConfigError("alpha and beta must be positive")
        if self.mesh_file is None and not (0 < self.h <= self.beta / 4):
            raise ConfigError(f"h must lie in (0, beta/4], got {self.h}")
        if self.refinements < 0:
            raise ConfigError("refinements must be >= 0")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        if self.delta <= 0:
            raise ConfigError("delta must be positive")
        if self.windows is not None:
            for w in self.windows:
                if len(w) != 2 or not (w[0] > 0 and w[1] > 0):
                    raise ConfigError(f"window must be [center > 0, halfwidth > 0], got {w}")
        elif self.lambdasq_max is not None:
            if self.lambdasq_max <= 0 or self.per_window < 1:
                raise ConfigError("lambdasq_max and per_window must be positive")
        else:
            lo, hi = self.n_range
            if not (0 <= lo <= hi) or self.halfwidth <= 0:
                raise ConfigError("n_range must satisfy 0 <= lo <= hi and halfwidth > 0")
        g1, g2 = self.strips()
        if not (-self.alpha <= g1 < g2 <= self.alpha):
            raise ConfigError("strip coordinates must satisfy -alpha <= gamma1 < gamma2 <= alpha")
        for knots in (self.phi_knots, self.chi_knots):
            if knots is not None and not (0 <= knots[0] < knots[1] <= self.beta):
                raise ConfigError(f"cutoff knots must satisfy 0 <= lo < hi <= beta, got {knots}")
        bad = set(self.verify_fields) - set(FIELD_KINDS)
        if bad:
            raise ConfigError(f"unknown field kinds {sorted(bad)}")

    def strips(self) -> tuple[float, float]:
        g1 = -self.alpha / 2 if self.gamma1 is None else self.gamma1
        g2 = self.alpha / 2 if self.gamma2 is None else self.gamma2
        return g1, g2

    def resolved_output_dir(self) -> Path:
        return Path(os.environ.get(OUTPUT_ENV) or self.output_dir)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "StudyConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_json(cls, text: str) -> "StudyConfig":
        return cls.from_dict(json.loads(text))

    @classmethod
    def load(cls, path) -> "StudyConfig":
        return cls.from_json(Path(path).read_text())


SCALING_COLUMNS = (
    "window", "n", "lambda", "lambdasq", "parity_x", "parity_y", "total_mass", "wing_mass",
    "wing_mass_plus", "wing_mass_minus", "lam4_wing_mass", "lam2_sqrt_wing_mass", "flux_weighted",
    "flux_unweighted", "lhs_normderiv", "lhs_L2", "lhs_L2bis", "strip_mass", "zoneI", "zoneII",
    "zoneIII", "f_norm", "rellich_xdx", "rellich_radial", "rellich_cutoffx", "rellich_wingy",
    "slope_wing_mass", "slope_flux_weighted",
)


@dataclass
class ScalingRow:
    window: int
    n: int  # bouncing-ball index, -1 when the window is not of that kind
    lam: float
    lambdasq: float
    parity_x: int
    parity_y: int
    total_mass: float
    wing_mass: float
    wing_mass_plus: float
    wing_mass_minus: float
    lam4_wing_mass: float
    lam2_sqrt_wing_mass: float
    flux_weighted: float
    flux_unweighted: float
    lhs_normderiv: float
    lhs_L2: float
    lhs_L2bis: float
    strip_mass: float
    zoneI: float
    zoneII: float
    zoneIII: float
    f_norm: float
    rellich_xdx: float = math.nan
    rellich_radial: float = math.nan
    rellich_cutoffx: float = math.nan
    rellich_wingy: float = math.nan
    slope_wing_mass: float = math.nan
    slope_flux_weighted: float = math.nan

    def values(self) -> list:
        return [getattr(self, f.name) for f in fields(self)]


def _cell(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(SCALING_COLUMNS)
    for r in rows:
        wr.writerow([_cell(v) for v in r.values()])
    return buf.getvalue()


def read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return [{k: float(v) for k, v in rec.items()} for rec in csv.DictReader(fh)]


@dataclass(frozen=True)
class FitResult:
    quantity: str
    slope: float
    intercept: float
    residual: float  # root-mean-square residual in log space
    used: int
    excluded: tuple  # indices of rows dropped for nonpositive values


def fit_loglog(lams, values, quantity: str = "value") -> FitResult:
    lams = np.asarray(lams, dtype=float)
    values = np.asarray(values, dtype=float)
    ok = (lams > 0) & (values > 0) & np.isfinite(values)
    excluded = tuple(int(i) for i in np.flatnonzero(~ok))
    if ok.sum() < 3:
        raise ValueError(f"need at least 3 positive rows to fit {quantity}, got {int(ok.sum())}")
    X = np.column_stack([np.log(lams[ok]), np.ones(ok.sum())])
    y = np.log(values[ok])
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    rms = float(np.sqrt(np.mean((X @ coef - y) ** 2)))
    return FitResult(quantity, float(coef[0]), float(coef[1]), rms, int(ok.sum()), excluded)


def fit_scaling(rows, quantity: str = "wing_mass") -> FitResult:
    """OLS fit of ``log(quantity)`` against ``log(lambda)``."""
    return fit_loglog([r.lam for r in rows], [getattr(r, quantity) for r in rows], quantity)


def load_mesh(config: StudyConfig):
    if config.mesh_file is not None:
        mesh = read_mesh(config.mesh_file)
        for _ in range(config.refinements):
            mesh = refine(mesh)
        return mesh
    return build_refined(StadiumGeometry(config.alpha, config.beta), config.h, config.refinements)


def resolve_windows(config: StudyConfig, opair: OperatorPair) -> list[tuple[int, SpectralWindow]]:
    """Windows in processing order, each tagged with its bouncing-ball index or -1."""
    if config.windows is not None:
        return [(-1, SpectralWindow(float(c), float(hw))) for c, hw in config.windows]
    if config.lambdasq_max is not None:
        return [(-1, w) for w in windows_below(opair, config.lambdasq_max, config.per_window)]
    lo, hi = config.n_range
    return [(n, bouncing_ball_window(n, config.beta, config.halfwidth)) for n in range(lo, hi + 1)]


def mode_rows(config: StudyConfig, opair: OperatorPair, index: int, n: int, pairs) -> list[ScalingRow]:
    g1, g2 = config.strips()
    fkw = {}
    if config.phi_knots is not None:
        fkw["phi_knots"] = tuple(config.phi_knots)
    if config.chi_knots is not None:
        fkw["chi_knots"] = tuple(config.chi_knots)
    rows = []
    for p in pairs:
        mode = ModeField.from_eigenpair(opair, p)
        rep = observe(mode, opair, delta=config.delta, gamma1=g1, gamma2=g2)
        rel = {k: rellich_residual(mode, k, opair, **fkw).relative_residual for k in config.verify_fields}
        px, py = p.parity if p.parity is not None else (0, 0)
        rows.append(ScalingRow(
            window=index, n=n, lam=rep.lam, lambdasq=p.lambdasq, parity_x=px, parity_y=py,
            total_mass=rep.total_mass, wing_mass=rep.wing_mass, wing_mass_plus=rep.wing_mass_plus,
            wing_mass_minus=rep.wing_mass_minus, lam4_wing_mass=rep.lam**4 * rep.wing_mass,
            lam2_sqrt_wing_mass=rep.lam**2 * math.sqrt(max(rep.wing_mass, 0.0)),
            flux_weighted=rep.flux_weighted, flux_unweighted=rep.flux_unweighted,
            lhs_normderiv=rep.lhs_normderiv, lhs_L2=rep.lhs_L2, lhs_L2bis=rep.lhs_L2bis,
            strip_mass=rep.strip_mass, zoneI=rep.zoneI, zoneII=rep.zoneII, zoneIII=rep.zoneIII,
            f_norm=rep.f_norm, **{f"rellich_{k}": v for k, v in rel.items()},
        ))
    return rows


@dataclass
class StudyResult:
    config: StudyConfig
    rows: list
    fits: dict
    csv_path: Path
    manifest_path: Path
    plots: list


def _window_job(config, opair, index, n, window):
    pairs = solve_window(opair, window, seed=config.seed + index)
    return mode_rows(config, opair, index, n, pairs)


def _apply_fits(rows) -> dict:
    fits = {}
    for q in ("wing_mass", "flux_weighted"):
        try:
            fits[q] = fit_scaling(rows, q)
        except ValueError:
            continue
        for r in rows:
            setattr(r, f"slope_{q}", fits[q].slope)
    return fits


def _plots(rows, fits, out: Path) -> list[Path]:
    lams = [r.lam for r in rows]
    paths = []
    specs = (("wing_mass", "wing mass vs lambda", "||u||^2 on wings", -4.0),
             ("flux_weighted", "weighted boundary flux vs lambda", "int w |d_N u|^2", 0.0))
    for q, title, ylabel, slope in specs:
        ys = [getattr(r, q) for r in rows]
        plot = svgplot.LogLogPlot(title, "lambda", ylabel, [svgplot.Series(q, lams, ys)])
        pos = [(x, y) for x, y in zip(lams, ys) if x > 0 and y > 0]
        if pos:
            x0 = min(p[0] for p in pos)
            y0 = min(p[1] for p in pos if p[0] == x0)
            plot.refs.append(svgplot.RefSlope("reference", slope, x0, y0))
        if q in fits:
            f = fits[q]
            plot.refs.append(svgplot.RefSlope("fit", round(f.slope, 3), 1.0, math.exp(f.intercept)))
        paths.append(svgplot.write(plot, out / f"{q}.svg"))
    return paths


def _write_manifest(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def run_study(config: StudyConfig, opair: OperatorPair | None = None) -> StudyResult:
    config.validate()
    out = config.resolved_output_dir()
    out.mkdir(parents=True, exist_ok=True)
    csv_path, manifest_path = out / "scaling.csv", out / "manifest.json"
    (out / "config.json").write_text(config.to_json() + "\n")
    done: list[list[ScalingRow]] = []
    with threadpool_limits(limits=1):
        try:
            if opair is None:
                opair = assemble(load_mesh(config))
            windows = resolve_windows(config, opair)
            opair.mass_solve(np.zeros(opair.n))  # factor once before threads share it
            with ThreadPoolExecutor(max_workers=config.threads) as pool:
                futures = [pool.submit(_window_job, config, opair, i, n, w) for i, (n, w) in enumerate(windows)]
                for fut in futures:
                    done.append(fut.result())
        except Exception as exc:
            rows = [r for chunk in done for r in chunk]
            csv_path.write_text(rows_to_csv(rows))
            _write_manifest(manifest_path, {"status": "error", "error": f"{type(exc).__name__}: {exc}",
                                            "windows_completed": len(done), "rows": len(rows)})
            raise StudyError(str(exc), manifest_path) from exc
    rows = [r for chunk in done for r in chunk]
    fits = _apply_fits(rows)
    csv_path.write_text(rows_to_csv(rows))
    plots = _plots(rows, fits, out)
    expected = None
    if windows and config.windows is None:
        # half-open windows: the inertia count of each window equals its row count
        expected = sum(count_below(opair, w.hi) - count_below(opair, w.lo) for _, w in windows)
    _write_manifest(manifest_path, {
        "status": "ok", "rows": len(rows), "windows": len(windows), "expected_rows": expected,
        "fits": {k: asdict(v) for k, v in fits.items()},
        "files": sorted(p.name for p in [csv_path, *plots]),
    })
    return StudyResult(config, rows, fits, csv_path, manifest_path, plots)
