"""Command-line entry point: ``stadium-lab <subcommand>``."""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import fields
from pathlib import Path

from . import acceptance as acc
from .eigensolve import SpectralWindow, bouncing_ball_window, solve_lowest, solve_window
from .fields import FIELD_KINDS
from .geometry import StadiumGeometry
from .mesh import DiskOnly, RectangleOnly, build_refined, read_mesh, write_mesh
from .modeio import eigenpair_meta, load_modes, save_modes
from .observables import CSV_COLUMNS, observe
from .operators import assemble
from .quasimode import PROFILES, ModeField, QuasimodeSpec, explicit_quasimode
from .study import OUTPUT_ENV, StudyConfig, run_study
from .verify import REPORT_COLUMNS, split_complex, verify_mode


def _domain(args):
    if args.domain == "rectangle":
        return RectangleOnly(args.alpha, args.beta)
    if args.domain == "disk":
        return DiskOnly(args.beta)
    return StadiumGeometry(args.alpha, args.beta)


def _mesh_from_args(args):
    if getattr(args, "mesh", None):
        return read_mesh(args.mesh)
    return build_refined(_domain(args), args.h, args.refinements)


def _add_mesh_flags(p, with_file=True):
    p.add_argument("--domain", choices=("stadium", "rectangle", "disk"), default="stadium")
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--h", type=float, default=0.02)
    p.add_argument("--refinements", type=int, default=0)
    if with_file:
        p.add_argument("--mesh", help="read the mesh from this file instead of building one")


def _open_out(path):
    return open(path, "w", newline="") if path else sys.stdout


def _float_cell(v):
    return repr(float(v))


def cmd_mesh(args):
    mesh = _mesh_from_args(args)
    write_mesh(mesh, args.out)
    print(f"{args.out}: {mesh.n_vertices} vertices, {mesh.n_triangles} triangles, h={mesh.h:.6g}, "
          f"min angle {mesh.min_angle_deg():.2f} deg")


def cmd_solve(args):
    opair = assemble(_mesh_from_args(args))
    beta = opair.mesh.domain.beta
    if args.count is not None:
        pairs = solve_lowest(opair, args.count, seed=args.seed)
    elif args.bouncing_ball is not None:
        pairs = solve_window(opair, bouncing_ball_window(args.bouncing_ball, beta, args.window_halfwidth),
                             seed=args.seed)
    elif args.window_center is not None:
        pairs = solve_window(opair, SpectralWindow(args.window_center, args.window_halfwidth), seed=args.seed)
    else:
        raise SystemExit("solve: give --count, --bouncing-ball or --window-center")
    modes = []
    for p in pairs:
        m = ModeField.from_eigenpair(opair, p)
        m.meta.update(eigenpair_meta(p))
        modes.append(m)
    save_modes(args.out, opair, modes)
    for p in pairs:
        print(f"lambda^2 = {p.lambdasq:.10f}  residual = {p.residual_bound:.2e}  parity = {p.parity}")
    print(f"{len(pairs)} eigenpairs written to {args.out}")


def cmd_quasimode(args):
    opair = assemble(_mesh_from_args(args))
    spec = QuasimodeSpec(args.n, tuple(args.support), args.profile)
    mode = explicit_quasimode(spec, opair)
    save_modes(args.out, opair, [mode])
    print(f"n={args.n} lambda={mode.lam:.6f} ||f||/||u||={mode.f_norm / opair.m_norm(mode.vector):.6f} "
          f"analytic={spec.analytic_ratio():.6f}")


def cmd_observe(args):
    opair, modes = load_modes(args.modes)
    with _open_out(args.out) as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(CSV_COLUMNS)
        for m in modes:
            rep = observe(m, opair, delta=args.delta, gamma1=args.gamma1, gamma2=args.gamma2)
            wr.writerow([_float_cell(v) for v in rep.csv_row()])


def cmd_verify(args):
    opair, modes = load_modes(args.mode)
    kinds = FIELD_KINDS if args.field == "all" else (args.field,)
    with _open_out(args.out) as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(REPORT_COLUMNS)
        for m in modes:
            for part in split_complex(m):
                for r in verify_mode(part, opair, kinds):
                    wr.writerow([r.field] + [_float_cell(v) for v in
                                (r.lam, r.lhs, r.rhs_volume, r.rhs_boundary, r.residual, r.scale,
                                 r.relative_residual)])


def _config_from_args(args, base: StudyConfig) -> StudyConfig:
    cfg = StudyConfig.load(args.config) if args.config else base
    for f in fields(StudyConfig):
        v = getattr(args, f.name, None)
        if v is not None:
            setattr(cfg, f.name, v)
    if getattr(args, "window", None):
        cfg.windows = [list(w) for w in args.window]
    return cfg


def _add_config_flags(p):
    p.add_argument("--config", help="JSON StudyConfig; flags override its fields")
    p.add_argument("--alpha", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--h", type=float)
    p.add_argument("--refinements", type=int)
    p.add_argument("--mesh-file", dest="mesh_file")
    p.add_argument("--window", nargs=2, type=float, action="append", metavar=("CENTER", "HALFWIDTH"))
    p.add_argument("--lambdasq-max", dest="lambdasq_max", type=float)
    p.add_argument("--per-window", dest="per_window", type=int)
    p.add_argument("--n-range", dest="n_range", nargs=2, type=int)
    p.add_argument("--halfwidth", type=float)
    p.add_argument("--delta", type=float)
    p.add_argument("--gamma1", type=float)
    p.add_argument("--gamma2", type=float)
    p.add_argument("--phi-knots", dest="phi_knots", nargs=2, type=float)
    p.add_argument("--chi-knots", dest="chi_knots", nargs=2, type=float)
    p.add_argument("--verify-fields", dest="verify_fields", nargs="*", choices=FIELD_KINDS)
    p.add_argument("--output-dir", dest="output_dir", help=f"also settable through ${OUTPUT_ENV}")
    p.add_argument("--threads", type=int)
    p.add_argument("--seed", type=int)


def cmd_study(args):
    cfg = _config_from_args(args, StudyConfig())
    res = run_study(cfg)
    print(f"{len(res.rows)} rows -> {res.csv_path}")
    for q, fit in res.fits.items():
        print(f"slope[{q}] = {fit.slope:.4f} (rms {fit.residual:.3g}, {fit.used} rows)")


def cmd_accept(args):
    cfg = _config_from_args(args, acc.default_config())
    results = acc.acceptance(cfg, only=args.only)
    for c in results:
        print(c.line())
    print(f"manifest: {cfg.resolved_output_dir() / 'acceptance.json'}")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="stadium-lab", description="Stadium eigenfunction laboratory")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("mesh", help="build a mesh and write it as text")
    _add_mesh_flags(p, with_file=False)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_mesh)

    p = sub.add_parser("solve", help="compute eigenpairs and write a mode set")
    _add_mesh_flags(p)
    p.add_argument("--count", type=int, help="lowest COUNT eigenpairs")
    p.add_argument("--bouncing-ball", type=int, metavar="N", help="window around ((N+1/2) pi / beta)^2")
    p.add_argument("--window-center", type=float)
    p.add_argument("--window-halfwidth", type=float, default=10.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("quasimode", help="build an explicit quasimode phi(x) cos(lambda y)")
    _add_mesh_flags(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--support", nargs=2, type=float, default=(-0.5, 0.5), metavar=("GAMMA", "DELTA"))
    p.add_argument("--profile", choices=sorted(PROFILES), default="sin4")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_quasimode)

    p = sub.add_parser("observe", help="observables of a mode set as CSV")
    p.add_argument("--modes", required=True, help="mode directory written by solve or quasimode")
    p.add_argument("--delta", type=float, default=1.0)
    p.add_argument("--gamma1", type=float)
    p.add_argument("--gamma2", type=float)
    p.add_argument("--out", help="CSV path (default stdout)")
    p.set_defaults(func=cmd_observe)

    p = sub.add_parser("verify-identity", help="Rellich identity residuals as CSV")
    p.add_argument("--field", choices=(*FIELD_KINDS, "all"), default="all")
    p.add_argument("--mode", required=True, help="mode directory written by solve or quasimode")
    p.add_argument("--out", help="CSV path (default stdout)")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("study", help="sweep windows and write CSV, SVG plots and a manifest")
    _add_config_flags(p)
    p.set_defaults(func=cmd_study)

    p = sub.add_parser("accept", help="run the acceptance criteria and write acceptance.json")
    _add_config_flags(p)
    p.add_argument("--only", nargs="*", type=int, help="criterion ids to run")
    p.set_defaults(func=cmd_accept)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except Exception as exc:
        print(f"stadium-lab {args.command}: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
