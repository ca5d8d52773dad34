"""Command-line front end.

Every command reads a robot description file (see ``cuspkit.robotfile``),
prints a short text report and writes CSV/SVG files into the output
directory: ``--out``, else the ``CUSPKIT_OUT`` environment variable, else
the current directory.

Exit codes: 0 success (empty results included), 1 usage or input error,
2 numeric failure.
"""

from __future__ import annotations

import argparse
import os
import sys
from collections import Counter
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import atlas as at
from . import parallel as par
from .classify import domain_label
from .cusp import default_search_grid, find_cusps, find_cusps_joint_space, is_cuspidal
from .emit import PALETTE, SvgFigure, mask_outline, read_csv, write_csv
from .numcore import CLAMP, DegeneratePolynomialError, GridSpec
from .robotfile import RobotDescription, RobotFileError, load_robot
from .serial3r import JointConfig3R, Pose3, forward_kinematics, inverse_kinematics, jacobian_det

OUT_ENV = "CUSPKIT_OUT"
EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _num(v, scale: float = 1.0) -> str:
    v = float(v)
    if abs(v) < 1e-12 * max(scale, 1.0):
        v = 0.0
    return f"{v:.10g}"


def _out_dir(args) -> Path:
    d = Path(args.out or os.environ.get(OUT_ENV) or ".")
    d.mkdir(parents=True, exist_ok=True)
    return d


def _angles(values, deg: bool):
    v = np.asarray(values, dtype=float)
    return np.radians(v) if deg else v


def _serial(desc: RobotDescription):
    if not desc.serial:
        raise UsageError(f"this command needs a serial3r robot, got {desc.kind}")
    return desc.geometry()


def _report(*paths: Path):
    for p in paths:
        print(f"wrote {p}")


# -- serial commands ------------------------------------------------------------------


def cmd_fk(args) -> int:
    g = _serial(args.robot)
    q = JointConfig3R(*_angles(args.joints, args.deg))
    p = forward_kinematics(g, q)
    s = g.reach
    print(" ".join(_num(v, s) for v in (p.x, p.y, p.z)))
    print(f"det J = {_num(jacobian_det(g, q).value, s)}")
    out = _out_dir(args)
    _report(write_csv(out / "fk.csv", ["theta1_rad", "theta2_rad", "theta3_rad", "x", "y", "z"],
                      [[*q.as_array(), p.x, p.y, p.z]]))
    return EXIT_OK


def cmd_ik(args) -> int:
    g = _serial(args.robot)
    sols = inverse_kinematics(g, Pose3(*args.pose), cluster_tol=args.tol or 1e-6)
    print(f"{len(sols)} solutions")
    for s in sols:
        q = s.q.as_array()
        print(" ".join(f"{v:.6f}" for v in q) + f"  residual {s.residual:.2e}" + (f"  multiplicity {s.multiplicity}" if s.multiplicity > 1 else ""))
    out = _out_dir(args)
    _report(write_csv(out / "ik.csv", ["theta1_rad", "theta2_rad", "theta3_rad", "residual", "multiplicity"],
                      [[*s.q.as_array(), s.residual, s.multiplicity] for s in sols]))
    return EXIT_OK


def _cusps_of(g, args):
    if g.is_orthogonal:
        search = default_search_grid(g, args.seeds) if args.seeds else None
        return find_cusps(g, search, tol=args.tol or 1e-10)
    return find_cusps_joint_space(g, tol=args.tol or 1e-10)


def _section_svg(g, section, path: Path, title: str, extra=None):
    r = section.grid.ranges
    fig = SvgFigure(r[0], r[1], width=360, title=title, xlabel="rho", ylabel="z")
    for b in section.boundaries:
        fig.polyline(b.polyline.points, "#d62728" if b.kind == "internal" else "black",
                     closed=b.polyline.closed, width=1.2)
    if extra:
        extra(fig)
    for c in section.cusps:
        fig.marker(c.rho, c.z, "#1f77b4")
    return fig.save(path)


def cmd_cusps(args) -> int:
    g = _serial(args.robot)
    cusps = _cusps_of(g, args)
    print(f"{len(cusps)} cusps")
    for c in cusps:
        print(f"rho {c.rho:.6f}  z {c.z:.6f}  t {c.t:.6f}  residual {c.residual:.1e}")
    out = _out_dir(args)
    csv_path = write_csv(out / "cusps.csv", ["rho", "z", "t", "residual"], [[c.rho, c.z, c.t, c.residual] for c in cusps])
    paths = [csv_path]
    if g.is_orthogonal:
        section = at.workspace_section(g, at.section_grid(g, args.grid or at.DEFAULT_RESOLUTION), with_cusps=False)
        section.cusps = list(cusps)
        paths.append(_section_svg(g, section, out / "section.svg", "workspace section"))
    _report(*paths)
    return EXIT_OK


def cmd_classify(args) -> int:
    g = _serial(args.robot)
    v = is_cuspidal(g)
    print(f"verdict: {v.label}")
    print(f"route: {v.evidence.path}")
    if v.evidence.condition is not None:
        c = v.evidence.condition
        print(f"condition {c.identifier}: {c.description}")
    if v.evidence.branch:
        print(f"branch: {v.evidence.branch}")
    print(f"cusps found: {len(v.evidence.cusps)}")
    if g.is_orthogonal and g.r3 == 0.0 and g.d2 > 0:
        try:
            lab = domain_label(g)
            print(f"parameter domain: {lab.domain_id}  expected cusps: {lab.expected_count}")
        except ValueError as e:
            print(f"parameter domain: {e}")
    return EXIT_OK


def _torus_wrap(grid):
    return [(hi - lo) if grid.wrapped(k) else 0.0 for k, (lo, hi) in enumerate(grid.ranges)]


def cmd_atlas(args) -> int:
    g = _serial(args.robot)
    res = args.grid or at.DEFAULT_RESOLUTION
    A = at.build_atlas(g, res, args.robot.limits())
    asp, sec = A.aspects, A.section
    print(f"aspects: {asp.count}")
    print(f"basic regions: {len(A.regions)}")
    print(f"uniqueness domains: {len(A.domains)}  " + "  ".join(f"{{{','.join(map(str, d.regions))}}}" for d in A.domains))
    print(f"t-connected regions: {len(A.t_regions)}")
    print(f"section boundaries: {len(sec.boundaries)} ({len(sec.internal())} internal)  cusps: {len(sec.cusps)}")
    counts = sorted(set(int(v) for v in np.unique(sec.counts)))
    print("solution counts: " + " ".join(str(c) for c in counts))
    out = _out_dir(args)
    paths = []

    gr = asp.grid
    wrap = _torus_wrap(gr)
    fig = SvgFigure(gr.ranges[0], gr.ranges[1], width=420, title="aspects and characteristic surfaces",
                    xlabel="theta2", ylabel="theta3")
    for pl in asp.boundaries:
        fig.polyline(pl.points, "black", closed=pl.closed, wrap=wrap, width=1.2)
    for k, lines in sorted(A.characteristic.items()):
        for pl in lines:
            fig.polyline(pl.points, PALETTE[k % len(PALETTE)], closed=pl.closed, wrap=wrap, dash=True)
    dom = A.domain_labels()
    for d in A.domains:
        for pl in mask_outline(dom == d.id, gr):
            if len(pl.points) > 8:
                idx = len(pl.points) // 2
                fig.text(*pl.points[idx], f"D{d.id}")
                break
    paths.append(fig.save(out / "aspects.svg"))

    def t_outlines(fig):
        for t in A.t_regions:
            color = PALETTE[t.id % len(PALETTE)]
            for pl in mask_outline(t.mask, sec.grid):
                fig.polyline(pl.points, color, closed=pl.closed, dash=True, width=0.8)
            for pl in t.empty_lines:
                fig.polyline(pl.points, color, closed=pl.closed, width=2.0)

    paths.append(_section_svg(g, sec, out / "section.svg", "workspace section"))
    paths.append(_section_svg(g, sec, out / "t_regions.svg", "t-connected regions", t_outlines))
    sizes = np.bincount(asp.labels.ravel(), minlength=asp.count + 1)
    paths.append(write_csv(out / "aspects.csv", ["aspect", "det_sign", "cells"],
                           [[k, asp.signs[k], sizes[k]] for k in range(1, asp.count + 1)]))
    paths.append(write_csv(out / "regions.csv", ["region", "aspect", "image_region", "cells"],
                           [[r.id, r.aspect, r.image_region, r.size] for r in A.regions]))
    paths.append(write_csv(out / "domains.csv", ["domain", "aspect", "regions"],
                           [[d.id, d.aspect, ";".join(map(str, d.regions))] for d in A.domains]))
    paths.append(write_csv(out / "t_regions.csv", ["t_region", "domain", "cells", "empty_lines"],
                           [[t.id, t.domain, int(t.mask.sum()), len(t.empty_lines)] for t in A.t_regions]))
    R, Z = sec.grid.mesh()
    paths.append(write_csv(out / "section_counts.csv", ["rho", "z", "count"],
                           zip(R.ravel(), Z.ravel(), sec.counts.ravel())))
    _report(*paths)
    return EXIT_OK


def cmd_traj(args) -> int:
    g = _serial(args.robot)
    try:
        header, path = read_csv(Path(args.path))
    except (OSError, ValueError) as e:
        raise UsageError(f"cannot read path: {e}") from None
    if path.shape[1] not in (2, 3):
        raise UsageError("path CSV needs columns rho,z or x,y,z")
    start = JointConfig3R(*_angles(args.start, args.deg))
    section = at.workspace_section(g, at.section_grid(g, args.grid or at.DEFAULT_RESOLUTION), with_cusps=False)
    rep = at.check_trajectory(g, path, start, max_laps=args.repeat, section=section, tol=args.tol or 1e-10)
    print(f"verdict: {rep.verdict}")
    print(f"repeat count: {rep.repeat_label}")
    if rep.blocked_at is not None:
        print(f"blocked at arclength {rep.blocked_at:.6f} near boundary {rep.boundary_id}")
    print(f"min |det J|: {rep.min_abs_det:.6g}")
    print(f"max tracking error: {rep.max_tracking_error:.2e}")
    done = len(rep.laps) if rep.repeat_count == at.UNBOUNDED else int(rep.repeat_count)
    if done:
        print(f"joints after lap {done}: " + " ".join(f"{v:.6f}" for v in rep.laps[done - 1][-1]))
    out = _out_dir(args)
    rows = [[k, *q] for k, lap in enumerate(rep.laps) for q in lap]
    _report(write_csv(out / "joint_path.csv", ["lap", "theta1_rad", "theta2_rad", "theta3_rad"], rows))
    return EXIT_OK


# -- parallel commands ----------------------------------------------------------------


def _model(desc: RobotDescription):
    if desc.serial:
        raise UsageError("parallel commands need a parallel robot description")
    return desc.model()


def _aspect_grid(model, res: Optional[int]):
    return model.x_grid(res) if res else None


def _direct(model, q):
    if isinstance(model, par.Model3RPR):
        return par.direct_kinematics_3rpr(model, q)
    return par.direct_kinematics_multistart(model, q)


def cmd_par_dk(args) -> int:
    model = _model(args.robot)
    if isinstance(model, par.Model3PPPSOrientation):
        raise UsageError("the 3-PPPS model has no direct kinematics (singularity only)")
    q = np.asarray(args.values, dtype=float)
    if len(q) != len(model.q_names):
        raise UsageError(f"{args.robot.kind} needs {len(model.q_names)} joint values ({', '.join(model.q_names)})")
    modes = _direct(model, q)
    asp = par.aspects_parallel(model, _aspect_grid(model, args.grid))
    labels = [asp.label_at(np.array(m.X)) for m in modes]
    print(f"{len(modes)} assembly modes")
    for m, lab in zip(modes, labels):
        print(" ".join(f"{v:.6f}" for v in m.X) + f"  det A {m.det_a:.6g}  aspect {lab}")
    out = _out_dir(args)
    _report(write_csv(out / "modes.csv", [*model.x_names, "det_a", "aspect"],
                      [[*m.X, m.det_a, lab] for m, lab in zip(modes, labels)]))
    return EXIT_OK


def cmd_par_singularity(args) -> int:
    model = _model(args.robot)
    X = np.asarray(args.values, dtype=float)
    if len(X) != len(model.x_names):
        raise UsageError(f"{args.robot.kind} needs {len(model.x_names)} pose values ({', '.join(model.x_names)})")
    sv = par.parallel_singularity(model, X)
    print(f"det A = {sv.det_a:.10g}")
    for name, v in sv.factors.items():
        print(f"{name} = {float(v):.10g}")
    if not isinstance(model, par.Model3PPPSOrientation):
        try:
            print(f"cuspidal configuration: {par.cuspidal_configuration_check(model, X)}")
        except ValueError:
            pass
    return EXIT_OK


def _rpr3(desc):
    model = _model(desc)
    if not isinstance(model, par.Model3RPR):
        raise UsageError("this subcommand needs an rpr3 robot")
    return model


def _joint_section(model, args):
    grid = None
    if args.grid:
        lo, hi = model.rho_min, model.rho_max
        grid = GridSpec([(lo, hi), (lo, hi)], args.grid, CLAMP)
    return par.joint_section_analysis(model, args.rho1, grid)


def cmd_par_section(args) -> int:
    model = _rpr3(args.robot)
    sec = _joint_section(model, args)
    print(f"rho1 = {args.rho1:g}")
    print("mode counts: " + " ".join(str(c) for c in sorted(sec.count_values())))
    print(f"{len(sec.cusps)} cusps")
    for c in sec.cusps:
        print(f"rho2 {c.q[0]:.6f}  rho3 {c.q[1]:.6f}")
    out = _out_dir(args)
    (lo, hi) = model.rho_min, model.rho_max
    fig = SvgFigure((lo, hi), (lo, hi), width=420, title=f"joint-space section rho1 = {args.rho1:g}",
                    xlabel="rho2", ylabel="rho3")
    for pl in sec.singular:
        fig.polyline(pl.points, "black", closed=pl.closed)
    for c in sec.cusps:
        fig.marker(c.q[0], c.q[1], "#d62728")
    R2, R3 = sec.grid.mesh()
    paths = [
        fig.save(out / "section.svg"),
        write_csv(out / "section_counts.csv", ["rho2", "rho3", "modes"], zip(R2.ravel(), R3.ravel(), sec.counts.ravel())),
        write_csv(out / "section_singular.csv", ["curve", "rho2", "rho3"],
                  [[k, *p] for k, pl in enumerate(sec.singular) for p in pl.points]),
        write_csv(out / "section_cusps.csv", ["rho2", "rho3", "x", "y", "phi_rad"], [[*c.q, *c.X] for c in sec.cusps]),
    ]
    _report(*paths)
    return EXIT_OK


def cmd_par_loop(args) -> int:
    model = _rpr3(args.robot)
    sec = _joint_section(model, args)
    if not 0 <= args.cusp < len(sec.cusps):
        raise UsageError(f"cusp index must be in 0..{len(sec.cusps) - 1}")
    loop = par.cusp_loop(sec, args.start, args.cusp, args.margin)
    modes = par.direct_kinematics_3rpr(model, loop[0])
    if not 0 <= args.mode < len(modes):
        raise UsageError(f"mode index must be in 0..{len(modes) - 1}")
    X0 = np.array(modes[args.mode].X)
    rep = par.track_assembly(model, loop, X0, tol=args.tol or 1e-10)
    print("loop corners: " + "  ".join("(" + ", ".join(f"{v:g}" for v in p[1:]) + ")" for p in loop))
    print("start mode: " + " ".join(f"{v:.6f}" for v in X0))
    print(f"blocked: {rep.blocked}")
    if rep.X_end is not None:
        print("end mode: " + " ".join(f"{v:.6f}" for v in rep.X_end))
    print(f"mode changed: {rep.mode_changed}")
    print(f"det A sign constant: {rep.sign_constant}  min |det A|: {rep.min_abs_det:.6g}")
    out = _out_dir(args)
    _report(write_csv(out / "loop_path.csv", ["x", "y", "phi_rad"], rep.path))
    return EXIT_OK


def cmd_par_aspects(args) -> int:
    model = _model(args.robot)
    asp = par.aspects_parallel(model, _aspect_grid(model, args.grid))
    print(f"aspects: {asp.count}")
    for k, n in asp.sizes().items():
        print(f"aspect {k}: det sign {asp.signs[k]:+d}, {n} cells")
    out = _out_dir(args)
    paths = []
    if args.samples:
        if isinstance(model, par.Model3PPPSOrientation):
            raise UsageError("the 3-PPPS model has no direct kinematics to sample")
        rng = np.random.default_rng(args.seed)
        lo = np.array([a for a, _ in model.x_box()])
        hi = np.array([b for _, b in model.x_box()])
        hist = Counter()
        rows = []
        while sum(hist.values()) < args.samples:
            X = rng.uniform(lo, hi)
            if not model.feasible(X[None])[0]:
                continue
            q = model.inverse_kinematics(X)
            modes = _direct(model, q)
            labs = Counter(asp.label_at(np.array(m.X)) for m in modes)
            most = max(labs.values()) if labs else 0
            hist[(len(modes), most)] += 1
            rows.append([*q, len(modes), most])
        print("sampled joint values (modes, most in one aspect): " +
              "  ".join(f"{k}: {v}" for k, v in sorted(hist.items())))
        paths.append(write_csv(out / "aspect_samples.csv", [*model.q_names, "modes", "max_per_aspect"], rows))
    if asp.grid.ndim == 2:
        gr = asp.grid
        fig = SvgFigure(gr.ranges[0], gr.ranges[1], width=420, title="aspects",
                        xlabel=model.x_names[0], ylabel=model.x_names[1])
        for k in range(1, asp.count + 1):
            for pl in mask_outline(asp.labels == k, gr):
                fig.polyline(pl.points, PALETTE[k % len(PALETTE)], closed=pl.closed, wrap=_torus_wrap(gr))
        paths.append(fig.save(out / "aspects.svg"))
    sizes = asp.sizes()
    paths.append(write_csv(out / "aspects.csv", ["aspect", "det_sign", "cells"],
                           [[k, asp.signs[k], sizes[k]] for k in range(1, asp.count + 1)]))
    _report(*paths)
    return EXIT_OK


# -- parser ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--grid", type=int, help="grid resolution per axis (each command's default otherwise)")
    common.add_argument("--tol", type=float, help="solver tolerance (each command's default otherwise)")
    common.add_argument("--seed", type=int, default=0, help="random seed for sampling (default 0)")
    common.add_argument("--out", help=f"output directory (default ${OUT_ENV} or the current directory)")

    p = _Parser(prog="cuspkit", description="Cuspidality analysis of serial 3R and parallel robots.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("fk", parents=[common], help="forward kinematics of a serial robot")
    s.add_argument("robot")
    s.add_argument("joints", type=float, nargs=3, metavar="THETA")
    s.add_argument("--deg", action="store_true", help="joint values in degrees")
    s.set_defaults(func=cmd_fk)

    s = sub.add_parser("ik", parents=[common], help="inverse kinematics of a serial robot")
    s.add_argument("robot")
    s.add_argument("pose", type=float, nargs=3, metavar="XYZ")
    s.set_defaults(func=cmd_ik)

    s = sub.add_parser("cusps", parents=[common], help="cusp points of the workspace section")
    s.add_argument("robot")
    s.add_argument("--seeds", type=int, default=0, help="Newton seed grid per axis (default 64)")
    s.set_defaults(func=cmd_cusps)

    s = sub.add_parser("classify", parents=[common], help="cuspidal or not, with the deciding evidence")
    s.add_argument("robot")
    s.set_defaults(func=cmd_classify)

    s = sub.add_parser("atlas", parents=[common], help="aspects, uniqueness domains and t-connected regions")
    s.add_argument("robot")
    s.set_defaults(func=cmd_atlas)

    s = sub.add_parser("traj", parents=[common], help="feasibility of a workspace path")
    s.add_argument("robot")
    s.add_argument("path", help="CSV with columns rho,z or x,y,z")
    s.add_argument("--start", type=float, nargs=3, required=True, metavar="THETA")
    s.add_argument("--deg", action="store_true", help="start joints in degrees")
    s.add_argument("--repeat", type=int, default=6, help="maximum laps of a closed path (default 6)")
    s.set_defaults(func=cmd_traj)

    s = sub.add_parser("parallel", help="parallel robot analyses")
    psub = s.add_subparsers(dest="action", required=True, parser_class=_Parser)
    a = psub.add_parser("dk", parents=[common], help="assembly modes at joint values")
    a.add_argument("robot")
    a.add_argument("values", type=float, nargs="+", metavar="Q")
    a.set_defaults(func=cmd_par_dk)
    a = psub.add_parser("singularity", parents=[common], help="det A and its factors at a pose")
    a.add_argument("robot")
    a.add_argument("values", type=float, nargs="+", metavar="X")
    a.set_defaults(func=cmd_par_singularity)
    a = psub.add_parser("section", parents=[common], help="3-RPR joint-space section at fixed rho1")
    a.add_argument("robot")
    a.add_argument("--rho1", type=float, required=True)
    a.set_defaults(func=cmd_par_section)
    a = psub.add_parser("loop", parents=[common], help="3-RPR assembly-mode change around a section cusp")
    a.add_argument("robot")
    a.add_argument("--rho1", type=float, required=True)
    a.add_argument("--start", type=float, nargs=2, required=True, metavar="RHO")
    a.add_argument("--cusp", type=int, required=True, help="index into the section's cusp list")
    a.add_argument("--mode", type=int, default=0, help="index of the starting assembly mode")
    a.add_argument("--margin", type=float, default=0.5)
    a.set_defaults(func=cmd_par_loop)
    a = psub.add_parser("aspects", parents=[common], help="aspects of the workspace")
    a.add_argument("robot")
    a.add_argument("--samples", type=int, default=0, help="random joint values for the mode/aspect histogram")
    a.set_defaults(func=cmd_par_aspects)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        # argparse exits on --help and on bad arguments; report the status instead
        return int(e.code or 0)
    try:
        args.robot = load_robot(args.robot)
        return args.func(args)
    except (UsageError, RobotFileError) as e:
        print(f"cuspkit: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (DegeneratePolynomialError, np.linalg.LinAlgError, ArithmeticError, RuntimeError) as e:
        print(f"cuspkit: numeric failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as e:
        print(f"cuspkit: error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
