"""Command-line interface.

Exit codes: 0 success, 1 numerical/assertion failure, 2 usage or I/O error.
The RNF_THREADS environment variable caps BLAS/OpenMP parallelism and must be
honored before numpy loads, hence the setup at import time.
"""

from __future__ import annotations

import os


def _cap_threads() -> None:
    n = os.environ.get("RNF_THREADS")
    if n:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                    "MKL_NUM_THREADS", "NUMEXPR_NUM_THREADS"):
            os.environ.setdefault(var, n)


_cap_threads()

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from . import io as rio
from .asymptotics import SmoothProfile, residual_order_study
from .direct import MAX_ORACLE_PIXELS, compare_equivalence
from .dynamics import SolverError, run
from .kernels import KernelSpec
from .plots import (save_segmentation_figure, save_shock_study_figure,
                    save_trajectory_figure)
from .rearrange import decreasing_rearrangement, quantize, reconstruct
from .segmentation import PipelineError, dice, segment_pipeline

EXIT_OK = 0
EXIT_NUMERICAL = 1
EXIT_USAGE = 2

_PROFILES = {
    "linear": dict(value=lambda s: 1.0 - s,
                   slope=lambda s: -np.ones_like(np.asarray(s, dtype=float)),
                   curvature=lambda s: np.zeros_like(np.asarray(s, dtype=float))),
    "cubic": dict(value=lambda s: 1.0 - s - 0.3 * np.asarray(s, dtype=float) ** 3,
                  slope=lambda s: -1.0 - 0.9 * np.asarray(s, dtype=float) ** 2,
                  curvature=lambda s: -1.8 * np.asarray(s, dtype=float)),
}


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    return rio.read_config(path)


def _float_list(text: str) -> list[float]:
    try:
        return [float(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated floats: {text!r}")


def cmd_filter(args) -> int:
    cfg = _load_config(args.config)
    image = rio.read_pgm(args.input)
    dyn = float(image.max() - image.min())
    spec = rio.kernel_from_config(cfg, dynamic_range=dyn, h=args.h)
    solver = rio.solver_from_config(cfg, lam=args.lam, max_steps=args.max_steps,
                                    fp_tol=args.tol)
    q = args.q if args.q is not None else cfg.get("pipeline.q", 256)

    img = quantize(image, max_levels=q)
    prof = decreasing_rearrangement(img)
    traj = run(prof, solver, spec)
    filtered = reconstruct(img, traj.final_levels)
    rio.write_pgm(filtered, args.out, maxval=args.maxval)
    if args.trajectory:
        rio.export_trajectory(traj, args.trajectory, fmt="csv")
        save_trajectory_figure(traj, Path(args.trajectory).with_suffix(".png"))
    print(f"filtered {args.input}: Q={img.q}, steps={traj.steps[-1]}, "
          f"termination={traj.termination}")
    return EXIT_OK


def cmd_verify_equivalence(args) -> int:
    cfg = _load_config(args.config)
    image = rio.read_pgm(args.input)
    if image.size > MAX_ORACLE_PIXELS:
        print(f"error: image exceeds the {MAX_ORACLE_PIXELS}-pixel oracle limit",
              file=sys.stderr)
        return EXIT_USAGE
    dyn = float(image.max() - image.min())
    spec = rio.kernel_from_config(cfg, dynamic_range=dyn, h=args.h)
    lam = args.lam if args.lam is not None else cfg.get("solver.lambda", 0.0)
    report = compare_equivalence(image, lam, spec, args.tau, args.steps)
    print(f"max_abs_gap={report.max_abs_gap:.3e} "
          f"level_set_violations={report.level_set_violations} "
          f"steps={report.n_steps} Q={report.q}")
    return EXIT_OK if report.passed() else EXIT_NUMERICAL


def cmd_shock_study(args) -> int:
    prof = SmoothProfile.from_callables(omega=1.0, **_PROFILES[args.profile])
    rows_by_s = []
    for s in args.s_list:
        rows = residual_order_study(prof, s, args.h_list, constants=args.constants)
        rows_by_s.append((s, rows))
        for row in rows:
            if not row.conclusive:
                print(f"note: s={s} h={row.h}: residual within quadrature "
                      f"noise, order inconclusive", file=sys.stderr)

    multi = len(args.s_list) > 1
    with open(args.out, "w") as fh:
        head = "h,I,ktilde_term,antidiffusion_term,residual,observed_order"
        fh.write(("s," + head if multi else head) + "\n")
        for s, rows in rows_by_s:
            for r in rows:
                fields = [f"{r.h:.17g}", f"{r.integral:.17g}", f"{r.ktilde_term:.17g}",
                          f"{r.antidiffusion_term:.17g}", f"{r.residual:.17g}",
                          f"{r.observed_order:.17g}"]
                if multi:
                    fields.insert(0, f"{s:.17g}")
                fh.write(",".join(fields) + "\n")
    save_shock_study_figure(rows_by_s[0][1], Path(args.out).with_suffix(".png"))
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_segment(args) -> int:
    cfg = _load_config(args.config)
    image = rio.read_pgm(args.input)
    solver = rio.solver_from_config(cfg, max_steps=args.max_steps, fp_tol=args.tol)
    result = segment_pipeline(
        image,
        h_background=args.h_background if args.h_background is not None
        else cfg.get("pipeline.h_background", 5.0),
        h_nucleus=args.h_nucleus if args.h_nucleus is not None
        else cfg.get("pipeline.h_nucleus", 25.0),
        max_levels=args.q if args.q is not None else cfg.get("pipeline.q", 256),
        gap_tol=cfg.get("pipeline.gap_tol"),
        config=solver)
    prefix = args.out
    for name, mask in (("background", result.background),
                       ("nucleus", result.nucleus),
                       ("cytoplasm", result.cytoplasm)):
        rio.mask_to_pgm(mask, f"{prefix}_{name}.pgm")
    save_segmentation_figure(image, result, f"{prefix}_overview.png")
    print(f"wrote {prefix}_{{background,nucleus,cytoplasm}}.pgm")
    return EXIT_OK


def cmd_dice(args) -> int:
    a = rio.mask_from_pgm(args.mask_a)
    b = rio.mask_from_pgm(args.mask_b)
    if a.shape != b.shape:
        print("error: mask shapes differ", file=sys.stderr)
        return EXIT_USAGE
    print(f"{dice(a, b):.4f}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rnf",
        description="Nonlocal neighborhood filtering via decreasing rearrangement")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="flat key=value config file")

    p = sub.add_parser("filter", help="denoise/flatten an image")
    add_common(p)
    p.add_argument("input")
    p.add_argument("--out", required=True)
    p.add_argument("--h", type=float, default=None, help="kernel window size")
    p.add_argument("--lambda", dest="lam", type=float, default=None)
    p.add_argument("--q", type=int, default=None, help="quantization levels")
    p.add_argument("--max-steps", type=int, default=None)
    p.add_argument("--tol", type=float, default=None, help="fixed point tolerance")
    p.add_argument("--maxval", type=int, default=255)
    p.add_argument("--trajectory", help="write trajectory CSV (+ PNG figure)")
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("verify-equivalence",
                       help="direct vs rearranged explicit Euler comparison")
    add_common(p)
    p.add_argument("input")
    p.add_argument("--h", type=float, default=None)
    p.add_argument("--lambda", dest="lam", type=float, default=None)
    p.add_argument("--tau", type=float, default=1e-3)
    p.add_argument("--steps", type=int, default=100)
    p.set_defaults(func=cmd_verify_equivalence)

    p = sub.add_parser("shock-study", help="window-size expansion order study")
    p.add_argument("--profile", choices=sorted(_PROFILES), default="cubic")
    p.add_argument("--h-list", type=_float_list, default=[0.2, 0.1, 0.05, 0.025])
    p.add_argument("--s-list", type=_float_list, default=[0.5])
    p.add_argument("--constants", choices=["paper", "proof"], default="paper")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_shock_study)

    p = sub.add_parser("segment", help="three-region segmentation")
    add_common(p)
    p.add_argument("input")
    p.add_argument("--out", required=True, help="output path prefix")
    p.add_argument("--h-background", type=float, default=None)
    p.add_argument("--h-nucleus", type=float, default=None)
    p.add_argument("--q", type=int, default=None)
    p.add_argument("--max-steps", type=int, default=None)
    p.add_argument("--tol", type=float, default=None)
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("dice", help="Dice coefficient of two mask PGMs")
    p.add_argument("mask_a")
    p.add_argument("mask_b")
    p.set_defaults(func=cmd_dice)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (FileNotFoundError, IsADirectoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (rio.PgmError, rio.ConfigError, ValueError, AssertionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SolverError, PipelineError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
