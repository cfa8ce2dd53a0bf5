"""Command-line interface: ``fcl info|spray|check|verify|geodesic <file>``.

Exit codes: 0 success or PASS, 1 FAIL, 2 usage or validation error,
3 numerical domain error.
"""
from __future__ import annotations

import argparse
import csv
import itertools
import math
import os
import sys

import numpy as np

from . import metricfile, report
from .curvature import SampleConfig, constant_curvature_check, geodesic_integrate
from .errors import DomainError, FclError, ValidationError
from .identities import run_identity_suite
from .kropina import (
    KropinaMetric,
    expansion_diagnostics,
    spray_alpha_beta,
    spray_from_lagrangian,
    to_hw,
)

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_DOMAIN = 0, 1, 2, 3
HOMOGENEITY_FACTOR = 3.0
CROSS_CHECK_TOL = 1e-8


def _fmt(v) -> str:
    return format(float(v), ".12g")


def _vec(v) -> str:
    return "[" + ", ".join(_fmt(c) for c in np.ravel(v)) + "]"


def _mat(a) -> str:
    return "[" + ", ".join(_vec(row) for row in np.atleast_2d(a)) + "]"


def _point(tokens: list[str], n: int, name: str) -> np.ndarray:
    parts = [p for tok in tokens for p in tok.split(",") if p.strip()]
    try:
        values = np.array([float(p) for p in parts])
    except ValueError:
        raise ValidationError(f"{name} must be numbers, got {' '.join(tokens)!r}") from None
    if values.shape != (n,):
        raise ValidationError(f"{name} needs {n} components, got {values.size}")
    if not np.all(np.isfinite(values)):
        raise ValidationError(f"{name} must be finite")
    return values


def _rel(a, b) -> float:
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    scale = max(1.0, float(np.max(np.abs(a))), float(np.max(np.abs(b))))
    return float(np.max(np.abs(a - b))) / scale


def _verdict(err: float) -> str:
    return "ok" if err < CROSS_CHECK_TOL else "MISMATCH"


# -- commands ----------------------------------------------------------------

def cmd_info(args, mf: metricfile.MetricFile, out) -> int:
    n = mf.dimension
    mode = "riemannian" if mf.options.riemannian else "kropina"
    print(f"file: {args.file}", file=out)
    coords = f"  coords: {', '.join(mf.coords)}" if mf.coords else ""
    print(f"n={n}{coords}", file=out)
    print(f"mode: {mode}", file=out)
    if mf.m is not None:
        print(f"m={mf.m:g}", file=out)
    for i in range(n):
        for j in range(i, n):
            print(f"  a{i + 1}{j + 1} = {mf.entry(i, j)}", file=out)
    for i, v in enumerate(mf.b):
        print(f"  b{i + 1} = {v}", file=out)
    for i, (lo, hi) in enumerate(mf.domain):
        print(f"  x{i + 1} in [{lo:g}, {hi:g}]", file=out)
    if mf.b:
        per_axis = max(2, min(5, int(4000 ** (1.0 / n))))
        metric, oneform = mf.metric_field(), mf.oneform_field()
        axes = [np.linspace(lo, hi, per_axis) for lo, hi in mf.domain]
        values = []
        for x in itertools.product(*axes):
            b = oneform.values(x)
            values.append(float(b @ np.linalg.solve(metric.values(x), b)))
        lo, hi = min(values), max(values)
        grid = "x".join([str(per_axis)] * n)
        if math.isclose(lo, hi, rel_tol=1e-12, abs_tol=1e-300):
            print(f"b^2 = {lo:.12g} everywhere on the {grid} grid", file=out)
        else:
            print(f"b^2 in [{lo:.12g}, {hi:.12g}] on the {grid} grid", file=out)
    return EXIT_OK


def cmd_spray(args, mf, out) -> int:
    space = mf.space()
    n = mf.dimension
    x = _point(args.x, n, "--x")
    y = _point(args.y, n, "--y")
    print(f"x = {_vec(x)}", file=out)
    print(f"y = {_vec(y)}", file=out)
    lam = HOMOGENEITY_FACTOR
    if not isinstance(space, KropinaMetric):
        G = space.spray(x, y)
        print(f"F = {_fmt(space.F(x, y))}", file=out)
        print(f"G = {_vec(G)}", file=out)
        err = _rel(space.spray(x, lam * y), lam ** 2 * G)
        print(f"homogeneity (lambda={lam:g}): rel err {err:.3e} {_verdict(err)}", file=out)
        return EXIT_OK

    sd = spray_alpha_beta(space, x, y)
    hw = to_hw(space, x, y)
    alpha, beta, _ = space.alpha_beta(x, y)
    print(f"F = {_fmt(space.F(x, y))}  alpha = {_fmt(alpha)}  beta = {_fmt(beta)}  "
          f"s = {_fmt(beta / alpha)}", file=out)
    print(f"G = {_vec(sd.G)}", file=out)
    print(f"gamma00 (alpha) = {_vec(sd.gamma00_alpha)}", file=out)
    print(f"gamma00 (h) = {_vec(sd.gamma00_h)}", file=out)
    print(f"Phi = {_vec(sd.Phi)}", file=out)
    print(f"k = {_fmt(hw.k.val)}", file=out)
    print(f"h = {_mat(hw.h)}", file=out)
    print(f"W = {_vec(hw.W)}  |W|_h = {_fmt(math.sqrt(hw.W @ hw.h_inv @ hw.W))}", file=out)
    print(f"pi = {_fmt(hw.pi_const)}  epsilon = {_fmt(hw.eps_const)}  "
          f"sigma0 = {_fmt(hw.sigma0)}  sigma0 (alt) = {_fmt(hw.sigma0_alt)}  "
          f"sigma1 = {_fmt(hw.sigma1)}", file=out)
    err = _rel(space.spray(x, lam * y), lam ** 2 * sd.G)
    print(f"homogeneity (lambda={lam:g}): rel err {err:.3e} {_verdict(err)}", file=out)
    err = _rel(spray_alpha_beta(space, x, y, route="closed").G, sd.G)
    print(f"closed-form profile cross-check: rel err {err:.3e} {_verdict(err)}", file=out)
    err = _rel(spray_from_lagrangian(space, x, y), sd.G)
    print(f"Euler-Lagrange cross-check: rel err {err:.3e} {_verdict(err)}", file=out)
    if abs(space.m - 1.0) < 1e-12:
        row = next(d for d in expansion_diagnostics(space, x, y)
                   if d.name.startswith("m=1"))
        print(f"m=1 closed-form cross-check: rel err {row.residual:.3e} "
              f"{_verdict(row.residual)}", file=out)
    return EXIT_OK


def cmd_check(args, mf, out) -> int:
    space = mf.space()
    opts = mf.options
    cfg = SampleConfig(
        box=mf.domain,
        samples=args.samples if args.samples is not None else opts.samples,
        seed=args.seed,
        tol_residual=args.tol_residual if args.tol_residual is not None else opts.tol_residual,
        tol_k=args.tol_k if args.tol_k is not None else opts.tol_k,
        s_window=opts.s_window,
        threads=args.threads,
    )
    rep = constant_curvature_check(space, cfg)
    doc = report.check_report(
        rep,
        input_sha256=metricfile.file_digest(args.file),
        mode="riemannian" if opts.riemannian else "kropina",
        m=mf.m,
        eps_beta=None if opts.riemannian else opts.eps_beta,
    )
    text = report.dumps(doc)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        print(f"{rep.verdict}: K_median = {rep.K_median:.12g}, K_spread = {rep.K_spread:.3e}, "
              f"max residual = {rep.max_residual:.3e}", file=out)
    else:
        out.write(text)
    return EXIT_OK if rep.passed else EXIT_FAIL


def cmd_verify(args, mf, out) -> int:
    rows = run_identity_suite(mf.space(), mf.domain, samples=args.samples, seed=args.seed)
    width = max(len(r.name) for r in rows)
    print(f"{'identity':<{width}}  {'kind':<10}  {'max residual':>12}  {'tol':>8}  status",
          file=out)
    for r in rows:
        tol = "-" if r.tol is None else f"{r.tol:.0e}"
        print(f"{r.name:<{width}}  {r.kind:<10}  {r.residual:12.3e}  {tol:>8}  {r.status}",
              file=out)
    failed = [r for r in rows if r.status == "FAIL"]
    print(f"{len(rows)} rows, {len(failed)} failed; diagnostic rows are report-only", file=out)
    return EXIT_FAIL if failed else EXIT_OK


def cmd_geodesic(args, mf, out) -> int:
    space = mf.space()
    n = mf.dimension
    x0 = _point(args.x0, n, "--x0")
    y0 = _point(args.y0, n, "--y0")
    if args.dt <= 0 or args.t_end <= 0:
        raise ValidationError("--dt and --t-end must be positive")
    space.check_direction(x0, y0)
    traj = geodesic_integrate(space, x0, y0, args.t_end, args.dt,
                              box=None if args.ignore_box else mf.domain, every=args.every)
    header = (["t"] + [f"x{i + 1}" for i in range(n)] + [f"y{i + 1}" for i in range(n)]
              + ["F"])
    fh = open(args.out, "w", encoding="utf-8", newline="") if args.out else out
    try:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for t, x, y, F in zip(traj.t, traj.x, traj.y, traj.F):
            writer.writerow([format(v, ".17g") for v in (t, *x, *y, F)])
    finally:
        if args.out:
            fh.close()
    summary = f"F drift: {traj.F_drift:.3e} over t = {traj.t[-1]:.6g}"
    if traj.truncated:
        summary += f" (truncated: {traj.reason})"
    print(summary, file=out if args.out else sys.stderr)
    return EXIT_OK


# -- argument parsing ------------------------------------------------------------

def _threads_default() -> int:
    raw = os.environ.get("FCL_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def _positive_float(text: str) -> float:
    v = float(text)
    if not v > 0 or not math.isfinite(v):
        raise argparse.ArgumentTypeError("must be a positive number")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fcl",
        description="Generalized Kropina metrics: sprays, flag curvature and identity checks.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("info", help="summarize a metric file")
    p.add_argument("file")

    p = sub.add_parser("spray", help="spray and (h, W) data at one point")
    p.add_argument("file")
    p.add_argument("--x", nargs="+", required=True, help="base point, e.g. --x 0.5,0.1")
    p.add_argument("--y", nargs="+", required=True, help="direction")

    p = sub.add_parser("check", help="sampled constant flag curvature verdict (JSON)")
    p.add_argument("file")
    p.add_argument("--samples", type=_positive_int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol-residual", type=_positive_float)
    p.add_argument("--tol-k", type=_positive_float)
    p.add_argument("--threads", type=_positive_int, default=_threads_default(),
                   help="worker threads (default: $FCL_THREADS or 1)")
    p.add_argument("--out", help="write the JSON report here instead of stdout")

    p = sub.add_parser("verify", help="cross-identity suite")
    p.add_argument("file")
    p.add_argument("--samples", type=_positive_int, default=20)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("geodesic", help="integrate a geodesic, CSV output")
    p.add_argument("file")
    p.add_argument("--x0", nargs="+", required=True)
    p.add_argument("--y0", nargs="+", required=True)
    p.add_argument("--t-end", type=float, default=1.0)
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--every", type=_positive_int, default=1, help="output every k-th step")
    p.add_argument("--ignore-box", action="store_true",
                   help="do not stop when leaving the [domain] box")
    p.add_argument("--out", help="CSV path (default stdout; summary then goes to stderr)")
    return parser


COMMANDS = {
    "info": cmd_info,
    "spray": cmd_spray,
    "check": cmd_check,
    "verify": cmd_verify,
    "geodesic": cmd_geodesic,
}


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    try:
        mf = metricfile.load(args.file)
        return COMMANDS[args.command](args, mf, out)
    except (OSError, UnicodeDecodeError) as exc:
        print(f"fcl: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValidationError as exc:
        print(f"fcl: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DomainError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"fcl: numerical domain error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except FclError as exc:  # pragma: no cover - every subclass is handled above
        print(f"fcl: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
