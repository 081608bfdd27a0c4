"""Command-line entry point: ``helmtl <subcommand> [flags]``."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import experiments as ex
from . import krylov


def _floats(s: str):
    return tuple(float(x) for x in s.split(",") if x)


def _methods(s: str):
    # split on commas that are not inside MK(...)
    out, depth, cur = [], 0, ""
    for ch in s:
        depth += ch == "("
        depth -= ch == ")"
        if ch == "," and depth == 0:
            out.append(cur.strip())
            cur = ""
        else:
            cur += ch
    if cur.strip():
        out.append(cur.strip())
    return tuple(out)


def _common(p: argparse.ArgumentParser, experiment: str | None = None):
    p.add_argument("--k", type=_floats, default=(), help="comma-separated wavenumbers")
    p.add_argument("--eps-beta", type=_floats, default=(), help="shift rule eps = beta k^2")
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--max-iter", type=int, default=200)
    p.add_argument("--out", default="results")
    p.add_argument("--full", action="store_true", help="include the large wavenumbers")
    p.add_argument("--inner-product", choices=("euclidean", "mass-inverse"), default="euclidean")
    if experiment != "fov-1d":
        p.add_argument("--alpha", type=float, default=None)
        p.add_argument("--methods", type=_methods, default=())
        p.add_argument("--no-check", action="store_true",
                       help="skip the algebraic identity check on the smallest k")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="helmtl", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fov", help="1D field-of-values experiment")
    _common(p, "fov-1d")
    p.add_argument("--angles", type=int, default=256)
    p.add_argument("--coarse-rule", choices=("k2", "k32"), default="k2")

    for name in ("table-csl-tl", "table-mk", "wedge"):
        _common(sub.add_parser(name, help=f"{name} iteration table"), name)

    p = sub.add_parser("export", help="write MatrixMarket files for one problem")
    p.add_argument("--k", type=float, required=True)
    p.add_argument("--eps-beta", type=float, default=1.0)
    p.add_argument("--dim", type=int, choices=(1, 2), default=1)
    p.add_argument("--size", type=int, default=8,
                   help="coarse interior points (1D) or points per side (2D)")
    p.add_argument("--steps", type=int, default=1, help="refinements between coarse and fine")
    p.add_argument("--wedge", action="store_true")
    p.add_argument("--out", default="export")

    p = sub.add_parser("solve", help="one preconditioned solve on the unit square or interval")
    p.add_argument("--k", type=float, required=True)
    p.add_argument("--eps-beta", type=float, default=1.0)
    p.add_argument("--dim", type=int, choices=(1, 2), default=2)
    p.add_argument("--alpha", type=float, default=0.6)
    p.add_argument("--coarse-rule", choices=("k2", "k32"), default="k2")
    p.add_argument("--method", default="TL-1")
    p.add_argument("--wedge", action="store_true")
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--max-iter", type=int, default=200)
    p.add_argument("--inner-product", choices=("euclidean", "mass-inverse"), default="euclidean")
    p.add_argument("--history", default=None, help="write the residual history CSV here")
    return parser


def _spec(args, experiment: str) -> ex.ExperimentSpec:
    kw = dict(betas=args.eps_beta, tol=args.tol, max_iter=args.max_iter, out_dir=args.out,
              inner_product=args.inner_product)
    if args.k:
        kw["ks"] = args.k
    if experiment == "fov-1d":
        kw.update(n_angles=args.angles, coarse_rule=args.coarse_rule)
    else:
        kw.update(methods=args.methods, check_identities=not args.no_check)
        if args.alpha is not None:
            kw["alpha"] = args.alpha
    return ex.ExperimentSpec.default(experiment, full=args.full, **kw)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(message)s")
    try:
        if args.command == "fov":
            results = ex.run_fov_experiment(_spec(args, "fov-1d"))
            print(ex.format_table([r.row for r in results]))
            for r in results:
                print(f"k={r.k:g} eps={r.beta:g}k^2 {r.matrix}: nu={r.summary.nu:.4f} "
                      f"max|z|={r.summary.max_modulus:.4f}")
        elif args.command in ("table-csl-tl", "table-mk", "wedge"):
            rows = ex.run_table(_spec(args, args.command))
            print(ex.format_table(rows))
        elif args.command == "export":
            m = ex.export_system(args.out, args.k, args.eps_beta, args.dim, args.size,
                                 args.steps, args.wedge)
            print(f"wrote {len(m['files'])} matrices to {args.out} "
                  f"(n_fine={m['n_fine']}, n_coarse={m['n_coarse']})")
        elif args.command == "solve":
            if args.dim == 1:
                levels = ex.interval_levels(args.k, args.coarse_rule)
            else:
                levels = ex.square_levels(args.k, args.alpha, wedge=args.wedge)
            _, rep = ex.solve_with(levels, args.method, args.eps_beta, args.tol, args.max_iter,
                                   args.inner_product)
            status = "converged" if rep.converged else "not converged"
            print(f"n={levels.A[0].shape[0]} {args.method}: {rep.iterations} iterations, "
                  f"{status}, residual {rep.final_residual:.3e}, {rep.wall_time:.2f}s")
            if args.history:
                Path(args.history).parent.mkdir(parents=True, exist_ok=True)
                krylov.write_history_csv(args.history, rep)
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
