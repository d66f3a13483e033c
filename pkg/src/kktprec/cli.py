"""Command-line driver: ``kktprec --beta 1e-2,1e-4 --level 2,3,4 --precond new,bct``.

Exit codes: 0 success, 1 verification failure, 2 configuration error.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .bench import DEFAULT_BETAS, DEFAULT_LEVELS, ExperimentConfig, render, run_matrix, verify_all
from .fem import RHS_VARIANTS, build_problem
from .krylov import ConfigurationError
from .precond import BLOCK_KINDS, PreconditionerKind, SubSolveMode

EXIT_OK, EXIT_VERIFY, EXIT_CONFIG = 0, 1, 2


def _floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(t) for t in text.split(",") if t.strip())
    except ValueError as err:
        raise argparse.ArgumentTypeError(str(err)) from None


def _ints(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(t) for t in text.split(",") if t.strip())
    except ValueError as err:
        raise argparse.ArgumentTypeError(str(err)) from None


def _kinds(text: str) -> tuple[PreconditionerKind, ...]:
    if text.strip().lower() == "all":
        return BLOCK_KINDS
    try:
        return tuple(PreconditionerKind.parse(t) for t in text.split(",") if t.strip())
    except ValueError as err:
        raise argparse.ArgumentTypeError(str(err)) from None


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="kktprec", description=__doc__.splitlines()[0])
    p.add_argument("--beta", type=_floats, default=DEFAULT_BETAS, help="comma list of beta values")
    p.add_argument("--level", type=_ints, default=DEFAULT_LEVELS, help="comma list of grid levels")
    p.add_argument("--precond", type=_kinds, default=(PreconditionerKind.NEW,),
                   help="comma list of preconditioner kinds, or 'all'")
    p.add_argument("--solver", choices=("gmres", "fgmres", "chebyshev"), default=None,
                   help="default: gmres for exact mode, fgmres for pcg_ict")
    p.add_argument("--mode", choices=("exact", "pcg_ict"), default="exact")
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--maxit-cap", type=int, default=500)
    p.add_argument("--inner-tol", type=float, default=1e-3)
    p.add_argument("--inner-cap", type=int, default=None, help="default: min(m, 20)")
    p.add_argument("--droptol", type=float, default=0.01)
    p.add_argument("--rhs", choices=RHS_VARIANTS, default="galerkin")
    p.add_argument("--format", choices=("markdown", "csv"), default="markdown")
    p.add_argument("--out", type=Path, default=None, help="write the table here instead of stdout")
    p.add_argument("--residuals", type=Path, default=None,
                   help="directory for per-run residual-history CSV files")
    p.add_argument("--dump-spectrum", choices=("original", "preconditioned"), default=None,
                   help="write eigenvalues for the first (beta, level) and exit")
    p.add_argument("--export-system", type=Path, default=None,
                   help="write M, K (Matrix Market) and b, d for the first (beta, level) and exit")
    p.add_argument("--verify", action="store_true", help="run the spectral verification suite")
    p.add_argument("--allow-level7", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def _mode(args) -> SubSolveMode:
    if args.mode == "exact":
        return SubSolveMode.exact()
    return SubSolveMode.pcg_ict(args.inner_tol, args.inner_cap, args.droptol)


def _export(args, out: Path) -> None:
    from .mmio import write_matrix_market, write_vector
    p = build_problem(args.level[0], args.beta[0], rhs=args.rhs)
    out.mkdir(parents=True, exist_ok=True)
    tag = f"level={p.level} beta={p.beta:g}"
    write_matrix_market(p.M, out / "M.mtx", comment=f"mass matrix {tag}")
    write_matrix_market(p.K, out / "K.mtx", comment=f"stiffness matrix {tag}")
    write_vector(p.b, out / "b.txt", header=tag)
    write_vector(p.d, out / "d.txt", header=tag)
    print(f"wrote M.mtx, K.mtx, b.txt, d.txt to {out}")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.verify:
            if any(l > 4 for l in args.level):
                raise ConfigurationError("--verify supports levels <= 4")
            rep = verify_all(args.level, args.beta, seed=args.seed)
            print(rep.summary())
            if not rep.ok:
                names = ", ".join(c.name for c in rep.failures())
                print(f"verification FAILED: {names}", file=sys.stderr)
                return EXIT_VERIFY
            print("verification passed")
            return EXIT_OK
        if args.dump_spectrum:
            from .spectral import MAX_FULL_LEVEL, spectrum_dump
            if args.level[0] > MAX_FULL_LEVEL:
                raise ConfigurationError(f"--dump-spectrum supports levels <= {MAX_FULL_LEVEL}")
            p = build_problem(args.level[0], args.beta[0], rhs=args.rhs)
            out = args.out or Path(f"spectrum_{args.dump_spectrum}_l{p.level}_b{p.beta:g}.txt")
            spectrum_dump(p, args.dump_spectrum, out)
            print(f"wrote {out}")
            return EXIT_OK
        if args.export_system is not None:
            _export(args, args.export_system)
            return EXIT_OK
        solver = args.solver or ("fgmres" if args.mode == "pcg_ict" else "gmres")
        cfg = ExperimentConfig(betas=args.beta, levels=args.level, kinds=args.precond,
                               mode=_mode(args), solver=solver, output_format=args.format,
                               seed=args.seed, tol=args.tol, maxit_cap=args.maxit_cap,
                               rhs=args.rhs, allow_level7=args.allow_level7,
                               residual_dir=str(args.residuals) if args.residuals else None)
    except (ConfigurationError, ValueError) as err:
        print(f"configuration error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    cells = run_matrix(cfg)
    text = render(cells, cfg.output_format, args.out)
    if args.out is None:
        sys.stdout.write(text)
    else:
        print(f"wrote {args.out}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
