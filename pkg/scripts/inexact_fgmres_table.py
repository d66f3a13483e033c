"""Inexact-mode FGMRES counts: M, K, K^T solved by PCG + ICT(0.01) to 1e-3.

    python scripts/inexact_fgmres_table.py --levels 2,3,4,5
"""
import argparse

from kktprec.bench import ExperimentConfig, render, run_matrix
from kktprec.precond import BLOCK_KINDS, SubSolveMode


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--levels", default="2,3,4,5")
    ap.add_argument("--betas", default="1e-1,1e-2,1e-4,1e-6,1e-8,1e-10")
    ap.add_argument("--format", default="markdown", choices=("markdown", "csv"))
    ap.add_argument("--droptol", type=float, default=0.01)
    ap.add_argument("--inner-tol", type=float, default=1e-3)
    ap.add_argument("--out", default=None)
    args = ap.parse_args()
    cfg = ExperimentConfig(betas=[float(b) for b in args.betas.split(",")],
                           levels=[int(l) for l in args.levels.split(",")],
                           kinds=BLOCK_KINDS, solver="fgmres", output_format=args.format,
                           mode=SubSolveMode.pcg_ict(args.inner_tol, drop_tol=args.droptol))
    print(render(run_matrix(cfg), args.format, args.out))


if __name__ == "__main__":
    main()
