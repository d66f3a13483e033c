"""Exact-mode GMRES iteration counts for all preconditioners.

    python scripts/exact_gmres_table.py --levels 2,3,4,5 --betas 1e-1,1e-2,1e-4,1e-6
"""
import argparse

from kktprec.bench import ExperimentConfig, render, run_matrix
from kktprec.precond import BLOCK_KINDS


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--levels", default="2,3,4,5")
    ap.add_argument("--betas", default="1e-1,1e-2,1e-4,1e-6,1e-8,1e-10")
    ap.add_argument("--format", default="markdown", choices=("markdown", "csv"))
    ap.add_argument("--rhs", default="galerkin")
    ap.add_argument("--out", default=None)
    args = ap.parse_args()
    cfg = ExperimentConfig(betas=[float(b) for b in args.betas.split(",")],
                           levels=[int(l) for l in args.levels.split(",")],
                           kinds=BLOCK_KINDS, solver="gmres", output_format=args.format,
                           rhs=args.rhs)
    print(render(run_matrix(cfg), args.format, args.out))


if __name__ == "__main__":
    main()
