"""Eigenvalues of A and of the NEW-preconditioned matrix, dumped as text for plotting.

    python scripts/dump_spectra.py --level 3 --beta 1e-2 --outdir spectra
"""
import argparse
from pathlib import Path

import numpy as np

from kktprec.fem import build_problem
from kktprec.spectral import spectrum_dump


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--level", type=int, default=3)
    ap.add_argument("--beta", type=float, default=1e-2)
    ap.add_argument("--outdir", default="spectra")
    args = ap.parse_args()
    out = Path(args.outdir)
    out.mkdir(parents=True, exist_ok=True)
    p = build_problem(args.level, args.beta)
    for which in ("original", "preconditioned"):
        path = spectrum_dump(p, which, out / f"{which}_l{p.level}_b{p.beta:g}.txt")
        vals = np.loadtxt(path)[:, 1]
        print(f"{which:>15}: n={vals.size} min={vals.min():.4e} max={vals.max():.4e} -> {path}")


if __name__ == "__main__":
    main()
