"""Chebyshev iteration vs GMRES with the NEW preconditioner on the interval [2*beta, 1]."""
import argparse

from kktprec.fem import build_problem
from kktprec.krylov import chebyshev, chebyshev_interval, gmres
from kktprec.precond import build_preconditioner
from kktprec.saddle import SaddleSystem


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--levels", default="2,3,4,5")
    ap.add_argument("--betas", default="1e-1,1e-2,1e-3")
    args = ap.parse_args()
    print(f"{'beta':>8} {'level':>5} {'gmres':>6} {'cheb':>6}")
    for beta in map(float, args.betas.split(",")):
        for level in map(int, args.levels.split(",")):
            p = build_problem(level, beta)
            sys_ = SaddleSystem(p)
            pc = build_preconditioner("new", p)
            _, rg = gmres(sys_, pc, sys_.rhs)
            _, rc = chebyshev(sys_, pc, sys_.rhs, chebyshev_interval(beta))
            cheb = rc.iterations if rc.converged else "--"
            print(f"{beta:>8g} {level:>5d} {rg.iterations:>6d} {cheb:>6}")


if __name__ == "__main__":
    main()
