"""Majorant value along the sweeps, next to a single unoptimized sweep.

The "single" column freezes beta at 1 and takes one flux step and one
multiplier step from mu0 = lambda_h.  The "optimized" column runs the
alternating minimization to convergence.  Both are guaranteed bounds.

    python3 scripts/majorant_sweep_study.py --example 2 --levels 4
"""
import argparse

import numpy as np

from twophase.dual import solve_two_phase
from twophase.majorant import MajorantProblem, optimize_majorant
from twophase.problems import EXAMPLES


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--example", type=int, choices=(1, 2), default=2)
    ap.add_argument("--levels", type=int, default=4)
    ap.add_argument("--sweeps", type=int, default=10000)
    args = ap.parse_args()

    problem = EXAMPLES[args.example]()
    C, ap_, am_ = problem.friedrichs_C, problem.alpha_plus, problem.alpha_minus
    print(f"{'lvl':>3} {'single':>10} {'m1':>10} {'m2':>10} {'m3':>10} | {'optimized':>10} {'m1':>10} {'m2':>10} {'m3':>10} {'sweeps':>6}")
    for level in range(1, args.levels + 1):
        mesh = problem.mesh(level)
        res = solve_two_phase(mesh, problem)
        prob = MajorantProblem(mesh, res.u_lambda, C, ap_, am_)
        eta = prob.step_eta(1.0, res.lam)
        mu = prob.step_mu(1.0, eta)
        one = prob.breakdown(1.0, eta, mu)
        opt = optimize_majorant(mesh, res.u_lambda, res.lam, C, ap_, am_, iters=args.sweeps)
        print(
            f"{level:3d} {one.total:10.3e} {one.m1:10.3e} {one.m2:10.3e} {one.m3:10.3e} | "
            f"{opt.total:10.3e} {opt.m1:10.3e} {opt.m2:10.3e} {opt.m3:10.3e} {opt.iterations:6d}"
        )
        assert np.all(np.diff(opt.history) <= 1e-14)


if __name__ == "__main__":
    main()
