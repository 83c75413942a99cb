"""Batch runner: solve every level, bound the error, write CSV/VTK/logs.

    python -m twophase --example 1 --levels 5 --majorant-iters 10000 --out runs/ex1 --vtk
"""
from __future__ import annotations

import argparse
import logging
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .dual import DualSolveResult, solve_two_phase
from .majorant import MajorantBreakdown, energy_bounds, optimize_majorant
from .output import write_csv, write_vtk
from .problems import EXAMPLES, ProblemSpec

log = logging.getLogger("twophase")

BOUND_TOL = 1e-10
DRIFT_TOL = 1e-14


@dataclass
class RunConfig:
    example: int = 1
    levels: int = 5
    majorant_iters: int = 1000
    qp_tol: float = 1e-9
    reference: str = "auto"  # "exact", "level-plus-one" or "auto"
    output_dir: Optional[Path] = None
    emit_vtk: bool = False
    friedrichs_override: Optional[float] = None

    def __post_init__(self):
        if self.example not in EXAMPLES:
            raise ValueError(f"unknown example {self.example}")
        if self.levels < 1:
            raise ValueError("levels must be at least 1")
        if self.majorant_iters < 0:
            raise ValueError("majorant_iters must be nonnegative")
        if not self.qp_tol > 0:
            raise ValueError("qp_tol must be positive")
        if self.reference not in ("auto", "exact", "level-plus-one"):
            raise ValueError(f"unknown reference mode {self.reference!r}")
        if self.output_dir is not None:
            self.output_dir = Path(self.output_dir)

    def problem(self) -> ProblemSpec:
        return EXAMPLES[self.example]().with_friedrichs(self.friedrichs_override)

    def reference_mode(self, problem: ProblemSpec) -> str:
        if self.reference == "auto":
            return "exact" if problem.exact is not None else "level-plus-one"
        if self.reference == "exact" and problem.exact is None:
            raise ValueError(f"{problem.name} has no exact solution")
        return self.reference


@dataclass
class LevelRecord:
    level: int
    num_nodes: int
    J_primal: float
    I_dual: float
    gap: float
    majorant_total: float
    m1: float
    m2: float
    m3: float
    beta: float
    energy_lower: float
    J_ref: float
    kkt_residual: float
    qp_iterations: int
    majorant_sweeps: int
    history: list = field(repr=False, default_factory=list)
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def check_bounds(dual: DualSolveResult, maj: MajorantBreakdown, gap: float, qp_tol: float) -> list[str]:
    """Names of the bound invariants that failed on one level."""
    bad = []
    if not dual.converged or dual.kkt_residual > qp_tol:
        bad.append(f"qp kkt residual {dual.kkt_residual:.3e}")
    if dual.dual_energy > dual.primal_energy + BOUND_TOL:
        bad.append("weak duality")
    h = np.asarray(maj.history)
    if h.size and h.min() < gap - BOUND_TOL:
        bad.append(f"majorant below gap ({h.min():.6e} < {gap:.6e})")
    if h.size > 1 and np.diff(h).max() > DRIFT_TOL:
        bad.append(f"majorant increased by {np.diff(h).max():.3e}")
    if min(maj.m1, maj.m2) < 0:
        bad.append("negative majorant part")
    return bad


def run_experiment(config: RunConfig, sweep_log=None) -> list[LevelRecord]:
    """Run all levels of one example and return the per-level records.

    Files are written to ``config.output_dir`` when it is set; the CSV is
    rewritten after every level so a failure leaves the finished rows.
    """
    problem = config.problem()
    mode = config.reference_mode(problem)
    C = problem.friedrichs_C
    out = config.output_dir
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    stem = f"example{config.example}"
    own_log = sweep_log is None and out is not None
    if own_log:
        sweep_log = (out / f"{stem}_majorant.log").open("w")

    try:
        records = []
        if mode == "exact":
            J_ref = problem.exact.energy
        else:
            # one level above the finest level run serves every row
            J_ref = solve_two_phase(problem.mesh(config.levels + 1), problem, tol=config.qp_tol).primal_energy
            log.info("reference energy from level %d: %.6f", config.levels + 1, J_ref)

        for level in range(1, config.levels + 1):
            t0 = time.perf_counter()
            dual = solve_two_phase(problem.mesh(level), problem, tol=config.qp_tol)
            mesh = dual.mesh
            gap = dual.primal_energy - J_ref

            def trace(k, beta, eta, mu, total):
                if sweep_log is not None:
                    sweep_log.write(f"{level} {k} {beta:.6e} {total:.16e}\n")

            if sweep_log is not None:
                sweep_log.write(f"# level {level} sweep beta total\n")
            maj = optimize_majorant(
                mesh, dual.u_lambda, dual.lam, C, problem.alpha_plus, problem.alpha_minus,
                iters=config.majorant_iters, callback=trace,
            )
            lower = energy_bounds(dual.primal_energy, maj.total)[2]
            rec = LevelRecord(
                level=level,
                num_nodes=mesh.num_nodes,
                J_primal=dual.primal_energy,
                I_dual=dual.dual_energy,
                gap=gap,
                majorant_total=maj.total,
                m1=maj.m1,
                m2=maj.m2,
                m3=maj.m3,
                beta=maj.beta,
                energy_lower=lower,
                J_ref=J_ref,
                kkt_residual=dual.kkt_residual,
                qp_iterations=dual.iterations,
                majorant_sweeps=maj.iterations,
                history=list(maj.history),
                violations=check_bounds(dual, maj, gap, config.qp_tol),
            )
            if J_ref > dual.primal_energy + BOUND_TOL:
                rec.violations.append("reference energy above approximate energy")
            records.append(rec)
            log.info(
                "level %d |N|=%d J=%.6f I*=%.6f gap=%.3e M=%.3e (%d sweeps) %.1fs%s",
                level, mesh.num_nodes, rec.J_primal, rec.I_dual, gap, rec.majorant_total,
                maj.iterations, time.perf_counter() - t0,
                "" if rec.ok else "  VIOLATED: " + "; ".join(rec.violations),
            )
            if out is not None:
                write_csv(records, out / f"{stem}.csv")
                if config.emit_vtk:
                    write_vtk(
                        mesh,
                        out / f"{stem}_level{level}.vtk",
                        point_data={"u_lambda": dual.u_lambda},
                        cell_data={
                            "lambda": dual.lam,
                            "mu": maj.mu,
                            "density1": maj.density1,
                            "density2": maj.density2,
                            "density3": maj.density3,
                        },
                        title=f"{problem.name} level {level}",
                    )
    finally:
        if own_log:
            sweep_log.close()
    return records


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="twophase", description="Two-phase obstacle problem: dual solve and error majorant.")
    p.add_argument("--example", type=int, choices=sorted(EXAMPLES), default=1)
    p.add_argument("--levels", type=int, default=5, help="number of refinement levels (default 5)")
    p.add_argument("--majorant-iters", type=int, default=1000, help="majorant sweeps per level (default 1000)")
    p.add_argument("--qp-tol", type=float, default=1e-9, help="KKT tolerance of the dual QP")
    p.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    p.add_argument("--vtk", action="store_true", help="write one VTK file per level")
    p.add_argument("--friedrichs", type=float, default=None, help="override the Friedrichs constant")
    p.add_argument(
        "--reference", choices=("auto", "exact", "level-plus-one"), default="auto",
        help="energy used for the gap column (auto: exact when known)",
    )
    p.add_argument("-q", "--quiet", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, format="%(message)s")
    logging.getLogger("twophase.dual").setLevel(logging.WARNING)
    logging.getLogger("twophase.majorant").setLevel(logging.WARNING)
    try:
        config = RunConfig(
            example=args.example,
            levels=args.levels,
            majorant_iters=args.majorant_iters,
            qp_tol=args.qp_tol,
            reference=args.reference,
            output_dir=args.out,
            emit_vtk=args.vtk,
            friedrichs_override=args.friedrichs,
        )
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    records = run_experiment(config)
    bad = [r for r in records if not r.ok]
    for r in bad:
        print(f"level {r.level}: " + "; ".join(r.violations), file=sys.stderr)
    return 1 if bad else 0


if __name__ == "__main__":
    sys.exit(main())
