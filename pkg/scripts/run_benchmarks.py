"""Run both benchmarks at full depth and print energies and majorants per level.

    python3 scripts/run_benchmarks.py --out runs
"""
import argparse
import logging
from pathlib import Path

from twophase.cli import RunConfig, run_experiment


def table(records, title):
    print(title)
    print(f"{'lvl':>3} {'nodes':>6} {'J':>9} {'I*':>9} {'gap':>10} {'M':>10} {'m1':>10} {'m2':>10} {'m3':>10} {'lower':>9}")
    for r in records:
        print(
            f"{r.level:3d} {r.num_nodes:6d} {r.J_primal:9.4f} {r.I_dual:9.4f} {r.gap:10.3e} "
            f"{r.majorant_total:10.3e} {r.m1:10.3e} {r.m2:10.3e} {r.m3:10.3e} {r.energy_lower:9.4f}"
        )
    print()


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", type=Path, default=Path("runs"))
    ap.add_argument("--sweeps", type=int, default=10000)
    ap.add_argument("--vtk", action="store_true")
    args = ap.parse_args()
    logging.basicConfig(level=logging.WARNING)

    ex1 = run_experiment(RunConfig(example=1, levels=5, majorant_iters=args.sweeps,
                                   output_dir=args.out / "example1", emit_vtk=args.vtk))
    table(ex1, "Example I (gap against the exact energy 16/3)")
    ex2 = run_experiment(RunConfig(example=2, levels=5, majorant_iters=args.sweeps,
                                   output_dir=args.out / "example2", emit_vtk=args.vtk))
    table(ex2, "Example II (gap against the level-6 energy)")
    finest = ex2[-1]
    print(f"Example II bracket: {finest.energy_lower:.4f} <= J(u) <= {finest.J_ref:.4f}")
    bad = [r for r in ex1 + ex2 if not r.ok]
    return 1 if bad else 0


if __name__ == "__main__":
    raise SystemExit(main())
