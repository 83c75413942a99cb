"""Two-phase obstacle problem: dual finite element solver and functional error majorant."""
from .dual import DualSolveResult, solve_two_phase
from .majorant import MajorantBreakdown, energy_bounds, majorant_parts, optimize_majorant
from .mesh import SplitPattern, TriMesh, build_initial_mesh, refine_red, refine_to_level
from .problems import EXAMPLES, ProblemSpec, example1_spec, example2_spec, reference_solution

__all__ = [
    "DualSolveResult",
    "EXAMPLES",
    "MajorantBreakdown",
    "ProblemSpec",
    "SplitPattern",
    "TriMesh",
    "build_initial_mesh",
    "energy_bounds",
    "example1_spec",
    "example2_spec",
    "majorant_parts",
    "optimize_majorant",
    "reference_solution",
    "refine_red",
    "refine_to_level",
    "solve_two_phase",
]
