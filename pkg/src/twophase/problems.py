"""The two benchmark problems and their exact or reference data."""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

from . import mesh as meshmod
from .mesh import SplitPattern, TriMesh

Field = Callable[[np.ndarray, np.ndarray], np.ndarray]

_TOL = 1e-12


@dataclass(frozen=True)
class ExactSolution:
    u: Field
    grad: Callable[[np.ndarray, np.ndarray], tuple]
    lam: Field
    energy: float


@dataclass(frozen=True)
class ProblemSpec:
    name: str
    rect: tuple  # (x0, x1, y0, y1)
    alpha_plus: float
    alpha_minus: float
    dirichlet_value: Field
    dirichlet_region: Field
    neumann_region: Optional[Field]
    friedrichs_C: float
    initial_mesh: tuple  # (nx, ny, SplitPattern)
    exact: Optional[ExactSolution] = None

    def __post_init__(self):
        if not (self.alpha_plus >= 0 and self.alpha_minus >= 0):
            raise ValueError("alpha coefficients must be nonnegative")
        if not self.friedrichs_C > 0:
            raise ValueError("Friedrichs constant must be positive")

    def mesh(self, level: int = 1) -> TriMesh:
        """Tagged mesh of the given refinement level (level 1 is the initial grid)."""
        if level < 1:
            raise ValueError("levels start at 1")
        nx, ny, pattern = self.initial_mesh
        m = meshmod.build_initial_mesh(self.rect, nx, ny, pattern)
        m = meshmod.classify_boundary(m, self.dirichlet_region, self.neumann_region)
        return meshmod.refine_to_level(m, level)

    def dirichlet_vector(self, mesh: TriMesh) -> np.ndarray:
        """Nodal interpolant of the boundary data on the Dirichlet nodes."""
        xy = mesh.vertices[mesh.dirichlet_nodes]
        return np.asarray(self.dirichlet_value(xy[:, 0], xy[:, 1]), dtype=float)

    def with_friedrichs(self, C: float | None) -> "ProblemSpec":
        return self if C is None else replace(self, friedrichs_C=float(C))


def friedrichs_constant(problem: ProblemSpec) -> float:
    return problem.friedrichs_C


def strip_friedrichs(width: float) -> float:
    """Constant for functions vanishing on the two long sides of a strip of the given width."""
    return width / np.pi


def rectangle_friedrichs(a: float, b: float) -> float:
    """Constant for functions vanishing on the whole boundary of an ``a`` x ``b`` rectangle."""
    return 1.0 / (np.pi * np.sqrt(1.0 / a**2 + 1.0 / b**2))


# -- Example I ----------------------------------------------------------------


def _ex1_u(x, y):
    x = np.asarray(x, dtype=float)
    return np.where(x <= -0.5, -(2 * x + 1) ** 2, np.where(x >= 0.5, (2 * x - 1) ** 2, 0.0)) + 0.0 * np.asarray(y)


def _ex1_grad(x, y):
    x = np.asarray(x, dtype=float)
    gx = np.where(x <= -0.5, -4 * (2 * x + 1), np.where(x >= 0.5, 4 * (2 * x - 1), 0.0))
    return gx, np.zeros_like(gx + np.asarray(y, dtype=float))


def example1_spec() -> ProblemSpec:
    alpha = 8.0

    def lam(x, y):
        x = np.asarray(x, dtype=float)
        return np.where(x < -0.5, -alpha, np.where(x > 0.5, alpha, 0.0)) + 0.0 * np.asarray(y)

    return ProblemSpec(
        name="example1",
        rect=(-1.0, 1.0, 0.0, 1.0),
        alpha_plus=alpha,
        alpha_minus=alpha,
        dirichlet_value=lambda x, y: np.sign(x) * 1.0,
        dirichlet_region=lambda x, y: np.abs(np.abs(x) - 1.0) < _TOL,
        neumann_region=lambda x, y: (np.abs(y) < _TOL) | (np.abs(y - 1.0) < _TOL),
        friedrichs_C=strip_friedrichs(2.0),
        initial_mesh=(4, 2, SplitPattern.DIAGONAL),
        exact=ExactSolution(u=_ex1_u, grad=_ex1_grad, lam=lam, energy=16.0 / 3.0),
    )


# -- Example II ---------------------------------------------------------------


def _ex2_g(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return np.select(
        [np.abs(y - 1) < _TOL, np.abs(y + 1) < _TOL, np.abs(x - 1) < _TOL, np.abs(x + 1) < _TOL],
        [x + 1, x - 1, y + 1, y - 1],
        default=np.nan,
    )


def example2_spec() -> ProblemSpec:
    return ProblemSpec(
        name="example2",
        rect=(-1.0, 1.0, -1.0, 1.0),
        alpha_plus=4.0,
        alpha_minus=4.0,
        dirichlet_value=_ex2_g,
        dirichlet_region=lambda x, y: (np.abs(np.abs(x) - 1.0) < _TOL) | (np.abs(np.abs(y) - 1.0) < _TOL),
        neumann_region=None,
        friedrichs_C=rectangle_friedrichs(2.0, 2.0),
        initial_mesh=(2, 2, SplitPattern.LINKED_CENTERS),
    )


EXAMPLES = {1: example1_spec, 2: example2_spec}


def reference_solution(problem: ProblemSpec, level: int, **solver_opts):
    """Solve on the mesh one level finer; returns ``(mesh, u_ref, J_ref)``."""
    from .dual import solve_two_phase

    fine = problem.mesh(level + 1)
    res = solve_two_phase(fine, problem, **solver_opts)
    return fine, res.u_lambda, res.primal_energy
