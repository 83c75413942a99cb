"""Functional error majorant and its successive minimization.

For an approximation ``v`` the majorant

    M = 1/2 (1 + beta) |grad v - eta|^2
      + 1/2 (1 + 1/beta) C^2 |div eta - mu|^2
      + int(alpha_plus v^+ + alpha_minus v^- - mu v)

bounds ``J(v) - J(u)`` from above for every ``beta > 0``, every flux
``eta`` in H(div) with zero normal trace on Neumann edges and every
multiplier ``mu`` in ``[-alpha_minus, alpha_plus]``.  Here ``eta`` is RT0
and ``mu`` is P0 on the mesh of ``v``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import assembly
import scipy.sparse as sp

from .linalg import factorize_indefinite
from .mesh import TriMesh

log = logging.getLogger(__name__)

BETA_MIN = 1e-12


class FeasibilityError(ValueError):
    pass


@dataclass
class MajorantBreakdown:
    m1: float
    m2: float
    m3: float
    beta: float
    eta: np.ndarray
    mu: np.ndarray
    density1: np.ndarray
    density2: np.ndarray
    density3: np.ndarray
    iterations: int = 0
    history: list = field(default_factory=list)

    @property
    def total(self) -> float:
        return self.m1 + self.m2 + self.m3


def majorant_parts(mesh: TriMesh, v, beta, eta, mu, C, alpha_plus, alpha_minus) -> MajorantBreakdown:
    """Evaluate the three majorant parts with per-triangle densities.

    The flux term uses the edge-midpoint rule on each triangle, exact for
    ``|grad v - eta|^2`` since ``eta`` is affine there.
    """
    if not beta > 0:
        raise ValueError("beta must be positive")
    mu = np.asarray(mu, dtype=float)
    if np.any(mu < -alpha_minus) or np.any(mu > alpha_plus):
        raise FeasibilityError("multiplier leaves [-alpha_minus, alpha_plus]")
    grad = assembly.p1_gradients(mesh, v)
    diff = grad[:, None, :] - assembly.rt0_eval(mesh, eta, mesh.edge_midpoints())
    flux2 = mesh.areas / 3.0 * np.einsum("tqd,tqd->t", diff, diff)
    div2 = mesh.areas * (assembly.rt0_divergence(mesh, eta) - mu) ** 2
    pos, neg = assembly.element_pos_neg(mesh, v)
    d3 = alpha_plus * pos + alpha_minus * neg - mu * mesh.areas * assembly.nodal_means(mesh, v)
    d1 = 0.5 * (1.0 + beta) * flux2
    d2 = 0.5 * (1.0 + 1.0 / beta) * C**2 * div2
    return MajorantBreakdown(
        m1=float(d1.sum()),
        m2=float(d2.sum()),
        m3=float(d3.sum()),
        beta=float(beta),
        eta=np.asarray(eta, dtype=float),
        mu=mu,
        density1=d1,
        density2=d2,
        density3=d3,
    )


class MajorantProblem:
    """Cached matrices and loads for minimizing the majorant of a fixed ``v``.

    The per-sweep work uses the algebraic forms
    ``|grad v - eta|^2 = a - 2 c.eta + eta' M eta`` and
    ``|div eta - mu|^2 = sum |T| (B eta - mu)^2``; ``majorant_parts`` gives
    the same numbers by quadrature.
    """

    def __init__(self, mesh: TriMesh, v, C, alpha_plus, alpha_minus):
        self.mesh = mesh
        self.v = np.asarray(v, dtype=float)
        self.C = float(C)
        self.alpha_plus = float(alpha_plus)
        self.alpha_minus = float(alpha_minus)
        self.M = assembly.rt0_mass(mesh)
        self.K = assembly.rt0_divdiv(mesh)
        self.B = assembly.rt0_divergence_matrix(mesh)
        self.c = assembly.rt0_flux_load(mesh, self.v)
        grad = assembly.p1_gradients(mesh, self.v)
        self.grad_sq = float(mesh.areas @ np.einsum("td,td->t", grad, grad))
        self.vbar = assembly.nodal_means(mesh, self.v)
        pos, neg = assembly.element_pos_neg(mesh, self.v)
        self.nonsmooth = float(np.sum(self.alpha_plus * pos + self.alpha_minus * neg))
        # Neumann edges carry zero normal flux and are eliminated
        free = np.ones(mesh.num_edges, dtype=bool)
        free[mesh.neumann_edges] = False
        self.free = np.flatnonzero(free)
        self.M_ff = self.M[self.free][:, self.free]
        self.K_ff = self.K[self.free][:, self.free]
        self.B_f = self.B[:, self.free]
        self._factor = (None, None)

    # -- partial sums ------------------------------------------------------
    def flux_sq(self, eta) -> float:
        return max(self.grad_sq - 2.0 * self.c @ eta + eta @ (self.M @ eta), 0.0)

    def div_sq(self, eta, mu) -> float:
        r = self.B @ eta - mu
        return float(self.mesh.areas @ (r * r))

    def m3(self, mu) -> float:
        return self.nonsmooth - float(mu @ (self.mesh.areas * self.vbar))

    def total(self, beta, eta, mu) -> float:
        return (
            0.5 * (1.0 + beta) * self.flux_sq(eta)
            + 0.5 * (1.0 + 1.0 / beta) * self.C**2 * self.div_sq(eta, mu)
            + self.m3(mu)
        )

    # -- the three partial minimizations -----------------------------------
    def step_eta(self, beta, mu) -> np.ndarray:
        """Minimize m1 + m2 over fluxes at fixed ``(beta, mu)``.

        The normal equations ``(a M + b B'TB) eta = a c + b B'T mu`` (``T`` the
        triangle areas) lose all accuracy once ``b / a`` is large, so the
        equivalent mixed system with ``p = b (B eta - mu)`` is solved instead.
        """
        if not beta > 0:
            raise ValueError("beta must be positive")
        a = 1.0 + beta
        b = self.C**2 * (1.0 + 1.0 / beta)
        nf = self.free.size
        cached_beta, factor = self._factor
        if cached_beta != beta:
            area = sp.diags(self.mesh.areas)
            TB = area @ self.B_f
            A = sp.bmat([[a * self.M_ff, TB.T], [TB, -area / b]], format="csc")
            factor = factorize_indefinite(A)
            self._factor = (beta, factor)
        rhs = np.concatenate([a * self.c[self.free], self.mesh.areas * mu])
        eta = np.zeros(self.mesh.num_edges)
        eta[self.free] = factor.solve(rhs)[:nf]
        return eta

    def step_mu(self, beta, eta) -> np.ndarray:
        div = self.B @ eta
        shift = self.vbar / (self.C**2 * (1.0 + 1.0 / beta))
        return np.clip(div + shift, -self.alpha_minus, self.alpha_plus)

    def step_beta(self, eta, mu, previous) -> float:
        f = np.sqrt(self.flux_sq(eta))
        if f == 0.0:
            return previous
        g = np.sqrt(self.div_sq(eta, mu))
        if g == 0.0:
            return BETA_MIN
        return max(self.C * g / f, BETA_MIN)

    def breakdown(self, beta, eta, mu) -> MajorantBreakdown:
        return majorant_parts(
            self.mesh, self.v, beta, eta, mu, self.C, self.alpha_plus, self.alpha_minus
        )


def step_eta(mesh, v, beta, mu, C, neumann_zero=True) -> np.ndarray:
    prob = MajorantProblem(mesh, v, C, 0.0, 0.0)
    if not neumann_zero:
        prob.free = np.arange(mesh.num_edges)
        prob.M_ff, prob.K_ff, prob.B_f = prob.M, prob.K, prob.B
    return prob.step_eta(beta, mu)


def step_mu(mesh, v, beta, eta, C, alpha_plus, alpha_minus) -> np.ndarray:
    return MajorantProblem(mesh, v, C, alpha_plus, alpha_minus).step_mu(beta, eta)


def step_beta(mesh, v, eta, mu, C, previous=1.0) -> float:
    return MajorantProblem(mesh, v, C, 0.0, 0.0).step_beta(eta, mu, previous)


def optimize_majorant(
    mesh: TriMesh,
    v,
    mu0,
    C,
    alpha_plus,
    alpha_minus,
    iters: int = 1000,
    beta0: float = 1.0,
    rtol: float = 1e-12,
    callback=None,
) -> MajorantBreakdown:
    """Alternate exact minimization in ``eta``, ``mu`` and ``beta``.

    With ``iters == 0`` only the flux step is taken, at ``(beta0, mu0)``.
    Stops early once a sweep lowers the total by less than ``rtol``
    relative.  ``history`` holds the total after every sweep (entry 0 is
    the starting point after the first flux step); ``callback(k, beta,
    eta, mu, total)`` sees each of them.
    """
    mu = np.clip(np.asarray(mu0, dtype=float), -alpha_minus, alpha_plus)
    prob = MajorantProblem(mesh, v, C, alpha_plus, alpha_minus)
    beta = float(beta0)
    eta = prob.step_eta(beta, mu)
    total = prob.total(beta, eta, mu)
    history = [total]
    if callback is not None:
        callback(0, beta, eta, mu, total)
    k = 0
    for k in range(1, iters + 1):
        if k > 1:
            eta = prob.step_eta(beta, mu)
        mu = prob.step_mu(beta, eta)
        beta = prob.step_beta(eta, mu, beta)
        new = prob.total(beta, eta, mu)
        history.append(new)
        if callback is not None:
            callback(k, beta, eta, mu, new)
        done = total - new <= rtol * abs(total)
        total = new
        if done:
            break
    out = prob.breakdown(beta, eta, mu)
    out.iterations = k
    out.history = history
    log.info("majorant after %d sweeps: %.6e (beta=%.3e)", k, out.total, beta)
    return out


def energy_bounds(J_v: float, majorant_total: float, J_ref: float | None = None):
    """Return ``(gap_lower, gap_upper, energy_lower, energy_upper)``.

    Without a reference energy the gap is only bounded below by zero and
    the exact energy above by ``J_v``.
    """
    if J_ref is not None and J_ref > J_v:
        raise ValueError("reference energy exceeds the approximate energy")
    gap_lower = 0.0 if J_ref is None else J_v - J_ref
    energy_upper = J_v if J_ref is None else J_ref
    return gap_lower, majorant_total, J_v - majorant_total, energy_upper
