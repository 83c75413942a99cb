"""Finite element matrices for P1, P0 and lowest order Raviart-Thomas spaces.

All routines are vectorized over triangles and accumulate through COO
triplets, which scipy sums in a fixed order, so results are reproducible
bit for bit.
"""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .mesh import TriMesh


class AssemblyError(ValueError):
    pass


def _check_nondegenerate(mesh: TriMesh):
    if np.any(mesh.areas <= 0.0):
        raise AssemblyError("degenerate triangle")


def _check_len(x, n, what):
    x = np.asarray(x, dtype=float)
    if x.shape != (n,):
        raise AssemblyError(f"{what} has shape {x.shape}, expected ({n},)")
    return x


def p1_basis_gradients(mesh: TriMesh) -> np.ndarray:
    """Gradients of the three hat functions on every triangle, shape (ntri, 3, 2)."""
    p = mesh.vertices[mesh.triangles]
    q1 = np.roll(p, -1, axis=1)
    q2 = np.roll(p, -2, axis=1)
    # opposite edge rotated counterclockwise points into the triangle
    d = q2 - q1
    g = np.stack([-d[..., 1], d[..., 0]], axis=-1)
    return g / (2.0 * mesh.areas[:, None, None])


def p1_gradients(mesh: TriMesh, v) -> np.ndarray:
    """Elementwise constant gradient of a P1 field, shape (ntri, 2)."""
    v = _check_len(v, mesh.num_nodes, "P1 field")
    return np.einsum("tk,tkd->td", v[mesh.triangles], p1_basis_gradients(mesh))


def p1_stiffness(mesh: TriMesh) -> sp.csr_matrix:
    _check_nondegenerate(mesh)
    G = p1_basis_gradients(mesh)
    local = np.einsum("tid,tjd->tij", G, G) * mesh.areas[:, None, None]
    t = mesh.triangles
    rows = np.repeat(t, 3, axis=1).ravel()
    cols = np.tile(t, (1, 3)).ravel()
    n = mesh.num_nodes
    return sp.coo_matrix((local.ravel(), (rows, cols)), shape=(n, n)).tocsr()


def p1_p0_mass(mesh: TriMesh) -> sp.csr_matrix:
    """Rectangular matrix with ``v @ M @ mu == integral of v * mu``."""
    _check_nondegenerate(mesh)
    nt = mesh.num_triangles
    rows = mesh.triangles.ravel()
    cols = np.repeat(np.arange(nt), 3)
    vals = np.repeat(mesh.areas / 3.0, 3)
    return sp.coo_matrix((vals, (rows, cols)), shape=(mesh.num_nodes, nt)).tocsr()


def nodal_means(mesh: TriMesh, v) -> np.ndarray:
    v = _check_len(v, mesh.num_nodes, "P1 field")
    return v[mesh.triangles].mean(axis=1)


# -- lowest order Raviart-Thomas ---------------------------------------------


def rt0_local_scale(mesh: TriMesh) -> np.ndarray:
    """``sigma * |E| / (2|T|)`` per local edge, shape (ntri, 3)."""
    lengths = mesh.edge_lengths[mesh.triangle_edges]
    return mesh.edge_signs * lengths / (2.0 * mesh.areas[:, None])


def rt0_basis_at(mesh: TriMesh, points: np.ndarray) -> np.ndarray:
    """Local RT0 basis values at per-triangle points.

    ``points`` has shape (ntri, q, 2); the result has shape (ntri, q, 3, 2)
    where index 2 runs over the local edges (edge k opposite vertex k).
    """
    p = mesh.vertices[mesh.triangles]  # (nt, 3, 2)
    diff = points[:, :, None, :] - p[:, None, :, :]
    return rt0_local_scale(mesh)[:, None, :, None] * diff


def rt0_eval(mesh: TriMesh, eta, points: np.ndarray) -> np.ndarray:
    """Evaluate an RT0 field at per-triangle points, shape (ntri, q, 2)."""
    eta = _check_len(eta, mesh.num_edges, "RT0 field")
    coef = eta[mesh.triangle_edges]
    return np.einsum("tqkd,tk->tqd", rt0_basis_at(mesh, points), coef)


def rt0_divergence_matrix(mesh: TriMesh) -> sp.csr_matrix:
    """Matrix B with ``(B @ eta)[t] = div eta on t``, shape (ntri, nedges)."""
    _check_nondegenerate(mesh)
    nt = mesh.num_triangles
    vals = 2.0 * rt0_local_scale(mesh)  # sigma |E| / |T|
    rows = np.repeat(np.arange(nt), 3)
    return sp.coo_matrix(
        (vals.ravel(), (rows, mesh.triangle_edges.ravel())), shape=(nt, mesh.num_edges)
    ).tocsr()


def rt0_divergence(mesh: TriMesh, eta) -> np.ndarray:
    eta = _check_len(eta, mesh.num_edges, "RT0 field")
    return rt0_divergence_matrix(mesh) @ eta


def rt0_mass(mesh: TriMesh) -> sp.csr_matrix:
    _check_nondegenerate(mesh)
    # three edge-midpoint rule, exact for the quadratic integrands
    psi = rt0_basis_at(mesh, mesh.edge_midpoints())  # (nt, 3q, 3k, 2)
    local = np.einsum("tqid,tqjd->tij", psi, psi) * (mesh.areas / 3.0)[:, None, None]
    te = mesh.triangle_edges
    rows = np.repeat(te, 3, axis=1).ravel()
    cols = np.tile(te, (1, 3)).ravel()
    n = mesh.num_edges
    return sp.coo_matrix((local.ravel(), (rows, cols)), shape=(n, n)).tocsr()


def rt0_divdiv(mesh: TriMesh) -> sp.csr_matrix:
    B = rt0_divergence_matrix(mesh)
    return (B.T @ sp.diags(mesh.areas) @ B).tocsr()


def rt0_flux_load(mesh: TriMesh, v) -> np.ndarray:
    """``c_E = integral of grad v . psi_E``."""
    grad = p1_gradients(mesh, v)
    p = mesh.vertices[mesh.triangles]
    # integral of psi_k over T is |T| * scale_k * (centroid - P_k)
    offs = p.mean(axis=1)[:, None, :] - p
    local = mesh.areas[:, None] * rt0_local_scale(mesh) * np.einsum("tkd,td->tk", offs, grad)
    return np.bincount(mesh.triangle_edges.ravel(), local.ravel(), minlength=mesh.num_edges)


def rt0_div_load(mesh: TriMesh, mu) -> np.ndarray:
    """``d_E = integral of mu * div psi_E``."""
    mu = _check_len(mu, mesh.num_triangles, "P0 field")
    return rt0_divergence_matrix(mesh).T @ (mesh.areas * mu)


# -- exact quadrature of the nonsmooth energy terms ---------------------------

SNAP = 1e-14


def pos_neg_part_integrals(values, area):
    """Exact integrals of ``max(v, 0)`` and ``max(-v, 0)`` for linear ``v`` on triangles.

    ``values`` holds nodal values, shape (3,) or (n, 3); ``area`` is a scalar
    or an array of length n.  When the zero level line cuts the triangle,
    the part cut off at the lone vertex of one sign is a similar triangle
    with vertex value ``a`` and crossing parameters ``a / (a - b)`` along the
    two adjacent edges, whose integral is closed form.  The other part
    follows from the mean.
    """
    vals = np.asarray(values, dtype=float)
    single = vals.ndim == 1
    vals = np.atleast_2d(vals)
    area = np.broadcast_to(np.asarray(area, dtype=float), (len(vals),))
    if np.any(~(area > 0.0)):
        raise AssemblyError("nonpositive area")
    if not np.all(np.isfinite(vals)):
        raise AssemblyError("nonfinite nodal values")

    scale = np.abs(vals).max(axis=1, keepdims=True)
    vals = np.where(np.abs(vals) <= SNAP * scale, 0.0, vals)
    total = area * vals.mean(axis=1)

    npos = (vals > 0).sum(axis=1)
    nneg = (vals < 0).sum(axis=1)
    pos = np.where(nneg == 0, total, 0.0)
    neg = np.where(npos == 0, -total, 0.0)

    mixed = (npos > 0) & (nneg > 0)
    if np.any(mixed):
        v = vals[mixed]
        a = area[mixed]
        lone_pos = (npos[mixed] == 1)
        # orient so the lone vertex has positive value w
        w = np.where(lone_pos[:, None], v, -v)
        k = np.argmax(w, axis=1)
        top = w[np.arange(len(w)), k]
        others = np.sort(np.where(np.arange(3)[None, :] == k[:, None], np.inf, w), axis=1)[:, :2]
        # scale-free form; others <= 0 < top so both factors are >= 1
        r = others / top[:, None]
        cut = a * top / (3.0 * (1.0 - r[:, 0]) * (1.0 - r[:, 1]))
        tm = total[mixed]
        pos[mixed] = np.where(lone_pos, cut, cut + tm)
        neg[mixed] = np.where(lone_pos, cut - tm, cut)

    if single:
        return float(pos[0]), float(neg[0])
    return pos, neg


def element_pos_neg(mesh: TriMesh, v):
    v = _check_len(v, mesh.num_nodes, "P1 field")
    return pos_neg_part_integrals(v[mesh.triangles], mesh.areas)


def primal_energy(mesh: TriMesh, v, alpha_plus: float, alpha_minus: float) -> float:
    """``J(v) = 1/2 |grad v|^2 + alpha_plus v^+ + alpha_minus v^-`` integrated exactly."""
    v = _check_len(v, mesh.num_nodes, "P1 field")
    grad = p1_gradients(mesh, v)
    dirichlet = 0.5 * np.dot(mesh.areas, np.einsum("td,td->t", grad, grad))
    pos, neg = element_pos_neg(mesh, v)
    return float(dirichlet + alpha_plus * pos.sum() + alpha_minus * neg.sum())


def compound_terms(mesh: TriMesh, v, exact, alpha_plus: float, alpha_minus: float):
    """Split ``J(v) - J(u)`` into the free-boundary part and the gradient part.

    ``exact`` provides ``lam(x, y)`` and ``grad(x, y)`` of the exact pair.
    The multiplier is sampled at centroids, so elements must not straddle
    its jumps; the gradient difference is integrated with the edge-midpoint
    rule, exact when the exact solution is piecewise quadratic on the mesh.
    """
    if exact is None:
        raise AssemblyError("compound terms need an exact solution")
    v = _check_len(v, mesh.num_nodes, "P1 field")
    c = mesh.centroids()
    lam = np.asarray(exact.lam(c[:, 0], c[:, 1]), dtype=float)
    pos, neg = element_pos_neg(mesh, v)
    d_f = float(np.sum(alpha_plus * pos + alpha_minus * neg - lam * mesh.areas * nodal_means(mesh, v)))

    mids = mesh.edge_midpoints()
    gu = np.stack(exact.grad(mids[..., 0], mids[..., 1]), axis=-1)  # (nt, 3, 2)
    diff = gu - p1_gradients(mesh, v)[:, None, :]
    d_g = float(0.5 * np.sum(mesh.areas / 3.0 * np.einsum("tqd,tqd->t", diff, diff)))
    return d_f, d_g
