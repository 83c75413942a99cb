"""Structured triangular meshes, red refinement and boundary tagging."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

# node tags
INTERIOR = 0
DIRICHLET = 1
NEUMANN = 2


class SplitPattern(enum.Enum):
    """How each grid cell is cut into triangles.

    DIAGONAL: two triangles per cell, cut from lower left to upper right.
    CRISSCROSS: four triangles per cell, fanned around an added center node.
    LINKED_CENTERS: same nodes as CRISSCROSS, but every interior grid edge
    is flipped into the segment joining the two neighbouring cell centers,
    so each boundary cell side carries one triangle and each interior cell
    side two triangles spanning the adjacent centers.
    """

    DIAGONAL = "diagonal"
    CRISSCROSS = "crisscross"
    LINKED_CENTERS = "linked-centers"


class MeshError(ValueError):
    pass


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class TriMesh:
    """Conforming triangulation with edge connectivity and boundary tags.

    ``triangle_edges[t, k]`` is the edge opposite local vertex ``k`` and
    ``edge_signs[t, k]`` is +1 when the global normal of that edge points
    out of triangle ``t``.  The global normal is the edge vector from the
    smaller to the larger node index rotated by 90 degrees counterclockwise.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    edges: np.ndarray
    triangle_edges: np.ndarray
    edge_signs: np.ndarray
    node_tag: np.ndarray
    edge_tag: np.ndarray
    areas: np.ndarray = field(repr=False)

    @property
    def num_nodes(self) -> int:
        return len(self.vertices)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @property
    def num_triangles(self) -> int:
        return len(self.triangles)

    @property
    def edge_lengths(self) -> np.ndarray:
        d = self.vertices[self.edges[:, 1]] - self.vertices[self.edges[:, 0]]
        return np.hypot(d[:, 0], d[:, 1])

    @property
    def edge_normals(self) -> np.ndarray:
        """Unit global normals, one row per edge."""
        d = self.vertices[self.edges[:, 1]] - self.vertices[self.edges[:, 0]]
        n = np.column_stack([-d[:, 1], d[:, 0]])
        return n / np.hypot(n[:, 0], n[:, 1])[:, None]

    @property
    def boundary_edges(self) -> np.ndarray:
        counts = np.bincount(self.triangle_edges.ravel(), minlength=self.num_edges)
        return np.flatnonzero(counts == 1)

    @property
    def interior_nodes(self) -> np.ndarray:
        """Nodes carrying unknowns: interior and Neumann nodes."""
        return np.flatnonzero(self.node_tag != DIRICHLET)

    @property
    def dirichlet_nodes(self) -> np.ndarray:
        return np.flatnonzero(self.node_tag == DIRICHLET)

    @property
    def neumann_edges(self) -> np.ndarray:
        return np.flatnonzero(self.edge_tag == NEUMANN)

    def centroids(self) -> np.ndarray:
        return self.vertices[self.triangles].mean(axis=1)

    def edge_midpoints(self) -> np.ndarray:
        """Midpoints of the local edges, shape (ntri, 3, 2), opposite each vertex."""
        p = self.vertices[self.triangles]
        return 0.5 * (np.roll(p, -1, axis=1) + np.roll(p, -2, axis=1))

    def mesh_size(self) -> float:
        return float(self.edge_lengths.max())


def _signed_areas(vertices, triangles):
    p = vertices[triangles]
    e1 = p[:, 1] - p[:, 0]
    e2 = p[:, 2] - p[:, 0]
    return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])


def from_arrays(vertices, triangles, node_tag=None, edge_tag=None) -> TriMesh:
    """Build the edge structure of a triangulation given nodes and CCW triangles.

    Tags default to all-interior; when ``edge_tag`` is given it must be
    indexed by the sorted edge enumeration produced here.
    """
    vertices = np.asarray(vertices, dtype=float)
    triangles = np.asarray(triangles, dtype=np.int64)
    if triangles.ndim != 2 or triangles.shape[1] != 3:
        raise MeshError("triangles must have shape (n, 3)")
    areas = _signed_areas(vertices, triangles)
    if np.any(areas <= 0.0):
        raise MeshError("triangles must be nondegenerate and counterclockwise")

    # local edge k is opposite vertex k
    a = triangles[:, [1, 2, 0]]
    b = triangles[:, [2, 0, 1]]
    lo = np.minimum(a, b).ravel()
    hi = np.maximum(a, b).ravel()
    edges, inverse = np.unique(np.column_stack([lo, hi]), axis=0, return_inverse=True)
    triangle_edges = inverse.reshape(-1, 3)
    # traversal a->b is CCW, its CCW rotation points inward
    edge_signs = np.where(a > b, 1, -1).astype(np.int8)

    counts = np.bincount(triangle_edges.ravel(), minlength=len(edges))
    if np.any(counts > 2):
        raise MeshError("nonmanifold edge")

    if node_tag is None:
        node_tag = np.zeros(len(vertices), dtype=np.int8)
    if edge_tag is None:
        edge_tag = np.zeros(len(edges), dtype=np.int8)
    return TriMesh(
        vertices=_frozen(vertices),
        triangles=_frozen(triangles),
        edges=_frozen(edges.astype(np.int64)),
        triangle_edges=_frozen(triangle_edges.astype(np.int64)),
        edge_signs=_frozen(edge_signs),
        node_tag=_frozen(np.asarray(node_tag, dtype=np.int8)),
        edge_tag=_frozen(np.asarray(edge_tag, dtype=np.int8)),
        areas=_frozen(areas),
    )


def build_initial_mesh(rect, nx: int, ny: int, pattern: SplitPattern) -> TriMesh:
    """Uniform grid of ``nx`` x ``ny`` cells on ``rect = (x0, x1, y0, y1)``.

    Nodes are numbered row by row; crisscross cell centers follow the grid
    nodes in the same cell order.
    """
    x0, x1, y0, y1 = map(float, rect)
    if nx < 1 or ny < 1:
        raise MeshError("cell counts must be positive")
    if not (x1 > x0 and y1 > y0):
        raise MeshError("degenerate rectangle")
    pattern = SplitPattern(pattern)

    xs = np.linspace(x0, x1, nx + 1)
    ys = np.linspace(y0, y1, ny + 1)
    X, Y = np.meshgrid(xs, ys)
    verts = [np.column_stack([X.ravel(), Y.ravel()])]

    j, i = np.meshgrid(np.arange(ny), np.arange(nx), indexing="ij")
    i, j = i.ravel(), j.ravel()
    ll = j * (nx + 1) + i
    lr = ll + 1
    ur = ll + nx + 2
    ul = ll + nx + 1

    if pattern is SplitPattern.DIAGONAL:
        tris = np.stack([np.column_stack([ll, lr, ur]), np.column_stack([ll, ur, ul])], axis=1)
        tris = tris.reshape(-1, 3)
    else:
        c = (nx + 1) * (ny + 1) + np.arange(nx * ny)
        cx = 0.5 * (xs[i] + xs[i + 1])
        cy = 0.5 * (ys[j] + ys[j + 1])
        verts.append(np.column_stack([cx, cy]))
    if pattern is SplitPattern.CRISSCROSS:
        tris = np.stack(
            [
                np.column_stack([ll, lr, c]),
                np.column_stack([lr, ur, c]),
                np.column_stack([ur, ul, c]),
                np.column_stack([ul, ll, c]),
            ],
            axis=1,
        ).reshape(-1, 3)
    elif pattern is SplitPattern.LINKED_CENTERS:
        tris = _linked_centers(nx, ny, c.reshape(ny, nx))
    return from_arrays(np.vstack(verts), tris)


def _linked_centers(nx, ny, center):
    node = np.arange((nx + 1) * (ny + 1)).reshape(ny + 1, nx + 1)
    tris = []
    # horizontal cell sides: node[j, i] -- node[j, i + 1]
    for j in range(ny + 1):
        for i in range(nx):
            a, b = node[j, i], node[j, i + 1]
            below = center[j - 1, i] if j > 0 else None
            above = center[j, i] if j < ny else None
            if below is None:
                tris.append((a, b, above))
            elif above is None:
                tris.append((b, a, below))
            else:
                tris += [(a, below, above), (b, above, below)]
    # vertical cell sides: node[j, i] -- node[j + 1, i]
    for j in range(ny):
        for i in range(nx + 1):
            a, b = node[j, i], node[j + 1, i]
            left = center[j, i - 1] if i > 0 else None
            right = center[j, i] if i < nx else None
            if left is None:
                tris.append((b, a, right))
            elif right is None:
                tris.append((a, b, left))
            else:
                tris += [(a, right, left), (b, left, right)]
    return np.array(tris, dtype=np.int64)


def refine_red(mesh: TriMesh) -> TriMesh:
    """Split every triangle into four through its edge midpoints.

    New midpoint nodes are appended after the old nodes in edge order, so
    node ``num_nodes + e`` is the midpoint of edge ``e``.  Boundary tags are
    inherited from the parent edges.
    """
    nn = mesh.num_nodes
    mids = 0.5 * (mesh.vertices[mesh.edges[:, 0]] + mesh.vertices[mesh.edges[:, 1]])
    vertices = np.vstack([mesh.vertices, mids])

    t = mesh.triangles
    m = mesh.triangle_edges + nn  # m[:, k] is the midpoint opposite vertex k
    p0, p1, p2 = t[:, 0], t[:, 1], t[:, 2]
    m0, m1, m2 = m[:, 0], m[:, 1], m[:, 2]
    children = np.stack(
        [
            np.column_stack([p0, m2, m1]),
            np.column_stack([m2, p1, m0]),
            np.column_stack([m1, m0, p2]),
            np.column_stack([m0, m1, m2]),
        ],
        axis=1,
    ).reshape(-1, 3)

    node_tag = np.concatenate([mesh.node_tag, mesh.edge_tag])
    fine = from_arrays(vertices, children, node_tag=node_tag)

    # a fine edge inherits the tag of the coarse edge it halves
    parent_of_mid = np.full(len(vertices), -1, dtype=np.int64)
    parent_of_mid[nn:] = np.arange(mesh.num_edges)
    a, b = fine.edges[:, 0], fine.edges[:, 1]  # a < b, so b is the midpoint if any
    parent = np.where(a < nn, parent_of_mid[b], -1)
    edge_tag = np.zeros(fine.num_edges, dtype=np.int8)
    halves = parent >= 0
    # the half must actually lie on the parent (old endpoint belongs to it)
    on_parent = halves.copy()
    on_parent[halves] = (mesh.edges[parent[halves], 0] == a[halves]) | (
        mesh.edges[parent[halves], 1] == a[halves]
    )
    edge_tag[on_parent] = mesh.edge_tag[parent[on_parent]]
    return _retag(fine, fine.node_tag, edge_tag)


def _retag(mesh: TriMesh, node_tag, edge_tag) -> TriMesh:
    return TriMesh(
        vertices=mesh.vertices,
        triangles=mesh.triangles,
        edges=mesh.edges,
        triangle_edges=mesh.triangle_edges,
        edge_signs=mesh.edge_signs,
        node_tag=_frozen(np.asarray(node_tag, dtype=np.int8)),
        edge_tag=_frozen(np.asarray(edge_tag, dtype=np.int8)),
        areas=mesh.areas,
    )


Predicate = Callable[[np.ndarray, np.ndarray], np.ndarray]


def classify_boundary(
    mesh: TriMesh, dirichlet_region: Predicate, neumann_region: Predicate | None = None
) -> TriMesh:
    """Tag boundary edges and nodes from vectorized point predicates ``f(x, y)``.

    A boundary edge belongs to a region when both of its endpoints do.
    Nodes touching a Dirichlet edge are Dirichlet, otherwise nodes touching
    a Neumann edge are Neumann.
    """
    bnd = mesh.boundary_edges
    ends = mesh.vertices[mesh.edges[bnd]]  # (nb, 2, 2)

    def matches(pred):
        if pred is None:
            return np.zeros(len(bnd), dtype=bool)
        hit = np.asarray(pred(ends[..., 0], ends[..., 1]), dtype=bool)
        return hit.all(axis=1)

    is_d = matches(dirichlet_region)
    is_n = matches(neumann_region)
    if np.any(~is_d & ~is_n):
        raise MeshError(f"{np.sum(~is_d & ~is_n)} boundary edges match no region")
    if np.any(is_d & is_n):
        raise MeshError("boundary edge matches both regions")

    edge_tag = np.zeros(mesh.num_edges, dtype=np.int8)
    edge_tag[bnd[is_d]] = DIRICHLET
    edge_tag[bnd[is_n]] = NEUMANN
    node_tag = np.zeros(mesh.num_nodes, dtype=np.int8)
    node_tag[mesh.edges[bnd[is_n]].ravel()] = NEUMANN
    node_tag[mesh.edges[bnd[is_d]].ravel()] = DIRICHLET
    return _retag(mesh, node_tag, edge_tag)


def refine_to_level(mesh: TriMesh, level: int) -> TriMesh:
    """Level 1 is the given mesh; each further level is one red refinement."""
    if level < 1:
        raise ValueError("levels start at 1")
    for _ in range(level - 1):
        mesh = refine_red(mesh)
    return mesh
