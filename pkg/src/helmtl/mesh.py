"""Uniform simplicial meshes of (0,1) and (0,1)^2 with nested refinement.

Vertices of 2D meshes are ordered lexicographically by (y, x); each square
cell is split along its lower-left/upper-right diagonal.  Every vertex is a
degree of freedom (impedance problems carry no essential conditions).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp


@dataclass(frozen=True, eq=False)
class Mesh:
    """P1 mesh.  ``vertices`` has shape (n, d), ``elements`` (n_el, d+1)."""

    dimension: int
    vertices: np.ndarray
    elements: np.ndarray
    boundary_facets: np.ndarray

    def __post_init__(self):
        for name in ("vertices", "elements", "boundary_facets"):
            getattr(self, name).setflags(write=False)

    @property
    def dof_count(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_elements(self) -> int:
        return self.elements.shape[0]

    def element_measures(self) -> np.ndarray:
        """Signed length (1D) or area (2D) of every element."""
        v = self.vertices[self.elements]
        if self.dimension == 1:
            return v[:, 1, 0] - v[:, 0, 0]
        e1 = v[:, 1] - v[:, 0]
        e2 = v[:, 2] - v[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    def centroids(self) -> np.ndarray:
        return self.vertices[self.elements].mean(axis=1)

    def points_per_side(self) -> int:
        if self.dimension == 1:
            return self.dof_count
        return int(round(np.sqrt(self.dof_count)))


@dataclass(frozen=True, eq=False)
class MeshHierarchy:
    """Nested meshes, coarsest first; ``prolongations[l]`` maps level l to l+1."""

    levels: list
    prolongations: list = field(default_factory=list)

    @property
    def n_levels(self) -> int:
        return len(self.levels)

    @property
    def finest(self) -> Mesh:
        return self.levels[-1]

    def prolongation(self, coarse: int, fine: int) -> sp.csr_matrix:
        """Composite prolongation from level ``coarse`` to level ``fine``."""
        if not 0 <= coarse <= fine < self.n_levels:
            raise ValueError(f"invalid level pair ({coarse}, {fine})")
        P = sp.identity(self.levels[coarse].dof_count, format="csr", dtype=complex)
        for l in range(coarse, fine):
            P = (self.prolongations[l] @ P).tocsr()
        return P


def build_interval_mesh(n_interior: int) -> Mesh:
    """Uniform mesh of (0,1) with ``n_interior`` interior vertices."""
    if n_interior < 1:
        raise ValueError("n_interior must be >= 1")
    n = n_interior + 2
    x = np.linspace(0.0, 1.0, n)
    elements = np.column_stack([np.arange(n - 1), np.arange(1, n)])
    facets = np.array([[0], [n - 1]])
    return Mesh(1, x[:, None], elements, facets)


def build_square_mesh(n_per_side: int) -> Mesh:
    """Uniform right-triangle mesh of the unit square with n_per_side^2 vertices."""
    if n_per_side < 2:
        raise ValueError("n_per_side must be >= 2")
    n = n_per_side
    t = np.linspace(0.0, 1.0, n)
    X, Y = np.meshgrid(t, t)  # row j <-> y_j, so ravel() gives (y, x) order
    vertices = np.column_stack([X.ravel(), Y.ravel()])
    i, j = np.meshgrid(np.arange(n - 1), np.arange(n - 1))
    v00 = (j * n + i).ravel()
    v10 = v00 + 1
    v01 = v00 + n
    v11 = v01 + 1
    lower = np.column_stack([v00, v10, v11])
    upper = np.column_stack([v00, v11, v01])
    elements = np.empty((2 * v00.size, 3), dtype=np.int64)
    elements[0::2] = lower
    elements[1::2] = upper
    return Mesh(2, vertices, elements, _boundary_edges(elements))


def _boundary_edges(triangles: np.ndarray) -> np.ndarray:
    edges = np.concatenate([triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [2, 0]]])
    edges = np.sort(edges, axis=1)
    uniq, counts = np.unique(edges, axis=0, return_counts=True)
    return uniq[counts == 1]


def _unique_edges(elements: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Unique sorted edges of a triangle list and the edge index of each local edge."""
    local = np.stack([elements[:, [1, 2]], elements[:, [2, 0]], elements[:, [0, 1]]], axis=1)
    flat = np.sort(local.reshape(-1, 2), axis=1)
    uniq, inverse = np.unique(flat, axis=0, return_inverse=True)
    return uniq, inverse.reshape(-1, 3)


def refine(mesh: Mesh) -> tuple[Mesh, sp.csr_matrix]:
    """Uniformly refine ``mesh`` and return it with the P1 prolongation matrix.

    1D elements are bisected; triangles are split into four through their
    edge midpoints.  The refined vertices are renumbered lexicographically by
    (y, x) so that refining a structured mesh reproduces the structured mesh
    numbering.
    """
    nc = mesh.dof_count
    if mesh.dimension == 1:
        order = np.argsort(mesh.vertices[:, 0])
        if not np.array_equal(order, np.arange(nc)):
            raise ValueError("1D mesh vertices must be sorted")
        e = mesh.elements
        mid_ids = nc + np.arange(e.shape[0])
        mids = 0.5 * (mesh.vertices[e[:, 0]] + mesh.vertices[e[:, 1]])
        verts = np.vstack([mesh.vertices, mids])
        elements = np.concatenate(
            [np.column_stack([e[:, 0], mid_ids]), np.column_stack([mid_ids, e[:, 1]])]
        )
        parents = e
    else:
        edges, local = _unique_edges(mesh.elements)
        mid_ids = nc + np.arange(edges.shape[0])
        mids = 0.5 * (mesh.vertices[edges[:, 0]] + mesh.vertices[edges[:, 1]])
        verts = np.vstack([mesh.vertices, mids])
        a, b, c = mesh.elements.T
        ma, mb, mc = (mid_ids[local[:, q]] for q in range(3))  # midpoint opposite a, b, c
        elements = np.concatenate(
            [
                np.column_stack([a, mc, mb]),
                np.column_stack([mc, b, ma]),
                np.column_stack([mb, ma, c]),
                np.column_stack([ma, mb, mc]),
            ]
        )
        parents = edges

    n_fine = verts.shape[0]
    rows = np.concatenate([np.arange(nc), np.repeat(mid_ids, 2)])
    cols = np.concatenate([np.arange(nc), parents.ravel()])
    vals = np.concatenate([np.ones(nc), np.full(2 * parents.shape[0], 0.5)])

    # renumber lexicographically by (y, x)
    keys = np.round(verts, 12)
    perm = np.lexsort(keys.T) if mesh.dimension == 2 else np.argsort(keys[:, 0], kind="stable")
    new_index = np.empty(n_fine, dtype=np.int64)
    new_index[perm] = np.arange(n_fine)
    verts = verts[perm]
    elements = new_index[elements]
    rows = new_index[rows]
    P = sp.csr_matrix((vals.astype(complex), (rows, cols)), shape=(n_fine, nc))
    P.sort_indices()

    if mesh.dimension == 1:
        facets = np.array([[0], [n_fine - 1]])
    else:
        facets = _boundary_edges(elements)
    return Mesh(mesh.dimension, verts, elements, facets), P


def build_hierarchy(coarsest: Mesh, n_levels: int) -> MeshHierarchy:
    if n_levels < 1:
        raise ValueError("n_levels must be >= 1")
    levels = [coarsest]
    prolongations = []
    for _ in range(n_levels - 1):
        fine, P = refine(levels[-1])
        levels.append(fine)
        prolongations.append(P)
    return MeshHierarchy(levels, prolongations)


def side_counts_until(start: int, threshold: int) -> list[int]:
    """Points per side under repeated uniform refinement from ``start`` until
    the count first exceeds ``threshold`` (inclusive of both ends)."""
    counts = [start]
    while counts[-1] <= threshold:
        counts.append(2 * counts[-1] - 1)
    return counts


def write_mesh(mesh: Mesh, path) -> None:
    """Plain-text dump: header line, vertex block, element block, facet block.

    Format::

        dimension <d>
        vertices <n>
        <x> [<y>]          (one line per vertex, 17 significant digits)
        elements <m>
        <i0> <i1> [<i2>]   (zero-based vertex indices)
        boundary_facets <b>
        <i0> [<i1>]
    """
    lines = [f"dimension {mesh.dimension}", f"vertices {mesh.dof_count}"]
    lines += [" ".join(f"{c:.17g}" for c in v) for v in mesh.vertices]
    lines.append(f"elements {mesh.n_elements}")
    lines += [" ".join(str(int(i)) for i in e) for e in mesh.elements]
    lines.append(f"boundary_facets {len(mesh.boundary_facets)}")
    lines += [" ".join(str(int(i)) for i in f) for f in mesh.boundary_facets]
    Path(path).write_text("\n".join(lines) + "\n")


def read_mesh(path) -> Mesh:
    tokens = Path(path).read_text().split("\n")
    it = iter(tokens)
    dim = int(next(it).split()[1])
    nv = int(next(it).split()[1])
    verts = np.array([[float(c) for c in next(it).split()] for _ in range(nv)])
    ne = int(next(it).split()[1])
    elems = np.array([[int(c) for c in next(it).split()] for _ in range(ne)], dtype=np.int64)
    nf = int(next(it).split()[1])
    facets = np.array([[int(c) for c in next(it).split()] for _ in range(nf)], dtype=np.int64)
    return Mesh(dim, verts.reshape(nv, dim), elems, facets.reshape(nf, dim))
