"""P1 finite-element matrices for the impedance Helmholtz problem.

All element integrals are exact.  A variable wavenumber is sampled at element
centroids (and boundary-edge midpoints) and held constant per element.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .mesh import Mesh


@dataclass(frozen=True)
class WavenumberField:
    """Constant wavenumber, or the three-layer wedge scaled by ``k``."""

    k: float
    variant: str = "constant"

    def __post_init__(self):
        if self.k <= 0:
            raise ValueError("wavenumber must be positive")
        if self.variant not in ("constant", "wedge"):
            raise ValueError(f"unknown wavenumber variant {self.variant!r}")

    @classmethod
    def constant(cls, k: float) -> "WavenumberField":
        return cls(float(k), "constant")

    @classmethod
    def wedge(cls, k_ref: float) -> "WavenumberField":
        return cls(float(k_ref), "wedge")

    @property
    def is_constant(self) -> bool:
        return self.variant == "constant"

    def __call__(self, x, y=None):
        x = np.asarray(x, dtype=float)
        if self.is_constant:
            return np.full(x.shape, self.k)
        if y is None:
            raise ValueError("the wedge wavenumber needs both coordinates")
        y = np.asarray(y, dtype=float)
        out = np.full(np.broadcast(x, y).shape, 2.0 * self.k)
        out = np.where(y < -0.2 * x + 0.8, self.k, out)
        out = np.where(y < 0.2 * x + 0.2, 4.0 * self.k / 3.0, out)
        return out

    def sample(self, points: np.ndarray) -> np.ndarray:
        """Evaluate at an (n, d) array of points."""
        if self.is_constant:
            return np.full(points.shape[0], self.k)
        if points.shape[1] != 2:
            raise ValueError("the wedge wavenumber is only defined in 2D")
        return self(points[:, 0], points[:, 1])


@dataclass(frozen=True, eq=False)
class HelmholtzOperators:
    """Stiffness S, mass M, boundary mass N, and the wavenumber-weighted
    mass ``Mk2`` (k^2 inside the integral) and boundary mass ``Nk``."""

    S: sp.csr_matrix
    M: sp.csr_matrix
    N: sp.csr_matrix
    Mk2: sp.csr_matrix
    Nk: sp.csr_matrix
    field: WavenumberField

    @property
    def dof_count(self) -> int:
        return self.S.shape[0]


def _to_csr(rows, cols, vals, n) -> sp.csr_matrix:
    A = sp.coo_matrix((vals.astype(complex), (rows, cols)), shape=(n, n)).tocsr()
    A.sum_duplicates()
    A.sort_indices()
    return A


def _scatter(elements: np.ndarray, local: np.ndarray, n: int) -> sp.csr_matrix:
    nloc = elements.shape[1]
    rows = np.repeat(elements, nloc, axis=1).ravel()
    cols = np.tile(elements, (1, nloc)).ravel()
    return _to_csr(rows, cols, local.ravel(), n)


def element_stiffness(mesh: Mesh) -> np.ndarray:
    """Local stiffness matrices, shape (n_el, d+1, d+1)."""
    meas = mesh.element_measures()
    if np.any(meas <= 0):
        raise ValueError("mesh has non-positive element measures")
    if mesh.dimension == 1:
        base = np.array([[1.0, -1.0], [-1.0, 1.0]])
        return base[None] / meas[:, None, None]
    v = mesh.vertices[mesh.elements]
    # gradient of barycentric lambda_a is rot90(edge opposite a) / (2 area)
    x, y = v[..., 0], v[..., 1]
    gx = np.stack([y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]], axis=1)
    gy = np.stack([x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]], axis=1)
    dots = gx[:, :, None] * gx[:, None, :] + gy[:, :, None] * gy[:, None, :]
    return dots / (4.0 * meas)[:, None, None]


def element_mass(mesh: Mesh) -> np.ndarray:
    meas = mesh.element_measures()
    if mesh.dimension == 1:
        base = np.array([[2.0, 1.0], [1.0, 2.0]]) / 6.0
    else:
        base = (np.ones((3, 3)) + np.eye(3)) / 12.0
    return base[None] * meas[:, None, None]


def assemble_stiffness(mesh: Mesh, weight=None) -> sp.csr_matrix:
    local = element_stiffness(mesh)
    if weight is not None:
        local = local * np.asarray(weight)[:, None, None]
    return _scatter(mesh.elements, local, mesh.dof_count)


def assemble_mass(mesh: Mesh, weight=None) -> sp.csr_matrix:
    """Mass matrix; ``weight`` is an optional per-element coefficient."""
    local = element_mass(mesh)
    if weight is not None:
        local = local * np.asarray(weight)[:, None, None]
    return _scatter(mesh.elements, local, mesh.dof_count)


def assemble_boundary_mass(mesh: Mesh, weight=None) -> sp.csr_matrix:
    """Boundary mass.  In 1D the boundary integral is point evaluation at the
    two endpoints; in 2D it is the 1D P1 mass over each boundary edge."""
    facets = mesh.boundary_facets
    if mesh.dimension == 1:
        vals = np.ones(facets.shape[0]) if weight is None else np.asarray(weight, dtype=float)
        return _to_csr(facets[:, 0], facets[:, 0], vals, mesh.dof_count)
    pts = mesh.vertices[facets]
    length = np.linalg.norm(pts[:, 1] - pts[:, 0], axis=1)
    if weight is not None:
        length = length * np.asarray(weight)
    local = np.array([[2.0, 1.0], [1.0, 2.0]])[None] / 6.0 * length[:, None, None]
    return _scatter(facets, local, mesh.dof_count)


def facet_midpoints(mesh: Mesh) -> np.ndarray:
    return mesh.vertices[mesh.boundary_facets].mean(axis=1)


def helmholtz_operators(mesh: Mesh, field: WavenumberField) -> HelmholtzOperators:
    if not field.is_constant and mesh.dimension != 2:
        raise ValueError("the wedge wavenumber requires a 2D mesh")
    S = assemble_stiffness(mesh)
    M = assemble_mass(mesh)
    N = assemble_boundary_mass(mesh)
    if field.is_constant:
        Mk2 = (field.k ** 2 * M).tocsr()
        Nk = (field.k * N).tocsr()
    else:
        k_el = field.sample(mesh.centroids())
        k_bd = field.sample(facet_midpoints(mesh))
        Mk2 = assemble_mass(mesh, k_el ** 2)
        Nk = assemble_boundary_mass(mesh, k_bd)
    return HelmholtzOperators(S, M, N, Mk2, Nk, field)


def assemble_helmholtz(ops: HelmholtzOperators) -> sp.csr_matrix:
    """A = S - M_{k^2} - i N_k  (= S - k^2 M - ik N for constant k)."""
    return (ops.S - ops.Mk2 - 1j * ops.Nk).tocsr()


def assemble_shifted(A: sp.spmatrix, M: sp.spmatrix, eps: float) -> sp.csr_matrix:
    """A_eps = A - i eps M."""
    if A.shape != M.shape:
        raise ValueError(f"shape mismatch {A.shape} vs {M.shape}")
    if eps == 0:
        return sp.csr_matrix(A, dtype=complex, copy=True)
    return (A - 1j * eps * M).tocsr()


def shifted_from_rule(ops: HelmholtzOperators, A: sp.spmatrix, beta: float) -> sp.csr_matrix:
    """Shifted matrix for eps = beta k^2 with k^2 taken locally (the weighted
    mass M_{k^2}); identical to ``assemble_shifted(A, M, beta k^2)`` for
    constant k."""
    return assemble_shifted(A, ops.Mk2, beta)


def galerkin_coarse(A: sp.spmatrix, P: sp.spmatrix) -> sp.csr_matrix:
    """A_H = P^* A P."""
    if A.shape[1] != P.shape[0] or A.shape[0] != P.shape[0]:
        raise ValueError(f"shape mismatch A {A.shape}, P {P.shape}")
    AH = (P.conj().T @ (A @ P)).tocsr()
    AH.sort_indices()
    return AH
