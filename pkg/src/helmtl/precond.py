"""Shifted-Laplace, two-level deflated, and multilevel Krylov preconditioners.

Levels are indexed finest first: ``A[0]`` is the fine Helmholtz matrix and
``P[l]`` prolongates level ``l+1`` to level ``l``.  Coarse operators are
Galerkin products, which coincide with rediscretization for nested P1 spaces.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp

from . import krylov
from .assembly import (HelmholtzOperators, WavenumberField, assemble_helmholtz,
                       assemble_shifted, galerkin_coarse, helmholtz_operators)
from .mesh import MeshHierarchy
from .sparse import ilu_factor, lu_factor


@dataclass(frozen=True)
class CslConfig:
    """Shifted-Laplace inversion.  ``eps`` (absolute) overrides ``beta``
    (eps = beta k^2) when given."""

    beta: float = 1.0
    eps: Optional[float] = None
    solve_mode: str = "multigrid"  # "exact" | "multigrid" | "ilu"
    omega: float = 0.6
    pre_smooth: int = 1
    post_smooth: int = 1
    drop_tolerance: float = 1e-6

    def __post_init__(self):
        if self.solve_mode not in ("exact", "multigrid", "ilu"):
            raise ValueError(f"unknown CSL solve mode {self.solve_mode!r}")
        if not 0 < self.omega <= 1:
            raise ValueError("omega must lie in (0, 1]")
        if self.drop_tolerance < 0:
            raise ValueError("drop_tolerance must be nonnegative")
        if self.eps is None and self.beta <= 0:
            raise ValueError("beta must be positive")
        if self.eps is not None and self.eps < 0:
            raise ValueError("eps must be nonnegative")


@dataclass(frozen=True)
class TwoLevelConfig:
    coarsening_steps: int = 1  # H = 2^s h
    coarse_solve: str = "exact"  # "exact" | "ilu"
    drop_tolerance: float = 1e-6
    csl: CslConfig = field(default_factory=CslConfig)

    def __post_init__(self):
        if self.coarsening_steps < 1:
            raise ValueError("coarsening_steps must be >= 1")
        if self.coarse_solve not in ("exact", "ilu"):
            raise ValueError(f"unknown coarse solve {self.coarse_solve!r}")


@dataclass(frozen=True)
class MultilevelConfig:
    iteration_schedule: tuple = (8, 4, 2)
    csl: CslConfig = field(default_factory=CslConfig)

    def __post_init__(self):
        if any(int(m) < 1 for m in self.iteration_schedule):
            raise ValueError("schedule entries must be positive")


@dataclass(frozen=True)
class CslOnlyConfig:
    csl: CslConfig = field(default_factory=CslConfig)


_MK = re.compile(r"^MK\(\s*(\d+(?:\s*,\s*\d+)*)\s*\)$", re.IGNORECASE)


def parse_method(name: str, csl: CslConfig, tl_coarse_solve: str = "ilu",
                 drop_tolerance: float = 1e-6):
    """Map ``CSL``, ``TL-s`` or ``MK(l,m,n)`` to a preconditioner config."""
    name = name.strip()
    if name.upper() == "CSL":
        return CslOnlyConfig(csl)
    m = re.match(r"^TL-(\d+)$", name, re.IGNORECASE)
    if m:
        return TwoLevelConfig(int(m.group(1)), tl_coarse_solve, drop_tolerance, csl)
    m = _MK.match(name)
    if m:
        return MultilevelConfig(tuple(int(s) for s in m.group(1).split(",")), csl)
    raise ValueError(f"unknown method {name!r}")


# ---------------------------------------------------------------------------
# problem setup


@dataclass(eq=False)
class HelmholtzLevels:
    """Helmholtz matrices on every hierarchy level (finest first)."""

    A: list
    P: list
    ops: HelmholtzOperators
    field: WavenumberField
    shift_mass: list  # matrix multiplied by -i*eps per level (M or M_{k^2})
    hierarchy: Optional[MeshHierarchy] = None

    @property
    def n_levels(self) -> int:
        return len(self.A)

    def shifted(self, csl: CslConfig) -> list:
        """A_eps on every level for the shift described by ``csl``."""
        key = (csl.beta, csl.eps)
        cache = self.__dict__.setdefault("_shift_cache", {})
        if key not in cache:
            if csl.eps is not None:
                mats, coef = self.mass, csl.eps
            else:
                mats, coef = self.shift_mass, csl.beta
            cache[key] = [assemble_shifted(A, Mk, coef) for A, Mk in zip(self.A, mats)]
        return cache[key]

    @property
    def mass(self) -> list:
        cache = self.__dict__.setdefault("_mass", None)
        if cache is None:
            cache = [self.ops.M]
            for P in self.P:
                cache.append(galerkin_coarse(cache[-1], P))
            self.__dict__["_mass"] = cache
        return cache

    def prolongation(self, fine: int, coarse: int) -> sp.csr_matrix:
        """Composite prolongation from level ``coarse`` to level ``fine``."""
        Pc = None
        for l in range(coarse - 1, fine - 1, -1):
            Pc = self.P[l] if Pc is None else (self.P[l] @ Pc).tocsr()
        return Pc


def setup_levels(hierarchy: MeshHierarchy, field: WavenumberField) -> HelmholtzLevels:
    """Assemble on the finest mesh and form Galerkin coarse operators."""
    ops = helmholtz_operators(hierarchy.finest, field)
    A = [assemble_helmholtz(ops)]
    Mk = [ops.Mk2]
    P = list(reversed(hierarchy.prolongations))
    for Pl in P:
        A.append(galerkin_coarse(A[-1], Pl))
        Mk.append(galerkin_coarse(Mk[-1], Pl))
    return HelmholtzLevels(A, P, ops, field, Mk, hierarchy)


# ---------------------------------------------------------------------------
# shifted Laplace inversion


class ShiftedMultigrid:
    """One F(pre, post) cycle with damped Jacobi smoothing for A_eps.

    ``matrices[0]`` is the level the cycle starts on; the last level is solved
    exactly.  The F-cycle visits the coarse correction with an F-cycle
    followed by a V-cycle.
    """

    def __init__(self, matrices, prolongations, omega=0.6, pre_smooth=1, post_smooth=1):
        if len(prolongations) != len(matrices) - 1:
            raise ValueError("need one prolongation per level transition")
        self.A = matrices
        self.P = prolongations
        self.R = [P.conj().T.tocsr() for P in prolongations]
        self.omega = omega
        self.pre = pre_smooth
        self.post = post_smooth
        self.dinv = [omega / A.diagonal() for A in matrices]
        self.coarse = lu_factor(matrices[-1], dense_cutoff=400)

    def _smooth(self, l, x, b, steps):
        A, d = self.A[l], self.dinv[l]
        for _ in range(steps):
            if x is None:
                x = d * b
            else:
                x = x + d * (b - A @ x)
        return x

    def _cycle(self, l, b, x=None, kind="F"):
        if l == len(self.A) - 1:
            return self.coarse.solve(b)
        x = self._smooth(l, x, b, self.pre)
        r = b if x is None else b - self.A[l] @ x
        rc = self.R[l] @ r
        if kind == "F":
            ec = self._cycle(l + 1, rc, kind="F")
            ec = self._cycle(l + 1, rc, ec, kind="V")
        else:
            ec = self._cycle(l + 1, rc, kind="V")
        corr = self.P[l] @ ec
        x = corr if x is None else x + corr
        return self._smooth(l, x, b, self.post)

    def __call__(self, b):
        return self._cycle(0, np.asarray(b, dtype=complex), kind="F")

    def vcycle(self, b):
        return self._cycle(0, np.asarray(b, dtype=complex), kind="V")


def make_csl_solver(csl: CslConfig, levels: HelmholtzLevels, start: int = 0):
    """Callable approximating A_eps^{-1} on level ``start``."""
    Aeps = levels.shifted(csl)
    if csl.solve_mode == "exact":
        return lu_factor(Aeps[start]).solve
    if csl.solve_mode == "ilu":
        return ilu_factor(Aeps[start], csl.drop_tolerance).solve
    if start >= levels.n_levels - 1:
        return lu_factor(Aeps[start]).solve
    return ShiftedMultigrid(Aeps[start:], levels.P[start:], csl.omega, csl.pre_smooth, csl.post_smooth)


# ---------------------------------------------------------------------------
# deflated preconditioners


class TwoLevelPreconditioner:
    """B_eps = A_eps^{-1}(I - A P A_H^{-1} P^*) + P A_H^{-1} P^*.

    Each application costs one coarse solve, one shifted solve, and one fine
    matrix-vector product.
    """

    flexible = False

    def __init__(self, A, P, coarse_solve, shifted_solve):
        self.A = A
        self.P = P
        self.R = P.conj().T.tocsr()
        self.coarse_solve = coarse_solve
        self.shifted_solve = shifted_solve

    def __call__(self, r):
        r = np.asarray(r, dtype=complex)
        v = self.P @ self.coarse_solve(self.R @ r)
        return v + self.shifted_solve(r - self.A @ v)


class MultilevelKrylov:
    """Recursive two-level preconditioner whose coarse solves are a fixed
    number of FGMRES iterations preconditioned by the next level.

    ``schedule[j]`` is the iteration budget on level j+1; levels past the
    schedule get one iteration and the coarsest level is solved exactly.
    """

    flexible = True

    def __init__(self, config: MultilevelConfig, levels: HelmholtzLevels):
        if levels.n_levels < 2:
            raise ValueError("multilevel Krylov needs at least two levels")
        self.config = config
        self.levels = levels
        L = levels.n_levels
        self.shifted = [make_csl_solver(config.csl, levels, l) for l in range(L - 1)]
        self.coarsest = lu_factor(levels.A[-1], dense_cutoff=400)
        self.R = [P.conj().T.tocsr() for P in levels.P]
        self.inner_reports = []

    def budget(self, level: int) -> int:
        sched = self.config.iteration_schedule
        return int(sched[level - 1]) if level - 1 < len(sched) else 1

    def _coarse_solve(self, level, b):
        if level == self.levels.n_levels - 1:
            return self.coarsest.solve(b)
        A = self.levels.A[level]
        x, rep = krylov.fgmres(lambda v: A @ v, lambda v: self.apply(level, v), b,
                               tol=0.0, max_iter=self.budget(level))
        return x

    def apply(self, level, r):
        r = np.asarray(r, dtype=complex)
        v = self.levels.P[level] @ self._coarse_solve(level + 1, self.R[level] @ r)
        return v + self.shifted[level](r - self.levels.A[level] @ v)

    def __call__(self, r):
        return self.apply(0, r)


class CslPreconditioner:
    flexible = False

    def __init__(self, solve):
        self.solve = solve

    def __call__(self, r):
        return self.solve(np.asarray(r, dtype=complex))


def build_preconditioner(config, levels: HelmholtzLevels):
    """Instantiate the preconditioner described by ``config`` on the finest level."""
    if isinstance(config, CslConfig):
        config = CslOnlyConfig(config)
    if isinstance(config, CslOnlyConfig):
        return CslPreconditioner(make_csl_solver(config.csl, levels, 0))
    if isinstance(config, TwoLevelConfig):
        s = config.coarsening_steps
        if s >= levels.n_levels:
            raise ValueError(f"hierarchy has no level {s} below the finest")
        P = levels.prolongation(0, s)
        AH = levels.A[s]
        if config.coarse_solve == "ilu":
            coarse = ilu_factor(AH, config.drop_tolerance)
        else:
            coarse = lu_factor(AH)
        return TwoLevelPreconditioner(levels.A[0], P, coarse.solve,
                                      make_csl_solver(config.csl, levels, 0))
    if isinstance(config, MultilevelConfig):
        if len(config.iteration_schedule) > levels.n_levels - 1:
            raise ValueError("schedule longer than the hierarchy")
        return MultilevelKrylov(config, levels)
    raise TypeError(f"unsupported config {config!r}")


def two_level_from_matrices(A, Aeps, M, P, coarse_solve: str = "exact"):
    """Two-level preconditioner with exact shifted solve, for small systems."""
    AH = galerkin_coarse(A, P)
    coarse = lu_factor(AH) if coarse_solve == "exact" else ilu_factor(AH, 1e-6)
    return TwoLevelPreconditioner(A, P, coarse.solve, lu_factor(Aeps).solve)


def dense_operator(apply, n: int) -> np.ndarray:
    """Form the matrix of a linear map column by column."""
    out = np.empty((n, n), dtype=complex)
    E = np.eye(n, dtype=complex)
    for j in range(n):
        out[:, j] = apply(E[:, j])
    return out
