"""Complex sparse matrices, factorizations, and MatrixMarket I/O.

Matrices are ``scipy.sparse.csr_matrix`` with complex128 data, sorted column
indices, and no stored entries below 1e-300 in magnitude.  The factorizations
wrap SuperLU (full LU / threshold ILU) and a sparse LDL^* route for HPD
matrices.
"""
from __future__ import annotations

import warnings
from pathlib import Path

import numpy as np
import scipy.io
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla


class FactorizationError(RuntimeError):
    """Raised when a factorization hits a zero or non-positive pivot."""


def as_csr(A, prune: float = 1e-300) -> sp.csr_matrix:
    """Canonical complex CSR copy of ``A``."""
    A = sp.csr_matrix(A, dtype=complex, copy=True)
    A.sum_duplicates()
    if A.nnz:
        A.data[np.abs(A.data) < prune] = 0
        A.eliminate_zeros()
    A.sort_indices()
    return A


def matvec(A, x) -> np.ndarray:
    x = np.asarray(x)
    if A.shape[1] != x.shape[0]:
        raise ValueError(f"dimension mismatch: {A.shape} @ {x.shape}")
    return A @ x


def adjoint_matvec(A, x) -> np.ndarray:
    """A^* x without forming A^*."""
    x = np.asarray(x)
    if A.shape[0] != x.shape[0]:
        raise ValueError(f"dimension mismatch: {A.shape}^* @ {x.shape}")
    return np.conj(A.T @ np.conj(x))


class Factorization:
    """Common interface: ``solve(b)`` and ``shape``."""

    kind = "abstract"

    def __init__(self, n: int):
        self.n = n

    @property
    def shape(self):
        return (self.n, self.n)

    def solve(self, b):
        raise NotImplementedError

    def __call__(self, b):
        return self.solve(b)


class LUFactorization(Factorization):
    """PA = LU with partial pivoting (dense for small matrices, SuperLU otherwise)."""

    kind = "lu"

    def __init__(self, A, dense_cutoff: int = 0):
        super().__init__(A.shape[0])
        if sp.issparse(A) and A.shape[0] > dense_cutoff:
            self._dense = None
            try:
                self._lu = spla.splu(sp.csc_matrix(A, dtype=complex))
            except RuntimeError as exc:
                raise FactorizationError(f"LU failed: {exc}") from exc
        else:
            Ad = A.toarray() if sp.issparse(A) else np.asarray(A, dtype=complex)
            with warnings.catch_warnings():
                # singularity is reported below as FactorizationError
                warnings.simplefilter("ignore", la.LinAlgWarning)
                lu, piv = la.lu_factor(Ad, check_finite=True)
            if np.any(np.abs(np.diag(lu)) <= np.finfo(float).eps * max(np.abs(lu).max(), 1e-300)):
                raise FactorizationError("matrix is singular to working precision")
            self._dense = (lu, piv)

    def solve(self, b):
        b = np.asarray(b, dtype=complex)
        if self._dense is not None:
            return la.lu_solve(self._dense, b)
        return self._lu.solve(b)


class ILUFactorization(Factorization):
    """Threshold incomplete LU (SuperLU ILUTP) with a row-relative drop rule."""

    kind = "ilu"

    def __init__(self, A, drop_tolerance: float, fill_factor: float = 100.0):
        super().__init__(A.shape[0])
        if drop_tolerance < 0:
            raise ValueError("drop_tolerance must be nonnegative")
        self.drop_tolerance = drop_tolerance
        A = sp.csc_matrix(A, dtype=complex)
        try:
            if drop_tolerance == 0:
                self._lu = spla.splu(A)
            else:
                self._lu = spla.spilu(A, drop_tol=drop_tolerance, fill_factor=fill_factor)
        except RuntimeError as exc:
            raise FactorizationError(
                f"ILU hit a zero pivot ({exc}); retry with a smaller drop tolerance"
            ) from exc

    def solve(self, b):
        return self._lu.solve(np.asarray(b, dtype=complex))


class CholeskyFactorization(Factorization):
    """M = L L^* for Hermitian positive definite M.

    Computed as an unpivoted LDL^* (SuperLU with natural ordering and no
    pivoting), then L <- L sqrt(D).  ``L`` is exposed as a sparse matrix.
    """

    kind = "cholesky"

    def __init__(self, M):
        super().__init__(M.shape[0])
        M = sp.csc_matrix(M, dtype=complex)
        herm_err = abs(M - M.conj().T).max() if M.nnz else 0.0
        scale = abs(M).max() if M.nnz else 1.0
        if herm_err > 1e-12 * scale:
            raise FactorizationError("matrix is not Hermitian")
        try:
            lu = spla.splu(M, permc_spec="NATURAL", diag_pivot_thresh=0.0,
                           options={"SymmetricMode": True})
        except RuntimeError as exc:
            raise FactorizationError(f"matrix is not HPD: {exc}") from exc
        n = self.n
        if not (np.array_equal(lu.perm_r, np.arange(n)) and np.array_equal(lu.perm_c, np.arange(n))):
            raise FactorizationError("unexpected pivoting in HPD factorization")
        d = lu.U.diagonal()
        if np.any(np.abs(d.imag) > 1e-10 * np.abs(d.real)) or np.any(d.real <= 0):
            raise FactorizationError("matrix is not HPD (non-positive pivot)")
        self.L = (lu.L @ sp.diags(np.sqrt(d.real))).tocsr()
        self._lu = lu

    def solve(self, b):
        return self._lu.solve(np.asarray(b, dtype=complex))

    def solve_L(self, b):
        return spla.spsolve_triangular(self.L, np.asarray(b, dtype=complex), lower=True)

    def solve_Lh(self, b):
        return spla.spsolve_triangular(self.L.conj().T.tocsr(), np.asarray(b, dtype=complex), lower=False)


def lu_factor(A, dense_cutoff: int = 0) -> LUFactorization:
    if A.shape[0] != A.shape[1]:
        raise ValueError("matrix must be square")
    return LUFactorization(A, dense_cutoff=dense_cutoff)


def ilu_factor(A, drop_tolerance: float) -> ILUFactorization:
    if A.shape[0] != A.shape[1]:
        raise ValueError("matrix must be square")
    return ILUFactorization(A, drop_tolerance)


def hpd_factor(M) -> CholeskyFactorization:
    if M.shape[0] != M.shape[1]:
        raise ValueError("matrix must be square")
    return CholeskyFactorization(M)


def write_matrix_market(path, A, comment: str = "") -> None:
    """Complex coordinate MatrixMarket file with 17 significant digits."""
    A = as_csr(A)
    scipy.io.mmwrite(str(path), A, comment=comment, field="complex", precision=17,
                     symmetry="general")


def read_matrix_market(path) -> sp.csr_matrix:
    path = Path(path)
    if not path.exists() and path.with_suffix(path.suffix + ".mtx").exists():
        path = path.with_suffix(path.suffix + ".mtx")
    return as_csr(scipy.io.mmread(str(path)))
