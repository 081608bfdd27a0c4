"""Full GMRES and flexible GMRES in a configurable inner product."""
from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

Operator = Callable[[np.ndarray], np.ndarray]

REORTH_FACTOR = 1.0 / math.sqrt(2.0)
BREAKDOWN_TOL = 1e-14


class InnerProduct:
    """(x, y)_D = y^* D x.  Subclasses provide ``gram(x) = D x``."""

    name = "euclidean"

    def gram(self, x: np.ndarray) -> np.ndarray:
        return x

    def dot(self, x, y) -> complex:
        return np.vdot(y, self.gram(x))

    def norm(self, x) -> float:
        return math.sqrt(max(np.vdot(x, self.gram(x)).real, 0.0))


Euclidean = InnerProduct


class MassInverseInnerProduct(InnerProduct):
    """(x, y)_{M^-1} = y^* M^{-1} x, the dual L2 pairing on P1 coordinates."""

    name = "mass-inverse"

    def __init__(self, mass_factorization):
        self.factorization = mass_factorization

    def gram(self, x):
        return self.factorization.solve(x)


@dataclass
class SolveReport:
    iterations: int = 0
    residual_history: list = field(default_factory=list)
    converged: bool = False
    wall_time: float = 0.0
    breakdown: bool = False
    orthogonality_warning: bool = False

    @property
    def final_residual(self) -> float:
        return self.residual_history[-1] if self.residual_history else float("nan")


def write_history_csv(path, report: SolveReport) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iteration", "relative_residual"])
        for i, r in enumerate(report.residual_history):
            w.writerow([i, repr(float(r))])


def _givens(a: complex, b: float):
    if a == 0:
        return 0.0, 1.0 + 0j
    nu = math.hypot(abs(a), b)
    return abs(a) / nu, (a / abs(a)) * b / nu


def _solve(apply_operator: Operator, rhs, x0, tol, max_iter, ip, precond, flexible):
    start = time.perf_counter()
    if ip is None:
        ip = InnerProduct()
    rhs = np.asarray(rhs, dtype=complex)
    n = rhs.shape[0]
    x = np.zeros(n, dtype=complex) if x0 is None else np.array(x0, dtype=complex)
    if x.shape != rhs.shape:
        raise ValueError("x0 and rhs have different shapes")
    if max_iter < 1:
        raise ValueError("max_iter must be positive")

    r = rhs - apply_operator(x) if np.any(x) else rhs.copy()
    beta = ip.norm(r)
    report = SolveReport(residual_history=[1.0])
    if beta == 0.0:
        report.residual_history = [0.0]
        report.converged = True
        report.wall_time = time.perf_counter() - start
        return x, report

    V = [r / beta]
    DV = [ip.gram(V[0])]
    Z = []
    H = np.zeros((max_iter + 1, max_iter), dtype=complex)
    cs = np.zeros(max_iter)
    sn = np.zeros(max_iter, dtype=complex)
    g = np.zeros(max_iter + 1, dtype=complex)
    g[0] = beta

    m = 0
    for j in range(max_iter):
        if precond is not None:
            z = precond(V[j])
            if flexible:
                Z.append(z)
            w = apply_operator(z)
        else:
            w = apply_operator(V[j])
        w = np.array(w, dtype=complex)
        Dw = ip.gram(w)
        if Dw is w:
            Dw = None
        norm0 = math.sqrt(max(np.vdot(w, w if Dw is None else Dw).real, 0.0))

        norm_before = norm0
        for sweep in range(2):
            for i in range(j + 1):
                h = np.vdot(DV[i], w)
                H[i, j] += h
                w -= h * V[i]
                if Dw is not None:
                    Dw -= h * DV[i]
            hnext = math.sqrt(max(np.vdot(w, w if Dw is None else Dw).real, 0.0))
            if hnext >= REORTH_FACTOR * norm_before or hnext <= BREAKDOWN_TOL * norm0:
                break
            if sweep == 1:
                report.orthogonality_warning = True
            norm_before = hnext
        H[j + 1, j] = hnext

        for i in range(j):
            t = cs[i] * H[i, j] + sn[i] * H[i + 1, j]
            H[i + 1, j] = -np.conj(sn[i]) * H[i, j] + cs[i] * H[i + 1, j]
            H[i, j] = t
        cs[j], sn[j] = _givens(H[j, j], hnext)
        H[j, j] = cs[j] * H[j, j] + sn[j] * hnext
        H[j + 1, j] = 0.0
        g[j + 1] = -np.conj(sn[j]) * g[j]
        g[j] = cs[j] * g[j]

        m = j + 1
        rel = abs(g[j + 1]) / beta
        report.residual_history.append(rel)
        breakdown = hnext <= BREAKDOWN_TOL * norm0
        if rel <= tol or breakdown:
            report.breakdown = breakdown
            break
        V.append(w / hnext)
        DV.append(V[-1] if Dw is None else Dw / hnext)

    y = _back_substitute(H[:m, :m], g[:m])
    if flexible:
        update = sum(yi * zi for yi, zi in zip(y, Z))
    else:
        update = sum(yi * vi for yi, vi in zip(y, V[:m]))
        if precond is not None:
            update = precond(update)
    x = x + update
    report.iterations = m
    report.converged = report.residual_history[-1] <= tol or report.breakdown
    report.wall_time = time.perf_counter() - start
    return x, report


def _back_substitute(R, g):
    m = R.shape[0]
    y = np.zeros(m, dtype=complex)
    for i in range(m - 1, -1, -1):
        if R[i, i] == 0:
            # singular least-squares factor after exact breakdown on a singular system
            y[i] = 0.0
            continue
        y[i] = (g[i] - R[i, i + 1:] @ y[i + 1:]) / R[i, i]
    return y


def gmres(apply_operator: Operator, rhs, x0=None, tol: float = 1e-6, max_iter: int = 200,
          ip: Optional[InnerProduct] = None, preconditioner: Optional[Operator] = None):
    """Unrestarted GMRES (Arnoldi with modified Gram-Schmidt).

    With ``preconditioner`` B, solves A B g = rhs - A x0 and returns
    x = x0 + B g; B must be a fixed linear map.  Residuals are measured in
    ``ip`` relative to the initial residual.

    Returns
    -------
    x : ndarray
    report : SolveReport
    """
    if not 0 <= tol < 1:
        raise ValueError("tol must lie in [0, 1)")
    return _solve(apply_operator, rhs, x0, tol, max_iter, ip, preconditioner, flexible=False)


def fgmres(apply_operator: Operator, apply_preconditioner: Operator, rhs, x0=None,
           tol: float = 1e-6, max_iter: int = 200, ip: Optional[InnerProduct] = None):
    """Flexible right-preconditioned GMRES; the preconditioner may change
    from one iteration to the next (the preconditioned vectors are stored)."""
    if not 0 <= tol < 1:
        raise ValueError("tol must lie in [0, 1)")
    return _solve(apply_operator, rhs, x0, tol, max_iter, ip, apply_preconditioner, flexible=True)


def elman_rate(nu: float, opnorm: float, n: int) -> float:
    """Field-of-values residual bound (1 - nu^2/||C||^2)^(n/2)."""
    if nu < 0 or opnorm <= 0 or n < 0:
        raise ValueError("need nu >= 0, opnorm > 0, n >= 0")
    if nu > opnorm * (1 + 1e-12):
        raise ValueError(f"nu={nu} exceeds the operator norm {opnorm}")
    base = max(0.0, 1.0 - (nu / opnorm) ** 2)
    return base ** (n / 2)
