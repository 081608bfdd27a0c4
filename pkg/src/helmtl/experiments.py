"""Experiment harness: field-of-values plots in 1D and iteration tables in 2D."""
from __future__ import annotations

import csv
import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np
import scipy.sparse.linalg as spla

from . import fov, krylov
from .assembly import WavenumberField, galerkin_coarse
from .mesh import (build_hierarchy, build_interval_mesh, build_square_mesh, side_counts_until,
                   write_mesh)
from .precond import (CslConfig, HelmholtzLevels, TwoLevelPreconditioner, parse_method,
                      build_preconditioner, setup_levels)
from .sparse import hpd_factor, lu_factor, read_matrix_market, write_matrix_market

log = logging.getLogger(__name__)

EXPERIMENTS = ("fov-1d", "table-csl-tl", "table-mk", "wedge")

DEFAULTS = {
    "fov-1d": dict(ks=(10, 20, 40), full_ks=(10, 20, 40, 60), betas=(1.0, 5.0),
                   methods=("CSL", "TL-1")),
    "table-csl-tl": dict(ks=(10, 20, 40), full_ks=(10, 20, 40, 80, 100), betas=(1.0, 2.0, 5.0),
                         methods=("CSL", "TL-1", "TL-2", "TL-3"), alpha=0.6),
    "table-mk": dict(ks=(20, 40), full_ks=(20, 40, 80, 120, 160), betas=(1.0, 2.0),
                     methods=("CSL", "MK(8,4,2)", "MK(6,4,2)"), alpha=0.6),
    "wedge": dict(ks=(20, 40), full_ks=(20, 40, 60, 80, 100), betas=(1.0, 2.0),
                  methods=("CSL", "MK(8,4,2)", "MK(6,4,2)"), alpha=1.1),
}


@dataclass
class ExperimentSpec:
    experiment: str
    ks: tuple = ()
    betas: tuple = ()
    methods: tuple = ()
    coarse_rule: str = "k2"  # 1D only: "k2" -> ceil(k^2/2), "k32" -> ceil(k^1.5/2)
    alpha: float = 0.6
    tol: float = 1e-6
    max_iter: int = 200
    n_angles: int = 256
    inner_product: str = "euclidean"
    out_dir: Optional[str] = None
    check_identities: bool = True

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"unknown experiment {self.experiment!r}")
        d = DEFAULTS[self.experiment]
        self.ks = tuple(self.ks or d["ks"])
        self.betas = tuple(float(b) for b in (self.betas or d["betas"]))
        self.methods = tuple(self.methods or d["methods"])
        if any(k <= 0 for k in self.ks):
            raise ValueError("wavenumbers must be positive")
        if self.coarse_rule not in ("k2", "k32"):
            raise ValueError(f"unknown coarse rule {self.coarse_rule!r}")
        for m in self.methods:
            parse_method(m, CslConfig())

    @classmethod
    def default(cls, experiment: str, full: bool = False, **kw) -> "ExperimentSpec":
        d = DEFAULTS[experiment]
        kw.setdefault("ks", d["full_ks"] if full else d["ks"])
        if "alpha" in d:
            kw.setdefault("alpha", d["alpha"])
        return cls(experiment, **kw)


@dataclass
class ResultRow:
    k: float
    eps_rule: str
    eps: float
    method: str
    iterations: int
    converged: bool
    wall_time: float
    n_dofs: int = 0
    nu: Optional[float] = None
    max_modulus: Optional[float] = None
    opnorm: Optional[float] = None


def eps_rule_label(beta: float) -> str:
    return f"{beta:g}k^2"


# ---------------------------------------------------------------------------
# CSV


def write_rows(path, rows, include_time: bool = True) -> None:
    names = [f.name for f in fields(ResultRow) if include_time or f.name != "wall_time"]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names)
        for r in rows:
            d = asdict(r)
            w.writerow(["" if d[n] is None else _fmt(d[n]) for n in names])


def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def read_rows(path) -> list:
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        for d in csv.DictReader(fh):
            out.append(ResultRow(
                k=float(d["k"]), eps_rule=d["eps_rule"], eps=float(d["eps"]), method=d["method"],
                iterations=int(d["iterations"]), converged=d["converged"] == "true",
                wall_time=float(d.get("wall_time") or 0.0), n_dofs=int(d["n_dofs"]),
                nu=float(d["nu"]) if d.get("nu") else None,
                max_modulus=float(d["max_modulus"]) if d.get("max_modulus") else None,
                opnorm=float(d["opnorm"]) if d.get("opnorm") else None))
    return out


def format_table(rows) -> str:
    """Plain-text pivot: one line per (k, eps rule), one column per method.
    Non-converged runs print as '-'."""
    methods = list(dict.fromkeys(r.method for r in rows))
    keys = list(dict.fromkeys((r.k, r.eps_rule) for r in rows))
    cell = {(r.k, r.eps_rule, r.method): r for r in rows}
    lines = ["k".rjust(6) + "  " + "eps".ljust(7) + "".join(m.rjust(12) for m in methods)]
    for k, rule in keys:
        line = f"{k:6g}  {rule:<7}"
        for m in methods:
            r = cell.get((k, rule, m))
            line += ("" if r is None else str(r.iterations) if r.converged else "-").rjust(12)
        lines.append(line)
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# problem construction


def interior_points_1d(k: float, rule: str) -> int:
    if rule == "k2":
        return math.ceil(k * k / 2)
    if rule == "k32":
        return math.ceil(k ** 1.5 / 2)
    raise ValueError(f"unknown coarse rule {rule!r}")


def interval_levels(k: float, rule: str = "k2") -> HelmholtzLevels:
    """Two nested 1D meshes: N_H = interior + 2, N_h = 2 N_H - 1."""
    coarse = build_interval_mesh(interior_points_1d(k, rule))
    return setup_levels(build_hierarchy(coarse, 2), WavenumberField.constant(k))


def square_side_counts(k: float, alpha: float) -> list:
    return side_counts_until(3, math.ceil(alpha * k ** 1.5))


def square_levels(k: float, alpha: float = 0.6, wedge: bool = False) -> HelmholtzLevels:
    """Hierarchy refined from 3 points per side until the side count exceeds
    ceil(alpha k^1.5)."""
    counts = square_side_counts(k, alpha)
    field_ = WavenumberField.wedge(k) if wedge else WavenumberField.constant(k)
    return setup_levels(build_hierarchy(build_square_mesh(3), len(counts)), field_)


def preconditioned_operators(levels: HelmholtzLevels, beta: float):
    """Matrix-free A A_eps^{-1} and A B_eps (exact solves) with adjoints."""
    A = levels.A[0]
    n = A.shape[0]
    csl = CslConfig(beta=beta, solve_mode="exact")
    Aeps = levels.shifted(csl)[0]
    Ah = A.conj().T.tocsr()
    lu = lu_factor(Aeps)
    luh = lu_factor(Aeps.conj().T.tocsr())
    P = levels.P[0]
    R = P.conj().T.tocsr()
    AH = galerkin_coarse(A, P)
    luH = lu_factor(AH)
    luHh = lu_factor(AH.conj().T.tocsr())

    csl_op = spla.LinearOperator((n, n), dtype=complex,
                                 matvec=lambda v: A @ lu.solve(v),
                                 rmatvec=lambda v: luh.solve(Ah @ v))
    B = TwoLevelPreconditioner(A, P, luH.solve, lu.solve)

    def tl_rmatvec(v):
        # (A B)^* = (I - P A_H^{-*} P^* A^*) A_eps^{-*} A^* + P A_H^{-*} P^* A^*
        w = Ah @ v
        y = luh.solve(w)
        return y - P @ luHh.solve(R @ (Ah @ y)) + P @ luHh.solve(R @ w)

    tl_op = spla.LinearOperator((n, n), dtype=complex, matvec=lambda v: A @ B(v),
                                rmatvec=tl_rmatvec)
    return csl_op, tl_op


def verify_identities(levels: HelmholtzLevels, beta: float, steps: int = 1, n_samples: int = 3,
                      seed: int = 0) -> dict:
    """Randomized residuals of the two-level algebra with exact solves:
    eps=0 collapse, B A P = P, and A B = I + i eps M A_eps^{-1}(I - A P A_H^{-1} P^*).
    Constant wavenumber only (the last identity uses eps M)."""
    rng = np.random.default_rng(seed)
    A = levels.A[0]
    M = levels.ops.M
    n = A.shape[0]
    k = levels.field.k
    eps = beta * k * k
    P = levels.prolongation(0, steps)
    R = P.conj().T.tocsr()
    AH = galerkin_coarse(A, P)
    luH = lu_factor(AH)
    Aeps = (A - 1j * eps * M).tocsr()
    lu_eps = lu_factor(Aeps)
    lu_A = lu_factor(A)
    B = TwoLevelPreconditioner(A, P, luH.solve, lu_eps.solve)
    B0 = TwoLevelPreconditioner(A, P, luH.solve, lu_A.solve)
    out = {"collapse": 0.0, "coarse_space": 0.0, "shifted_identity": 0.0}
    for _ in range(n_samples):
        r = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        out["collapse"] = max(out["collapse"], np.linalg.norm(A @ B0(r) - r) / np.linalg.norm(r))
        y = rng.standard_normal(P.shape[1]) + 1j * rng.standard_normal(P.shape[1])
        Py = P @ y
        out["coarse_space"] = max(out["coarse_space"],
                                  np.linalg.norm(B(A @ Py) - Py) / np.linalg.norm(Py))
        J = M @ lu_eps.solve(r - A @ (P @ luH.solve(R @ r)))
        out["shifted_identity"] = max(out["shifted_identity"],
                                      np.linalg.norm(A @ B(r) - r - 1j * eps * J) / np.linalg.norm(r))
    return out


# ---------------------------------------------------------------------------
# solves


def _inner_product(name: str, levels: HelmholtzLevels):
    if name == "euclidean":
        return None
    if name == "mass-inverse":
        return krylov.MassInverseInnerProduct(hpd_factor(levels.ops.M))
    raise ValueError(f"unknown inner product {name!r}")


def solve_with(levels: HelmholtzLevels, method: str, beta: float, tol: float = 1e-6,
               max_iter: int = 200, inner_product: str = "euclidean", rhs=None,
               csl_mode: str = "multigrid", tl_coarse_solve: str = "ilu"):
    """Solve A x = rhs (default: ones) preconditioned by ``method``."""
    A = levels.A[0]
    n = A.shape[0]
    b = np.ones(n, dtype=complex) if rhs is None else np.asarray(rhs, dtype=complex)
    cfg = parse_method(method, CslConfig(beta=beta, solve_mode=csl_mode), tl_coarse_solve)
    t0 = time.perf_counter()
    B = build_preconditioner(cfg, levels)
    ip = _inner_product(inner_product, levels)
    if B.flexible:
        x, rep = krylov.fgmres(lambda v: A @ v, B, b, tol=tol, max_iter=max_iter, ip=ip)
    else:
        x, rep = krylov.gmres(lambda v: A @ v, b, tol=tol, max_iter=max_iter, ip=ip,
                              preconditioner=B)
    rep.wall_time = time.perf_counter() - t0
    return x, rep


def _row(k, beta, method, rep, n, max_iter) -> ResultRow:
    its = rep.iterations if rep.converged else max_iter
    return ResultRow(float(k), eps_rule_label(beta), float(beta * k * k), method, its,
                     bool(rep.converged), rep.wall_time, n)


def _out(spec: ExperimentSpec) -> Optional[Path]:
    if spec.out_dir is None:
        return None
    p = Path(spec.out_dir)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _fail_fast(levels: HelmholtzLevels, betas, max_steps: int) -> None:
    for beta in betas:
        for s in range(1, max_steps + 1):
            res = verify_identities(levels, beta, steps=s)
            bad = {k: v for k, v in res.items() if v > 1e-10}
            if bad:
                raise RuntimeError(f"two-level identities violated (beta={beta}, steps={s}): {bad}")


def run_table(spec: ExperimentSpec) -> list:
    """Iteration table for the 2D experiments (CSL/TL, MK, or wedge)."""
    wedge = spec.experiment == "wedge"
    rows = []
    for i, k in enumerate(spec.ks):
        levels = square_levels(k, spec.alpha, wedge=wedge)
        n = levels.A[0].shape[0]
        if i == 0 and spec.check_identities:
            check = levels if not wedge else square_levels(k, spec.alpha)
            _fail_fast(check, spec.betas, min(3, check.n_levels - 1))
        for beta in spec.betas:
            for method in spec.methods:
                _, rep = solve_with(levels, method, beta, spec.tol, spec.max_iter,
                                    spec.inner_product)
                row = _row(k, beta, method, rep, n, spec.max_iter)
                log.info("k=%g eps=%s %s: %s%s (%.2fs)", k, row.eps_rule, method, row.iterations,
                         "" if row.converged else " (not converged)", row.wall_time)
                rows.append(row)
    out = _out(spec)
    if out is not None:
        write_rows(out / f"{spec.experiment}.csv", rows)
        (out / f"{spec.experiment}.txt").write_text(format_table(rows) + "\n")
    return rows


def run_table_csl_tl(spec: ExperimentSpec) -> list:
    return run_table(spec)


def run_table_mk(spec: ExperimentSpec) -> list:
    return run_table(spec)


def run_wedge(spec: ExperimentSpec) -> list:
    return run_table(spec)


@dataclass
class FovResult:
    k: float
    beta: float
    matrix: str  # "AAeps^-1" or "AB_eps"
    boundary: fov.FovBoundary
    summary: fov.FovSummary
    row: ResultRow
    report: krylov.SolveReport = field(repr=False, default=None)


def run_fov_experiment(spec: ExperimentSpec) -> list:
    """Field of values of A A_eps^{-1} and A B_eps on the 1D problem, plus a
    GMRES solve (ones right-hand side) on each preconditioned system."""
    results = []
    for k in spec.ks:
        levels = interval_levels(k, spec.coarse_rule)
        n = levels.A[0].shape[0]
        if n > 4096:
            raise ValueError(f"k={k}: n={n} exceeds the dense field-of-values cap")
        mass = hpd_factor(levels.ops.M) if spec.inner_product == "mass-inverse" else None
        ip = krylov.MassInverseInnerProduct(mass) if mass is not None else None
        for beta in spec.betas:
            csl_op, tl_op = preconditioned_operators(levels, beta)
            for name, C in (("AAeps^-1", csl_op), ("AB_eps", tl_op)):
                t0 = time.perf_counter()
                if mass is None:
                    bnd = fov.fov_boundary(C, spec.n_angles)
                    norm = fov.operator_norm(C)
                else:
                    bnd = fov.weighted_fov(C, mass, spec.n_angles)
                    norm = _weighted_norm(C, mass)
                summ = fov.summarize(bnd)
                _, rep = krylov.gmres(C.matvec, np.ones(n, dtype=complex), tol=spec.tol,
                                      max_iter=spec.max_iter, ip=ip)
                rep.wall_time = time.perf_counter() - t0
                row = _row(k, beta, "CSL" if name.startswith("AAeps") else "TL-1", rep, n,
                           spec.max_iter)
                row.nu, row.max_modulus, row.opnorm = summ.nu, summ.max_modulus, norm
                log.info("k=%g eps=%s %s: nu=%.4f max|z|=%.4f", k, row.eps_rule, name,
                         summ.nu, summ.max_modulus)
                results.append(FovResult(k, beta, name, bnd, summ, row, rep))
    out = _out(spec)
    if out is not None:
        write_rows(out / f"fov-1d-{spec.coarse_rule}.csv", [r.row for r in results])
        for r in results:
            tag = "csl" if r.matrix.startswith("AAeps") else "tl"
            fov.write_fov_csv(out / f"fov-{spec.coarse_rule}-{tag}-k{r.k:g}-beta{r.beta:g}.csv",
                              r.boundary)
        for beta in spec.betas:
            for tag, name in (("csl", "AAeps^-1"), ("tl", "AB_eps")):
                sel = [r for r in results if r.beta == beta and r.matrix == name]
                svg = fov.fov_svg([r.boundary for r in sel], [f"k={r.k:g}" for r in sel],
                                  title=f"F({name}), eps={beta:g}k^2, rule {spec.coarse_rule}")
                (out / f"fov-{spec.coarse_rule}-{tag}-beta{beta:g}.svg").write_text(svg)
    return results


def _weighted_norm(C, mass) -> float:
    L = mass.L
    n = C.shape[0]
    T = spla.LinearOperator((n, n), dtype=complex,
                            matvec=lambda v: mass.solve_L(C.matvec(L @ v)),
                            rmatvec=lambda v: L.conj().T @ C.rmatvec(mass.solve_Lh(v)))
    return fov.operator_norm(T)


# ---------------------------------------------------------------------------
# export


def export_system(out_dir, k: float, beta: float = 1.0, dimension: int = 1, size: int = 8,
                  coarsening_steps: int = 1, wedge: bool = False) -> dict:
    """Write S, M, N, A, A_eps, P, A_H (MatrixMarket) plus mesh and manifest.

    ``size`` is the number of interior points (1D) or points per side (2D)
    of the coarse mesh; the fine mesh is ``coarsening_steps`` refinements of it.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    coarse = build_interval_mesh(size) if dimension == 1 else build_square_mesh(size)
    hier = build_hierarchy(coarse, coarsening_steps + 1)
    field_ = WavenumberField.wedge(k) if wedge else WavenumberField.constant(k)
    levels = setup_levels(hier, field_)
    ops = levels.ops
    P = levels.prolongation(0, coarsening_steps)
    mats = {
        "S": ops.S, "M": ops.M, "N": ops.N, "A": levels.A[0],
        "A_eps": levels.shifted(CslConfig(beta=beta))[0],
        "P": P, "A_H": galerkin_coarse(levels.A[0], P),
    }
    files = {}
    for name, mat in mats.items():
        fname = f"{name}.mtx"
        write_matrix_market(out / fname, mat, comment=f"{name} k={k:g} beta={beta:g}")
        files[name] = fname
    write_mesh(hier.finest, out / "mesh.txt")
    manifest = {"k": k, "beta": beta, "eps": beta * k * k, "dimension": dimension,
                "coarse_size": size, "coarsening_steps": coarsening_steps,
                "field": field_.variant, "n_fine": levels.A[0].shape[0],
                "n_coarse": P.shape[1], "files": files, "mesh": "mesh.txt"}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest


def load_system(out_dir) -> tuple:
    out = Path(out_dir)
    manifest = json.loads((out / "manifest.json").read_text())
    mats = {name: read_matrix_market(out / f) for name, f in manifest["files"].items()}
    return manifest, mats
