"""Field of values by Johnson's support-point method.

For each angle theta the largest eigenpair (lam, v) of the Hermitian part of
e^{i theta} C gives a boundary point v^* C v / v^* v.  The points trace the
boundary of F(C) from the inside; their convex hull is the polygonal
approximation.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
import scipy.linalg as la
import scipy.sparse.linalg as spla

DENSE_EIG_CUTOFF = 400


class EigenSolverError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class FovBoundary:
    angles: np.ndarray
    boundary_points: np.ndarray
    dimension: int

    def hull(self) -> np.ndarray:
        return convex_hull(self.boundary_points)


@dataclass(frozen=True)
class FovSummary:
    nu: float
    max_modulus: float

    @property
    def norm_bound(self) -> float:
        return 2.0 * self.max_modulus


def _is_operator(C) -> bool:
    return isinstance(C, spla.LinearOperator)


def extreme_hermitian_eig(H, v0=None, tol: float = 1e-8):
    """Largest eigenvalue and unit eigenvector of a Hermitian matrix.

    ``H`` is a dense array or a ``LinearOperator``.  Dense matrices up to
    ``DENSE_EIG_CUTOFF`` go straight to LAPACK; otherwise Lanczos (ARPACK)
    runs from ``v0``.  The result satisfies ||Hv - lam v|| <= tol ||H||; a
    dense matrix that misses it under Lanczos is retried with LAPACK.
    """
    if _is_operator(H):
        n = H.shape[0]
        scale = None
    else:
        H = np.asarray(H)
        n = H.shape[0]
        if H.shape != (n, n):
            raise ValueError("H must be square")
        scale = max(np.abs(H).max(), 1e-300)
        if np.abs(H - H.conj().T).max() > 1e-12 * scale:
            raise ValueError("H is not Hermitian")
        if n == 1:
            return float(H[0, 0].real), np.ones(1, dtype=complex)
        scale = np.linalg.norm(H, 1)
    if _is_operator(H) or n > DENSE_EIG_CUTOFF:
        try:
            lam, V = spla.eigsh(H, k=1, which="LA", v0=v0, tol=1e-12, ncv=min(n - 1, 30),
                                maxiter=50 * n)
            top = int(np.argmax(lam))
            v = V[:, top] / np.linalg.norm(V[:, top])
            lam = float(lam[top])
            res = np.linalg.norm(H @ v - lam * v)
            if res <= tol * (scale if scale is not None else max(abs(lam), 1.0)):
                return lam, v
            if _is_operator(H):
                raise EigenSolverError(f"Lanczos residual {res:.3e} above tolerance")
        except spla.ArpackNoConvergence as exc:
            if _is_operator(H):
                raise EigenSolverError("Lanczos did not converge") from exc
    try:
        w, V = la.eigh(H, subset_by_index=[n - 1, n - 1])
    except la.LinAlgError as exc:
        raise EigenSolverError(str(exc)) from exc
    return float(w[0]), V[:, 0]


def _hermitian_part(C, theta):
    e = np.exp(1j * theta)
    if _is_operator(C):
        return spla.LinearOperator(
            C.shape, dtype=complex,
            matvec=lambda v: 0.5 * (e * C.matvec(v) + np.conj(e) * C.rmatvec(v)))
    R = e * C
    return 0.5 * (R + R.conj().T)


def _support_point(C, theta, v0=None):
    try:
        _, v = extreme_hermitian_eig(_hermitian_part(C, theta), v0=v0)
    except EigenSolverError as exc:
        raise EigenSolverError(f"eigensolver failed at angle {theta}: {exc}") from exc
    Cv = C.matvec(v) if _is_operator(C) else C @ v
    return np.vdot(v, Cv) / np.vdot(v, v), v


def fov_boundary(C, n_angles: int = 256) -> FovBoundary:
    """Support points of F(C) at ``n_angles`` equally spaced angles.

    ``C`` is a dense matrix or a ``LinearOperator`` providing ``rmatvec``.
    """
    if not _is_operator(C):
        C = np.asarray(C, dtype=complex)
    n = C.shape[0]
    if C.shape != (n, n):
        raise ValueError("C must be square")
    if n > 4096:
        raise ValueError("field of values limited to n <= 4096")
    if n_angles < 8:
        raise ValueError("need at least 8 angles")
    if _is_operator(C) and n <= DENSE_EIG_CUTOFF:
        C = C.matmat(np.eye(n, dtype=complex))
    angles = 2 * np.pi * np.arange(n_angles) / n_angles
    points = np.empty(n_angles, dtype=complex)
    vecs = [None] * n_angles
    v = None
    for i, th in enumerate(angles):
        points[i], v = _support_point(C, th, v)
        vecs[i] = v
    if _is_operator(C):
        _repair(C, angles, points, vecs)
    return FovBoundary(angles, points, n)


def _repair(C, angles, points, vecs, rounds: int = 3):
    # Lanczos can lock onto the second eigenvalue where the top two cross.
    # Then another support point beats p_theta in direction theta; restart
    # from that point's vector, which has the larger Rayleigh quotient.
    rot = np.exp(1j * angles)
    for _ in range(rounds):
        vals = (rot[:, None] * points[None, :]).real
        own = np.diag(vals)
        best = vals.argmax(axis=1)
        gap = vals[np.arange(len(angles)), best] - own
        scale = np.abs(points).max()
        bad = np.flatnonzero(gap > 1e-10 * scale)
        if bad.size == 0:
            return
        for i in bad:
            z, v = _support_point(C, angles[i], vecs[best[i]])
            if (rot[i] * z).real > (rot[i] * points[i]).real:
                points[i], vecs[i] = z, v


def weighted_fov(C, mass_factorization, n_angles: int = 256) -> FovBoundary:
    """F_{M^-1}(C) = F(L^{-1} C L) with M = L L^*."""
    if mass_factorization is None:
        return fov_boundary(C, n_angles)
    fac = mass_factorization
    if _is_operator(C):
        L = fac.L
        T = spla.LinearOperator(
            C.shape, dtype=complex,
            matvec=lambda v: fac.solve_L(C.matvec(L @ v)),
            rmatvec=lambda v: L.conj().T @ C.rmatvec(fac.solve_Lh(v)))
        return fov_boundary(T, n_angles)
    C = np.asarray(C, dtype=complex)
    L = fac.L.toarray()
    T = la.solve_triangular(L, C @ L, lower=True)
    return fov_boundary(T, n_angles)


# ---------------------------------------------------------------------------
# planar geometry


def _cross(o, a, b):
    return (a.real - o.real) * (b.imag - o.imag) - (a.imag - o.imag) * (b.real - o.real)


def convex_hull(points) -> np.ndarray:
    """Counter-clockwise hull vertices (monotone chain) of complex points."""
    pts = sorted(set((float(p.real), float(p.imag)) for p in np.asarray(points).ravel()))
    if len(pts) <= 2:
        return np.array([complex(x, y) for x, y in pts])
    P = [complex(x, y) for x, y in pts]

    def half(seq):
        out = []
        for p in seq:
            while len(out) >= 2 and _cross(out[-2], out[-1], p) <= 0:
                out.pop()
            out.append(p)
        return out

    lower, upper = half(P), half(P[::-1])
    return np.array(lower[:-1] + upper[:-1])


def _segment_distance(z, a, b) -> float:
    d = b - a
    L2 = abs(d) ** 2
    if L2 == 0:
        return abs(z - a)
    t = min(1.0, max(0.0, ((z - a) * np.conj(d)).real / L2))
    return abs(z - (a + t * d))


def point_in_hull(z, hull, slack: float = 0.0) -> bool:
    """True if ``z`` lies in the convex polygon ``hull`` (ccw) up to ``slack``."""
    hull = np.asarray(hull)
    if hull.size == 0:
        return False
    if hull.size <= 2:
        return _segment_distance(z, hull[0], hull[-1]) <= slack
    inside = all(_cross(hull[i], hull[(i + 1) % len(hull)], z) >= 0 for i in range(len(hull)))
    return inside or hull_distance(z, hull) <= slack


def hull_distance(z, hull) -> float:
    """Distance from ``z`` to the boundary of the polygon (0-safe for segments)."""
    hull = np.asarray(hull)
    if hull.size == 1:
        return abs(z - hull[0])
    m = len(hull)
    return min(_segment_distance(z, hull[i], hull[(i + 1) % m]) for i in range(m))


def nu_min(boundary) -> float:
    """Distance from the origin to the convex hull of the boundary points."""
    pts = boundary.boundary_points if isinstance(boundary, FovBoundary) else np.asarray(boundary)
    hull = convex_hull(pts)
    if hull.size >= 3 and point_in_hull(0j, hull):
        return 0.0
    return float(hull_distance(0j, hull))


def is_convex(points, slack: float = 1e-8) -> bool:
    """Whether the points are in convex position.

    Every point must sit on the boundary of the hull of the set, up to
    ``slack`` times the diameter of the set.  Support points along a flat
    edge carry eigensolver noise in the tangential direction, so a test on
    consecutive turns is too strict.
    """
    pts = np.asarray(points).ravel()
    hull = convex_hull(pts)
    if hull.size < 3:
        return True
    diam = max(abs(a - b) for a in hull for b in hull)
    return all(hull_distance(z, hull) <= slack * diam for z in pts)


def summarize(boundary: FovBoundary) -> FovSummary:
    return FovSummary(nu_min(boundary), float(np.abs(boundary.boundary_points).max()))


# ---------------------------------------------------------------------------
# export


def write_fov_csv(path, boundary: FovBoundary) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["theta", "re", "im"])
        for th, z in zip(boundary.angles, boundary.boundary_points):
            w.writerow([repr(float(th)), repr(float(z.real)), repr(float(z.imag))])


def read_fov_csv(path) -> FovBoundary:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    angles = np.array([float(r["theta"]) for r in rows])
    pts = np.array([complex(float(r["re"]), float(r["im"])) for r in rows])
    return FovBoundary(angles, pts, 0)


def fov_svg(boundaries, labels=None, size: int = 600, title: str = "") -> str:
    """Standalone SVG with axes, the origin and z=1 marked, one closed path
    per boundary."""
    boundaries = list(boundaries)
    labels = labels or [""] * len(boundaries)
    pts = np.concatenate([b.boundary_points for b in boundaries] + [np.array([0, 1])])
    lo_x, hi_x = pts.real.min(), pts.real.max()
    lo_y, hi_y = pts.imag.min(), pts.imag.max()
    span = max(hi_x - lo_x, hi_y - lo_y, 1e-3) * 1.15
    cx, cy = (lo_x + hi_x) / 2, (lo_y + hi_y) / 2
    pad = 40

    def tx(z):
        x = pad + (z.real - cx + span / 2) / span * (size - 2 * pad)
        y = size - pad - (z.imag - cy + span / 2) / span * (size - 2 * pad)
        return x, y

    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
           f'viewBox="0 0 {size} {size}">',
           f'<rect width="{size}" height="{size}" fill="white"/>']
    x0, y0 = tx(0j)
    out.append(f'<line x1="{pad}" y1="{y0:.2f}" x2="{size - pad}" y2="{y0:.2f}" stroke="black" stroke-width="1"/>')
    out.append(f'<line x1="{x0:.2f}" y1="{pad}" x2="{x0:.2f}" y2="{size - pad}" stroke="black" stroke-width="1"/>')
    for z, name in ((0j, "0"), (1 + 0j, "1")):
        x, y = tx(z)
        out.append(f'<circle cx="{x:.2f}" cy="{y:.2f}" r="3" fill="black"/>')
        out.append(f'<text x="{x + 4:.2f}" y="{y + 14:.2f}" font-size="12">{name}</text>')
    for i, (b, lab) in enumerate(zip(boundaries, labels)):
        coords = [tx(z) for z in convex_hull(b.boundary_points)]
        if not coords:
            continue
        d = "M " + " L ".join(f"{x:.2f} {y:.2f}" for x, y in coords) + " Z"
        c = colors[i % len(colors)]
        out.append(f'<path d="{d}" fill="none" stroke="{c}" stroke-width="1.5"/>')
        if lab:
            out.append(f'<text x="{pad}" y="{pad + 14 * (i + 1)}" font-size="12" fill="{c}">{lab}</text>')
    if title:
        out.append(f'<text x="{size / 2}" y="20" font-size="14" text-anchor="middle">{title}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def operator_norm(C) -> float:
    """Spectral norm; ARPACK singular value for matrix-free operators."""
    if _is_operator(C):
        s = spla.svds(C, k=1, which="LM", tol=1e-12, return_singular_vectors=False)
        return float(s[0])
    return float(np.linalg.norm(np.asarray(C), 2))


def elman_inputs(C, boundary: FovBoundary | None = None, n_angles: int = 256):
    """(nu, ||C||) for the residual bound of GMRES on C."""
    if boundary is None:
        boundary = fov_boundary(C, n_angles)
    return nu_min(boundary), operator_norm(C)

