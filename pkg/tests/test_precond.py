import numpy as np
import pytest
import scipy.sparse as sp

from helmtl import experiments as ex
from helmtl.assembly import WavenumberField, galerkin_coarse
from helmtl.krylov import fgmres, gmres
from helmtl.mesh import build_hierarchy, build_interval_mesh, build_square_mesh
from helmtl.precond import (CslConfig, CslOnlyConfig, MultilevelConfig, MultilevelKrylov,
                            ShiftedMultigrid, TwoLevelConfig, build_preconditioner,
                            dense_operator, make_csl_solver, parse_method, setup_levels,
                            two_level_from_matrices)


def _levels_1d(k, n_interior, n_levels):
    h = build_hierarchy(build_interval_mesh(n_interior), n_levels)
    return setup_levels(h, WavenumberField.constant(k))


def _levels_2d(k, n_side, n_levels):
    h = build_hierarchy(build_square_mesh(n_side), n_levels)
    return setup_levels(h, WavenumberField.constant(k))


def _crand(rng, n):
    return rng.standard_normal(n) + 1j * rng.standard_normal(n)


def _tl(levels, eps, steps=1):
    cfg = TwoLevelConfig(steps, "exact", csl=CslConfig(eps=eps, solve_mode="exact"))
    return build_preconditioner(cfg, levels)


@pytest.mark.parametrize("make", [lambda: _levels_1d(10, 30, 3), lambda: _levels_2d(6, 4, 3)])
def test_zero_shift_inverts_A(make):
    levels = make()
    A = levels.A[0]
    B = _tl(levels, 0.0)
    rng = np.random.default_rng(0)
    for _ in range(5):
        r = _crand(rng, A.shape[0])
        assert np.linalg.norm(A @ B(r) - r) / np.linalg.norm(r) <= 1e-10


@pytest.mark.parametrize("steps", [1, 2, 3])
@pytest.mark.parametrize("beta", [1.0, 5.0])
def test_coarse_space_is_reproduced(steps, beta):
    k = 8.0
    levels = _levels_2d(k, 3, 5)
    B = _tl(levels, beta * k * k, steps)
    A = levels.A[0]
    P = levels.prolongation(0, steps)
    y = _crand(np.random.default_rng(steps), P.shape[1])
    Py = P @ y
    assert np.linalg.norm(B(A @ Py) - Py) <= 1e-10 * np.linalg.norm(Py)


def _dense_identity_check(levels, eps, steps=1):
    A = levels.A[0].toarray()
    M = levels.ops.M.toarray()
    P = levels.prolongation(0, steps).toarray()
    n = A.shape[0]
    Aeps = A - 1j * eps * M
    AH = P.conj().T @ A @ P
    J = M @ np.linalg.solve(Aeps, np.eye(n) - A @ P @ np.linalg.solve(AH, P.conj().T))
    B = dense_operator(_tl(levels, eps, steps), n)
    return np.abs(A @ B - np.eye(n) - 1j * eps * J).max()


@pytest.mark.parametrize("beta", [1.0, 5.0])
def test_shifted_identity_dense(beta):
    k = 10.0
    levels_1d = _levels_1d(k, 50, 2)          # n = 103
    levels_2d = _levels_2d(k, 7, 2)           # n = 169
    for levels in (levels_1d, levels_2d):
        assert levels.A[0].shape[0] <= 200
        assert _dense_identity_check(levels, beta * k * k) <= 1e-10


def test_eigenvalue_one_multiplicity():
    k = 6.0
    levels = _levels_1d(k, 30, 2)   # N_H = 32, N_h = 63
    n = levels.A[0].shape[0]
    NH = levels.A[1].shape[0]
    A = levels.A[0].toarray()
    AB = A @ dense_operator(_tl(levels, k * k), n)
    ev = np.linalg.eigvals(AB)
    assert np.sum(np.abs(ev - 1) < 1e-8) >= NH
    # geometric: A P spans an eigenspace for eigenvalue 1
    AP = A @ levels.P[0].toarray()
    assert np.abs(AB @ AP - AP).max() <= 1e-10 * np.abs(AP).max()


def test_jacobi_exact_on_diagonal():
    d = np.array([2.0, 3.0 - 1j, 4.0, 5.0, 1.0j])
    D = sp.diags(d).tocsr()
    P = sp.csr_matrix(np.array([[1.0], [0.5], [0.0], [0.5], [1.0]]), dtype=complex)
    mg = ShiftedMultigrid([D, galerkin_coarse(D, P)], [P], omega=1.0)
    b = np.arange(1, 6) + 0j
    assert np.allclose(mg(b), b / d, atol=1e-14)
    assert np.allclose(mg.vcycle(b), b / d, atol=1e-14)


def test_multigrid_cycle_contracts():
    k = 10.0
    levels = _levels_1d(k, 6, 5)
    csl = CslConfig(beta=1.0)
    mg = make_csl_solver(csl, levels, 0)
    Aeps = levels.shifted(csl)[0]
    rng = np.random.default_rng(1)
    for _ in range(5):
        x = _crand(rng, Aeps.shape[0])
        e1 = x - mg(Aeps @ x)
        assert np.linalg.norm(e1) / np.linalg.norm(x) < 1


def test_fcycle_structure_against_manual_recursion():
    # two levels: the F- and V-cycles reduce to a two-grid cycle
    levels = _levels_1d(4.0, 7, 2)
    csl = CslConfig(beta=1.0)
    A0, A1 = levels.shifted(csl)
    P = levels.P[0]
    w = 0.6
    mg = ShiftedMultigrid([A0, A1], [P], omega=w)
    b = _crand(np.random.default_rng(2), A0.shape[0])
    D = A0.diagonal()
    x = w * b / D
    x = x + P @ np.linalg.solve(A1.toarray(), P.conj().T @ (b - A0 @ x))
    x = x + w * (b - A0 @ x) / D
    # F-cycle at the second-to-last level applies the exact coarse solve twice
    x2 = w * b / D
    ec = np.linalg.solve(A1.toarray(), P.conj().T @ (b - A0 @ x2))
    x2 = x2 + P @ ec
    x2 = x2 + w * (b - A0 @ x2) / D
    assert np.allclose(mg.vcycle(b), x, atol=1e-12)
    assert np.allclose(mg(b), x2, atol=1e-12)


def test_exact_csl_solve():
    levels = _levels_2d(5.0, 5, 2)
    csl = CslConfig(beta=1.0, solve_mode="exact")
    s = make_csl_solver(csl, levels, 0)
    Ae = levels.shifted(csl)[0]
    r = _crand(np.random.default_rng(3), Ae.shape[0])
    assert np.linalg.norm(Ae @ s(r) - r) / np.linalg.norm(r) <= 1e-10


def test_multilevel_exactness_limit_matches_two_level():
    levels = _levels_2d(4.0, 3, 4)  # 3, 5, 9, 17 points per side
    csl = CslConfig(beta=1.0, solve_mode="exact")
    dofs = tuple(A.shape[0] for A in levels.A[1:-1])
    mk = build_preconditioner(MultilevelConfig(dofs, csl), levels)
    tl = build_preconditioner(TwoLevelConfig(1, "exact", csl=csl), levels)
    rng = np.random.default_rng(4)
    for _ in range(3):
        r = _crand(rng, levels.A[0].shape[0])
        assert np.linalg.norm(mk(r) - tl(r)) <= 1e-8 * np.linalg.norm(tl(r))


def test_multilevel_budget_and_schedule():
    levels = _levels_2d(4.0, 3, 4)
    mk = MultilevelKrylov(MultilevelConfig((8,)), levels)
    assert [mk.budget(l) for l in (1, 2, 3)] == [8, 1, 1]
    with pytest.raises(ValueError):
        build_preconditioner(MultilevelConfig((1, 1, 1, 1)), levels)


def test_multigrid_counts_close_to_exact_csl():
    for k in (10, 20):
        levels = ex.square_levels(k)
        its = {}
        for mode in ("exact", "multigrid"):
            _, rep = ex.solve_with(levels, "CSL", 1.0, csl_mode=mode)
            assert rep.converged
            its[mode] = rep.iterations
        assert its["multigrid"] <= its["exact"] + 5


def test_csl_k10_iterations_near_reference():
    _, rep = ex.solve_with(ex.square_levels(10), "CSL", 1.0)
    assert abs(rep.iterations - 14) <= 3


def test_mk_k20_iterations_near_reference():
    _, rep = ex.solve_with(ex.square_levels(20), "MK(8,4,2)", 1.0)
    assert rep.converged and abs(rep.iterations - 7) <= 3


def test_mk_exact_budget_reproduces_tl1_count():
    levels = ex.square_levels(5)  # 3, 5, 9 points per side
    assert levels.n_levels == 3
    csl = CslConfig(beta=1.0)
    A = levels.A[0]
    b = np.ones(A.shape[0], dtype=complex)
    tl = build_preconditioner(TwoLevelConfig(1, "exact", csl=csl), levels)
    mk = build_preconditioner(MultilevelConfig((levels.A[1].shape[0],), csl), levels)
    _, r_tl = gmres(lambda v: A @ v, b, preconditioner=tl)
    _, r_mk = fgmres(lambda v: A @ v, mk, b)
    assert r_tl.iterations == r_mk.iterations
    assert np.allclose(r_tl.residual_history, r_mk.residual_history, rtol=1e-6)


def test_two_level_from_matrices():
    levels = _levels_1d(5.0, 10, 2)
    A = levels.A[0]
    Ae = levels.shifted(CslConfig(beta=1.0))[0]
    B = two_level_from_matrices(A, Ae, levels.ops.M, levels.P[0])
    Bref = _tl(levels, 25.0)
    r = _crand(np.random.default_rng(5), A.shape[0])
    assert np.allclose(B(r), Bref(r))


def test_parse_method():
    csl = CslConfig()
    assert isinstance(parse_method("csl", csl), CslOnlyConfig)
    tl = parse_method("TL-3", csl)
    assert tl.coarsening_steps == 3 and tl.coarse_solve == "ilu"
    assert parse_method("MK(6, 4, 2)", csl).iteration_schedule == (6, 4, 2)
    for bad in ("TL", "MK()", "GMRES"):
        with pytest.raises(ValueError):
            parse_method(bad, csl)


def test_config_validation():
    with pytest.raises(ValueError):
        CslConfig(omega=0.0)
    with pytest.raises(ValueError):
        CslConfig(beta=-1.0)
    with pytest.raises(ValueError):
        CslConfig(solve_mode="direct")
    with pytest.raises(ValueError):
        TwoLevelConfig(coarsening_steps=0)
    with pytest.raises(ValueError):
        MultilevelConfig((2, 0))
    levels = _levels_1d(3.0, 3, 2)
    with pytest.raises(ValueError):
        build_preconditioner(TwoLevelConfig(2), levels)


def test_local_shift_equals_global_for_constant_k():
    k = 7.0
    levels = _levels_2d(k, 5, 2)
    a = levels.shifted(CslConfig(beta=2.0))
    b = levels.shifted(CslConfig(eps=2 * k * k))
    for x, y in zip(a, b):
        assert abs(x - y).max() <= 1e-12 * abs(x).max()
