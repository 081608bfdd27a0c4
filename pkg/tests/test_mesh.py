import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from helmtl.mesh import (build_hierarchy, build_interval_mesh, build_square_mesh, read_mesh,
                         refine, side_counts_until, write_mesh)


def _hat_values_2d(coarse, points):
    """Coarse P1 basis functions evaluated at ``points`` by locating each point
    in a coarse triangle and taking barycentric coordinates."""
    out = np.zeros((len(points), coarse.dof_count))
    tri = coarse.vertices[coarse.elements]
    for p_idx, p in enumerate(points):
        for e, T in enumerate(tri):
            Mx = np.array([[T[0, 0], T[1, 0], T[2, 0]], [T[0, 1], T[1, 1], T[2, 1]], [1, 1, 1]])
            lam = np.linalg.solve(Mx, [p[0], p[1], 1.0])
            if np.all(lam >= -1e-12):
                out[p_idx, coarse.elements[e]] = lam
                break
        else:
            raise AssertionError("point outside the mesh")
    return out


def test_interval_mesh_basic():
    m = build_interval_mesh(3)
    assert m.dof_count == 5
    assert np.allclose(m.vertices[:, 0], [0, 0.25, 0.5, 0.75, 1])
    assert m.n_elements == 4
    assert m.boundary_facets.tolist() == [[0], [4]]


def test_square_mesh_three_by_three():
    m = build_square_mesh(3)
    assert m.dof_count == 9 and m.n_elements == 8
    assert len(m.boundary_facets) == 8
    # (y, x) lexicographic order
    assert np.allclose(m.vertices[1], [0.5, 0.0]) and np.allclose(m.vertices[3], [0.0, 0.5])
    assert np.allclose(m.element_measures(), 1 / 8)
    # every cell is split from lower-left to upper-right
    for e in m.elements.reshape(-1, 2, 3):
        shared = set(e[0]) & set(e[1])
        a, b = (m.vertices[i] for i in sorted(shared))
        assert np.allclose(b - a, [0.5, 0.5])


def test_mesh_is_immutable():
    m = build_square_mesh(3)
    with pytest.raises(ValueError):
        m.vertices[0, 0] = 1.0


@pytest.mark.parametrize("n", [2, 3, 5])
def test_refining_square_reproduces_structured_mesh(n):
    fine, P = refine(build_square_mesh(n))
    ref = build_square_mesh(2 * n - 1)
    assert np.allclose(fine.vertices, ref.vertices)
    key = lambda els: sorted(tuple(sorted(e)) for e in els)
    assert key(fine.elements) == key(ref.elements)
    assert P.shape == (ref.dof_count, n * n)


def test_interval_prolongation_entries():
    _, P = refine(build_interval_mesh(1))
    expected = np.array([[1, 0, 0], [0.5, 0.5, 0], [0, 1, 0], [0, 0.5, 0.5], [0, 0, 1]])
    assert np.allclose(P.toarray(), expected)


@settings(max_examples=10, deadline=None)
@given(st.integers(min_value=1, max_value=20))
def test_interval_prolongation_matches_interpolation(n):
    coarse = build_interval_mesh(n)
    fine, P = refine(coarse)
    xc, xf = coarse.vertices[:, 0], fine.vertices[:, 0]
    for j in range(coarse.dof_count):
        hat = np.interp(xf, xc, np.eye(coarse.dof_count)[j])
        assert np.allclose(P.toarray()[:, j], hat, atol=1e-14)


@pytest.mark.parametrize("n", [2, 3, 4])
def test_square_prolongation_matches_interpolation(n):
    coarse = build_square_mesh(n)
    fine, P = refine(coarse)
    assert np.allclose(P.toarray(), _hat_values_2d(coarse, fine.vertices), atol=1e-13)


def test_prolongation_reproduces_linears():
    coarse = build_square_mesh(5)
    fine, P = refine(coarse)
    f = lambda v: 2 * v[:, 0] - 3 * v[:, 1] + 0.5
    assert np.allclose(P @ f(coarse.vertices), f(fine.vertices))


def test_hierarchy_composite_prolongation():
    h = build_hierarchy(build_square_mesh(3), 4)
    assert [m.points_per_side() for m in h.levels] == [3, 5, 9, 17]
    P = h.prolongation(0, 3)
    ref = h.prolongations[2] @ h.prolongations[1] @ h.prolongations[0]
    assert abs(P - ref).max() < 1e-15
    with pytest.raises(ValueError):
        h.prolongation(2, 1)


def test_refined_areas_sum_to_one():
    m = build_square_mesh(4)
    for _ in range(2):
        m, _ = refine(m)
        assert np.all(m.element_measures() > 0)
        assert np.isclose(m.element_measures().sum(), 1.0)


def test_side_count_rule():
    # 3 -> 5 -> 9 -> ... until the count exceeds ceil(0.6 k^1.5)
    assert side_counts_until(3, 19)[-1] == 33  # k = 10
    assert side_counts_until(3, 54)[-1] == 65  # k = 20
    assert side_counts_until(3, 152)[-1] == 257  # k = 40


def test_mesh_text_roundtrip(tmp_path):
    for m in (build_interval_mesh(4), build_square_mesh(4)):
        write_mesh(m, tmp_path / "m.txt")
        r = read_mesh(tmp_path / "m.txt")
        assert r.dimension == m.dimension
        assert np.array_equal(r.vertices, m.vertices)
        assert np.array_equal(r.elements, m.elements)
        assert np.array_equal(r.boundary_facets, m.boundary_facets)


def test_invalid_sizes():
    with pytest.raises(ValueError):
        build_interval_mesh(0)
    with pytest.raises(ValueError):
        build_square_mesh(1)
