import numpy as np
import pytest

from cuspkit.numcore import (
    CLAMP,
    WRAP,
    DegeneratePolynomialError,
    GridSpec,
    RealPolynomial,
    connected_components,
    fd_jacobian,
    grid_path,
    newton_solve,
    newton_solve_batch,
    real_roots_clustered,
    sign_components,
    trace_zero_curve,
)


# -- polynomials ----------------------------------------------------------------------


def test_polynomial_strips_leading_zeros():
    p = RealPolynomial([1.0, 2.0, 0.0, 0.0])
    assert p.degree == 1
    assert RealPolynomial([]).is_zero


def test_polynomial_eval_and_derivative():
    p = RealPolynomial([1.0, -3.0, 2.0])  # 2x^2 - 3x + 1
    assert p(2.0) == pytest.approx(3.0)
    assert p.derivative().coefficients == (-3.0, 4.0)
    assert p.derivative(5).is_zero


def test_reversed_maps_roots_to_reciprocals():
    p = RealPolynomial.from_roots([2.0, -4.0, 0.5])
    r = [c.value for c in real_roots_clustered(p.reversed())]
    assert r == pytest.approx(sorted([0.5, -0.25, 2.0]))


def test_simple_real_roots():
    out = real_roots_clustered(RealPolynomial.from_roots([-1.0, 0.5, 3.0]))
    assert [c.value for c in out] == pytest.approx([-1.0, 0.5, 3.0])
    assert all(c.multiplicity == 1 for c in out)


def test_complex_roots_dropped():
    # (x^2 + 1)(x - 2)
    out = real_roots_clustered(RealPolynomial([-2.0, 1.0, -2.0, 1.0]))
    assert [c.value for c in out] == pytest.approx([2.0])


@pytest.mark.parametrize("root", [-1.7, 0.3, 2.4655, 14.0])
def test_triple_root_clustered(root):
    p = RealPolynomial.from_roots([root, root, root, -0.2])
    out = real_roots_clustered(p)
    triple = [c for c in out if c.multiplicity == 3]
    assert len(triple) == 1
    assert triple[0].value == pytest.approx(root, rel=1e-4)
    assert sum(c.multiplicity for c in out) == 4


def test_double_root_clustered():
    out = real_roots_clustered(RealPolynomial.from_roots([1.0, 1.0, -3.0]))
    assert [(round(c.value, 6), c.multiplicity) for c in out] == [(-3.0, 1), (1.0, 2)]


def test_close_distinct_roots_not_merged():
    out = real_roots_clustered(RealPolynomial.from_roots([1.0, 1.0 + 1e-3, 5.0]), cluster_tol=1e-6)
    assert [c.multiplicity for c in out] == [1, 1, 1]


def test_zero_polynomial_degenerate():
    with pytest.raises(DegeneratePolynomialError):
        real_roots_clustered(RealPolynomial([0.0, 0.0]))


def test_cluster_tol_positive():
    with pytest.raises(ValueError):
        real_roots_clustered(RealPolynomial([1.0, 1.0]), cluster_tol=0.0)


def test_constant_has_no_roots():
    assert real_roots_clustered(RealPolynomial([3.0])) == []


# -- Newton ---------------------------------------------------------------------------


def _circle_line(x):
    return np.array([x[0] ** 2 + x[1] ** 2 - 4.0, x[0] - x[1]])


def test_fd_jacobian_matches_analytic():
    J = fd_jacobian(_circle_line, np.array([1.0, 2.0]))
    assert J == pytest.approx(np.array([[2.0, 4.0], [1.0, -1.0]]), abs=1e-6)


def test_newton_solve_converges():
    x = newton_solve(_circle_line, [1.0, 1.2])
    assert x == pytest.approx([np.sqrt(2), np.sqrt(2)], abs=1e-9)


def test_newton_solve_reports_failure():
    # no real solution: x^2 + 1 = 0
    assert newton_solve(lambda x: np.array([x[0] ** 2 + 1.0]), [0.3]) is None


def test_newton_batch():
    def res(X):
        return np.stack([X[:, 0] ** 2 + X[:, 1] ** 2 - 4.0, X[:, 0] - X[:, 1]], axis=1)

    def jac(X):
        return np.stack([np.stack([2 * X[:, 0], 2 * X[:, 1]], 1), np.stack([np.ones(len(X)), -np.ones(len(X))], 1)], 1)

    X, ok = newton_solve_batch(res, jac, np.array([[1.0, 1.2], [-1.0, -2.0]]))
    assert ok.all()
    assert np.abs(X) == pytest.approx(np.full((2, 2), np.sqrt(2)), abs=1e-9)
    assert np.sign(X[:, 0]).tolist() == [1.0, -1.0]


# -- grids ----------------------------------------------------------------------------


def test_grid_axes_and_spacing():
    g = GridSpec([(0.0, 1.0), (-np.pi, np.pi)], (11, 8), (CLAMP, WRAP))
    assert g.axis(0)[-1] == 1.0
    assert g.axis(1)[-1] < np.pi
    assert g.spacing(0) == pytest.approx(0.1)
    assert g.spacing(1) == pytest.approx(np.pi / 4)
    assert g.points().shape == (88, 2)


def test_grid_index_wraps():
    g = GridSpec.torus(16)
    assert g.index_of((np.pi, 0.0)) == g.index_of((-np.pi, 0.0))
    assert g.reduce(np.array([[3 * np.pi, 0.0]]))[0, 0] == pytest.approx(-np.pi)


@pytest.mark.parametrize("kwargs", [
    dict(ranges=[(0, 1)], resolution=4),
    dict(ranges=[(1, 0)], resolution=16),
    dict(ranges=[(0, 1)], resolution=16, topology="loop"),
    dict(ranges=[(0, 1), (0, 1)], resolution=(16,)),
])
def test_grid_validation(kwargs):
    with pytest.raises(ValueError):
        GridSpec(**kwargs)


def test_trace_circle_closed():
    g = GridSpec([(-2, 2), (-2, 2)], 101)
    curves = trace_zero_curve(lambda x, y: x * x + y * y - 1.0, g)
    assert len(curves) == 1 and curves[0].closed
    r = np.linalg.norm(curves[0].points, axis=1)
    assert r == pytest.approx(np.ones_like(r), abs=2e-3)


def test_trace_across_wrapped_seam():
    g = GridSpec.torus(64)
    curves = trace_zero_curve(lambda a, b: np.sin(a) - 0.5 * np.cos(b) - 0.2, g)
    assert curves and all(c.closed for c in curves)


def test_trace_open_on_clamped_boundary():
    g = GridSpec([(-1, 1), (-1, 1)], 41)
    curves = trace_zero_curve(lambda x, y: x - 0.3 * y, g)
    assert len(curves) == 1 and not curves[0].closed


def test_trace_shape_mismatch():
    with pytest.raises(ValueError):
        trace_zero_curve(np.zeros((3, 3)), GridSpec([(0, 1), (0, 1)], 16))


def test_components_merge_across_seam():
    g = GridSpec([(0, 1), (0, 1)], (16, 16), (WRAP, CLAMP))
    m = np.zeros((16, 16), bool)
    m[:3, 4:8] = True
    m[-3:, 4:8] = True
    _, n = connected_components(m, g)
    assert n == 1
    _, n_clamped = connected_components(m, GridSpec([(0, 1), (0, 1)], 16))
    assert n_clamped == 2


def test_sign_components_split_at_crossing():
    # xy changes sign across both axes: four quadrants that touch only at crossings
    g = GridSpec([(-1, 1), (-1, 1)], 64)
    X, Y = g.mesh()
    labels, signs = sign_components(X * Y + 1e-9, g)
    assert len(signs) == 4
    assert sorted(signs.values()) == [-1, -1, 1, 1]
    assert (labels == 0).any()


def test_sign_components_respects_valid_mask():
    g = GridSpec([(-1, 1), (-1, 1)], 32)
    X, _ = g.mesh()
    valid = X < 0.5
    labels, signs = sign_components(X - 0.0001, g, valid)
    assert len(signs) == 2
    assert not labels[~valid].any()


def test_grid_path_wraps_and_blocks():
    g = GridSpec([(0, 1), (0, 1)], (16, 16), (WRAP, CLAMP))
    m = np.ones((16, 16), bool)
    m[4:12, :] = False  # wall; only the seam connects the two halves
    path = grid_path(m, (2, 5), (13, 5), g)
    assert path is not None and len(path) == 6
    assert all(m[c] for c in path)
    m2 = m.copy()
    m2[0, :] = False
    m2[15, :] = False
    assert grid_path(m2, (2, 5), (13, 5), GridSpec([(0, 1), (0, 1)], 16)) is None
