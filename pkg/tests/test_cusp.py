import numpy as np
import pytest

from cuspkit.cusp import (
    cusp_symmetry_check,
    default_search_grid,
    find_cusps,
    find_cusps_joint_space,
    is_cuspidal,
    verify_triple_root,
)
from cuspkit.serial3r import (
    CrossSectionPoint,
    Geometry3R,
    characteristic_polynomial,
    det_factors,
    forward_kinematics,
)

EXAMPLE_CUSPS = [(1.3555, -0.5047), (1.3555, 0.5047), (2.4655, -1.9987), (2.4655, 1.9987)]


def _points(cs, scale=1.0):
    return np.array(sorted((round(c.rho / scale, 6), c.z / scale) for c in cs))


@pytest.fixture(scope="module")
def cusps(example):
    return find_cusps(example)


def test_example_cusps(cusps):
    got = _points(cusps)
    assert len(got) == 4
    assert got == pytest.approx(np.array(EXAMPLE_CUSPS), abs=1e-3)


def test_cusps_are_triple_roots(example, cusps):
    for c in cusps:
        assert verify_triple_root(example, c)
        P = characteristic_polynomial(example, c.section)
        scale = max(abs(v) for v in P.coefficients)
        for k in range(3):
            assert abs(P.derivative(k)(c.t)) < 1e-7 * scale
        assert abs(P.derivative(3)(c.t)) > 1e-6 * scale


def test_cusp_configuration_singular_and_on_section(example, cusps):
    for c in cusps:
        assert abs(det_factors(example, c.q.theta2, c.q.theta3)[0]) < 1e-6
        p = forward_kinematics(example, c.q)
        assert np.hypot(p.x, p.y) == pytest.approx(c.rho, abs=1e-8)
        assert p.z == pytest.approx(c.z, abs=1e-8)


def test_cusp_symmetry(cusps):
    assert cusp_symmetry_check(cusps)
    moved = list(cusps[:3])
    assert not cusp_symmetry_check(moved)


def test_joint_space_oracle_agrees(example, cusps):
    # independent search: tangency of the kernel with det J = 0 on the torus
    other = find_cusps_joint_space(example, resolution=128)
    a, b = _points(cusps), _points(other)
    assert a.shape == b.shape
    assert a == pytest.approx(b, abs=1e-6)


def test_r2_zero_has_no_cusps():
    assert find_cusps(Geometry3R(1.0, 2.0, 1.5, 0.0, 0.0)) == []


def test_scale_invariance(example, cusps):
    big = find_cusps(example.scaled(10.0))
    assert _points(big, 10.0) == pytest.approx(_points(cusps), abs=1e-6)


def test_cusps_with_r3():
    g = Geometry3R(1.0, 2.0, 1.5, 1.0, 0.3)
    cs = find_cusps(g)
    assert len(cs) in (2, 4, 6, 8)
    for c in cs:
        assert verify_triple_root(g, c)


def test_search_grid_covers_workspace(example):
    grid = default_search_grid(example, 32)
    assert grid.shape == (32, 32)


def test_is_cuspidal_routes(example, noncuspidal):
    assert is_cuspidal(example).label == "cuspidal"
    v = is_cuspidal(noncuspidal)
    assert v.label == "noncuspidal" and v.evidence.branch == "second"
    v = is_cuspidal(Geometry3R(1.0, 2.0, 1.5, 0.0, 0.0))
    assert not v.cuspidal and v.evidence.condition.identifier == 5


def test_non_orthogonal_search():
    # twists away from the orthogonal family: answered by the joint-space search
    g = Geometry3R(1.0, 2.0, 1.5, 1.0, 0.0, alpha2=-1.4, alpha3=1.5)
    v = is_cuspidal(g)
    assert v.cuspidal in (True, None)
    if v.cuspidal:
        assert v.evidence.cusps
