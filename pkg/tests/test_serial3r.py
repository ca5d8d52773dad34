import numpy as np
import pytest

from cuspkit.serial3r import (
    CrossSectionPoint,
    Geometry3R,
    JointConfig3R,
    Pose3,
    characteristic_polynomial,
    det_factors,
    fk_dh,
    forward_kinematics,
    ik_coefficients,
    ik_section,
    ik_section_grid,
    inverse_kinematics,
    jacobian_det,
    position_jacobian,
    solution_count,
    solution_count_grid,
    theta3_roots,
    wrap_angle,
)


def test_geometry_validation():
    with pytest.raises(ValueError):
        Geometry3R(1.0, -2.0, 1.0)


def test_geometry_normalize_and_scale(example):
    n = example.scaled(3.0).normalized()
    assert (n.d2, n.d3, n.d4, n.r2) == pytest.approx((1.0, 2.0, 1.5, 1.0))
    with pytest.raises(ValueError):
        Geometry3R(0.0, 1.0, 1.0).normalized()


def test_cross_section_point_validation():
    with pytest.raises(ValueError):
        CrossSectionPoint(-1.0, 0.0)
    assert CrossSectionPoint(3.0, 4.0).R == pytest.approx(25.0)


def test_wrap_angle():
    assert wrap_angle(3 * np.pi) == pytest.approx(np.pi)
    assert wrap_angle(-np.pi) == pytest.approx(np.pi)
    assert wrap_angle(np.array([0.1, 2 * np.pi + 0.1])) == pytest.approx([0.1, 0.1])


def test_fk_of_zero_configuration(example):
    p = forward_kinematics(example, JointConfig3R(0.0, 0.0, 0.0))
    assert (p.x, p.y, p.z) == pytest.approx((4.5, 1.0, 0.0), abs=1e-15)


def test_closed_form_fk_matches_dh_chain(example, rng):
    for q in rng.uniform(-np.pi, np.pi, (50, 3)):
        p = forward_kinematics(example, JointConfig3R(*q))
        assert p.as_array() == pytest.approx(fk_dh(example, q), abs=1e-12)


def test_fk_with_r3(rng):
    g = Geometry3R(1.0, 2.0, 1.5, 0.5, 0.7)
    q = rng.uniform(-np.pi, np.pi, 3)
    assert forward_kinematics(g, JointConfig3R(*q)).as_array() == pytest.approx(fk_dh(g, q), abs=1e-12)


def test_position_jacobian_fd(example, rng):
    q = rng.uniform(-np.pi, np.pi, 3)
    J = position_jacobian(example, q)
    for k in range(3):
        e = np.zeros(3)
        e[k] = 1e-6
        col = (fk_dh(example, q + e) - fk_dh(example, q - e)) / 2e-6
        assert J[:, k] == pytest.approx(col, abs=1e-7)


def test_det_factorization(example, rng):
    for q in rng.uniform(-np.pi, np.pi, (50, 3)):
        d = jacobian_det(example, JointConfig3R(*q))
        assert d.value == pytest.approx(np.linalg.det(position_jacobian(example, q)), abs=1e-10)
        assert d.value == pytest.approx(example.d4 * d.product, abs=1e-12)


def test_det_with_r3_matches_numeric(rng):
    g = Geometry3R(1.0, 2.0, 1.5, 0.5, 0.7)
    q = rng.uniform(-np.pi, np.pi, 3)
    assert det_factors(g, q[1], q[2])[0] == pytest.approx(np.linalg.det(position_jacobian(g, q)), abs=1e-10)


def test_det_independent_of_theta1(example):
    a = jacobian_det(example, JointConfig3R(0.0, 0.4, 1.2)).value
    b = jacobian_det(example, JointConfig3R(2.1, 0.4, 1.2)).value
    assert a == pytest.approx(b)


def test_ik_four_solutions(example):
    sols = inverse_kinematics(example, Pose3(2.5, 0.0, 0.5))
    assert len(sols) == 4
    for s in sols:
        assert s.residual < 1e-10
        assert forward_kinematics(example, s.q).as_array() == pytest.approx([2.5, 0.0, 0.5], abs=1e-10)


def test_ik_unreachable(example):
    assert inverse_kinematics(example, Pose3(100.0, 0.0, 0.0)) == []


def test_ik_requires_d2(example):
    with pytest.raises(ValueError):
        inverse_kinematics(Geometry3R(0.0, 2.0, 1.5, 1.0), Pose3(1.0, 0.0, 0.0))


def test_ik_requires_orthogonal():
    g = Geometry3R(1.0, 2.0, 1.5, 1.0, 0.0, alpha2=-1.2)
    with pytest.raises(ValueError):
        inverse_kinematics(g, Pose3(1.0, 0.0, 0.0))


def test_ik_coefficients_residual(example):
    # trig form of the condition vanishes at every IK solution
    p = CrossSectionPoint(2.5, 0.5)
    m = ik_coefficients(example, p)
    for th3, _ in theta3_roots(example, p):
        assert abs(m.trig_value(th3)) < 1e-9


def test_characteristic_polynomial_degree(example):
    assert characteristic_polynomial(example, CrossSectionPoint(2.5, 0.5)).degree == 4


def test_theta3_pi_root():
    # configuration with theta3 = pi (t = tan(theta3/2) infinite) is recovered
    g = Geometry3R(1.0, 2.0, 1.5, 1.0, 0.0)
    q = JointConfig3R(0.0, 0.3, np.pi)
    p = forward_kinematics(g, q)
    sols = inverse_kinematics(g, p)
    assert any(abs(wrap_angle(s.q.theta3 - np.pi)) < 1e-7 for s in sols)


def test_singular_target_reports_multiplicity(example):
    # the image of a singular configuration carries a double root; with d3 > d4
    # the first factor never vanishes, so solve the second for theta2
    t3 = 1.1
    c3, s3 = np.cos(t3), np.sin(t3)
    c2 = -s3 * example.d2 / (s3 * example.d3 - c3 * example.r2)
    th2 = np.arccos(c2)
    assert abs(det_factors(example, th2, t3)[0]) < 1e-12
    p = forward_kinematics(example, JointConfig3R(0.0, th2, t3))
    sols = inverse_kinematics(example, p)
    assert any(s.multiplicity == 2 for s in sols)


def test_solution_counts_match(example, rng):
    rho = rng.uniform(0.1, 4.5, 200)
    z = rng.uniform(-4.0, 4.0, 200)
    grid = solution_count_grid(example, rho, z)
    scalar = [solution_count(example, CrossSectionPoint(r, zz)) for r, zz in zip(rho, z)]
    assert np.array_equal(grid, scalar)
    assert set(np.unique(grid)) <= {0, 2, 4}


def test_ik_section_grid_matches_scalar(example):
    t2, t3, ok = ik_section_grid(example, np.array([2.5, 1.0]), np.array([0.5, 0.0]))
    ref = ik_section(example, 2.5, 0.5)
    assert ok[0].sum() == len(ref) == 4
    got = sorted(zip(t2[0][ok[0]], t3[0][ok[0]]))
    assert np.array(got) == pytest.approx(np.array(sorted((a, b) for a, b, _ in ref)), abs=1e-7)


def test_joint_config_distance_wraps():
    a = JointConfig3R(np.pi - 0.01, 0.0, 0.0)
    b = JointConfig3R(-np.pi + 0.01, 0.0, 0.0)
    assert a.distance(b) == pytest.approx(0.02)
