import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from cuspkit.atlas import compute_aspects
from cuspkit.classify import noncuspidal_iff
from cuspkit.numcore import WRAP, DegeneratePolynomialError, GridSpec
from cuspkit.parallel import (
    Model2RPRRR,
    Model3RPR,
    ModelRPRPR,
    ModelSpherical2UPSU,
    aspects_parallel,
    direct_kinematics_3rpr,
    direct_kinematics_multistart,
)
from cuspkit.serial3r import (
    Geometry3R,
    JointConfig3R,
    characteristic_polynomial,
    det_factors,
    forward_kinematics,
    inverse_kinematics,
    position_jacobian,
    wrap_angle,
)

angle = st.floats(-np.pi, np.pi, allow_nan=False)
length = st.floats(0.2, 3.0, allow_nan=False)
offset = st.floats(0.0, 2.0, allow_nan=False)
designs = st.builds(lambda d2, d3, d4, r2, r3: Geometry3R(d2, d3, d4, r2, r3), length, length, length, offset, offset)
SETTINGS = settings(max_examples=1000, deadline=None, suppress_health_check=[HealthCheck.too_slow])


@SETTINGS
@given(g=designs, q=st.tuples(angle, angle, angle))
def test_fk_ik_roundtrip(g, q):
    q = JointConfig3R(*q)
    p = forward_kinematics(g, q)
    try:
        sols = inverse_kinematics(g, p)
    except DegeneratePolynomialError:
        # self-motion: every theta3 must then reach the section point
        P = characteristic_polynomial(g, p.section)
        ref = (g.d2 ** 2 + g.L + p.section.R) ** 2
        assert max(abs(v) for v in P.coefficients) <= 1e-13 * ref
        return
    assert sols
    scale = 1.0 + g.reach
    for s in sols:
        assert np.linalg.norm(forward_kinematics(g, s.q).as_array() - p.as_array()) < 1e-6 * scale
    det = abs(det_factors(g, q.theta2, q.theta3)[0])
    # a configuration far from the singular set comes back as one of the solutions
    if det > 1e-3 * scale ** 3:
        assert min(s.q.distance(q) for s in sols) < 1e-6


@SETTINGS
@given(g=designs, q=st.tuples(angle, angle, angle))
def test_det_matches_finite_differences(g, q):
    q = np.array(q)
    h = 1e-6
    J = np.empty((3, 3))
    for k in range(3):
        e = np.zeros(3)
        e[k] = h
        J[:, k] = (forward_kinematics(g, JointConfig3R(*(q + e))).as_array()
                   - forward_kinematics(g, JointConfig3R(*(q - e))).as_array()) / (2 * h)
    det = det_factors(g, q[1], q[2])[0]
    ref = max(abs(det), np.prod(np.linalg.norm(J, axis=0)))
    assert abs(det - np.linalg.det(J)) <= 1e-6 * ref
    assert np.linalg.det(position_jacobian(g, q)) == pytest.approx(det, rel=1e-9, abs=1e-12 * ref)


@settings(max_examples=200, deadline=None)
@given(d3=length, d4=length, r2=st.floats(0.05, 2.0), lam=st.sampled_from([0.1, 3.0, 10.0]))
def test_classification_scale_invariant(d3, d4, r2, lam):
    g = Geometry3R(1.0, d3, d4, r2, 0.0)
    assert noncuspidal_iff(g.scaled(lam)) == noncuspidal_iff(g)


def _shifted_torus(d0, d1, n=128):
    return GridSpec([(-np.pi + d0, np.pi + d0), (-np.pi + d1, np.pi + d1)], n, WRAP)


@settings(max_examples=25, deadline=None)
@given(d0=angle, d1=angle)
def test_serial_aspect_count_torus_shift(example, noncuspidal, d0, d1):
    for g in (example, noncuspidal):
        assert compute_aspects(g, _shifted_torus(d0, d1)).count == compute_aspects(g, _shifted_torus(0, 0)).count


@settings(max_examples=25, deadline=None)
@given(d0=angle, d1=angle)
def test_parallel_aspect_count_torus_shift(d0, d1):
    for m in (ModelSpherical2UPSU(0.0, 1.0, 1.0), ModelSpherical2UPSU(1.0, 1.0, 0.5), Model2RPRRR()):
        assert aspects_parallel(m, _shifted_torus(d0, d1, 256)).count == aspects_parallel(m).count


MODELS = [ModelRPRPR(), ModelSpherical2UPSU(0.0, 1.0, 1.0), ModelSpherical2UPSU(1.0, 1.0, 0.5), Model2RPRRR()]


@settings(max_examples=60, deadline=None)
@given(k=st.integers(0, len(MODELS) - 1), u=st.tuples(st.floats(0, 1), st.floats(0, 1)))
def test_mode_residuals(k, u):
    m = MODELS[k]
    box = np.array(m.x_box())
    X = box[:, 0] + np.array(u) * (box[:, 1] - box[:, 0])
    if not m.feasible(X[None])[0]:
        return
    q = m.inverse_kinematics(X[None])[0]
    modes = direct_kinematics_multistart(m, q)
    assert modes
    scale = 1.0 + np.max(np.abs(q))
    for md in modes:
        assert np.max(np.abs(m.residual(md.as_array()[None], q[None]))) < 1e-8 * scale


@settings(max_examples=40, deadline=None)
@given(q=st.tuples(st.floats(10, 32), st.floats(10, 32), st.floats(10, 32)))
def test_3rpr_mode_residuals(rpr3, q):
    q = np.array(q)
    for md in direct_kinematics_3rpr(rpr3, q):
        assert np.max(np.abs(rpr3.residual(md.as_array()[None], q[None]))) < 1e-8 * q.max() ** 2
