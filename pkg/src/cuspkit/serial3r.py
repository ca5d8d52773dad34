"""Serial 3R arms: geometry, forward/inverse kinematics, Jacobian determinant.

Conventions follow the modified Denavit-Hartenberg chain used for positioning
3R arms: joint j contributes ``RotX(alpha_j) TransX(d_j) RotZ(theta_j)
TransZ(r_j)`` and the tool point sits at distance ``d4`` along the last x axis.
The first joint has no offset. The orthogonal family has ``alpha2 = -pi/2`` and
``alpha3 = +pi/2``; for it, everything below is evaluated in closed form.

Inverse kinematics eliminates theta1 and theta2 and leaves the condition

    m5 c^2 + m4 s^2 + m3 c s + m2 c + m1 s + m0 = 0,   c, s = cos, sin(theta3)

which becomes a quartic in ``t = tan(theta3 / 2)``. The coefficients are used
multiplied through by ``d2**2`` so they stay polynomial in all lengths.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from math import atan2, cos, hypot, pi, sin

import numpy as np

from .numcore import DegeneratePolynomialError, RealPolynomial, real_roots_clustered

ORTHO_ALPHA2 = -pi / 2
ORTHO_ALPHA3 = pi / 2


def wrap_angle(a):
    """Reduce angles to (-pi, pi]."""
    r = np.mod(np.asarray(a, dtype=float) + np.pi, 2 * np.pi) - np.pi
    r = np.where(r == -np.pi, np.pi, r)
    return float(r) if np.ndim(r) == 0 else r


@dataclass(frozen=True)
class Geometry3R:
    d2: float
    d3: float
    d4: float
    r2: float = 0.0
    r3: float = 0.0
    alpha2: float = ORTHO_ALPHA2
    alpha3: float = ORTHO_ALPHA3

    def __post_init__(self):
        if min(self.d2, self.d3, self.d4) < 0:
            raise ValueError("link lengths d2, d3, d4 must be non-negative")

    @property
    def is_orthogonal(self) -> bool:
        return self.alpha2 == ORTHO_ALPHA2 and self.alpha3 == ORTHO_ALPHA3

    @property
    def reach(self) -> float:
        return self.d2 + self.d3 + self.d4 + abs(self.r2) + abs(self.r3)

    @property
    def L(self) -> float:
        return self.d3 ** 2 + self.r3 ** 2 + self.r2 ** 2 + self.d4 ** 2

    def normalized(self) -> "Geometry3R":
        """Same arm with every length divided by d2."""
        if self.d2 == 0:
            raise ValueError("cannot normalize an arm with d2 = 0")
        k = 1.0 / self.d2
        return replace(self, d2=1.0, d3=self.d3 * k, d4=self.d4 * k, r2=self.r2 * k, r3=self.r3 * k)

    def scaled(self, lam: float) -> "Geometry3R":
        return replace(self, d2=self.d2 * lam, d3=self.d3 * lam, d4=self.d4 * lam,
                       r2=self.r2 * lam, r3=self.r3 * lam)

    def require_orthogonal(self):
        if not self.is_orthogonal:
            raise ValueError("operation requires the orthogonal family (alpha2=-pi/2, alpha3=pi/2)")


@dataclass(frozen=True)
class JointConfig3R:
    theta1: float
    theta2: float
    theta3: float

    def __post_init__(self):
        for name in ("theta1", "theta2", "theta3"):
            object.__setattr__(self, name, wrap_angle(getattr(self, name)))

    def as_array(self) -> np.ndarray:
        return np.array([self.theta1, self.theta2, self.theta3])

    def distance(self, other: "JointConfig3R") -> float:
        """Largest componentwise angular distance on the torus."""
        d = wrap_angle(self.as_array() - other.as_array())
        return float(np.max(np.abs(d)))


@dataclass(frozen=True)
class Pose3:
    x: float
    y: float
    z: float

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])

    @property
    def section(self) -> "CrossSectionPoint":
        return CrossSectionPoint(hypot(self.x, self.y), self.z)


@dataclass(frozen=True)
class CrossSectionPoint:
    rho: float
    z: float

    def __post_init__(self):
        if self.rho < 0:
            raise ValueError("rho must be non-negative")

    @property
    def R(self) -> float:
        return self.rho ** 2 + self.z ** 2


@dataclass(frozen=True)
class IKCoefficients:
    m0: float
    m1: float
    m2: float
    m3: float
    m4: float
    m5: float
    L: float
    R: float

    def trig_value(self, theta3):
        c, s = np.cos(theta3), np.sin(theta3)
        return self.m5 * c * c + self.m4 * s * s + self.m3 * c * s + self.m2 * c + self.m1 * s + self.m0

    def trig_derivative(self, theta3):
        c, s = np.cos(theta3), np.sin(theta3)
        return ((self.m4 - self.m5) * 2 * s * c + self.m3 * (c * c - s * s)
                - self.m2 * s + self.m1 * c)


@dataclass(frozen=True)
class JacobianDet:
    """det(J) of the position map together with its two factors.

    For ``r3 = 0`` the determinant equals ``d4 * first * second``; for other
    offsets the factors are still reported but no longer multiply to it.
    """

    value: float
    first: float
    second: float

    @property
    def product(self) -> float:
        return self.first * self.second


@dataclass(frozen=True)
class IKSolution:
    q: JointConfig3R
    residual: float
    multiplicity: int = 1

    @property
    def singular(self) -> bool:
        return self.multiplicity > 1


# -- closed-form pieces shared by scalar and grid evaluations -----------------


def section_map(g: Geometry3R, theta2, theta3):
    """Frame-1 coordinates (a, b, z) of the tool point; rho = hypot(a, b).

    ``a`` and ``b`` are the components along and across the first link, so
    the Cartesian point is ``RotZ(theta1) @ (a, b, z)``.
    """
    c2, s2 = np.cos(theta2), np.sin(theta2)
    c3, s3 = np.cos(theta3), np.sin(theta3)
    u = g.d3 + g.d4 * c3
    a = g.d2 + c2 * u + s2 * g.r3
    b = g.r2 + g.d4 * s3
    z = -s2 * u + c2 * g.r3
    return a, b, z


def section_jacobian(g: Geometry3R, theta2, theta3):
    """Partial derivatives of (a, b, z) with respect to (theta2, theta3)."""
    c2, s2 = np.cos(theta2), np.sin(theta2)
    c3, s3 = np.cos(theta3), np.sin(theta3)
    u = g.d3 + g.d4 * c3
    du = -g.d4 * s3
    a2 = -s2 * u + c2 * g.r3
    a3 = c2 * du
    b2 = 0.0 * theta2
    b3 = g.d4 * c3
    z2 = -c2 * u - s2 * g.r3
    z3 = -s2 * du
    return (a2, a3), (b2, b3), (z2, z3)


def det_factors(g: Geometry3R, theta2, theta3):
    """Vectorised (det J, first factor, second factor) for the orthogonal family."""
    c2, s2 = np.cos(theta2), np.sin(theta2)
    c3, s3 = np.cos(theta3), np.sin(theta3)
    f1 = g.d3 + c3 * g.d4
    f2 = c2 * (s3 * g.d3 - c3 * g.r2) + s3 * g.d2
    value = g.d4 * (f1 * f2 + g.r3 * s2 * (g.d3 * s3 - g.r2 * c3))
    return value, f1, f2


def _dh(alpha, d, theta, r):
    ca, sa, ct, st = cos(alpha), sin(alpha), cos(theta), sin(theta)
    return np.array([
        [ct, -st, 0.0, d],
        [st * ca, ct * ca, -sa, -r * sa],
        [st * sa, ct * sa, ca, r * ca],
        [0.0, 0.0, 0.0, 1.0],
    ])


def fk_dh(g: Geometry3R, q) -> np.ndarray:
    """Tool position through the generic DH chain (any twist angles)."""
    t1, t2, t3 = np.asarray(q, dtype=float)
    T = _dh(0.0, 0.0, t1, 0.0) @ _dh(g.alpha2, g.d2, t2, g.r2) @ _dh(g.alpha3, g.d3, t3, g.r3)
    return (T @ np.array([g.d4, 0.0, 0.0, 1.0]))[:3]


def _fk_array(g: Geometry3R, q) -> np.ndarray:
    t1, t2, t3 = q
    if not g.is_orthogonal:
        return fk_dh(g, q)
    a, b, z = section_map(g, t2, t3)
    c1, s1 = cos(t1), sin(t1)
    return np.array([c1 * a - s1 * b, s1 * a + c1 * b, z])


def forward_kinematics(g: Geometry3R, q: JointConfig3R) -> Pose3:
    x, y, z = _fk_array(g, q.as_array())
    return Pose3(float(x), float(y), float(z))


def position_jacobian(g: Geometry3R, q) -> np.ndarray:
    """3x3 Jacobian of the tool position with respect to (theta1, theta2, theta3)."""
    q = np.asarray(q, dtype=float)
    if not g.is_orthogonal:
        cols = []
        for i in range(3):
            h = 1e-6 * (1 + abs(q[i]))
            e = np.zeros(3)
            e[i] = h
            cols.append((fk_dh(g, q + e) - fk_dh(g, q - e)) / (2 * h))
        return np.column_stack(cols)
    t1, t2, t3 = q
    a, b, z = section_map(g, t2, t3)
    (a2, a3), (b2, b3), (z2, z3) = section_jacobian(g, t2, t3)
    c1, s1 = cos(t1), sin(t1)
    return np.array([
        [-s1 * a - c1 * b, c1 * a2 - s1 * b2, c1 * a3 - s1 * b3],
        [c1 * a - s1 * b, s1 * a2 + c1 * b2, s1 * a3 + c1 * b3],
        [0.0, z2, z3],
    ])


def jacobian_det(g: Geometry3R, q: JointConfig3R) -> JacobianDet:
    if not g.is_orthogonal:
        v = float(np.linalg.det(position_jacobian(g, q.as_array())))
        return JacobianDet(v, float("nan"), float("nan"))
    v, f1, f2 = det_factors(g, q.theta2, q.theta3)
    return JacobianDet(float(v), float(f1), float(f2))


# -- inverse kinematics --------------------------------------------------------


def ik_coefficients(g: Geometry3R, p: CrossSectionPoint) -> IKCoefficients:
    g.require_orthogonal()
    d2, d3, d4, r2 = g.d2, g.d3, g.d4, g.r2
    L = g.L
    R = p.R
    E = L - R - d2 * d2
    return IKCoefficients(
        m0=d2 * d2 * (r2 * r2 - p.rho ** 2) + (R + d2 * d2 - L) ** 2 / 4.0,
        m1=2 * r2 * d4 * d2 * d2 + E * d4 * r2,
        m2=E * d4 * d3,
        m3=2 * r2 * d3 * d4 * d4,
        m4=d4 * d4 * (r2 * r2 + d2 * d2),
        m5=d3 * d3 * d4 * d4,
        L=L,
        R=R,
    )


def _quartic_from_m(m0, m1, m2, m3, m4, m5):
    """Ascending quartic coefficients of (1+t^2)^2 times the trigonometric form."""
    return np.stack([
        m5 + m2 + m0,
        2 * m3 + 2 * m1,
        -2 * m5 + 4 * m4 + 2 * m0,
        -2 * m3 + 2 * m1,
        m5 - m2 + m0,
    ], axis=-1)


def characteristic_polynomial(g: Geometry3R, p: CrossSectionPoint) -> RealPolynomial:
    m = ik_coefficients(g, p)
    return RealPolynomial(_quartic_from_m(m.m0, m.m1, m.m2, m.m3, m.m4, m.m5))


def theta3_roots(g: Geometry3R, p: CrossSectionPoint, cluster_tol: float = 1e-6):
    """Distinct real theta3 solutions with multiplicities (theta3 = pi included).

    Raises DegeneratePolynomialError when the quartic vanishes identically.
    """
    m = ik_coefficients(g, p)
    P = RealPolynomial(_quartic_from_m(m.m0, m.m1, m.m2, m.m3, m.m4, m.m5))
    # every term of the quartic is bounded by this; rounding of a vanishing quartic is far below it
    ref = (g.d2 ** 2 + m.L + m.R) ** 2
    if max(abs(v) for v in P.coefficients) <= 1e-13 * ref:
        # every theta3 solves the quartic: the point is reached along a self-motion
        raise DegeneratePolynomialError("degenerate polynomial: infinitely many solutions")
    out = []
    # near theta3 = pi, t = tan(theta3/2) blows up; the reversed polynomial in
    # s = 1/t is well conditioned there
    for poly, inverse in ((P, False), (P.reversed(), True)):
        for c in real_roots_clustered(poly, cluster_tol):
            if abs(c.value) > 1.0 + 1e-12:
                continue
            if inverse:
                th = pi if c.value == 0.0 else 2 * np.arctan(1.0 / c.value)
            else:
                th = 2 * np.arctan(c.value)
            out.append([wrap_angle(th), c.multiplicity])
    if P.degree < 4:
        # leading coefficient vanished exactly: the lost roots sit at t = infinity
        out.append([pi, 4 - P.degree])
    out.sort()
    merged = []
    same = max(1e-9, cluster_tol)
    for th, mult in out:
        if merged and abs(wrap_angle(th - merged[-1][0])) < same:
            merged[-1][1] = max(merged[-1][1], mult)
            continue
        merged.append([th, mult])
    if len(merged) > 1 and abs(wrap_angle(merged[0][0] - merged[-1][0])) < same:
        merged[0][1] = max(merged[0][1], merged[-1][1])
        merged.pop()
    return [(_polish_theta3(m, th) if mult == 1 else th, mult) for th, mult in merged]


def _polish_theta3(m: IKCoefficients, th: float) -> float:
    for _ in range(6):
        f, df = m.trig_value(th), m.trig_derivative(th)
        if df == 0:
            break
        step = f / df
        if abs(step) > 1e-3:
            break
        th -= step
        if abs(step) < 1e-16:
            break
    return wrap_angle(th)


def _theta12_from_theta3(g: Geometry3R, x: float, y: float, z: float, th3: float):
    rho2 = x * x + y * y
    R = rho2 + z * z
    c3, s3 = cos(th3), sin(th3)
    u = g.d3 + g.d4 * c3
    b = g.r2 + g.d4 * s3
    a = (R + g.d2 ** 2 - g.L - 2 * g.d3 * g.d4 * c3 - 2 * g.r2 * g.d4 * s3) / (2 * g.d2)
    den = u * u + g.r3 * g.r3
    if den == 0.0:
        return None
    c2 = (u * (a - g.d2) + g.r3 * z) / den
    s2 = (g.r3 * (a - g.d2) - u * z) / den
    th2 = atan2(s2, c2)
    a_fk, b_fk, _ = section_map(g, th2, th3)
    th1 = atan2(y, x) - atan2(b_fk, a_fk)
    return th1, th2


def _polish_config(g: Geometry3R, q: np.ndarray, target: np.ndarray, iters: int = 4) -> np.ndarray:
    for _ in range(iters):
        r = _fk_array(g, q) - target
        if np.max(np.abs(r)) < 1e-14 * (1 + np.linalg.norm(target)):
            break
        J = position_jacobian(g, q)
        dq = np.linalg.lstsq(J, -r, rcond=1e-10)[0]
        if np.max(np.abs(dq)) > 1e-2:
            break
        q = q + dq
    return q


def inverse_kinematics(g: Geometry3R, target: Pose3, cluster_tol: float = 1e-6) -> list[IKSolution]:
    """All joint configurations placing the tool at ``target``.

    Solutions whose theta3 is a multiple root (target on a singularity image)
    are returned once, with ``multiplicity > 1``. A target reached along a
    self-motion raises DegeneratePolynomialError.
    """
    g.require_orthogonal()
    if g.d2 == 0:
        raise ValueError("inverse kinematics needs d2 > 0")
    x, y, z = target.x, target.y, target.z
    tgt = target.as_array()
    tol = 1e-8 * (1 + np.linalg.norm(tgt))
    out: list[IKSolution] = []
    for th3, mult in theta3_roots(g, target.section, cluster_tol):
        th12 = _theta12_from_theta3(g, x, y, z, th3)
        if th12 is None:
            continue
        q = np.array([th12[0], th12[1], th3])
        q = _polish_config(g, q, tgt)
        res = float(np.linalg.norm(_fk_array(g, q) - tgt))
        if res < tol:
            out.append(IKSolution(JointConfig3R(*q), res, mult))
    return out


def solution_count(g: Geometry3R, p: CrossSectionPoint, cluster_tol: float = 1e-6) -> int:
    """Number of distinct inverse solutions over a cross-section point."""
    return len(theta3_roots(g, p, cluster_tol))


def solution_count_grid(g: Geometry3R, rho, z, imag_tol: float = 1e-7) -> np.ndarray:
    """Vectorised real-root count of the characteristic quartic over many points.

    Uses batched companion eigenvalues; per point, whichever of the quartic
    and its reversal is better conditioned at the top coefficient is used.
    Root multiplicities are not collapsed, so counts on an exact boundary may
    be ambiguous; interior points are what this is for.
    """
    g.require_orthogonal()
    rho = np.asarray(rho, dtype=float)
    z = np.asarray(z, dtype=float)
    shape = np.broadcast(rho, z).shape
    rho, z = np.broadcast_to(rho, shape).ravel(), np.broadcast_to(z, shape).ravel()
    d2, d3, d4, r2 = g.d2, g.d3, g.d4, g.r2
    L = g.L
    R = rho ** 2 + z ** 2
    E = L - R - d2 * d2
    m0 = d2 * d2 * (r2 * r2 - rho ** 2) + (R + d2 * d2 - L) ** 2 / 4.0
    m1 = 2 * r2 * d4 * d2 * d2 + E * d4 * r2
    m2 = E * d4 * d3
    m3 = np.full_like(R, 2 * r2 * d3 * d4 * d4)
    m4 = np.full_like(R, d4 * d4 * (r2 * r2 + d2 * d2))
    m5 = np.full_like(R, d3 * d3 * d4 * d4)
    C = _quartic_from_m(m0, m1, m2, m3, m4, m5)
    C = C / np.max(np.abs(C), axis=1, keepdims=True)
    flip = np.abs(C[:, 4]) < np.abs(C[:, 0])
    C[flip] = C[flip, ::-1]
    lead = C[:, 4]
    comp = np.zeros((len(C), 4, 4))
    comp[:, 1:, :3] = np.eye(3)
    comp[:, :, 3] = -C[:, :4] / lead[:, None]
    ev = np.linalg.eigvals(comp)
    real = np.abs(ev.imag) <= imag_tol * (1 + np.abs(ev.real))
    return real.sum(axis=1).reshape(shape)


def ik_section(g: Geometry3R, rho: float, z: float, cluster_tol: float = 1e-6):
    """Inverse solutions over a cross-section point as (theta2, theta3, multiplicity).

    theta1 is factored out; the configuration is taken with the tool in the
    half-plane y = 0, x = rho.
    """
    return [(s.q.theta2, s.q.theta3, s.multiplicity)
            for s in inverse_kinematics(g, Pose3(rho, 0.0, z), cluster_tol)]


def ik_section_grid(g: Geometry3R, rho, z, imag_tol: float = 1e-7):
    """Vectorised inverse solutions over many cross-section points.

    Returns ``(theta2, theta3, valid)``, each of shape ``(..., 4)``: up to four
    solutions per point with the tool taken at ``(rho, 0, z)``. Entries with
    ``valid`` False are padding (complex roots or failed back-substitution).
    """
    g.require_orthogonal()
    rho = np.asarray(rho, dtype=float)
    z = np.asarray(z, dtype=float)
    shape = np.broadcast(rho, z).shape
    rho, z = np.broadcast_to(rho, shape).ravel(), np.broadcast_to(z, shape).ravel()
    d2, d3, d4, r2, r3 = g.d2, g.d3, g.d4, g.r2, g.r3
    L = g.L
    R = rho ** 2 + z ** 2
    E = L - R - d2 * d2
    one = np.ones_like(R)
    C = _quartic_from_m(
        d2 * d2 * (r2 * r2 - rho ** 2) + (R + d2 * d2 - L) ** 2 / 4.0,
        2 * r2 * d4 * d2 * d2 + E * d4 * r2,
        E * d4 * d3,
        2 * r2 * d3 * d4 * d4 * one,
        d4 * d4 * (r2 * r2 + d2 * d2) * one,
        d3 * d3 * d4 * d4 * one,
    )
    C = C / np.max(np.abs(C), axis=1, keepdims=True)
    flip = np.abs(C[:, 4]) < np.abs(C[:, 0])
    C[flip] = C[flip, ::-1]
    comp = np.zeros((len(C), 4, 4))
    comp[:, 1:, :3] = np.eye(3)
    comp[:, :, 3] = -C[:, :4] / C[:, 4:5]
    ev = np.linalg.eigvals(comp)
    valid = np.abs(ev.imag) <= imag_tol * (1 + np.abs(ev.real))
    x = ev.real
    with np.errstate(divide="ignore"):
        th3 = np.where(flip[:, None], 2 * np.arctan(1.0 / x), 2 * np.arctan(x))
    c3, s3 = np.cos(th3), np.sin(th3)
    u = d3 + d4 * c3
    a = (R[:, None] + d2 * d2 - L - 2 * d3 * d4 * c3 - 2 * r2 * d4 * s3) / (2 * d2)
    den = u * u + r3 * r3
    zz = z[:, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        c2 = (u * (a - d2) + r3 * zz) / den
        s2 = (r3 * (a - d2) - u * zz) / den
    th2 = np.arctan2(s2, c2)
    aa, bb, zf = section_map(g, th2, th3)
    err = np.abs(np.hypot(aa, bb) - rho[:, None]) + np.abs(zf - zz)
    valid &= np.isfinite(err) & (err < 1e-6 * (1 + g.reach))
    out_shape = shape + (4,)
    return th2.reshape(out_shape), wrap_angle(th3).reshape(out_shape), valid.reshape(out_shape)
