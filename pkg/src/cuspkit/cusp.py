"""Cusp points of 3R workspace cross-sections and cuspidality verdicts.

A cusp is a point (rho, z) of the cross-section where three inverse solutions
coincide, i.e. where the characteristic quartic P(t) has a triple root:

    P(t) = P'(t) = P''(t) = 0,   P'''(t) != 0.

The unknowns are (t, R, z) with R = rho^2 + z^2. Because t = tan(theta3 / 2)
is unbounded near theta3 = pi, the same system is also solved in the chart
s = 1/t, where the quartic is replaced by its reversal.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import atan2, pi, sqrt
from typing import Optional

import numpy as np

from .numcore import CLAMP, GridSpec, RealPolynomial, newton_solve, newton_solve_batch, real_roots_clustered, trace_zero_curve
from .serial3r import (
    CrossSectionPoint,
    Geometry3R,
    JointConfig3R,
    _quartic_from_m,
    _fk_array,
    _theta12_from_theta3,
    characteristic_polynomial,
    det_factors,
    position_jacobian,
    wrap_angle,
)

DEDUP_DISTANCE = 1e-4
DEFAULT_SEEDS = 64


@dataclass(frozen=True)
class CuspPoint:
    rho: float
    z: float
    t: float
    q: JointConfig3R
    residual: float

    @property
    def section(self) -> CrossSectionPoint:
        return CrossSectionPoint(self.rho, self.z)


@dataclass(frozen=True)
class CuspEvidence:
    """What decided a cuspidality verdict.

    ``path`` is one of ``"geometric_condition"``, ``"closed_form"`` (closed-form
    condition for r3 = 0) or ``"cusp_search"``.
    """

    path: str
    cusps: tuple[CuspPoint, ...] = ()
    condition: Optional[object] = None
    branch: Optional[str] = None


@dataclass(frozen=True)
class CuspidalityVerdict:
    """``cuspidal`` is True, False, or None when the search cannot decide."""

    cuspidal: Optional[bool]
    evidence: CuspEvidence = field(default_factory=lambda: CuspEvidence("cusp_search"))

    @property
    def label(self) -> str:
        if self.cuspidal is None:
            return "unknown"
        return "cuspidal" if self.cuspidal else "noncuspidal"


# -- quartic coefficients and their partials in (R, z) -------------------------


def _coeff_block(g: Geometry3R, R, z):
    """Quartic coefficients (..., 5) and their R and z partials for a normalized arm."""
    d2, d3, d4, r2 = g.d2, g.d3, g.d4, g.r2
    L = g.L
    R = np.asarray(R, dtype=float)
    z = np.asarray(z, dtype=float)
    rho2 = R - z * z
    E = L - R - d2 * d2
    one = np.ones_like(R)
    m0 = d2 * d2 * (r2 * r2 - rho2) + (R + d2 * d2 - L) ** 2 / 4.0
    m1 = 2 * r2 * d4 * d2 * d2 + E * d4 * r2
    m2 = E * d4 * d3
    m3 = 2 * r2 * d3 * d4 * d4 * one
    m4 = d4 * d4 * (r2 * r2 + d2 * d2) * one
    m5 = d3 * d3 * d4 * d4 * one
    c = _quartic_from_m(m0, m1, m2, m3, m4, m5)
    zero = np.zeros_like(R)
    dm0_R = -d2 * d2 + (R + d2 * d2 - L) / 2.0
    dm0_z = 2 * d2 * d2 * z
    dm1_R = -d4 * r2 * one
    dm2_R = -d4 * d3 * one
    dc_R = _quartic_from_m(dm0_R, dm1_R, dm2_R, zero, zero, zero)
    dc_z = _quartic_from_m(dm0_z, zero, zero, zero, zero, zero)
    return c, dc_R, dc_z


def _derivs(c, x, upto):
    """Values of p, p', ..., p^(upto) at x for coefficient rows c (..., 5)."""
    out = []
    coeffs = c
    for _ in range(upto + 1):
        out.append(np.polynomial.polynomial.polyval(x, coeffs.T, tensor=False))
        k = np.arange(1, coeffs.shape[-1])
        coeffs = coeffs[..., 1:] * k
    return out


def _system(g: Geometry3R, reverse: bool, scale: float):
    def coeffs(R, z):
        c, cR, cz = _coeff_block(g, R, z)
        if reverse:
            c, cR, cz = c[..., ::-1], cR[..., ::-1], cz[..., ::-1]
        return c, cR, cz

    def residual(X):
        x, R, z = X[:, 0], X[:, 1], X[:, 2]
        c, _, _ = coeffs(R, z)
        p, p1, p2 = _derivs(c, x, 2)
        return np.stack([p, p1, p2], axis=1) / scale

    def jacobian(X):
        x, R, z = X[:, 0], X[:, 1], X[:, 2]
        c, cR, cz = coeffs(R, z)
        _, p1, p2, p3 = _derivs(c, x, 3)
        dR = _derivs(cR, x, 2)
        dz = _derivs(cz, x, 2)
        J = np.empty((len(X), 3, 3))
        J[:, 0, 0], J[:, 1, 0], J[:, 2, 0] = p1, p2, p3
        for row in range(3):
            J[:, row, 1] = dR[row]
            J[:, row, 2] = dz[row]
        return J / scale

    return coeffs, residual, jacobian


def _second_derivative_roots(c):
    """Real roots of p'' for each row of quartic coefficients c (N, 5)."""
    a = 12.0 * c[:, 4]
    b = 6.0 * c[:, 3]
    cc = 2.0 * c[:, 2]
    disc = b * b - 4 * a * cc
    ok = (disc >= 0) & (np.abs(a) > 1e-300)
    sq = np.sqrt(np.where(ok, disc, 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        r1 = (-b + sq) / (2 * a)
        r2 = (-b - sq) / (2 * a)
    return np.concatenate([r1[ok], r2[ok]]), np.concatenate([np.nonzero(ok)[0]] * 2)


def default_search_grid(g: Geometry3R, resolution: int = DEFAULT_SEEDS) -> GridSpec:
    r = g.reach
    return GridSpec([(0.0, r), (-r, r)], resolution, CLAMP)


def find_cusps(g: Geometry3R, search: Optional[GridSpec] = None, tol: float = 1e-10) -> list[CuspPoint]:
    """All cusp points of the cross-section found from a seeded Newton search.

    Every cell of ``search`` (a (rho, z) grid, by default 64 x 64 over the
    reachable box) contributes seeds ``(x, R, z)`` with x a real root of
    P'' at the cell centre, in both the t and the 1/t chart. Converged
    solutions with ``|P'''| > 10 tol max|coef|`` and ``R >= z^2`` are kept,
    merged at distance 1e-4 in (rho, z) and returned sorted by (rho, z).
    """
    g.require_orthogonal()
    gn = g.normalized()
    k = g.d2
    if search is None:
        search = default_search_grid(g)
    if search.ndim != 2:
        raise ValueError("cusp search grid must be 2-D over (rho, z)")
    rho_c = _cell_centres(search, 0) / k
    z_c = _cell_centres(search, 1) / k
    RHO, Z = np.meshgrid(rho_c, z_c, indexing="ij")
    R0 = (RHO ** 2 + Z ** 2).ravel()
    Z0 = Z.ravel()
    scale = max(1.0, gn.reach) ** 4

    found = []
    for reverse in (False, True):
        coeffs, residual, jacobian = _system(gn, reverse, scale)
        c, _, _ = coeffs(R0, Z0)
        xs, idx = _second_derivative_roots(c)
        keep = np.isfinite(xs) & (np.abs(xs) <= 4.0)
        seeds = np.stack([xs[keep], R0[idx[keep]], Z0[idx[keep]]], axis=1)
        if not len(seeds):
            continue
        X, ok = newton_solve_batch(residual, jacobian, seeds, tol=tol, max_iter=25)
        X = X[ok]
        if not len(X):
            continue
        Xp, _ = newton_solve_batch(residual, jacobian, X, tol=1e-15, max_iter=4)
        better = np.max(np.abs(residual(Xp)), axis=1) <= np.max(np.abs(residual(X)), axis=1)
        X[better] = Xp[better]
        # many seeds land on the same solution; keep one per (R, z) bucket
        _, first = np.unique(np.round(X[:, 1:] / DEDUP_DISTANCE), axis=0, return_index=True)
        for x, R, z in X[np.sort(first)]:
            pt = _accept(gn, coeffs, x, R, z, reverse, tol)
            if pt is not None:
                found.append(pt)

    # merge duplicates, keeping the best-resolved representative
    found.sort(key=lambda p: p.residual)
    out: list[CuspPoint] = []
    for p in found:
        if any(hypot2(p, o) < DEDUP_DISTANCE for o in out):
            continue
        out.append(p)
    out = [_rescale(p, k) for p in out]
    out.sort(key=lambda p: (round(p.rho, 9), p.z))
    return out


def hypot2(a: CuspPoint, b: CuspPoint) -> float:
    return float(np.hypot(a.rho - b.rho, a.z - b.z))


def _cell_centres(grid: GridSpec, axis: int) -> np.ndarray:
    lo, hi = grid.ranges[axis]
    n = grid.resolution[axis]
    return lo + (np.arange(n) + 0.5) * (hi - lo) / n


def _accept(gn: Geometry3R, coeffs, x, R, z, reverse, tol) -> Optional[CuspPoint]:
    rho2 = R - z * z
    if rho2 < -1e-12:
        return None
    c, _, _ = coeffs(np.array([R]), np.array([z]))
    c = c[0]
    p, p1, p2, p3 = (float(v) for v in _derivs(c, np.float64(x), 3))
    cmax = float(np.max(np.abs(c)))
    if abs(p3) <= 10.0 * tol * cmax:
        return None
    # the floor on P''' alone admits isolated points where P ~ t^4 + eps has
    # no real roots at all, so the triple root must also show up as a cluster
    if not any(cl.multiplicity == 3 and abs(cl.value - x) < 1e-3 * max(1.0, abs(x))
               for cl in real_roots_clustered(RealPolynomial(c))):
        return None
    if reverse:
        th3 = pi if x == 0.0 else 2.0 * np.arctan(1.0 / x)
    else:
        th3 = 2.0 * np.arctan(x)
    th3 = wrap_angle(th3)
    rho = sqrt(max(rho2, 0.0))
    th12 = _theta12_from_theta3(gn, rho, 0.0, z, th3)
    if th12 is None:
        return None
    residual = max(abs(p), abs(p1), abs(p2)) / cmax
    return CuspPoint(rho, float(z), float(np.tan(th3 / 2.0)), JointConfig3R(th12[0], th12[1], th3), residual)


def _rescale(p: CuspPoint, k: float) -> CuspPoint:
    return CuspPoint(p.rho * k, p.z * k, p.t, p.q, p.residual)


def verify_triple_root(g: Geometry3R, cusp: CuspPoint, cluster_tol: float = 1e-6) -> bool:
    """True when the quartic at the cusp has a root cluster of multiplicity >= 3."""
    p = characteristic_polynomial(g, cusp.section)
    clusters = real_roots_clustered(p, cluster_tol)
    if p.degree < 4:
        # root at t = infinity (theta3 = pi): inspect the reversed quartic
        clusters = clusters + real_roots_clustered(p.reversed(), cluster_tol)
    return any(c.multiplicity >= 3 for c in clusters)


def cusp_symmetry_check(cusps, tol: float = 1e-6) -> bool:
    """True iff the cusps pair up as (rho, z) and (rho, -z)."""
    pts = [(c.rho, c.z) for c in cusps]
    unused = list(range(len(pts)))
    while unused:
        i = unused.pop(0)
        rho, z = pts[i]
        if abs(z) < tol:
            continue
        j = next((j for j in unused if abs(pts[j][0] - rho) < tol and abs(pts[j][1] + z) < tol), None)
        if j is None:
            return False
        unused.remove(j)
    return True


# -- joint-space cusp search (any twist angles) ---------------------------------


def _det_at(g: Geometry3R, th2: float, th3: float) -> float:
    if g.is_orthogonal:
        return float(det_factors(g, th2, th3)[0])
    return float(np.linalg.det(position_jacobian(g, [0.0, th2, th3])))


def _det_field(g: Geometry3R, grid: GridSpec) -> np.ndarray:
    T2, T3 = grid.mesh()
    if g.is_orthogonal:
        return det_factors(g, T2, T3)[0]
    return np.vectorize(lambda a, b: _det_at(g, a, b))(T2, T3)


def _kernel(J: np.ndarray, ref: Optional[np.ndarray]) -> np.ndarray:
    k = np.linalg.svd(J)[2][-1]
    if ref is not None and k @ ref < 0:
        k = -k
    return k


def _tangency(g: Geometry3R, q2, ref: Optional[np.ndarray] = None):
    """(det J, grad det . kernel) at (theta2, theta3), kernel oriented along ``ref``."""
    th2, th3 = q2
    J = position_jacobian(g, [0.0, th2, th3])
    h = 1e-6
    g2 = (_det_at(g, th2 + h, th3) - _det_at(g, th2 - h, th3)) / (2 * h)
    g3 = (_det_at(g, th2, th3 + h) - _det_at(g, th2, th3 - h)) / (2 * h)
    k = _kernel(J, ref)
    return np.array([np.linalg.det(J), g2 * k[1] + g3 * k[2]]), k


def find_cusps_joint_space(g: Geometry3R, resolution: int = 256, tol: float = 1e-10) -> list[CuspPoint]:
    """Cusps located in joint space, valid for any twist angles.

    A cusp of the cross-section is the image of a singular configuration where
    the kernel of J is tangent to the singular curve det J = 0 on the
    (theta2, theta3) torus. The singular curves are traced, sign changes of
    the tangency function along them (kernel oriented continuously) are
    refined by Newton, and each solution is mapped to (rho, z). Singular
    points on the first axis (rho = 0) are not cusps of the cross-section and
    are skipped.
    """
    grid = GridSpec.torus(resolution)
    det = _det_field(g, grid)
    scale = max(1.0, g.reach) ** 3
    found = []
    for line in trace_zero_curve(det, grid):
        pts = line.points
        if line.closed:
            pts = np.vstack([pts, pts[:1]])
        vals, kers, ref = [], [], None
        for p in pts:
            (_, tau), ref = _tangency(g, p, ref)
            vals.append(tau)
            kers.append(ref)
        vals = np.array(vals)
        # a tangency function that is zero along a whole stretch (a singular
        # line collapsing to one point) changes sign by noise only
        floor = 1e-6 * scale
        brackets = (np.sign(vals[:-1]) * np.sign(vals[1:]) < 0) & (
            np.maximum(np.abs(vals[:-1]), np.abs(vals[1:])) > floor)
        for i in np.nonzero(brackets)[0]:
            seed = pts[i] + 0.5 * wrap_angle(pts[i + 1] - pts[i])
            kref = kers[i]
            sol = newton_solve(lambda q: _tangency(g, q, kref)[0] / scale, seed, tol=tol)
            if sol is None:
                continue
            th2, th3 = wrap_angle(sol[0]), wrap_angle(sol[1])
            x, y, z = _fk_array(g, np.array([0.0, th2, th3]))
            rho = float(np.hypot(x, y))
            if rho < 1e-6 * g.reach:
                continue
            h = 1e-6
            grad = ((_det_at(g, th2 + h, th3) - _det_at(g, th2 - h, th3)) / (2 * h),
                    (_det_at(g, th2, th3 + h) - _det_at(g, th2, th3 - h)) / (2 * h))
            if np.hypot(*grad) < 1e-3 * scale:
                # crossing of singular curves, not a fold point
                continue
            res = float(np.max(np.abs(_tangency(g, (th2, th3), kref)[0])) / scale)
            found.append(CuspPoint(rho, float(z), float(np.tan(th3 / 2)), JointConfig3R(-atan2(y, x), th2, th3), res))
    out: list[CuspPoint] = []
    for p in sorted(found, key=lambda p: p.residual):
        if not any(hypot2(p, o) < DEDUP_DISTANCE for o in out):
            out.append(p)
    out.sort(key=lambda p: (round(p.rho, 9), p.z))
    return out


def is_cuspidal(g: Geometry3R, search: Optional[GridSpec] = None) -> CuspidalityVerdict:
    """Decide cuspidality by the cheapest conclusive route.

    Order: the six geometric noncuspidality conditions, then the closed-form
    condition for orthogonal arms with r3 = 0, then a cusp search. For
    non-orthogonal arms a failed search gives an unknown verdict.
    """
    from .classify import geometric_noncuspidality, noncuspidal_iff

    cond = geometric_noncuspidality(g)
    if cond is not None:
        return CuspidalityVerdict(False, CuspEvidence("geometric_condition", condition=cond))
    if g.is_orthogonal and g.r3 == 0.0:
        nc, branch = noncuspidal_iff(g)
        if nc:
            return CuspidalityVerdict(False, CuspEvidence("closed_form", branch=branch))
        cusps = find_cusps(g, search)
        if not cusps:
            cusps = find_cusps(g, default_search_grid(g, 4 * DEFAULT_SEEDS))
        return CuspidalityVerdict(True, CuspEvidence("closed_form", cusps=tuple(cusps), branch=branch))
    if g.is_orthogonal:
        cusps = find_cusps(g, search)
        return CuspidalityVerdict(bool(cusps), CuspEvidence("cusp_search", cusps=tuple(cusps)))
    cusps = find_cusps_joint_space(g)
    return CuspidalityVerdict(True if cusps else None, CuspEvidence("cusp_search", cusps=tuple(cusps)))
