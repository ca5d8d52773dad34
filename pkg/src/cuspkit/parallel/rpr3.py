"""3-RPR specifics: elimination-based direct kinematics, joint-space sections, analytic types."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import brentq

from ..numcore import CLAMP, WRAP, GridSpec, Polyline, trace_zero_curve
from .base import AssemblyMode, fold_cusps_2d
from .models import Model3RPR

PHI_SAMPLES = 1024


def _offsets(model: Model3RPR, phi):
    """c_i(phi) = R(phi) b_i - a_i and its derivative, shapes (..., 3, 2)."""
    phi = np.asarray(phi, dtype=float)
    b = np.asarray(model.platform)
    a = np.asarray(model.base)
    c, s = np.cos(phi)[..., None], np.sin(phi)[..., None]
    cx = c * b[:, 0] - s * b[:, 1] - a[:, 0]
    cy = s * b[:, 0] + c * b[:, 1] - a[:, 1]
    dx = -s * b[:, 0] - c * b[:, 1]
    dy = c * b[:, 0] - s * b[:, 1]
    return np.stack([cx, cy], -1), np.stack([dx, dy], -1)


def _eliminant(model: Model3RPR, L, phi):
    """g(phi) whose zeros are the platform angles of assembly modes; also returns P(phi).

    Subtracting the first leg equation from the others leaves two equations
    linear in the position P; substituting their solution into the first
    gives g = |N + Delta c_1|^2 - Delta^2 rho_1^2 with P = N / Delta.
    """
    L = np.asarray(L, dtype=float)
    C, _ = _offsets(model, phi)
    c1 = C[..., 0, :]
    rows, rhs = [], []
    for i in (1, 2):
        ci = C[..., i, :]
        rows.append(2 * (ci - c1))
        rhs.append(L[..., i:i + 1] - L[..., 0:1] - np.sum(ci * ci, -1, keepdims=True) + np.sum(c1 * c1, -1, keepdims=True))
    (a1, b1), (a2, b2) = (rows[0][..., 0], rows[0][..., 1]), (rows[1][..., 0], rows[1][..., 1])
    e1, e2 = rhs[0][..., 0], rhs[1][..., 0]
    delta = a1 * b2 - a2 * b1
    nx = e1 * b2 - e2 * b1
    ny = a1 * e2 - a2 * e1
    g = (nx + delta * c1[..., 0]) ** 2 + (ny + delta * c1[..., 1]) ** 2 - delta * delta * L[..., 0]
    return g, nx, ny, delta


def direct_kinematics_3rpr(model: Model3RPR, q, n_phi: int = PHI_SAMPLES) -> list[AssemblyMode]:
    """Assembly modes by root bracketing of the eliminant over the platform angle."""
    q = np.asarray(q, dtype=float)
    L = q * q
    phis = np.linspace(-np.pi, np.pi, n_phi + 1)
    g = _eliminant(model, L, phis)[0]
    out = []
    for i in np.nonzero(np.sign(g[:-1]) * np.sign(g[1:]) < 0)[0]:
        phi = brentq(lambda p: float(_eliminant(model, L, np.array(p))[0]), phis[i], phis[i + 1], xtol=1e-14)
        _, nx, ny, delta = _eliminant(model, L, np.array(phi))
        if abs(delta) < 1e-12:
            continue
        X = np.array([nx / delta, ny / delta, phi])
        # one Newton polish on the full system
        for _ in range(3):
            r = model.residual(X, q)
            X = X - np.linalg.solve(model.jac_x(X[None])[0], r)
        X[2] = (X[2] + np.pi) % (2 * np.pi) - np.pi
        out.append(AssemblyMode(tuple(float(v) for v in X), float(model.singularity_value(X[None])[0])))
    return sorted(out, key=lambda m: m.X)


def mode_count_grid(model: Model3RPR, rho1: float, R2, R3, n_phi: int = PHI_SAMPLES) -> np.ndarray:
    """Number of assembly modes at every (rho2, rho3) of the given arrays."""
    R2, R3 = np.broadcast_arrays(np.asarray(R2, dtype=float), np.asarray(R3, dtype=float))
    phis = np.linspace(-np.pi, np.pi, n_phi, endpoint=False)
    out = np.zeros(R2.shape, dtype=int)
    flat2, flat3, fo = R2.ravel(), R3.ravel(), out.ravel()
    chunk = max(1, 2_000_000 // n_phi)
    for s in range(0, len(flat2), chunk):
        L = np.stack([np.full(len(flat2[s:s + chunk]), rho1 * rho1), flat2[s:s + chunk] ** 2, flat3[s:s + chunk] ** 2], -1)
        g = _eliminant(model, L[:, None, :], phis[None, :])[0]
        sg = np.sign(g)
        fo[s:s + chunk] = np.sum(sg * np.roll(sg, -1, axis=1) < 0, axis=1)
    return out


@dataclass(frozen=True)
class SectionCusp:
    q: tuple[float, float]
    X: tuple[float, float, float]


@dataclass
class JointSection:
    rho1: float
    grid: GridSpec
    counts: np.ndarray
    singular: list[Polyline]
    cusps: list[SectionCusp]

    def count_values(self) -> set[int]:
        return set(int(v) for v in np.unique(self.counts)) - {0}


def _surface_pose(model: Model3RPR, rho1: float, u):
    """Pose X on the rho1 sphere: P = rho1 e(psi) - c_1(phi)."""
    psi, phi = u[..., 0], u[..., 1]
    C, _ = _offsets(model, phi)
    c1 = C[..., 0, :]
    x = rho1 * np.cos(psi) - c1[..., 0]
    y = rho1 * np.sin(psi) - c1[..., 1]
    return np.stack([x, y, phi], -1)


def _section_jac(model: Model3RPR, rho1: float):
    def jac(u):
        u = np.asarray(u, dtype=float)
        X = _surface_pose(model, rho1, u)
        G = model.image_jac(X)[..., 1:, :]
        psi, phi = u[..., 0], u[..., 1]
        _, dC = _offsets(model, phi)
        dpsi = np.stack([-rho1 * np.sin(psi), rho1 * np.cos(psi), np.zeros_like(psi)], -1)
        dphi = np.stack([-dC[..., 0, 0], -dC[..., 0, 1], np.ones_like(psi)], -1)
        return np.stack([np.einsum("...ij,...j->...i", G, dpsi), np.einsum("...ij,...j->...i", G, dphi)], -1)
    return jac


def joint_section_analysis(model: Model3RPR, rho1: float, grid: Optional[GridSpec] = None,
                           trace_resolution: int = 256) -> JointSection:
    """Singular curves, mode counts and cusps of the (rho2, rho3) section at fixed rho1."""
    lo, hi = model.rho_min, model.rho_max
    if not lo <= rho1 <= hi:
        raise ValueError("rho1 outside the joint limits")
    if grid is None:
        grid = GridSpec([(lo, hi), (lo, hi)], 128, CLAMP)
    R2, R3 = grid.mesh()
    counts = mode_count_grid(model, rho1, R2, R3)

    tgrid = GridSpec.torus(trace_resolution)
    jac = _section_jac(model, rho1)
    U = tgrid.points()
    Dv = np.linalg.det(jac(U)).reshape(tgrid.shape)
    singular = []
    for pl in trace_zero_curve(Dv, tgrid):
        X = _surface_pose(model, rho1, pl.points)
        L = model.image(X)
        singular.append(Polyline(np.sqrt(L[:, 1:]), pl.closed))
    cusps = []
    for u in fold_cusps_2d(jac, tgrid):
        X = _surface_pose(model, rho1, u)
        q = np.sqrt(model.image(X))
        if np.all(q[1:] >= lo) and np.all(q[1:] <= hi):
            cusps.append(SectionCusp((float(q[1]), float(q[2])), tuple(float(v) for v in X)))
    cusps.sort(key=lambda c: c.q)
    return JointSection(rho1, grid, counts, singular, cusps)


def cusp_loop(section: JointSection, start, cusp: int, margin: float = 0.5) -> np.ndarray:
    """Closed rectangle in (rho1, rho2, rho3) from ``start`` = (rho2, rho3) around one cusp.

    The rectangle has ``start`` as a corner and extends ``margin`` beyond the
    chosen cusp. Raises ValueError if it would enclose other cusps or leave
    the joint box.
    """
    s = np.asarray(start, dtype=float)
    c = np.asarray(section.cusps[cusp].q)
    sign = np.where(c >= s, 1.0, -1.0)
    far = c + sign * margin
    lo, hi = np.minimum(s, far), np.maximum(s, far)
    inside = [k for k, cp in enumerate(section.cusps) if np.all(np.asarray(cp.q) > lo) and np.all(np.asarray(cp.q) < hi)]
    if inside != [cusp]:
        raise ValueError(f"rectangle encloses cusps {inside}")
    (g0, g1), (h0, h1) = section.grid.ranges
    if far[0] < g0 or far[0] > g1 or far[1] < h0 or far[1] > h1:
        raise ValueError("rectangle leaves the joint box")
    corners = [s, np.array([far[0], s[1]]), far, np.array([s[0], far[1]]), s]
    return np.array([[section.rho1, p[0], p[1]] for p in corners])


# -- analytic robots -------------------------------------------------------------------------

GENERIC = "generic"


def _coincide(P, tol):
    return any(np.linalg.norm(P[i] - P[j]) < tol for i in range(3) for j in range(i + 1, 3))


def _collinear(P, tol):
    u, w = P[1] - P[0], P[2] - P[0]
    return abs(u[0] * w[1] - u[1] * w[0]) < tol


def _congruent(A, B, tol):
    return all(abs(np.linalg.norm(A[i] - A[j]) - np.linalg.norm(B[i] - B[j])) < tol
               for i in range(3) for j in range(i + 1, 3))


def classify_analytic_3rpr(model: Model3RPR, tol: float = 1e-9) -> str:
    """``"Type1"`` .. ``"Type4"`` for the analytic families, else ``"generic"``.

    Predicates are checked in the order 1, 4, 3, 2: coincident joints,
    aligned and congruent, congruent, aligned.
    """
    A = np.asarray(model.base, dtype=float)
    B = np.asarray(model.platform, dtype=float)
    scale = max(1.0, float(np.max(np.abs(np.concatenate([A, B])))))
    t = tol * scale
    if _coincide(A, t) or _coincide(B, t):
        return "Type1"
    aligned = _collinear(A, t * scale) and _collinear(B, t * scale)
    congruent = _congruent(A, B, t)
    if aligned and congruent:
        return "Type4"
    if congruent:
        return "Type3"
    if aligned:
        return "Type2"
    return GENERIC
