"""Parallel robot instances."""

from __future__ import annotations

from dataclasses import dataclass
from math import acos

import numpy as np

from .base import ParallelModel, SeparableModel


@dataclass(frozen=True)
class ModelRPRPR(SeparableModel):
    """Planar two-leg robot: P at the intersection of circles about A = (0, 0) and B = (l, 0)."""

    l: float = 5.0
    rho_min: float = 2.0
    rho_max: float = 7.0

    n = 2
    x_names = ("x", "y")
    q_names = ("rho1", "rho2")

    def __post_init__(self):
        if not self.rho_min > 0:
            raise ValueError("rho_min must be positive")
        if not self.rho_min < self.rho_max:
            raise ValueError("need rho_min < rho_max")

    def x_box(self):
        return [(self.l - self.rho_max, self.rho_max), (-self.rho_max, self.rho_max)]

    def q_box(self):
        return [(self.rho_min, self.rho_max)] * 2

    def image(self, X):
        x, y = X[..., 0], X[..., 1]
        return np.stack([x * x + y * y, (x - self.l) ** 2 + y * y], axis=-1)

    def image_jac(self, X):
        x, y = X[..., 0], X[..., 1]
        return np.stack([np.stack([2 * x, 2 * y], -1), np.stack([2 * (x - self.l), 2 * y], -1)], -2)


def _platform_from_sides(l1: float, l2: float, l3: float) -> tuple:
    """Local B1..B3 with B1 at the origin and B2 on the x axis (l1 = B2B3, l2 = B1B2, l3 = B3B1)."""
    if not (l1 < l2 + l3 and l2 < l1 + l3 and l3 < l1 + l2):
        raise ValueError("platform sides violate the triangle inequality")
    theta = acos((l2 * l2 + l3 * l3 - l1 * l1) / (2 * l2 * l3))
    return ((0.0, 0.0), (float(l2), 0.0), (float(l3 * np.cos(theta)), float(l3 * np.sin(theta))))


def _rot_points(phi, pts):
    c, s = np.cos(phi), np.sin(phi)
    px, py = pts[:, 0], pts[:, 1]
    c, s = c[..., None], s[..., None]
    return c * px - s * py, s * px + c * py


@dataclass(frozen=True)
class Model3RPR(SeparableModel):
    """Planar 3-RPR robot; X = (x, y, phi) places platform point B1 and the platform angle.

    ``base`` holds A1..A3 and ``platform`` the local coordinates of B1..B3
    (B1 at the platform origin for the standard construction).
    """

    base: tuple = ((0.0, 0.0), (15.9, 0.0), (0.0, 10.0))
    platform: tuple = _platform_from_sides(16.5, 17.0, 20.8)
    rho_min: float = 10.0
    rho_max: float = 32.0

    n = 3
    x_names = ("x", "y", "phi")
    q_names = ("rho1", "rho2", "rho3")

    @classmethod
    def from_sides(cls, c2: float, c3: float, d3: float, l1: float, l2: float, l3: float,
                   rho_min: float = 10.0, rho_max: float = 32.0) -> "Model3RPR":
        """Base A1 = (0, 0), A2 = (c2, 0), A3 = (c3, d3); sides l1 = B2B3, l2 = B1B2, l3 = B3B1."""
        return cls(((0.0, 0.0), (float(c2), 0.0), (float(c3), float(d3))),
                   _platform_from_sides(l1, l2, l3), rho_min, rho_max)

    @classmethod
    def reference(cls) -> "Model3RPR":
        """Reference dimensions with joint limits 10 to 32."""
        return cls.from_sides(15.9, 0.0, 10.0, 16.5, 17.0, 20.8)

    @property
    def theta(self) -> float:
        """Platform interior angle at B1."""
        b = np.asarray(self.platform)
        u, w = b[1] - b[0], b[2] - b[0]
        return float(np.arctan2(u[0] * w[1] - u[1] * w[0], u @ w))

    def x_box(self):
        r = self.rho_max + float(np.max(np.linalg.norm(np.asarray(self.platform), axis=1)))
        a = np.asarray(self.base)
        return [(a[:, 0].min() - r, a[:, 0].max() + r), (a[:, 1].min() - r, a[:, 1].max() + r), (-np.pi, np.pi)]

    def x_wrap(self):
        return (False, False, True)

    def q_box(self):
        return [(self.rho_min, self.rho_max)] * 3

    def _legs(self, X):
        bx, by = _rot_points(X[..., 2], np.asarray(self.platform))
        a = np.asarray(self.base)
        wx = X[..., :1] + bx - a[:, 0]
        wy = X[..., 1:2] + by - a[:, 1]
        return wx, wy, bx, by

    def image(self, X):
        wx, wy, _, _ = self._legs(np.asarray(X, dtype=float))
        return wx * wx + wy * wy

    def image_jac(self, X):
        wx, wy, bx, by = self._legs(np.asarray(X, dtype=float))
        # d/dphi of R(phi) b = (-by, bx) in rotated coordinates
        dphi = 2 * (wx * -by + wy * bx)
        return np.stack([2 * wx, 2 * wy, dphi], axis=-1)


@dataclass(frozen=True)
class ModelSpherical2UPSU(SeparableModel):
    """Two-rotation spherical robot; X = (alpha, beta), q = (rho1, rho2)."""

    h: float = 0.0
    r: float = 1.0
    f: float = 1.0

    n = 2
    x_names = ("alpha", "beta")
    q_names = ("rho1", "rho2")

    def x_box(self):
        return [(-np.pi, np.pi), (-np.pi, np.pi)]

    def x_wrap(self):
        return (True, True)

    def q_box(self):
        return [(0.0, np.inf)] * 2

    def image(self, X):
        h, r, f = self.h, self.r, self.f
        ca, sa = np.cos(X[..., 0]), np.sin(X[..., 0])
        cb, sb = np.cos(X[..., 1]), np.sin(X[..., 1])
        k = f * f + h * h + r * r + 1.0
        g1 = -2 * (f * h + ca * r) * sb + 2 * (h * ca - f * r) * cb + k
        g2 = 2 * h * (f * sa + ca) * cb - 2 * f * ca * r + 2 * sa * r + k
        return np.stack([g1, g2], axis=-1)

    def image_jac(self, X):
        h, r, f = self.h, self.r, self.f
        ca, sa = np.cos(X[..., 0]), np.sin(X[..., 0])
        cb, sb = np.cos(X[..., 1]), np.sin(X[..., 1])
        g1a = 2 * r * sa * sb - 2 * h * sa * cb
        g1b = -2 * (f * h + ca * r) * cb - 2 * (h * ca - f * r) * sb
        g2a = 2 * h * (f * ca - sa) * cb + 2 * f * sa * r + 2 * ca * r
        g2b = -2 * h * (f * sa + ca) * sb
        return np.stack([np.stack([g1a, g1b], -1), np.stack([g2a, g2b], -1)], -2)


@dataclass(frozen=True)
class Model3PPPSOrientation(ParallelModel):
    """Orientation part of the 3-PPPS robot: only its factored singularity condition."""

    n = 3
    x_names = ("phi", "theta", "sigma")

    def x_box(self):
        return [(-np.pi, np.pi), (0.0, np.pi), (-np.pi, np.pi)]

    def x_wrap(self):
        return (True, False, True)

    def residual(self, X, q):
        raise NotImplementedError("the 3-PPPS position chain is not modelled")

    def singularity_factors(self, X):
        X = np.asarray(X, dtype=float)
        phi, theta, sigma = X[..., 0], X[..., 1], X[..., 2]
        s, c = np.sin(theta / 2), np.cos(theta / 2)
        first = np.sqrt(2.0) * np.sin(3 * phi - sigma) * s ** 3 - np.cos(1.5 * theta) * np.cos(sigma)
        return {"orientation": first, "sin_half_tilt": s, "cos_half_tilt_sq": c * c}

    def singularity_value(self, X):
        f = self.singularity_factors(X)
        return f["orientation"] * f["sin_half_tilt"] * f["cos_half_tilt_sq"]

    def feasible(self, X):
        return np.ones(np.asarray(X).shape[:-1], dtype=bool)


@dataclass(frozen=True)
class Model2RPRRR(SeparableModel):
    """Two-leg robot with a fixed-length third leg; X = (theta, psi), q = (l2, l3) = squared lengths."""

    r1: float = 30.0
    bA: float = 10.0
    hA: float = 5.0
    bB: float = 1.0
    hB: float = 2.0

    n = 2
    x_names = ("theta", "psi")
    q_names = ("l2", "l3")

    def x_box(self):
        return [(-np.pi, np.pi), (-np.pi, np.pi)]

    def x_wrap(self):
        return (True, True)

    def q_box(self):
        return [(0.0, np.inf)] * 2

    def joint_image(self, q):
        return np.asarray(q, dtype=float)

    def joint_from_image(self, g):
        if np.any(np.asarray(g) < 0):
            raise ValueError("negative squared length: pose not reachable")
        return np.asarray(g, dtype=float)

    def _from_image_nocheck(self, g):
        return np.asarray(g, dtype=float)

    def image(self, X):
        t, p = X[..., 0], X[..., 1]
        u1 = self.r1 - self.bA * np.cos(t) - self.bB * np.cos(p)
        v1 = self.bA * np.sin(t) + self.bB * np.sin(p)
        u2 = self.r1 - self.hA * np.sin(2 * t) - self.hB * np.sin(p)
        v2 = self.hA * np.cos(2 * t) + self.hB * np.cos(p)
        return np.stack([u1 * u1 + v1 * v1, u2 * u2 + v2 * v2], axis=-1)

    def image_jac(self, X):
        t, p = X[..., 0], X[..., 1]
        u1 = self.r1 - self.bA * np.cos(t) - self.bB * np.cos(p)
        v1 = self.bA * np.sin(t) + self.bB * np.sin(p)
        u2 = self.r1 - self.hA * np.sin(2 * t) - self.hB * np.sin(p)
        v2 = self.hA * np.cos(2 * t) + self.hB * np.cos(p)
        g1t = 2 * u1 * self.bA * np.sin(t) + 2 * v1 * self.bA * np.cos(t)
        g1p = 2 * u1 * self.bB * np.sin(p) + 2 * v1 * self.bB * np.cos(p)
        g2t = -4 * u2 * self.hA * np.cos(2 * t) - 4 * v2 * self.hA * np.sin(2 * t)
        g2p = -2 * u2 * self.hB * np.cos(p) - 2 * v2 * self.hB * np.sin(p)
        return np.stack([np.stack([g1t, g1p], -1), np.stack([g2t, g2p], -1)], -2)


@dataclass(frozen=True)
class ModelRPR2RPR(ParallelModel):
    """Planar robot with one prismatic-actuated and two revolute-actuated legs.

    Unknowns X = (x, y, phi, l2, l3) include the two passive leg lengths;
    inputs are q = (rho1, alpha2, alpha3). ``a`` and ``b`` are platform
    distances, ``rho2`` and ``rho3`` the fixed base offsets of legs 2 and 3.
    """

    a: float
    b: float
    rho2: float
    rho3: float
    extent: float = 10.0

    n = 5
    x_names = ("x", "y", "phi", "l2", "l3")
    q_names = ("rho1", "alpha2", "alpha3")

    def x_box(self):
        e = self.extent
        return [(-e, e), (-e, e), (-np.pi, np.pi), (-e, e), (-e, e)]

    def x_wrap(self):
        return (False, False, True, False, False)

    def residual(self, X, q):
        X = np.asarray(X, dtype=float)
        q = np.asarray(q, dtype=float)
        x, y, phi, l2, l3 = (X[..., k] for k in range(5))
        rho1, a2, a3 = q[..., 0], q[..., 1], q[..., 2]
        return np.stack([
            self.rho2 + l2 * np.cos(a2) - x,
            l2 * np.sin(a2) - y,
            (x - self.a * np.cos(phi)) ** 2 + (y - self.a * np.sin(phi)) ** 2 - rho1 ** 2,
            l3 * np.cos(a3) - self.b * np.cos(phi) - x,
            self.rho3 + l3 * np.sin(a3) - self.b * np.sin(phi) - y,
        ], axis=-1)

    def singularity_value(self, X):
        raise NotImplementedError("the five-residual model needs q: use jac_x(X, q)")
