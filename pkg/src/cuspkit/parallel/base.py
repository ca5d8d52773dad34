"""Constraint-model framework for parallel robots.

A model relates outputs X (platform pose) and inputs q (actuated joints) by
nX = nQ residual equations F(X, q) = 0. Most models are separable,
F(X, q) = g(X) - h(q), with g the constraint image of the pose and h a
componentwise map of the joints (squared leg lengths, for instance); their
inverse kinematics is then closed-form and A = dF/dX = dg/dX does not depend
on q.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from ..numcore import CLAMP, WRAP, GridSpec, Polyline, grid_path, sign_components, trace_zero_curve

FD_STEP = 1e-6
DEDUP_RADIUS = 1e-4
DEFAULT_STARTS = 32


def wrap_pi(a):
    return (np.asarray(a) + np.pi) % (2 * np.pi) - np.pi


class ParallelModel:
    """Base class. Subclasses define the boxes and ``residual`` (or ``image`` for separable models)."""

    n: int = 0
    x_names: tuple[str, ...] = ()
    q_names: tuple[str, ...] = ()

    # -- geometry of the spaces
    def x_box(self) -> list[tuple[float, float]]:
        raise NotImplementedError

    def x_wrap(self) -> tuple[bool, ...]:
        return (False,) * self.n

    def q_box(self) -> list[tuple[float, float]]:
        return [(-np.inf, np.inf)] * self.n

    def x_grid(self, resolution: int) -> GridSpec:
        topo = [WRAP if w else CLAMP for w in self.x_wrap()]
        return GridSpec(self.x_box(), resolution, topo)

    def reduce_x(self, X):
        X = np.array(X, dtype=float, copy=True)
        for k, w in enumerate(self.x_wrap()):
            if w:
                X[..., k] = wrap_pi(X[..., k])
        return X

    def x_distance(self, X1, X2):
        d = np.asarray(X1, dtype=float) - np.asarray(X2, dtype=float)
        for k, w in enumerate(self.x_wrap()):
            if w:
                d[..., k] = wrap_pi(d[..., k])
        return np.max(np.abs(d), axis=-1)

    # -- constraints
    def residual(self, X, q):
        raise NotImplementedError

    def jac_x(self, X, q=None):
        """A = dF/dX, shape (..., n, n); central differences unless overridden."""
        X = np.asarray(X, dtype=float)
        if q is None:
            q = self.inverse_kinematics(X)
        cols = []
        for k in range(X.shape[-1]):
            e = np.zeros(X.shape[-1])
            e[k] = FD_STEP
            cols.append((self.residual(X + e, q) - self.residual(X - e, q)) / (2 * FD_STEP))
        return np.stack(cols, axis=-1)

    def jac_q(self, X, q):
        X = np.asarray(X, dtype=float)
        q = np.asarray(q, dtype=float)
        cols = []
        for k in range(q.shape[-1]):
            e = np.zeros(q.shape[-1])
            e[k] = FD_STEP
            cols.append((self.residual(X, q + e) - self.residual(X, q - e)) / (2 * FD_STEP))
        return np.stack(cols, axis=-1)

    def inverse_kinematics(self, X):
        raise NotImplementedError("no closed-form inverse kinematics for this model")

    def singularity_value(self, X):
        """det A at poses X (vectorised)."""
        return np.linalg.det(self.jac_x(X))

    def feasible(self, X) -> np.ndarray:
        """Poses whose inverse kinematics exists and respects the joint box."""
        X = np.asarray(X, dtype=float)
        try:
            q = self._ik_unchecked(X)
        except NotImplementedError:
            return np.ones(X.shape[:-1], dtype=bool)
        ok = np.all(np.isfinite(q), axis=-1)
        for k, (lo, hi) in enumerate(self.q_box()):
            ok &= (q[..., k] >= lo) & (q[..., k] <= hi)
        return ok

    def _ik_unchecked(self, X):
        return self.inverse_kinematics(X)


class SeparableModel(ParallelModel):
    """F(X, q) = image(X) - joint_image(q)."""

    def image(self, X):
        raise NotImplementedError

    def image_jac(self, X):
        raise NotImplementedError

    def joint_image(self, q):
        """Componentwise map h(q); squared lengths by default."""
        return np.asarray(q, dtype=float) ** 2

    def joint_from_image(self, g):
        if np.any(np.asarray(g) < 0):
            raise ValueError("negative squared length: pose not reachable")
        return np.sqrt(g)

    def residual(self, X, q):
        return self.image(X) - self.joint_image(q)

    def jac_x(self, X, q=None):
        return self.image_jac(np.asarray(X, dtype=float))

    def inverse_kinematics(self, X):
        return self.joint_from_image(self.image(np.asarray(X, dtype=float)))

    def _ik_unchecked(self, X):
        g = self.image(np.asarray(X, dtype=float))
        with np.errstate(invalid="ignore"):
            return np.where(np.asarray(g) >= 0, self._from_image_nocheck(g), np.nan)

    def _from_image_nocheck(self, g):
        return np.sqrt(np.abs(g))


# -- operations ----------------------------------------------------------------------


@dataclass(frozen=True)
class AssemblyMode:
    X: tuple[float, ...]
    det_a: float
    aspect: Optional[int] = None

    def as_array(self) -> np.ndarray:
        return np.array(self.X)


def inverse_kinematics_parallel(model: ParallelModel, X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    return model.inverse_kinematics(X)


def _newton_batch(model: ParallelModel, X, q, iters: int = 40, tol: float = 1e-12):
    """Damped batched Newton on F(., q) = 0; returns (X, converged)."""
    X = model.reduce_x(X)
    scale = 1.0 + np.max(np.abs(q))
    box = model.x_box()
    span = np.array([hi - lo for lo, hi in box])
    alive = np.ones(len(X), dtype=bool)
    for _ in range(iters):
        idx = np.nonzero(alive)[0]
        if not len(idx):
            break
        Xa = X[idx]
        r = model.residual(Xa, q)
        done = np.max(np.abs(r), axis=1) < tol * scale
        A = model.jac_x(Xa, np.broadcast_to(q, Xa.shape))
        good = np.abs(np.linalg.det(A)) > 1e-300
        step = np.zeros_like(Xa)
        if good.any():
            step[good] = np.linalg.solve(A[good], r[good][..., None])[..., 0]
        # limit the step to a fraction of the box
        ratio = np.max(np.abs(step) / (0.25 * span), axis=1)
        step /= np.maximum(1.0, ratio)[:, None]
        step[done] = 0.0
        X[idx] = model.reduce_x(Xa - step)
        blown = ~np.all(np.isfinite(X[idx]), axis=1) | ~good
        alive[idx[done | blown]] = False
        X[idx[blown]] = np.nan
    r = model.residual(np.nan_to_num(X), q)
    ok = np.all(np.isfinite(X), axis=1) & (np.max(np.abs(r), axis=1) < 1e-9 * scale)
    return X, ok


def dedup(model: ParallelModel, X: np.ndarray, radius: float = DEDUP_RADIUS) -> np.ndarray:
    """Greedy deduplication in the (wrap-aware) max-norm."""
    if not len(X):
        return X
    keys = np.unique(np.round(model.reduce_x(X) / (0.1 * radius)), axis=0, return_index=True)[1]
    out: list[np.ndarray] = []
    for x in X[np.sort(keys)]:
        if not out or np.min(model.x_distance(np.array(out), x)) > radius:
            out.append(x)
    return np.array(out)


def direct_kinematics_multistart(model: ParallelModel, q, starts: Optional[GridSpec] = None,
                                 radius: float = DEDUP_RADIUS) -> list[AssemblyMode]:
    """All assembly modes reached by Newton from a grid of starting poses."""
    q = np.asarray(q, dtype=float)
    if starts is None:
        starts = model.x_grid(DEFAULT_STARTS)
    X0 = starts.points()
    X, ok = _newton_batch(model, X0, q)
    X = X[ok]
    box = model.x_box()
    for k, w in enumerate(model.x_wrap()):
        if not w:
            lo, hi = box[k]
            X = X[(X[:, k] >= lo) & (X[:, k] <= hi)]
    X = dedup(model, X, radius)
    if not len(X):
        return []
    X, _ = _newton_batch(model, X, q, iters=3, tol=1e-15)
    det = model.singularity_value(X)
    order = np.lexsort(X.T[::-1])
    return [AssemblyMode(tuple(float(v) for v in X[i]), float(det[i])) for i in order]


@dataclass(frozen=True)
class SingularityValue:
    det_a: float
    factors: dict = field(default_factory=dict)


def parallel_singularity(model: ParallelModel, X) -> SingularityValue:
    X = np.asarray(X, dtype=float)
    factors = model.singularity_factors(X) if hasattr(model, "singularity_factors") else {}
    return SingularityValue(float(model.singularity_value(X)), factors)


@dataclass
class ParallelAspectMap:
    model: ParallelModel
    grid: GridSpec
    labels: np.ndarray
    count: int
    signs: dict[int, int]

    def labels_at(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        det = np.sign(self.model.singularity_value(X)).astype(int)
        feas = self.model.feasible(X)
        out = np.zeros(len(X), dtype=int)
        for n, x in enumerate(X):
            if det[n] == 0 or not feas[n]:
                continue
            out[n] = self._lookup(x, det[n])
        return out

    def label_at(self, X) -> int:
        return int(self.labels_at(X)[0])

    def _lookup(self, x, sign):
        idx = np.array(self.grid.index_of(x))
        shape = np.array(self.grid.shape)
        best, bestd = 0, np.inf
        for r in range(0, 5):
            rng = [range(-r, r + 1)] * self.grid.ndim
            for off in np.array(np.meshgrid(*rng, indexing="ij")).reshape(self.grid.ndim, -1).T:
                if np.max(np.abs(off)) != r:
                    continue
                j = idx + off
                for k in range(self.grid.ndim):
                    if self.grid.wrapped(k):
                        j[k] %= shape[k]
                if np.any(j < 0) or np.any(j >= shape):
                    continue
                lab = int(self.labels[tuple(j)])
                d = float(np.sum(off * off))
                if lab and self.signs[lab] == sign and d < bestd:
                    best, bestd = lab, d
            if best:
                return best
        return 0

    def sizes(self) -> dict[int, int]:
        counts = np.bincount(self.labels.ravel(), minlength=self.count + 1)
        return {k: int(counts[k]) for k in range(1, self.count + 1)}


def aspects_parallel(model: ParallelModel, grid: Optional[GridSpec] = None,
                     min_fraction: float = 1e-3) -> ParallelAspectMap:
    """Connected components of det A != 0 inside the feasible workspace.

    Components smaller than ``min_fraction`` of the feasible cells are
    discarded as sampling debris (their cells get label 0).
    """
    if grid is None:
        grid = model.x_grid(256 if model.n == 2 else 96)
    P = grid.points()
    det = model.singularity_value(P).reshape(grid.shape)
    feas = model.feasible(P).reshape(grid.shape)
    raw, raw_signs = sign_components(det, grid, feas)
    labels = np.zeros(grid.shape, dtype=int)
    signs = {}
    nxt = 0
    minimum = max(1, int(min_fraction * feas.sum()))
    sizes = np.bincount(raw.ravel(), minlength=len(raw_signs) + 1)
    comps = [(raw_signs[k], raw == k, sizes[k]) for k in raw_signs if sizes[k] >= minimum]
    for sgn, m, _ in sorted(comps, key=lambda c: -c[2]):
        nxt += 1
        labels[m] = nxt
        signs[nxt] = sgn
    return ParallelAspectMap(model, grid, labels, nxt, signs)


# -- continuation -----------------------------------------------------------------------


@dataclass
class AssemblyChangeReport:
    X_end: Optional[np.ndarray]
    min_abs_det: float
    mode_changed: bool
    blocked: bool
    path: np.ndarray
    sign_constant: bool = True


def _densify(path: np.ndarray, step: float) -> np.ndarray:
    out = [path[0]]
    for a, b in zip(path[:-1], path[1:]):
        m = max(1, int(np.ceil(np.linalg.norm(b - a) / step)))
        for k in range(1, m + 1):
            out.append(a + (b - a) * k / m)
    return np.array(out)


def _correct(model, X, q, tol, iters=12):
    for _ in range(iters):
        r = model.residual(X[None], q[None])[0]
        if np.max(np.abs(r)) < tol:
            return X
        try:
            X = model.reduce_x(X - np.linalg.solve(model.jac_x(X[None], q[None])[0], r))
        except np.linalg.LinAlgError:
            return None
        if not np.all(np.isfinite(X)):
            return None
    r = model.residual(X[None], q[None])[0]
    return X if np.max(np.abs(r)) < tol else None


def track_assembly(model: ParallelModel, q_path, X_start, step: Optional[float] = None,
                   tol: float = 1e-10) -> AssemblyChangeReport:
    """Continue the assembly mode through ``X_start`` along a joint-space polyline."""
    q_path = np.asarray(q_path, dtype=float)
    X = model.reduce_x(np.asarray(X_start, dtype=float))
    scale = 1.0 + np.max(np.abs(q_path))
    r0 = model.residual(X[None], q_path[:1])[0]
    if np.max(np.abs(r0)) > 1e-6 * scale:
        raise ValueError("X_start does not solve the constraints at the loop head")
    X = _correct(model, X, q_path[0], tol * scale)
    total = float(np.sum(np.linalg.norm(np.diff(q_path, axis=0), axis=1)))
    if total == 0.0:
        d = abs(float(model.singularity_value(X[None])[0]))
        return AssemblyChangeReport(X, d, False, False, X[None])
    if step is None:
        step = total / 500.0
    pts = _densify(q_path, step)
    det0 = float(model.singularity_value(X[None])[0])
    sign0 = np.sign(det0)
    min_det = abs(det0)
    out = [X.copy()]
    min_step = 1e-6 * total
    for k in range(1, len(pts)):
        a, b = pts[k - 1], pts[k]
        seg = np.linalg.norm(b - a)
        s, h = 0.0, 1.0
        while s < 1.0:
            h = min(h, 1.0 - s)
            target = a + (b - a) * (s + h)
            A = model.jac_x(X[None], target[None])[0]
            B = model.jac_q(X[None], (a + (b - a) * s)[None])[0]
            try:
                pred = model.reduce_x(X - np.linalg.solve(A, B @ (target - (a + (b - a) * s))))
            except np.linalg.LinAlgError:
                pred = None
            Xn = _correct(model, pred, target, tol * scale) if pred is not None else None
            ok = Xn is not None
            if ok:
                d = float(model.singularity_value(Xn[None])[0])
                moved = float(model.x_distance(Xn, X))
                predicted = float(model.x_distance(pred, X))
                ok = np.sign(d) == sign0 and moved < 0.2 and moved <= 4.0 * predicted + 1e-9
            if ok:
                X = Xn
                min_det = min(min_det, abs(d))
                s += h
                h = min(1.0, 2.0 * h)
            else:
                h *= 0.5
                if h * seg < min_step:
                    return AssemblyChangeReport(None, min_det, False, True, np.array(out))
        out.append(X.copy())
    changed = float(model.x_distance(X, out[0])) > 1e-3
    return AssemblyChangeReport(X, min_det, changed, False, np.array(out))


def nonsingular_assembly_change(model: ParallelModel, q_loop, X_start, step: Optional[float] = None) -> AssemblyChangeReport:
    """Continuation of X along a closed joint-space loop; reports whether the mode changed."""
    return track_assembly(model, q_loop, X_start, step)


def aspect_path(aspects: ParallelAspectMap, X_from, X_to, margin: float = 0.05) -> np.ndarray:
    """Workspace polyline from X_from to X_to through cells of one aspect.

    Only cells with |det A| above ``margin`` times the aspect's maximum are
    used, so the path stays away from the singular set. Raises ValueError if
    the poses lie in different aspects or no such path exists.
    """
    model, grid = aspects.model, aspects.grid
    X_from = model.reduce_x(np.asarray(X_from, dtype=float))
    X_to = model.reduce_x(np.asarray(X_to, dtype=float))
    lab = aspects.label_at(X_from)
    if lab == 0 or aspects.label_at(X_to) != lab:
        raise ValueError("poses are not in one aspect")
    det = np.abs(model.singularity_value(grid.points()).reshape(grid.shape))
    inside = aspects.labels == lab
    mask = inside & (det > margin * det[inside].max())
    ends = []
    for X in (X_from, X_to):
        d = model.x_distance(grid.points(), X).reshape(grid.shape)
        d[~mask] = np.inf
        ends.append(tuple(int(i) for i in np.unravel_index(np.argmin(d), grid.shape)))
    cells = grid_path(mask, ends[0], ends[1], grid)
    if cells is None:
        raise ValueError("no path clear of the singular set")
    P = np.array([[grid.axis(k)[c[k]] for k in range(grid.ndim)] for c in cells])
    pts = np.vstack([X_from, P, X_to])
    # unwrap periodic axes so consecutive points are close in the plane
    for k in range(grid.ndim):
        if grid.wrapped(k):
            lo, hi = grid.ranges[k]
            span = hi - lo
            pts[:, k] = pts[0, k] + np.concatenate([[0.0], np.cumsum((np.diff(pts[:, k]) + span / 2) % span - span / 2)])
    return pts


# -- cuspidal configurations ----------------------------------------------------------------


def _null_vectors(A):
    U, S, Vt = np.linalg.svd(A)
    return U[:, -1], Vt[-1], S


def cusp_measures(model: ParallelModel, X, h: float = 1e-5) -> tuple[float, float]:
    """Relative size of det A and of the second-order term u^T (dA[v]) v at X."""
    X = np.asarray(X, dtype=float)
    A = model.jac_x(X[None])[0]
    u, v, S = _null_vectors(A)
    dA = (model.jac_x((X + h * v)[None])[0] - model.jac_x((X - h * v)[None])[0]) / (2 * h)
    curv = abs(float(u @ dA @ v))
    ref = 1e-300
    for k in range(len(X)):
        e = np.zeros(len(X))
        e[k] = h
        ref = max(ref, np.linalg.norm((model.jac_x((X + e)[None])[0] - model.jac_x((X - e)[None])[0]) / (2 * h)))
    return float(S[-1] / max(S[0], 1e-300)), curv / ref


def cuspidal_configuration_check(model: ParallelModel, X, q=None, tol: float = 1e-6,
                                 curvature_tol: float = 1e-4) -> bool:
    """True iff X is singular and the fold term along the kernel also vanishes.

    With u and v the left and right null vectors of A, a fold has
    u^T (dA[v]) v != 0; at a cuspidal configuration it vanishes as well.
    """
    X = np.asarray(X, dtype=float)
    if q is not None:
        r = model.residual(X[None], np.asarray(q, dtype=float)[None])[0]
        if np.max(np.abs(r)) > 1e-6 * (1 + np.max(np.abs(q))):
            raise ValueError("X does not satisfy the constraints at q")
    sing, curv = cusp_measures(model, X)
    return bool(sing < tol and curv < curvature_tol)


def project_to_singular(model: ParallelModel, X, iters: int = 30, h: float = 1e-6) -> np.ndarray:
    """Move X onto det A = 0 along the gradient of det A (Newton)."""
    X = np.asarray(X, dtype=float).copy()
    for _ in range(iters):
        d = float(model.singularity_value(X[None])[0])
        grad = np.array([(model.singularity_value((X + e)[None])[0] - model.singularity_value((X - e)[None])[0]) / (2 * h)
                         for e in np.eye(len(X)) * h])
        gg = float(grad @ grad)
        if gg == 0:
            break
        X = X - d * grad / gg
        if abs(d) < 1e-14 * (1 + np.sqrt(gg)):
            break
    return model.reduce_x(X)


# -- characteristic surfaces ----------------------------------------------------------------


def characteristic_surfaces_parallel(model: ParallelModel, aspects: ParallelAspectMap, aspect: int,
                                     samples: int = 400, starts: int = 24) -> np.ndarray:
    """Nonsingular poses inside ``aspect`` sharing joints with a point of its boundary.

    Two-output models only. Boundary points are taken on the traced det A = 0
    curves next to the aspect; each is mapped to the joint space and every
    direct-kinematics solution there is kept when it is regular, distinct from
    the boundary point and labelled with ``aspect``.
    """
    if model.n != 2:
        raise ValueError("characteristic surfaces are implemented for two-output models")
    grid = aspects.grid
    det = model.singularity_value(grid.points()).reshape(grid.shape)
    bpts = []
    hstep = 2.0 * max(grid.spacing(0), grid.spacing(1))
    for pl in trace_zero_curve(det, grid):
        P = pl.points
        t = np.gradient(P, axis=0) if len(P) > 2 else np.tile(P[-1] - P[0], (len(P), 1))
        nrm = np.stack([-t[:, 1], t[:, 0]], axis=1)
        nrm /= np.maximum(np.linalg.norm(nrm, axis=1, keepdims=True), 1e-300)
        side = np.stack([aspects.labels_at(model.reduce_x(P + hstep * nrm)),
                         aspects.labels_at(model.reduce_x(P - hstep * nrm))], axis=1)
        keep = np.any(side == aspect, axis=1)
        bpts.append(P[keep])
    if not bpts or not sum(len(b) for b in bpts):
        return np.zeros((0, 2))
    B = np.concatenate(bpts)
    B = B[:: max(1, len(B) // samples)]
    feas = model.feasible(B)
    B = B[feas]
    if not len(B):
        return np.zeros((0, 2))
    Q = model.inverse_kinematics(B)
    S = model.x_grid(starts).points()
    found = []
    for b, q in zip(B, Q):
        X, ok = _newton_batch(model, S.copy(), q, iters=30)
        X = dedup(model, X[ok])
        if not len(X):
            continue
        far = model.x_distance(X, b) > 5 * hstep
        X = X[far]
        if not len(X):
            continue
        d = np.abs(model.singularity_value(X))
        X = X[d > 1e-6 * np.max(np.abs(det))]
        if len(X):
            lab = aspects.labels_at(X)
            found.extend(X[lab == aspect])
    return np.array(found).reshape(-1, 2)


# -- tangency of projected singular curves (cusps of 2-D maps) ------------------------------


def fold_cusps_2d(jac, grid: GridSpec, refine_map=None, tol: float = 1e-10, h: float = 1e-6):
    """Cusps of a planar map u -> M(u) given its Jacobian ``jac(u)`` of shape (..., 2, 2).

    Traces D = det jac = 0 on ``grid`` and finds where the kernel of the map is
    tangent to that curve, via sign changes of tau = grad(D) . k along each
    polyline with the kernel k oriented continuously; each bracket is refined
    by Newton on (D, tau). Returns an (m, 2) array of points in u.
    """
    U = grid.points()
    Dv = np.linalg.det(jac(U)).reshape(grid.shape)
    scale = float(np.max(np.abs(Dv)))

    def D(u):
        return np.linalg.det(jac(u))

    def kernel(u):
        J = jac(u)
        k1 = np.stack([J[..., 0, 1], -J[..., 0, 0]], axis=-1)
        k2 = np.stack([J[..., 1, 1], -J[..., 1, 0]], axis=-1)
        n1 = np.linalg.norm(k1, axis=-1, keepdims=True)
        n2 = np.linalg.norm(k2, axis=-1, keepdims=True)
        k = np.where(n1 >= n2, k1, k2)
        return k / np.maximum(np.linalg.norm(k, axis=-1, keepdims=True), 1e-300)

    def grad(u):
        e0, e1 = np.array([h, 0.0]), np.array([0.0, h])
        return np.stack([(D(u + e0) - D(u - e0)) / (2 * h), (D(u + e1) - D(u - e1)) / (2 * h)], axis=-1)

    def tau(u, ref):
        k = kernel(u)
        k = np.where(np.sum(k * ref, axis=-1, keepdims=True) < 0, -k, k)
        return np.sum(grad(u) * k, axis=-1), k

    out = []
    for pl in trace_zero_curve(Dv, grid):
        P = pl.points
        if len(P) < 3:
            continue
        K = kernel(P)
        for i in range(1, len(K)):
            if K[i] @ K[i - 1] < 0:
                K[i] = -K[i]
        g = grad(P)
        gn = np.linalg.norm(g, axis=1)
        T = np.sum(g * K, axis=1)
        T = T / np.maximum(gn, 1e-300)
        # a zero exactly on a vertex brackets with both neighbours; duplicates merge below
        sg = np.sign(T)
        idx = np.nonzero((sg[:-1] * sg[1:] <= 0) & (np.abs(sg[:-1]) + np.abs(sg[1:]) > 0))[0]
        for i in idx:
            if gn[i] < 1e-3 * scale or gn[i + 1] < 1e-3 * scale:
                continue
            u = 0.5 * (P[i] + P[i + 1])
            ref = K[i]
            for _ in range(30):
                f = np.array([D(u[None])[0], tau(u[None], ref)[0][0]])
                Jf = np.zeros((2, 2))
                for c in range(2):
                    e = np.zeros(2)
                    e[c] = h
                    fp = np.array([D((u + e)[None])[0], tau((u + e)[None], ref)[0][0]])
                    fm = np.array([D((u - e)[None])[0], tau((u - e)[None], ref)[0][0]])
                    Jf[:, c] = (fp - fm) / (2 * h)
                try:
                    du = np.linalg.solve(Jf, f)
                except np.linalg.LinAlgError:
                    break
                u = u - du
                if np.max(np.abs(du)) < tol:
                    break
            if np.max(np.abs(u - 0.5 * (P[i] + P[i + 1]))) < 4 * max(grid.spacing(0), grid.spacing(1)):
                out.append(grid.reduce(u))
    if not out:
        return np.zeros((0, 2))
    return _unique_rows(np.array(out), grid)


def _unique_rows(pts, grid, radius=1e-6):
    out = []
    for p in pts:
        ok = True
        for o in out:
            d = p - o
            for k in range(2):
                if grid.wrapped(k):
                    lo, hi = grid.ranges[k]
                    per = hi - lo
                    d[k] = (d[k] + per / 2) % per - per / 2
            if np.max(np.abs(d)) < radius:
                ok = False
                break
        if ok:
            out.append(p)
    return np.array(out)
