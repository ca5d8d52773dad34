"""Damped Newton iteration for small square systems, scalar and batched."""

from __future__ import annotations

from typing import Callable, Optional

import numpy as np

MIN_DAMPING = 2.0 ** -20


def fd_jacobian(residual: Callable[[np.ndarray], np.ndarray], x: np.ndarray) -> np.ndarray:
    """Central finite-difference Jacobian with step ``1e-6 * (1 + |x_i|)``."""
    x = np.asarray(x, dtype=float)
    n = x.size
    cols = []
    for i in range(n):
        h = 1e-6 * (1.0 + abs(x[i]))
        e = np.zeros(n)
        e[i] = h
        cols.append((np.asarray(residual(x + e)) - np.asarray(residual(x - e))) / (2.0 * h))
    return np.column_stack(cols)


def newton_solve(
    residual: Callable[[np.ndarray], np.ndarray],
    seed,
    tol: float = 1e-10,
    max_iter: int = 50,
    jacobian: Optional[Callable[[np.ndarray], np.ndarray]] = None,
) -> Optional[np.ndarray]:
    """Solve ``residual(x) = 0`` from ``seed`` by damped Newton.

    Each full step is halved until the residual max-norm decreases, down to a
    damping factor of 2**-20. Returns the solution, whose residual max-norm is
    strictly below ``tol``, or ``None`` when the iteration stalls, hits a
    singular linearisation or runs out of iterations.
    """
    x = np.atleast_1d(np.asarray(seed, dtype=float)).copy()
    f = np.atleast_1d(np.asarray(residual(x), dtype=float))
    if not np.all(np.isfinite(f)):
        return None
    fn = np.max(np.abs(f))
    for _ in range(max_iter):
        if fn < tol:
            return x
        J = np.atleast_2d(jacobian(x) if jacobian is not None else fd_jacobian(residual, x))
        try:
            dx = np.linalg.solve(J, -f)
        except np.linalg.LinAlgError:
            return None
        if not np.all(np.isfinite(dx)):
            return None
        lam = 1.0
        while lam >= MIN_DAMPING:
            xn = x + lam * dx
            fnew = np.atleast_1d(np.asarray(residual(xn), dtype=float))
            nn = np.max(np.abs(fnew)) if np.all(np.isfinite(fnew)) else np.inf
            if nn < fn:
                x, f, fn = xn, fnew, nn
                break
            lam *= 0.5
        else:
            return None
    return x if fn < tol else None


def newton_solve_batch(
    residual: Callable[[np.ndarray], np.ndarray],
    jacobian: Callable[[np.ndarray], np.ndarray],
    seeds: np.ndarray,
    tol: float = 1e-10,
    max_iter: int = 60,
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised damped Newton over many seeds at once.

    ``residual`` maps an (N, n) array to (N, n); ``jacobian`` maps it to
    (N, n, n). Returns the final iterates and a boolean mask of seeds whose
    residual max-norm ended below ``tol``.
    """
    x = np.array(seeds, dtype=float, copy=True)
    f = residual(x)
    fn = np.max(np.abs(f), axis=1)
    fn[~np.isfinite(fn)] = np.inf
    active = fn >= tol
    for _ in range(max_iter):
        if not active.any():
            break
        ia = np.nonzero(active)[0]
        J = jacobian(x[ia])
        det_ok = np.abs(np.linalg.det(J)) > 1e-300
        dx = np.zeros((ia.size, x.shape[1]))
        if det_ok.any():
            dx[det_ok] = np.linalg.solve(J[det_ok], -f[ia][det_ok][..., None])[..., 0]
        stalled = ~det_ok | ~np.all(np.isfinite(dx), axis=1)
        lam = np.ones(ia.size)
        accepted = np.zeros(ia.size, dtype=bool)
        accepted[stalled] = False
        pending = ~stalled
        while pending.any():
            ip = np.nonzero(pending)[0]
            xn = x[ia[ip]] + lam[ip, None] * dx[ip]
            fnew = residual(xn)
            nn = np.max(np.abs(fnew), axis=1)
            nn[~np.isfinite(nn)] = np.inf
            better = nn < fn[ia[ip]]
            good = ip[better]
            x[ia[good]] = xn[better]
            f[ia[good]] = fnew[better]
            fn[ia[good]] = nn[better]
            accepted[good] = True
            pending[good] = False
            lam[ip[~better]] *= 0.5
            pending &= lam >= MIN_DAMPING
        failed = ~accepted
        active[ia[failed]] = False
        active &= fn >= tol
    return x, fn < tol
