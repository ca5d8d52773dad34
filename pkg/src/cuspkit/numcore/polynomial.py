"""Dense real polynomials and real-root extraction with multiplicity detection."""

from __future__ import annotations

from dataclasses import dataclass
from math import factorial

import numpy as np
from numpy.polynomial import polynomial as npoly


class DegeneratePolynomialError(ValueError):
    pass


@dataclass(frozen=True)
class RealPolynomial:
    """Univariate polynomial with real coefficients in ascending degree order.

    Trailing (highest-degree) zeros are stripped on construction, so
    ``degree`` is always the index of the last nonzero coefficient. The zero
    polynomial is stored as a single ``0.0`` coefficient with degree 0.
    """

    coefficients: tuple[float, ...]

    def __init__(self, coefficients):
        c = [float(v) for v in np.atleast_1d(np.asarray(coefficients, dtype=float))]
        while len(c) > 1 and c[-1] == 0.0:
            c.pop()
        if not c:
            c = [0.0]
        object.__setattr__(self, "coefficients", tuple(c))

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1

    @property
    def is_zero(self) -> bool:
        return all(v == 0.0 for v in self.coefficients)

    def __call__(self, x):
        return npoly.polyval(x, self.coefficients)

    def derivative(self, k: int = 1) -> "RealPolynomial":
        if k == 0:
            return self
        if k > self.degree:
            return RealPolynomial([0.0])
        return RealPolynomial(npoly.polyder(self.coefficients, k))

    def reversed(self) -> "RealPolynomial":
        """Polynomial ``x**n p(1/x)`` with ``n = degree``; maps roots r to 1/r."""
        return RealPolynomial(self.coefficients[::-1])

    def normalized(self) -> "RealPolynomial":
        scale = max(abs(v) for v in self.coefficients)
        if scale == 0.0:
            return self
        return RealPolynomial([v / scale for v in self.coefficients])

    @classmethod
    def from_roots(cls, roots) -> "RealPolynomial":
        return cls(np.real(npoly.polyfromroots(roots)))

    def __repr__(self) -> str:
        return f"RealPolynomial({list(self.coefficients)!r})"


@dataclass(frozen=True)
class RootCluster:
    value: float
    multiplicity: int
    residual: float


# Taylor coefficients of a noise-split multiple root are of order the
# coefficient rounding error, not of order the root spread.
NOISE_FLOOR = 1e3 * np.finfo(float).eps


def _taylor_ok(coeffs: np.ndarray, c: complex, m: int, tol: float) -> tuple[bool, float]:
    """Check that ``c`` is numerically an m-fold root.

    m roots spread by about ``delta`` around their centroid make the k-th
    Taylor coefficient there of order ``delta**(m-k)``, so it is compared
    against ``max(tol**(m-k), NOISE_FLOOR) * max(1, |c|)**(n-k)``. Genuinely
    distinct roots further apart than ``tol`` fail; a multiple root split
    only by rounding passes.
    """
    n = len(coeffs) - 1
    worst = 0.0
    for k in range(m):
        d = npoly.polyder(coeffs, k) if k else coeffs
        if abs(c) > 1.0:
            # d(c) / c**(n-k) evaluated as the reversed polynomial at 1/c, which cannot overflow
            val = abs(npoly.polyval(1.0 / c, d[::-1])) / factorial(k)
        else:
            val = abs(npoly.polyval(c, d)) / factorial(k)
        worst = max(worst, val)
        if val > max(tol ** (m - k), NOISE_FLOOR):
            return False, worst
    return True, worst


def _single_linkage(values: np.ndarray, radius: float) -> list[list[int]]:
    n = len(values)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            if abs(values[i] - values[j]) <= radius * max(1.0, abs(values[i]), abs(values[j])):
                parent[find(i)] = find(j)
    groups: dict[int, list[int]] = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    return list(groups.values())


def _split(coeffs, roots, idx, tol, radius):
    """Recursively accept a root group as one cluster or split it with a finer radius."""
    c = complex(np.mean(roots[idx]))
    ok, worst = _taylor_ok(coeffs, c, len(idx), tol)
    if ok or len(idx) == 1:
        return [(c, len(idx), worst)]
    finer = radius / 8.0
    if finer < 1e-14:
        return [(complex(roots[i]), 1, _taylor_ok(coeffs, roots[i], 1, tol)[1]) for i in idx]
    out = []
    for sub in _single_linkage(roots[idx], finer):
        out.extend(_split(coeffs, roots, [idx[s] for s in sub], tol, finer))
    return out


def real_roots_clustered(p: RealPolynomial, cluster_tol: float = 1e-6) -> list[RootCluster]:
    """Real roots of ``p`` with nearby roots merged into multiplicity clusters.

    Roots come from companion-matrix eigenvalues of the coefficient-normalised
    polynomial. Candidate groups are formed with the coarse radius
    ``cluster_tol ** (1/3)`` (a triple root in double precision is split by
    about ``eps ** (1/3)``) and a group of size m is accepted only when it is
    numerically an m-fold root at resolution ``cluster_tol`` (see
    ``_taylor_ok``); otherwise it is split. Groups whose centroid has an
    imaginary part above the same tolerance are complex and dropped.

    Returns clusters sorted by value.
    """
    if cluster_tol <= 0:
        raise ValueError("cluster_tol must be positive")
    if p.is_zero:
        raise DegeneratePolynomialError("degenerate polynomial")
    q = p.normalized()
    coeffs = np.asarray(q.coefficients)
    # a leading coefficient this small only carries roots beyond 1e250, whose
    # companion matrix would overflow
    while len(coeffs) > 1 and abs(coeffs[-1]) < 1e-250:
        coeffs = coeffs[:-1]
    q = RealPolynomial(coeffs)
    if q.degree == 0:
        return []
    roots = npoly.polyroots(coeffs).astype(complex)
    radius = max(cluster_tol ** (1.0 / 3.0), cluster_tol)
    clusters = []
    for group in _single_linkage(roots, radius):
        clusters.extend(_split(coeffs, roots, group, cluster_tol, radius))
    out = []
    for c, m, worst in clusters:
        if abs(c.imag) > max(cluster_tol, 1e-9) * max(1.0, abs(c)) * (10.0 if m > 1 else 1.0):
            continue
        x = float(c.real)
        with np.errstate(over="ignore"):
            # a root far out has an infinite residual, which is what callers should see
            res = float(abs(q(x)))
        out.append(RootCluster(value=x, multiplicity=m, residual=res))
    out.sort(key=lambda r: r.value)
    return out
