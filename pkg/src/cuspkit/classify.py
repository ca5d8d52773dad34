"""Closed-form classification of 3R arms.

Covers the six geometric noncuspidality conditions (any twists), the
discriminant surfaces of the orthogonal family with r3 = 0 in the
d2-normalized parameters (d3, d4, r2), the necessary and sufficient
noncuspidality condition and the number of cusps per parameter-space domain.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from math import cos, sin, sqrt
from typing import Optional

from .serial3r import Geometry3R

ANGLE_TOL = 1e-12
SURFACE_BAND = 1e-3


@dataclass(frozen=True)
class GeometricCondition:
    identifier: int
    description: str


CONDITIONS = (
    GeometricCondition(1, "first two axes are parallel"),
    GeometricCondition(2, "last two axes are parallel"),
    GeometricCondition(3, "first two axes intersect"),
    GeometricCondition(4, "last two axes intersect"),
    GeometricCondition(5, "first two axes are orthogonal and r2 = r3 = 0"),
    GeometricCondition(6, "axes are mutually orthogonal and r2 = 0"),
)


def geometric_noncuspidality(g: Geometry3R) -> Optional[GeometricCondition]:
    """First matching sufficient condition for noncuspidality, or None."""
    par12 = abs(sin(g.alpha2)) < ANGLE_TOL
    par23 = abs(sin(g.alpha3)) < ANGLE_TOL
    perp12 = abs(cos(g.alpha2)) < ANGLE_TOL
    perp23 = abs(cos(g.alpha3)) < ANGLE_TOL
    checks = (
        par12,
        par23,
        # common normal of length zero between non-parallel axes
        g.d2 == 0.0 and not par12,
        g.d3 == 0.0 and not par23,
        perp12 and g.r2 == 0.0 and g.r3 == 0.0,
        perp12 and perp23 and g.r2 == 0.0,
    )
    for cond, hit in zip(CONDITIONS, checks):
        if hit:
            return cond
    return None


@dataclass(frozen=True)
class DiscriminantAux:
    A: float
    B: float


def discriminant_aux(d3: float, r2: float, d2: float = 1.0) -> DiscriminantAux:
    return DiscriminantAux(sqrt((d3 + d2) ** 2 + r2 ** 2), sqrt((d3 - d2) ** 2 + r2 ** 2))


@dataclass(frozen=True)
class SurfaceValue:
    name: str
    value: float
    valid: bool


def _c1(d3: float, r2: float, aux: DiscriminantAux) -> SurfaceValue:
    s = d3 * d3 + r2 * r2
    inner = 0.5 * (s - (s * s - (d3 * d3 - r2 * r2)) / (aux.A * aux.B))
    if inner < 0:
        return SurfaceValue("C1", float("nan"), False)
    return SurfaceValue("C1", sqrt(inner), True)


def _check_args(d3: float, r2: float):
    if not d3 > 0:
        raise ValueError("d3 must be positive")
    if r2 < 0:
        raise ValueError("r2 must be non-negative (the classification is symmetric in r2)")
    if d3 == 1.0 and r2 == 0.0:
        raise ValueError("(d3, r2) = (1, 0) is a singular point of the surfaces")


def discriminant_d4_values(d3: float, r2: float) -> dict[str, SurfaceValue]:
    """Values of d4 on the four discriminant surfaces, as transcribed.

    Lengths are normalized by d2. C2 and C4 carry the branch condition
    d3 < 1 and C3 the condition d3 > 1; outside their branch the value is NaN
    and ``valid`` is False. The transcribed C4 coincides with C2; the
    surface actually bounding the cusp-count domains is returned by
    :func:`transition_surfaces`.
    """
    _check_args(d3, r2)
    aux = discriminant_aux(d3, r2)
    nan = float("nan")
    lt, gt = d3 < 1.0, d3 > 1.0
    c2 = SurfaceValue("C2", d3 / (1.0 - d3) * aux.B if lt else nan, lt)
    return {
        "C1": _c1(d3, r2, aux),
        "C2": c2,
        "C3": SurfaceValue("C3", d3 / (d3 - 1.0) * aux.B if gt else nan, gt),
        "C4": SurfaceValue("C4", c2.value, lt),
    }


def transition_surfaces(d3: float, r2: float) -> dict[str, SurfaceValue]:
    """Surfaces across which the cusp count of (d3, d4, r2) changes.

    Same as :func:`discriminant_d4_values` except for C4, which is
    ``d4 = d3 / (1 + d3) * A`` for every d3 > 0 (count 4 below, 2 above).
    """
    out = dict(discriminant_d4_values(d3, r2))
    aux = discriminant_aux(d3, r2)
    out["C4"] = SurfaceValue("C4", d3 / (1.0 + d3) * aux.A, True)
    return out


def noncuspidal_iff(g: Geometry3R) -> tuple[bool, Optional[str]]:
    """Closed-form noncuspidality test for orthogonal arms with r3 = 0.

    Returns ``(noncuspidal, branch)`` with branch ``"first"`` (small d4: at
    most two solutions, a hole in the workspace) or ``"second"`` (d3 < d2 and
    large d4: a four-solution region without cusps), or None.
    """
    g.require_orthogonal()
    if g.r3 != 0.0:
        raise ValueError("classification valid only for r3=0")
    d2, d3, d4, r2 = g.d2, g.d3, g.d4, abs(g.r2)
    aux = discriminant_aux(d3, r2, d2)
    s = d3 * d3 + r2 * r2
    inner = 0.5 * (s - (s * s - d2 * d2 * (d3 * d3 - r2 * r2)) / (aux.A * aux.B))
    if inner > 0 and d4 < sqrt(inner):
        return True, "first"
    if d3 < d2 and d4 > d3 / (d2 - d3) * aux.B:
        return True, "second"
    return False, None


@dataclass(frozen=True)
class DomainLabel:
    domain_id: tuple
    expected_count: int
    branch: Optional[str]


_memo: dict[tuple, int] = {}
_memo_lock = threading.Lock()


def _signature(d3: float, d4: float, r2: float) -> tuple[tuple, list[float]]:
    surf = transition_surfaces(d3, r2)
    vals = []
    sig = [d3 < 1.0]
    for name in ("C1", "C2", "C3", "C4"):
        s = surf[name]
        if not s.valid:
            sig.append(None)
            continue
        if abs(d4 - s.value) < SURFACE_BAND:
            raise ValueError("degenerate: on discriminant surface")
        sig.append(d4 > s.value)
        vals.append(s.value)
    return tuple(sig), sorted(vals)


def domain_label(g: Geometry3R) -> DomainLabel:
    """Parameter-space domain of an orthogonal r3 = 0 arm and its cusp count.

    The count of a domain is established once by a cusp search on a
    representative design of that domain (same d3 and r2, d4 in the middle
    of the interval between neighbouring surfaces) and memoized.
    """
    g.require_orthogonal()
    if g.r3 != 0.0:
        raise ValueError("classification valid only for r3=0")
    n = g.normalized()
    d3, d4, r2 = n.d3, n.d4, abs(n.r2)
    nc, branch = noncuspidal_iff(g)
    if r2 == 0.0:
        return DomainLabel(("r2=0",), 0, branch)
    if abs(d3 - 1.0) < SURFACE_BAND:
        raise ValueError("degenerate: on discriminant surface")
    sig, vals = _signature(d3, d4, r2)
    with _memo_lock:
        count = _memo.get(sig)
        if count is None:
            count = _representative_count(d3, d4, r2, vals)
            _memo[sig] = count
    return DomainLabel(sig, count, branch)


def _representative_count(d3: float, d4: float, r2: float, vals: list[float]) -> int:
    from .cusp import find_cusps

    lo = max([0.0] + [v for v in vals if v < d4])
    above = [v for v in vals if v > d4]
    hi = min(above) if above else max(2.0 * d4, lo + 1.0)
    rep = Geometry3R(1.0, d3, 0.5 * (lo + hi), r2, 0.0)
    return len(find_cusps(rep))


def cusp_count_for_design(g: Geometry3R) -> int:
    """Number of cusps of an orthogonal r3 = 0 arm from its parameter-space domain."""
    return domain_label(g).expected_count


def clear_domain_memo():
    with _memo_lock:
        _memo.clear()
