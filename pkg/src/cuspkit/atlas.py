"""Joint-space and workspace decomposition of orthogonal 3R arms.

theta1 is factored out throughout: singularities and solution counts depend
on (theta2, theta3) only, and the workspace is described by its cross-section
(rho, z). The main objects are

* aspects: connected components of det J != 0 on the (theta2, theta3) torus;
* the workspace section: solution count per (rho, z) cell and the boundary
  curves between count regions;
* basic regions: components of an aspect cut by its characteristic surfaces.
  They are computed as components of constant (aspect, image region), where
  the image regions of an aspect are the components of constant number of
  solutions inside that aspect; crossing the image of a boundary of the
  aspect changes that number by one;
* uniqueness domains: maximal unions of adjacent basic regions of one aspect
  on which the kinematic map stays injective, and their images, the
  t-connected regions.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from math import atan2, inf
from typing import Optional, Sequence

import numpy as np
from scipy import ndimage

from .cusp import CuspPoint, find_cusps
from .numcore import CLAMP, WRAP, GridSpec, Polyline, connected_components, grid_path, sign_components, trace_zero_curve
from .serial3r import (
    Geometry3R,
    JointConfig3R,
    _fk_array,
    det_factors,
    forward_kinematics,
    ik_section_grid,
    section_jacobian,
    section_map,
    solution_count_grid,
    wrap_angle,
)

DEFAULT_RESOLUTION = 256


@dataclass(frozen=True)
class JointLimits:
    """Optional closed intervals on theta2 and theta3 (None = unlimited)."""

    theta2: Optional[tuple[float, float]] = None
    theta3: Optional[tuple[float, float]] = None

    def grid(self, resolution: int) -> GridSpec:
        ranges, topo = [], []
        for lim in (self.theta2, self.theta3):
            if lim is None:
                ranges.append((-np.pi, np.pi))
                topo.append(WRAP)
            else:
                ranges.append(tuple(lim))
                topo.append(CLAMP)
        return GridSpec(ranges, resolution, topo)

    def contains(self, th2, th3):
        ok = np.ones(np.broadcast(np.asarray(th2), np.asarray(th3)).shape, dtype=bool)
        for lim, v in ((self.theta2, th2), (self.theta3, th3)):
            if lim is not None:
                ok &= (np.asarray(v) >= lim[0]) & (np.asarray(v) <= lim[1])
        return ok


NO_LIMITS = JointLimits()


# -- aspects --------------------------------------------------------------------


@dataclass
class AspectMap:
    geometry: Geometry3R
    grid: GridSpec
    labels: np.ndarray
    count: int
    signs: dict[int, int]
    boundaries: list[Polyline]

    def labels_at(self, th2, th3) -> np.ndarray:
        """Aspect label of arbitrary joint points (0 when singular or outside limits)."""
        th2 = np.atleast_1d(np.asarray(th2, dtype=float))
        th3 = np.atleast_1d(np.asarray(th3, dtype=float))
        th2, th3 = np.broadcast_arrays(th2, th3)
        det = det_factors(self.geometry, th2, th3)[0]
        idx = [self._index(v, k) for k, v in enumerate((th2, th3))]
        lab = self.labels[idx[0], idx[1]]
        sign = np.sign(det).astype(int)
        wrong = np.array([self.signs.get(int(l), 0) for l in lab.ravel()]).reshape(lab.shape) != sign
        wrong &= sign != 0
        if wrong.any():
            for pos in zip(*np.nonzero(wrong)):
                lab[pos] = self._search(idx[0][pos], idx[1][pos], sign[pos])
        lab[sign == 0] = 0
        inside = np.ones(lab.shape, dtype=bool)
        for k, v in enumerate((th2, th3)):
            if not self.grid.wrapped(k):
                lo, hi = self.grid.ranges[k]
                inside &= (v >= lo) & (v <= hi)
        lab[~inside] = 0
        return lab

    def label_at(self, q) -> int:
        if isinstance(q, JointConfig3R):
            th2, th3 = q.theta2, q.theta3
        else:
            th2, th3 = q
        return int(self.labels_at(th2, th3)[0])

    def _index(self, v, k):
        lo, hi = self.grid.ranges[k]
        n = self.grid.resolution[k]
        if self.grid.wrapped(k):
            return np.round((wrap_angle(v) - lo) / (hi - lo) * n).astype(int) % n
        return np.clip(np.round((v - lo) / (hi - lo) * (n - 1)).astype(int), 0, n - 1)

    def _search(self, i, j, sign):
        n0, n1 = self.grid.shape
        best, bestd = 0, inf
        for r in range(1, 6):
            for di in range(-r, r + 1):
                for dj in range(-r, r + 1):
                    ii, jj = i + di, j + dj
                    if self.grid.wrapped(0):
                        ii %= n0
                    if self.grid.wrapped(1):
                        jj %= n1
                    if not (0 <= ii < n0 and 0 <= jj < n1):
                        continue
                    l = int(self.labels[ii, jj])
                    if l and self.signs[l] == sign and di * di + dj * dj < bestd:
                        best, bestd = l, di * di + dj * dj
            if best:
                return best
        return 0


def compute_aspects(g: Geometry3R, grid: Optional[GridSpec] = None,
                    limits: JointLimits = NO_LIMITS) -> AspectMap:
    """Aspects of the arm on the (theta2, theta3) torus (or limit rectangle)."""
    g.require_orthogonal()
    if grid is None:
        grid = limits.grid(DEFAULT_RESOLUTION)
    T2, T3 = grid.mesh()
    det = det_factors(g, T2, T3)[0]
    labels, signs = sign_components(det, grid)
    return AspectMap(g, grid, labels, len(signs), signs, trace_zero_curve(det, grid))


# -- workspace section ------------------------------------------------------------


@dataclass
class SectionBoundary:
    polyline: Polyline
    kind: str  # "internal" or "external"
    counts: tuple[int, int]


@dataclass
class WorkspaceSection:
    grid: GridSpec
    counts: np.ndarray
    boundaries: list[SectionBoundary]
    cusps: list[CuspPoint]

    def regions(self) -> tuple[np.ndarray, dict[int, int]]:
        """Connected regions of constant nonzero count: labels and count per label."""
        labels = np.zeros(self.counts.shape, dtype=int)
        count_of: dict[int, int] = {}
        offset = 0
        for v in sorted(set(np.unique(self.counts)) - {0}):
            lab, n = connected_components(self.counts == v, self.grid)
            labels[lab > 0] = lab[lab > 0] + offset
            for k in range(1, n + 1):
                count_of[k + offset] = int(v)
            offset += n
        return labels, count_of

    def region_count(self, value: int, min_cells: int = 0) -> int:
        labels, count_of = self.regions()
        sizes = np.bincount(labels.ravel())
        return sum(1 for k, v in count_of.items() if v == value and sizes[k] > min_cells)

    def internal(self) -> list[SectionBoundary]:
        return [b for b in self.boundaries if b.kind == "internal"]


def section_grid(g: Geometry3R, resolution: int = DEFAULT_RESOLUTION) -> GridSpec:
    r = 1.02 * g.reach
    return GridSpec([(0.0, r), (-r, r)], (resolution, 2 * resolution), CLAMP)


def workspace_section(g: Geometry3R, grid: Optional[GridSpec] = None, with_cusps: bool = True) -> WorkspaceSection:
    """Solution counts over the (rho, z) half-plane with boundaries and cusps."""
    g.require_orthogonal()
    if grid is None:
        grid = section_grid(g)
    RHO, Z = grid.mesh()
    counts = _despeckle(solution_count_grid(g, RHO, Z), grid)
    zero_lab, _ = connected_components(counts == 0, grid)
    outside = set(np.unique(np.concatenate([zero_lab[-1, :], zero_lab[:, 0], zero_lab[:, -1]]))) - {0}
    boundaries = []
    levels = sorted(set(np.unique(counts)))
    for lo, hi in zip(levels[:-1], levels[1:]):
        field_ = counts.astype(float) - 0.5 * (lo + hi)
        for pl in trace_zero_curve(field_, grid):
            kind = "internal"
            if lo == 0:
                kind = "external" if _touches(pl, zero_lab, outside, grid) else "internal"
            boundaries.append(SectionBoundary(pl, kind, (int(lo), int(hi))))
    cusps = find_cusps(g) if with_cusps else []
    return WorkspaceSection(grid, counts, boundaries, cusps)


def _despeckle(counts: np.ndarray, grid: GridSpec, min_cells: int = 8) -> np.ndarray:
    """Replace tiny constant-count islands (root-clustering noise) by their surroundings."""
    out = counts.copy()
    for v in np.unique(counts):
        comp, n = connected_components(counts == v, grid)
        sizes = np.bincount(comp.ravel(), minlength=n + 1)
        for k in np.nonzero(sizes[1:] < min_cells)[0] + 1:
            m = comp == k
            ring = ndimage.binary_dilation(m) & ~m
            if ring.any():
                out[m] = np.bincount(counts[ring]).argmax()
    return out


def _touches(pl: Polyline, zero_lab, outside, grid) -> bool:
    h0, h1 = grid.spacing(0), grid.spacing(1)
    votes = 0
    for p in pl.points[:: max(1, len(pl) // 16)]:
        i, j = grid.index_of(p)
        win = zero_lab[max(0, i - 2):i + 3, max(0, j - 2):j + 3]
        labs = set(np.unique(win)) - {0}
        votes += 1 if labs & outside else -1
    return votes > 0


# -- basic regions and uniqueness domains ----------------------------------------------


@dataclass(frozen=True)
class BasicRegion:
    id: int
    aspect: int
    image_region: int
    size: int


@dataclass(frozen=True)
class UniquenessDomain:
    id: int
    aspect: int
    regions: tuple[int, ...]


@dataclass
class TConnectedRegion:
    id: int
    domain: int
    mask: np.ndarray
    empty_lines: list[Polyline] = field(default_factory=list)


@dataclass
class Atlas:
    geometry: Geometry3R
    aspects: AspectMap
    section: WorkspaceSection
    region_maps: dict[int, np.ndarray]
    region_labels: np.ndarray
    regions: list[BasicRegion]
    domains: list[UniquenessDomain]
    t_regions: list[TConnectedRegion]
    characteristic: dict[int, list[Polyline]]

    def domain_labels(self) -> np.ndarray:
        out = np.zeros_like(self.region_labels)
        for d in self.domains:
            out[np.isin(self.region_labels, d.regions)] = d.id
        return out

    def domain_of(self, q) -> int:
        th2, th3 = (q.theta2, q.theta3) if isinstance(q, JointConfig3R) else q
        lab = self.domain_labels()
        i, j = self.aspects.grid.index_of((wrap_angle(th2), wrap_angle(th3)))
        return int(lab[i, j])


def _image_regions(g: Geometry3R, aspects: AspectMap, grid: GridSpec, limits: JointLimits):
    """Per-aspect labelling of the section into components of constant solution count."""
    RHO, Z = grid.mesh()
    th2, th3, valid = ik_section_grid(g, RHO, Z)
    valid &= limits.contains(th2, th3)
    lab = np.zeros(th2.shape, dtype=int)
    lab[valid] = aspects.labels_at(th2[valid], th3[valid])
    min_cells = max(4, grid.shape[0] * grid.shape[1] // 20000)
    maps: dict[int, np.ndarray] = {}
    offset = 0
    for a in range(1, aspects.count + 1):
        n_a = np.sum(lab == a, axis=-1)
        rmap = np.zeros(n_a.shape, dtype=int)
        for v in sorted(set(np.unique(n_a)) - {0}):
            comp, n = connected_components(n_a == v, grid)
            sizes = np.bincount(comp.ravel(), minlength=n + 1)
            for k in range(1, n + 1):
                if sizes[k] >= min_cells:
                    offset += 1
                    rmap[comp == k] = offset
        maps[a] = rmap
    return maps


def _fill_nearest(keys: np.ndarray, known: np.ndarray, domain: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Give unknown cells of ``domain`` the key of the nearest known cell (wrap aware)."""
    pad = [(8, 8) if grid.wrapped(k) else (0, 0) for k in range(2)]
    kp = np.pad(keys, pad, mode="wrap")
    known_p = np.pad(known, pad, mode="wrap")
    _, (ii, jj) = ndimage.distance_transform_edt(~known_p, return_indices=True)
    filled = kp[ii, jj]
    sl = tuple(slice(p[0], p[0] + n) for p, n in zip(pad, keys.shape))
    out = keys.copy()
    fill = domain & ~known
    out[fill] = filled[sl][fill]
    return out


def _adjacency(labels: np.ndarray, grid: GridSpec) -> set[tuple[int, int]]:
    pairs = set()
    for k in range(2):
        a = labels
        b = np.roll(labels, -1, axis=k)
        if not grid.wrapped(k):
            sl = [slice(None)] * 2
            sl[k] = slice(0, -1)
            a, b = a[tuple(sl)], b[tuple(sl)]
        m = (a != b) & (a > 0) & (b > 0)
        for x, y in set(zip(a[m].tolist(), b[m].tolist())):
            pairs.add((min(x, y), max(x, y)))
    return pairs


def _basic_regions(g: Geometry3R, aspects: AspectMap, maps: dict[int, np.ndarray], sgrid: GridSpec):
    grid = aspects.grid
    T2, T3 = grid.mesh()
    a, b, z = section_map(g, T2, T3)
    rho = np.hypot(a, b)
    lo0, hi0 = sgrid.ranges[0]
    lo1, hi1 = sgrid.ranges[1]
    n0, n1 = sgrid.shape
    i = np.clip(np.round((rho - lo0) / (hi0 - lo0) * (n0 - 1)).astype(int), 0, n0 - 1)
    j = np.clip(np.round((z - lo1) / (hi1 - lo1) * (n1 - 1)).astype(int), 0, n1 - 1)
    keys = np.zeros(grid.shape, dtype=int)
    for asp, rmap in maps.items():
        m = aspects.labels == asp
        keys[m] = rmap[i[m], j[m]]
    for asp in maps:
        m = aspects.labels == asp
        keys = _fill_nearest(keys, m & (keys > 0), m, grid)

    labels = np.zeros(grid.shape, dtype=int)
    comps = []
    for key in sorted(set(np.unique(keys)) - {0}):
        comp, n = connected_components(keys == key, grid)
        for k in range(1, n + 1):
            comps.append((key, comp == k))
    # tiny components are sampling debris along folds: merge into a neighbour
    total = grid.shape[0] * grid.shape[1]
    min_cells = max(8, total // 1000)
    rid = 0
    image_of = {}
    for key, mask in sorted(comps, key=lambda c: -int(c[1].sum())):
        if mask.sum() < min_cells:
            continue
        rid += 1
        labels[mask] = rid
        image_of[rid] = key
    for asp in maps:
        m = aspects.labels == asp
        labels = _fill_nearest(labels, m & (labels > 0), m, grid)
    regions = []
    for r in range(1, rid + 1):
        cells = labels == r
        asp = int(np.bincount(aspects.labels[cells]).argmax())
        regions.append(BasicRegion(r, asp, image_of[r], int(cells.sum())))
    return labels, regions


def _merge_domains(regions: list[BasicRegion], adjacency: set[tuple[int, int]]) -> list[UniquenessDomain]:
    """Greedy largest-first union of adjacent basic regions with distinct images."""
    by_id = {r.id: r for r in regions}
    neighbours: dict[int, set[int]] = {r.id: set() for r in regions}
    for x, y in adjacency:
        if by_id[x].aspect == by_id[y].aspect:
            neighbours[x].add(y)
            neighbours[y].add(x)
    unassigned = {r.id for r in regions}
    domains = []
    for r in sorted(regions, key=lambda r: (-r.size, r.id)):
        if r.id not in unassigned:
            continue
        members = [r.id]
        images = {r.image_region}
        unassigned.discard(r.id)
        while True:
            cand = {n for m in members for n in neighbours[m]} & unassigned
            cand = [c for c in cand if by_id[c].image_region not in images]
            if not cand:
                break
            best = max(cand, key=lambda c: (by_id[c].size, -c))
            members.append(best)
            images.add(by_id[best].image_region)
            unassigned.discard(best)
        domains.append(UniquenessDomain(len(domains) + 1, r.aspect, tuple(sorted(members))))
    return domains


def _characteristic_polylines(g: Geometry3R, aspects: AspectMap, stride: int = 2) -> dict[int, list[Polyline]]:
    """Nonsingular preimages, inside the same aspect, of the aspect boundary images."""
    out: dict[int, list[Polyline]] = {a: [] for a in range(1, aspects.count + 1)}
    h = 2.0 * max(aspects.grid.spacing(0), aspects.grid.spacing(1))
    T2, T3 = aspects.grid.mesh()
    # preimages on another singular curve with the same image are not regular points
    floor = 1e-3 * float(np.max(np.abs(det_factors(g, T2, T3)[0])))
    for line in aspects.boundaries:
        pts = line.points[::stride]
        if len(pts) < 2:
            continue
        a, b, z = section_map(g, pts[:, 0], pts[:, 1])
        th2, th3, valid = ik_section_grid(g, np.hypot(a, b), z)
        # which aspects border each sample (probe across the singular curve)
        tang = np.gradient(pts, axis=0)
        nrm = np.stack([-tang[:, 1], tang[:, 0]], axis=1)
        nrm /= np.maximum(np.linalg.norm(nrm, axis=1, keepdims=True), 1e-300)
        side1 = aspects.labels_at(pts[:, 0] + h * nrm[:, 0], pts[:, 1] + h * nrm[:, 1])
        side2 = aspects.labels_at(pts[:, 0] - h * nrm[:, 0], pts[:, 1] - h * nrm[:, 1])
        sol_lab = np.zeros(th2.shape, dtype=int)
        sol_lab[valid] = aspects.labels_at(th2[valid], th3[valid])
        d = np.maximum(np.abs(wrap_angle(th2 - pts[:, :1])), np.abs(wrap_angle(th3 - pts[:, 1:])))
        det = np.abs(det_factors(g, th2, th3)[0])
        keep = valid & (d > 0.05) & (det > floor)
        for asp in range(1, aspects.count + 1):
            borders = (side1 == asp) | (side2 == asp)
            sel = keep & (sol_lab == asp) & borders[:, None]
            if not sel.any():
                continue
            samples = np.stack([th2[sel], th3[sel]], axis=1)
            out[asp].extend(_chain(samples, jump=0.2))
    return out


def _chain(samples: np.ndarray, jump: float) -> list[Polyline]:
    """Group consecutive samples closer than ``jump`` (torus metric) into polylines."""
    lines, cur = [], [samples[0]]
    for p in samples[1:]:
        if np.max(np.abs(wrap_angle(p - cur[-1]))) < jump:
            cur.append(p)
        else:
            lines.append(Polyline(np.array(cur), False))
            cur = [p]
    lines.append(Polyline(np.array(cur), False))
    return [l for l in lines if len(l) > 1]


def _t_regions(g, aspects, section, maps, labels, domains) -> list[TConnectedRegion]:
    out = []
    dom_of_region = {}
    for d in domains:
        for r in d.regions:
            dom_of_region[r] = d.id
    internal = [b.polyline for b in section.internal()]
    for d in domains:
        keys = set()
        for r in d.regions:
            keys.add(_region_key(labels, r, maps, aspects, g, section.grid))
        mask = np.isin(maps[d.aspect], list(keys))
        empties = _empty_lines(g, aspects, labels, d, dom_of_region, internal, mask, section.grid)
        out.append(TConnectedRegion(d.id, d.id, mask, empties))
    return out


def _region_key(labels, r, maps, aspects, g, sgrid):
    cells = np.argwhere(labels == r)
    pick = cells[:: max(1, len(cells) // 64)]
    grid = aspects.grid
    th2 = grid.axis(0)[pick[:, 0]]
    th3 = grid.axis(1)[pick[:, 1]]
    asp = int(np.bincount(aspects.labels[labels == r]).argmax())
    a, b, z = section_map(g, th2, th3)
    rho = np.hypot(a, b)
    vals = [maps[asp][sgrid.index_of((p, q))] for p, q in zip(rho, z)]
    vals = [v for v in vals if v]
    return int(np.bincount(vals).argmax()) if vals else 0


def _empty_lines(g, aspects, labels, dom, dom_of_region, internal, mask, sgrid) -> list[Polyline]:
    """Boundary stretches inside the region's image that the domain cannot reach."""
    lines = []
    grid = aspects.grid
    for pl in internal:
        pts = pl.points
        flags = []
        th2, th3, valid = ik_section_grid(g, pts[:, 0], pts[:, 1])
        for k, p in enumerate(pts):
            i, j = sgrid.index_of(p)
            win = mask[max(0, i - 2):i + 3, max(0, j - 2):j + 3]
            if not (win.any() and (~win).sum() == 0):
                flags.append(False)
                continue
            reach = False
            for s in range(4):
                if not valid[k, s]:
                    continue
                ii, jj = grid.index_of((th2[k, s], th3[k, s]))
                nb = labels[np.ix_([(ii + o) % grid.shape[0] for o in (-1, 0, 1)],
                                   [(jj + o) % grid.shape[1] for o in (-1, 0, 1)])]
                doms = {dom_of_region.get(int(x), 0) for x in nb.ravel()}
                if doms == {dom.id}:
                    reach = True
                    break
            flags.append(not reach)
        flags = ndimage.median_filter(np.array(flags, dtype=np.uint8), size=9, mode="nearest") > 0
        min_run = max(3, len(pts) // 50)
        start = None
        for k, f in enumerate(list(flags) + [False]):
            if f and start is None:
                start = k
            elif not f and start is not None:
                if k - start >= min_run:
                    lines.append(Polyline(pts[start:k], False))
                start = None
    return lines


@lru_cache(maxsize=16)
def build_atlas(g: Geometry3R, resolution: int = DEFAULT_RESOLUTION, limits: JointLimits = NO_LIMITS) -> Atlas:
    """Aspects, section, basic regions, uniqueness domains and t-connected regions."""
    g.require_orthogonal()
    aspects = compute_aspects(g, limits.grid(resolution), limits)
    sgrid = section_grid(g, resolution)
    section = workspace_section(g, sgrid)
    if limits != NO_LIMITS:
        section = _limit_section(g, section, aspects, limits)
    maps = _image_regions(g, aspects, sgrid, limits)
    labels, regions = _basic_regions(g, aspects, maps, sgrid)
    domains = _merge_domains(regions, _adjacency(labels, aspects.grid))
    t_regions = _t_regions(g, aspects, section, maps, labels, domains)
    characteristic = _characteristic_polylines(g, aspects)
    return Atlas(g, aspects, section, maps, labels, regions, domains, t_regions, characteristic)


def _limit_section(g, section, aspects, limits) -> WorkspaceSection:
    RHO, Z = section.grid.mesh()
    th2, th3, valid = ik_section_grid(g, RHO, Z)
    counts = np.sum(valid & limits.contains(th2, th3), axis=-1)
    cusps = [c for c in section.cusps if limits.contains(c.q.theta2, c.q.theta3)]
    return WorkspaceSection(section.grid, counts, section.boundaries, cusps)


def characteristic_surfaces(g: Geometry3R, aspects: Optional[AspectMap] = None) -> dict[int, list[Polyline]]:
    """Characteristic surfaces per aspect as joint-space polylines in (theta2, theta3)."""
    if aspects is None:
        aspects = compute_aspects(g)
    return _characteristic_polylines(g, aspects)


def uniqueness_domains(g: Geometry3R, resolution: int = DEFAULT_RESOLUTION,
                       limits: JointLimits = NO_LIMITS) -> list[UniquenessDomain]:
    return build_atlas(g, resolution, limits).domains


def t_connected_regions(g: Geometry3R, resolution: int = DEFAULT_RESOLUTION,
                        limits: JointLimits = NO_LIMITS) -> list[TConnectedRegion]:
    return build_atlas(g, resolution, limits).t_regions


# -- trajectories -------------------------------------------------------------------


UNBOUNDED = inf


@dataclass
class FeasibilityReport:
    verdict: str  # "feasible" or "blocked"
    joint_path: np.ndarray
    repeat_count: float
    blocked_at: Optional[float] = None
    boundary_id: Optional[int] = None
    min_abs_det: float = 0.0
    max_tracking_error: float = 0.0
    laps: list[np.ndarray] = field(default_factory=list)

    @property
    def feasible(self) -> bool:
        return self.verdict == "feasible"

    @property
    def repeat_label(self) -> str:
        return "unbounded" if self.repeat_count == UNBOUNDED else str(int(self.repeat_count))


def _section_point(g: Geometry3R, q2: np.ndarray) -> np.ndarray:
    a, b, z = section_map(g, q2[0], q2[1])
    return np.array([np.hypot(a, b), z])


def _section_D(g: Geometry3R, q2: np.ndarray) -> np.ndarray:
    a, b, z = section_map(g, q2[0], q2[1])
    (a2, a3), (b2, b3), (z2, z3) = section_jacobian(g, q2[0], q2[1])
    rho = max(np.hypot(a, b), 1e-300)
    return np.array([[(a * a2 + b * b2) / rho, (a * a3 + b * b3) / rho], [z2, z3]])


def _correct(g, q, target, tol, iters=12):
    for _ in range(iters):
        r = _section_point(g, q) - target
        if np.max(np.abs(r)) < tol:
            return q
        D = _section_D(g, q)
        try:
            q = q - np.linalg.solve(D, r)
        except np.linalg.LinAlgError:
            return None
    return q if np.max(np.abs(_section_point(g, q) - target)) < tol else None


def _densify(path: np.ndarray, step: float) -> np.ndarray:
    out = [path[0]]
    for a, b in zip(path[:-1], path[1:]):
        n = max(1, int(np.ceil(np.linalg.norm(b - a) / step)))
        for k in range(1, n + 1):
            out.append(a + (b - a) * k / n)
    return np.array(out)


def _track(g: Geometry3R, pts: np.ndarray, q0: np.ndarray, total: float, tol: float):
    """Continue the IK branch through q0 along section points; return (joints, blocked_index)."""
    q = q0.copy()
    sign0 = np.sign(det_factors(g, q[0], q[1])[0])
    joints = [q.copy()]
    min_step = 1e-6 * total
    for k in range(1, len(pts)):
        a, b = pts[k - 1], pts[k]
        seg = np.linalg.norm(b - a)
        s, h = 0.0, 1.0
        while s < 1.0:
            h = min(h, 1.0 - s)
            target = a + (b - a) * (s + h)
            D = _section_D(g, q)
            try:
                pred = q + np.linalg.solve(D, target - _section_point(g, q))
            except np.linalg.LinAlgError:
                pred = None
            qn = _correct(g, pred, target, tol) if pred is not None and np.all(np.isfinite(pred)) else None
            ok = qn is not None
            if ok:
                dq = np.max(np.abs(qn - q))
                predicted = np.max(np.abs(pred - q))
                ok = (np.sign(det_factors(g, qn[0], qn[1])[0]) == sign0
                      and dq < 0.25 and dq <= 4.0 * predicted + 1e-9)
            if ok:
                q = qn
                s += h
                h = min(1.0, 2.0 * h)
            else:
                h *= 0.5
                if h * seg < min_step:
                    return np.array(joints), k
        joints.append(q.copy())
    return np.array(joints), None


def check_trajectory(g: Geometry3R, path, start: JointConfig3R, step: Optional[float] = None,
                     max_laps: int = 6, section: Optional[WorkspaceSection] = None,
                     tol: float = 1e-10) -> FeasibilityReport:
    """Follow a workspace path continuously from ``start``.

    ``path`` is an (N, 2) polyline in (rho, z) or an (N, 3) polyline in
    Cartesian coordinates. A closed path (first point equal to the last) is
    repeated until the joint state comes back to one already seen
    (repeat_count unbounded), the continuation blocks (repeat_count = laps
    completed) or ``max_laps`` is reached.
    """
    g.require_orthogonal()
    path = np.asarray(path, dtype=float)
    if path.ndim != 2 or path.shape[1] not in (2, 3) or len(path) < 2:
        raise ValueError("path must be an (N, 2) or (N, 3) polyline")
    cart = path.shape[1] == 3
    sec = np.stack([np.hypot(path[:, 0], path[:, 1]), path[:, 2]], axis=1) if cart else path
    scale = 1.0 + g.reach
    head = _fk_array(g, start.as_array())
    head_sec = np.array([np.hypot(head[0], head[1]), head[2]])
    if cart:
        if np.linalg.norm(head - path[0]) > 1e-6 * scale:
            raise ValueError("start not on path")
    elif np.linalg.norm(head_sec - sec[0]) > 1e-6 * scale:
        raise ValueError("start not on path")
    lengths = np.linalg.norm(np.diff(path, axis=0), axis=1)
    total = float(lengths.sum())
    if step is None:
        step = total / 400.0 if total > 0 else 1.0
    dense = _densify(path, step)
    dsec = np.stack([np.hypot(dense[:, 0], dense[:, 1]), dense[:, 2]], axis=1) if cart else dense
    closed = np.linalg.norm(path[0] - path[-1]) < 1e-9 * scale
    track_tol = tol * scale

    q = np.array([start.theta2, start.theta3])
    seen = [q.copy()]
    laps = []
    count = 0
    while True:
        joints, blocked = _track(g, dsec, q, total if total > 0 else 1.0, track_tol)
        full = _with_theta1(g, joints, dense[: len(joints)], cart, start.theta1)
        laps.append(full)
        if blocked is not None:
            if count == 0:
                arc = float(np.sum(np.linalg.norm(np.diff(dense[:blocked], axis=0), axis=1)))
                at = dsec[min(blocked, len(dsec) - 1)]
                return FeasibilityReport("blocked", full, 0, arc, _nearest_boundary(section, at),
                                         _min_det(g, joints), _track_error(g, full, dense[: len(joints)], cart), laps)
            break
        count += 1
        q = joints[-1]
        if not closed:
            break
        if any(np.max(np.abs(wrap_angle(q - s))) < 1e-6 for s in seen):
            count = UNBOUNDED
            break
        if count >= max_laps:
            break
        seen.append(q.copy())
    # statistics over completed laps only; a blocked final lap is reported in ``laps``
    done = laps if count == UNBOUNDED else laps[:count]
    return FeasibilityReport("feasible", laps[0], count, None, None,
                             min(_min_det(g, l[:, 1:]) for l in done),
                             max(_track_error(g, l, dense[: len(l)], cart) for l in done), laps)


def _with_theta1(g, joints, pts, cart, theta1_start):
    a, b, _ = section_map(g, joints[:, 0], joints[:, 1])
    if cart:
        th1 = np.unwrap(np.arctan2(pts[:, 1], pts[:, 0]) - np.arctan2(b, a))
    else:
        th1 = np.full(len(joints), theta1_start)
    return np.column_stack([th1, joints])


def _min_det(g, joints2) -> float:
    return float(np.min(np.abs(det_factors(g, joints2[:, 0], joints2[:, 1])[0])))


def _track_error(g, full, pts, cart) -> float:
    err = 0.0
    for q, p in zip(full, pts):
        x = _fk_array(g, q)
        if cart:
            err = max(err, float(np.linalg.norm(x - p)))
        else:
            err = max(err, float(np.hypot(np.hypot(x[0], x[1]) - p[0], x[2] - p[1])))
    return err


def _nearest_boundary(section: Optional[WorkspaceSection], p) -> Optional[int]:
    if section is None or not section.boundaries:
        return None
    d = [np.min(np.linalg.norm(b.polyline.points - p, axis=1)) for b in section.boundaries]
    return int(np.argmin(d))


# -- nonsingular posture change -------------------------------------------------------


class SingularChangeRequired(ValueError):
    pass


def nonsingular_posture_change(g: Geometry3R, q_from: JointConfig3R, q_to: JointConfig3R,
                               resolution: int = DEFAULT_RESOLUTION, samples: int = 200) -> np.ndarray:
    """Joint path (N, 3) from ``q_from`` to ``q_to`` along which det J keeps its sign.

    Tries the straight joint-space segment first, then a breadth-first search
    through the aspect's grid cells, keeping away from the singular set.
    Raises :class:`SingularChangeRequired` when the configurations lie in
    different aspects.
    """
    g.require_orthogonal()
    pf, pt = forward_kinematics(g, q_from), forward_kinematics(g, q_to)
    if np.linalg.norm(pf.as_array() - pt.as_array()) > 1e-6 * (1 + g.reach):
        raise ValueError("configurations must reach the same point")
    a = q_from.as_array()
    b = q_to.as_array()
    if np.max(np.abs(wrap_angle(b - a))) < 1e-12:
        return a[None, :]
    aspects = compute_aspects(g, GridSpec.torus(resolution))
    la, lb = aspects.label_at(q_from), aspects.label_at(q_to)
    if la == 0 or lb == 0:
        raise SingularChangeRequired("requires singular change: endpoint is singular")
    if la != lb:
        raise SingularChangeRequired("requires singular change")
    sign = aspects.signs[la]
    seg = _segment(a, b, samples)
    if _clean(g, seg, sign):
        return seg
    grid = aspects.grid
    margin = aspects.labels == la
    T2, T3 = grid.mesh()
    det = det_factors(g, T2, T3)[0] * sign
    # stay a couple of cells inside the aspect
    inner = margin & (det > 0.05 * np.max(det))
    start = _nearest_cell(grid, inner, a[1:], g, sign)
    goal = _nearest_cell(grid, inner, b[1:], g, sign)
    if start is None or goal is None:
        raise SingularChangeRequired("no interior path found")
    cells = grid_path(inner, start, goal, grid)
    if cells is None:
        raise SingularChangeRequired("no interior path found")
    pts = [np.array([grid.axis(0)[i], grid.axis(1)[j]]) for i, j in cells]
    th1 = np.linspace(a[0], a[0] + wrap_angle(b[0] - a[0]), len(pts) + 2)
    way = [a] + [np.array([t, p[0], p[1]]) for t, p in zip(th1[1:-1], pts)] + [b]
    path = [way[0]]
    for p, n in zip(way[:-1], way[1:]):
        path.extend(_segment(p, n, 8)[1:])
    path = np.array(path)
    if not _clean(g, path, sign):
        raise SingularChangeRequired("no interior path found")
    return path


def _segment(a, b, n):
    d = wrap_angle(b - a)
    t = np.linspace(0.0, 1.0, n)[:, None]
    return a + t * d


def _clean(g, path, sign) -> bool:
    det = det_factors(g, path[:, 1], path[:, 2])[0] * sign
    return bool(np.all(det > 0))


def _nearest_cell(grid, mask, q2, g, sign):
    idx = np.argwhere(mask)
    if not len(idx):
        return None
    pts = np.stack([grid.axis(0)[idx[:, 0]], grid.axis(1)[idx[:, 1]]], axis=1)
    d = np.max(np.abs(wrap_angle(pts - q2)), axis=1)
    for k in np.argsort(d)[:200]:
        seg = _segment(np.array([0.0, *q2]), np.array([0.0, *pts[k]]), 16)
        if _clean(g, seg, sign):
            return tuple(idx[k])
    return None
