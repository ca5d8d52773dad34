"""Sampling grids with per-axis wrap/clamp topology, zero-curve tracing and labelling."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Callable, Sequence, Union

import numpy as np
from scipy import ndimage

WRAP = "wrap"
CLAMP = "clamp"


@dataclass(frozen=True)
class GridSpec:
    """Regular sampling of an axis-aligned box.

    Wrapped axes sample ``resolution`` points over the half-open period
    ``[min, max)``; clamped axes sample ``resolution`` points including both
    ends.
    """

    ranges: tuple[tuple[float, float], ...]
    resolution: tuple[int, ...]
    topology: tuple[str, ...]

    def __init__(self, ranges, resolution, topology=None):
        ranges = tuple((float(a), float(b)) for a, b in ranges)
        if isinstance(resolution, (int, np.integer)):
            resolution = (int(resolution),) * len(ranges)
        resolution = tuple(int(r) for r in resolution)
        if topology is None:
            topology = (CLAMP,) * len(ranges)
        elif isinstance(topology, str):
            topology = (topology,) * len(ranges)
        topology = tuple(topology)
        if not (len(ranges) == len(resolution) == len(topology)):
            raise ValueError("ranges, resolution and topology must have the same length")
        for (lo, hi), n, top in zip(ranges, resolution, topology):
            if n < 8:
                raise ValueError("grid resolution must be at least 8 per axis")
            if top not in (WRAP, CLAMP):
                raise ValueError(f"unknown topology {top!r}")
            if not lo < hi:
                raise ValueError("axis range must satisfy min < max")
        object.__setattr__(self, "ranges", ranges)
        object.__setattr__(self, "resolution", resolution)
        object.__setattr__(self, "topology", topology)

    @classmethod
    def torus(cls, resolution: int = 256) -> "GridSpec":
        return cls([(-np.pi, np.pi), (-np.pi, np.pi)], resolution, WRAP)

    @property
    def ndim(self) -> int:
        return len(self.ranges)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.resolution

    def wrapped(self, axis: int) -> bool:
        return self.topology[axis] == WRAP

    def axis(self, k: int) -> np.ndarray:
        lo, hi = self.ranges[k]
        n = self.resolution[k]
        if self.wrapped(k):
            return lo + (hi - lo) * np.arange(n) / n
        return np.linspace(lo, hi, n)

    def spacing(self, k: int) -> float:
        lo, hi = self.ranges[k]
        n = self.resolution[k]
        return (hi - lo) / (n if self.wrapped(k) else n - 1)

    def mesh(self) -> list[np.ndarray]:
        return np.meshgrid(*[self.axis(k) for k in range(self.ndim)], indexing="ij")

    def points(self) -> np.ndarray:
        """All grid points as an (N, ndim) array in C order."""
        return np.stack([m.ravel() for m in self.mesh()], axis=1)

    def index_of(self, x: Sequence[float]) -> tuple[int, ...]:
        """Nearest grid index of a point (wrapped axes reduced modulo the period)."""
        idx = []
        for k, v in enumerate(x):
            lo, hi = self.ranges[k]
            n = self.resolution[k]
            if self.wrapped(k):
                i = int(np.round((v - lo) / (hi - lo) * n)) % n
            else:
                i = int(np.clip(np.round((v - lo) / (hi - lo) * (n - 1)), 0, n - 1))
            idx.append(i)
        return tuple(idx)

    def reduce(self, x: np.ndarray) -> np.ndarray:
        """Reduce wrapped coordinates of points (..., ndim) into ``[min, max)``."""
        x = np.array(x, dtype=float, copy=True)
        for k in range(self.ndim):
            if self.wrapped(k):
                lo, hi = self.ranges[k]
                x[..., k] = lo + np.mod(x[..., k] - lo, hi - lo)
        return x


@dataclass
class Polyline:
    points: np.ndarray
    closed: bool

    def __len__(self) -> int:
        return len(self.points)


def _evaluate(f, grid: GridSpec) -> np.ndarray:
    if callable(f):
        return np.asarray(f(*grid.mesh()), dtype=float)
    v = np.asarray(f, dtype=float)
    if v.shape != grid.shape:
        raise ValueError("field shape does not match grid")
    return v


def trace_zero_curve(f: Union[Callable, np.ndarray], grid: GridSpec) -> list[Polyline]:
    """Zero-level polylines of a 2-D field by marching squares.

    ``f`` is either a vectorised callable taking the two ``ij``-indexed mesh
    arrays or an array of samples on ``grid``. Crossing points are linearly
    interpolated along cell edges; saddle cells are resolved by the cell-centre
    average. Segments are stitched across wrapped seams, so every polyline is
    either closed or ends on a clamped boundary. Points are reported inside the
    grid box (wrapped coordinates reduced to ``[min, max)``).
    """
    if grid.ndim != 2:
        raise ValueError("trace_zero_curve needs a 2-D grid")
    V = _evaluate(f, grid)
    n0, n1 = grid.shape
    w0, w1 = grid.wrapped(0), grid.wrapped(1)
    x0, x1 = grid.axis(0), grid.axis(1)
    h0, h1 = grid.spacing(0), grid.spacing(1)
    pos = V >= 0.0

    c0 = n0 if w0 else n0 - 1
    c1 = n1 if w1 else n1 - 1

    def edge_point(key):
        kind, i, j = key
        if kind == 0:  # edge (i,j)-(i+1,j)
            ia, ib = i, (i + 1) % n0
            fa, fb = V[ia, j], V[ib, j]
            t = fa / (fa - fb)
            return np.array([x0[i] + t * h0, x1[j]])
        ja, jb = j, (j + 1) % n1
        fa, fb = V[i, ja], V[i, jb]
        t = fa / (fa - fb)
        return np.array([x0[i], x1[j] + t * h1])

    adjacency: dict[tuple, list[tuple]] = {}

    def link(a, b):
        adjacency.setdefault(a, []).append(b)
        adjacency.setdefault(b, []).append(a)

    I, J = np.meshgrid(np.arange(c0), np.arange(c1), indexing="ij")
    ip = (I + 1) % n0
    jp = (J + 1) % n1
    s0, s1, s2, s3 = pos[I, J], pos[ip, J], pos[ip, jp], pos[I, jp]
    active = ~((s0 == s1) & (s1 == s2) & (s2 == s3))
    for i, j in zip(I[active], J[active]):
        i2, j2 = (i + 1) % n0, (j + 1) % n1
        s = (pos[i, j], pos[i2, j], pos[i2, j2], pos[i, j2])
        e = ((0, i, j), (1, i2, j), (0, i, j2), (1, i, j))
        crossing = [e[k] for k, (a, b) in enumerate(((0, 1), (1, 2), (3, 2), (0, 3))) if s[a] != s[b]]
        if len(crossing) == 2:
            link(crossing[0], crossing[1])
        elif len(crossing) == 4:
            centre = 0.25 * (V[i, j] + V[i2, j] + V[i2, j2] + V[i, j2]) >= 0.0
            if centre == s[0]:
                link(e[0], e[1])
                link(e[2], e[3])
            else:
                link(e[3], e[0])
                link(e[1], e[2])

    visited: set = set()
    out: list[Polyline] = []

    def walk(start):
        chain = [start]
        visited.add(start)
        prev, cur = None, start
        while True:
            nxt = [k for k in adjacency[cur] if k != prev and k not in visited]
            if not nxt:
                closed = len(chain) > 2 and start in adjacency[cur] and prev is not None
                return chain, closed
            prev, cur = cur, nxt[0]
            visited.add(cur)
            chain.append(cur)

    ends = [k for k, v in adjacency.items() if len(v) == 1]
    for k in sorted(ends):
        if k not in visited:
            chain, _ = walk(k)
            out.append(Polyline(np.array([edge_point(c) for c in chain]), False))
    for k in sorted(adjacency):
        if k not in visited:
            chain, closed = walk(k)
            out.append(Polyline(np.array([edge_point(c) for c in chain]), closed))
    for pl in out:
        pl.points = grid.reduce(pl.points)
    return out


def connected_components(mask: np.ndarray, grid: GridSpec) -> tuple[np.ndarray, int]:
    """Label 4-connected (face-connected) components of a boolean field.

    Components touching both faces of a wrapped axis are merged across the
    seam. Labels are dense from 1 in order of first appearance; background
    cells get 0.
    """
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != grid.shape:
        raise ValueError("mask shape does not match grid")
    structure = ndimage.generate_binary_structure(mask.ndim, 1)
    labels, n = ndimage.label(mask, structure=structure)
    parent = np.arange(n + 1)

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for k in range(mask.ndim):
        if not grid.wrapped(k):
            continue
        first = np.take(labels, 0, axis=k)
        last = np.take(labels, -1, axis=k)
        both = (first > 0) & (last > 0)
        for a, b in set(zip(first[both].tolist(), last[both].tolist())):
            ra, rb = find(a), find(b)
            if ra != rb:
                parent[max(ra, rb)] = min(ra, rb)
    roots = np.array([find(a) for a in range(n + 1)])
    merged = roots[labels]
    flat = merged.ravel()
    _, first_idx = np.unique(flat, return_index=True)
    order = [flat[i] for i in sorted(first_idx) if flat[i] != 0]
    remap = np.zeros(n + 1, dtype=int)
    for new, old in enumerate(order, start=1):
        remap[old] = new
    return remap[merged], len(order)


def sign_components(values: np.ndarray, grid: GridSpec, valid: np.ndarray = None):
    """Components of constant sign of a sampled field, with its zero set thickened.

    A cell whose 3x3 (wrap-aware) neighbourhood contains both signs, or a
    zero, is treated as boundary. This keeps regions that only touch at a
    crossing of two zero curves apart. Returns ``(labels, signs)`` where
    ``signs[label]`` is +1 or -1; boundary and invalid cells get label 0.
    """
    values = np.asarray(values, dtype=float)
    if values.shape != grid.shape:
        raise ValueError("field shape does not match grid")
    s = np.sign(values)
    modes = ["wrap" if grid.wrapped(k) else "nearest" for k in range(grid.ndim)]
    hi = ndimage.maximum_filter(s, size=3, mode=modes)
    lo = ndimage.minimum_filter(s, size=3, mode=modes)
    interior = (hi == lo) & (s != 0)
    if valid is not None:
        interior &= np.asarray(valid, dtype=bool)
    pos, npos = connected_components(interior & (s > 0), grid)
    neg, nneg = connected_components(interior & (s < 0), grid)
    labels = np.where(pos > 0, pos, np.where(neg > 0, neg + npos, 0))
    signs = {k: 1 for k in range(1, npos + 1)}
    signs.update({k + npos: -1 for k in range(1, nneg + 1)})
    return labels, signs


def grid_path(mask: np.ndarray, start: tuple, goal: tuple, grid: GridSpec):
    """Shortest face-connected cell path from ``start`` to ``goal`` inside ``mask``, or None."""
    shape = mask.shape
    prev = {start: None}
    dq = deque([start])
    while dq:
        c = dq.popleft()
        if c == goal:
            out = []
            while c is not None:
                out.append(c)
                c = prev[c]
            return out[::-1]
        for k in range(len(shape)):
            for step in (1, -1):
                n = list(c)
                n[k] += step
                if grid.wrapped(k):
                    n[k] %= shape[k]
                elif not 0 <= n[k] < shape[k]:
                    continue
                n = tuple(n)
                if mask[n] and n not in prev:
                    prev[n] = c
                    dq.append(n)
    return None
