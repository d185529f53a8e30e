"""Level-set extraction and curvature measurement on cell-center lattices.

The zero set of a sampled field is traced square by square over the lattice
of cell centers (16-case lookup, saddles resolved by the cell-average sign),
chained into polylines through shared edge crossings.  Curvature along a
polyline comes from an algebraic circle fit over a sliding arclength window;
its sign follows the field gradient, positive when the enclosed phase is the
positive one.  Those two ingredients feed the pointwise curvature-balance
residual sigma*kappa - f and its arclength-weighted norms.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .field import Grid, sample

# undirected segment table: case -> pairs of square edges joined by the
# contour.  Edges of the square at (i, j): S/N horizontal below/above,
# W/E vertical left/right.  Corner bits: 1=(i,j), 2=(i+1,j), 4=(i+1,j+1),
# 8=(i,j+1), set when the corner value exceeds the level.
_SEGMENTS = {
    0: [],
    1: [("W", "S")],
    2: [("S", "E")],
    3: [("W", "E")],
    4: [("E", "N")],
    6: [("S", "N")],
    7: [("W", "N")],
    8: [("N", "W")],
    9: [("S", "N")],
    11: [("E", "N")],
    12: [("W", "E")],
    13: [("S", "E")],
    14: [("W", "S")],
    15: [],
}


@dataclass
class Contour:
    points: np.ndarray  # (m, 2) vertex coordinates in traversal order
    closed: bool


def _edge_key(name: str, i: int, j: int):
    if name == "S":
        return ("h", i, j)
    if name == "N":
        return ("h", i, j + 1)
    if name == "W":
        return ("v", i, j)
    return ("v", i + 1, j)


def extract_contours(values: np.ndarray, grid: Grid, level: float = 0.0):
    """Trace the level set into polylines; deterministic ordering.

    Returns a list of Contour objects.  Closed loops do not repeat their
    first vertex.  Vertices are linear interpolations along lattice edges,
    so a field that is linear across an edge is cut exactly.
    """
    if grid.ndim != 2:
        raise ValueError("contour extraction needs a 2D grid")
    v = np.asarray(values, dtype=float)
    if v.shape != grid.shape:
        raise ValueError("values shape does not match the grid")
    x, y = grid.axes()
    inside = v > level

    # adjacency between edge crossings
    neighbors: dict = {}

    def connect(a, b):
        neighbors.setdefault(a, []).append(b)
        neighbors.setdefault(b, []).append(a)

    nx, ny = v.shape
    for i in range(nx - 1):
        for j in range(ny - 1):
            case = (
                int(inside[i, j])
                | int(inside[i + 1, j]) << 1
                | int(inside[i + 1, j + 1]) << 2
                | int(inside[i, j + 1]) << 3
            )
            if case == 0 or case == 15:
                continue
            if case == 5:
                center = 0.25 * (
                    v[i, j] + v[i + 1, j] + v[i + 1, j + 1] + v[i, j + 1]
                )
                pairs = (
                    [("W", "N"), ("S", "E")]
                    if center > level
                    else [("W", "S"), ("E", "N")]
                )
            elif case == 10:
                center = 0.25 * (
                    v[i, j] + v[i + 1, j] + v[i + 1, j + 1] + v[i, j + 1]
                )
                pairs = (
                    [("W", "S"), ("E", "N")]
                    if center > level
                    else [("W", "N"), ("S", "E")]
                )
            else:
                pairs = _SEGMENTS[case]
            for a, b in pairs:
                connect(_edge_key(a, i, j), _edge_key(b, i, j))

    def position(key):
        kind, i, j = key
        if kind == "h":
            a, b = v[i, j], v[i + 1, j]
            t = (level - a) / (b - a)
            return (x[i] + t * grid.spacing, y[j])
        a, b = v[i, j], v[i, j + 1]
        t = (level - a) / (b - a)
        return (x[i], y[j] + t * grid.spacing)

    visited = set()
    contours = []

    def walk(start, first_step):
        path = [start, first_step]
        visited.add(start)
        visited.add(first_step)
        while True:
            options = [k for k in neighbors[path[-1]] if k != path[-2]]
            options = [k for k in options if k not in visited or k == path[0]]
            if not options:
                return path, False
            nxt = options[0]
            if nxt == path[0]:
                return path, True
            path.append(nxt)
            visited.add(nxt)

    # open paths first (deterministic: sorted endpoints), then loops
    endpoints = sorted(k for k, adj in neighbors.items() if len(adj) == 1)
    for key in endpoints:
        if key in visited:
            continue
        path, closed = walk(key, neighbors[key][0])
        contours.append((path, closed))
    for key in sorted(neighbors):
        if key in visited:
            continue
        path, closed = walk(key, neighbors[key][0])
        contours.append((path, closed))

    out = []
    for path, closed in contours:
        pts = np.array([position(k) for k in path])
        out.append(Contour(points=pts, closed=closed))
    return out


def zero_crossings_1d(values: np.ndarray, grid: Grid, level: float = 0.0):
    """Linearly interpolated level crossings of a 1D cell-center sample."""
    if grid.ndim != 1:
        raise ValueError("needs a 1D grid")
    v = np.asarray(values, dtype=float)
    x = grid.axis(0)
    sign = v > level
    hits = np.nonzero(sign[1:] != sign[:-1])[0]
    t = (level - v[hits]) / (v[hits + 1] - v[hits])
    return x[hits] + t * grid.spacing


def _arclengths(points: np.ndarray, closed: bool) -> np.ndarray:
    seg = np.linalg.norm(np.diff(points, axis=0), axis=1)
    if closed:
        seg = np.append(seg, np.linalg.norm(points[0] - points[-1]))
    return seg


def _fit_circle(pts: np.ndarray):
    """Algebraic circle fit; returns (center, radius) or None if degenerate."""
    ax = np.column_stack([2.0 * pts, np.ones(len(pts))])
    rhs = np.sum(pts**2, axis=1)
    sol, _, rank, svals = np.linalg.lstsq(ax, rhs, rcond=None)
    if rank < 3 or svals[-1] <= 1e-12 * svals[0]:
        return None
    center = sol[:2]
    r2 = sol[2] + center @ center
    if r2 <= 0.0:
        return None
    return center, float(np.sqrt(r2))


def curvature(
    contour: Contour,
    grid: Grid,
    grad_fields: tuple[np.ndarray, np.ndarray],
    window: float,
) -> np.ndarray:
    """Signed curvature at every polyline vertex by windowed circle fit.

    The fit uses all vertices within arclength window/2 on either side.
    On open polylines, vertices whose window is clipped by an endpoint get
    NaN (downstream statistics trim them).  The sign convention makes the
    curvature of a bubble of the positive phase positive: kappa carries the
    sign of (fit center - vertex) . grad(u).
    """
    pts = contour.points
    m = len(pts)
    if m < 3:
        return np.full(m, np.nan)
    seg = _arclengths(pts, contour.closed)
    gx = sample(grad_fields[0], grid, pts)
    gy = sample(grad_fields[1], grid, pts)
    kappa = np.full(m, np.nan)
    if contour.closed:
        cum = np.concatenate([[0.0], np.cumsum(seg)])  # length m+1
        total = cum[-1]
        for k in range(m):
            idx = _loop_window(cum[:-1], total, k, window / 2.0)
            fit = _fit_circle(pts[idx])
            if fit is None:
                kappa[k] = 0.0
                continue
            center, radius = fit
            orient = (center[0] - pts[k, 0]) * gx[k] + (center[1] - pts[k, 1]) * gy[k]
            kappa[k] = np.copysign(1.0 / radius, orient)
    else:
        cum = np.concatenate([[0.0], np.cumsum(seg)])  # length m
        for k in range(m):
            lo = cum[k] - window / 2.0
            hi = cum[k] + window / 2.0
            if lo < 0.0 or hi > cum[-1]:
                continue  # clipped window: leave NaN
            idx = np.nonzero((cum >= lo) & (cum <= hi))[0]
            if len(idx) < 3:
                continue
            fit = _fit_circle(pts[idx])
            if fit is None:
                kappa[k] = 0.0
                continue
            center, radius = fit
            orient = (center[0] - pts[k, 0]) * gx[k] + (center[1] - pts[k, 1]) * gy[k]
            kappa[k] = np.copysign(1.0 / radius, orient)
    return kappa


def _loop_window(cum: np.ndarray, total: float, k: int, half: float) -> np.ndarray:
    d = np.abs(cum - cum[k])
    d = np.minimum(d, total - d)
    return np.nonzero(d <= half)[0]


@dataclass
class BalanceReport:
    sup: float
    weighted_l2: float
    count: int


def curvature_balance(
    contour: Contour,
    kappa: np.ndarray,
    force: np.ndarray,
    sigma: float,
) -> BalanceReport:
    """Residual statistics of sigma*kappa - force along the polyline.

    force holds the driving value at each vertex (a constant multiplier, a
    prescribed forcing sampled there, or multiplier minus potential).  NaN
    curvature entries are excluded; the L2 norm is arclength weighted.
    """
    res = sigma * np.asarray(kappa, dtype=float) - np.asarray(force, dtype=float)
    good = ~np.isnan(res)
    if not np.any(good):
        raise ValueError("no usable vertices: all curvatures are NaN")
    seg = _arclengths(contour.points, contour.closed)
    m = len(contour.points)
    weights = np.zeros(m)
    if contour.closed:
        weights += 0.5 * seg
        weights += 0.5 * np.roll(seg, 1)
    else:
        weights[:-1] += 0.5 * seg
        weights[1:] += 0.5 * seg
    w = weights[good]
    r = res[good]
    return BalanceReport(
        sup=float(np.max(np.abs(r))),
        weighted_l2=float(np.sqrt(np.sum(w * r**2) / np.sum(w))),
        count=int(np.sum(good)),
    )


def write_contour_csv(path, contour: Contour, kappa, force, sigma: float) -> None:
    """Vertex table: index,x,y,kappa,f,residual (NaN rows included as-is)."""
    kappa = np.asarray(kappa, dtype=float)
    force = np.asarray(force, dtype=float)
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["index", "x", "y", "kappa", "f", "residual"])
        for k, (p, kap, f) in enumerate(zip(contour.points, kappa, force)):
            writer.writerow(
                [
                    k,
                    "%.17g" % p[0],
                    "%.17g" % p[1],
                    "%.17g" % kap,
                    "%.17g" % f,
                    "%.17g" % (sigma * kap - f),
                ]
            )
