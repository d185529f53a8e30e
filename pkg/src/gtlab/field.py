"""Cell-centered grids and the discrete field operations built on them.

Grids are uniform, cell centered, with the same spacing on every axis.
The Laplacian is the zero-flux (reflecting) five-point operator written in
flux form: per axis, interior face differences with zero boundary fluxes,
differenced again.  That form is symmetric with respect to the plain dot
product, mirrors bitwise under coordinate reflection, and avoids the
cancellation noise of the expanded three-term stencil.

The Poisson solver inverts the same discrete operator exactly through its
cosine-basis diagonalization, so solver output and stencil agree to
rounding, not just to truncation order.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field as dataclass_field

import numpy as np
from scipy.fft import dctn, idctn


@dataclass(frozen=True)
class Grid:
    """Uniform cell-centered grid on an axis-aligned box.

    The cell centers along axis j sit at origin[j] + (i + 1/2) * spacing,
    i = 0 .. shape[j]-1.  One spacing is shared by all axes.
    """

    origin: tuple[float, ...]
    spacing: float
    shape: tuple[int, ...]

    def __post_init__(self):
        if self.spacing <= 0.0:
            raise ValueError("grid spacing must be positive")
        if len(self.origin) != len(self.shape):
            raise ValueError("origin and shape dimensions disagree")
        if any(n < 2 for n in self.shape):
            raise ValueError("each axis needs at least 2 cells")

    @classmethod
    def interval(cls, lo: float, hi: float, n_cells: int) -> "Grid":
        if hi <= lo:
            raise ValueError("interval bounds are out of order")
        return cls((float(lo),), (hi - lo) / n_cells, (int(n_cells),))

    @classmethod
    def rectangle(
        cls,
        lower: tuple[float, float],
        upper: tuple[float, float],
        n_cells: tuple[int, int],
    ) -> "Grid":
        widths = [upper[k] - lower[k] for k in range(2)]
        if any(w <= 0.0 for w in widths):
            raise ValueError("rectangle bounds are out of order")
        spacings = [widths[k] / n_cells[k] for k in range(2)]
        if abs(spacings[0] - spacings[1]) > 1e-12 * spacings[0]:
            raise ValueError("cells must be square; adjust counts or bounds")
        return cls(
            (float(lower[0]), float(lower[1])),
            spacings[0],
            (int(n_cells[0]), int(n_cells[1])),
        )

    @property
    def ndim(self) -> int:
        return len(self.shape)

    @property
    def cell_volume(self) -> float:
        return self.spacing**self.ndim

    def axis(self, j: int) -> np.ndarray:
        n = self.shape[j]
        return self.origin[j] + (np.arange(n) + 0.5) * self.spacing

    def axes(self) -> tuple[np.ndarray, ...]:
        return tuple(self.axis(j) for j in range(self.ndim))

    def mesh(self) -> tuple[np.ndarray, ...]:
        """Coordinate arrays of every cell center, indexed like the values."""
        return tuple(np.meshgrid(*self.axes(), indexing="ij"))

    def upper(self) -> tuple[float, ...]:
        return tuple(
            self.origin[j] + self.shape[j] * self.spacing for j in range(self.ndim)
        )


def _moved(values: np.ndarray, axis: int) -> np.ndarray:
    return np.moveaxis(values, axis, 0)


def laplacian(values: np.ndarray, spacing: float) -> np.ndarray:
    """Zero-flux five-point Laplacian in flux form."""
    out = np.zeros_like(values)
    for axis in range(values.ndim):
        flux = np.diff(values, axis=axis)
        pad = [(0, 0)] * values.ndim
        pad[axis] = (1, 1)
        flux = np.pad(flux, pad)
        out += np.diff(flux, axis=axis)
    return out / spacing**2


def gradient(values: np.ndarray, spacing: float) -> tuple[np.ndarray, ...]:
    """Centered interior differences, one-sided first order at the walls."""
    parts = []
    for axis in range(values.ndim):
        v = _moved(values, axis)
        g = np.empty_like(v)
        g[1:-1] = (v[2:] - v[:-2]) / (2.0 * spacing)
        g[0] = (v[1] - v[0]) / spacing
        g[-1] = (v[-1] - v[-2]) / spacing
        parts.append(np.moveaxis(g, 0, axis))
    return tuple(parts)


def integrate(values: np.ndarray, grid: Grid) -> float:
    """Midpoint quadrature: every cell carries the same volume."""
    return float(np.sum(values)) * grid.cell_volume


def sample(values: np.ndarray, grid: Grid, points: np.ndarray) -> np.ndarray:
    """Clamped multilinear interpolation at arbitrary points.

    points has shape (m, ndim) (or (m,) in one dimension).  Outside the
    span of the cell centers the interpolant is extended by its boundary
    value (clamping), which is the right behaviour for fields that have
    reached their far-field plateau at the walls.
    """
    pts = np.asarray(points, dtype=float)
    if grid.ndim == 1 and pts.ndim == 1:
        pts = pts[:, None]
    if pts.ndim != 2 or pts.shape[1] != grid.ndim:
        raise ValueError("points must have shape (m, ndim)")
    m = pts.shape[0]
    base = np.empty((m, grid.ndim), dtype=int)
    frac = np.empty((m, grid.ndim))
    for j in range(grid.ndim):
        n = grid.shape[j]
        t = (pts[:, j] - grid.origin[j]) / grid.spacing - 0.5
        t = np.clip(t, 0.0, n - 1.0)
        i0 = np.minimum(t.astype(int), n - 2)
        base[:, j] = i0
        frac[:, j] = t - i0
    out = np.zeros(m)
    for corner in itertools.product((0, 1), repeat=grid.ndim):
        weight = np.ones(m)
        index = []
        for j, c in enumerate(corner):
            weight = weight * (frac[:, j] if c else 1.0 - frac[:, j])
            index.append(base[:, j] + c)
        out += weight * values[tuple(index)]
    return out


def poisson_neumann(
    source: np.ndarray, grid: Grid, compat_tol: float = 1e-10
) -> np.ndarray:
    """Solve -lap(v) = source - mean(source) with zero-flux walls, mean(v) = 0.

    The discrete operator is diagonal in the cosine basis of the reflecting
    grid, so the solve is exact for the same stencil `laplacian` applies.
    The source must be compatible (zero mean) up to compat_tol relative to
    its absolute integral; anything larger is a caller error, not something
    to silently project away.
    """
    g = np.asarray(source, dtype=float)
    if g.shape != grid.shape:
        raise ValueError("source shape does not match the grid")
    total = integrate(g, grid)
    scale = integrate(np.abs(g), grid)
    if abs(total) > compat_tol * max(scale, np.finfo(float).tiny):
        raise ValueError(
            "incompatible source: integral %.3e exceeds %.1e of ||source||_1"
            % (total, compat_tol)
        )
    rhs = g - g.mean()
    ghat = dctn(rhs, type=2, norm="ortho")
    denom = np.zeros(grid.shape)
    for j, n in enumerate(grid.shape):
        lam = (4.0 / grid.spacing**2) * np.sin(np.pi * np.arange(n) / (2 * n)) ** 2
        shape = [1] * grid.ndim
        shape[j] = n
        denom = denom + lam.reshape(shape)
    denom.flat[0] = 1.0
    vhat = ghat / denom
    vhat.flat[0] = 0.0
    v = idctn(vhat, type=2, norm="ortho")
    return v - v.mean()


@dataclass
class ScalarField:
    """A scalar sample on every cell of a grid, with the operations bound."""

    grid: Grid
    values: np.ndarray = dataclass_field(repr=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.grid.shape:
            raise ValueError("values shape does not match the grid")

    @classmethod
    def from_function(cls, grid: Grid, fn) -> "ScalarField":
        return cls(grid, np.asarray(fn(*grid.mesh()), dtype=float))

    @classmethod
    def full(cls, grid: Grid, value: float) -> "ScalarField":
        return cls(grid, np.full(grid.shape, float(value)))

    def laplacian(self) -> np.ndarray:
        return laplacian(self.values, self.grid.spacing)

    def gradient(self) -> tuple[np.ndarray, ...]:
        return gradient(self.values, self.grid.spacing)

    def integrate(self) -> float:
        return integrate(self.values, self.grid)

    def mean(self) -> float:
        return float(self.values.mean())

    def sample(self, points: np.ndarray) -> np.ndarray:
        return sample(self.values, self.grid, points)

    def save(self, path) -> None:
        np.savez(
            path,
            origin=np.asarray(self.grid.origin),
            spacing=np.asarray(self.grid.spacing),
            values=self.values,
        )

    @classmethod
    def load(cls, path) -> "ScalarField":
        with np.load(path) as blob:
            origin = tuple(float(x) for x in np.atleast_1d(blob["origin"]))
            spacing = float(blob["spacing"])
            values = blob["values"]
        grid = Grid(origin, spacing, values.shape)
        return cls(grid, values)
