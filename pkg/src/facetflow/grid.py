"""Uniform tensor grids, nodal fields and the discrete calculus built on them.

Nodes of a grid with ``cells = (n1, ..., nd)`` are stored as an array of
shape ``(n1+1, ..., nd+1)``; the flat node index is the C-order index into
that array.  Node ``i`` along axis ``a`` sits at ``x = i * h_a``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np


@dataclass(frozen=True)
class Grid:
    """Uniform grid on ``(0, L1)`` or ``(0, L1) x (0, L2)``."""

    dim: int
    lengths: tuple[float, ...]
    cells: tuple[int, ...]

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError(f"dim must be 1 or 2, got {self.dim}")
        if len(self.lengths) != self.dim or len(self.cells) != self.dim:
            raise ValueError("lengths and cells must have one entry per axis")
        for L in self.lengths:
            if not (np.isfinite(L) and L > 0):
                raise ValueError(f"lengths must be positive, got {self.lengths}")
        for n in self.cells:
            if int(n) != n or n < 2:
                raise ValueError(f"need at least 2 cells per axis (one interior node), got {self.cells}")

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(L / n for L, n in zip(self.lengths, self.cells))

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(n + 1 for n in self.cells)

    @property
    def node_count(self) -> int:
        return int(np.prod(self.shape))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @cached_property
    def boundary_mask(self) -> np.ndarray:
        mask = np.zeros(self.shape, dtype=bool)
        for axis in range(self.dim):
            idx = [slice(None)] * self.dim
            idx[axis] = 0
            mask[tuple(idx)] = True
            idx[axis] = -1
            mask[tuple(idx)] = True
        mask.flags.writeable = False
        return mask

    @property
    def interior_mask(self) -> np.ndarray:
        return ~self.boundary_mask

    @property
    def boundary_index_set(self) -> frozenset[int]:
        return frozenset(np.flatnonzero(self.boundary_mask).tolist())

    @property
    def interior(self) -> tuple[slice, ...]:
        """Index tuple selecting the interior block of a node array."""
        return (slice(1, -1),) * self.dim

    def axes(self) -> list[np.ndarray]:
        return [np.arange(n + 1) * h for n, h in zip(self.cells, self.spacing)]

    @cached_property
    def coords(self) -> tuple[np.ndarray, ...]:
        """Node coordinates, one array of grid shape per axis."""
        out = np.meshgrid(*self.axes(), indexing="ij")
        for a in out:
            a.flags.writeable = False
        return tuple(out)

    @cached_property
    def trapezoid_weights(self) -> np.ndarray:
        w = np.ones(())
        for n, h in zip(self.cells, self.spacing):
            w1 = np.full(n + 1, h)
            w1[0] = w1[-1] = 0.5 * h
            w = np.multiply.outer(w, w1)
        w.flags.writeable = False
        return w

    def zeros(self) -> np.ndarray:
        return np.zeros(self.shape)

    def sample(self, fn) -> np.ndarray:
        """Evaluate ``fn(*coords)`` on the nodes, broadcasting scalars."""
        return np.broadcast_to(np.asarray(fn(*self.coords), dtype=float), self.shape).copy()


def build_grid(dim: int, lengths, cells) -> Grid:
    lengths = tuple(float(L) for L in np.atleast_1d(lengths))
    cells = tuple(int(n) for n in np.atleast_1d(cells))
    return Grid(int(dim), lengths, cells)


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Nodal values of a scalar function on ``grid``.  Immutable."""

    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64)
        if v.size != self.grid.node_count:
            raise ValueError(f"expected {self.grid.node_count} values, got {v.size}")
        v = v.reshape(self.grid.shape)
        if not np.all(np.isfinite(v)):
            bad = int(np.flatnonzero(~np.isfinite(v))[0])
            raise ValueError(f"non-finite value at node {bad}")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @classmethod
    def from_function(cls, grid: Grid, fn) -> "ScalarField":
        return cls(grid, grid.sample(fn))

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)

    def boundary_values(self) -> np.ndarray:
        return self.values[self.grid.boundary_mask]


def values_of(f) -> np.ndarray:
    return f.values if isinstance(f, ScalarField) else np.asarray(f, dtype=np.float64)


def _grid_of(f, grid):
    if grid is not None:
        return grid
    if isinstance(f, ScalarField):
        return f.grid
    raise TypeError("a Grid is required when passing a bare array")


# ---------------------------------------------------------------------------
# stencils


def laplacian_interior(v: np.ndarray, grid: Grid) -> np.ndarray:
    """5-point (3-point in 1D) Laplacian on the interior block only."""
    out = np.zeros(tuple(n - 1 for n in grid.cells))
    for axis, h in enumerate(grid.spacing):
        c = [slice(1, -1)] * grid.dim
        lo = list(c)
        hi = list(c)
        lo[axis] = slice(None, -2)
        hi[axis] = slice(2, None)
        out += (v[tuple(hi)] - 2.0 * v[tuple(c)] + v[tuple(lo)]) / (h * h)
    return out


def apply_laplacian(f, grid: Grid | None = None) -> np.ndarray:
    """Discrete Laplacian at interior nodes; boundary entries are NaN (unset)."""
    grid = _grid_of(f, grid)
    v = values_of(f).reshape(grid.shape)
    out = np.full(grid.shape, np.nan)
    out[grid.interior] = laplacian_interior(v, grid)
    return out


def integrate(f, grid: Grid | None = None) -> float:
    """Tensor-product trapezoidal rule."""
    grid = _grid_of(f, grid)
    return float(np.sum(grid.trapezoid_weights * values_of(f).reshape(grid.shape)))


def edge_differences(v: np.ndarray, grid: Grid) -> list[np.ndarray]:
    """Forward difference quotients on the edges of each axis."""
    return [np.diff(v, axis=a) / h for a, h in enumerate(grid.spacing)]


def edge_weights(grid: Grid, axis: int) -> np.ndarray:
    """Quadrature weight of each edge along ``axis``.

    An edge along ``axis`` gets length ``h_axis`` times the trapezoid weight
    of its position in the transverse directions.
    """
    w = np.ones(())
    for a, (n, h) in enumerate(zip(grid.cells, grid.spacing)):
        if a == axis:
            w1 = np.full(n, h)
        else:
            w1 = np.full(n + 1, h)
            w1[0] = w1[-1] = 0.5 * h
        w = np.multiply.outer(w, w1)
    return w


def edge_average(v: np.ndarray, axis: int) -> np.ndarray:
    lo = [slice(None)] * v.ndim
    hi = [slice(None)] * v.ndim
    lo[axis] = slice(None, -1)
    hi[axis] = slice(1, None)
    return 0.5 * (v[tuple(lo)] + v[tuple(hi)])


def edge_midpoints(grid: Grid, axis: int) -> tuple[np.ndarray, ...]:
    """Coordinates of the midpoints of the edges along ``axis``."""
    axes = grid.axes()
    axes[axis] = 0.5 * (axes[axis][1:] + axes[axis][:-1])
    return tuple(np.meshgrid(*axes, indexing="ij"))


def gradient_energy(f, grid: Grid | None = None, weight=None) -> float:
    """``sum_edges w_e * (difference quotient)^2 * edge measure``.

    With ``weight=None`` this is the discrete ``int |grad f|^2``; a nodal
    ``weight`` is averaged onto the edges.
    """
    grid = _grid_of(f, grid)
    v = values_of(f).reshape(grid.shape)
    total = 0.0
    for axis, d in enumerate(edge_differences(v, grid)):
        w = edge_weights(grid, axis)
        if weight is not None:
            w = w * edge_average(np.asarray(weight).reshape(grid.shape), axis)
        total += float(np.sum(w * d * d))
    return total


def dirichlet_energy(f, grid: Grid | None = None) -> float:
    """``E(f) = 1/2 int |grad f|^2`` from edge-midpoint differences."""
    return 0.5 * gradient_energy(f, grid)


def smooth(v: np.ndarray, grid: Grid, passes: int) -> np.ndarray:
    """Nearest-neighbour averaging with boundary nodes held fixed."""
    out = np.array(v, dtype=float, copy=True).reshape(grid.shape)
    inner = grid.interior
    for _ in range(passes):
        acc = np.zeros(tuple(n - 1 for n in grid.cells))
        for axis in range(grid.dim):
            c = [slice(1, -1)] * grid.dim
            lo = list(c)
            hi = list(c)
            lo[axis] = slice(None, -2)
            hi[axis] = slice(2, None)
            acc += 0.25 * (out[tuple(lo)] + 2.0 * out[tuple(c)] + out[tuple(hi)])
        out[inner] = acc / grid.dim
    return out
