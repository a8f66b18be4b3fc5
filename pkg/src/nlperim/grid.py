"""Uniform grids, indicator sets, grid functions, and discrete operators.

Cells are axis-aligned cubes of side h; the cell with multi-index i has
center origin + (i + 1/2) * h.  Functions are one value per cell and are
extended by zero outside the grid box wherever an operator needs values
beyond the box.  All operations are pure and return fresh arrays.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np


@dataclass(frozen=True)
class Grid:
    dim: int
    h: float
    shape: tuple            # cells per axis
    origin: tuple           # lower corner of the grid box

    def __post_init__(self):
        if self.h <= 0:
            raise ValueError("spacing h must be positive")
        if len(self.shape) != self.dim or len(self.origin) != self.dim:
            raise ValueError("shape/origin length must equal dim")
        if any(int(n) <= 0 for n in self.shape):
            raise ValueError("grid needs at least one cell per axis")

    @property
    def cell_volume(self) -> float:
        return self.h ** self.dim

    @property
    def n_cells(self) -> int:
        return int(np.prod(self.shape))

    def axis_centers(self, axis: int) -> np.ndarray:
        n = self.shape[axis]
        return self.origin[axis] + (np.arange(n) + 0.5) * self.h

    def centers(self) -> np.ndarray:
        """Cell centers as an array of shape (*shape, dim)."""
        axes = [self.axis_centers(a) for a in range(self.dim)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack(mesh, axis=-1)

    @property
    def box(self) -> tuple:
        lo = tuple(self.origin)
        hi = tuple(self.origin[a] + self.shape[a] * self.h for a in range(self.dim))
        return lo, hi

    def compatible(self, other: "Grid") -> bool:
        if self.dim != other.dim or not math.isclose(self.h, other.h, rel_tol=1e-12):
            return False
        return all(abs((self.origin[a] - other.origin[a]) / self.h - round((self.origin[a] - other.origin[a]) / self.h)) < 1e-9
                   for a in range(self.dim))


def make_grid(dim: int, h: float, lo, hi) -> Grid:
    """Grid covering the box [lo, hi] with spacing h (snapped to whole cells)."""
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    hi = np.atleast_1d(np.asarray(hi, dtype=float))
    if lo.shape != (dim,) or hi.shape != (dim,):
        raise ValueError("lo/hi must have one entry per axis")
    shape = tuple(max(1, int(round((hi[a] - lo[a]) / h))) for a in range(dim))
    return Grid(dim=dim, h=h, shape=shape, origin=tuple(float(x) for x in lo))


@dataclass(frozen=True)
class GridSet:
    grid: Grid
    cells: np.ndarray       # boolean, shape == grid.shape

    def __post_init__(self):
        if tuple(self.cells.shape) != tuple(self.grid.shape):
            raise ValueError("occupancy shape does not match grid")
        if self.cells.dtype != np.bool_:
            object.__setattr__(self, "cells", self.cells.astype(bool))

    @property
    def count(self) -> int:
        return int(np.count_nonzero(self.cells))

    @property
    def volume(self) -> float:
        return self.count * self.grid.cell_volume

    def complement(self) -> "GridSet":
        """Complement within the grid box."""
        return GridSet(self.grid, ~self.cells)

    def indicator(self) -> "GridFunction":
        return GridFunction(self.grid, self.cells.astype(float))

    def occupied_centers(self) -> np.ndarray:
        return self.grid.centers()[self.cells]


@dataclass(frozen=True)
class GridFunction:
    grid: Grid
    values: np.ndarray      # float, shape == grid.shape

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if tuple(vals.shape) != tuple(self.grid.shape):
            raise ValueError("value shape does not match grid")
        if not np.all(np.isfinite(vals)):
            raise ValueError("grid functions must be finite everywhere")
        object.__setattr__(self, "values", vals)

    def lp_norm(self, p: float, region: GridSet | None = None) -> float:
        """(sum |u|^p h^d)^(1/p) over the region (default: whole grid)."""
        vals = self.values if region is None else self.values[region.cells]
        return float(np.sum(np.abs(vals) ** p) * self.grid.cell_volume) ** (1.0 / p)

    def support(self) -> GridSet:
        return GridSet(self.grid, self.values != 0.0)


# --------------------------------------------------------------------------
# Rasterization
# --------------------------------------------------------------------------

def rasterize(grid: Grid, shape) -> GridSet:
    """Rasterize a shape: a cell is occupied iff its center lies inside.

    Shapes: ("ball", r, center), ("box", lo, hi), ("union", [shapes...]).
    An empty rasterization triggers a warning.
    """
    mask = _raster_mask(grid, shape)
    if not mask.any():
        warnings.warn("rasterization produced an empty set", stacklevel=2)
    return GridSet(grid, mask)


def _raster_mask(grid: Grid, shape) -> np.ndarray:
    tag = shape[0]
    centers = grid.centers()
    if tag == "ball":
        _, r, center = shape
        c = np.asarray(center, dtype=float)
        d2 = np.sum((centers - c) ** 2, axis=-1)
        return d2 < r * r
    if tag == "box":
        _, lo, hi = shape
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        m = np.ones(grid.shape, dtype=bool)
        for a in range(grid.dim):
            x = centers[..., a]
            m &= (x > lo[a]) & (x < hi[a])
        return m
    if tag == "union":
        m = np.zeros(grid.shape, dtype=bool)
        for sub in shape[1]:
            m |= _raster_mask(grid, sub)
        return m
    raise ValueError(f"unknown shape {tag!r}")


def ball(r: float, center=None, dim: int | None = None):
    if center is None:
        if dim is None:
            raise ValueError("ball needs a center or a dimension")
        center = (0.0,) * dim
    return ("ball", float(r), tuple(np.atleast_1d(center).astype(float)))


def box(lo, hi):
    return ("box", tuple(np.atleast_1d(lo).astype(float)), tuple(np.atleast_1d(hi).astype(float)))


def union(*shapes):
    return ("union", list(shapes))


# --------------------------------------------------------------------------
# Discrete operators
# --------------------------------------------------------------------------

def shift_array(vals: np.ndarray, shift: Sequence[int]) -> np.ndarray:
    """Array of v(x + shift) with zero padding outside the array bounds."""
    out = np.zeros_like(vals)
    src = []
    dst = []
    for a, s in enumerate(shift):
        n = vals.shape[a]
        s = int(s)
        if abs(s) >= n:
            return out
        if s >= 0:
            src.append(slice(s, n))
            dst.append(slice(0, n - s))
        else:
            src.append(slice(0, n + s))
            dst.append(slice(-s, n))
    out[tuple(dst)] = vals[tuple(src)]
    return out


def shifted_values(u: GridFunction, shift: Sequence[int]) -> np.ndarray:
    """Values of u(x + shift*h) with zero padding outside the grid box."""
    return shift_array(u.values, shift)


def forward_difference(u: GridFunction, shift) -> GridFunction:
    """Difference u(x + shift) - u(x); zero extension beyond the grid box.

    ``shift`` is a length vector whose entries must be integer multiples of
    the spacing per axis.
    """
    shift = np.atleast_1d(np.asarray(shift, dtype=float))
    if shift.shape != (u.grid.dim,):
        raise ValueError("shift must have one entry per axis")
    cells = shift / u.grid.h
    rounded = np.round(cells)
    if not np.allclose(cells, rounded, atol=1e-9):
        raise ValueError("shift must be an integer multiple of the spacing per axis")
    return GridFunction(u.grid, shifted_values(u, rounded.astype(int)) - u.values)


def mollifier_stencil(dim: int, h: float, eps: float):
    """Offsets and weights of the discrete bump (1 - |z/eps|^2)_+^2, mass one."""
    m = int(math.floor(eps / h + 1e-9))
    axes = [np.arange(-m, m + 1)] * dim
    mesh = np.meshgrid(*axes, indexing="ij")
    offsets = np.stack([g.ravel() for g in mesh], axis=-1)
    r2 = np.sum((offsets * h) ** 2, axis=-1) / (eps * eps)
    w = np.maximum(0.0, 1.0 - r2) ** 2
    keep = w > 0
    offsets, w = offsets[keep], w[keep]
    return offsets, w / np.sum(w)


def mollify(u: GridFunction, eps: float) -> GridFunction:
    """Discrete convolution with a non-negative, mass-one bump of radius eps.

    Requires eps >= h.  The stencil accumulates in a fixed lexicographic
    offset order, so results are bit-reproducible.
    """
    if eps < u.grid.h:
        raise ValueError("mollification radius must be at least the grid spacing")
    offsets, weights = mollifier_stencil(u.grid.dim, u.grid.h, eps)
    order = np.lexsort(tuple(offsets[:, a] for a in reversed(range(u.grid.dim))))
    out = np.zeros_like(u.values)
    for idx in order:
        out += weights[idx] * shifted_values(u, offsets[idx])
    return GridFunction(u.grid, out)


def _distance_ranking(grid: Grid) -> np.ndarray:
    """Flat cell indices ranked by center distance to the origin point.

    Ties break lexicographically by cell index, so the ranking (and hence
    rearrangement) is deterministic.
    """
    centers = grid.centers().reshape(-1, grid.dim)
    dist = np.sqrt(np.sum(centers * centers, axis=-1))
    flat = np.arange(len(centers))
    return np.lexsort((flat, np.round(dist / (1e-9 * grid.h)) * (1e-9 * grid.h)))


def rearrange(x):
    """Symmetric-decreasing rearrangement on the grid.

    Sets become the ball-shaped set of equal cell count centered at the
    origin (cells ranked by center distance, ties lexicographic).  Functions
    keep their exact multiset of values, re-laid in decreasing |value| order
    onto the distance ranking.
    """
    if isinstance(x, GridSet):
        ranking = _distance_ranking(x.grid)
        flat = np.zeros(x.grid.n_cells, dtype=bool)
        flat[ranking[: x.count]] = True
        return GridSet(x.grid, flat.reshape(x.grid.shape))
    if isinstance(x, GridFunction):
        ranking = _distance_ranking(x.grid)
        vals = x.values.ravel()
        order = np.argsort(-np.abs(vals), kind="stable")
        flat = np.empty_like(vals)
        flat[ranking] = vals[order]
        return GridFunction(x.grid, flat.reshape(x.grid.shape))
    raise TypeError("rearrange expects a GridSet or GridFunction")


def mean(u: GridFunction, omega: GridSet) -> float:
    """Arithmetic mean of u over the occupied cells of omega."""
    if u.grid is not omega.grid and not u.grid.compatible(omega.grid):
        raise ValueError("function and region live on different grids")
    if omega.count == 0:
        raise ValueError("mean over an empty region")
    return float(np.sum(u.values[omega.cells]) / omega.count)


# --------------------------------------------------------------------------
# File format: header "d h n1 .. nd origin1 .. origind", then row-major values
# --------------------------------------------------------------------------

_BINARY_MAGIC = "#binary"


def _header(grid: Grid) -> str:
    parts = [str(grid.dim), repr(grid.h)] + [str(n) for n in grid.shape] + [repr(o) for o in grid.origin]
    return " ".join(parts)


def _parse_header(line: str) -> Grid:
    toks = line.split()
    d = int(toks[0])
    h = float(toks[1])
    if len(toks) != 2 + 2 * d:
        raise ValueError("grid header must be 'd h n1..nd origin1..origind'")
    shape = tuple(int(t) for t in toks[2:2 + d])
    origin = tuple(float(t) for t in toks[2 + d:2 + 2 * d])
    return Grid(dim=d, h=h, shape=shape, origin=origin)


def save_grid_function(path, u: GridFunction, binary: bool = False) -> None:
    if binary:
        with open(path, "wb") as fh:
            fh.write((_BINARY_MAGIC + "\n").encode())
            fh.write((_header(u.grid) + "\n").encode())
            fh.write(np.ascontiguousarray(u.values, dtype="<f8").tobytes())
        return
    with open(path, "w") as fh:
        fh.write(_header(u.grid) + "\n")
        flat = u.values.ravel()
        for start in range(0, len(flat), 8):
            fh.write(" ".join(repr(float(v)) for v in flat[start:start + 8]) + "\n")


def save_grid_set(path, e: GridSet, binary: bool = False) -> None:
    save_grid_function(path, GridFunction(e.grid, e.cells.astype(float)), binary=binary)


def load_grid_function(path) -> GridFunction:
    with open(path, "rb") as fh:
        first = fh.readline().decode().rstrip("\n")
        if first == _BINARY_MAGIC:
            grid = _parse_header(fh.readline().decode())
            data = np.frombuffer(fh.read(), dtype="<f8")
            if len(data) != grid.n_cells:
                raise ValueError("binary payload size does not match grid")
            return GridFunction(grid, data.reshape(grid.shape).copy())
        grid = _parse_header(first)
        vals = np.array(fh.read().decode().split(), dtype=float)
        if len(vals) != grid.n_cells:
            raise ValueError("value count does not match grid")
        return GridFunction(grid, vals.reshape(grid.shape))


def load_grid_set(path) -> GridSet:
    u = load_grid_function(path)
    vals = u.values
    if not np.all((vals == 0.0) | (vals == 1.0)):
        raise ValueError("set files must contain only 0/1 values")
    return GridSet(u.grid, vals != 0.0)
