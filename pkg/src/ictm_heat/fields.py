"""Uniform tensor grids and nodal fields.

Conventions used across the package:

* the domain is the box [0, L1] x [0, L2] (x [0, L3]), discretized by
  m_i uniform cells per axis, so axis i carries m_i + 1 nodes;
* nodal values are stored as flat 1-D arrays in row-major order with the
  x index fastest: flat = i + (m1+1) * (j + (m2+1) * k);
* fields are immutable after construction, operations return new fields;
* discrete integrals over nodes use the uniform weight cell_volume per
  node (the FEM module uses its own boundary-aware lumped weights where
  quadrature accuracy matters).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "GridSpec",
    "ScalarField",
    "IndicatorField",
    "make_grid",
    "node_index",
    "node_multi_index",
    "node_positions",
    "field_diff_norm",
    "discrete_volume",
]


@dataclass(frozen=True)
class GridSpec:
    """Uniform grid on a 2-D or 3-D box.

    cells holds the cell counts per axis (>= 4 each), lengths the box
    side lengths. Node counts, spacings and the cell volume are derived.
    """

    dim: int
    cells: tuple
    lengths: tuple

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise ValueError(f"grid dim must be 2 or 3, got {self.dim}")
        cells = tuple(int(m) for m in self.cells)
        lengths = tuple(float(L) for L in self.lengths)
        if len(cells) != self.dim or len(lengths) != self.dim:
            raise ValueError(
                f"cells/lengths must have {self.dim} entries, got {self.cells}/{self.lengths}"
            )
        if any(m < 4 for m in cells):
            raise ValueError(f"need at least 4 cells per axis, got {cells}")
        if any(not np.isfinite(L) or L <= 0.0 for L in lengths):
            raise ValueError(f"box lengths must be positive, got {lengths}")
        object.__setattr__(self, "cells", cells)
        object.__setattr__(self, "lengths", lengths)

    @property
    def shape(self) -> tuple:
        """Nodes per axis, (m1+1, m2+1[, m3+1])."""
        return tuple(m + 1 for m in self.cells)

    @property
    def n_nodes(self) -> int:
        n = 1
        for s in self.shape:
            n *= s
        return n

    @property
    def spacing(self) -> tuple:
        return tuple(L / m for L, m in zip(self.lengths, self.cells))

    @property
    def cell_volume(self) -> float:
        v = 1.0
        for h in self.spacing:
            v *= h
        return v

    def axis_coords(self, axis: int) -> np.ndarray:
        """Node coordinates along one axis."""
        m = self.cells[axis]
        return np.arange(m + 1) * (self.lengths[axis] / m)


def make_grid(dim: int, cells_per_axis, lengths=None) -> GridSpec:
    """Build a GridSpec; cells_per_axis may be a scalar or a per-axis sequence."""
    if np.isscalar(cells_per_axis):
        cells = (int(cells_per_axis),) * dim
    else:
        cells = tuple(int(m) for m in cells_per_axis)
    if lengths is None:
        lengths = (1.0,) * dim
    elif np.isscalar(lengths):
        lengths = (float(lengths),) * dim
    else:
        lengths = tuple(float(L) for L in lengths)
    return GridSpec(dim=dim, cells=cells, lengths=lengths)


def node_index(grid: GridSpec, multi) -> np.ndarray:
    """Flat node index from per-axis indices (arrays broadcast)."""
    shape = grid.shape
    multi = [np.asarray(ix) for ix in multi]
    if len(multi) != grid.dim:
        raise ValueError(f"expected {grid.dim} index arrays, got {len(multi)}")
    for ax, ix in enumerate(multi):
        if np.any(ix < 0) or np.any(ix >= shape[ax]):
            raise ValueError(f"node index out of range on axis {ax}")
    flat = multi[-1]
    for ax in range(grid.dim - 2, -1, -1):
        flat = multi[ax] + shape[ax] * flat
    return flat


def node_multi_index(grid: GridSpec, flat) -> tuple:
    """Per-axis indices (i, j[, k]) from flat node indices."""
    flat = np.asarray(flat)
    if np.any(flat < 0) or np.any(flat >= grid.n_nodes):
        raise ValueError("flat node index out of range")
    out = []
    rest = flat
    for s in grid.shape:
        out.append(rest % s)
        rest = rest // s
    return tuple(out)


def node_positions(grid: GridSpec) -> np.ndarray:
    """(n_nodes, dim) array of node coordinates, flat ordering."""
    axes = [grid.axis_coords(ax) for ax in range(grid.dim)]
    # meshgrid with ij indexing puts axis 0 slowest; flat order wants x fastest
    mesh = np.meshgrid(*axes, indexing="ij")
    cols = [m.transpose().reshape(-1) for m in mesh]
    return np.stack(cols, axis=1)


def _freeze(values: np.ndarray) -> np.ndarray:
    out = np.array(values, copy=True)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class ScalarField:
    """Immutable nodal scalar field (float64, flat ordering)."""

    grid: GridSpec
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.ndim != 1 or vals.shape[0] != self.grid.n_nodes:
            raise ValueError(
                f"scalar field needs {self.grid.n_nodes} flat values, got shape {vals.shape}"
            )
        if not np.all(np.isfinite(vals)):
            raise ValueError("scalar field values must be finite")
        object.__setattr__(self, "values", _freeze(vals))

    def as_array(self) -> np.ndarray:
        """Values reshaped to (n3,) n2, n1 with x fastest (read-only view)."""
        return self.values.reshape(self.grid.shape[::-1])


@dataclass(frozen=True)
class IndicatorField:
    """Immutable binary nodal field; values in {0, 1}, dtype uint8."""

    grid: GridSpec
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        vals = np.asarray(self.values)
        if vals.ndim != 1 or vals.shape[0] != self.grid.n_nodes:
            raise ValueError(
                f"indicator field needs {self.grid.n_nodes} flat values, got shape {vals.shape}"
            )
        as_u8 = vals.astype(np.uint8)
        if not np.array_equal(as_u8, vals) or np.any(as_u8 > 1):
            raise ValueError("indicator field values must be 0 or 1")
        object.__setattr__(self, "values", _freeze(as_u8))

    def popcount(self) -> int:
        return int(np.count_nonzero(self.values))

    def as_array(self) -> np.ndarray:
        return self.values.reshape(self.grid.shape[::-1])

    def to_scalar(self) -> ScalarField:
        return ScalarField(self.grid, self.values.astype(np.float64))


def _check_same_grid(a, b):
    if a.grid != b.grid:
        raise ValueError("fields live on different grids")


def field_diff_norm(a, b) -> float:
    """Volume-weighted l2 distance sqrt(sum (a-b)^2 * cell_volume)."""
    _check_same_grid(a, b)
    da = a.values.astype(np.float64) - b.values.astype(np.float64)
    return float(np.sqrt(np.dot(da, da) * a.grid.cell_volume))


def discrete_volume(chi: IndicatorField) -> float:
    """Nodal volume popcount * cell_volume (uniform lumped measure)."""
    return chi.popcount() * chi.grid.cell_volume
