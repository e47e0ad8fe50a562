"""Benchmark problem definitions and initial designs.

Three conduction layouts on the unit box:

* ``area_to_point``: 2-D, heat sink on the segment of the left edge with
  y within 5% of the midpoint (inclusive window [0.45, 0.55] L2);
* ``area_to_sides``: 2-D, the whole boundary is a sink;
* ``volume_to_surface``: 3-D, sink patch on the z = 0 face with x and y
  each within the [0.45, 0.55] window.

Everywhere else the boundary is insulated. The high-conductivity phase
(kappa1) carries a weak source q1, the matrix phase (kappa2) the strong
source q2, and beta fixes the volume budget of phase 1 as a node count
round(beta * n_nodes), half-up.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fem import BoundarySpec, boundary_nodes
from .fields import GridSpec, IndicatorField, node_index, node_positions

__all__ = [
    "ProblemCase",
    "volume_target",
    "make_area_to_point",
    "make_area_to_sides",
    "make_volume_to_surface",
    "initial_guess",
    "CASE_BUILDERS",
]

_WINDOW = (0.45, 0.55)


@dataclass(frozen=True)
class ProblemCase:
    """Geometry, boundary set, material pair and volume budget."""

    name: str
    grid: GridSpec
    bc: BoundarySpec
    kappa1: float
    kappa2: float
    q1: float
    q2: float
    beta: float

    def __post_init__(self):
        if self.kappa1 <= 0.0 or self.kappa2 <= 0.0:
            raise ValueError("conductivities must be positive")
        if not 0.0 < self.beta < 1.0:
            raise ValueError(f"volume fraction beta must lie in (0, 1), got {self.beta}")
        if self.bc.grid != self.grid:
            raise ValueError("boundary spec grid does not match case grid")


def volume_target(case: ProblemCase) -> int:
    """Node budget round(beta * n_nodes), half rounded up."""
    return int(np.floor(case.beta * case.grid.n_nodes + 0.5))


def _window_indices(m: int, length: float) -> np.ndarray:
    """Axis indices whose coordinate falls in [0.45, 0.55] * length (inclusive)."""
    coords = np.arange(m + 1) * (length / m)
    lo = _WINDOW[0] * length - 1e-12 * length
    hi = _WINDOW[1] * length + 1e-12 * length
    return np.flatnonzero((coords >= lo) & (coords <= hi))


def make_area_to_point(grid: GridSpec, kappa1=10.0, kappa2=1.0, q1=1.0, q2=100.0,
                       beta=0.2) -> ProblemCase:
    """2-D design with a small sink segment centered on the left edge."""
    if grid.dim != 2:
        raise ValueError("area_to_point needs a 2-D grid")
    j = _window_indices(grid.cells[1], grid.lengths[1])
    nodes = node_index(grid, (np.zeros_like(j), j))
    bc = BoundarySpec(grid, nodes)
    return ProblemCase("area_to_point", grid, bc, kappa1, kappa2, q1, q2, beta)


def make_area_to_sides(grid: GridSpec, kappa1=10.0, kappa2=1.0, q1=1.0, q2=100.0,
                       beta=0.2) -> ProblemCase:
    """2-D design with the entire boundary acting as the sink."""
    if grid.dim != 2:
        raise ValueError("area_to_sides needs a 2-D grid")
    bc = BoundarySpec(grid, boundary_nodes(grid))
    return ProblemCase("area_to_sides", grid, bc, kappa1, kappa2, q1, q2, beta)


def make_volume_to_surface(grid: GridSpec, kappa1=20.0, kappa2=1.0, q1=1.0, q2=100.0,
                           beta=0.2) -> ProblemCase:
    """3-D design with a square sink patch centered on the z = 0 face."""
    if grid.dim != 3:
        raise ValueError("volume_to_surface needs a 3-D grid")
    i = _window_indices(grid.cells[0], grid.lengths[0])
    j = _window_indices(grid.cells[1], grid.lengths[1])
    ii, jj = np.meshgrid(i, j, indexing="ij")
    nodes = node_index(grid, (ii.reshape(-1), jj.reshape(-1), np.zeros(ii.size, dtype=int)))
    bc = BoundarySpec(grid, nodes)
    return ProblemCase("volume_to_surface", grid, bc, kappa1, kappa2, q1, q2, beta)


CASE_BUILDERS = {
    "area_to_point": make_area_to_point,
    "area_to_sides": make_area_to_sides,
    "volume_to_surface": make_volume_to_surface,
}


def _stripes(grid: GridSpec, target: int, n_stripes: int = 5) -> np.ndarray:
    """Vertical bars (x-normal slabs in 3-D) hitting the node budget exactly.

    Full columns are grouped into n_stripes evenly spaced bars; a single
    partially filled column (bottom-up) absorbs the remainder.
    """
    n1 = grid.shape[0]
    col_size = grid.n_nodes // n1
    cols_full, rem = divmod(target, col_size)
    total_cols = cols_full + (1 if rem else 0)

    col_ids: list[int] = []
    seen = set()
    for s in range(n_stripes):
        width = total_cols // n_stripes + (1 if s < total_cols % n_stripes else 0)
        start = (s * n1) // n_stripes
        for c in range(start, start + width):
            if c < n1 and c not in seen:
                col_ids.append(c)
                seen.add(c)
    c = 0
    while len(col_ids) < total_cols:
        if c not in seen:
            col_ids.append(c)
            seen.add(c)
        c += 1

    vals = np.zeros(grid.n_nodes, dtype=np.uint8)
    for c in col_ids[: cols_full]:
        vals[c + n1 * np.arange(col_size)] = 1
    if rem:
        vals[col_ids[-1] + n1 * np.arange(rem)] = 1
    return vals


def _block(grid: GridSpec, target: int) -> np.ndarray:
    """Centered max-norm ball of exactly target nodes (index tie-break)."""
    pos = node_positions(grid)
    center = 0.5 * np.asarray(grid.lengths)
    dist = np.max(np.abs(pos - center), axis=1)
    order = np.lexsort((np.arange(grid.n_nodes), dist))
    vals = np.zeros(grid.n_nodes, dtype=np.uint8)
    vals[order[:target]] = 1
    return vals


def _random(grid: GridSpec, target: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    vals = np.zeros(grid.n_nodes, dtype=np.uint8)
    vals[rng.permutation(grid.n_nodes)[:target]] = 1
    return vals


def initial_guess(kind: str, grid: GridSpec, target_ones: int, seed: int = 0) -> IndicatorField:
    """Deterministic initial design with exactly target_ones nodes set."""
    if not 0 <= target_ones <= grid.n_nodes:
        raise ValueError(f"volume target {target_ones} out of range for {grid.n_nodes} nodes")
    if kind == "stripes":
        vals = _stripes(grid, target_ones)
    elif kind == "block":
        vals = _block(grid, target_ones)
    elif kind == "random":
        vals = _random(grid, target_ones, seed)
    else:
        raise ValueError(f"unknown initial design {kind!r} (stripes, block, random)")
    return IndicatorField(grid, vals)
