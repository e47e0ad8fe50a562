"""Volume-constrained thresholding and prediction sets.

Thresholding picks the target_ones nodes with the smallest potential
Phi, which minimizes sum(chi * Phi) * cell_volume over all indicator
fields of that exact volume. Ties at the cut are broken by ascending
node index, so the result is deterministic.

The prediction sets compare the thresholded field with the current one:
A collects nodes switching 0 -> 1 (ordered by ascending Phi, most
favorable first), B nodes switching 1 -> 0 (descending Phi). Volume
preservation makes |A| = |B| exact, and swapping all N pairs reproduces
the thresholded field bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fields import IndicatorField, ScalarField

__all__ = ["ThresholdResult", "PredictionSets", "select_smallest", "volume_threshold", "prediction_sets"]


def select_smallest(values: np.ndarray, k: int) -> np.ndarray:
    """Indices of the k smallest entries; ties broken by ascending index."""
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 1:
        raise ValueError("selection expects a flat array")
    if not 0 <= k <= values.size:
        raise ValueError(f"selection count {k} out of range for {values.size} entries")
    order = np.argsort(values, kind="stable")
    return order[:k]


@dataclass(frozen=True)
class ThresholdResult:
    """Thresholded field, the cut level sigma, and the node budget."""

    chi_new: IndicatorField
    sigma: float
    target_ones: int


def volume_threshold(phi: ScalarField, target_ones: int) -> ThresholdResult:
    """Indicator of the target_ones smallest-Phi nodes.

    sigma is the largest selected Phi value (-inf for an empty budget);
    every selected node satisfies Phi <= sigma and every unselected node
    Phi >= sigma, up to the index tie-break at equality.
    """
    n = phi.grid.n_nodes
    if not 0 <= target_ones <= n:
        raise ValueError(f"volume target {target_ones} out of range for {n} nodes")
    chosen = select_smallest(phi.values, target_ones)
    vals = np.zeros(n, dtype=np.uint8)
    vals[chosen] = 1
    sigma = float(phi.values[chosen[-1]]) if target_ones > 0 else float("-inf")
    return ThresholdResult(IndicatorField(phi.grid, vals), sigma, target_ones)


@dataclass(frozen=True)
class PredictionSets:
    """Swap candidates between the current and thresholded fields.

    A: nodes with chi = 0 entering the selection, ascending Phi;
    B: nodes with chi = 1 leaving it, descending Phi; N = |A| = |B|.
    """

    A: np.ndarray
    B: np.ndarray
    N: int

    def __post_init__(self):
        a = np.asarray(self.A, dtype=np.int64)
        b = np.asarray(self.B, dtype=np.int64)
        if a.size != b.size or a.size != self.N:
            raise ValueError("prediction sets must satisfy |A| = |B| = N")
        a.flags.writeable = False
        b.flags.writeable = False
        object.__setattr__(self, "A", a)
        object.__setattr__(self, "B", b)


def prediction_sets(phi: ScalarField, chi: IndicatorField, target_ones: int) -> PredictionSets:
    """Ordered swap sets from thresholding phi at the current volume."""
    if phi.grid != chi.grid:
        raise ValueError("phi and chi live on different grids")
    if chi.popcount() != target_ones:
        raise ValueError(
            f"current field carries {chi.popcount()} nodes but the volume target is {target_ones}"
        )
    thr = volume_threshold(phi, target_ones)
    new = thr.chi_new.values
    old = chi.values
    a_idx = np.flatnonzero((new == 1) & (old == 0))
    b_idx = np.flatnonzero((new == 0) & (old == 1))
    a_idx = a_idx[np.argsort(phi.values[a_idx], kind="stable")]
    b_idx = b_idx[np.argsort(-phi.values[b_idx], kind="stable")]
    return PredictionSets(A=a_idx, B=b_idx, N=a_idx.size)
