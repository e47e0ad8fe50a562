"""Volume-exact thresholding: selection optimality by exhaustive enumeration,
tie determinism, and the swap-set construction."""

from itertools import combinations

import numpy as np
import pytest

from ictm_heat import (
    IndicatorField,
    PredictionSets,
    ScalarField,
    make_grid,
    prediction_sets,
    select_smallest,
    volume_threshold,
)


def test_select_smallest_matches_stable_sort_oracle():
    rng = np.random.default_rng(1)
    for trial in range(20):
        n = int(rng.integers(5, 40))
        # integer draws force ties
        vals = rng.integers(0, 6, size=n).astype(float)
        k = int(rng.integers(0, n + 1))
        got = select_smallest(vals, k)
        want = np.lexsort((np.arange(n), vals))[:k]
        assert np.array_equal(got, want)


def test_select_smallest_validation():
    with pytest.raises(ValueError):
        select_smallest(np.zeros(5), 6)
    with pytest.raises(ValueError):
        select_smallest(np.zeros(5), -1)
    with pytest.raises(ValueError):
        select_smallest(np.zeros((2, 3)), 1)


def test_selection_is_optimal_by_enumeration():
    # over all index sets of the same size, the selection minimizes sum(phi)
    rng = np.random.default_rng(2)
    for n, k in [(10, 3), (12, 6), (14, 1), (9, 9), (8, 0)]:
        vals = np.round(rng.normal(size=n), 1)  # rounding forces ties
        got = select_smallest(vals, k)
        got_sum = vals[got].sum()
        best = min((vals[list(c)].sum() for c in combinations(range(n), k)), default=0.0)
        assert got_sum == pytest.approx(best, abs=1e-12)


def test_volume_threshold_cut_properties():
    grid = make_grid(2, 8)
    rng = np.random.default_rng(3)
    phi = ScalarField(grid, np.round(rng.normal(size=grid.n_nodes), 1))
    for target in (0, 1, 17, grid.n_nodes):
        res = volume_threshold(phi, target)
        chi = res.chi_new
        assert chi.popcount() == target
        assert res.target_ones == target
        sel = chi.values.astype(bool)
        if target == 0:
            assert res.sigma == float("-inf")
        else:
            assert res.sigma == phi.values[sel].max()
            assert np.all(phi.values[~sel] >= res.sigma)
    with pytest.raises(ValueError):
        volume_threshold(phi, grid.n_nodes + 1)


def test_volume_threshold_tie_break_is_by_index():
    grid = make_grid(2, 4)
    vals = np.full(grid.n_nodes, 2.0)
    vals[7] = 1.0
    phi = ScalarField(grid, vals)
    res = volume_threshold(phi, 3)
    # node 7 first, then the lowest-index ties
    assert set(np.flatnonzero(res.chi_new.values)) == {7, 0, 1}
    again = volume_threshold(phi, 3)
    assert np.array_equal(res.chi_new.values, again.chi_new.values)


def test_prediction_sets_two_node_example():
    # chi = [1, 0, ...], phi = [5, 1, big...], budget 1: the single swap
    # moves the node from index 0 to index 1
    grid = make_grid(2, 4)
    chi_vals = np.zeros(grid.n_nodes, dtype=np.uint8)
    chi_vals[0] = 1
    phi_vals = np.arange(grid.n_nodes, dtype=float) + 100.0
    phi_vals[0] = 5.0
    phi_vals[1] = 1.0
    sets = prediction_sets(ScalarField(grid, phi_vals), IndicatorField(grid, chi_vals), 1)
    assert sets.N == 1
    assert sets.A.tolist() == [1]
    assert sets.B.tolist() == [0]


def test_prediction_sets_match_definition_and_reproduce_threshold():
    grid = make_grid(2, 8)
    rng = np.random.default_rng(5)
    target = 30
    chi_vals = np.zeros(grid.n_nodes, dtype=np.uint8)
    chi_vals[rng.permutation(grid.n_nodes)[:target]] = 1
    chi = IndicatorField(grid, chi_vals)
    phi = ScalarField(grid, np.round(rng.normal(size=grid.n_nodes), 1))

    sets = prediction_sets(phi, chi, target)
    thr = volume_threshold(phi, target).chi_new

    a_def = np.flatnonzero((thr.values == 1) & (chi.values == 0))
    b_def = np.flatnonzero((thr.values == 0) & (chi.values == 1))
    assert set(sets.A) == set(a_def)
    assert set(sets.B) == set(b_def)
    assert sets.N == a_def.size == b_def.size
    # orders: A ascending phi, B descending phi (stable in index)
    assert np.array_equal(sets.A, a_def[np.argsort(phi.values[a_def], kind="stable")])
    assert np.array_equal(sets.B, b_def[np.argsort(-phi.values[b_def], kind="stable")])

    # swapping all N pairs reproduces the thresholded field bit for bit
    swapped = chi.values.copy()
    swapped[sets.A] = 1
    swapped[sets.B] = 0
    assert np.array_equal(swapped, thr.values)


def test_prediction_sets_empty_when_already_optimal():
    grid = make_grid(2, 4)
    rng = np.random.default_rng(6)
    chi_vals = (rng.random(grid.n_nodes) < 0.3).astype(np.uint8)
    chi = IndicatorField(grid, chi_vals)
    phi = ScalarField(grid, 1.0 - chi_vals.astype(float))
    sets = prediction_sets(phi, chi, chi.popcount())
    assert sets.N == 0
    assert sets.A.size == 0 and sets.B.size == 0


def test_prediction_sets_validation():
    grid = make_grid(2, 4)
    chi = IndicatorField(grid, np.zeros(grid.n_nodes))
    phi = ScalarField(grid, np.zeros(grid.n_nodes))
    with pytest.raises(ValueError):
        prediction_sets(phi, chi, 3)  # popcount mismatch
    other = make_grid(2, 5)
    with pytest.raises(ValueError):
        prediction_sets(ScalarField(other, np.zeros(other.n_nodes)), chi, 0)
    with pytest.raises(ValueError):
        PredictionSets(A=np.array([1, 2]), B=np.array([3]), N=2)


def test_prediction_sets_arrays_frozen():
    sets = PredictionSets(A=np.array([1]), B=np.array([2]), N=1)
    with pytest.raises(ValueError):
        sets.A[0] = 5
