#!/usr/bin/env python3
"""
Tests for the k-means search tree and the radius-limited likelihood.

Run with pytest from the project root, or directly:
    python src/test_ann_index.py
"""

import numpy as np
import pytest

from src.ann_index import (KMeansTree, NearestData, TreeParams, direct_log_likelihood, log_likelihood,
                           radius_for, squared_distances)
from src.errors import DataSetError

TOL = 1e-16


@pytest.fixture
def cloud():
    rng = np.random.default_rng(42)
    return rng.standard_normal((2000, 2))


@pytest.fixture
def tree(cloud):
    return KMeansTree.build(cloud, params=TreeParams(branching_factor=8, leaf_size=16),
                            rng=np.random.default_rng(0))


class TestConstruction:

    def test_audit_passes(self, tree):
        assert tree.audit() == []
        assert sum(leaf.ids.size for leaf in tree.leaves) == tree.size
        assert all(leaf.ids.size <= 16 for leaf in tree.leaves)

    def test_deterministic_for_seed(self, cloud):
        params = TreeParams(branching_factor=4, leaf_size=8)
        a = KMeansTree.build(cloud, params=params, rng=np.random.default_rng(7))
        b = KMeansTree.build(cloud, params=params, rng=np.random.default_rng(7))
        assert [leaf.ids.tolist() for leaf in a.leaves] == [leaf.ids.tolist() for leaf in b.leaves]

    def test_duplicate_points_end_in_a_leaf(self):
        points = np.ones((100, 2))
        tree = KMeansTree.build(points, params=TreeParams(branching_factor=4, leaf_size=8),
                                rng=np.random.default_rng(1))
        assert tree.audit() == []

    def test_empty_data(self):
        with pytest.raises(DataSetError):
            KMeansTree.build(np.zeros((0, 2)))

    def test_invalid_params(self):
        with pytest.raises(ValueError):
            TreeParams(branching_factor=1)


class TestRadiusSearch:

    def test_matches_brute_force(self, tree, cloud):
        rng = np.random.default_rng(3)
        for q in rng.standard_normal((25, 2)):
            ids, d2 = tree.radius_search(q, 0.3)
            expected = np.flatnonzero(np.sum((cloud - q) ** 2, axis=1) <= 0.3 * 0.3)
            np.testing.assert_array_equal(ids, expected)
            np.testing.assert_allclose(d2, np.sum((cloud[ids] - q) ** 2, axis=1))

    def test_unlimited_checks_are_exact(self, tree, cloud):
        q = np.array([0.2, -0.1])
        exact, _ = tree.radius_search(q, 0.5)
        checked, _ = tree.radius_search(q, 0.5, n_checks=10 ** 6)
        np.testing.assert_array_equal(checked, exact)

    def test_limited_checks_return_subset(self, tree):
        q = np.array([0.0, 0.0])
        exact, _ = tree.radius_search(q, 1.0)
        approx, _ = tree.radius_search(q, 1.0, n_checks=1)
        assert np.all(np.isin(approx, exact))

    def test_recall_grows_with_checks(self, tree):
        queries = np.random.default_rng(4).standard_normal((20, 2))
        low = tree.measure_recall(queries, 0.5, n_checks=0)
        high = tree.measure_recall(queries, 0.5, n_checks=10 ** 6)
        assert 0.0 <= low <= high
        assert high == 1.0

    def test_negative_radius(self, tree):
        with pytest.raises(ValueError):
            tree.radius_search(np.zeros(2), -1.0)


class TestLikelihood:

    def test_radius_formula(self):
        assert radius_for(2.0, np.exp(-8.0)) == pytest.approx(2.0)
        with pytest.raises(ValueError):
            radius_for(0.0, TOL)
        with pytest.raises(ValueError):
            radius_for(1.0, 1.5)

    def test_tree_matches_direct(self, tree, cloud):
        queries = np.random.default_rng(5).standard_normal((50, 2))
        for beta in (1.0, 10.0, 100.0):
            from_tree = tree.log_likelihood(queries, beta, TOL)
            direct = direct_log_likelihood(cloud, queries, beta, tol=TOL, floor=False)
            # points beyond the radius carry less than TOL of likelihood in total
            np.testing.assert_allclose(np.exp(from_tree), np.exp(direct), rtol=1e-12, atol=1.01 * TOL)

    def test_direct_chunking_is_invisible(self, cloud):
        queries = np.random.default_rng(6).standard_normal((30, 2))
        whole = direct_log_likelihood(cloud, queries, 5.0)
        chunked = direct_log_likelihood(cloud, queries, 5.0, chunk_elements=5000)
        np.testing.assert_allclose(chunked, whole, rtol=1e-14)

    def test_floor_far_from_data(self, tree, cloud):
        far = np.array([[100.0, 100.0]])
        floor = np.log(TOL / len(cloud))
        assert tree.log_likelihood(far, 10.0, TOL)[0] == floor
        assert direct_log_likelihood(cloud, far, 10.0, tol=TOL)[0] == floor

    def test_unclamped_direct_sum(self, cloud):
        far = np.array([[100.0, 100.0], [0.0, 0.0]])
        exact = direct_log_likelihood(cloud, far, 10.0, tol=TOL, floor=False)
        d2 = np.sum((cloud - far[0]) ** 2, axis=1)
        # far below the floor, and still the full sum
        assert exact[0] == pytest.approx(-10.0 * d2.min() - np.log(len(cloud)), rel=1e-3)
        assert exact[0] < np.log(TOL / len(cloud))
        assert exact[1] == direct_log_likelihood(cloud, far, 10.0, tol=TOL)[1]

    def test_single_point_value(self):
        points = np.array([[0.0, 0.0], [3.0, 4.0]])
        # (1/2) (exp(0) + exp(-25 beta)) at the origin
        expected = np.log(0.5 * (1.0 + np.exp(-2.5)))
        assert log_likelihood(points, np.zeros(2), 0.1) == pytest.approx(expected, rel=1e-14)
        tree = KMeansTree.build(points, rng=np.random.default_rng(0))
        assert log_likelihood(tree, np.zeros(2), 0.1) == pytest.approx(expected, rel=1e-14)

    def test_confidences_scale_terms(self):
        points = np.array([[0.0, 0.0], [0.0, 0.0]])
        value = direct_log_likelihood(points, np.zeros((1, 2)), 1.0, confidences=np.array([1.0, 0.0]))
        assert value[0] == pytest.approx(np.log(0.5))
        tree = KMeansTree.build(points, confidences=np.array([1.0, 0.0]), rng=np.random.default_rng(0))
        assert tree.log_likelihood(np.zeros((1, 2)), 1.0)[0] == pytest.approx(np.log(0.5))

    def test_checked_likelihood_never_exceeds_exact(self, tree):
        queries = np.random.default_rng(8).standard_normal((20, 2))
        exact = tree.log_likelihood(queries, 20.0)
        checked = tree.log_likelihood(queries, 20.0, n_checks=0)
        assert np.all(checked <= exact + 1e-12)


class TestNearestData:

    def test_matches_brute_force(self, cloud):
        index = NearestData(cloud)
        queries = np.random.default_rng(9).standard_normal((10, 2))
        idx, d2 = index.query(queries)
        brute = squared_distances(queries, cloud)
        np.testing.assert_array_equal(idx, np.argmin(brute, axis=1))
        np.testing.assert_allclose(d2, brute.min(axis=1), rtol=1e-10)


def main():
    """Run this module's tests."""
    return pytest.main([__file__, '-v'])


if __name__ == "__main__":
    main()
