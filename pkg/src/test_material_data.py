#!/usr/bin/env python3
"""
Tests for material data sets, generators, beta estimation and data files.

Run with pytest from the project root, or directly:
    python src/test_material_data.py
"""

import numpy as np
import pandas as pd
import pytest

from src.errors import DataSetError, DimensionError
from src.material_data import (LocalDataSet, Material, MaterialAssignment, beta_estimate, load,
                               sample_sliding_gaussian, sample_weibull_bimodal, save, validate_frame,
                               weibull_failure_probability)


class TestLocalDataSet:

    def test_default_confidences(self):
        data = LocalDataSet(np.array([[0.0, 0.0], [1.0, 2.0]]))
        np.testing.assert_array_equal(data.confidences, [1.0, 1.0])
        assert data.size == 2 and data.dim == 1

    def test_rejects_confidence_outside_unit_interval(self):
        with pytest.raises(DataSetError):
            LocalDataSet(np.zeros((2, 2)), confidences=[1.0, 1.5])

    def test_rejects_odd_columns(self):
        with pytest.raises(DimensionError):
            LocalDataSet(np.zeros((2, 3)))

    def test_rejects_empty(self):
        with pytest.raises(DataSetError):
            LocalDataSet(np.zeros((0, 2)))

    def test_material_modulus_dimension(self):
        data = LocalDataSet(np.zeros((2, 4)))
        with pytest.raises(DimensionError):
            Material('m', 1.0, data)
        assert Material('m', np.eye(2), data).modulus.shape == (2, 2)

    def test_material_without_beta(self):
        with pytest.raises(DataSetError):
            Material('m', 1.0, LocalDataSet(np.zeros((2, 2)))).beta

    def test_assignment_groups(self):
        assignment = MaterialAssignment.from_members(['a', 'b', 'a'], ['a', 'b'])
        assert assignment.materials == ['a', 'b']
        np.testing.assert_array_equal(assignment.members_of('a'), [0, 2])
        with pytest.raises(DataSetError):
            MaterialAssignment.from_members(['a', 'c'], ['a'])


class TestBetaEstimate:

    def test_evenly_spaced_strains(self):
        """Points 0.01 apart in strain with C = 1e4 sit one unit apart per coordinate."""
        strains = 0.01 * np.arange(10)
        data = LocalDataSet(np.column_stack([strains, 1e4 * strains]))
        # each neighbour differs by (1, 1) in weighted coordinates: |d|^2 = 2
        assert beta_estimate(data, 1e4) == pytest.approx(0.5, rel=1e-12)

    def test_grows_with_data_size(self):
        rng = np.random.default_rng(5)
        small = sample_sliding_gaussian(1e4, 5e-4, (-0.02, 0.02), 1000, rng)
        large = sample_sliding_gaussian(1e4, 5e-4, (-0.02, 0.02), 10000, rng)
        assert beta_estimate(large, 1e4) > beta_estimate(small, 1e4)

    def test_uneven_spacing(self):
        """Nearest distances d, d, 2d give a mean square of 2 d^2."""
        delta = 0.1
        data = LocalDataSet(np.array([[0.0, 0.0], [delta, 0.0], [3 * delta, 0.0]]))
        assert beta_estimate(data, 1.0) == pytest.approx(1.0 / (2 * delta ** 2), rel=1e-12)

    def test_order_of_points_is_irrelevant(self):
        rng = np.random.default_rng(12)
        data = sample_sliding_gaussian(1e4, 5e-4, (-0.02, 0.02), 500, rng)
        shuffled = LocalDataSet(data.points[rng.permutation(data.size)])
        assert beta_estimate(shuffled, 1e4) == pytest.approx(beta_estimate(data, 1e4), rel=1e-12)

    def test_needs_two_points(self):
        with pytest.raises(DataSetError):
            beta_estimate(LocalDataSet(np.zeros((1, 2))), 1.0)

    def test_duplicates_only(self):
        with pytest.raises(DataSetError):
            beta_estimate(LocalDataSet(np.ones((5, 2))), 1.0)


class TestGenerators:

    def test_sliding_gaussian_size_and_range(self):
        data = sample_sliding_gaussian(1e4, 5e-4, (-0.01, 0.02), 1000, np.random.default_rng(0))
        assert data.size == 1000
        assert data.strains.min() >= -0.01 and data.strains.max() <= 0.02

    def test_sliding_gaussian_noise_level(self):
        """Stress noise has standard deviation s sqrt(C) for unit weight."""
        data = sample_sliding_gaussian(1e4, 5e-4, (0.0, 0.01), 20000, np.random.default_rng(1))
        residual = data.stresses[:, 0] - 1e4 * data.strains[:, 0]
        assert np.std(residual) == pytest.approx(5e-4 * 100.0, rel=0.03)

    def test_sliding_gaussian_noise_is_uncorrelated_with_strain(self):
        M = 20000
        data = sample_sliding_gaussian(1e4, 5e-4, (-0.01, 0.01), M, np.random.default_rng(13))
        residual = data.stresses[:, 0] - 1e4 * data.strains[:, 0]
        assert abs(np.corrcoef(data.strains[:, 0], residual)[0, 1]) < 4.0 / np.sqrt(M)

    def test_noise_free(self):
        data = sample_sliding_gaussian(1e4, 0.0, (0.0, 0.01), 100, np.random.default_rng(2))
        np.testing.assert_allclose(data.stresses[:, 0], 1e4 * data.strains[:, 0])

    def test_zero_points(self):
        with pytest.raises(DataSetError):
            sample_sliding_gaussian(1e4, 5e-4, (0.0, 0.01), 0, np.random.default_rng(0))

    def test_weibull_probability(self):
        assert weibull_failure_probability(140.0, 140.0, 4.0) == pytest.approx(1.0 - np.exp(-1.0))
        assert weibull_failure_probability(-50.0, 140.0, 4.0) == 0.0

    def test_weibull_branch_frequencies(self):
        """Failed fraction in a narrow strain window matches W(C eps) within 3 standard errors."""
        C, sigma0, p = 1e4, 140.0, 4.0
        data = sample_weibull_bimodal(C, sigma0, p, 1e-4, (0.0139, 0.0141), 20000, np.random.default_rng(3))
        failed = np.abs(data.stresses[:, 0]) < 1.0
        expected = float(np.mean(weibull_failure_probability(C * data.strains[:, 0], sigma0, p)))
        stderr = np.sqrt(expected * (1.0 - expected) / data.size)
        assert abs(failed.mean() - expected) <= 3 * stderr

    def test_weibull_compression_never_fails(self):
        data = sample_weibull_bimodal(1e4, 140.0, 4.0, 0.0, (-0.02, -0.001), 1000, np.random.default_rng(4))
        np.testing.assert_allclose(data.stresses[:, 0], 1e4 * data.strains[:, 0])


class TestFiles:

    def test_save_load_preserves_values(self, tmp_path):
        rng = np.random.default_rng(6)
        data = sample_sliding_gaussian(1e4, 5e-4, (-0.01, 0.01), 50, rng, material_id='steel')
        data = data.with_beta(beta_estimate(data, 1e4))
        path = save(data, tmp_path / 'steel.csv')
        loaded = load(path)
        np.testing.assert_allclose(loaded.points, data.points, rtol=1e-15)
        np.testing.assert_array_equal(loaded.confidences, data.confidences)
        assert loaded.beta == data.beta
        assert loaded.material_id == 'steel'

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataSetError):
            load(tmp_path / 'missing.csv')

    def test_empty_file(self, tmp_path):
        path = tmp_path / 'empty.csv'
        path.write_text('')
        with pytest.raises(DataSetError):
            load(path)

    def test_malformed_row(self, tmp_path):
        path = tmp_path / 'bad.csv'
        path.write_text("strain_0,stress_0,confidence\n0.1,10,1\nabc,5,1\n")
        with pytest.raises(DataSetError):
            load(path)

    def test_confidence_out_of_range(self, tmp_path):
        path = tmp_path / 'conf.csv'
        path.write_text("strain_0,stress_0,confidence\n0.1,10,2\n")
        with pytest.raises(DataSetError):
            load(path)

    def test_inconsistent_dimension(self, tmp_path):
        path = tmp_path / 'dim.csv'
        path.write_text("strain_0,strain_1,stress_0\n0.1,0.2,10\n")
        with pytest.raises(DataSetError):
            load(path)

    def test_missing_confidence_is_a_warning(self, tmp_path):
        path = tmp_path / 'noconf.csv'
        path.write_text("# material_id=alu\nstrain_0,stress_0\n0.1,10\n0.2,20\n")
        data = load(path)
        np.testing.assert_array_equal(data.confidences, [1.0, 1.0])
        assert data.material_id == 'alu' and data.beta is None

    def test_validate_frame_collects_errors(self):
        frame = pd.DataFrame({'strain_0': ['x'], 'stress_0': ['1'], 'confidence': ['5'], 'extra': ['0']})
        result = validate_frame(frame)
        assert not result.is_valid
        assert len(result.errors) >= 2


def main():
    """Run this module's tests."""
    return pytest.main([__file__, '-v'])


if __name__ == "__main__":
    main()
