#!/usr/bin/env python3
"""
Tests for truss geometry, constraint-set assembly, projections and bases.

Run with pytest from the project root, or directly:
    python src/test_truss.py
"""

import json
from pathlib import Path

import numpy as np
import pytest
from scipy import linalg

from src.errors import GeometryError, MechanismError
from src.phase_space import Metric, norm, split_strain_stress, to_weighted
from src.truss import (Bar, Node, Projector, TrussModel, _make_node, admissibility_residual, airy_basis, assemble,
                       elastic_solution, exact_basis, load_geometry, parse_geometry, pca_basis, project,
                       space_frame, stiffness_solve, three_bar)

SCENARIOS = Path(__file__).resolve().parent.parent / 'scenarios'


def random_truss(rng: np.random.Generator, n_nodes: int) -> TrussModel:
    """Complete graph over random planar nodes, first two nodes pinned."""
    coords = rng.uniform(-1.0, 1.0, (n_nodes, 2))
    nodes = [_make_node(f"n{i}", coords[i], fixed=[i < 2, i < 2],
                        load=rng.standard_normal(2) if i >= 2 else None) for i in range(n_nodes)]
    bars = [Bar(f"b{i}_{j}", f"n{i}", f"n{j}", rng.uniform(0.5, 2.0), 'default')
            for i in range(n_nodes) for j in range(i + 1, n_nodes)]
    return TrussModel(nodes, bars)


@pytest.fixture
def gauss_truss():
    return three_bar(load=100.0, area=1.0)


@pytest.fixture
def gauss_metric(gauss_truss):
    return gauss_truss.metric({'default': 1e4})


class TestGeometry:

    def test_three_bar_dimensions(self, gauss_truss):
        assert gauss_truss.n_members == 3
        assert gauss_truss.n_free == 2
        np.testing.assert_allclose(gauss_truss.lengths, [np.sqrt(2.0), 1.0, np.sqrt(2.0)], rtol=1e-14)
        np.testing.assert_allclose(gauss_truss.load_vector(), [0.0, -100.0])

    def test_geometry_file_matches_builder(self, gauss_truss):
        from_file = load_geometry(SCENARIOS / 'geometry' / 'three_bar.json')
        np.testing.assert_allclose(assemble(from_file).B, assemble(gauss_truss).B, atol=1e-15)
        np.testing.assert_allclose(from_file.weights, gauss_truss.weights)

    def test_parametric_block(self):
        model = parse_geometry({'parametric': {'type': 'three_bar', 'load': 50.0}})
        np.testing.assert_allclose(model.load_vector(), [0.0, -50.0])

    def test_unknown_parametric_type(self):
        with pytest.raises(GeometryError):
            parse_geometry({'parametric': {'type': 'bridge'}})

    def test_duplicate_node(self):
        data = {'nodes': [{'id': 'a', 'coords': [0, 0]}, {'id': 'a', 'coords': [1, 0]}],
                'bars': [{'id': 'b', 'nodes': ['a', 'a']}]}
        with pytest.raises(GeometryError):
            parse_geometry(data)

    def test_dangling_bar(self):
        data = {'nodes': [{'id': 'a', 'coords': [0, 0]}, {'id': 'b', 'coords': [1, 0]}],
                'bars': [{'id': 'x', 'nodes': ['a', 'c']}]}
        with pytest.raises(GeometryError):
            parse_geometry(data)

    def test_zero_length_bar(self):
        data = {'nodes': [{'id': 'a', 'coords': [0, 0]}, {'id': 'b', 'coords': [0, 0]}],
                'bars': [{'id': 'x', 'nodes': ['a', 'b']}]}
        with pytest.raises(GeometryError):
            parse_geometry(data)

    def test_missing_file(self, tmp_path):
        with pytest.raises(GeometryError):
            load_geometry(tmp_path / 'nope.json')

    def test_prescribed_fixes_node(self, tmp_path):
        data = {'dimension': 2,
                'nodes': [{'id': 's', 'coords': [0, 1], 'fixed': [True, True]},
                          {'id': 'c', 'coords': [0, 0]}],
                'bars': [{'id': 'm', 'nodes': ['s', 'c']}],
                'prescribed': [{'node': 'c', 'displacement': [0.0, -0.01]}]}
        path = tmp_path / 'bar.json'
        path.write_text(json.dumps(data))
        model = load_geometry(path)
        assert model.n_free == 0
        E = assemble(model)
        np.testing.assert_allclose(E.g, [0.01])

    def test_space_frame_counts(self):
        frame = space_frame(bays=3)
        E = assemble(frame)
        assert frame.n_members == 43
        assert E.n_free == 39
        assert E.n_airy == 4


class TestConstraintSet:

    def test_three_bar_dimensions(self, gauss_truss):
        E = assemble(gauss_truss)
        assert E.size == 3 and E.n_free == 2 and E.n_airy == 1

    def test_airy_orthogonality(self, gauss_truss):
        E = assemble(gauss_truss)
        W = np.diag(E.weights)
        assert np.max(np.abs(E.B.T @ W @ E.self_stresses)) <= 1e-10
        np.testing.assert_allclose(E.self_stresses.T @ E.self_stresses, np.eye(E.n_airy), atol=1e-12)

    def test_particular_solution_equilibrated(self, gauss_truss):
        E = assemble(gauss_truss)
        np.testing.assert_allclose(E.B.T @ (E.weights * E.sigma0), E.f, atol=1e-10)

    def test_dimension_identity_random_trusses(self):
        rng = np.random.default_rng(42)
        for trial in range(20):
            truss = random_truss(rng, int(rng.integers(4, 7)))
            E = assemble(truss)
            assert E.n_free + E.n_airy == E.size
            assert np.max(np.abs(E.B.T @ E.airy)) <= 1e-10

    def test_mechanism(self):
        nodes = [_make_node('s', (0.0, 1.0), fixed=[True, True]), _make_node('c', (0.0, 0.0))]
        with pytest.raises(MechanismError) as info:
            assemble(TrussModel(nodes, [Bar('m', 's', 'c', 1.0, 'default')]))
        assert info.value.rank == 1 and info.value.n_dofs == 2

    def test_state_is_admissible(self, gauss_truss):
        E = assemble(gauss_truss)
        z = E.state(np.array([0.001, -0.002]), np.array([3.0]))
        equilibrium, compatibility = admissibility_residual(z, E)
        assert equilibrium <= 1e-10 and compatibility <= 1e-12

    def test_airy_basis_recovers_planted_self_stresses(self):
        rng = np.random.default_rng(8)
        weights = rng.uniform(0.5, 3.0, 6)
        planted = rng.standard_normal((6, 2))
        B = linalg.null_space((weights[:, None] * planted).T)
        A = airy_basis(B, weights)
        self_stresses = A / weights[:, None]
        assert self_stresses.shape == (6, 2)
        np.testing.assert_allclose(self_stresses.T @ self_stresses, np.eye(2), atol=1e-12)
        np.testing.assert_allclose(self_stresses @ (self_stresses.T @ planted), planted, atol=1e-10)
        assert np.max(np.abs(B.T @ A)) <= 1e-10

    def test_residual_scales_with_offset(self, gauss_truss):
        E = assemble(gauss_truss)
        z = E.state(np.array([0.001, -0.002]), np.array([3.0]))
        offset = np.random.default_rng(9).standard_normal(6) * np.tile([1e-3, 10.0], 3)
        unit = np.array(admissibility_residual(z + offset, E))
        assert np.all(unit > 0)
        for t in (1e-3, 1.0, 1e3):
            np.testing.assert_allclose(admissibility_residual(z + t * offset, E), t * unit, rtol=1e-6, atol=1e-9)

    def test_displacement_control_has_no_free_dofs(self):
        truss = three_bar(drive=[1.0, -0.5], magnitude=0.02)
        E = assemble(truss)
        assert E.n_free == 0 and E.n_airy == 3
        # the largest displacement component equals the magnitude
        driven = next(node for node in truss.nodes if node.id == 'c')
        np.testing.assert_array_equal(driven.displacement, [0.02, -0.01])
        np.testing.assert_allclose(E.g, [0.015, 0.01, -0.005], rtol=1e-12)

    def test_prescribed_magnitude_rescales(self):
        truss = three_bar(drive=[1.0, -0.5], magnitude=0.02).with_prescribed_magnitude(0.04)
        np.testing.assert_allclose(assemble(truss).g, [0.03, 0.02, -0.01], rtol=1e-12)
        with pytest.raises(GeometryError):
            three_bar().with_prescribed_magnitude(0.01)


class TestProjection:

    def test_idempotent_and_admissible(self, gauss_truss, gauss_metric):
        E = assemble(gauss_truss)
        rng = np.random.default_rng(0)
        y = rng.standard_normal((20, 6)) * np.tile([1e-3, 10.0], 3)
        z = project(y, E, gauss_metric)
        np.testing.assert_allclose(project(z, E, gauss_metric), z, rtol=1e-10, atol=1e-12)
        equilibrium, compatibility = admissibility_residual(z, E)
        assert np.all(equilibrium <= 1e-8) and np.all(compatibility <= 1e-12)

    def test_non_expansive(self, gauss_truss, gauss_metric):
        E = assemble(gauss_truss)
        rng = np.random.default_rng(3)
        scale = np.tile([1e-3, 10.0], 3)
        y1, y2 = rng.standard_normal((2, 200, 6)) * scale
        moved = norm(project(y1, E, gauss_metric) - project(y2, E, gauss_metric), gauss_metric)
        assert np.all(moved <= norm(y1 - y2, gauss_metric) * (1 + 1e-12))

    def test_minimal_distance(self, gauss_truss, gauss_metric):
        E = assemble(gauss_truss)
        rng = np.random.default_rng(1)
        y = rng.standard_normal(6) * np.tile([1e-3, 10.0], 3)
        z = project(y, E, gauss_metric)
        best = norm(y - z, gauss_metric)
        for _ in range(100):
            other = E.state(rng.standard_normal(2) * 1e-3, rng.standard_normal(1) * 10.0)
            assert best <= norm(y - other, gauss_metric) + 1e-12

    def test_matches_basis_projection(self, gauss_truss, gauss_metric):
        E = assemble(gauss_truss)
        basis = exact_basis(E, gauss_metric)
        rng = np.random.default_rng(2)
        y = rng.standard_normal(6)
        z0w = to_weighted(E.z0, gauss_metric)
        expected = z0w + basis @ (basis.T @ (to_weighted(y, gauss_metric) - z0w))
        np.testing.assert_allclose(to_weighted(Projector(E, gauss_metric)(y), gauss_metric), expected,
                                   rtol=1e-10, atol=1e-10)

    def test_zero_free_dofs_keeps_stress(self):
        truss = three_bar(drive=[1.0, -0.5], magnitude=0.02)
        E = assemble(truss)
        metric = truss.metric({'default': 1e4})
        y = np.array([0.0, 5.0, 0.0, 6.0, 0.0, 7.0])
        eps, sig = split_strain_stress(project(y, E, metric))
        np.testing.assert_allclose(eps, E.g)
        np.testing.assert_allclose(sig, [5.0, 6.0, 7.0])


class TestBases:

    def test_pca_spans_constraint_directions(self, gauss_truss, gauss_metric):
        E = assemble(gauss_truss)
        pca = pca_basis(E, gauss_metric, rng=np.random.default_rng(3))
        exact = exact_basis(E, gauss_metric)
        np.testing.assert_allclose(pca.T @ pca, np.eye(3), atol=1e-10)
        np.testing.assert_allclose(pca @ pca.T, exact @ exact.T, atol=1e-8)

    def test_pca_needs_more_samples_than_dimension(self, gauss_truss, gauss_metric):
        with pytest.raises(ValueError):
            pca_basis(assemble(gauss_truss), gauss_metric, K=3)

    def test_space_frame_basis(self):
        frame = space_frame()
        E = assemble(frame)
        metric = frame.metric({'default': 1e4})
        basis = exact_basis(E, metric)
        assert basis.shape == (86, 43)
        np.testing.assert_allclose(basis.T @ basis, np.eye(43), atol=1e-10)


class TestElastic:

    def test_three_bar_deflection(self, gauss_truss, gauss_metric):
        """u_y = -P / (C A (1 + 1/sqrt 2)) for the symmetric three-bar truss."""
        E = assemble(gauss_truss)
        state, u = elastic_solution(E, gauss_metric)
        expected = -100.0 / (1e4 * (1.0 + 1.0 / np.sqrt(2.0)))
        assert u[1] == pytest.approx(expected, rel=1e-10)
        assert u[0] == pytest.approx(0.0, abs=1e-14)
        eps, sig = split_strain_stress(state)
        np.testing.assert_allclose(sig, 1e4 * eps)

    def test_stiffness_solve_tolerates_failed_bar(self, gauss_truss):
        E = assemble(gauss_truss)
        u, eps = stiffness_solve(E, np.array([1e4, 0.0, 1e4]))
        assert np.all(np.isfinite(u))
        np.testing.assert_allclose(E.B.T @ (E.weights * np.array([1e4, 0.0, 1e4]) * eps), E.f, atol=1e-8)


def main():
    """Run this module's tests."""
    return pytest.main([__file__, '-v'])


if __name__ == "__main__":
    main()
