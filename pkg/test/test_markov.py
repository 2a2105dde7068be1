#!/usr/bin/env python
"""
Tests for the simplex mesh, the Monte-Carlo transition matrix and the
stationary-distribution checks.
"""
import sys
import os
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import unittest

import numpy as np

from privic.errors import CapabilityError, DomainError
from privic.geo import line_grid
from privic.markov import HittingTimeRow, communicating_classes, enumerate_simplex, estimate_transition, \
    hitting_time_check, occupancy_check, project_to_mesh, simulate_chain, stationary_distribution
from privic.prob import Pmf, uniform_pmf
from privic.settings import IbuConfig, PrivicConfig

TWO_STATE = np.array([[0.5, 0.5],
                      [0.25, 0.75]])
FLIP = np.array([[0.0, 1.0],
                 [1.0, 0.0]])


class TestMesh(unittest.TestCase):

    def test_two_cells_quarter_steps(self):
        mesh = enumerate_simplex(2, 4)
        self.assertEqual(mesh.K, 3)
        np.testing.assert_array_equal(mesh.numerators, [[1, 3], [2, 2], [3, 1]])
        np.testing.assert_allclose(mesh.states[1], [0.5, 0.5])
        self.assertEqual(mesh.label(0), '(1/4,3/4)')

    def test_state_count(self):
        self.assertEqual(enumerate_simplex(3, 5).K, 6)
        self.assertEqual(enumerate_simplex(4, 4).K, 1)
        self.assertEqual(enumerate_simplex(1, 7).K, 1)

    def test_states_are_full_support(self):
        mesh = enumerate_simplex(3, 6)
        self.assertTrue(np.all(mesh.numerators >= 1))
        np.testing.assert_array_equal(mesh.numerators.sum(axis=1), np.full(mesh.K, 6))
        as_tuples = [tuple(row) for row in mesh.numerators]
        self.assertEqual(as_tuples, sorted(as_tuples))

    def test_caps(self):
        with self.assertRaises(DomainError):
            enumerate_simplex(3, 2)
        with self.assertRaises(CapabilityError):
            enumerate_simplex(5, 10)
        with self.assertRaises(CapabilityError):
            enumerate_simplex(2, 21)

    def test_projection(self):
        mesh = enumerate_simplex(2, 4)
        self.assertEqual(project_to_mesh(Pmf(np.array([0.5, 0.5])), mesh), 1)
        self.assertEqual(project_to_mesh(Pmf(np.array([0.99, 0.01])), mesh), 2)
        # equidistant from (1/4,3/4) and (2/4,2/4)
        self.assertEqual(project_to_mesh(Pmf(np.array([0.375, 0.625])), mesh), 0)
        with self.assertRaises(DomainError):
            project_to_mesh(uniform_pmf(3), mesh)


class TestStationary(unittest.TestCase):

    def test_two_state_chain(self):
        result = stationary_distribution(TWO_STATE)
        self.assertTrue(result.unique)
        np.testing.assert_allclose(result.psi.p, [1 / 3, 2 / 3], atol=1e-9)
        self.assertLess(result.residual, 1e-10)

    def test_periodic_chain_converges(self):
        result = stationary_distribution(FLIP)
        np.testing.assert_allclose(result.psi.p, [0.5, 0.5], atol=1e-12)

    def test_start_does_not_matter(self):
        chain = np.array([[0.1, 0.6, 0.3], [0.4, 0.4, 0.2], [0.7, 0.1, 0.2]])
        for matrix in (TWO_STATE, chain):
            size = matrix.shape[0]
            first = stationary_distribution(matrix, start=np.eye(size)[0])
            second = stationary_distribution(matrix, start=np.eye(size)[-1])
            np.testing.assert_allclose(first.psi.p, second.psi.p, rtol=0, atol=1e-10)

    def test_doubly_stochastic_is_uniform(self):
        matrix = np.array([[0.5, 0.3, 0.2], [0.2, 0.5, 0.3], [0.3, 0.2, 0.5]])
        result = stationary_distribution(matrix)
        np.testing.assert_allclose(result.psi.p, np.full(3, 1 / 3), atol=1e-10)

    def test_reducible_chain(self):
        self.assertEqual(communicating_classes(np.eye(2)), 2)
        result = stationary_distribution(np.eye(2))
        self.assertFalse(result.unique)
        self.assertIsNone(result.psi)

    def test_rejects_non_stochastic(self):
        with self.assertRaises(DomainError):
            stationary_distribution(np.array([[0.5, 0.4], [0.5, 0.5]]))


class TestSimulation(unittest.TestCase):

    def test_path(self):
        path = simulate_chain(FLIP, start=0, steps=5, seed=1)
        np.testing.assert_array_equal(path, [0, 1, 0, 1, 0, 1])
        np.testing.assert_array_equal(simulate_chain(TWO_STATE, 1, 100, 3), simulate_chain(TWO_STATE, 1, 100, 3))

    def test_occupancy(self):
        psi = stationary_distribution(TWO_STATE).psi
        report = occupancy_check(TWO_STATE, psi, steps=100_000, seed=4)
        self.assertLess(report.tv, 0.02)
        self.assertAlmostEqual(report.occupancy.sum(), 1.0)

    def test_return_times_of_flip(self):
        rows = hitting_time_check(FLIP, seed=0, excursions=100)
        for row in rows:
            self.assertEqual(row.expected_tau, 2.0)
            self.assertEqual(row.sigma, 0.0)
            self.assertTrue(row.consistent)

    def test_return_times_match_psi(self):
        rows = hitting_time_check(TWO_STATE, seed=5, excursions=5000)
        self.assertEqual([row.state for row in rows], [0, 1])
        for row in rows:
            self.assertLessEqual(row.gap, 5 * row.sigma)
            self.assertGreater(row.sigma, 0.0)

    def test_consistency_bound(self):
        self.assertTrue(HittingTimeRow(0, 0.5, 2.1, 1 / 2.1, 0.01, 100).consistent)
        self.assertFalse(HittingTimeRow(0, 0.5, 2.5, 0.4, 0.01, 100).consistent)

    def test_reducible_return_times(self):
        with self.assertRaises(DomainError):
            hitting_time_check(np.eye(2), seed=0)


class TestTransitionEstimate(unittest.TestCase):

    @classmethod
    def setUpClass(cls):
        cls.mesh = enumerate_simplex(2, 4)
        cls.cfg = PrivicConfig(beta=1.0, n_per_cycle=50, seed=0, ibu_cfg=IbuConfig(max_iters=10, fixed_count=True))
        cls.estimate = estimate_transition(cls.mesh, cls.cfg, uniform_pmf(2), trials=40, seed=3)

    def test_rows_are_stochastic(self):
        self.assertEqual(self.estimate.phi.shape, (3, 3))
        np.testing.assert_allclose(self.estimate.phi.sum(axis=1), np.ones(3))
        self.assertEqual(self.estimate.trials_per_state, 40)
        # every entry is a multiple of 1/trials
        np.testing.assert_allclose(self.estimate.phi * 40, np.round(self.estimate.phi * 40), atol=1e-9)

    def test_deterministic_and_worker_independent(self):
        again = estimate_transition(self.mesh, self.cfg, uniform_pmf(2), trials=40, seed=3, workers=2)
        np.testing.assert_array_equal(again.phi, self.estimate.phi)

    def test_zero_beta_never_moves(self):
        cfg = PrivicConfig(beta=0.0, n_per_cycle=50, seed=0, ibu_cfg=IbuConfig(max_iters=10, fixed_count=True))
        estimate = estimate_transition(self.mesh, cfg, Pmf(np.array([0.25, 0.75])), trials=20, seed=4)
        np.testing.assert_array_equal(estimate.phi, np.eye(3))
        self.assertFalse(stationary_distribution(estimate).unique)

    def test_high_beta_jumps_to_the_truth(self):
        cfg = PrivicConfig(beta=50.0, n_per_cycle=4000, seed=0)
        truth = Pmf(np.array([0.25, 0.75]))
        estimate = estimate_transition(self.mesh, cfg, truth, trials=20, seed=6, grid=line_grid(2))
        self.assertEqual(project_to_mesh(truth, self.mesh), 0)
        np.testing.assert_array_equal(estimate.phi[:, 0], np.ones(3))

    def test_truth_dimension(self):
        with self.assertRaises(DomainError):
            estimate_transition(self.mesh, self.cfg, uniform_pmf(3), trials=5, seed=0)
        with self.assertRaises(DomainError):
            estimate_transition(self.mesh, self.cfg, uniform_pmf(2), trials=0, seed=0)


if __name__ == '__main__':
    unittest.main()
