#!/usr/bin/env python
"""
Tests for grids, cell lookup, check-in ingestion and island planting.
"""
import sys
import os
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import tempfile
import unittest

import numpy as np

import common_test_data as test_data
from privic.errors import DomainError
from privic.geo import BoundingBox, build_grid, checkins_to_samples, grid_summary, ingest_checkins, line_grid, \
    locate, locate_many, plant_island
from privic.prob import uniform_pmf


class TestGrid(unittest.TestCase):

    def setUp(self):
        self.grid = test_data.small_grid()

    def test_cell_count_and_order(self):
        self.assertEqual(self.grid.m, 12)
        self.assertEqual(self.grid.cell_index(1, 2), 6)
        self.assertEqual(self.grid.cell_rc(6), (1, 2))
        with self.assertRaises(DomainError):
            self.grid.cell_rc(12)

    def test_distance_is_a_metric(self):
        dist = self.grid.dist
        np.testing.assert_array_equal(dist, dist.T)
        np.testing.assert_array_equal(np.diag(dist), np.zeros(self.grid.m))
        self.assertTrue(np.all(dist[~np.eye(self.grid.m, dtype=bool)] > 0))
        # d(x, z) <= d(x, y) + d(y, z) for every triple
        triangle = dist[:, None, :] <= dist[:, :, None] + dist[None, :, :] + 1e-12
        self.assertTrue(np.all(triangle))

    def test_distance_is_a_metric_on_larger_grids(self):
        for rows, cols in ((1, 1), (1, 7), (5, 3), (12, 16), (16, 16)):
            grid = build_grid(BoundingBox.of(test_data.PARIS_BBOX), rows, cols)
            dist = grid.dist
            np.testing.assert_array_equal(dist, dist.T)
            np.testing.assert_array_equal(np.diag(dist), np.zeros(grid.m))
            self.assertTrue(np.all(dist[~np.eye(grid.m, dtype=bool)] > 0))
            for x in range(grid.m):
                # d(x, z) <= d(x, y) + d(y, z)
                bound = dist[x][:, None] + dist
                self.assertTrue(np.all(dist[x][None, :] <= bound + 1e-9), (rows, cols, x))

    def test_paris_cell_size(self):
        grid = build_grid(BoundingBox.of(test_data.PARIS_BBOX), 12, 16)
        height, width = grid.cell_km
        # 0.0512 degrees of latitude over 12 rows, 0.1054 degrees of longitude over 16 columns
        self.assertAlmostEqual(height, 0.4744, delta=0.001)
        self.assertAlmostEqual(width, 0.4825, delta=0.001)
        self.assertEqual(grid.m, 192)

    def test_neighbouring_centroids(self):
        height, width = self.grid.cell_km
        self.assertAlmostEqual(self.grid.dist[0, 1], width, places=9)
        self.assertAlmostEqual(self.grid.dist[0, self.grid.cols], height, places=9)

    def test_invalid_bbox(self):
        with self.assertRaises(DomainError):
            BoundingBox(1.0, 0.0, 0.0, 1.0)

    def test_line_grid_spacing(self):
        grid = line_grid(3)
        np.testing.assert_allclose(grid.dist, test_data.LINE_DIST, atol=1e-9)
        grid = line_grid(2, spacing_km=2.5)
        self.assertAlmostEqual(grid.dist[0, 1], 2.5, places=9)

    def test_summary(self):
        summary = grid_summary(self.grid)
        self.assertEqual(summary['cell_count'], 12)
        self.assertEqual(summary['bbox'], list(test_data.PARIS_BBOX))


class TestLocate(unittest.TestCase):

    def setUp(self):
        self.grid = test_data.small_grid()

    def test_centroid_maps_to_its_cell(self):
        for index in range(self.grid.m):
            lat, lon = self.grid.centroid_latlon(index)
            self.assertEqual(locate(self.grid, lat, lon), index)

    def test_boundary_goes_to_lower_index(self):
        lat = self.grid.lat_edges[1]
        lon = self.grid.lon_edges[2]
        self.assertEqual(locate(self.grid, lat, lon), self.grid.cell_index(0, 1))

    def test_box_corners(self):
        b = self.grid.bbox
        self.assertEqual(locate(self.grid, b.lat_min, b.lon_min), 0)
        self.assertEqual(locate(self.grid, b.lat_max, b.lon_max), self.grid.m - 1)

    def test_outside_raises(self):
        with self.assertRaises(DomainError):
            locate(self.grid, 51.5, -0.12)
        with self.assertRaises(DomainError):
            locate_many(self.grid, [48.85, 51.5], [2.3, -0.12])

    def test_locate_many_matches_locate(self):
        rng = np.random.default_rng(0)
        b = self.grid.bbox
        lat = rng.uniform(b.lat_min, b.lat_max, 200)
        lon = rng.uniform(b.lon_min, b.lon_max, 200)
        expected = [locate(self.grid, a, o) for a, o in zip(lat, lon)]
        np.testing.assert_array_equal(locate_many(self.grid, lat, lon), expected)


class TestIngest(unittest.TestCase):

    def test_ingest_filters_and_counts(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = test_data.write_checkins(tmp)
            result = ingest_checkins(path, BoundingBox.of(test_data.PARIS_BBOX))

        self.assertEqual(result.count, test_data.CHECKINS_INSIDE)
        self.assertEqual(result.outside, test_data.CHECKINS_OUTSIDE)
        self.assertEqual(result.skipped, test_data.CHECKINS_MALFORMED)
        first = next(result.records())
        self.assertEqual(first.poi_id, '22847')
        self.assertAlmostEqual(first.lat, 48.85)

    def test_empty_file(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = test_data.write_checkins(tmp, lines=[])
            result = ingest_checkins(path, BoundingBox.of(test_data.PARIS_BBOX))
        self.assertEqual(result.count, 0)

    def test_checkins_to_samples(self):
        grid = test_data.small_grid()
        with tempfile.TemporaryDirectory() as tmp:
            result = ingest_checkins(test_data.write_checkins(tmp), grid.bbox)
        samples = checkins_to_samples(result, grid)
        self.assertEqual(samples.n, test_data.CHECKINS_INSIDE)
        self.assertIsNone(samples.seed)
        self.assertEqual(samples.indices[0], locate(grid, 48.85, 2.30))


class TestIsland(unittest.TestCase):

    def test_plant_island_moves_neighbourhood_mass(self):
        grid = test_data.small_grid()
        target = grid.cell_index(1, 1)
        island = plant_island(uniform_pmf(grid.m), grid, target)

        self.assertAlmostEqual(island.p[target], 9 / 12)
        for row in range(3):
            for col in range(3):
                if (row, col) != (1, 1):
                    self.assertEqual(island.p[grid.cell_index(row, col)], 0.0)
        for row in range(3):
            self.assertAlmostEqual(island.p[grid.cell_index(row, 3)], 1 / 12)

    def test_plant_island_validation(self):
        grid = test_data.small_grid()
        with self.assertRaises(DomainError):
            plant_island(uniform_pmf(5), grid, 0)
        with self.assertRaises(DomainError):
            plant_island(uniform_pmf(grid.m), grid, 0, radius_cells=0)


if __name__ == '__main__':
    unittest.main()
