"""
Grid Unit Tests

Copyright 2020-2026, University Corporation for Atmospheric Research
LICENSE: See the LICENSE.rst file for details
"""

import unittest

import numpy

from pyenclose.errors import ConfigurationError
from pyenclose.grids import Grid, build_grid, refinement_ladder, same_domain

from .testutils import print_test_message


class GridTests(unittest.TestCase):
    def test_interval_init(self):
        grid = build_grid("interval", [0, 1], 5)
        actual = (grid.ndim, grid.size, grid.spacing)
        expected = (1, 5, (0.25,))
        print_test_message("Grid.__init__(interval)", actual=actual, expected=expected)
        self.assertEqual(actual, expected, "Interval grid shape incorrect")

    def test_rectangle_init(self):
        grid = build_grid("rectangle", [0, 2, 0, 1], [5, 3])
        actual = (grid.ndim, grid.size, grid.spacing, grid.strides)
        expected = (2, 15, (0.5, 0.5), (3, 1))
        print_test_message("Grid.__init__(rectangle)", actual=actual, expected=expected)
        self.assertEqual(actual, expected, "Rectangle grid shape incorrect")

    def test_unknown_kind(self):
        print_test_message("Grid.__init__(disc)")
        self.assertRaises(ConfigurationError, Grid, "disc", [0, 1], 5)

    def test_degenerate_extents(self):
        print_test_message("Grid.__init__(degenerate)")
        self.assertRaises(ConfigurationError, Grid, "interval", [1, 1], 5)
        self.assertRaises(ConfigurationError, Grid, "interval", [0, 1, 2], 5)

    def test_too_few_nodes(self):
        print_test_message("Grid.__init__(2 nodes)")
        self.assertRaises(ConfigurationError, Grid, "interval", [0, 1], 2)

    def test_boundary_and_interior(self):
        grid = build_grid("rectangle", [0, 1, 0, 1], 4)
        actual = (grid.boundary.size, grid.interior.size, grid.corners.size, grid.faces.size)
        expected = (12, 4, 4, 8)
        print_test_message("Grid boundary counts", actual=actual, expected=expected)
        self.assertEqual(actual, expected, "Boundary partition incorrect")

    def test_volumes_sum_to_area(self):
        grid = build_grid("rectangle", [0, 2, 0, 3], [9, 7])
        actual = float(numpy.sum(grid.volumes))
        expected = 6.0
        print_test_message("Grid.volumes sum", actual=actual, expected=expected)
        self.assertAlmostEqual(actual, expected, 12, "Control volumes do not sum to the area")

    def test_node_distances_interval(self):
        grid = build_grid("interval", [0, 1], 5)
        actual = grid.node_distances()
        expected = numpy.array([0, 0.25, 0.5, 0.25, 0])
        print_test_message("Grid.node_distances", actual=actual, expected=expected)
        numpy.testing.assert_allclose(actual, expected, atol=1e-15)

    def test_node_distances_zero_on_boundary(self):
        grid = build_grid("rectangle", [0, 1, 0, 2], [5, 9])
        dist = grid.node_distances()
        print_test_message("Grid.node_distances boundary", dmin=dist[grid.interior].min())
        self.assertTrue(numpy.all(dist[grid.boundary] == 0))
        self.assertTrue(numpy.all(dist[grid.interior] > 0))

    def test_cell_center_distances_positive(self):
        grid = build_grid("rectangle", [0, 1, 0, 1], 5)
        actual = grid.cell_center_distances()
        print_test_message("Grid.cell_center_distances", actual=actual.min(), expected=0.125)
        self.assertEqual(actual.size, 16)
        self.assertAlmostEqual(actual.min(), 0.125, 15)

    def test_inward_neighbours(self):
        grid = build_grid("interval", [0, 1], 5)
        actual = (list(grid.faces), list(grid.inward))
        expected = ([0, 4], [1, 3])
        print_test_message("Grid.inward", actual=actual, expected=expected)
        self.assertEqual(actual, expected, "Inward neighbours incorrect")

    def test_refine_keeps_nodes(self):
        grid = build_grid("rectangle", [0, 1, 0, 1], [5, 3])
        fine = grid.refine(2)
        coarse_points = set(map(tuple, grid.coordinates))
        fine_points = set(map(tuple, fine.coordinates))
        print_test_message("Grid.refine", counts=fine.counts)
        self.assertEqual(fine.counts, (9, 5))
        self.assertTrue(coarse_points <= fine_points, "Refinement lost coarse nodes")

    def test_refinement_ladder(self):
        ladder = refinement_ladder(build_grid("interval", [0, 1], 9), 3)
        actual = [g.size for g in ladder]
        expected = [9, 17, 33]
        print_test_message("refinement_ladder", actual=actual, expected=expected)
        self.assertEqual(actual, expected, "Ladder sizes incorrect")
        self.assertTrue(same_domain(*ladder))

    def test_descriptor(self):
        grid = build_grid("rectangle", [0, 1, -1, 1], [5, 9])
        actual = Grid.from_descriptor(grid.describe())
        print_test_message("Grid.from_descriptor", actual=actual, expected=grid)
        self.assertEqual(actual, grid, "Descriptor does not rebuild the grid")
        self.assertEqual(hash(actual), hash(grid))

    def test_arrays_read_only(self):
        grid = build_grid("interval", [0, 1], 5)
        print_test_message("Grid arrays read-only")
        with self.assertRaises(ValueError):
            grid.coordinates[0, 0] = 1.0


if __name__ == "__main__":
    unittest.main()
