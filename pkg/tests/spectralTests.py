"""
Spectral and Torsion Unit Tests

Copyright 2020-2026, University Corporation for Atmospheric Research
LICENSE: See the LICENSE.rst file for details
"""

import unittest
import warnings

import numpy

from pyenclose import spectral
from pyenclose.errors import AdvisoryWarning, ConfigurationError, PreconditionError
from pyenclose.fields import TOL_ORDER, ScalarField, constant_field
from pyenclose.grids import build_grid, refinement_ladder
from pyenclose.plap import DIRICHLET, NEUMANN

from .testutils import print_test_message, sup_error


class NormTests(unittest.TestCase):
    def test_lp_norm_constant(self):
        grid = build_grid("interval", [0, 1], 9)
        actual = spectral.lp_norm(constant_field(grid, 2.0), 3)
        print_test_message("lp_norm(2)", actual=actual, expected=2.0)
        self.assertAlmostEqual(actual, 2.0, 12)

    def test_rayleigh_quotient_constant(self):
        grid = build_grid("rectangle", [0, 1, 0, 1], 5)
        actual = spectral.rayleigh_quotient(constant_field(grid, 0.3), 2.5)
        print_test_message("rayleigh_quotient(constant)", actual=actual, expected=1.0)
        self.assertAlmostEqual(actual, 1.0, 12)


class DirichletEigenTests(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.grid = build_grid("interval", [0, 1], 513)
        cls.pair = spectral.first_eigenpair_dirichlet(cls.grid, 2)

    def test_eigenvalue(self):
        actual = self.pair.eigenvalue
        expected = 1 + numpy.pi ** 2
        print_test_message("first_eigenpair_dirichlet lambda", actual=actual, expected=expected)
        self.assertLess(abs(actual - expected), 1e-3)

    def test_eigenfunction(self):
        exact = numpy.sin(numpy.pi * self.grid.coordinates[:, 0])
        actual = sup_error(self.pair.eigenfunction, exact)
        print_test_message("first_eigenpair_dirichlet phi", error=actual)
        self.assertLessEqual(actual, 1e-3)
        self.assertEqual(self.pair.eigenfunction.max(), 1.0)

    def test_certificate(self):
        pair = self.pair
        print_test_message("first_eigenpair_dirichlet certificate", c0=pair.c0,
                           residual=pair.residual, normal=pair.normal_negative)
        self.assertGreaterEqual(pair.c0, 1.9)
        self.assertTrue(pair.normal_negative)
        self.assertLessEqual(pair.residual, 1e-9)
        self.assertTrue(pair.bc.dirichlet)

    def test_rayleigh_quotient_matches(self):
        actual = spectral.rayleigh_quotient(self.pair.eigenfunction, 2)
        print_test_message("rayleigh_quotient(phi)", actual=actual, expected=self.pair.eigenvalue)
        self.assertAlmostEqual(actual, self.pair.eigenvalue, 9)

    def test_todict(self):
        desc = self.pair.todict()
        print_test_message("EigenPair.todict", actual=sorted(desc))
        self.assertIn("c0", desc)
        self.assertIn("normal_derivative_negative", desc)
        self.assertNotIn("mu", desc)


class EigenRestartTests(unittest.TestCase):
    def test_random_restart_same_eigenvalue(self):
        grid = build_grid("interval", [0, 1], 65)
        first = spectral.first_eigenpair_dirichlet(grid, 2)
        initial = numpy.random.RandomState(3).uniform(0.5, 1.5, grid.size)
        second = spectral.first_eigenpair_dirichlet(grid, 2, initial=initial)
        print_test_message("first_eigenpair_dirichlet restart", first=first.eigenvalue,
                           second=second.eigenvalue)
        self.assertAlmostEqual(first.eigenvalue, second.eigenvalue, 8)
        self.assertLess(sup_error(first.eigenfunction, second.eigenfunction.values), 1e-6)

    def test_degenerate_initial(self):
        grid = build_grid("interval", [0, 1], 9)
        initial = numpy.zeros(grid.size)
        initial[0] = 1.0
        print_test_message("first_eigenpair_dirichlet(boundary-only start)")
        self.assertRaises(
            PreconditionError, spectral.first_eigenpair_dirichlet, grid, 2, initial=initial
        )

class EigenvalueDominanceTests(unittest.TestCase):
    def test_dirichlet_above_neumann(self):
        grid = build_grid("interval", [0, 1], 33)
        for p in (1.5, 2, 3):
            dirichlet = spectral.first_eigenpair_dirichlet(grid, p)
            neumann = spectral.first_eigenpair_neumann(grid, p)
            print_test_message("first eigenvalues (p = {})".format(p),
                               dirichlet=dirichlet.eigenvalue, neumann=neumann.eigenvalue)
            self.assertEqual(neumann.eigenvalue, 1.0)
            self.assertGreater(dirichlet.eigenvalue, neumann.eigenvalue)
            self.assertLessEqual(dirichlet.residual, 1e-9)

    def test_singular_operator_square(self):
        grid = build_grid("rectangle", [0, 1, 0, 1], 33)
        pair = spectral.first_eigenpair_dirichlet(grid, 1.5)
        print_test_message("first_eigenpair_dirichlet(square, p = 1.5)", actual=pair.todict())
        self.assertGreater(pair.eigenvalue, 1.0)
        self.assertGreater(pair.c0, 0)
        self.assertTrue(pair.normal_negative)
        self.assertEqual(pair.eigenfunction.max(), 1.0)
        self.assertTrue(numpy.all(pair.eigenfunction.interior_values() > 0))

    def test_p3_eigenvalue(self):
        grid = build_grid("interval", [0, 1], 65)
        pair = spectral.first_eigenpair_dirichlet(grid, 3)
        print_test_message("first_eigenpair_dirichlet(p = 3)", actual=pair.eigenvalue)
        self.assertGreater(pair.eigenvalue, 1.0)
        self.assertAlmostEqual(spectral.rayleigh_quotient(pair.eigenfunction, 3),
                               pair.eigenvalue, 9)


class EigenMinimumTests(unittest.TestCase):
    def test_random_restarts(self):
        grid = build_grid("interval", [0, 1], 33)
        p = 2.5
        pair = spectral.first_eigenpair_dirichlet(grid, p)
        rng = numpy.random.RandomState(1729)
        restarts = []
        quotients = []
        for _ in range(20):
            initial = rng.uniform(0.0, 1.0, grid.size)
            initial[grid.boundary] = 0.0
            quotients.append(spectral.rayleigh_quotient(ScalarField(grid, initial), p))
            restarts.append(spectral.first_eigenpair_dirichlet(grid, p, initial=initial).eigenvalue)
        print_test_message("first_eigenpair_dirichlet restarts", actual=pair.eigenvalue,
                           restarts=restarts)
        self.assertLessEqual(pair.eigenvalue, min(restarts) + 1e-8)
        self.assertLessEqual(max(restarts) - min(restarts), 1e-8)
        self.assertLess(pair.eigenvalue, min(quotients))



class NeumannPairTests(unittest.TestCase):
    def test_neumann_eigenpair(self):
        grid = build_grid("interval", [0, 1], 17)
        for p in (2, 2.5, 3):
            pair = spectral.first_eigenpair_neumann(grid, p)
            print_test_message("first_eigenpair_neumann(p = {})".format(p), actual=pair)
            self.assertEqual(pair.eigenvalue, 1.0)
            self.assertEqual(pair.mu, 1.0)
            self.assertLessEqual(sup_error(pair.eigenfunction, 1.0), 1e-10)
            self.assertLessEqual(pair.residual, 1e-10)
            self.assertTrue(pair.note)

    def test_neumann_torsion(self):
        grid = build_grid("rectangle", [0, 1, 0, 1], 9)
        for p in (2, 2.5, 3):
            result = spectral.torsion(grid, p, NEUMANN)
            print_test_message("torsion(Neumann, p = {})".format(p), actual=result.certificate)
            self.assertLessEqual(sup_error(result.solution, 1.0), 1e-10)
            self.assertEqual(result.solution.name, "y_hat")
            self.assertLessEqual(result.certificate["c"], 1 + 1e-9)
            self.assertGreater(result.certificate["c"], 1.0)


class DirichletTorsionTests(unittest.TestCase):
    def test_distance_certificate(self):
        grid = build_grid("interval", [0, 1], 65)
        result = spectral.torsion(grid, 2, DIRICHLET)
        cert = result.certificate
        d = grid.node_distances()[grid.interior]
        y = result.solution.values[grid.interior]
        print_test_message("torsion(Dirichlet) certificate", actual=cert)
        self.assertEqual(result.solution.name, "y")
        self.assertTrue(cert["normal_derivative_negative"])
        self.assertGreaterEqual(cert["c"], 1 + TOL_ORDER)
        self.assertTrue(numpy.all(d / cert["c"] <= y * (1 + 1e-12)))
        self.assertTrue(numpy.all(y <= cert["c"] * d * (1 + 1e-12)))
        self.assertAlmostEqual(cert["sup"], result.solution.max())

    def test_maximum_principle(self):
        for grid in (build_grid("interval", [0, 1], 65), build_grid("rectangle", [0, 1, 0, 1], 17)):
            y = spectral.torsion(grid, 2, DIRICHLET).solution.interior_values()
            print_test_message("torsion(Dirichlet, p = 2) range", min=y.min(), max=y.max())
            self.assertTrue(numpy.all(y > 0))
            self.assertTrue(numpy.all(y < 1))


class SingularTorsionTests(unittest.TestCase):
    def test_gamma_range(self):
        grid = build_grid("interval", [0, 1], 9)
        print_test_message("singular_torsion(gamma = -1)")
        self.assertRaises(ConfigurationError, spectral.singular_torsion, grid, 2, -1.0)
        self.assertRaises(ConfigurationError, spectral.singular_torsion, grid, 2, 0.5)

    def test_gamma_zero_is_torsion(self):
        grid = build_grid("interval", [0, 1], 17)
        result = spectral.singular_torsion(grid, 2.5, 0.0)
        print_test_message("singular_torsion(gamma = 0)", actual=result.certificate)
        self.assertLessEqual(sup_error(result.solution, 1.0), 1e-10)

    def test_forcing_mass(self):
        grid = build_grid("rectangle", [0, 1, 0, 1], 9)
        forcing = spectral.cell_center_forcing(grid, -0.5)
        actual = float(numpy.sum(grid.volumes * forcing.values))
        expected = float(grid.cell_measure * numpy.sum(grid.cell_center_distances() ** -0.5))
        print_test_message("cell_center_forcing mass", actual=actual, expected=expected)
        self.assertAlmostEqual(actual, expected, 12)

    def test_self_oracle(self):
        coarse = build_grid("interval", [0, 1], 1025)
        fine = coarse.refine(4)
        zc = spectral.singular_torsion(coarse, 2, -0.5)
        zf = spectral.singular_torsion(fine, 2, -0.5)
        actual = abs(zc.certificate["sup"] - zf.certificate["sup"]) / zf.certificate["sup"]
        print_test_message("singular_torsion self-oracle", coarse=zc.certificate,
                           fine=zf.certificate, actual=actual)
        self.assertLessEqual(actual, 0.02)
        self.assertGreater(zc.certificate["c1"], 0)

    def test_monotone_in_gamma(self):
        grid = build_grid("interval", [0, 1], 65)
        solutions = [spectral.singular_torsion(grid, 2, g).solution.values
                     for g in (0.0, -0.25, -0.5, -0.75)]
        steps = [float(numpy.min(b - a)) for a, b in zip(solutions[:-1], solutions[1:])]
        print_test_message("singular_torsion monotone in gamma", actual=steps)
        self.assertTrue(all(s >= -1e-9 for s in steps))
        self.assertTrue(all(numpy.all(z > 0) for z in solutions))


class BoundednessTests(unittest.TestCase):
    def test_bounded_ladder_2d(self):
        ladder = refinement_ladder(build_grid("rectangle", [0, 1, 0, 1], 33), 3)
        with warnings.catch_warnings():
            warnings.simplefilter("error", AdvisoryWarning)
            report = spectral.boundedness_check(ladder, 2, -0.4)
        print_test_message("boundedness_check(gamma = -0.4)", actual=report.todict())
        self.assertTrue(report.holds)
        self.assertEqual(len(report.sups), 3)
        self.assertLessEqual(report.drift, 0.05)
        self.assertEqual(report.spacings, (1.0 / 32, 1.0 / 64, 1.0 / 128))

    def test_unbounded_regime_warns(self):
        ladder = refinement_ladder(build_grid("rectangle", [0, 1, 0, 1], 9), 3)
        print_test_message("boundedness_check(gamma = -0.6)")
        with self.assertWarns(AdvisoryWarning):
            report = spectral.boundedness_check(ladder, 2, -0.6)
        self.assertFalse(report.holds)

    def test_ladder_too_short(self):
        ladder = refinement_ladder(build_grid("interval", [0, 1], 9), 2)
        print_test_message("boundedness_check(2 levels)")
        self.assertRaises(ConfigurationError, spectral.boundedness_check, ladder, 2, -0.4)

    def test_mixed_domains(self):
        grids = [build_grid("interval", [0, 1], 9), build_grid("interval", [0, 2], 17),
                 build_grid("interval", [0, 1], 33)]
        print_test_message("boundedness_check(mixed domains)")
        self.assertRaises(ConfigurationError, spectral.boundedness_check, grids, 2, -0.4)


if __name__ == "__main__":
    unittest.main()
