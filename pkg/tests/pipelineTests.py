"""
Run Pipeline Unit Tests

Copyright 2020-2026, University Corporation for Atmospheric Research
LICENSE: See the LICENSE.rst file for details
"""

import json
import shutil
import tempfile
import unittest
import warnings
from os import listdir
from os.path import exists, join

from pyenclose import errors, pipeline
from pyenclose.errors import (
    AdvisoryWarning,
    CertificateWarning,
    ConfigurationError,
    ConvergenceWarning,
)

from .testutils import MINIMAL_CONFIG, print_test_message

CONSTANT_SOLUTION = 2.0 ** (2.0 / 3)


def _config_(extra=""):
    return pipeline.parse_config(MINIMAL_CONFIG + extra)


def _read_(path):
    with open(path, "r") as fobj:
        return fobj.read()


class ExitStatusTests(unittest.TestCase):
    def test_mapping(self):
        actual = [
            pipeline.exit_status(errors.ConfigSyntaxError("x")),
            pipeline.exit_status(errors.RecipeMismatchError("x")),
            pipeline.exit_status(errors.CertificateError("x")),
            pipeline.exit_status(errors.EnclosureError("x")),
            pipeline.exit_status(errors.SingularityError("x")),
            pipeline.exit_status(errors.PreconditionError("x")),
            pipeline.exit_status(errors.IterationLimitError("x")),
            pipeline.exit_status(RuntimeError("x")),
        ]
        expected = [2, 2, 3, 3, 3, 3, 4, 3]
        print_test_message("exit_status", actual=actual, expected=expected)
        self.assertEqual(actual, expected)


class PipelineTests(unittest.TestCase):
    def setUp(self):
        self.tmpdir = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.tmpdir)

    def test_solve(self):
        outdir = join(self.tmpdir, "solve")
        manifest = pipeline.run(_config_(), "solve", outdir=outdir)
        system = manifest["solutions"]["system"]
        print_test_message("run(solve)", status=manifest.status, system=system)
        self.assertEqual(manifest.exit_status, pipeline.EXIT_OK)
        self.assertEqual(manifest.status, "ok")
        self.assertAlmostEqual(system["u_max"], CONSTANT_SOLUTION, 6)
        self.assertAlmostEqual(system["v_min"], CONSTANT_SOLUTION, 6)
        self.assertTrue(system["enclosed"])
        self.assertEqual(manifest["certificates"]["pair"]["lambda"], 4.0)
        self.assertTrue(manifest["certificates"]["hypotheses"]["passed"])
        for name in ("u", "v", "residual_u", "residual_v", "u_lower", "v_upper"):
            self.assertTrue(exists(join(outdir, manifest.fields[name])), name)
        self.assertTrue(exists(join(outdir, pipeline.MANIFEST_NAME)))

    def test_deterministic(self):
        first, second = join(self.tmpdir, "a"), join(self.tmpdir, "b")
        pipeline.run(_config_(), "solve", outdir=first)
        pipeline.run(_config_(), "solve", outdir=second)
        manifests = []
        for outdir in (first, second):
            data = json.loads(_read_(join(outdir, pipeline.MANIFEST_NAME)))
            data.pop("timings")
            manifests.append(data)
        print_test_message("run(solve) twice", files=sorted(listdir(first)))
        self.assertEqual(manifests[0], manifests[1])
        self.assertEqual(sorted(listdir(first)), sorted(listdir(second)))
        for fname in listdir(first):
            if fname.endswith(".csv"):
                self.assertEqual(_read_(join(first, fname)), _read_(join(second, fname)), fname)

    def test_manifest_round_trip(self):
        outdir = join(self.tmpdir, "construct")
        manifest = pipeline.run(_config_(), "construct", outdir=outdir)
        loaded = pipeline.RunManifest.load(outdir)
        print_test_message("RunManifest.load", actual=loaded["subcommand"])
        self.assertEqual(loaded["subcommand"], "construct")
        self.assertEqual(loaded["schema_version"], pipeline.SCHEMA_VERSION)
        self.assertEqual(loaded.grid(), manifest.grid())
        self.assertEqual(loaded["config"]["recipe"], "T1")
        self.assertNotIn("u", loaded.fields)

    def test_manifest_schema_version(self):
        outdir = join(self.tmpdir, "eigen")
        pipeline.run(_config_(), "eigen", outdir=outdir)
        path = join(outdir, pipeline.MANIFEST_NAME)
        data = json.loads(_read_(path))
        data["schema_version"] = 99
        with open(path, "w") as fobj:
            json.dump(data, fobj)
        print_test_message("RunManifest.load(schema 99)")
        self.assertRaises(ValueError, pipeline.RunManifest.load, outdir)

    def test_eigen_and_torsion(self):
        config = _config_()
        eigen = pipeline.run(config, "eigen", outdir=join(self.tmpdir, "e"))
        tors = pipeline.run(config, "torsion", outdir=join(self.tmpdir, "t"))
        print_test_message("run(eigen/torsion)", eigen=sorted(eigen.fields),
                           torsion=sorted(tors.fields))
        self.assertEqual(sorted(eigen.fields), ["phi1", "phi2"])
        self.assertEqual(sorted(tors.fields), ["y1", "y2", "y_hat1", "y_hat2"])
        self.assertIn("phi_hat1", eigen["certificates"]["eigen"])
        self.assertEqual(tors.exit_status, pipeline.EXIT_OK)

    def test_seeded_eigen(self):
        manifest = pipeline.run(_config_(), "eigen", outdir=self.tmpdir, seed=12345)
        print_test_message("run(eigen, seed)", seed=manifest["seed"])
        self.assertEqual(manifest["seed"], 12345)
        self.assertEqual(manifest.exit_status, pipeline.EXIT_OK)

    def test_certificate_failure(self):
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", CertificateWarning)
            manifest = pipeline.run(_config_("lambda = 2\n"), "verify", outdir=self.tmpdir)
        print_test_message("run(verify, lambda = 2)", errors=manifest["errors"])
        self.assertEqual(manifest.exit_status, pipeline.EXIT_CERTIFICATE)
        self.assertEqual(manifest.status, "failed")
        self.assertIn("super:u", manifest["certificates"]["hypotheses"]["failures"])
        self.assertTrue(any(issubclass(w.category, CertificateWarning) for w in caught))

    def test_certificate_failure_as_error(self):
        config = _config_("lambda = 2\n")
        with warnings.catch_warnings():
            warnings.simplefilter("error", CertificateWarning)
            manifest = pipeline.run(config, "verify", outdir=self.tmpdir)
        print_test_message("run(verify, lambda = 2, warnings as errors)", errors=manifest["errors"])
        self.assertEqual(manifest.exit_status, pipeline.EXIT_CERTIFICATE)
        self.assertTrue(manifest["errors"][0].startswith("CertificateWarning"))

    def test_dimension_advisory(self):
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", AdvisoryWarning)
            manifest = pipeline.run(_config_(), "torsion", outdir=self.tmpdir)
        messages = [str(w.message) for w in caught if issubclass(w.category, AdvisoryWarning)]
        print_test_message("run(torsion, p = N = 1)", notes=manifest["notes"])
        self.assertEqual(manifest.exit_status, pipeline.EXIT_OK)
        self.assertEqual(
            manifest["notes"],
            [
                "advisory: p1 = 2.0 is not below the dimension N = 1",
                "advisory: p2 = 2.0 is not below the dimension N = 1",
            ],
        )
        self.assertEqual(len(messages), 2)

    def test_outer_nonconvergence(self):
        config = _config_("max_outer_iterations = 2\n")
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", ConvergenceWarning)
            manifest = pipeline.run(config, "solve", outdir=self.tmpdir)
        print_test_message("run(solve, max_outer_iterations = 2)", errors=manifest["errors"])
        self.assertEqual(manifest.exit_status, pipeline.EXIT_CONVERGENCE)
        self.assertFalse(manifest["solutions"]["system"]["converged"])
        self.assertTrue(any(issubclass(w.category, ConvergenceWarning) for w in caught))

    def test_inner_iteration_limit(self):
        config = _config_()._replace(p1=3.0, p2=3.0, max_inner_iterations=1)
        manifest = pipeline.run(config, "torsion", outdir=self.tmpdir)
        print_test_message("run(torsion, max_inner_iterations = 1)", errors=manifest["errors"])
        self.assertEqual(manifest.exit_status, pipeline.EXIT_CONVERGENCE)
        self.assertIn("IterationLimitError", manifest["errors"][0])

    def test_uniqueness(self):
        manifest = pipeline.run(_config_(), "uniqueness", outdir=self.tmpdir)
        uniq = manifest["uniqueness"]
        print_test_message("run(uniqueness)", actual=uniq)
        self.assertEqual(manifest.exit_status, pipeline.EXIT_OK)
        self.assertEqual(uniq["gate"]["verdict"], "pass")
        self.assertLess(uniq["distance"], 1e-6)
        self.assertTrue(uniq["scaling"]["passed"])
        self.assertEqual(sorted(manifest["solutions"]), ["from_lower", "from_upper"])

    def test_boundedness(self):
        manifest = pipeline.run(_config_(), "boundedness", outdir=self.tmpdir)
        bnd = manifest["boundedness"]
        print_test_message("run(boundedness)", actual=bnd)
        self.assertEqual(manifest.exit_status, pipeline.EXIT_OK)
        self.assertTrue(bnd["holds"])
        self.assertEqual(len(bnd["sups"]), 3)
        self.assertEqual(bnd["gamma"], -0.5)

    def test_unknown_subcommand(self):
        print_test_message("run(report)")
        self.assertRaises(ConfigurationError, pipeline.run, _config_(), "report", self.tmpdir)


class PlotDataTests(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.tmpdir = tempfile.mkdtemp()
        cls.manifest = pipeline.run(_config_(), "solve", outdir=cls.tmpdir)

    @classmethod
    def tearDownClass(cls):
        shutil.rmtree(cls.tmpdir)

    def test_single_field(self):
        written = pipeline.emit_plot_data(self.manifest, "u", self.tmpdir)
        header = _read_(join(self.tmpdir, "u.midline.csv")).splitlines()[0]
        print_test_message("emit_plot_data(u)", actual=written)
        self.assertEqual(written, ["u.csv", "u.midline.csv"])
        self.assertEqual(header, "x,value")

    def test_all_fields(self):
        written = pipeline.emit_plot_data(self.manifest, "all", self.tmpdir)
        print_test_message("emit_plot_data(all)", actual=written)
        self.assertEqual(len(written), 2 * len(self.manifest.fields))
        self.assertIn("residual_v.midline.csv", written)

    def test_unknown_field(self):
        print_test_message("emit_plot_data(w)")
        with self.assertRaises(KeyError) as ctx:
            pipeline.emit_plot_data(self.manifest, "w", self.tmpdir)
        self.assertIn("u_lower", str(ctx.exception))

    def test_summary(self):
        lines = pipeline.summarize(pipeline.RunManifest.load(self.tmpdir))
        print_test_message("summarize", actual=lines)
        self.assertEqual(lines[0], "subcommand: solve")
        self.assertEqual(lines[1], "status: ok (exit 0)")
        self.assertTrue(any(line.startswith("system: converged=True") for line in lines))


if __name__ == "__main__":
    unittest.main()
