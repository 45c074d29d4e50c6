"""
Run Pipeline

This module contains the RunConfig record with its parser and canonical
serializer, the Pipeline that executes one subcommand of the command-line
tool and persists its results, and the RunManifest that records them.

Copyright 2020-2026, University Corporation for Atmospheric Research
LICENSE: See the LICENSE.rst file for details
"""

import json
import os
import time
from collections import OrderedDict, namedtuple
from os.path import exists, join
from warnings import warn

import numpy
from asaptools.simplecomm import create_comm

from pyenclose.bounds import (
    RECIPES,
    T5,
    T9,
    auto_lambda,
    build_auxiliary,
    check_recipe,
    construct,
    verify_pair,
)
from pyenclose.enclosure import (
    FROM_LOWER,
    FROM_UPPER,
    FixedPointConfig,
    solve_system,
    uniqueness_experiment,
    uniqueness_todict,
)
from pyenclose.errors import (
    AdvisoryWarning,
    CertificateWarning,
    ConfigurationError,
    EnclosureError,
    IterationLimitError,
)
from pyenclose.exponents import ExponentSet, validate_exponents
from pyenclose.fields import midline_nodes, read_csv, write_csv
from pyenclose.grids import Grid, refinement_ladder
from pyenclose.parsing import parse_assignments
from pyenclose.plap import DIRICHLET, NEUMANN, ScalarSolveConfig
from pyenclose.spectral import (
    EigenPair,
    boundedness_check,
    first_eigenpair_dirichlet,
    first_eigenpair_neumann,
    torsion,
)

SCHEMA_VERSION = 1
MANIFEST_NAME = "manifest.json"

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_CERTIFICATE = 3
EXIT_CONVERGENCE = 4

SUBCOMMANDS = (
    "eigen",
    "torsion",
    "construct",
    "verify",
    "solve",
    "uniqueness",
    "boundedness",
    "report",
)

AUTO = "auto"

# Configuration keys in canonical order, with their RunConfig field names
_KEYS_ = OrderedDict(
    [
        ("kind", "kind"),
        ("extents", "extents"),
        ("nodes", "nodes"),
        ("levels", "levels"),
        ("p1", "p1"),
        ("p2", "p2"),
        ("alpha1", "alpha1"),
        ("beta1", "beta1"),
        ("alpha2", "alpha2"),
        ("beta2", "beta2"),
        ("recipe", "recipe"),
        ("lambda", "lam"),
        ("gamma", "gamma"),
        ("tol_res", "tol_res"),
        ("eps_grad", "eps_grad"),
        ("max_inner_iterations", "max_inner_iterations"),
        ("damping", "damping"),
        ("tol_outer", "tol_outer"),
        ("max_outer_iterations", "max_outer_iterations"),
        ("theta", "theta"),
        ("start", "start"),
        ("uniqueness", "uniqueness"),
        ("tol_order", "tol_order"),
        ("output", "output"),
    ]
)

_REQUIRED_ = ("kind", "extents", "nodes", "p1", "p2", "alpha1", "beta1", "alpha2", "beta2")

_DEFAULTS_ = {
    "levels": 3,
    "recipe": "T1",
    "lambda": AUTO,
    "gamma": None,
    "tol_res": 1e-9,
    "eps_grad": 1e-8,
    "max_inner_iterations": 100,
    "damping": 1.0,
    "tol_outer": 1e-8,
    "max_outer_iterations": 500,
    "theta": 1.0,
    "start": FROM_LOWER,
    "uniqueness": False,
    "tol_order": 1e-10,
    "output": "run",
}

_TRUE_ = ("true", "yes", "on")
_FALSE_ = ("false", "no", "off")


class RunConfig(namedtuple("RunConfig", list(_KEYS_.values()))):
    """
    A fully validated run configuration

    Built by 'parse_config'; 'serialize_config' writes it back in canonical
    form.  Use 'grid', 'exponents', 'solver_config' and 'outer_config' to get
    the objects the computations take.
    """

    __slots__ = ()

    def grid(self):
        return Grid(self.kind, self.extents, self.nodes)

    def exponents(self):
        return ExponentSet(self.p1, self.p2, self.alpha1, self.beta1, self.alpha2, self.beta2)

    def solver_config(self):
        return ScalarSolveConfig(
            eps_grad=self.eps_grad,
            tol_res=self.tol_res,
            max_inner_iterations=self.max_inner_iterations,
            damping=self.damping,
        )

    def outer_config(self, start=None):
        return FixedPointConfig(
            tol_outer=self.tol_outer,
            max_outer_iterations=self.max_outer_iterations,
            start=self.start if start is None else start,
            inner=self.solver_config(),
            theta=self.theta,
            tol_order=self.tol_order,
        )

    def todict(self):
        return OrderedDict((key, getattr(self, name)) for key, name in _KEYS_.items())


def _single_(key, values):
    if len(values) != 1:
        raise ConfigurationError("{} takes a single value, got {}".format(key, len(values)))
    return values[0]


def _as_float_(key, values):
    value = _single_(key, values)
    if isinstance(value, str):
        raise ConfigurationError("{} must be a number, got {!r}".format(key, value))
    return float(value)


def _as_int_(key, values):
    value = _single_(key, values)
    if not isinstance(value, int):
        raise ConfigurationError("{} must be an integer, got {!r}".format(key, value))
    return value


def _as_name_(key, values, choices=None):
    value = _single_(key, values)
    if not isinstance(value, str):
        raise ConfigurationError("{} must be a name, got {!r}".format(key, value))
    if choices is not None and value not in choices:
        raise ConfigurationError(
            "{} must be one of {}, got {!r}".format(key, ", ".join(choices), value)
        )
    return value


def _as_bool_(key, values):
    value = str(_single_(key, values)).lower()
    if value in _TRUE_:
        return True
    if value in _FALSE_:
        return False
    raise ConfigurationError("{} must be true or false, got {!r}".format(key, value))


def _as_floats_(key, values):
    if any(isinstance(v, str) for v in values):
        raise ConfigurationError("{} must be a list of numbers".format(key))
    return tuple(float(v) for v in values)


def _as_ints_(key, values):
    if not all(isinstance(v, int) for v in values):
        raise ConfigurationError("{} must be a list of integers".format(key))
    return tuple(values)


def _as_lambda_(key, values):
    value = _single_(key, values)
    if value == AUTO:
        return AUTO
    lam = _as_float_(key, values)
    if not lam > 1:
        raise ConfigurationError("lambda must exceed 1, got {}".format(lam))
    return lam


_CONVERTERS_ = {
    "kind": lambda k, v: _as_name_(k, v, ("interval", "rectangle")),
    "extents": _as_floats_,
    "nodes": _as_ints_,
    "levels": _as_int_,
    "p1": _as_float_,
    "p2": _as_float_,
    "alpha1": _as_float_,
    "beta1": _as_float_,
    "alpha2": _as_float_,
    "beta2": _as_float_,
    "recipe": lambda k, v: _as_name_(k, v, RECIPES),
    "lambda": _as_lambda_,
    "gamma": _as_float_,
    "tol_res": _as_float_,
    "eps_grad": _as_float_,
    "max_inner_iterations": _as_int_,
    "damping": _as_float_,
    "tol_outer": _as_float_,
    "max_outer_iterations": _as_int_,
    "theta": _as_float_,
    "start": lambda k, v: _as_name_(k, v, (FROM_LOWER, FROM_UPPER)),
    "uniqueness": _as_bool_,
    "tol_order": _as_float_,
    "output": lambda k, v: str(_single_(k, v)),
}


def parse_config(text):
    """
    Parse and validate configuration text

    Unknown keys and missing required keys are rejected, defaults are filled
    in, and the grid, exponents, recipe and solver settings are validated.

    Raises:
        ConfigSyntaxError: Malformed text (with line number)
        ConfigurationError: A semantic error naming the offending key
    """
    assignments = parse_assignments(text)
    unknown = [k for k in assignments if k not in _KEYS_]
    if unknown:
        stmt = assignments[unknown[0]]
        raise ConfigurationError(
            "line {}: unknown key {!r} (known keys: {})".format(
                stmt.lineno, stmt.key, ", ".join(_KEYS_)
            )
        )
    missing = [k for k in _REQUIRED_ if k not in assignments]
    if missing:
        raise ConfigurationError("Missing required keys: {}".format(", ".join(missing)))

    values = OrderedDict()
    for key in _KEYS_:
        if key in assignments:
            stmt = assignments[key]
            try:
                values[key] = _CONVERTERS_[key](key, stmt.values)
            except ConfigurationError as err:
                raise ConfigurationError("line {}: {}".format(stmt.lineno, err))
        else:
            values[key] = _DEFAULTS_[key]
    if values["gamma"] is None:
        values["gamma"] = values["beta1"]
    config = RunConfig(*values.values())
    validate_config(config)
    return config


def validate_config(config):
    """
    Check the semantic validity of a RunConfig, raising ConfigurationError
    """
    grid = config.grid()
    if config.levels < 3:
        raise ConfigurationError("levels must be at least 3, got {}".format(config.levels))
    e = config.exponents()
    report = validate_exponents(e, grid.ndim)
    for check in report.checks:
        if not check.passed:
            raise ConfigurationError(
                "Exponent regime violated: {} (got {})".format(check.label, check.value)
            )
    check_recipe(e, config.recipe, grid.ndim)
    config.outer_config()
    if not config.tol_order >= 0:
        raise ConfigurationError("tol_order must be nonnegative")


def _format_value_(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return "%.17g" % value
    if isinstance(value, tuple):
        return ", ".join(_format_value_(v) for v in value)
    return str(value)


def serialize_config(config):
    """
    Canonical text form of a RunConfig (every key, fixed order)
    """
    lines = []
    for key, value in config.todict().items():
        text = '"{}"'.format(value) if key == "output" else _format_value_(value)
        lines.append("{} = {}".format(key, text))
    return "\n".join(lines) + "\n"


def read_config(path):
    """
    Read and parse a configuration file
    """
    with open(path, "r") as fobj:
        return parse_config(fobj.read())


def exit_status(err):
    """
    Map an exception onto the documented exit status
    """
    if isinstance(err, ConfigurationError):
        return EXIT_CONFIG
    if isinstance(err, IterationLimitError):
        return EXIT_CONVERGENCE
    return EXIT_CERTIFICATE


def _json_default_(obj):
    if isinstance(obj, numpy.generic):
        return obj.item()
    if isinstance(obj, numpy.ndarray):
        return obj.tolist()
    raise TypeError("Object of type {} is not JSON serializable".format(type(obj).__name__))


class RunManifest(object):
    """
    The record of one run: config echo, certificates, solutions and files
    """

    def __init__(self, subcommand, config=None, seed=None, data=None):
        if data is not None:
            self._data = data
            return
        self._data = OrderedDict(
            [
                ("schema_version", SCHEMA_VERSION),
                ("subcommand", subcommand),
                ("status", None),
                ("exit_status", None),
                ("seed", seed),
                ("config", None if config is None else config.todict()),
                ("grid", None if config is None else config.grid().describe()),
                ("certificates", OrderedDict()),
                ("solutions", OrderedDict()),
                ("uniqueness", None),
                ("boundedness", None),
                ("fields", OrderedDict()),
                ("errors", []),
                ("notes", []),
                ("timings", OrderedDict()),
            ]
        )

    def __getitem__(self, key):
        return self._data[key]

    def __setitem__(self, key, value):
        self._data[key] = value

    def __contains__(self, key):
        return key in self._data

    @property
    def fields(self):
        return self._data["fields"]

    @property
    def status(self):
        return self._data["status"]

    @property
    def exit_status(self):
        return self._data["exit_status"]

    def grid(self):
        return Grid.from_descriptor(self._data["grid"])

    def finish(self, status, exit_code):
        self._data["status"] = status
        self._data["exit_status"] = exit_code

    def todict(self):
        return self._data

    def dumps(self):
        return json.dumps(self._data, indent=2, default=_json_default_) + "\n"

    def write(self, directory):
        path = join(directory, MANIFEST_NAME)
        with open(path, "w") as fobj:
            fobj.write(self.dumps())
        return path

    @staticmethod
    def load(directory):
        path = join(directory, MANIFEST_NAME)
        with open(path, "r") as fobj:
            data = json.load(fobj, object_pairs_hook=OrderedDict)
        if data.get("schema_version") != SCHEMA_VERSION:
            raise ValueError(
                "Manifest {!r} has schema version {!r}, expected {}".format(
                    path, data.get("schema_version"), SCHEMA_VERSION
                )
            )
        return RunManifest(data["subcommand"], data=data)


def _certificate_(obj):
    if isinstance(obj, EigenPair):
        return obj.todict()
    return obj.certificate


def _worker_comm_(scomm, threads):
    # Ranks at or beyond the thread cap get their own group and sit the ladder out
    if threads is None or scomm.get_size() <= threads:
        return scomm, True
    member = scomm.get_rank() < threads
    workers, _ = scomm.divide(0 if member else 1)
    return workers, member


class Pipeline(object):
    """
    Executes one subcommand on a RunConfig and persists the results

    Single-grid computations run on the manager rank; the boundedness ladder
    is spread over the worker ranks.
    """

    def __init__(self, config, outdir, seed=None, scomm=None, threads=None):
        """
        Initializer

        Parameters:
            config (RunConfig): The validated configuration
            outdir (str): The run directory
            seed (int): Seed of the random initial eigen iterate (None uses d(x))
            scomm (SimpleComm): The communicator (serial if None)
            threads (int): Cap on the number of worker ranks
        """
        self._config = config
        self._outdir = outdir
        self._seed = seed
        self._scomm = create_comm(serial=True) if scomm is None else scomm
        self._threads = threads
        self._grid = config.grid()
        self._exponents = config.exponents()
        self._manifest = None
        self._aux = None
        self._pair = None

    @property
    def manifest(self):
        return self._manifest

    def _prefix_(self):
        return "[{}/{}]".format(self._scomm.get_rank(), self._scomm.get_size())

    def _log_(self, message):
        if self._scomm.is_manager():
            print("{} {}".format(self._prefix_(), message))

    def _timed_(self, name, func, *args):
        start = time.time()
        result = func(*args)
        self._manifest["timings"][name] = time.time() - start
        return result

    def _store_(self, name, field):
        fname = "{}.csv".format(name)
        write_csv(field, join(self._outdir, fname))
        self._manifest["fields"][name] = fname

    def _advise_(self):
        report = validate_exponents(self._exponents, self._grid.ndim)
        for advisory in report.advisories:
            self._manifest["notes"].append("advisory: {}".format(advisory))
            warn(advisory, AdvisoryWarning)

    def _initial_eigen_iterate_(self):
        if self._seed is None:
            return None
        return numpy.random.RandomState(self._seed).uniform(0.5, 1.5, self._grid.size)

    def _stage_eigen_(self):
        grid, e = self._grid, self._exponents
        cfg = self._config.solver_config()
        certificates = self._manifest["certificates"].setdefault("eigen", OrderedDict())
        initial = self._initial_eigen_iterate_()
        pairs = {}
        for i, p in ((1, e.p1), (2, e.p2)):
            if p not in pairs:
                pairs[p] = (
                    first_eigenpair_dirichlet(grid, p, cfg, initial=initial),
                    first_eigenpair_neumann(grid, p),
                )
            phi, phi_hat = pairs[p]
            certificates["phi{}".format(i)] = phi.todict()
            certificates["phi_hat{}".format(i)] = phi_hat.todict()
            self._store_("phi{}".format(i), phi.eigenfunction)

    def _stage_torsion_(self):
        grid, e = self._grid, self._exponents
        cfg = self._config.solver_config()
        certificates = self._manifest["certificates"].setdefault("torsion", OrderedDict())
        results = {}
        for i, p in ((1, e.p1), (2, e.p2)):
            if p not in results:
                results[p] = (torsion(grid, p, DIRICHLET, cfg), torsion(grid, p, NEUMANN, cfg))
            y, y_hat = results[p]
            certificates["y{}".format(i)] = y.certificate
            certificates["y_hat{}".format(i)] = y_hat.certificate
            self._store_("y{}".format(i), y.solution)
            self._store_("y_hat{}".format(i), y_hat.solution)

    def _stage_construct_(self):
        config = self._config
        grid, e = self._grid, self._exponents
        aux = build_auxiliary(
            grid, e, config.recipe, config.solver_config(), self._initial_eigen_iterate_()
        )
        self._manifest["certificates"]["auxiliary"] = OrderedDict(
            (name, _certificate_(obj)) for name, obj in aux.items()
        )
        if config.lam == AUTO:
            pair, certificate = auto_lambda(grid, e, config.recipe, aux, tol=config.tol_order)
            self._manifest["certificates"]["hypotheses"] = certificate.todict()
        else:
            pair = construct(config.recipe, grid, e, config.lam, aux)
        self._manifest["certificates"]["pair"] = pair.todict()
        for name, field in pair.fields().items():
            self._store_(name, field)
        self._aux = aux
        self._pair = pair

    def _stage_verify_(self):
        certificate = verify_pair(self._pair, self._exponents, tol=self._config.tol_order)
        self._manifest["certificates"]["hypotheses"] = certificate.todict()
        if not certificate.passed:
            warn(
                "Barrier hypotheses failed: {}".format(", ".join(certificate.failures())),
                CertificateWarning,
            )
        return certificate.passed

    def _start_(self):
        start = self._config.start
        if start == FROM_LOWER and self._pair.recipe in (T5, T9):
            self._manifest["notes"].append(
                "recipe {} has lower fields vanishing on the boundary; "
                "starting from the upper barrier".format(self._pair.recipe)
            )
            self._log_("Lower barrier vanishes on the boundary, starting from the upper barrier")
            start = FROM_UPPER
        return start

    def _stage_solve_(self):
        cfg = self._config.outer_config(start=self._start_())
        solution = solve_system(self._grid, self._exponents, self._pair, cfg, check_pair=False)
        self._manifest["solutions"]["system"] = solution.todict()
        self._store_("u", solution.u)
        self._store_("v", solution.v)
        self._store_("residual_u", solution.residual_u)
        self._store_("residual_v", solution.residual_v)
        return solution.converged

    def _stage_uniqueness_(self):
        report = uniqueness_experiment(
            self._grid, self._exponents, self._pair, self._config.outer_config()
        )
        self._manifest["uniqueness"] = uniqueness_todict(report)
        s_lower, s_upper = report.solutions
        self._manifest["solutions"]["from_lower"] = s_lower.todict()
        self._manifest["solutions"]["from_upper"] = s_upper.todict()
        self._store_("u_from_lower", s_lower.u)
        self._store_("v_from_lower", s_lower.v)
        self._store_("u_from_upper", s_upper.u)
        self._store_("v_from_upper", s_upper.v)

    def _stage_boundedness_(self, workers):
        config = self._config
        ladder = refinement_ladder(self._grid, config.levels)
        report = boundedness_check(
            ladder, config.p1, config.gamma, config.solver_config(), scomm=workers
        )
        self._manifest["boundedness"] = report.todict()

    def _execute_stages_(self, subcommand):
        if subcommand == "eigen":
            self._timed_("eigen", self._stage_eigen_)
            return EXIT_OK
        if subcommand == "torsion":
            self._timed_("torsion", self._stage_torsion_)
            return EXIT_OK

        self._timed_("construct", self._stage_construct_)
        if subcommand == "construct":
            return EXIT_OK
        if not self._timed_("verify", self._stage_verify_):
            failures = self._manifest["certificates"]["hypotheses"]["failures"]
            self._manifest["errors"].append(
                "Barrier hypotheses failed: {}".format(", ".join(failures))
            )
            return EXIT_CERTIFICATE
        if subcommand == "verify":
            return EXIT_OK

        if subcommand == "uniqueness" or self._config.uniqueness:
            self._timed_("uniqueness", self._stage_uniqueness_)
        if subcommand == "solve":
            if not self._timed_("solve", self._stage_solve_):
                self._manifest["errors"].append("Outer iteration did not converge")
                return EXIT_CONVERGENCE
        return EXIT_OK

    def execute(self, subcommand):
        """
        Run a subcommand and write the manifest and fields to the run directory

        Returns:
            RunManifest with 'status' and 'exit_status' filled in
        """
        if subcommand not in SUBCOMMANDS or subcommand == "report":
            raise ConfigurationError("Unknown run subcommand {!r}".format(subcommand))
        scomm = self._scomm
        self._manifest = RunManifest(subcommand, self._config, self._seed)
        if scomm.is_manager() and not exists(self._outdir):
            os.makedirs(self._outdir)
        scomm.sync()

        code = EXIT_OK
        if subcommand == "boundedness":
            workers, member = _worker_comm_(scomm, self._threads)
            if member:
                self._log_("Running boundedness ladder with {} levels".format(self._config.levels))
                try:
                    if scomm.is_manager():
                        self._advise_()
                    self._timed_("boundedness", self._stage_boundedness_, workers)
                except Exception as err:
                    code = self._record_(err)
        elif scomm.is_manager():
            self._log_("Running {} ({} recipe)".format(subcommand, self._config.recipe))
            try:
                self._advise_()
                code = self._execute_stages_(subcommand)
            except Exception as err:
                code = self._record_(err)
        scomm.sync()

        if scomm.is_manager():
            self._manifest.finish("ok" if code == EXIT_OK else "failed", code)
            self._manifest.write(self._outdir)
            self._log_("Run {}: exit status {}".format(self._manifest.status, code))
        return self._manifest

    def _record_(self, err):
        if isinstance(err, EnclosureError) and err.solution is not None:
            self._manifest["solutions"]["system"] = err.solution.todict()
        self._manifest["errors"].append("{}: {}".format(type(err).__name__, err))
        return exit_status(err)


def run(config, subcommand="solve", outdir=None, seed=None, scomm=None, threads=None):
    """
    Execute one subcommand for a RunConfig

    Parameters:
        config (RunConfig): The validated configuration
        subcommand (str): One of SUBCOMMANDS except 'report'
        outdir (str): Run directory (defaults to config.output)
        seed (int): Seed of the random initial eigen iterate
        scomm (SimpleComm): Communicator (serial if None)
        threads (int): Cap on the number of worker ranks

    Returns:
        RunManifest
    """
    outdir = config.output if outdir is None else outdir
    return Pipeline(config, outdir, seed=seed, scomm=scomm, threads=threads).execute(subcommand)


def emit_plot_data(manifest, which="all", outdir="."):
    """
    Write '<field>.csv' and the cross-section '<field>.midline.csv' per field

    Parameters:
        manifest (RunManifest): A manifest whose fields live in outdir
        which (str): A field name, or 'all'
        outdir (str): The run directory

    Returns:
        list of the file names written
    """
    fields = manifest.fields
    if which == "all":
        names = sorted(fields)
    elif which in fields:
        names = [which]
    else:
        raise KeyError(
            "Unknown field {!r}; available fields: {}".format(which, ", ".join(sorted(fields)))
        )
    grid = manifest.grid()
    written = []
    for name in names:
        field = read_csv(join(outdir, fields[name]), grid, name=name)
        fname = "{}.csv".format(name)
        mname = "{}.midline.csv".format(name)
        write_csv(field, join(outdir, fname))
        write_csv(field, join(outdir, mname), nodes=midline_nodes(grid))
        written.extend([fname, mname])
    return written


def summarize(manifest):
    """
    Return printable summary lines of a RunManifest
    """
    lines = [
        "subcommand: {}".format(manifest["subcommand"]),
        "status: {} (exit {})".format(manifest.status, manifest.exit_status),
    ]
    hypotheses = manifest["certificates"].get("hypotheses")
    if hypotheses is not None:
        lines.append("hypotheses passed: {}".format(hypotheses["passed"]))
    pair = manifest["certificates"].get("pair")
    if pair is not None:
        lines.append("recipe {} with lambda = {}".format(pair["recipe"], pair["lambda"]))
    for name, sol in manifest["solutions"].items():
        lines.append(
            "{}: converged={} enclosed={} u in [{:.9g}, {:.9g}], v in [{:.9g}, {:.9g}]".format(
                name, sol["converged"], sol["enclosed"], sol["u_min"], sol["u_max"],
                sol["v_min"], sol["v_max"]
            )
        )
    if manifest["uniqueness"] is not None:
        uniq = manifest["uniqueness"]
        lines.append(
            "uniqueness gate: {}, tau = {:.12g}, distance = {:.3e}".format(
                uniq["gate"]["verdict"], uniq["tau"], uniq["distance"]
            )
        )
    if manifest["boundedness"] is not None:
        bnd = manifest["boundedness"]
        lines.append("boundedness: {} (drift {:.3e})".format(bnd["message"], bnd["drift"]))
    for err in manifest["errors"]:
        lines.append("error: {}".format(err))
    lines.append("fields: {}".format(", ".join(sorted(manifest.fields)) or "none"))
    return lines
