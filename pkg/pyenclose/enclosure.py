"""
Enclosed System Solutions

This module computes a solution of the coupled Neumann system inside a
certified barrier rectangle by Picard iteration of the truncated map

    (u, v) -> (S_p1[f1(T1 u, T2 v)], S_p2[f2(T1 u, T2 v)])

where T1, T2 clamp onto [u_lower, u_upper] and [v_lower, v_upper] and S_p is
the scalar Neumann solve.  It also holds the uniqueness machinery: the
exponent gate, the scaling ratio tau between two solutions and the scaling
comparison of both solutions.

Copyright 2020-2026, University Corporation for Atmospheric Research
LICENSE: See the LICENSE.rst file for details
"""

import json
from collections import OrderedDict, namedtuple
from os.path import join
from warnings import warn

import numpy

from pyenclose.bounds import POSITIVE_RECIPES, verify_pair
from pyenclose.errors import (
    CertificateWarning,
    ConfigurationError,
    ConvergenceWarning,
    EnclosureError,
    PreconditionError,
    RecipeMismatchError,
    SingularityError,
)
from pyenclose.exponents import failed_checks, validate_exponents
from pyenclose.fields import (
    TOL_ORDER,
    ScalarField,
    boundary_flux,
    field_leq,
    getvalues,
    write_csv,
)
from pyenclose.plap import NEUMANN, ScalarSolveConfig, effective_eps, nodal_residual, solve_scalar

FROM_LOWER = "from_lower"
FROM_UPPER = "from_upper"

PASS = "pass"
FAIL = "fail"
INAPPLICABLE = "inapplicable"


class FixedPointConfig(
    namedtuple(
        "FixedPointConfig",
        ["tol_outer", "max_outer_iterations", "start", "inner", "theta", "flux_tolerance",
         "tol_order"],
    )
):
    """
    Settings of the outer (truncated Picard) iteration

    Parameters:
        tol_outer (float): Stop when the sup-norm change of both components is below this
        max_outer_iterations (int): Outer step limit
        start: 'from_lower', 'from_upper', or a (u, v) pair of fields
        inner (ScalarSolveConfig): Settings of the scalar solves
        theta (float): Damping, iterate <- (1 - theta) old + theta new, in (0, 1]
        flux_tolerance (float): Bound on the boundary flux (default 10 h)
        tol_order (float): Slack of the enclosure test
    """

    __slots__ = ()

    def __new__(cls, tol_outer=1e-8, max_outer_iterations=500, start=FROM_LOWER, inner=None,
                theta=1.0, flux_tolerance=None, tol_order=TOL_ORDER):
        if not tol_outer > 0:
            raise ConfigurationError("tol_outer must be positive, got {}".format(tol_outer))
        if int(max_outer_iterations) != max_outer_iterations or max_outer_iterations < 1:
            raise ConfigurationError("max_outer_iterations must be a positive integer")
        if not 0 < theta <= 1:
            raise ConfigurationError("theta must lie in (0, 1], got {}".format(theta))
        if isinstance(start, str) and start not in (FROM_LOWER, FROM_UPPER):
            raise ConfigurationError(
                "start must be {!r}, {!r} or a pair of fields".format(FROM_LOWER, FROM_UPPER)
            )
        inner = ScalarSolveConfig() if inner is None else inner
        return super(FixedPointConfig, cls).__new__(
            cls, float(tol_outer), int(max_outer_iterations), start, inner, float(theta),
            flux_tolerance, float(tol_order)
        )


class SystemSolution(
    namedtuple(
        "SystemSolution",
        ["u", "v", "iterations", "change", "residual_u", "residual_v", "enclosure", "enclosed",
         "flux", "flux_tolerance", "converged", "history", "start"],
    )
):
    """
    A computed solution (u, v) of the system with its diagnostics

    Parameters:
        u, v (ScalarField): The solution components
        iterations (int): Outer iterations used
        change (float): Final sup-norm change of the iterate
        residual_u, residual_v (ScalarField): Nodal residuals of both equations
        enclosure (OrderedDict): Comparison of every barrier bound
        enclosed (bool): Whether every bound holds within tol_order
        flux (float): Sup-norm of the discrete normal derivatives of u and v
        flux_tolerance (float): The bound the flux is held to
        converged (bool): Whether the outer tolerance was reached
        history (tuple): Change after every outer iteration
        start (str): The starting point used
    """

    __slots__ = ()

    @property
    def flux_ok(self):
        return self.flux <= self.flux_tolerance

    def todict(self):
        return OrderedDict(
            [
                ("converged", bool(self.converged)),
                ("iterations", self.iterations),
                ("change", self.change),
                ("start", self.start),
                ("residual_u", self.residual_u.sup_norm()),
                ("residual_v", self.residual_v.sup_norm()),
                ("enclosed", bool(self.enclosed)),
                (
                    "enclosure",
                    OrderedDict(
                        (k, {"passed": bool(c.passed), "margin": c.margin, "node": c.node})
                        for k, c in self.enclosure.items()
                    ),
                ),
                ("flux", self.flux),
                ("flux_tolerance", self.flux_tolerance),
                ("flux_ok", bool(self.flux_ok)),
                ("u_min", self.u.min()),
                ("u_max", self.u.max()),
                ("v_min", self.v.min()),
                ("v_max", self.v.max()),
            ]
        )


def write_solution(solution, directory, stem="solution"):
    """
    Write u and v as CSV and a JSON summary of a SystemSolution

    Returns:
        list of the file names written (relative to directory)
    """
    names = ["{}.u.csv".format(stem), "{}.v.csv".format(stem), "{}.json".format(stem)]
    write_csv(solution.u, join(directory, names[0]))
    write_csv(solution.v, join(directory, names[1]))
    with open(join(directory, names[2]), "w") as fobj:
        json.dump(solution.todict(), fobj, indent=2)
        fobj.write("\n")
    return names


GateVerdict = namedtuple(
    "GateVerdict",
    ["verdict", "applicable", "passed", "gamma1", "gamma2", "gamma_hat1", "gamma_hat2", "reason"],
)

ScalingReport = namedtuple(
    "ScalingReport", ["tau", "first_round", "second_round", "passed", "tol"]
)

UniquenessReport = namedtuple(
    "UniquenessReport", ["gate", "tau", "tau_bounds", "scaling", "distance", "solutions"]
)


def truncate(z, lower, upper, tol=TOL_ORDER):
    """
    Nodewise clamp of z into [lower, upper]

    Raises PreconditionError if lower exceeds upper by more than tol somewhere.
    """
    order = field_leq(lower, upper, tol)
    if not order.passed:
        raise PreconditionError(
            "Truncation band is not ordered at node {} {} (excess {:.3e})".format(
                order.node, order.coordinates, order.margin
            )
        )
    values = numpy.minimum(numpy.maximum(z.values, getvalues(lower)), getvalues(upper))
    return ScalarField(z.grid, values, name=z.name)


def _power_(field, exponent, label):
    values = field.values
    if exponent == 0:
        return numpy.ones_like(values)
    bad = values <= 0 if exponent < 0 else values < 0
    if numpy.any(bad):
        k = int(numpy.flatnonzero(bad)[0])
        raise SingularityError(
            "Base {} = {!r} cannot be raised to the power {}".format(label, values[k], exponent),
            node=k,
            coordinates=tuple(float(c) for c in field.grid.coordinates[k]),
        )
    return values ** exponent


def rhs_f1(u, v, e):
    """
    f1 = u^alpha1 + v^beta1, nodewise
    """
    return ScalarField(u.grid, _power_(u, e.alpha1, "u") + _power_(v, e.beta1, "v"), name="f1")


def rhs_f2(u, v, e):
    """
    f2 = u^alpha2 + v^beta2, nodewise
    """
    return ScalarField(u.grid, _power_(u, e.alpha2, "u") + _power_(v, e.beta2, "v"), name="f2")


def _start_(start, pair):
    if isinstance(start, str):
        if start == FROM_UPPER:
            return pair.u_upper, pair.v_upper, start
        if min(pair.u_lower.min(), pair.v_lower.min()) <= 0:
            raise PreconditionError(
                "Starting from the lower barrier needs positive lower fields "
                "(recipe {}); start from the upper barrier instead".format(pair.recipe)
            )
        return pair.u_lower, pair.v_lower, start
    u0, v0 = start
    grid = pair.grid
    return ScalarField(grid, u0, name="u"), ScalarField(grid, v0, name="v"), "custom"


def _picard_step_(grid, e, pair, u, v, inner):
    tu = truncate(u, pair.u_lower, pair.u_upper)
    tv = truncate(v, pair.v_lower, pair.v_upper)
    su = solve_scalar(grid, e.p1, rhs_f1(tu, tv, e), NEUMANN, inner, initial=u)
    sv = solve_scalar(grid, e.p2, rhs_f2(tu, tv, e), NEUMANN, inner, initial=v)
    return su.solution, sv.solution


def _change_(u0, v0, u1, v1):
    return max(
        float(numpy.max(numpy.abs(u1.values - u0.values))),
        float(numpy.max(numpy.abs(v1.values - v0.values))),
    )


def solve_system(grid, e, pair, cfg=None, check_pair=True):
    """
    Solve the coupled Neumann system inside a barrier rectangle

    Parameters:
        grid (Grid): The grid
        e (ExponentSet): The exponents (must satisfy the exponent regime)
        pair (SubSupPair): A barrier pair that passes 'verify_pair'
        cfg (FixedPointConfig): Outer iteration settings
        check_pair (bool): Whether to certify the pair before iterating

    Returns:
        SystemSolution; a run that exhausts max_outer_iterations returns the
        best iterate flagged non-converged (with a ConvergenceWarning)
    """
    cfg = FixedPointConfig() if cfg is None else cfg
    report = validate_exponents(e, grid.ndim)
    if not report.valid:
        raise PreconditionError(
            "Exponent regime violated: {}".format(", ".join(failed_checks(report)))
        )
    if check_pair:
        certificate = verify_pair(pair, e, grid, tol=cfg.tol_order)
        if not certificate.passed:
            raise PreconditionError(
                "Barrier pair is not certified: {}".format(", ".join(certificate.failures()))
            )

    u, v, start = _start_(cfg.start, pair)
    theta = cfg.theta
    history = []
    best = None
    converged = False
    for iteration in range(1, cfg.max_outer_iterations + 1):
        un, vn = _picard_step_(grid, e, pair, u, v, cfg.inner)
        if theta < 1:
            un = (1 - theta) * u + theta * un
            vn = (1 - theta) * v + theta * vn
        change = _change_(u, v, un, vn)
        u, v = un.rename("u"), vn.rename("v")
        history.append(change)
        if best is None or change < best[2]:
            best = (u, v, change)
        if change < cfg.tol_outer:
            converged = True
            break

    if not converged:
        u, v, change = best
        warn(
            "Outer iteration stopped after {} steps with change {:.3e} > {:.3e}".format(
                iteration, change, cfg.tol_outer
            ),
            ConvergenceWarning,
        )

    tol = cfg.tol_order
    residual_u = nodal_residual(
        u, e.p1, rhs_f1(u, v, e), NEUMANN, effective_eps(e.p1, cfg.inner.eps_grad)
    ).rename("residual_u")
    residual_v = nodal_residual(
        v, e.p2, rhs_f2(u, v, e), NEUMANN, effective_eps(e.p2, cfg.inner.eps_grad)
    ).rename("residual_v")
    enclosure = OrderedDict(
        [
            ("u_lower", field_leq(pair.u_lower, u, tol)),
            ("u_upper", field_leq(u, pair.u_upper, tol)),
            ("v_lower", field_leq(pair.v_lower, v, tol)),
            ("v_upper", field_leq(v, pair.v_upper, tol)),
        ]
    )
    enclosed = all(c.passed for c in enclosure.values())
    flux = max(boundary_flux(u), boundary_flux(v))
    flux_tolerance = cfg.flux_tolerance
    if flux_tolerance is None:
        flux_tolerance = 10 * max(grid.spacing)

    solution = SystemSolution(
        u, v, iteration, change, residual_u, residual_v, enclosure, enclosed, flux,
        float(flux_tolerance), converged, tuple(history), start,
    )
    if converged and not enclosed:
        bad = [k for k, c in enclosure.items() if not c.passed]
        raise EnclosureError(
            "Converged solution leaves the barrier rectangle ({}); the grid may be too "
            "coarse".format(", ".join(bad)),
            solution=solution,
        )
    if converged and not solution.flux_ok:
        warn(
            "Boundary flux {:.3e} exceeds {:.3e}".format(flux, flux_tolerance),
            CertificateWarning,
        )
    return solution


def fixed_point_defect(solution, grid, e, pair, cfg=None):
    """
    Sup-norm change from re-solving the decoupled problems at a solution
    """
    cfg = FixedPointConfig() if cfg is None else cfg
    u, v = _picard_step_(grid, e, pair, solution.u, solution.v, cfg.inner)
    return _change_(solution.u, solution.v, u, v)


def uniqueness_gate(e):
    """
    Exponent gate of the uniqueness criterion

    Applicable iff alpha2, beta1 lie in (-1, 0); passes iff gamma_hat_i < p_i - 1
    for i = 1, 2.
    """
    g1, g2 = e.gamma1, e.gamma2
    if not (-1 < e.alpha2 < 0 and -1 < e.beta1 < 0):
        return GateVerdict(
            INAPPLICABLE, False, False, g1, g2, None, None,
            "needs alpha2 and beta1 in (-1, 0)",
        )
    gh1, gh2 = e.gamma_hat1, e.gamma_hat2
    passed = gh1 < e.p1 - 1 and gh2 < e.p2 - 1
    reason = "gamma_hat_i < p_i - 1" if passed else "gamma_hat_i >= p_i - 1 for some i"
    return GateVerdict(PASS if passed else FAIL, True, passed, g1, g2, gh1, gh2, reason)


def _components_(s):
    return (s.u, s.v) if isinstance(s, SystemSolution) else tuple(s)


def _check_positive_(*fields):
    for f in fields:
        if f.min() <= 0:
            raise PreconditionError(
                "Field {!r} is not strictly positive (min {})".format(f.name, f.min())
            )


def krasnoselskii_tau(s1, s2):
    """
    tau = min over nodes of min(u1 / u2, v1 / v2)

    The largest c with c u2 <= u1 and c v2 <= v1.  Accepts SystemSolutions or
    (u, v) pairs.
    """
    u1, v1 = _components_(s1)
    u2, v2 = _components_(s2)
    _check_positive_(u1, v1, u2, v2)
    return float(min(numpy.min(u1.values / u2.values), numpy.min(v1.values / v2.values)))


def tau_bounds(s1, s2, rho):
    """
    A priori bounds on tau for solutions bounded below by rho

    min(rho / |u2|, rho / |v2|) <= tau <= max(|u1| / rho, |v1| / rho)
    """
    if not rho > 0:
        raise PreconditionError("rho must be positive, got {}".format(rho))
    u1, v1 = _components_(s1)
    u2, v2 = _components_(s2)
    return (
        min(rho / u2.sup_norm(), rho / v2.sup_norm()),
        max(u1.sup_norm() / rho, v1.sup_norm() / rho),
    )


def scaling_comparison_check(s1, s2, tau, e, tol=TOL_ORDER):
    """
    Nodewise scaling comparison of two solutions

    First round: u2 >= tau^(gamma1/(p1-1)) u1 and v2 >= tau^(gamma2/(p2-1)) v1.
    Second round (when alpha2, beta1 < 0): u1 >= tau^(gamma_hat1/(p1-1)) u2
    and v1 >= tau^(gamma_hat2/(p2-1)) v2.  Margins are max(scaled - field).
    """
    if not 0 < tau <= 1 + tol:
        raise PreconditionError("tau must lie in (0, 1], got {}".format(tau))
    tau = min(float(tau), 1.0)
    u1, v1 = _components_(s1)
    u2, v2 = _components_(s2)
    _check_positive_(u1, v1, u2, v2)

    first = OrderedDict(
        [
            ("u", field_leq(tau ** (e.gamma1 / (e.p1 - 1)) * u1, u2, tol)),
            ("v", field_leq(tau ** (e.gamma2 / (e.p2 - 1)) * v1, v2, tol)),
        ]
    )
    second = None
    if e.gamma_hat1 is not None:
        second = OrderedDict(
            [
                ("u", field_leq(tau ** (e.gamma_hat1 / (e.p1 - 1)) * u2, u1, tol)),
                ("v", field_leq(tau ** (e.gamma_hat2 / (e.p2 - 1)) * v2, v1, tol)),
            ]
        )
    passed = all(c.passed for c in first.values()) and second is not None and all(
        c.passed for c in second.values()
    )
    return ScalingReport(tau, first, second, passed, tol)


def uniqueness_experiment(grid, e, pair, cfg=None):
    """
    Two-start uniqueness experiment inside a barrier rectangle

    Solves from the lower and from the upper barrier, then reports the gate,
    tau between the two solutions with its a priori bounds, the scaling
    comparison and the sup-distance.  Needs lower fields bounded away from 0.
    """
    cfg = FixedPointConfig() if cfg is None else cfg
    rho = min(pair.u_lower.min(), pair.v_lower.min())
    if pair.recipe not in POSITIVE_RECIPES or rho <= 0:
        raise RecipeMismatchError(
            "The uniqueness experiment needs lower fields bounded away from zero "
            "(recipes {}), got recipe {}".format(", ".join(POSITIVE_RECIPES), pair.recipe)
        )
    gate = uniqueness_gate(e)
    s_lower = solve_system(grid, e, pair, cfg._replace(start=FROM_LOWER))
    s_upper = solve_system(grid, e, pair, cfg._replace(start=FROM_UPPER), check_pair=False)

    tau = krasnoselskii_tau(s_lower, s_upper)
    lo, hi = tau_bounds(s_lower, s_upper, rho)
    scale = max(1.0, s_lower.u.sup_norm(), s_lower.v.sup_norm())
    tol = 10 * cfg.tol_outer * scale
    scaling = scaling_comparison_check(s_lower, s_upper, min(tau, 1.0), e, tol)
    distance = _change_(s_lower.u, s_lower.v, s_upper.u, s_upper.v)
    bounds = {"lower": lo, "upper": hi, "holds": bool(lo - tol <= tau <= hi + tol)}
    return UniquenessReport(gate, tau, bounds, scaling, distance, (s_lower, s_upper))


def uniqueness_todict(report):
    """
    JSON-serializable summary of a UniquenessReport
    """

    def _round_(group):
        if group is None:
            return None
        return OrderedDict(
            (k, {"passed": bool(c.passed), "margin": c.margin, "node": c.node})
            for k, c in group.items()
        )

    gate = report.gate
    return OrderedDict(
        [
            (
                "gate",
                OrderedDict(
                    [
                        ("verdict", gate.verdict),
                        ("gamma1", gate.gamma1),
                        ("gamma2", gate.gamma2),
                        ("gamma_hat1", gate.gamma_hat1),
                        ("gamma_hat2", gate.gamma_hat2),
                        ("reason", gate.reason),
                    ]
                ),
            ),
            ("tau", report.tau),
            ("tau_bounds", report.tau_bounds),
            (
                "scaling",
                OrderedDict(
                    [
                        ("passed", bool(report.scaling.passed)),
                        ("tol", report.scaling.tol),
                        ("first_round", _round_(report.scaling.first_round)),
                        ("second_round", _round_(report.scaling.second_round)),
                    ]
                ),
            ),
            ("distance", report.distance),
        ]
    )
