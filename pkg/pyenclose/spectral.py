"""
Auxiliary Spectral and Torsion Problems

This module computes the auxiliary objects that the barrier recipes are built
from: first eigenpairs of the Dirichlet and Neumann p-Laplacian problems,
torsion functions (constant forcing), singular torsion functions (forcing
d(x)^gamma) and the refinement-ladder boundedness check of the latter.

Copyright 2020-2026, University Corporation for Atmospheric Research
LICENSE: See the LICENSE.rst file for details
"""

from collections import namedtuple
from warnings import warn

import numpy
from asaptools.partition import WeightBalanced
from asaptools.simplecomm import create_comm

from pyenclose.errors import (
    AdvisoryWarning,
    CertificateError,
    ConfigurationError,
    InternalError,
    IterationLimitError,
    PreconditionError,
)
from pyenclose.fields import TOL_ORDER, ScalarField, constant_field, normal_differences
from pyenclose.grids import same_domain
from pyenclose.plap import (
    DIRICHLET,
    NEUMANN,
    ScalarSolveConfig,
    as_boundary_condition,
    check_exponent,
    get_stencil,
    nodal_residual,
    solve_scalar,
)

_NEUMANN_NOTE_ = (
    "constants solve the Neumann eigenproblem with eigenvalue 1; the barrier "
    "inequalities only need an eigenvalue of at least 1, which holds with equality"
)


class EigenPair(
    namedtuple(
        "EigenPair",
        [
            "eigenfunction",
            "eigenvalue",
            "bc",
            "p",
            "c0",
            "mu",
            "residual",
            "iterations",
            "normal_negative",
            "note",
        ],
    )
):
    """
    A first eigenpair with its positivity certificate

    Parameters:
        eigenfunction (ScalarField): phi, normalized to max(phi) = 1
        eigenvalue (float): lambda
        bc (BoundaryCondition): The boundary condition
        p (float): p-Laplacian exponent
        c0 (float): Largest c0 with phi >= c0 d on interior nodes (Dirichlet)
        mu (float): Lower bound of phi (Neumann)
        residual (float): Sup-norm of the eigen-equation residual
        iterations (int): Nonlinear inverse-iteration steps (Dirichlet), each a
            full scalar solve; these are not gradient-descent steps
        normal_negative (bool): Whether the discrete outward normal derivative
            is negative at every non-corner boundary node (Dirichlet)
        note (str): Remarks attached to the certificate
    """

    __slots__ = ()

    def todict(self):
        grid = self.eigenfunction.grid
        desc = {
            "lambda": self.eigenvalue,
            "p": self.p,
            "bc": str(self.bc),
            "grid": grid.describe(),
            "residual": self.residual,
            "iterations": self.iterations,
        }
        if self.bc.dirichlet:
            desc["c0"] = self.c0
            desc["normal_derivative_negative"] = self.normal_negative
        else:
            desc["mu"] = self.mu
        if self.note:
            desc["note"] = self.note
        return desc


class BoundednessReport(
    namedtuple(
        "BoundednessReport", ["gamma", "ndim", "holds", "sups", "spacings", "drift", "message"]
    )
):
    """
    Singular-torsion sup-norms across a refinement ladder

    'holds' is the verdict gamma > -1/N; 'drift' is the relative change of
    the sup-norm between the two finest levels.
    """

    __slots__ = ()

    def todict(self):
        return {
            "gamma": self.gamma,
            "ndim": self.ndim,
            "holds": self.holds,
            "sups": list(self.sups),
            "spacings": list(self.spacings),
            "drift": self.drift,
            "message": self.message,
        }


def lp_norm(w, p):
    """
    Discrete L^p norm (sum_nodes vol |w|^p)^(1/p)
    """
    return float(numpy.sum(w.grid.volumes * numpy.abs(w.values) ** p) ** (1.0 / p))


def rayleigh_quotient(w, p):
    """
    R(w) = (sum_cells |cell| s_c^(p/2) + sum vol |w|^p) / sum vol |w|^p
    """
    p = check_exponent(p)
    stencil = get_stencil(w.grid)
    _, squares = stencil.gradients(w.values)
    mass = float(numpy.sum(stencil.volumes * numpy.abs(w.values) ** p))
    if not mass > 0:
        raise PreconditionError("Rayleigh quotient of the zero field is undefined")
    gradient = float(stencil.measure * numpy.sum(squares ** (p / 2.0)))
    return (gradient + mass) / mass


def first_eigenpair_dirichlet(grid, p, cfg=None, initial=None, max_iterations=500):
    """
    First eigenpair of -Delta_p phi + phi^(p-1) = lambda phi^(p-1), phi = 0 on the boundary

    Each step solves the Dirichlet problem with forcing w^(p-1), takes the
    absolute value and normalizes in L^p, which decreases the Rayleigh
    quotient toward its minimum.  This is nonlinear inverse iteration, not
    gradient descent on the quotient, so the reported iteration count is the
    number of scalar solves.  The returned eigenfunction is rescaled to
    max(phi) = 1.

    Parameters:
        grid (Grid): The grid
        p (float): p-Laplacian exponent (> 1)
        cfg (ScalarSolveConfig): Solver settings; cfg.tol_res bounds the
            eigen-equation residual
        initial: Optional positive starting field (defaults to d(x))
        max_iterations (int): Limit on inverse iterations
    """
    p = check_exponent(p)
    cfg = ScalarSolveConfig() if cfg is None else cfg
    inner = cfg._replace(tol_res=cfg.tol_res * 1e-2)
    interior = grid.interior

    if initial is None:
        w = numpy.array(grid.node_distances())
    else:
        w = numpy.abs(numpy.array(initial, dtype=numpy.float64)).reshape(-1)
    w[grid.boundary] = 0.0
    if not numpy.any(w[interior] > 0):
        raise PreconditionError("Initial eigen iterate must be positive somewhere inside")
    w /= lp_norm(ScalarField(grid, w), p)
    lam = rayleigh_quotient(ScalarField(grid, w), p)

    pair = None
    for iteration in range(1, max_iterations + 1):
        result = solve_scalar(
            grid, p, w ** (p - 1), DIRICHLET, inner, initial=w * lam ** (-1.0 / (p - 1))
        )
        z = numpy.abs(result.solution.values)
        if numpy.min(z[interior]) <= 0:
            raise InternalError("Eigen iterate vanished at an interior node")
        z /= lp_norm(ScalarField(grid, z), p)
        lam = rayleigh_quotient(ScalarField(grid, z), p)
        phi = ScalarField(grid, z / numpy.max(z), name="phi")
        resid = nodal_residual(phi, p, lam * phi.values ** (p - 1), DIRICHLET, result.eps_grad)
        residual = float(numpy.max(numpy.abs(resid.values[interior])))
        pair = _dirichlet_pair_(phi, lam, p, residual, iteration)
        w = z
        if residual <= cfg.tol_res:
            return pair
    raise IterationLimitError(
        "Dirichlet eigen iteration (p = {}) did not reach residual {:.3e} in {} steps".format(
            p, cfg.tol_res, max_iterations
        ),
        best=pair,
    )


def _dirichlet_pair_(phi, lam, p, residual, iterations):
    grid = phi.grid
    interior = grid.interior
    d = grid.node_distances()[interior]
    c0 = float(numpy.min(phi.values[interior] / d))
    negative = bool(numpy.all(normal_differences(phi) < 0))
    return EigenPair(phi, lam, DIRICHLET, p, c0, None, residual, iterations, negative, None)


def first_eigenpair_neumann(grid, p):
    """
    First Neumann eigenpair: phi = 1, lambda = 1, with mu = 1
    """
    p = check_exponent(p)
    phi = constant_field(grid, 1.0, name="phi_hat")
    residual = nodal_residual(phi, p, phi.values, NEUMANN).sup_norm()
    return EigenPair(phi, 1.0, NEUMANN, p, None, 1.0, residual, 0, None, _NEUMANN_NOTE_)


def torsion(grid, p, bc, cfg=None):
    """
    Torsion function: the solution with forcing f = 1

    The returned result carries a certificate: for Dirichlet the smallest
    c > 1 with d/c <= y <= c d on interior nodes, for Neumann the smallest
    c > 1 with 1/c <= y <= c (the Neumann eigenfunction is 1).
    """
    bc = as_boundary_condition(bc)
    result = solve_scalar(grid, p, 1.0, bc, cfg)
    y = result.solution.rename("y" if bc.dirichlet else "y_hat")
    if bc.dirichlet:
        interior = grid.interior
        d = grid.node_distances()[interior]
        yi = y.values[interior]
        if numpy.any(yi <= 0):
            raise CertificateError(
                "Dirichlet torsion is not positive inside; no finite distance constant"
            )
        c = max(float(numpy.max(d / yi)), float(numpy.max(yi / d)))
        certificate = {
            "kind": "distance",
            "c": max(c, 1 + TOL_ORDER),
            "sup": y.max(),
            "normal_derivative_negative": bool(numpy.all(normal_differences(y) < 0)),
        }
    else:
        yv = y.values
        if numpy.any(yv <= 0):
            raise CertificateError("Neumann torsion is not positive; no finite constant")
        c = max(float(numpy.max(1.0 / yv)), float(numpy.max(yv)))
        certificate = {"kind": "eigenfunction", "c": max(c, 1 + TOL_ORDER), "sup": y.max()}
    if not numpy.isfinite(certificate["c"]):
        raise CertificateError("Torsion certificate constant is not finite")
    certificate.update({"p": float(p), "bc": str(bc)})
    return result._replace(solution=y, certificate=certificate)


def _check_gamma_(gamma):
    if not -1 < gamma <= 0:
        raise ConfigurationError(
            "Singular forcing exponent must lie in (-1, 0], got {}".format(gamma)
        )
    return float(gamma)


def cell_center_forcing(grid, gamma):
    """
    Nodal forcing of d(x)^gamma sampled at cell centres

    Each cell contributes d(centre)^gamma |cell| / 2^N to its corners, divided
    by the control volume of the receiving node.
    """
    gamma = _check_gamma_(gamma)
    stencil = get_stencil(grid)
    values = stencil.lump(grid.cell_center_distances() ** gamma)
    return ScalarField(grid, values, name="forcing")


def singular_torsion(grid, p, gamma, cfg=None):
    """
    Neumann solution with forcing d(x)^gamma, gamma in (-1, 0]

    The certificate records c1 = min(z), the largest c1 with z >= c1 phi_hat.
    """
    gamma = _check_gamma_(gamma)
    result = solve_scalar(grid, p, cell_center_forcing(grid, gamma), NEUMANN, cfg)
    z = result.solution.rename("z_hat")
    c1 = z.min()
    if not c1 > 0:
        raise CertificateError("Singular torsion is not positive (min {})".format(c1))
    certificate = {"kind": "singular", "p": float(p), "gamma": gamma, "c1": c1, "sup": z.max()}
    return result._replace(solution=z, certificate=certificate)


def boundedness_check(grids, p, gamma, cfg=None, scomm=None):
    """
    Sup-norms of the singular torsion across a refinement ladder

    Parameters:
        grids (list): At least 3 grids of the same domain, coarse to fine
        p (float): p-Laplacian exponent
        gamma (float): Forcing exponent in (-1, 0]
        cfg (ScalarSolveConfig): Solver settings
        scomm (SimpleComm): Optional communicator; levels are spread over ranks
    """
    grids = list(grids)
    if len(grids) < 3:
        raise ConfigurationError("A boundedness ladder needs at least 3 levels")
    if not same_domain(*grids):
        raise ConfigurationError("Ladder levels must discretize the same domain")
    gamma = _check_gamma_(gamma)
    if scomm is None:
        scomm = create_comm(serial=True)

    levels = scomm.partition(
        [(k, g.size) for k, g in enumerate(grids)], func=WeightBalanced(), involved=True
    )
    local = dict((k, 0.0) for k in range(len(grids)))
    for k in levels:
        local[k] = singular_torsion(grids[k], p, gamma, cfg).solution.max()
    totals = scomm.allreduce(local, op="max")
    sups = tuple(float(totals[k]) for k in range(len(grids)))

    ndim = grids[0].ndim
    holds = gamma > -1.0 / ndim
    if holds:
        message = "gamma > -1/N: singular torsion bounded"
    else:
        message = "gamma <= -1/N: no boundedness guarantee"
        warn("Boundedness ladder: {}".format(message), AdvisoryWarning)
    drift = abs(sups[-1] - sups[-2]) / abs(sups[-1])
    return BoundednessReport(
        gamma=gamma,
        ndim=ndim,
        holds=holds,
        sups=sups,
        spacings=tuple(g.spacing[0] for g in grids),
        drift=drift,
        message=message,
    )
