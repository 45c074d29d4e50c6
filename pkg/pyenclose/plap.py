"""
Scalar p-Laplacian Problems

This module solves the uniquely solvable scalar problems

    -Delta_p w + |w|^(p-2) w = f

on a Grid with zero Dirichlet or zero Neumann boundary conditions.  The
discretization is variational: the discrete energy is

    J(w) = (1/p) sum_cells |cell| s_c(w)^(p/2) + sum_nodes vol (|w|^p / p - f w)

where s_c is the squared gradient of cell c, built from the edge difference
quotients of the cell (one edge per cell in 1D, the average of the two
parallel edges per axis in 2D).  The nodal residual is dJ/dw divided by the
node's control volume, which equals the ghost-reflection Neumann scheme on
the boundary.  Solutions are found by damped Newton with an energy line
search and a gradient-descent fallback.  For p < 2 the smoothing of the
gradient norm is lowered in stages, warm-starting each stage from the last.

Copyright 2020-2026, University Corporation for Atmospheric Research
LICENSE: See the LICENSE.rst file for details
"""

from collections import namedtuple
from functools import lru_cache
from itertools import product

import numpy
from scipy.sparse import coo_matrix, diags
from scipy.sparse.linalg import spsolve

from pyenclose.errors import ConfigurationError, IterationLimitError
from pyenclose.fields import ScalarField, getvalues

DIRICHLET_ZERO = "dirichlet_zero"
NEUMANN_ZERO = "neumann_zero"

# Maximum number of step halvings in one line search
_MAX_HALVINGS_ = 60

# Armijo sufficient-decrease constant
_ARMIJO_ = 1e-4

# Relative energy slack accepted per step
_ENERGY_SLACK_ = 1e-12

# Residuals below this multiple of the operator scale are at rounding level
_ROUNDOFF_ = 8 * numpy.finfo(numpy.float64).eps

# Smoothing continuation for p < 2: ratio between levels and smallest level
_SMOOTHING_RATIO_ = 0.1
_SMOOTHING_FLOOR_ = 1e-12


class BoundaryCondition(namedtuple("BoundaryCondition", ["kind"])):
    """
    A homogeneous boundary condition: 'dirichlet_zero' or 'neumann_zero'
    """

    __slots__ = ()

    def __new__(cls, kind):
        if kind not in (DIRICHLET_ZERO, NEUMANN_ZERO):
            raise ConfigurationError(
                "Boundary condition must be {!r} or {!r}, got {!r}".format(
                    DIRICHLET_ZERO, NEUMANN_ZERO, kind
                )
            )
        return super(BoundaryCondition, cls).__new__(cls, kind)

    @property
    def dirichlet(self):
        return self.kind == DIRICHLET_ZERO

    def __str__(self):
        return self.kind


DIRICHLET = BoundaryCondition(DIRICHLET_ZERO)
NEUMANN = BoundaryCondition(NEUMANN_ZERO)


def as_boundary_condition(bc):
    if isinstance(bc, BoundaryCondition):
        return bc
    return BoundaryCondition(bc)


class ScalarSolveConfig(
    namedtuple("ScalarSolveConfig", ["eps_grad", "tol_res", "max_inner_iterations", "damping"])
):
    """
    Settings of the scalar Newton solver

    Parameters:
        eps_grad (float): Gradient-norm smoothing (used in the residual for p < 2)
        tol_res (float): Sup-norm tolerance of the nodal residual
        max_inner_iterations (int): Newton step limit
        damping (float): Initial step length of each line search, in (0, 1]
    """

    __slots__ = ()

    def __new__(cls, eps_grad=1e-8, tol_res=1e-9, max_inner_iterations=100, damping=1.0):
        if not eps_grad >= 0:
            raise ConfigurationError("eps_grad must be nonnegative, got {}".format(eps_grad))
        if not tol_res > 0:
            raise ConfigurationError("tol_res must be positive, got {}".format(tol_res))
        if int(max_inner_iterations) != max_inner_iterations or max_inner_iterations < 1:
            raise ConfigurationError(
                "max_inner_iterations must be a positive integer, got {}".format(
                    max_inner_iterations
                )
            )
        if not 0 < damping <= 1:
            raise ConfigurationError("damping must lie in (0, 1], got {}".format(damping))
        return super(ScalarSolveConfig, cls).__new__(
            cls, float(eps_grad), float(tol_res), int(max_inner_iterations), float(damping)
        )


class ScalarSolveResult(
    namedtuple(
        "ScalarSolveResult",
        ["solution", "residual", "iterations", "energy", "energies", "eps_grad", "certificate"],
    )
):
    """
    Outcome of a scalar solve

    Parameters:
        solution (ScalarField): The computed field
        residual (float): Sup-norm of the final nodal residual
        iterations (int): Newton steps taken
        energy (float): Final discrete energy
        energies (tuple): Energy after every accepted step of the final smoothing
            stage (its starting iterate first)
        eps_grad (float): Smoothing used in the residual and energy
        certificate (dict): Optional certificate attached by callers
    """

    __slots__ = ()

    def __new__(cls, solution, residual, iterations, energy, energies=(), eps_grad=0.0,
                certificate=None):
        return super(ScalarSolveResult, cls).__new__(
            cls, solution, residual, iterations, energy, tuple(energies), eps_grad, certificate
        )


class Stencil(object):
    """
    Sparse difference operators of a Grid

    One difference matrix (cells x nodes) per cell edge class, each edge
    quotient entering the squared cell gradient with weight 1 / 2^(N-1).
    """

    def __init__(self, grid):
        self.grid = grid
        cell_nodes = grid.cell_nodes
        ncells, ncorners = cell_nodes.shape
        rows = numpy.arange(ncells)
        corners = list(product((0, 1), repeat=grid.ndim))

        differences = []
        for axis, h in enumerate(grid.spacing):
            for lo, bits in enumerate(corners):
                if bits[axis] == 1:
                    continue
                hi = corners.index(bits[:axis] + (1,) + bits[axis + 1:])
                data = numpy.concatenate(
                    [numpy.full(ncells, -1.0 / h), numpy.full(ncells, 1.0 / h)]
                )
                cols = numpy.concatenate([cell_nodes[:, lo], cell_nodes[:, hi]])
                matrix = coo_matrix(
                    (data, (numpy.concatenate([rows, rows]), cols)), shape=(ncells, grid.size)
                )
                differences.append(matrix.tocsr())
        self.differences = tuple(differences)
        self.weight = 0.5 ** (grid.ndim - 1)
        self.measure = grid.cell_measure
        self.volumes = grid.volumes

        # Cell-to-node lumping: each cell gives |cell| / 2^N to each corner
        lumping = coo_matrix(
            (
                numpy.full(ncells * ncorners, self.measure / ncorners),
                (cell_nodes.ravel(), numpy.repeat(rows, ncorners)),
            ),
            shape=(grid.size, ncells),
        )
        self.lumping = lumping.tocsr()

        # Node-to-cell averaging over the cell corners
        averaging = coo_matrix(
            (
                numpy.full(ncells * ncorners, 1.0 / ncorners),
                (numpy.repeat(rows, ncorners), cell_nodes.ravel()),
            ),
            shape=(ncells, grid.size),
        )
        self.averaging = averaging.tocsr()

    @property
    def ncells(self):
        return self.grid.cell_nodes.shape[0]

    def gradients(self, w):
        """Edge difference quotients and the squared cell gradients of w"""
        grads = [d.dot(w) for d in self.differences]
        squares = self.weight * sum(g * g for g in grads)
        return grads, squares

    def stiffness(self, coefficients):
        """Sum_e D_e^T diag(|cell| weight coefficients) D_e"""
        scale = diags(self.measure * self.weight * coefficients)
        return sum(d.T.dot(scale.dot(d)) for d in self.differences)

    def lump(self, cell_values):
        """Nodal field from cell-centre values, weighted by control volumes"""
        return self.lumping.dot(cell_values) / self.volumes

    def average(self, w):
        """Cell-centre values of a nodal field (corner mean)"""
        return self.averaging.dot(w)


@lru_cache(maxsize=16)
def get_stencil(grid):
    """Cached Stencil of a grid"""
    return Stencil(grid)


def _power_(base, exponent):
    """base**exponent for base >= 0, with zero where base == 0"""
    out = numpy.zeros_like(base)
    positive = base > 0
    out[positive] = base[positive] ** exponent
    return out


def _signed_power_(w, exponent):
    """sign(w) |w|^exponent"""
    return numpy.sign(w) * _power_(numpy.abs(w), exponent)


def check_exponent(p):
    if not p > 1:
        raise ConfigurationError("p-Laplacian exponent must exceed 1, got {}".format(p))
    return float(p)


def effective_eps(p, eps_grad):
    """
    Smoothing used in the energy and residual: eps_grad for p < 2, zero otherwise
    """
    return float(eps_grad) if p < 2 else 0.0


def _energy_(stencil, w, f, p, eps):
    _, squares = stencil.gradients(w)
    gradient_term = stencil.measure / p * numpy.sum(_power_(squares + eps * eps, p / 2.0))
    node_term = numpy.sum(stencil.volumes * (numpy.abs(w) ** p / p - f * w))
    return float(gradient_term + node_term)


def _energy_gradient_(stencil, w, f, p, eps):
    grads, squares = stencil.gradients(w)
    coeff = stencil.measure * stencil.weight * _power_(squares + eps * eps, (p - 2) / 2.0)
    grad = sum(d.T.dot(coeff * g) for d, g in zip(stencil.differences, grads))
    return grad + stencil.volumes * (_signed_power_(w, p - 1) - f)


def _hessian_(stencil, w, p, eps):
    grads, squares = stencil.gradients(w)
    if p == 2:
        return (stencil.stiffness(numpy.ones_like(squares)) + diags(stencil.volumes)).tocsr()
    smoothed = squares + eps * eps
    q = sum(diags(stencil.weight * g).dot(d) for d, g in zip(stencil.differences, grads))
    scale = diags(stencil.measure * (p - 2) * _power_(smoothed, (p - 4) / 2.0))
    hess = stencil.stiffness(_power_(smoothed, (p - 2) / 2.0)) + q.T.dot(scale.dot(q))
    reaction = (p - 1) * _power_(w * w + eps * eps, (p - 2) / 2.0)
    return (hess + diags(stencil.volumes * reaction)).tocsr()


def _residual_floor_(stencil, w, f, p, eps):
    """Rounding level of the nodal residual at w"""
    absw = numpy.abs(w)
    _, squares = stencil.gradients(w)
    coeff = stencil.measure * stencil.weight * _power_(squares + eps * eps, (p - 2) / 2.0)
    flux = sum(abs(d).T.dot(coeff * abs(d).dot(absw)) for d in stencil.differences)
    scale = flux / stencil.volumes + absw ** (p - 1) + numpy.abs(f)
    return _ROUNDOFF_ * float(numpy.max(scale))


def _free_nodes_(grid, bc):
    return grid.interior if bc.dirichlet else numpy.arange(grid.size)


def _check_forcing_(grid, f):
    if isinstance(f, ScalarField) and f.grid != grid:
        raise ValueError("Forcing lives on a different grid")
    fvals = numpy.array(getvalues(f), dtype=numpy.float64)
    if fvals.ndim == 0:
        fvals = numpy.full(grid.size, float(fvals))
    if fvals.size != grid.size:
        raise ValueError("Forcing has {} values, grid has {}".format(fvals.size, grid.size))
    if not numpy.all(numpy.isfinite(fvals)):
        raise ConfigurationError("Forcing must be finite at every node")
    return fvals


def discrete_energy(w, f, p, bc, eps_grad=0.0):
    """
    The discrete energy J(w) whose minimizer solves the scalar problem

    Parameters:
        w (ScalarField): The field to evaluate
        f: Forcing (ScalarField, array or constant)
        p (float): p-Laplacian exponent (> 1)
        bc: Boundary condition (w is expected to respect it)
        eps_grad (float): Gradient-norm smoothing
    """
    p = check_exponent(p)
    as_boundary_condition(bc)
    stencil = get_stencil(w.grid)
    return _energy_(stencil, w.values, _check_forcing_(w.grid, f), p, eps_grad)


def nodal_residual(w, p, f, bc, eps_grad=0.0):
    """
    The discretized -Delta_p w + |w|^(p-2) w - f at every node

    Neumann boundary rows use the reflective (zero flux) convention; Dirichlet
    boundary rows report w itself.
    """
    p = check_exponent(p)
    bc = as_boundary_condition(bc)
    grid = w.grid
    stencil = get_stencil(grid)
    resid = _energy_gradient_(stencil, w.values, _check_forcing_(grid, f), p, eps_grad)
    resid /= stencil.volumes
    if bc.dirichlet:
        resid[grid.boundary] = w.values[grid.boundary]
    return ScalarField(grid, resid, name="residual")


def _linear_guess_(stencil, grid, f, bc):
    """Solution of the p = 2 problem, used as the default starting iterate"""
    free = _free_nodes_(grid, bc)
    matrix = (stencil.stiffness(numpy.ones(stencil.ncells)) + diags(stencil.volumes)).tocsr()
    w = numpy.zeros(grid.size)
    w[free] = spsolve(matrix[free][:, free].tocsc(), (stencil.volumes * f)[free])
    return w


def _line_search_(stencil, w, f, p, eps, free, direction, slope, energy, step):
    slack = _ENERGY_SLACK_ * max(1.0, abs(energy))
    for _ in range(_MAX_HALVINGS_):
        trial = w.copy()
        trial[free] += step * direction
        trial_energy = _energy_(stencil, trial, f, p, eps)
        if trial_energy <= energy + _ARMIJO_ * step * slope + slack:
            return trial, trial_energy
        step /= 2
    return None, energy


def _newton_(stencil, w, f, p, eps, free, tol_res, max_iterations, damping):
    """
    Damped Newton on the energy smoothed with eps, from w

    Returns the final iterate, its energy, the accepted energies, the residual,
    the tolerance it was held to and the number of steps taken.
    """
    volumes = stencil.volumes[free]
    energy = _energy_(stencil, w, f, p, eps)
    energies = [energy]
    iterations = 0
    tol = tol_res
    while True:
        gradient = _energy_gradient_(stencil, w, f, p, eps)[free]
        residual = float(numpy.max(numpy.abs(gradient / volumes)))
        if residual > tol_res:
            tol = max(tol_res, _residual_floor_(stencil, w, f, p, eps))
        if residual <= tol or iterations >= max_iterations:
            break
        iterations += 1

        hessian = _hessian_(stencil, w, p, eps)[free][:, free]
        with numpy.errstate(all="ignore"):
            direction = spsolve(hessian.tocsc(), -gradient)
        slope = float(numpy.dot(gradient, direction))
        trial = None
        if numpy.all(numpy.isfinite(direction)) and slope < 0:
            trial, trial_energy = _line_search_(
                stencil, w, f, p, eps, free, direction, slope, energy, damping
            )
        if trial is None:
            direction = -gradient / volumes
            slope = float(numpy.dot(gradient, direction))
            trial, trial_energy = _line_search_(
                stencil, w, f, p, eps, free, direction, slope, energy, damping
            )
        if trial is None:
            break
        w, energy = trial, trial_energy
        energies.append(energy)
    return w, energy, energies, residual, tol, iterations


def smoothing_schedule(stencil, w, p, eps_grad):
    """
    Decreasing smoothing levels ending at the target smoothing

    For p >= 2 there is a single level.  For p < 2 the levels start at the
    largest gradient of w (at least 1) and shrink by _SMOOTHING_RATIO_ until
    they reach eps_grad.
    """
    eps = effective_eps(p, eps_grad)
    if p >= 2:
        return [eps]
    _, squares = stencil.gradients(w)
    level = max(1.0, float(numpy.sqrt(numpy.max(squares))))
    floor = max(eps, _SMOOTHING_FLOOR_)
    levels = []
    while level > 2 * floor:
        levels.append(level)
        level *= _SMOOTHING_RATIO_
    levels.append(eps)
    return levels


def solve_scalar(grid, p, f, bc, cfg=None, initial=None):
    """
    Solve -Delta_p w + |w|^(p-2) w = f with a homogeneous boundary condition

    For p < 2 the gradient smoothing is lowered in stages toward cfg.eps_grad,
    each stage warm-started from the last; cfg.max_inner_iterations bounds
    the Newton steps of each stage.

    Parameters:
        grid (Grid): The grid
        p (float): p-Laplacian exponent (> 1)
        f: Forcing (ScalarField, array or constant), finite at every node
        bc: BoundaryCondition or its kind string
        cfg (ScalarSolveConfig): Solver settings (defaults if None)
        initial: Optional starting iterate (ScalarField or array)

    Returns:
        ScalarSolveResult with residual sup-norm <= cfg.tol_res, or <= the
        rounding level of the discrete operator when that is larger
    """
    p = check_exponent(p)
    bc = as_boundary_condition(bc)
    cfg = ScalarSolveConfig() if cfg is None else cfg
    fvals = _check_forcing_(grid, f)
    stencil = get_stencil(grid)
    free = _free_nodes_(grid, bc)
    eps = effective_eps(p, cfg.eps_grad)

    if initial is None:
        w = _linear_guess_(stencil, grid, fvals, bc)
    else:
        w = numpy.array(getvalues(initial), dtype=numpy.float64).reshape(-1)
    if bc.dirichlet:
        w[grid.boundary] = 0.0

    # A warm start that already solves the target problem needs no stages
    levels = smoothing_schedule(stencil, w, p, cfg.eps_grad)
    if len(levels) > 1:
        _, _, _, residual, tol, _ = _newton_(stencil, w, fvals, p, eps, free, cfg.tol_res, 0, 1.0)
        if residual <= tol:
            levels = levels[-1:]

    iterations = 0
    for level in levels[:-1]:
        w, _, _, _, _, steps = _newton_(
            stencil, w, fvals, p, level, free, max(cfg.tol_res, level),
            cfg.max_inner_iterations, cfg.damping
        )
        iterations += steps
    w, energy, energies, residual, tol, steps = _newton_(
        stencil, w, fvals, p, eps, free, cfg.tol_res, cfg.max_inner_iterations, cfg.damping
    )
    iterations += steps

    result = ScalarSolveResult(
        ScalarField(grid, w, name="solution"), residual, iterations, energy, energies, eps
    )
    if residual > tol:
        raise IterationLimitError(
            "Scalar solve (p = {}, {}) stopped after {} iterations with residual "
            "{:.3e} > {:.3e}".format(
                p, bc, iterations, residual, tol
            ),
            best=result,
        )
    return result
