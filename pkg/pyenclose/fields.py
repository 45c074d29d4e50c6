"""
Scalar Field Class

This module contains the ScalarField class, holding one real value per node
of a Grid, and the nodewise operations shared by every other module: ordered
comparisons, boundary normal differences, grid-to-grid interpolation and the
CSV field format.

Copyright 2020-2026, University Corporation for Atmospheric Research
LICENSE: See the LICENSE.rst file for details
"""

from collections import namedtuple
from operator import add, mul, neg, pow, sub, truediv

import numpy
from scipy.interpolate import RegularGridInterpolator

from pyenclose.errors import ConfigurationError
from pyenclose.grids import Grid, same_domain

# Default slack of every "less or equal" test between fields
TOL_ORDER = 1e-10


class NonFiniteError(ValueError):
    """Exception indicating a NaN or infinite nodal value"""


Comparison = namedtuple("Comparison", ["passed", "margin", "node", "coordinates"])


def getvalues(obj):
    """
    Retrieve the nodal ndarray associated with an object
    """
    if isinstance(obj, ScalarField):
        return obj.values
    return numpy.asarray(obj, dtype=numpy.float64)


def getname(obj):
    """
    Retrieve the string name associated with an object
    """
    if isinstance(obj, ScalarField):
        return obj.name
    return repr(obj)


class ScalarField(object):
    """
    Nodal values of one unknown or coefficient on a Grid

    A ScalarField is immutable: its values array is read-only and every
    operation returns a new field.
    """

    def __init__(self, grid, values, name=None):
        """
        Initializer

        Parameters:
            grid (Grid): The grid the values live on
            values: One value per node in grid order, or a single constant
            name (str): Optional name of the field
        """
        if not isinstance(grid, Grid):
            raise TypeError("ScalarField needs a Grid, got {}".format(type(grid)))
        data = numpy.array(getvalues(values), dtype=numpy.float64)
        if data.ndim == 0:
            data = numpy.full(grid.size, float(data))
        if data.size != grid.size:
            raise ValueError(
                "Field has {} values but the grid has {} nodes".format(data.size, grid.size)
            )
        data = data.reshape(-1)
        if not numpy.all(numpy.isfinite(data)):
            bad = int(numpy.flatnonzero(~numpy.isfinite(data))[0])
            raise NonFiniteError(
                "Field {!r} has a non-finite value at node {} {}".format(
                    name, bad, tuple(grid.coordinates[bad])
                )
            )
        data.flags.writeable = False
        self._grid = grid
        self._values = data
        self._name = name

    @property
    def grid(self):
        return self._grid

    @property
    def values(self):
        """Read-only nodal values in grid order"""
        return self._values

    @property
    def name(self):
        return self._name

    @property
    def size(self):
        return self._values.size

    def __len__(self):
        return self._values.size

    def __getitem__(self, index):
        return self._values[index]

    def __array__(self, dtype=None):
        if dtype is None:
            return self._values
        return self._values.astype(dtype)

    def __repr__(self):
        return "ScalarField(name={!r}, grid={!r}, min={!r}, max={!r})".format(
            self._name, self._grid, self.min(), self.max()
        )

    def rename(self, name):
        """Return a copy of this field with a new name"""
        return ScalarField(self._grid, self._values, name=name)

    def reshaped(self):
        """Return the values arranged with one array axis per grid axis"""
        return self._values.reshape(self._grid.shape)

    def min(self):
        return float(numpy.min(self._values))

    def max(self):
        return float(numpy.max(self._values))

    def sup_norm(self):
        return float(numpy.max(numpy.abs(self._values)))

    def interior_values(self):
        return self._values[self._grid.interior]

    def boundary_values(self):
        return self._values[self._grid.boundary]

    def _apply_(self, op, other=None, reverse=False):
        if other is None:
            return ScalarField(self._grid, op(self._values))
        if isinstance(other, ScalarField) and other.grid != self._grid:
            raise ValueError("Cannot combine fields on different grids")
        ovals = getvalues(other)
        if reverse:
            return ScalarField(self._grid, op(ovals, self._values))
        return ScalarField(self._grid, op(self._values, ovals))

    def __add__(self, other):
        return self._apply_(add, other)

    def __radd__(self, other):
        return self._apply_(add, other, reverse=True)

    def __sub__(self, other):
        return self._apply_(sub, other)

    def __rsub__(self, other):
        return self._apply_(sub, other, reverse=True)

    def __mul__(self, other):
        return self._apply_(mul, other)

    def __rmul__(self, other):
        return self._apply_(mul, other, reverse=True)

    def __truediv__(self, other):
        return self._apply_(truediv, other)

    def __rtruediv__(self, other):
        return self._apply_(truediv, other, reverse=True)

    __div__ = __truediv__
    __rdiv__ = __rtruediv__

    def __pow__(self, other):
        return self._apply_(pow, other)

    def __neg__(self):
        return self._apply_(neg)


def constant_field(grid, value, name=None):
    """
    Return the field equal to 'value' at every node
    """
    return ScalarField(grid, numpy.full(grid.size, float(value)), name=name)


def distance_field(grid):
    """
    Return d(x), the Euclidean distance from each node to the boundary

    For a rectangle d is the minimum distance to the four sides; it is zero
    exactly on boundary nodes.
    """
    return ScalarField(grid, grid.node_distances(), name="d")


def field_leq(lower, upper, tol=TOL_ORDER, nodes=None):
    """
    Check lower <= upper + tol nodewise

    Parameters:
        lower, upper: ScalarFields (or arrays) on the same grid
        tol (float): Allowed slack
        nodes: Optional index array restricting the check

    Returns:
        Comparison: pass flag, the worst margin max(lower - upper), the node
        where it occurs and that node's coordinates
    """
    grid = lower.grid if isinstance(lower, ScalarField) else upper.grid
    excess = getvalues(lower) - getvalues(upper)
    index = numpy.arange(excess.size) if nodes is None else numpy.asarray(nodes)
    if index.size == 0:
        return Comparison(True, -numpy.inf, None, None)
    worst = int(index[numpy.argmax(excess[index])])
    margin = float(excess[worst])
    coords = tuple(float(c) for c in grid.coordinates[worst])
    return Comparison(margin <= tol, margin, worst, coords)


def normal_differences(field):
    """
    One-sided outward differences (w_boundary - w_inward) / h

    Computed at the non-corner boundary nodes (grid.faces order); this is the
    discrete normal derivative.
    """
    grid = field.grid
    vals = field.values
    return (vals[grid.faces] - vals[grid.inward]) / grid.face_steps


def boundary_flux(field):
    """
    Sup-norm of the discrete normal derivative of a field
    """
    return float(numpy.max(numpy.abs(normal_differences(field))))


def interpolate(field, grid):
    """
    Piecewise (bi)linear transfer of a field onto another grid of the same domain

    Values at coordinates shared by both grids are reproduced.
    """
    source = field.grid
    if not same_domain(source, grid):
        raise ConfigurationError("Cannot interpolate between different domains")
    if source.ndim == 1:
        values = numpy.interp(grid.axes[0], source.axes[0], field.values)
    else:
        interpolator = RegularGridInterpolator(source.axes, field.reshaped(), method="linear")
        points = numpy.clip(
            grid.coordinates,
            [lo for lo, _ in source.bounds],
            [hi for _, hi in source.bounds],
        )
        values = interpolator(points)
    return ScalarField(grid, values, name=field.name)


def midline_nodes(grid):
    """
    Node indices of the cross-section used for plotting

    The whole grid for an interval, and the row at the middle y index for a
    rectangle.
    """
    if grid.ndim == 1:
        return numpy.arange(grid.size)
    nx, ny = grid.counts
    return numpy.arange(nx) * ny + ny // 2


def write_csv(field, path, nodes=None):
    """
    Write a field as CSV with header 'x[,y],value', 17 significant digits

    Parameters:
        field (ScalarField): The field to write
        path (str): Output file name
        nodes: Optional node indices (in the order to write them)
    """
    grid = field.grid
    index = numpy.arange(grid.size) if nodes is None else numpy.asarray(nodes)
    header = ",".join(["x", "y"][: grid.ndim] + ["value"])
    table = numpy.column_stack([grid.coordinates[index], field.values[index]])
    numpy.savetxt(path, table, fmt="%.17g", delimiter=",", header=header, comments="")


def read_csv(path, grid, name=None):
    """
    Read a field written by 'write_csv' back onto its grid
    """
    table = numpy.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if table.shape != (grid.size, grid.ndim + 1):
        raise ValueError("CSV file {!r} does not match grid {!r}".format(path, grid))
    if not numpy.allclose(table[:, :-1], grid.coordinates, rtol=0.0, atol=1e-12):
        raise ValueError("CSV file {!r} has coordinates off grid {!r}".format(path, grid))
    return ScalarField(grid, table[:, -1], name=name)
