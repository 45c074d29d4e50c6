"""
Structured Grid Class

This module contains the Grid class, describing a uniform node grid on an
interval or on an axis-aligned rectangle, together with the boundary metadata
(outward normals, corners, inward neighbours) and the cell data used by the
p-Laplacian discretization.

Copyright 2020-2026, University Corporation for Atmospheric Research
LICENSE: See the LICENSE.rst file for details
"""

from itertools import product

import numpy

from pyenclose.errors import ConfigurationError

INTERVAL = "interval"
RECTANGLE = "rectangle"

_DIMENSIONS_ = {INTERVAL: 1, RECTANGLE: 2}


def _readonly_(array):
    array.flags.writeable = False
    return array


def _as_counts_(counts, ndim):
    if numpy.isscalar(counts):
        counts = [counts] * ndim
    counts = list(counts)
    if len(counts) != ndim:
        raise ConfigurationError(
            "Grid needs {} node counts, got {}".format(ndim, len(counts))
        )
    for n in counts:
        if int(n) != n:
            raise ConfigurationError("Node count {!r} is not an integer".format(n))
        if n < 3:
            raise ConfigurationError(
                "Node counts must be at least 3 per axis, got {}".format(int(n))
            )
    return tuple(int(n) for n in counts)


class Grid(object):
    """
    A uniform structured grid on an interval or a rectangle

    Nodes are ordered lexicographically by axis, so that node (i, j) of a
    rectangle with (nx, ny) nodes has index i * ny + j.
    """

    def __init__(self, kind, extents, counts):
        """
        Initializer

        Parameters:
            kind (str): Either 'interval' or 'rectangle'
            extents (list): The domain extents [a, b] or [a, b, c, d]
            counts: The number of nodes along each axis (int or list of int)
        """
        if kind not in _DIMENSIONS_:
            raise ConfigurationError(
                "Grid kind must be one of {}, got {!r}".format(sorted(_DIMENSIONS_), kind)
            )
        ndim = _DIMENSIONS_[kind]
        extents = [float(e) for e in numpy.ravel(extents)]
        if len(extents) != 2 * ndim:
            raise ConfigurationError(
                "A {} needs {} extents, got {}".format(kind, 2 * ndim, len(extents))
            )
        bounds = tuple(zip(extents[0::2], extents[1::2]))
        for lo, hi in bounds:
            if not (numpy.isfinite(lo) and numpy.isfinite(hi) and hi > lo):
                raise ConfigurationError("Degenerate grid extent [{}, {}]".format(lo, hi))

        self._kind = kind
        self._bounds = bounds
        self._counts = _as_counts_(counts, ndim)
        self._spacing = tuple(
            (hi - lo) / (n - 1) for (lo, hi), n in zip(bounds, self._counts)
        )
        self._axes = tuple(
            _readonly_(numpy.linspace(lo, hi, n)) for (lo, hi), n in zip(bounds, self._counts)
        )
        self._build_nodes_()
        self._build_cells_()

    def _build_nodes_(self):
        ndim = self.ndim
        size = self.size
        mesh = numpy.meshgrid(*self._axes, indexing="ij")
        self._coordinates = _readonly_(numpy.stack([m.ravel() for m in mesh], axis=-1))

        indices = numpy.meshgrid(*[numpy.arange(n) for n in self._counts], indexing="ij")
        normals = numpy.zeros((size, ndim), dtype=numpy.float64)
        faces = numpy.zeros(size, dtype=int)
        for axis, n in enumerate(self._counts):
            index = indices[axis].ravel()
            normals[index == 0, axis] = -1.0
            normals[index == n - 1, axis] = 1.0
            faces += (index == 0) | (index == n - 1)
        onboundary = faces > 0
        lengths = numpy.sqrt(numpy.sum(normals ** 2, axis=1))
        normals[onboundary] /= lengths[onboundary, numpy.newaxis]
        self._normals = _readonly_(normals)
        self._boundary = _readonly_(numpy.flatnonzero(onboundary))
        self._interior = _readonly_(numpy.flatnonzero(~onboundary))
        self._corners = _readonly_(numpy.flatnonzero(faces > 1))

        # Non-corner boundary nodes and their neighbours one step inward
        strides = self.strides
        facenodes = numpy.flatnonzero(faces == 1)
        inward = numpy.empty_like(facenodes)
        steps = numpy.empty(facenodes.size, dtype=numpy.float64)
        for k, node in enumerate(facenodes):
            axis = int(numpy.flatnonzero(normals[node])[0])
            inward[k] = node - int(round(normals[node, axis])) * strides[axis]
            steps[k] = self._spacing[axis]
        self._faces = _readonly_(facenodes)
        self._inward = _readonly_(inward)
        self._face_steps = _readonly_(steps)

        volumes = numpy.ones(1)
        for h, n in zip(self._spacing, self._counts):
            weights = numpy.full(n, h)
            weights[0] = weights[-1] = h / 2
            volumes = numpy.multiply.outer(volumes, weights)
        self._volumes = _readonly_(volumes.ravel())

    def _build_cells_(self):
        strides = self.strides
        origins = numpy.meshgrid(*[numpy.arange(n - 1) for n in self._counts], indexing="ij")
        base = sum(o.ravel() * s for o, s in zip(origins, strides))
        offsets = [
            sum(d * s for d, s in zip(corner, strides))
            for corner in product((0, 1), repeat=self.ndim)
        ]
        self._cell_nodes = _readonly_(numpy.stack([base + o for o in offsets], axis=-1))
        self._cell_centers = _readonly_(
            numpy.mean(self._coordinates[self._cell_nodes], axis=1)
        )

    @property
    def kind(self):
        """Either 'interval' or 'rectangle'"""
        return self._kind

    @property
    def ndim(self):
        """Spatial dimension N"""
        return len(self._counts)

    @property
    def bounds(self):
        """Tuple of (lo, hi) pairs, one per axis"""
        return self._bounds

    @property
    def extents(self):
        """Flat tuple of extents (a, b[, c, d])"""
        return tuple(e for pair in self._bounds for e in pair)

    @property
    def counts(self):
        """Number of nodes along each axis"""
        return self._counts

    @property
    def shape(self):
        return self._counts

    @property
    def size(self):
        """Total number of nodes"""
        return int(numpy.prod(self._counts))

    @property
    def spacing(self):
        """Uniform spacing h along each axis"""
        return self._spacing

    @property
    def strides(self):
        """Index offset of a unit step along each axis"""
        return tuple(int(numpy.prod(self._counts[a + 1:])) for a in range(self.ndim))

    @property
    def axes(self):
        """Node coordinates along each axis"""
        return self._axes

    @property
    def coordinates(self):
        """Node coordinates, shape (size, ndim), in grid order"""
        return self._coordinates

    @property
    def boundary(self):
        """Indices of boundary nodes"""
        return self._boundary

    @property
    def interior(self):
        """Indices of interior nodes"""
        return self._interior

    @property
    def corners(self):
        """Indices of corner nodes (rectangles only)"""
        return self._corners

    @property
    def faces(self):
        """Indices of non-corner boundary nodes"""
        return self._faces

    @property
    def inward(self):
        """Inward neighbour of each non-corner boundary node"""
        return self._inward

    @property
    def face_steps(self):
        """Distance from each non-corner boundary node to its inward neighbour"""
        return self._face_steps

    @property
    def normals(self):
        """Outward unit normals, shape (size, ndim), zero on interior nodes"""
        return self._normals

    @property
    def volumes(self):
        """Nodal control volumes (half cells on faces, quarter cells at corners)"""
        return self._volumes

    @property
    def cell_measure(self):
        """Measure of one grid cell"""
        return float(numpy.prod(self._spacing))

    @property
    def cell_nodes(self):
        """Corner node indices of every cell, shape (ncells, 2**ndim)"""
        return self._cell_nodes

    @property
    def cell_centers(self):
        """Cell centre coordinates, shape (ncells, ndim)"""
        return self._cell_centers

    def node_distances(self):
        """
        Euclidean distance from every node to the boundary

        For a rectangle this is the minimum distance to the four sides; it is
        exactly zero on boundary nodes.
        """
        return _readonly_(self._distance_to_sides_(self._coordinates))

    def cell_center_distances(self):
        """Distance from every cell centre to the boundary (always positive)"""
        return _readonly_(self._distance_to_sides_(self._cell_centers))

    def _distance_to_sides_(self, points):
        dist = numpy.full(points.shape[0], numpy.inf)
        for axis, (lo, hi) in enumerate(self._bounds):
            x = points[:, axis]
            dist = numpy.minimum(dist, numpy.minimum(x - lo, hi - x))
        return dist

    def refine(self, factor=2):
        """
        Return the grid with every cell subdivided 'factor' times per axis

        Every node of this grid is a node of the refined grid.
        """
        if int(factor) != factor or factor < 1:
            raise ConfigurationError("Refinement factor must be a positive integer")
        counts = [(n - 1) * int(factor) + 1 for n in self._counts]
        return Grid(self._kind, self.extents, counts)

    def describe(self):
        """Return the JSON-serializable descriptor of this grid"""
        return {"kind": self._kind, "extents": list(self.extents), "counts": list(self._counts)}

    @staticmethod
    def from_descriptor(desc):
        """Build a Grid from a descriptor produced by 'describe'"""
        try:
            return Grid(desc["kind"], desc["extents"], desc["counts"])
        except KeyError as err:
            raise ConfigurationError("Grid descriptor is missing {}".format(err))

    def __eq__(self, other):
        if not isinstance(other, Grid):
            return False
        return (
            self._kind == other._kind
            and self._bounds == other._bounds
            and self._counts == other._counts
        )

    def __ne__(self, other):
        return not self.__eq__(other)

    def __hash__(self):
        return hash((self._kind, self._bounds, self._counts))

    def __repr__(self):
        return "Grid({!r}, {!r}, {!r})".format(self._kind, list(self.extents), list(self._counts))


def build_grid(kind, extents, node_counts):
    """
    Build a uniform grid

    Parameters:
        kind (str): Either 'interval' or 'rectangle'
        extents (list): [a, b] for an interval, [a, b, c, d] for [a,b]x[c,d]
        node_counts: Number of nodes per axis (int applies to every axis)
    """
    return Grid(kind, extents, node_counts)


def refinement_ladder(grid, levels, factor=2):
    """
    Return a list of successively refined grids, starting with 'grid'
    """
    if levels < 1:
        raise ConfigurationError("A refinement ladder needs at least one level")
    ladder = [grid]
    for _ in range(levels - 1):
        ladder.append(ladder[-1].refine(factor))
    return ladder


def same_domain(*grids):
    """
    Return whether all grids discretize the same domain
    """
    first = grids[0]
    return all(g.kind == first.kind and g.bounds == first.bounds for g in grids[1:])
