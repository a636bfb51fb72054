"""Discretization backends.

Three backends share one array convention: tensor components are stored
point-major, grid axes first, index axes last.  A field of valence k on a
grid of shape ``grid_shape`` is an array of shape ``grid_shape + (dim,)*k``.
The frame algebra has ``grid_shape == ()`` so the same einsum patterns
(with a leading ellipsis) run unchanged on every backend.

* :class:`TorusChart` -- periodic uniform grid, centered finite differences.
* :class:`PatchChart` -- small non-periodic grid around one point; the same
  stencils are applied with wrap-around, so only interior values (away from
  the boundary by one stencil radius per derivative level) are meaningful.
* :class:`FrameAlgebra` -- invariant tensors on a Lie group, represented by
  constant components in an invariant frame; differentiation is exact
  structure-constant algebra.
"""

from __future__ import annotations

import numpy as np

# Centered first-derivative stencils: order -> (offsets, weights/h)
_STENCILS = {
    2: ((-1, 1), (-0.5, 0.5)),
    4: ((-2, -1, 1, 2), (1.0 / 12.0, -2.0 / 3.0, 2.0 / 3.0, -1.0 / 12.0)),
    6: (
        (-3, -2, -1, 1, 2, 3),
        (-1.0 / 60.0, 3.0 / 20.0, -3.0 / 4.0, 3.0 / 4.0, -3.0 / 20.0, 1.0 / 60.0),
    ),
}


class TorusChart:
    """Flat periodic chart: a torus with given periods, uniform grid.

    Parameters
    ----------
    dim : int
        Real dimension.
    resolution : int or sequence of int
        Samples per axis (>= 8 each).
    periods : float or sequence of float
        Period of each axis.
    stencil_order : {2, 4, 6}
        Order of the centered difference stencils.
    """

    is_frame = False
    is_periodic = True

    def __init__(self, dim, resolution, periods=None, stencil_order=4):
        self.dim = int(dim)
        if np.isscalar(resolution):
            resolution = (int(resolution),) * self.dim
        self.resolution = tuple(int(n) for n in resolution)
        if len(self.resolution) != self.dim:
            raise ValueError("resolution length must match dim")
        if any(n < 8 for n in self.resolution):
            raise ValueError("resolution must be >= 8 per axis")
        if periods is None:
            periods = 2.0 * np.pi
        if np.isscalar(periods):
            periods = (float(periods),) * self.dim
        self.periods = tuple(float(p) for p in periods)
        if any(p <= 0 for p in self.periods):
            raise ValueError("periods must be positive")
        if stencil_order not in _STENCILS:
            raise ValueError("stencil_order must be one of %s" % list(_STENCILS))
        self.stencil_order = int(stencil_order)
        self.spacing = tuple(p / n for p, n in zip(self.periods, self.resolution))

    @property
    def grid_shape(self):
        return self.resolution

    @property
    def grid_ndim(self):
        return self.dim

    @property
    def npoints(self):
        return int(np.prod(self.resolution))

    def axis_points(self, axis):
        n = self.resolution[axis]
        return np.arange(n) * self.spacing[axis]

    def coords(self):
        """Meshgrid of coordinates, list of ``dim`` arrays of grid shape."""
        axes = [self.axis_points(a) for a in range(self.dim)]
        return list(np.meshgrid(*axes, indexing="ij"))

    def partial(self, data, axis, order=None):
        """Centered periodic difference of ``data`` along grid axis ``axis``."""
        order = self.stencil_order if order is None else order
        offsets, weights = _STENCILS[order]
        h = self.spacing[axis]
        out = np.zeros_like(data, dtype=np.float64 if data.dtype != np.complex128 else np.complex128)
        for off, w in zip(offsets, weights):
            out += (w / h) * np.roll(data, -off, axis=axis)
        return out

    @property
    def stencil_radius(self):
        return _STENCILS[self.stencil_order][0][-1]

    def integrate(self, density):
        """Quadrature of a scalar grid function (uniform weights, exact for
        trigonometric polynomials below the grid bandwidth)."""
        w = float(np.prod(self.spacing))
        # deterministic reduction: fixed C-order pairwise summation
        return float(np.sum(density, dtype=np.float64) * w)

    def __repr__(self):
        return "TorusChart(dim=%d, resolution=%s, periods=%s, p=%d)" % (
            self.dim,
            self.resolution,
            tuple(round(p, 6) for p in self.periods),
            self.stencil_order,
        )


class PatchChart(TorusChart):
    """Non-periodic local patch used for pointwise jet computations.

    The same roll-based stencils are applied, so values within
    ``levels * stencil_radius`` of the boundary are wrap-contaminated.
    Consumers must restrict to :meth:`interior` (the center point is always
    valid for the supported nesting depth).
    """

    is_periodic = False

    def __init__(self, dim, resolution, spacing, center, stencil_order=4):
        if np.isscalar(resolution):
            resolution = (int(resolution),) * int(dim)
        periods = tuple(float(spacing) * n for n in resolution)
        super().__init__(dim, resolution, periods, stencil_order)
        self.center = np.asarray(center, dtype=np.float64)
        if self.center.shape != (self.dim,):
            raise ValueError("center must have shape (dim,)")

    def coords(self):
        axes = [
            self.center[a]
            + (np.arange(self.resolution[a]) - self.resolution[a] // 2) * self.spacing[a]
            for a in range(self.dim)
        ]
        return list(np.meshgrid(*axes, indexing="ij"))

    def interior(self, levels):
        """Slices selecting points valid after ``levels`` nested derivatives."""
        r = self.stencil_radius * levels
        return tuple(slice(r, n - r) for n in self.resolution)

    def center_index(self):
        return tuple(n // 2 for n in self.resolution)

    def integrate(self, density):
        raise NotImplementedError("PatchChart supports pointwise operations only")


class FrameAlgebra:
    """Invariant-tensor backend: a Lie algebra with structure constants.

    ``structure_constants[i, j, k]`` is ``c^k_{ij}``, i.e. the bracket of
    frame fields is ``[e_i, e_j] = c^k_{ij} e_k``.  All tensor fields are
    position-independent component arrays; exterior/covariant derivatives
    reduce to exact algebra in the frame.

    The ``mirror`` algebra (negated structure constants) represents the
    opposite-invariance frame on the same group: a tensor invariant under
    the other translation action has constant components there.  It carries
    the second complex structure of the product-group generalized Kahler
    states.
    """

    is_frame = True
    is_periodic = False
    grid_shape = ()
    grid_ndim = 0
    npoints = 1

    def __init__(self, structure_constants, frame_metric=None, name="frame"):
        c = np.asarray(structure_constants, dtype=np.float64)
        if c.ndim != 3 or len(set(c.shape)) != 1:
            raise ValueError("structure constants must be a (d, d, d) array")
        self.dim = c.shape[0]
        anti = c + np.swapaxes(c, 0, 1)
        if np.max(np.abs(anti)) > 0.0:
            raise ValueError("structure constants must be antisymmetric in (i, j)")
        jac = self._jacobi_residual(c)
        if jac > 1e-12:
            raise ValueError("Jacobi identity violated: residual %.3e" % jac)
        self.structure_constants = c
        if frame_metric is None:
            frame_metric = np.eye(self.dim)
        self.frame_metric = np.asarray(frame_metric, dtype=np.float64)
        self.name = name
        self._mirror = None

    @staticmethod
    def _jacobi_residual(c):
        # sum_cyclic c^m_{ij} c^l_{mk}
        t = np.einsum("ijm,mkl->ijkl", c, c)
        cyc = t + np.transpose(t, (1, 2, 0, 3)) + np.transpose(t, (2, 0, 1, 3))
        return float(np.max(np.abs(cyc)))

    def partial(self, data, axis, order=None):
        """Frame derivative of invariant components: identically zero."""
        return np.zeros_like(data)

    def integrate(self, density):
        """Invariant integrand over the unit-normalized invariant volume."""
        return float(density)

    def mirror(self):
        """Backend of opposite invariance: same metric, negated brackets."""
        if self._mirror is None:
            m = FrameAlgebra.__new__(FrameAlgebra)
            m.structure_constants = -self.structure_constants
            m.dim = self.dim
            m.frame_metric = self.frame_metric
            m.name = self.name + "~"
            m._mirror = self
            self._mirror = m
        return self._mirror

    def __repr__(self):
        return "FrameAlgebra(dim=%d, name=%r)" % (self.dim, self.name)


def minus_side(backend):
    """Backend hosting minus-side structures: the mirror for frame algebras,
    the backend itself for coordinate charts."""
    if isinstance(backend, FrameAlgebra):
        return backend.mirror()
    return backend


def same_grid(a, b):
    """True when two backends have identical point sets (mirror pairs count)."""
    if a is b:
        return True
    if isinstance(a, FrameAlgebra) and isinstance(b, FrameAlgebra):
        return a.dim == b.dim and (a.mirror() is b or b.mirror() is a)
    return False
