"""Tensor fields over a backend, with explicit symmetry handling.

Component arrays have shape ``backend.grid_shape + (dim,) * rank``.  The
slot string records variance per index in written order: ``'d'`` covariant
(lower), ``'u'`` contravariant (upper).  A metric is ``'dd'``, a k-form is
``'d' * k`` with the ``alt`` flag, an endomorphism ``J_k^l`` is ``'du'``
(input index first).
"""

from __future__ import annotations

import itertools

import numpy as np

_PARITY_CACHE = {}


def _signed_permutations(k):
    if k not in _PARITY_CACHE:
        perms = []
        for p in itertools.permutations(range(k)):
            sign = 1
            seen = [False] * k
            for i in range(k):
                if seen[i]:
                    continue
                j, length = i, 0
                while not seen[j]:
                    seen[j] = True
                    j = p[j]
                    length += 1
                if length % 2 == 0:
                    sign = -sign
            perms.append((p, sign))
        _PARITY_CACHE[k] = perms
    return _PARITY_CACHE[k]


def symmetrize(data, grid_ndim, antisymmetric=False):
    """(Anti)symmetrize over all index axes (those after the grid axes)."""
    k = data.ndim - grid_ndim
    if k < 2:
        return data
    grid_axes = tuple(range(grid_ndim))
    out = np.zeros_like(data)
    for perm, sign in _signed_permutations(k):
        axes = grid_axes + tuple(grid_ndim + p for p in perm)
        term = np.transpose(data, axes)
        out += sign * term if antisymmetric else term
    out /= float(len(_signed_permutations(k)))
    return out


class TensorField:
    """Components of a tensor over a backend.

    Parameters
    ----------
    backend : backend object
    data : ndarray, shape ``grid_shape + (dim,) * rank``
    slots : str of 'u'/'d'
        Variance of each index in written order.
    sym : {None, 'sym', 'alt'}
        Symmetry over all index slots, enforced at construction.
    """

    __slots__ = ("backend", "data", "slots", "sym")

    def __init__(self, backend, data, slots, sym=None, enforce=True):
        data = np.asarray(data)
        expected = backend.grid_shape + (backend.dim,) * len(slots)
        if data.shape != expected:
            raise ValueError(
                "shape %s does not match backend/slots (expected %s)"
                % (data.shape, expected)
            )
        if sym not in (None, "sym", "alt"):
            raise ValueError("sym must be None, 'sym' or 'alt'")
        if sym == "alt" and len(set(slots)) > 1:
            raise ValueError("alternating symmetry requires uniform variance")
        if enforce and sym is not None and len(slots) >= 2:
            data = symmetrize(data, backend.grid_ndim, antisymmetric=(sym == "alt"))
        self.backend = backend
        self.data = data
        self.slots = slots
        self.sym = sym

    # -- constructors ------------------------------------------------------

    @classmethod
    def zeros(cls, backend, slots, sym=None):
        shape = backend.grid_shape + (backend.dim,) * len(slots)
        return cls(backend, np.zeros(shape), slots, sym, enforce=False)

    @classmethod
    def form(cls, backend, data, degree, enforce=True):
        """A differential form of the given degree (fully antisymmetric)."""
        if degree > backend.dim:
            raise ValueError("form degree exceeds dimension")
        return cls(backend, data, "d" * degree, "alt" if degree >= 2 else None,
                   enforce=enforce)

    @classmethod
    def scalar(cls, backend, data):
        return cls(backend, data, "", None)

    @classmethod
    def vector(cls, backend, data):
        return cls(backend, data, "u", None)

    # -- basic algebra -----------------------------------------------------

    @property
    def rank(self):
        return len(self.slots)

    @property
    def degree(self):
        """Form degree; valid when all slots are covariant."""
        if "u" in self.slots:
            raise ValueError("not a covariant tensor")
        return len(self.slots)

    def copy(self):
        return TensorField(self.backend, self.data.copy(), self.slots, self.sym, enforce=False)

    def like(self, data, sym="keep"):
        return TensorField(
            self.backend, data, self.slots, self.sym if sym == "keep" else sym, enforce=False
        )

    def __add__(self, other):
        self._check_compatible(other)
        sym = self.sym if self.sym == other.sym else None
        return TensorField(self.backend, self.data + other.data, self.slots, sym, enforce=False)

    def __sub__(self, other):
        self._check_compatible(other)
        sym = self.sym if self.sym == other.sym else None
        return TensorField(self.backend, self.data - other.data, self.slots, sym, enforce=False)

    def __mul__(self, scalar):
        return TensorField(self.backend, self.data * scalar, self.slots, self.sym, enforce=False)

    __rmul__ = __mul__

    def __neg__(self):
        return self * (-1.0)

    def _check_compatible(self, other):
        if self.slots != other.slots:
            raise ValueError("slot mismatch: %r vs %r" % (self.slots, other.slots))
        if self.data.shape != other.data.shape:
            raise ValueError("shape mismatch")

    def max_norm(self):
        return float(np.max(np.abs(self.data))) if self.data.size else 0.0

    def symmetry_defect(self):
        """Max-norm deviation from the declared symmetry (0 for none)."""
        if self.sym is None or self.rank < 2:
            return 0.0
        sdata = symmetrize(self.data, self.backend.grid_ndim, antisymmetric=(self.sym == "alt"))
        return float(np.max(np.abs(self.data - sdata)))

    def __repr__(self):
        return "TensorField(slots=%r, sym=%r, backend=%r)" % (
            self.slots,
            self.sym,
            self.backend,
        )


class Metric:
    """Riemannian metric: symmetric positive-definite ``'dd'`` field with
    cached inverse and volume density.

    Positive-definiteness is monitored through the smallest pointwise
    eigenvalue; degenerate metrics raise with the offending point location.
    """

    __slots__ = ("field", "inv", "sqrt_det", "min_eig", "_gamma", "_riemann")

    def __init__(self, field, validate=True):
        if field.slots != "dd":
            raise ValueError("metric must have slots 'dd'")
        gnd = field.backend.grid_ndim
        data = symmetrize(field.data, gnd)
        self.field = TensorField(field.backend, data, "dd", "sym", enforce=False)
        with np.errstate(invalid="ignore"):
            det = np.linalg.det(data)
        if validate:
            eigs = np.linalg.eigvalsh(data)
            self.min_eig = float(np.min(eigs))
            if self.min_eig <= 0.0:
                flat = np.argmin(eigs.min(axis=-1).reshape(-1))
                loc = np.unravel_index(flat, field.backend.grid_shape or (1,))
                raise ValueError(
                    "metric not positive definite (min eigenvalue %.3e at grid point %s)"
                    % (self.min_eig, tuple(int(i) for i in loc))
                )
        else:
            self.min_eig = float("nan")
        self.inv = np.linalg.inv(data)
        with np.errstate(invalid="ignore"):
            self.sqrt_det = np.sqrt(det)
        self._gamma = None
        self._riemann = None

    @property
    def backend(self):
        return self.field.backend

    @property
    def data(self):
        return self.field.data

    @property
    def dim(self):
        return self.field.backend.dim

    def inverse_defect(self):
        """Relative max-norm of ``g g^{-1} - Id``."""
        d = self.dim
        prod = np.einsum("...ij,...jk->...ik", self.data, self.inv)
        eye = np.eye(d).reshape((1,) * self.backend.grid_ndim + (d, d))
        return float(np.max(np.abs(prod - eye)))

    @classmethod
    def from_array(cls, backend, data, validate=True):
        return cls(TensorField(backend, data, "dd", "sym"), validate=validate)

    def __repr__(self):
        return "Metric(min_eig=%.3e, backend=%r)" % (self.min_eig, self.backend)
