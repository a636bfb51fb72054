"""Discrete tensor calculus on both backends.

Conventions (fixed once, relied on throughout):

* curvature: ``R(e_i, e_j) e_k = R_{ijk}^l e_l`` with
  ``R_{ijk}^l = d_i G^l_{jk} - d_j G^l_{ik} + G^l_{im} G^m_{jk}
  - G^l_{jm} G^m_{ik} (- c^m_{ij} G^l_{mk} on frames)``; the round sphere
  then has positive sectional curvature and ``Rc = R_{ljk}^l``.
* orientation: lexicographic frame/coordinate order; the Levi-Civita symbol
  fixes the Hodge star.
* codifferential: sign chosen so that ``<d a, b> = <a, d* b>`` in the L2
  pairing (the adjointness contract; verified by tests, not assumed).
* form Laplacian: ``lap = -(d d* + d* d)`` (negative spectrum on flat tori).

Christoffel arrays are stored as ``Gamma[..., l, i, j] = G^l_{ij}``
(derivative direction ``i``, differentiated index ``j``), Riemann as
``R[..., i, j, k, l]``.
"""

from __future__ import annotations

import itertools
import string

import numpy as np

from .backends import FrameAlgebra
from .fields import Metric, TensorField, symmetrize

_EPS_CACHE = {}


def einsum(*args, **kwargs):
    """np.einsum with contraction-path optimization on by default
    (multi-operand contractions over grids are hot paths)."""
    kwargs.setdefault("optimize", True)
    return np.einsum(*args, **kwargs)


def levi_civita_symbol(dim):
    """Dense permutation symbol, cached per dimension."""
    if dim not in _EPS_CACHE:
        eps = np.zeros((dim,) * dim)
        for perm in itertools.permutations(range(dim)):
            sign = 1
            p = list(perm)
            for i in range(dim):
                while p[i] != i:
                    j = p[i]
                    p[i], p[j] = p[j], p[i]
                    sign = -sign
            eps[perm] = sign
        _EPS_CACHE[dim] = eps
    return _EPS_CACHE[dim]


def _letters(n, forbidden=""):
    pool = [c for c in string.ascii_lowercase if c not in forbidden]
    return pool[:n]


def grad_stack(backend, data):
    """Stack of partial derivatives, new derivative axis first among indices."""
    gnd = backend.grid_ndim
    if isinstance(backend, FrameAlgebra):
        shape = data.shape[:gnd] + (backend.dim,) + data.shape[gnd:]
        return np.zeros(shape, dtype=data.dtype)
    parts = [backend.partial(data, a) for a in range(backend.dim)]
    return np.stack(parts, axis=gnd)


# ---------------------------------------------------------------------------
# exterior calculus
# ---------------------------------------------------------------------------

def exterior_derivative(alpha: TensorField) -> TensorField:
    """d of a k-form; degree k+1 must not exceed the dimension.

    Inputs are antisymmetric by construction, so the alternating sum over
    the k+1 derivative placements is itself fully antisymmetric and no
    final symmetrization pass is needed on charts.
    """
    backend = alpha.backend
    k = alpha.degree
    if k + 1 > backend.dim:
        raise ValueError("exterior derivative would exceed top degree")
    gnd = backend.grid_ndim
    if isinstance(backend, FrameAlgebra):
        if k == 0:
            return TensorField.zeros(backend, "d")
        c = backend.structure_constants
        rest = _letters(k - 1, forbidden="abm")
        sub = "abm," + "...m" + "".join(rest) + "->...ab" + "".join(rest)
        b = einsum(sub, c, alpha.data)
        coeff = -0.5 * k * (k + 1)
        out = coeff * symmetrize(b, gnd, antisymmetric=True)
    else:
        stacked = grad_stack(backend, alpha.data)
        # (da)_{i0..ik} = sum_m (-1)^m d_{i_m} a_{i0..^m..ik}
        out = stacked.copy()
        for m in range(1, k + 1):
            out += (-1) ** m * np.moveaxis(stacked, gnd, gnd + m)
    return TensorField(backend, out, "d" * (k + 1),
                       "alt" if k + 1 >= 2 else None, enforce=False)


def raise_all(g: Metric, alpha: TensorField) -> np.ndarray:
    """Raise every index of a covariant tensor with ``g^{-1}``."""
    k = alpha.rank
    if k == 0:
        return alpha.data
    lows = _letters(k)
    ups = [c for c in string.ascii_lowercase if c not in lows][:k]
    terms = ["...%s%s" % (u, l) for u, l in zip(ups, lows)]
    sub = "...%s,%s->...%s" % ("".join(lows), ",".join(terms), "".join(ups))
    return einsum(sub, alpha.data, *([g.inv] * k))


def hodge_star(g: Metric, alpha: TensorField) -> TensorField:
    """Hodge star of a k-form for the metric's volume form and the
    lexicographic orientation."""
    backend = alpha.backend
    d = backend.dim
    k = alpha.degree
    eps = levi_civita_symbol(d)
    up = raise_all(g, alpha)
    i_idx = _letters(k)
    j_idx = [c for c in string.ascii_lowercase if c not in i_idx][: d - k]
    sub = "...%s,%s%s->...%s" % ("".join(i_idx), "".join(i_idx), "".join(j_idx), "".join(j_idx))
    out = einsum(sub, up, eps)
    if k:
        out = out / float(np.prod(range(1, k + 1)))
    sg = np.asarray(g.sqrt_det)
    out = out * sg.reshape(sg.shape + (1,) * (d - k))
    return TensorField.form(backend, out, d - k, enforce=False)


def codifferential(g: Metric, alpha: TensorField) -> TensorField:
    """Formal adjoint of d: ``d* = (-1)^{d(k+1)+1} * d *`` on k-forms."""
    k = alpha.degree
    if k == 0:
        raise ValueError("codifferential is undefined on 0-forms")
    d = alpha.backend.dim
    sign = -1.0 if (d * (k + 1) + 1) % 2 else 1.0
    return sign * hodge_star(g, exterior_derivative(hodge_star(g, alpha)))


def divergence_codifferential(g: Metric, alpha: TensorField) -> TensorField:
    """Independent route for d*: ``(d* a)_{i2..ik} = -D^p a_{p i2..ik}``."""
    k = alpha.degree
    if k == 0:
        raise ValueError("codifferential is undefined on 0-forms")
    da = covariant_derivative(g, alpha)
    rest = _letters(k - 1, forbidden="pq")
    sub = "...pq,...pq%s->...%s" % ("".join(rest), "".join(rest))
    out = -einsum(sub, g.inv, da.data)
    return TensorField.form(alpha.backend, out, k - 1, enforce=False)


def laplace_beltrami(g: Metric, alpha: TensorField) -> TensorField:
    """Form Laplacian ``-(d d* + d* d)``."""
    k = alpha.degree
    d = alpha.backend.dim
    if not np.any(alpha.data):
        return alpha.like(np.zeros_like(alpha.data))
    terms = []
    if k >= 1:
        terms.append(exterior_derivative(codifferential(g, alpha)))
    if k < d:
        terms.append(codifferential(g, exterior_derivative(alpha)))
    total = terms[0] if terms else alpha.like(np.zeros_like(alpha.data))
    for t in terms[1:]:
        total = total + t
    return -1.0 * total


def l2_inner(g: Metric, alpha: TensorField, beta: TensorField) -> float:
    """L2 pairing of same-degree forms with the metric volume element."""
    if alpha.slots != beta.slots:
        raise ValueError("forms must have the same degree")
    k = alpha.rank
    up = raise_all(g, beta)
    idx = _letters(k)
    sub = "...%s,...%s->..." % ("".join(idx), "".join(idx))
    density = einsum(sub, alpha.data, up)
    if k:
        density = density / float(np.prod(range(1, k + 1)))
    if isinstance(alpha.backend, FrameAlgebra):
        return alpha.backend.integrate(density)
    return alpha.backend.integrate(density * g.sqrt_det)


def norm_l2(g: Metric, alpha: TensorField) -> float:
    return float(np.sqrt(max(l2_inner(g, alpha, alpha), 0.0)))


# ---------------------------------------------------------------------------
# connection and curvature
# ---------------------------------------------------------------------------

def levi_civita(g: Metric) -> np.ndarray:
    """Connection coefficients ``Gamma[..., l, i, j] = G^l_{ij}``.

    Coordinate charts use the Christoffel formula; frame algebras the Koszul
    formula for invariant metrics (torsion balanced by the brackets, so
    ``G^l_{ij} - G^l_{ji} = c^l_{ij}`` there).
    """
    if g._gamma is not None:
        return g._gamma
    backend = g.backend
    if isinstance(backend, FrameAlgebra):
        c = backend.structure_constants
        gd = g.data
        t = (
            einsum("ijm,...mk->...ijk", c, gd)
            - einsum("ikm,...mj->...ijk", c, gd)
            - einsum("jkm,...mi->...ijk", c, gd)
        )
        gamma = 0.5 * einsum("...lk,...ijk->...lij", g.inv, t)
    else:
        dg = grad_stack(backend, g.data)  # dg[..., a, i, j] = d_a g_{ij}
        gamma = 0.5 * (
            einsum("...lm,...imj->...lij", g.inv, dg)
            + einsum("...lm,...jmi->...lij", g.inv, dg)
            - einsum("...lm,...mij->...lij", g.inv, dg)
        )
    g._gamma = gamma
    return gamma


def riemann(g: Metric) -> np.ndarray:
    """Curvature components ``R[..., i, j, k, l] = R_{ijk}^l``."""
    if g._riemann is not None:
        return g._riemann
    backend = g.backend
    gamma = levi_civita(g)
    gnd = backend.grid_ndim
    if isinstance(backend, FrameAlgebra):
        quad = einsum("...lim,...mjk->...ijkl", gamma, gamma)
        r = quad - np.swapaxes(quad, gnd, gnd + 1)
        r -= einsum("ijm,...lmk->...ijkl", backend.structure_constants, gamma)
    else:
        dgam = grad_stack(backend, gamma)  # [..., a, l, i, j]
        t1 = einsum("...iljk->...ijkl", dgam)
        quad = einsum("...lim,...mjk->...ijkl", gamma, gamma)
        r = t1 - np.swapaxes(t1, gnd, gnd + 1) + quad - np.swapaxes(quad, gnd, gnd + 1)
    g._riemann = r
    return r


def riemann_lowered(g: Metric) -> np.ndarray:
    """``R_{ijkl} = R_{ijk}^m g_{ml}``."""
    return einsum("...ijkm,...ml->...ijkl", riemann(g), g.data)


def ricci(g: Metric) -> TensorField:
    """Ricci tensor ``Rc_{jk} = R_{ljk}^l`` (not resymmetrized; the defect is
    a diagnostic of the discretization)."""
    rc = einsum("...ljkl->...jk", riemann(g))
    return TensorField(g.backend, rc, "dd", None, enforce=False)


def scalar_curvature(g: Metric) -> np.ndarray:
    return einsum("...jk,...jk->...", g.inv, ricci(g).data)


def curvature_invariants(g: Metric):
    """Pointwise ``(Scal, |Rc|^2, |Rm|^2)`` with indices raised by g."""
    rc = ricci(g).data
    rm = riemann_lowered(g)
    scal = einsum("...jk,...jk->...", g.inv, rc)
    rc2 = einsum("...ij,...kl,...ik,...jl->...", rc, rc, g.inv, g.inv)
    rm2 = einsum(
        "...ijkl,...mnpq,...im,...jn,...kp,...lq->...", rm, rm, g.inv, g.inv, g.inv, g.inv
    )
    return scal, rc2, rm2


def covariant_derivative(g: Metric, T: TensorField) -> TensorField:
    """Levi-Civita covariant derivative; the new (first) slot is covariant."""
    backend = T.backend
    gamma = levi_civita(g)
    out = grad_stack(backend, T.data)
    slots = T.slots
    k = len(slots)
    rest_pool = _letters(k, forbidden="lap")
    for m, s in enumerate(slots):
        idx = list(rest_pool[:k])
        idx[m] = "p"
        out_idx = list(rest_pool[:k])
        out_idx[m] = "l"
        sub = "...lap,...%s->...a%s" % ("".join(idx), "".join(out_idx))
        corr = einsum(sub, gamma, T.data)
        if s == "u":
            out = out + corr
        else:
            # lower slot: -G^p_{a j_m} T_{..p..}; reuse pattern with swapped roles
            sub = "...pal,...%s->...a%s" % ("".join(idx), "".join(out_idx))
            corr = einsum(sub, gamma, T.data)
            out = out - corr
    return TensorField(backend, out, "d" + slots, None, enforce=False)


def lie_derivative(g: Metric, X: TensorField, T: TensorField) -> TensorField:
    """Lie derivative along a vector field, written with the (torsion-free)
    Levi-Civita connection so the same expression is valid in anholonomic
    frames: ``L_X T = X^p D_p T + sum_lower T(..p..) D_j X^p
    - sum_upper D_p X^i T(..p..)``."""
    if X.slots != "u":
        raise ValueError("X must be a vector field")
    dT = covariant_derivative(g, T)
    dX = covariant_derivative(g, X).data  # [..., a, i] = D_a X^i
    k = T.rank
    idx = _letters(k, forbidden="p j".replace(" ", ""))
    sub = "...p,...p%s->...%s" % ("".join(idx), "".join(idx))
    out = einsum(sub, X.data, dT.data)
    for m, s in enumerate(T.slots):
        tin = list(idx)
        tin[m] = "p"
        tout = list(idx)
        tout[m] = "j"
        if s == "d":
            sub = "...%s,...jp->...%s" % ("".join(tin), "".join(tout))
            out = out + einsum(sub, T.data, dX)
        else:
            sub = "...%s,...pj->...%s" % ("".join(tin), "".join(tout))
            out = out - einsum(sub, T.data, dX)
    return TensorField(T.backend, out, T.slots, None, enforce=False)


# ---------------------------------------------------------------------------
# torsion quadratics, musical isomorphisms
# ---------------------------------------------------------------------------

def h_squared(g: Metric, H: TensorField) -> TensorField:
    """``(H^2)_{ij} = H_{ipq} H_{jrs} g^{pr} g^{qs}`` (symmetric, psd)."""
    if H.slots != "ddd":
        raise ValueError("H must be a 3-form")
    data = einsum("...ipq,...jrs,...pr,...qs->...ij", H.data, H.data, g.inv, g.inv)
    return TensorField(g.backend, data, "dd", "sym", enforce=False)


def sharp(g: Metric, alpha: TensorField) -> TensorField:
    if alpha.slots != "d":
        raise ValueError("sharp acts on 1-forms")
    return TensorField.vector(alpha.backend, einsum("...ij,...j->...i", g.inv, alpha.data))


def flat(g: Metric, X: TensorField) -> TensorField:
    if X.slots != "u":
        raise ValueError("flat acts on vector fields")
    return TensorField(X.backend, einsum("...ij,...j->...i", g.data, X.data), "d")


def vector_bracket(backend, X: TensorField, Y: TensorField) -> TensorField:
    """Lie bracket of vector fields: partials on charts, structure constants
    (plus derivative terms) on frame algebras."""
    if isinstance(backend, FrameAlgebra):
        c = backend.structure_constants
        data = einsum("...i,...j,ijk->...k", X.data, Y.data, c)
        return TensorField.vector(backend, data)
    dX = grad_stack(backend, X.data)
    dY = grad_stack(backend, Y.data)
    data = einsum("...p,...pk->...k", X.data, dY) - einsum(
        "...p,...pk->...k", Y.data, dX
    )
    return TensorField.vector(backend, data)
