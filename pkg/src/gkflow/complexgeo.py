"""Almost-complex structures, compatibility/integrability diagnostics,
Kahler forms, the d^c operator, gauge vector fields, pointwise complex
frames and Chern-connection quantities.

Endomorphism convention: ``J_k^l`` acts on vectors by ``(J X)^l = J_k^l X^k``
(slots ``'du'``, input index first).  The twisted differential is
``d^c a (X_0, .., X_k) = -(d a)(J X_0, .., J X_k)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from .backends import FrameAlgebra, minus_side
from .fields import Metric, TensorField
from . import operators as ops


class AlmostComplexStructure:
    """Endomorphism field with ``J^2 = -Id`` enforced at construction.

    Construction projects onto the exact constraint with the pointwise
    principal inverse square root of ``-J^2`` and asserts the residual.
    """

    __slots__ = ("field",)

    def __init__(self, field: TensorField, project=True, tol=1e-12):
        if field.slots != "du":
            raise ValueError("complex structure must have slots 'du'")
        data = field.data
        if project:
            data = renormalize_j(data)
        defect = _j2_defect(data)
        if defect > tol:
            raise ValueError("J^2 + Id residual %.3e exceeds %.1e" % (defect, tol))
        self.field = TensorField(field.backend, data, "du", None, enforce=False)

    @property
    def backend(self):
        return self.field.backend

    @property
    def data(self):
        return self.field.data

    @classmethod
    def from_array(cls, backend, data, project=True, tol=1e-12):
        return cls(TensorField(backend, data, "du"), project=project, tol=tol)

    def square_defect(self):
        return _j2_defect(self.data)

    def compat_defect(self, g: Metric):
        """Max-norm of ``g(J., J.) - g``."""
        jgj = ops.einsum("...ip,...jq,...pq->...ij", self.data, self.data, g.data)
        return float(np.max(np.abs(jgj - g.data)))

    def apply_vector(self, X: TensorField) -> TensorField:
        return TensorField.vector(self.backend, ops.einsum("...kl,...k->...l", self.data, X.data))

    def apply_oneform(self, a: TensorField) -> TensorField:
        """``(J a)(Y) = a(J Y)``, i.e. ``(J a)_k = J_k^p a_p``."""
        return TensorField(self.backend, ops.einsum("...kp,...p->...k", self.data, a.data), "d")

    def __neg__(self):
        return AlmostComplexStructure(
            TensorField(self.backend, -self.data, "du"), project=False
        )


def _j2_defect(jdata):
    d = jdata.shape[-1]
    j2 = ops.einsum("...kp,...pl->...kl", jdata, jdata)
    eye = np.eye(d).reshape((1,) * (j2.ndim - 2) + (d, d))
    return float(np.max(np.abs(j2 + eye)))


def renormalize_j(jdata, iterations=12):
    """Project toward ``J^2 = -Id``: ``J <- J (-J^2)^{-1/2}`` with the
    principal root computed by a Newton-Schulz iteration (valid when
    ``-J^2`` is close to the identity, as along flows)."""
    d = jdata.shape[-1]
    eye = np.eye(d).reshape((1,) * (jdata.ndim - 2) + (d, d))
    a = -ops.einsum("...kp,...pl->...kl", jdata, jdata)
    y = np.broadcast_to(eye, a.shape).copy()
    for _ in range(iterations):
        ay2 = ops.einsum("...ij,...jk,...kl->...il", a, y, y)
        y = 0.5 * ops.einsum("...ij,...jk->...ik", y, 3.0 * eye - ay2)
        if np.max(np.abs(ops.einsum("...ij,...jk,...kl->...il", y, y, a) - eye)) < 1e-15:
            break
    # J * (-J^2)^{-1/2}; J commutes with functions of J^2
    return ops.einsum("...kp,...pl->...kl", jdata, y)


def standard_complex_structure(backend, pairing=None):
    """Constant complex structure pairing axis ``2a`` with ``2a+1``
    (``J e_{2a} = e_{2a+1}``), or a custom list of signed pairs."""
    d = backend.dim
    if d % 2:
        raise ValueError("complex structures need even dimension")
    j = np.zeros((d, d))
    pairs = pairing if pairing is not None else [(2 * a, 2 * a + 1, 1.0) for a in range(d // 2)]
    for (u, v, s) in pairs:
        j[u, v] = s
        j[v, u] = -s
    data = np.broadcast_to(j, backend.grid_shape + (d, d)).copy()
    return AlmostComplexStructure.from_array(backend, data, project=False)


# ---------------------------------------------------------------------------
# Kahler form, d^c, Nijenhuis
# ---------------------------------------------------------------------------

def kahler_form(g: Metric, J: AlmostComplexStructure, compat_tol=1e-8) -> TensorField:
    """``w(X, Y) = g(J X, Y)``; rejects metrically incompatible pairs."""
    defect = J.compat_defect(g)
    if defect > compat_tol:
        raise ValueError("J incompatible with g (residual %.3e)" % defect)
    w = ops.einsum("...ip,...pj->...ij", J.data, g.data)
    return TensorField.form(g.backend, w, 2)


def _insert_j_slot(data, jdata, gnd, m):
    """Insert J into covariant slot m: ``(R_m a)(.., X_m, ..) = a(.., J X_m, ..)``."""
    k = data.ndim - gnd
    letters = [c for c in "abcdefgh" if c not in "kp"][:k]
    idx_in = list(letters)
    idx_in[m] = "p"
    idx_out = list(letters)
    idx_out[m] = "k"
    sub = "...%s,...kp->...%s" % ("".join(idx_in), "".join(idx_out))
    return ops.einsum(sub, data, jdata)


def insert_j_all_slots(alpha: TensorField, J: AlmostComplexStructure) -> TensorField:
    """``a(J., J., ..., J.)`` on a covariant tensor."""
    data = alpha.data
    gnd = alpha.backend.grid_ndim
    for m in range(alpha.rank):
        data = _insert_j_slot(data, J.data, gnd, m)
    return TensorField(alpha.backend, data, alpha.slots, alpha.sym, enforce=False)


def d_c(w: TensorField, J: AlmostComplexStructure) -> TensorField:
    """Twisted differential ``d^c w = -(d w)(J., ..., J.)``."""
    dw = ops.exterior_derivative(w)
    return -1.0 * insert_j_all_slots(dw, J)


def nijenhuis(J: AlmostComplexStructure) -> TensorField:
    """Integrability obstruction ``N(X, Y) = [JX, JY] - [X, Y] - J[JX, Y]
    - J[X, JY]`` as a (1,2) field ``N_{jk}^i`` (antisymmetric in j, k).

    Coordinate charts use the partial-derivative formula; frame algebras
    evaluate the brackets through the structure constants.
    """
    backend = J.backend
    jd = J.data
    if isinstance(backend, FrameAlgebra):
        c = backend.structure_constants
        n = (
            ops.einsum("...jp,...kq,pqi->...jki", jd, jd, c)
            - np.broadcast_to(c, backend.grid_shape + c.shape)
            - ops.einsum("...jp,pkm,...mi->...jki", jd, c, jd)
            - ops.einsum("...kq,jqm,...mi->...jki", jd, c, jd)
        )
    else:
        dj = ops.grad_stack(backend, jd)  # [..., a, k, i] = d_a J_k^i
        n = (
            ops.einsum("...jp,...pki->...jki", jd, dj)
            - ops.einsum("...kp,...pji->...jki", jd, dj)
            - ops.einsum("...pi,...jkp->...jki", jd, dj)
            + ops.einsum("...pi,...kjp->...jki", jd, dj)
        )
    return TensorField(backend, n, "ddu", None, enforce=False)


def nijenhuis_bracket_route(J: AlmostComplexStructure) -> TensorField:
    """Independent evaluation of N through generic vector-field brackets
    applied to the basis fields (oracle for the coordinate formula)."""
    backend = J.backend
    d = backend.dim
    shape = backend.grid_shape
    out = np.zeros(shape + (d, d, d))
    basis = []
    for j in range(d):
        e = np.zeros(shape + (d,))
        e[..., j] = 1.0
        basis.append(TensorField.vector(backend, e))
    jbasis = [J.apply_vector(e) for e in basis]
    for j in range(d):
        for k in range(j + 1, d):
            t = ops.vector_bracket(backend, jbasis[j], jbasis[k])
            t = t - ops.vector_bracket(backend, basis[j], basis[k])
            t = t - J.apply_vector(ops.vector_bracket(backend, jbasis[j], basis[k]))
            t = t - J.apply_vector(ops.vector_bracket(backend, basis[j], jbasis[k]))
            out[..., j, k, :] = t.data
            out[..., k, j, :] = -t.data
    return TensorField(backend, out, "ddu", None, enforce=False)


# ---------------------------------------------------------------------------
# generalized Kahler states
# ---------------------------------------------------------------------------

@dataclass
class GKResiduals:
    """Max-norm residual report of the generalized Kahler conditions."""

    compat_plus: float
    compat_minus: float
    nijenhuis_plus: float
    nijenhuis_minus: float
    r1: float
    r2: float
    r3: float

    def worst(self):
        return max(
            self.compat_plus,
            self.compat_minus,
            self.nijenhuis_plus,
            self.nijenhuis_minus,
            self.r1,
            self.r2,
            self.r3,
        )

    def is_valid(self, tol):
        return self.worst() <= tol

    def as_dict(self):
        return {
            "compat_plus": self.compat_plus,
            "compat_minus": self.compat_minus,
            "nijenhuis_plus": self.nijenhuis_plus,
            "nijenhuis_minus": self.nijenhuis_minus,
            "r1": self.r1,
            "r2": self.r2,
            "r3": self.r3,
        }


@dataclass
class GKState:
    """Bundle ``(g, H, J_+, J_-)``.

    On a frame algebra the minus-side structure lives on the mirror algebra
    (opposite invariance); the metric and the torsion form must then have
    bi-invariant (adjoint-invariant) components so that both sides see the
    same tensors.  On coordinate charts both sides share the backend.
    """

    g: Metric
    H: TensorField
    Jplus: AlmostComplexStructure
    Jminus: AlmostComplexStructure

    def __post_init__(self):
        b = self.g.backend
        if self.H.backend is not b or self.Jplus.backend is not b:
            raise ValueError("g, H, Jplus must share a backend")
        expected = minus_side(b)
        if self.Jminus.backend is not expected:
            raise ValueError("Jminus must live on the minus-side backend")

    @property
    def backend(self):
        return self.g.backend

    def minus_metric(self) -> Metric:
        b = self.backend
        if isinstance(b, FrameAlgebra):
            return Metric.from_array(b.mirror(), self.g.data.copy(), validate=False)
        return self.g

    def minus_torsion(self) -> TensorField:
        b = self.backend
        if isinstance(b, FrameAlgebra):
            return TensorField(b.mirror(), self.H.data, "ddd", "alt", enforce=False)
        return self.H

    def residuals(self) -> GKResiduals:
        return gk_residuals(self)


def gk_residuals(state: GKState) -> GKResiduals:
    """Residuals of ``d^c_+ w_+ = -d^c_- w_- = H`` and ``dH = 0`` plus
    compatibility and integrability defects, all in max-norm."""
    g = state.g
    gm = state.minus_metric()
    hm = state.minus_torsion()
    wp = kahler_form(g, state.Jplus, compat_tol=np.inf)
    wm = kahler_form(gm, state.Jminus, compat_tol=np.inf)
    r1 = (d_c(wp, state.Jplus) - state.H).max_norm()
    r2 = (d_c(wm, state.Jminus) + hm).max_norm()
    r3 = ops.exterior_derivative(state.H).max_norm()
    return GKResiduals(
        compat_plus=state.Jplus.compat_defect(g),
        compat_minus=state.Jminus.compat_defect(gm),
        nijenhuis_plus=nijenhuis(state.Jplus).max_norm(),
        nijenhuis_minus=nijenhuis(state.Jminus).max_norm(),
        r1=r1,
        r2=r2,
        r3=r3,
    )


# ---------------------------------------------------------------------------
# gauge vector field
# ---------------------------------------------------------------------------

def gauge_vector_field(g: Metric, J: AlmostComplexStructure) -> TensorField:
    """Generator ``X = (-J d* w)^sharp`` of the gauge diffeomorphisms."""
    w = kahler_form(g, J, compat_tol=np.inf)
    eta = ops.codifferential(g, w)
    return -1.0 * ops.sharp(g, J.apply_oneform(eta))


def gauge_vector_field_coordinate(g: Metric, J: AlmostComplexStructure) -> TensorField:
    """Independent coordinate expression ``X^p = -J_t^p D^s J_s^t``."""
    dj = ops.covariant_derivative(g, J.field).data  # [..., a, s, t]
    div = ops.einsum("...sa,...ast->...t", g.inv, dj)
    return TensorField.vector(g.backend, -ops.einsum("...tp,...t->...p", J.data, div))


def lee_form(g: Metric, J: AlmostComplexStructure) -> TensorField:
    """Lee form ``theta = -J d* w`` (the 1-form dual of the gauge field)."""
    w = kahler_form(g, J, compat_tol=np.inf)
    eta = ops.codifferential(g, w)
    return -1.0 * J.apply_oneform(eta)


# ---------------------------------------------------------------------------
# pointwise complex frames and type decomposition
# ---------------------------------------------------------------------------

def complex_frame(J: AlmostComplexStructure) -> np.ndarray:
    """Pointwise frame ``Z[..., a, l]`` of the +i eigenspace of J.

    Rows are selected from the candidate columns of ``Id - i J`` by a
    greedy largest-residual pivot (deterministic) and orthonormalized in
    the Euclidean Hermitian product.  For constant J the frame is constant.
    """
    jd = J.data
    d = jd.shape[-1]
    n = d // 2
    gnd = J.backend.grid_ndim
    const = True
    if gnd:
        flat = jd.reshape((-1,) + jd.shape[-2:])
        const = bool(np.all(flat == flat[0]))
        sample = flat[0]
    else:
        sample = jd
    if const:
        z = _pivoted_frame(sample[None])[0]
        return np.broadcast_to(z, J.backend.grid_shape + (n, d)).copy()
    return _pivoted_frame(jd.reshape((-1,) + jd.shape[-2:])).reshape(
        J.backend.grid_shape + (n, d)
    )


def _pivoted_frame(jbatch):
    m, d, _ = jbatch.shape
    n = d // 2
    eye = np.eye(d)
    # candidate mu: components (e_mu - i J e_mu)^l = delta_mu^l - i J[mu, l]
    cand = eye[None] - 1j * jbatch
    chosen = np.zeros((m, n, d), dtype=np.complex128)
    avail = cand.copy()
    for a in range(n):
        norms = np.linalg.norm(avail, axis=-1)
        pick = np.argmax(norms, axis=-1)
        rows = avail[np.arange(m), pick]
        rows = rows / np.linalg.norm(rows, axis=-1, keepdims=True)
        chosen[:, a] = rows
        # project remaining candidates off the chosen direction
        coef = ops.einsum("mcd,md->mc", avail.conj(), rows).conj()
        avail = avail - coef[..., None] * rows[:, None, :]
    return chosen


def hermitian_metric_in_frame(g: Metric, Z: np.ndarray) -> np.ndarray:
    """``h[..., a, b] = g(Z_a, conj(Z_b))`` (complex-bilinear extension)."""
    return ops.einsum("...al,...bm,...lm->...ab", Z, Z.conj(), g.data)


def type_projection(alpha_data, J: AlmostComplexStructure, p, q, grid_ndim=None):
    """Project a complexified (p+q)-form onto its (p, q) component.

    Uses the rotation operator ``(R a)(X_1..) = sum_m a(.., J X_m, ..)``
    whose (p', q') eigenvalue is ``i (p' - q')``.
    """
    k = p + q
    gnd = J.backend.grid_ndim if grid_ndim is None else grid_ndim

    def rot(data):
        out = np.zeros_like(data, dtype=np.complex128)
        for mslot in range(k):
            out += _insert_j_slot(data, J.data, gnd, mslot)
        return out

    data = np.asarray(alpha_data, dtype=np.complex128)
    lam = 1j * (p - q)
    for pp in range(k + 1):
        qq = k - pp
        if (pp, qq) == (p, q):
            continue
        mu = 1j * (pp - qq)
        data = (rot(data) - mu * data) / (lam - mu)
    return data


def log_det_hermitian(g: Metric, J: AlmostComplexStructure):
    """``log det h`` for the frame Hermitian metric (real scalar field)."""
    Z = complex_frame(J)
    h = hermitian_metric_in_frame(g, Z)
    sign, logdet = np.linalg.slogdet(h)
    if np.any(np.real(sign) <= 0):
        raise ValueError("frame Hermitian metric is not positive")
    return np.real(logdet)


# ---------------------------------------------------------------------------
# Chern-connection quantities
# ---------------------------------------------------------------------------

def chern_quantities(g: Metric, J: AlmostComplexStructure, integrability_tol=1e-5):
    """Chern torsion T, curvature trace S and quadratic torsion Q in a
    pointwise complex frame.

    Returns a dict with complex-frame tensors: ``T[..., i, k, n]`` =
    T_{ik nbar} (antisymmetric in i, k), ``S[..., i, j]`` = S_{i jbar},
    ``Q[..., i, j]`` = Q_{i jbar}, the frame metric ``h``, the frame ``Z``
    and the scalar ``|T|^2``.  Only meaningful where J is integrable; on
    patches only interior points are valid.
    """
    nij = nijenhuis(J).max_norm()
    if nij > integrability_tol:
        raise ValueError("J is not integrable (|N| = %.3e)" % nij)
    Z = complex_frame(J)
    backend = g.backend
    h = hermitian_metric_in_frame(g, Z)
    hinv = np.linalg.inv(h)
    dh = ops.grad_stack(backend, h)  # [..., mu, a, b]
    ddh = ops.grad_stack(backend, dh)  # [..., nu, mu, a, b]
    hol = ops.einsum("...km,...mab->...kab", Z, dh)  # partial_k h_{a bbar}
    T = hol - np.swapaxes(hol, -3, -2)
    # Omega_{k lbar i jbar} = -d_k dbar_l h_{i jbar}
    #                         + h^{m nbar} d_k h_{i nbar} dbar_l h_{m jbar}
    dkdl = ops.einsum("...kp,...lq,...qpab->...klab", Z, Z.conj(), ddh)
    antih = ops.einsum("...lm,...mab->...lab", Z.conj(), dh)
    omega = -dkdl + ops.einsum("...nm,...kin,...lmj->...klij", hinv, hol, antih)
    S = ops.einsum("...lk,...klij->...ij", hinv, omega)
    Q = ops.einsum("...lk,...nm,...ikn,...jlm->...ij", hinv, hinv, T, T.conj())
    t2 = ops.einsum("...ji,...lk,...nm,...ikn,...jlm->...", hinv, hinv, hinv, T, T.conj())
    return {"T": T, "S": S, "Q": Q, "h": h, "Z": Z, "T2": np.real(t2), "omega": omega}
