"""Named deterministic initial-data recipes.

Every recipe is reproducible from its arguments (and seed, where one
applies).  Frame-algebra recipes are exact; torus recipes are band-limited
low-mode fields.
"""

from __future__ import annotations

import numpy as np

from .backends import FrameAlgebra, TorusChart
from .fields import Metric, TensorField
from . import operators as ops
from .operators import einsum
from . import complexgeo as cg
from .statics import SolitonData


# ---------------------------------------------------------------------------
# frame algebras
# ---------------------------------------------------------------------------

def su2_structure_constants(dim, offset=0, scale=2.0, out=None):
    """su(2) block with ``[e_i, e_j] = scale eps_{ijk} e_k`` (scale 2 makes
    the unit-radius round three-sphere for the identity metric)."""
    c = np.zeros((dim, dim, dim)) if out is None else out
    for i, j, k in [(0, 1, 2), (1, 2, 0), (2, 0, 1)]:
        c[offset + i, offset + j, offset + k] = scale
        c[offset + j, offset + i, offset + k] = -scale
    return c


def round_s3_algebra():
    """Unit round three-sphere as a frame algebra."""
    return FrameAlgebra(su2_structure_constants(3), name="s3")


def hopf_algebra():
    """Product of the unit three-sphere with a circle (su(2) + center)."""
    return FrameAlgebra(su2_structure_constants(4), name="s3xs1")


def s3s3_algebra():
    """Product of two unit three-spheres."""
    c = su2_structure_constants(6, offset=0)
    su2_structure_constants(6, offset=3, out=c)
    return FrameAlgebra(c, name="s3xs3")


def product_complex_structure(backend, a=1.0, b=1.0):
    """Invariant complex structure pairing the first fiber direction with
    the complementary factor direction and rotating the transverse planes;
    scaled so it is compatible with ``diag(a, .., a, b, .., b)``.

    The pairing orientation is the one for which the Lee form equals +*H
    in the lexicographic orientation (dimension 4).
    """
    d = backend.dim
    k = np.sqrt(a / b)
    j = np.zeros((d, d))
    if d not in (4, 6):
        raise ValueError("supported dimensions: 4 and 6")
    j[3, 0] = 1.0 / k
    j[0, 3] = -k
    j[1, 2] = 1.0
    j[2, 1] = -1.0
    if d == 6:
        j[4, 5] = 1.0
        j[5, 4] = -1.0
    return j


def hopf_gk_state(a=1.0, b=1.0):
    """Generalized Kahler structure on the three-sphere/circle product with
    bi-invariant metric diag(a, a, a, b): invariant complex structure on
    the plus side, opposite-invariance partner on the mirror algebra, and
    the torsion three-form generated by the plus side."""
    alg = hopf_algebra()
    g = Metric.from_array(alg, np.diag([a, a, a, b]))
    j = product_complex_structure(alg, a, b)
    Jp = cg.AlmostComplexStructure.from_array(alg, j, project=False)
    H = cg.d_c(cg.kahler_form(g, Jp), Jp)
    Jm = cg.AlmostComplexStructure.from_array(alg.mirror(), j, project=False)
    return cg.GKState(g=g, H=H, Jplus=Jp, Jminus=Jm)


def s3s3_gk_state(a=1.0, b=2.0):
    """Generalized Kahler structure on the product of two three-spheres.

    Like the four-dimensional state this is a fixed point of the coupled
    system, but its gauge vector fields have nontrivial adjoint action, so
    the transport pipeline carries an honest time-integration signal.
    """
    alg = s3s3_algebra()
    g = Metric.from_array(alg, np.diag([a, a, a, b, b, b]))
    j = product_complex_structure(alg, a, b)
    Jp = cg.AlmostComplexStructure.from_array(alg, j, project=False)
    H = cg.d_c(cg.kahler_form(g, Jp), Jp)
    Jm = cg.AlmostComplexStructure.from_array(alg.mirror(), j, project=False)
    return cg.GKState(g=g, H=H, Jplus=Jp, Jminus=Jm)


def squashed_hopf_plus(params=(1.0, 1.35, 0.12, 0.08)):
    """One-sided pluriclosed structure on the three-sphere/circle product
    with a non-bi-invariant left-invariant metric compatible with the
    standard invariant complex structure.

    The family ``(p, m, u, v)`` parametrizes the compatible metrics; every
    member is pluriclosed, generically non-static, and its gauge field does
    not preserve J, so the naive frozen-J run genuinely fails while the
    coupled run tracks.  Returns ``(g, J, H)``.
    """
    p, m, u, v = params
    alg = hopf_algebra()
    gm = np.zeros((4, 4))
    gm[3, 3] = p
    gm[0, 0] = p
    gm[1, 1] = m
    gm[2, 2] = m
    gm[3, 1] = gm[1, 3] = u
    gm[0, 2] = gm[2, 0] = u
    gm[3, 2] = gm[2, 3] = v
    gm[0, 1] = gm[1, 0] = -v
    g = Metric.from_array(alg, gm)
    j = product_complex_structure(alg, 1.0, 1.0)
    J = cg.AlmostComplexStructure.from_array(alg, j, project=False)
    if J.compat_defect(g) > 1e-12:
        raise ValueError("parameters break compatibility")
    H = cg.d_c(cg.kahler_form(g, J), J)
    return g, J, H


def hopf_static_soliton(a=1.0, b=1.0):
    """The lambda = 0 static datum on the three-sphere/circle product: the
    torsion form is the invariant volume form of the sphere factor at the
    normalization solving ``Rc = H^2/4`` (solved for, not assumed)."""
    alg = hopf_algebra()
    g = Metric.from_array(alg, np.diag([a, a, a, b]))
    vol = np.zeros((4, 4, 4))
    for sgn, (i, j, k) in [(1, (0, 1, 2)), (1, (1, 2, 0)), (1, (2, 0, 1)),
                           (-1, (0, 2, 1)), (-1, (2, 1, 0)), (-1, (1, 0, 2))]:
        vol[i, j, k] = sgn
    base = TensorField.form(alg, vol, 3)
    rc = ops.ricci(g).data
    h2 = ops.h_squared(g, base).data
    # Rc = s^2/4 H_base^2 on the sphere block: solve for the scaling
    num = rc[0, 0]
    den = 0.25 * h2[0, 0]
    s = np.sqrt(num / den)
    H = s * base
    return SolitonData(g=g, H=TensorField.form(alg, H.data, 3), X=None, lam=0.0)


def round_s3_soliton(h_scale, lam):
    """Soliton candidate on the round three-sphere with the scaled volume
    form; the exact zeros of the residual are (lambda, scale) = (0, 2) and
    (2, 0)."""
    alg = round_s3_algebra()
    g = Metric.from_array(alg, np.eye(3))
    vol = np.zeros((3, 3, 3))
    for sgn, (i, j, k) in [(1, (0, 1, 2)), (1, (1, 2, 0)), (1, (2, 0, 1)),
                           (-1, (0, 2, 1)), (-1, (2, 1, 0)), (-1, (1, 0, 2))]:
        vol[i, j, k] = sgn
    H = TensorField.form(alg, h_scale * vol, 3)
    return SolitonData(g=g, H=H, X=None, lam=lam)


# ---------------------------------------------------------------------------
# torus recipes
# ---------------------------------------------------------------------------

def _standard_kahler_form_data(chart):
    w0 = np.zeros(chart.grid_shape + (chart.dim, chart.dim))
    for a in range(chart.dim // 2):
        w0[..., 2 * a, 2 * a + 1] = 1.0
        w0[..., 2 * a + 1, 2 * a] = -1.0
    return w0


def flat_kahler_torus(dim=4, resolution=12, periods=None, stencil_order=4,
                      opposite_minus=True):
    """Flat Kahler torus as a generalized Kahler state with zero torsion.

    The minus-side structure is the negated complex structure by default
    (a distinct compatible partner); passing ``opposite_minus=False`` uses
    the same structure on both sides.
    """
    ch = TorusChart(dim, resolution, periods, stencil_order)
    g = Metric.from_array(ch, np.broadcast_to(np.eye(dim),
                                              ch.grid_shape + (dim, dim)).copy())
    Jp = cg.standard_complex_structure(ch)
    jm = -Jp.data if opposite_minus else Jp.data.copy()
    Jm = cg.AlmostComplexStructure.from_array(ch, jm, project=False)
    H = TensorField.zeros(ch, "ddd" if dim >= 3 else "dd", "alt" if dim >= 3 else None)
    if dim < 3:
        raise ValueError("generalized Kahler states need dimension >= 3")
    return cg.GKState(g=g, H=H, Jplus=Jp, Jminus=Jm)


def perturbed_kahler_torus(seed=1, amplitude=0.05, dim=4, resolution=12,
                           periods=None, stencil_order=4, modes=3,
                           opposite_minus=True):
    """Kahler metric from a random low-mode potential perturbation of the
    flat torus: ``w = w0 + 2 Re(i ddbar phi)`` stays closed and compatible,
    so the state is generalized Kahler with zero torsion."""
    ch = TorusChart(dim, resolution, periods, stencil_order)
    Jp = cg.standard_complex_structure(ch)
    rng = np.random.default_rng(seed)
    coords = ch.coords()
    phi = np.zeros(ch.grid_shape)
    for _ in range(modes):
        k = rng.integers(-1, 2, size=dim)
        ph = rng.uniform(0.0, 2.0 * np.pi)
        amp = rng.normal() * amplitude
        wave = sum(2.0 * np.pi * k[a] * coords[a] / ch.periods[a] for a in range(dim))
        phi += amp * np.cos(wave + ph)
    dphi = ops.exterior_derivative(TensorField.scalar(ch, phi))
    xi = cg.type_projection(dphi.data, Jp, 0, 1)
    ddbar = 1j * cg.type_projection(
        ops.exterior_derivative(TensorField(ch, xi, "d")).data, Jp, 1, 1
    )
    w = TensorField.form(ch, _standard_kahler_form_data(ch) + np.real(2.0 * ddbar), 2)
    g = Metric.from_array(ch, einsum("...ip,...jp->...ij", w.data, Jp.data))
    jm = -Jp.data if opposite_minus else Jp.data.copy()
    Jm = cg.AlmostComplexStructure.from_array(ch, jm, project=False)
    H = TensorField.zeros(ch, "ddd", "alt")
    return cg.GKState(g=g, H=H, Jplus=Jp, Jminus=Jm)


def pluriclosed_torus(seed=3, amplitude=0.05, resolution=12, periods=None,
                      stencil_order=4, modes=4):
    """Non-Kahler pluriclosed pair (g, J) on the four-torus.

    Built as ``w = w0 + (del mu + conj)`` for a random (0,1)-form mu, which
    is pluriclosed by type reasons but not closed; used to exercise the
    non-Kahler branches (Lee form, gauge field, both flow routes).
    Returns ``(g, J, w)``.
    """
    ch = TorusChart(4, resolution, periods, stencil_order)
    J = cg.standard_complex_structure(ch)
    rng = np.random.default_rng(seed)
    coords = ch.coords()
    m = np.zeros(ch.grid_shape + (4,))
    for _ in range(modes):
        k = rng.integers(-1, 2, size=4)
        ph = rng.uniform(0.0, 2.0 * np.pi)
        amp = rng.normal(size=4) * amplitude
        wave = np.cos(sum(2.0 * np.pi * k[a] * coords[a] / ch.periods[a]
                          for a in range(4)) + ph)
        m += amp.reshape((1,) * 4 + (4,)) * wave[..., None]
    mu = cg.type_projection(m, J, 0, 1)
    dmu = ops.exterior_derivative(TensorField(ch, mu, "d"))
    pmu = cg.type_projection(dmu.data, J, 1, 1)
    eta = np.real(pmu + np.conj(pmu))
    w = TensorField.form(ch, _standard_kahler_form_data(ch) + eta, 2)
    g = Metric.from_array(ch, einsum("...ip,...jp->...ij", w.data, J.data))
    return g, J, w


def conformal_metric(chart, amplitude=0.1, wave_vector=None, phase=0.0):
    """Conformally flat metric ``exp(2 phi) delta`` with a single-mode
    conformal factor (closed-form connection/curvature oracles exist)."""
    coords = chart.coords()
    if wave_vector is None:
        wave_vector = [1] + [0] * (chart.dim - 1)
    wave = sum(2.0 * np.pi * wave_vector[a] * coords[a] / chart.periods[a]
               for a in range(chart.dim))
    phi = amplitude * np.sin(wave + phase)
    gdata = np.zeros(chart.grid_shape + (chart.dim, chart.dim))
    for i in range(chart.dim):
        gdata[..., i, i] = np.exp(2.0 * phi)
    return Metric.from_array(chart, gdata), phi


def random_metric(chart, seed=0, amplitude=1e-3, modes=3):
    """Flat metric plus a random low-mode symmetric perturbation."""
    rng = np.random.default_rng(seed)
    d = chart.dim
    coords = chart.coords()
    pert = np.zeros(chart.grid_shape + (d, d))
    for _ in range(modes):
        k = rng.integers(-1, 2, size=d)
        ph = rng.uniform(0.0, 2.0 * np.pi)
        sym = rng.normal(size=(d, d))
        sym = 0.5 * (sym + sym.T) * amplitude
        wave = np.cos(sum(2.0 * np.pi * k[a] * coords[a] / chart.periods[a]
                          for a in range(d)) + ph)
        pert += wave[..., None, None] * sym
    base = np.broadcast_to(np.eye(d), chart.grid_shape + (d, d)).copy()
    return Metric.from_array(chart, base + pert)


def random_form(chart, degree, seed=0, amplitude=1.0, modes=3):
    """Random band-limited form (antisymmetrized low-mode Fourier data)."""
    rng = np.random.default_rng(seed)
    d = chart.dim
    coords = chart.coords()
    data = np.zeros(chart.grid_shape + (d,) * degree)
    for _ in range(modes):
        k = rng.integers(-1, 2, size=d)
        ph = rng.uniform(0.0, 2.0 * np.pi)
        coefs = rng.normal(size=(d,) * degree) * amplitude
        wave = np.cos(sum(2.0 * np.pi * k[a] * coords[a] / chart.periods[a]
                          for a in range(d)) + ph)
        data += wave.reshape(wave.shape + (1,) * degree) * coefs
    return TensorField.form(chart, data, degree)


def random_vector_field(chart, seed=0, amplitude=0.1, modes=3):
    rng = np.random.default_rng(seed)
    d = chart.dim
    coords = chart.coords()
    data = np.zeros(chart.grid_shape + (d,))
    for _ in range(modes):
        k = rng.integers(-1, 2, size=d)
        ph = rng.uniform(0.0, 2.0 * np.pi)
        coefs = rng.normal(size=d) * amplitude
        wave = np.cos(sum(2.0 * np.pi * k[a] * coords[a] / chart.periods[a]
                          for a in range(d)) + ph)
        data += wave[..., None] * coefs.reshape((1,) * d + (d,))
    return TensorField.vector(chart, data)
