import numpy as np
import pytest

from gkflow.backends import TorusChart
from gkflow.fields import Metric, TensorField
from gkflow import operators as ops
from gkflow import complexgeo as cg
from gkflow import scenarios as sc
from gkflow import statics as st


def flat_metric(ch):
    d = ch.dim
    return Metric.from_array(ch, np.broadcast_to(np.eye(d), ch.grid_shape + (d, d)).copy())


# ---------------------------------------------------------------------------
# almost-complex structures
# ---------------------------------------------------------------------------

def test_j_squared_enforced_and_projection(t4_iso):
    rng = np.random.default_rng(0)
    J0 = cg.standard_complex_structure(t4_iso)
    noisy = J0.data + 1e-3 * rng.normal(size=J0.data.shape)
    J = cg.AlmostComplexStructure.from_array(t4_iso, noisy, project=True)
    assert J.square_defect() < 1e-12


def test_rejects_non_complex_structure(t4_iso):
    bad = np.zeros(t4_iso.grid_shape + (4, 4))
    with pytest.raises(Exception):
        cg.AlmostComplexStructure.from_array(t4_iso, bad, project=False)


def test_compatibility_defect(t4_iso):
    g = flat_metric(t4_iso)
    J0 = cg.standard_complex_structure(t4_iso)
    assert J0.compat_defect(g) < 1e-14


# ---------------------------------------------------------------------------
# Kahler form
# ---------------------------------------------------------------------------

def test_flat_kahler_form(t4_iso):
    g = flat_metric(t4_iso)
    J0 = cg.standard_complex_structure(t4_iso)
    w = cg.kahler_form(g, J0)
    expected = np.zeros((4, 4))
    expected[0, 1] = expected[2, 3] = 1.0
    expected[1, 0] = expected[3, 2] = -1.0
    assert np.max(np.abs(w.data - expected)) < 1e-14
    assert w.symmetry_defect() < 1e-14


def test_kahler_form_scales_with_metric(t4_iso):
    g = flat_metric(t4_iso)
    g2 = Metric.from_array(t4_iso, 2.0 * g.data)
    J0 = cg.standard_complex_structure(t4_iso)
    w1 = cg.kahler_form(g, J0)
    w2 = cg.kahler_form(g2, J0)
    assert np.max(np.abs(w2.data - 2.0 * w1.data)) < 1e-14


def test_kahler_form_tamedness(hopf_gk):
    rng = np.random.default_rng(4)
    w = cg.kahler_form(hopf_gk.g, hopf_gk.Jplus)
    for _ in range(20):
        v = rng.normal(size=4)
        jv = np.einsum("kl,k->l", hopf_gk.Jplus.data, v)
        assert np.einsum("i,ij,j->", v, w.data, jv) > 0.0


def test_kahler_form_rejects_incompatible(t4_iso):
    rng = np.random.default_rng(1)
    g = Metric.from_array(
        t4_iso,
        np.broadcast_to(np.eye(4) + 0.3 * np.diag([1.0, 0.0, 0.0, 0.0]),
                        t4_iso.grid_shape + (4, 4)).copy(),
    )
    J0 = cg.standard_complex_structure(t4_iso)
    with pytest.raises(ValueError):
        cg.kahler_form(g, J0, compat_tol=1e-10)


# ---------------------------------------------------------------------------
# d^c
# ---------------------------------------------------------------------------

def test_dc_flat_kahler_vanishes(t4_iso):
    g = flat_metric(t4_iso)
    J0 = cg.standard_complex_structure(t4_iso)
    w = cg.kahler_form(g, J0)
    assert cg.d_c(w, J0).max_norm() < 1e-14


def test_dc_sign_flip_under_negated_j(pluriclosed_t4):
    g, J, w = pluriclosed_t4
    Jm = cg.AlmostComplexStructure.from_array(J.backend, -J.data, project=False)
    a = cg.d_c(w, J)
    b = cg.d_c(w, Jm)
    assert (a + b).max_norm() < 1e-10


def test_dc_hopf_matches_invariant_volume(hopf_gk):
    # d^c of the invariant Kahler form is a multiple of the sphere volume
    # form; the multiple solves the static balance (frame algebra exact)
    H = hopf_gk.H
    expected = np.zeros((4, 4, 4))
    from gkflow.fields import symmetrize

    base = np.zeros((4, 4, 4))
    base[0, 1, 2] = 1.0
    expected = 2.0 * 6.0 * symmetrize(base, 0, antisymmetric=True)
    assert np.max(np.abs(H.data - expected)) < 1e-13


# ---------------------------------------------------------------------------
# Nijenhuis tensor
# ---------------------------------------------------------------------------

def test_nijenhuis_constant_j_exactly_zero(t4_iso):
    J0 = cg.standard_complex_structure(t4_iso)
    assert cg.nijenhuis(J0).max_norm() < 1e-15


def test_nijenhuis_coordinate_vs_bracket_routes(t2):
    # a varying (non-integrable) endomorphism: rotate J0 by a position-
    # dependent angle; the two evaluation routes must agree
    x, y = t2.coords()
    a = 0.3 * np.sin(x) * np.cos(y)
    b = 1.0 + 0.2 * np.cos(x)
    jd = np.zeros(t2.grid_shape + (2, 2))
    jd[..., 0, 0] = a
    jd[..., 0, 1] = b
    jd[..., 1, 0] = -(1.0 + a ** 2) / b
    jd[..., 1, 1] = -a
    # traceless with unit determinant, so J^2 = -Id pointwise
    J = cg.AlmostComplexStructure.from_array(t2, jd, project=False)
    n1 = cg.nijenhuis(J)
    n2 = cg.nijenhuis_bracket_route(J)
    assert (n1 - n2).max_norm() < 1e-10


def test_nijenhuis_frame_vs_bracket_routes(s3s3_gk):
    J = s3s3_gk.Jplus
    n1 = cg.nijenhuis(J)
    n2 = cg.nijenhuis_bracket_route(J)
    assert (n1 - n2).max_norm() < 1e-13
    assert n1.max_norm() < 1e-13


def test_nijenhuis_negative_control(t4_iso):
    rng = np.random.default_rng(8)
    J0 = cg.standard_complex_structure(t4_iso)
    x = t4_iso.coords()[0]
    pert = 0.2 * np.sin(x)[..., None, None] * rng.normal(size=(4, 4))
    J = cg.AlmostComplexStructure.from_array(t4_iso, J0.data + pert, project=True)
    assert J.square_defect() < 1e-12
    assert cg.nijenhuis(J).max_norm() > 1e-2


# ---------------------------------------------------------------------------
# generalized Kahler residuals
# ---------------------------------------------------------------------------

def test_flat_kahler_gk_residuals():
    state = sc.flat_kahler_torus(resolution=8)
    assert state.residuals().worst() < 1e-10


def test_hopf_gk_residuals(hopf_gk):
    assert hopf_gk.residuals().worst() < 1e-8


def test_h_sign_flip_negative_control(hopf_gk):
    flipped = cg.GKState(g=hopf_gk.g, H=-1.0 * hopf_gk.H,
                         Jplus=hopf_gk.Jplus, Jminus=hopf_gk.Jminus)
    res = flipped.residuals()
    hnorm = hopf_gk.H.max_norm()
    assert abs(res.r1 - 2.0 * hnorm) < 1e-10
    assert abs(res.r2 - 2.0 * hnorm) < 1e-10


def test_gk_plus_minus_relabeling(s3s3_gk):
    """Swapping the sides (J-, -H) on the mirror algebra satisfies the same
    equations: the relabeled state has the same residual profile."""
    state = s3s3_gk
    mirror = state.backend.mirror()
    swapped = cg.GKState(
        g=Metric.from_array(mirror, state.g.data.copy(), validate=False),
        H=TensorField(mirror, -state.H.data, "ddd", "alt", enforce=False),
        Jplus=cg.AlmostComplexStructure.from_array(mirror, state.Jminus.data,
                                                   project=False),
        Jminus=cg.AlmostComplexStructure.from_array(state.backend,
                                                    state.Jplus.data,
                                                    project=False),
    )
    assert swapped.residuals().worst() < 1e-13


# ---------------------------------------------------------------------------
# gauge vector field
# ---------------------------------------------------------------------------

def test_gauge_field_flat_kahler_zero(t4_iso):
    g = flat_metric(t4_iso)
    J0 = cg.standard_complex_structure(t4_iso)
    assert cg.gauge_vector_field(g, J0).max_norm() < 1e-14


def test_gauge_field_kahler_at_floor():
    state = sc.perturbed_kahler_torus(seed=2, amplitude=0.05, resolution=12,
                                      stencil_order=6)
    w = cg.kahler_form(state.g, state.Jplus)
    assert ops.codifferential(state.g, w).max_norm() < 1e-6
    assert cg.gauge_vector_field(state.g, state.Jplus).max_norm() < 1e-6


def test_gauge_field_two_formulas_agree(hopf_gk, s3s3_gk, squashed, pluriclosed_t4):
    for (g, J) in [
        (hopf_gk.g, hopf_gk.Jplus),
        (s3s3_gk.g, s3s3_gk.Jplus),
        (squashed[0], squashed[1]),
        (pluriclosed_t4[0], pluriclosed_t4[1]),
    ]:
        a = cg.gauge_vector_field(g, J)
        b = cg.gauge_vector_field_coordinate(g, J)
        tol = 1e-8 if not isinstance(g.backend, TorusChart) else 1e-5
        assert (a - b).max_norm() < tol


def test_gauge_field_hopf_invariant_value(hopf_gk):
    X = cg.gauge_vector_field(hopf_gk.g, hopf_gk.Jplus)
    assert np.max(np.abs(X.data - np.array([0.0, 0.0, 0.0, 2.0]))) < 1e-13


# ---------------------------------------------------------------------------
# Lee form
# ---------------------------------------------------------------------------

def test_lee_form_satisfies_surface_identity(pluriclosed_t4):
    g, J, w = pluriclosed_t4
    theta = cg.lee_form(g, J)
    dw = ops.exterior_derivative(w)
    # dw = theta ^ w on surfaces
    from gkflow.fields import symmetrize

    wedge = 3.0 * symmetrize(
        np.einsum("...i,...jk->...ijk", theta.data, w.data),
        g.backend.grid_ndim, antisymmetric=True)
    assert np.max(np.abs(dw.data - wedge)) < 1e-8


# ---------------------------------------------------------------------------
# Chern quantities
# ---------------------------------------------------------------------------

def test_chern_kahler_torsion_vanishes():
    state = sc.perturbed_kahler_torus(seed=5, amplitude=0.04, resolution=12,
                                      stencil_order=6)
    ch = cg.chern_quantities(state.g, state.Jplus)
    assert np.max(np.abs(ch["T"])) < 1e-6
    assert np.max(np.abs(ch["Q"])) < 1e-10


def test_chern_hopf_staticity_and_surface_identity():
    res = st.hopf_static_metric(np.array([[0.8, -0.3, 0.5, 0.2]]))
    r = res[0]
    assert r["s_minus_q"] < 1e-7
    assert r["surface_identity"] < 1e-10


def test_chern_q_positive_semidefinite(pluriclosed_t4):
    g, J, w = pluriclosed_t4
    ch = cg.chern_quantities(g, J)
    q = ch["Q"]
    herm = np.max(np.abs(q - np.conj(np.swapaxes(q, -1, -2))))
    assert herm < 1e-10
    eigs = np.linalg.eigvalsh(q)
    assert float(np.min(eigs)) > -1e-10


def test_chern_rejects_non_integrable(t4_iso):
    rng = np.random.default_rng(9)
    J0 = cg.standard_complex_structure(t4_iso)
    x = t4_iso.coords()[0]
    pert = 0.2 * np.sin(x)[..., None, None] * rng.normal(size=(4, 4))
    J = cg.AlmostComplexStructure.from_array(t4_iso, J0.data + pert, project=True)
    g = flat_metric(t4_iso)
    with pytest.raises(ValueError):
        cg.chern_quantities(g, J)


# ---------------------------------------------------------------------------
# type projections
# ---------------------------------------------------------------------------

def test_type_projections_resolve_identity(pluriclosed_t4):
    g, J, w = pluriclosed_t4
    alpha = sc.random_form(g.backend, 2, seed=3)
    total = sum(
        cg.type_projection(alpha.data, J, p, 2 - p) for p in range(3)
    )
    assert np.max(np.abs(total - alpha.data)) < 1e-12


def test_kahler_form_is_type_one_one(pluriclosed_t4):
    g, J, w = pluriclosed_t4
    p11 = cg.type_projection(w.data, J, 1, 1)
    assert np.max(np.abs(np.real(p11) - w.data)) < 1e-12
    assert np.max(np.abs(np.imag(p11))) < 1e-12
