import numpy as np
import pytest

from gkflow.backends import TorusChart, FrameAlgebra
from gkflow.fields import Metric, TensorField, symmetrize
from gkflow import operators as ops
from gkflow import scenarios as sc

import oracles


# ---------------------------------------------------------------------------
# exterior derivative
# ---------------------------------------------------------------------------

def test_d_of_constant_one_form_is_zero(t2):
    alpha = TensorField(t2, np.ones(t2.grid_shape + (2,)), "d")
    assert ops.exterior_derivative(alpha).max_norm() < 1e-14


def test_d_matches_closed_form_derivative_and_order():
    errs = []
    for n in (16, 32, 64):
        ch = TorusChart(2, n, 2.0 * np.pi, stencil_order=4)
        x, y = ch.coords()
        alpha = TensorField(ch, np.zeros(ch.grid_shape + (2,)), "d")
        alpha.data[..., 0] = np.sin(y)  # f dx^1 with f = sin(x^2)
        da = ops.exterior_derivative(alpha)
        # d(f dx1) = f' dx2 ^ dx1
        errs.append(np.max(np.abs(da.data[..., 1, 0] - np.cos(y))))
    rate1 = errs[0] / errs[1]
    rate2 = errs[1] / errs[2]
    assert 11.0 < rate1 < 21.0 and 11.0 < rate2 < 21.0


def test_d_squared_vanishes_to_floor(t3):
    alpha = sc.random_form(t3, 1, seed=0)
    dd = ops.exterior_derivative(ops.exterior_derivative(alpha))
    assert dd.max_norm() < 1e-9


def test_d_rejects_degree_overflow(t2):
    top = TensorField.form(t2, np.zeros(t2.grid_shape + (2, 2)), 2)
    with pytest.raises(ValueError):
        ops.exterior_derivative(top)


# ---------------------------------------------------------------------------
# hodge star
# ---------------------------------------------------------------------------

def test_star_flat_t4_two_form(t4, flat_t4):
    w = TensorField.form(t4, np.zeros(t4.grid_shape + (4, 4)), 2)
    w.data[..., 0, 1] = 1.0
    w.data[..., 1, 0] = -1.0
    sw = ops.hodge_star(flat_t4, w)
    expected = np.zeros((4, 4))
    expected[2, 3] = 1.0
    expected[3, 2] = -1.0
    assert np.max(np.abs(sw.data - expected)) < 1e-14


def test_star_involution_sign_on_two_forms(t4, flat_t4):
    rng = np.random.default_rng(1)
    data = rng.normal(size=t4.grid_shape + (4, 4))
    w = TensorField.form(t4, data, 2)
    ss = ops.hodge_star(flat_t4, ops.hodge_star(flat_t4, w))
    assert np.max(np.abs(ss.data - w.data)) < 1e-10


def test_star_frame_three_form_against_loop_oracle(hopf):
    g = Metric.from_array(hopf, np.eye(4))
    vol = np.zeros((4, 4, 4))
    base = np.zeros((4, 4, 4))
    base[0, 1, 2] = 1.0
    vol = 6.0 * symmetrize(base, 0, antisymmetric=True)
    H = TensorField.form(hopf, 2.0 * vol, 3)
    star = ops.hodge_star(g, H)
    oracle = oracles.hodge_star_point(np.eye(4), 1.0, H.data, 3, 4)
    assert np.max(np.abs(star.data - oracle)) < 1e-13
    # proportional to the circle-direction frame one-form
    assert abs(star.data[3]) > 1.0
    assert np.max(np.abs(star.data[:3])) < 1e-13


def test_star_random_two_form_against_loop_oracle(hopf):
    rng = np.random.default_rng(7)
    gmat = np.eye(4) + 0.2 * np.diag(rng.uniform(size=4))
    g = Metric.from_array(hopf, gmat)
    w = TensorField.form(hopf, rng.normal(size=(4, 4)), 2)
    star = ops.hodge_star(g, w)
    oracle = oracles.hodge_star_point(np.linalg.inv(gmat),
                                      np.sqrt(np.linalg.det(gmat)),
                                      w.data, 2, 4)
    assert np.max(np.abs(star.data - oracle)) < 1e-12


# ---------------------------------------------------------------------------
# codifferential and Laplacian
# ---------------------------------------------------------------------------

def test_codifferential_of_constant_form_vanishes(t4, flat_t4):
    w = TensorField.form(t4, np.zeros(t4.grid_shape + (4, 4)), 2)
    w.data[..., 0, 1] = 1.0
    w.data[..., 1, 0] = -1.0
    assert ops.codifferential(flat_t4, w).max_norm() < 1e-14


def test_codifferential_rejects_scalars(t2):
    f = TensorField.scalar(t2, np.zeros(t2.grid_shape))
    with pytest.raises(ValueError):
        ops.codifferential(Metric.from_array(
            t2, np.broadcast_to(np.eye(2), t2.grid_shape + (2, 2)).copy()), f)


def test_adjointness_pairing():
    ch = TorusChart(2, 32, 2.0 * np.pi, stencil_order=6)
    g, _ = sc.conformal_metric(ch, amplitude=0.02)
    alpha = sc.random_form(ch, 1, seed=3)
    beta = sc.random_form(ch, 2, seed=4)
    lhs = ops.l2_inner(g, ops.exterior_derivative(alpha), beta)
    rhs = ops.l2_inner(g, alpha, ops.codifferential(g, beta))
    denom = ops.norm_l2(g, alpha) * ops.norm_l2(g, beta)
    assert abs(lhs - rhs) / denom < 1e-8


def test_adjointness_on_frame_backend(hopf):
    rng = np.random.default_rng(5)
    g = Metric.from_array(hopf, np.diag([1.0, 1.3, 1.3, 0.8]))
    alpha = TensorField.form(hopf, rng.normal(size=(4, 4)), 2)
    beta = TensorField.form(hopf, rng.normal(size=(4, 4, 4)), 3)
    lhs = ops.l2_inner(g, ops.exterior_derivative(alpha), beta)
    rhs = ops.l2_inner(g, alpha, ops.codifferential(g, beta))
    assert abs(lhs - rhs) < 1e-12


def test_codifferential_spectral_eigenvalue():
    # d*(df) = (2 pi / L)^2 f for a single mode, period L = pi
    ch = TorusChart(2, 32, np.pi, stencil_order=6)
    x, _ = ch.coords()
    g = Metric.from_array(ch, np.broadcast_to(np.eye(2), ch.grid_shape + (2, 2)).copy())
    f = TensorField.scalar(ch, np.sin(2.0 * x))
    lap = ops.codifferential(g, ops.exterior_derivative(f))
    assert np.max(np.abs(lap.data - 4.0 * np.sin(2.0 * x))) < 1e-5


def test_divergence_codifferential_route_agrees():
    ch = TorusChart(2, 48, 2.0 * np.pi, stencil_order=6)
    g, _ = sc.conformal_metric(ch, amplitude=0.05)
    beta = sc.random_form(ch, 2, seed=9)
    a = ops.codifferential(g, beta)
    b = ops.divergence_codifferential(g, beta)
    assert (a - b).max_norm() < 2e-6


def test_laplacian_of_harmonic_constant_form(t4, flat_t4):
    w = TensorField.form(t4, np.zeros(t4.grid_shape + (4, 4)), 2)
    w.data[..., 2, 3] = 1.0
    w.data[..., 3, 2] = -1.0
    assert ops.laplace_beltrami(flat_t4, w).max_norm() < 1e-13


def test_laplacian_fourier_eigenvalue(t4, flat_t4):
    x = t4.coords()[0]
    base = np.zeros(t4.grid_shape + (4, 4, 4))
    base[..., 1, 2, 3] = np.sin(x)
    H = TensorField.form(t4, 6.0 * symmetrize(base, t4.grid_ndim, antisymmetric=True),
                         3, enforce=False)
    lap = ops.laplace_beltrami(flat_t4, H)
    assert np.max(np.abs(lap.data + H.data)) < 5e-3  # h^4 floor at n=16


def test_laplacian_commutes_with_d_on_closed_forms(t4, flat_t4):
    B = sc.random_form(t4, 2, seed=11, amplitude=0.5)
    H = ops.exterior_derivative(B)
    lap = ops.laplace_beltrami(flat_t4, H)
    assert ops.exterior_derivative(lap).max_norm() < 5e-10


# ---------------------------------------------------------------------------
# connection and curvature
# ---------------------------------------------------------------------------

def test_flat_connection_and_curvature_vanish(t4, flat_t4):
    assert np.max(np.abs(ops.levi_civita(flat_t4))) < 1e-14
    assert np.max(np.abs(ops.riemann(flat_t4))) < 1e-14
    assert ops.ricci(flat_t4).max_norm() < 1e-14


def test_conformal_christoffel_closed_form():
    from gkflow.convergence import conformal_christoffel_oracle

    ch = TorusChart(3, 32, 2.0 * np.pi, stencil_order=6)
    g, phi = sc.conformal_metric(ch, amplitude=0.1)
    x = ch.coords()[0]
    dphi = np.zeros(ch.grid_shape + (3,))
    dphi[..., 0] = 0.1 * np.cos(x)
    gamma = ops.levi_civita(g)
    oracle = conformal_christoffel_oracle(dphi, 3)
    assert np.max(np.abs(gamma - oracle)) < 2e-6


def test_bianchi_cyclic_sum_at_floor(t3):
    g = sc.random_metric(t3, seed=2, amplitude=1e-3)
    r = ops.riemann(g)
    cyc = r + np.moveaxis(r, (3, 4, 5), (5, 3, 4)) + np.moveaxis(r, (3, 4, 5), (4, 5, 3))
    assert np.max(np.abs(cyc)) < 1e-7  # structurally at roundoff


def test_riemann_antisymmetry_exact(t3):
    g = sc.random_metric(t3, seed=4, amplitude=1e-3)
    r = ops.riemann(g)
    assert np.max(np.abs(r + np.swapaxes(r, t3.grid_ndim, t3.grid_ndim + 1))) < 1e-15


def test_round_sphere_curvature(s3):
    g = Metric.from_array(s3, np.eye(3))
    gamma = ops.levi_civita(g)
    c = s3.structure_constants
    assert np.max(np.abs(gamma - 0.5 * np.einsum("ijk->kij", c))) < 1e-14
    low = ops.riemann_lowered(g)
    for i, j in [(0, 1), (0, 2), (1, 2)]:
        assert abs(low[i, j, j, i] - 1.0) < 1e-13  # unit sectional curvature
    assert np.max(np.abs(ops.ricci(g).data - 2.0 * np.eye(3))) < 1e-13
    oracle = oracles.riemann_frame_loops(c, np.eye(3))
    assert np.max(np.abs(ops.riemann(g) - oracle)) < 1e-13


def test_hopf_product_ricci(hopf):
    g = Metric.from_array(hopf, np.eye(4))
    rc = ops.ricci(g).data
    assert np.max(np.abs(rc - np.diag([2.0, 2.0, 2.0, 0.0]))) < 1e-13


def test_ricci_symmetry_defect(t3):
    g = sc.random_metric(t3, seed=6, amplitude=1e-3)
    rc = ops.ricci(g).data
    assert np.max(np.abs(rc - np.swapaxes(rc, -1, -2))) < 1e-9


def test_frame_and_chart_agree_on_flat_torus(t4, flat_t4):
    ab = FrameAlgebra(np.zeros((4, 4, 4)), name="flat4")
    gf = Metric.from_array(ab, np.eye(4))
    scal_f, rc2_f, rm2_f = ops.curvature_invariants(gf)
    scal_c, rc2_c, rm2_c = ops.curvature_invariants(flat_t4)
    assert abs(scal_f - np.max(np.abs(scal_c))) < 1e-10
    assert abs(rc2_f) < 1e-10 and np.max(np.abs(rc2_c)) < 1e-10
    assert abs(rm2_f) < 1e-10 and np.max(np.abs(rm2_c)) < 1e-10


def test_bi_invariant_koszul_oracle():
    rng = np.random.default_rng(3)
    alg = sc.s3s3_algebra()
    g = np.diag(np.concatenate([np.full(3, 1.4), np.full(3, 0.7)]))
    m = Metric.from_array(alg, g)
    assert np.max(np.abs(ops.levi_civita(m)
                         - oracles.koszul_gamma_frame(alg.structure_constants, g))) < 1e-13


# ---------------------------------------------------------------------------
# covariant and Lie derivatives
# ---------------------------------------------------------------------------

def test_covariant_derivative_of_constant_scalar(t4, flat_t4):
    f = TensorField.scalar(t4, np.full(t4.grid_shape, 3.2))
    assert ops.covariant_derivative(flat_t4, f).max_norm() < 1e-14


def test_metric_compatibility_structural(t3):
    g = sc.random_metric(t3, seed=8, amplitude=1e-2)
    assert ops.covariant_derivative(g, g.field).max_norm() < 1e-12


def test_commutator_reproduces_curvature(t3):
    g = sc.random_metric(t3, seed=10, amplitude=5e-3)
    X = sc.random_vector_field(t3, seed=11, amplitude=1.0)
    dX = ops.covariant_derivative(g, X)
    ddX = ops.covariant_derivative(g, dX).data  # [b, a, i]
    comm = ddX - np.swapaxes(ddX, t3.grid_ndim, t3.grid_ndim + 1)
    # (D_i D_j - D_j D_i) X^l = R_{ijk}^l X^k
    target = np.einsum("...ijkl,...k->...ijl", ops.riemann(g), X.data)
    assert np.max(np.abs(comm - target)) < 1e-6


def test_lie_derivative_zero_field(t2):
    g = Metric.from_array(t2, np.broadcast_to(np.eye(2), t2.grid_shape + (2, 2)).copy())
    X = TensorField.vector(t2, np.zeros(t2.grid_shape + (2,)))
    T = sc.random_form(t2, 1, seed=1)
    assert ops.lie_derivative(g, X, T).max_norm() == 0.0


def test_translation_is_isometry_of_constant_metric(t2):
    g = Metric.from_array(t2, np.broadcast_to(np.eye(2), t2.grid_shape + (2, 2)).copy())
    X = TensorField.vector(t2, np.broadcast_to(np.array([0.7, -0.3]),
                                               t2.grid_shape + (2,)).copy())
    assert ops.lie_derivative(g, X, g.field).max_norm() < 1e-14


def test_lie_derivative_partial_route_agrees(t3):
    g = sc.random_metric(t3, seed=13, amplitude=5e-3)
    X = sc.random_vector_field(t3, seed=14, amplitude=0.3)
    lie = ops.lie_derivative(g, X, g.field).data
    dg = ops.grad_stack(t3, g.data)
    dX = ops.grad_stack(t3, X.data)
    direct = (np.einsum("...p,...pij->...ij", X.data, dg)
              + np.einsum("...pj,...ip->...ij", g.data, dX)
              + np.einsum("...ip,...jp->...ij", g.data, dX))
    assert np.max(np.abs(lie - direct)) < 1e-10


# ---------------------------------------------------------------------------
# torsion square and integrals
# ---------------------------------------------------------------------------

def test_h_squared_zero_and_psd(t4, flat_t4):
    H0 = TensorField.form(t4, np.zeros(t4.grid_shape + (4, 4, 4)), 3)
    assert ops.h_squared(flat_t4, H0).max_norm() == 0.0
    B = sc.random_form(t4, 2, seed=21)
    H = ops.exterior_derivative(B)
    h2 = ops.h_squared(flat_t4, H)
    eigs = np.linalg.eigvalsh(h2.data)
    assert float(np.min(eigs)) > -1e-10


def test_h_squared_hopf_scaling(hopf):
    lam = 1.7
    g = Metric.from_array(hopf, np.eye(4))
    base = np.zeros((4, 4, 4))
    base[0, 1, 2] = 1.0
    vol = 6.0 * symmetrize(base, 0, antisymmetric=True)
    H = TensorField.form(hopf, lam * vol, 3)
    h2 = ops.h_squared(g, H)
    expected = 2.0 * lam ** 2 * np.diag([1.0, 1.0, 1.0, 0.0])
    assert np.max(np.abs(h2.data - expected)) < 1e-12
    assert np.max(np.abs(h2.data - oracles.h_squared_loops(np.eye(4), H.data))) < 1e-12


def test_l2_inner_basics():
    ch = TorusChart(2, 16, 1.0, stencil_order=4)
    g = Metric.from_array(ch, np.broadcast_to(np.eye(2), ch.grid_shape + (2, 2)).copy())
    zero = TensorField(ch, np.zeros(ch.grid_shape + (2,)), "d")
    beta = sc.random_form(ch, 1, seed=2)
    assert ops.l2_inner(g, zero, beta) == 0.0
    dx1 = TensorField(ch, np.zeros(ch.grid_shape + (2,)), "d")
    dx1.data[..., 0] = 1.0
    assert abs(ops.l2_inner(g, dx1, dx1) - 1.0) < 1e-13


def test_l2_parseval_two_mode():
    ch = TorusChart(2, 32, 2.0 * np.pi, stencil_order=4)
    x, y = ch.coords()
    alpha = TensorField(ch, np.zeros(ch.grid_shape + (2,)), "d")
    alpha.data[..., 0] = 2.0 * np.sin(x) + 0.5 * np.cos(3.0 * y)
    g = Metric.from_array(ch, np.broadcast_to(np.eye(2), ch.grid_shape + (2, 2)).copy())
    # int (2 sin u + 0.5 cos 3v)^2 dudv = (4 + 0.25) * (2 pi^2 / (2 pi)^2)...
    vol = (2.0 * np.pi) ** 2
    expected = (4.0 * 0.5 + 0.25 * 0.5) * vol
    assert abs(ops.l2_inner(g, alpha, alpha) - expected) < 1e-10
