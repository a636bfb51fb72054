"""Grid-refinement order measurement against closed-form oracles.

The oracle fields vary along the first axis only, so refinement is applied
anisotropically (the remaining axes stay at the minimum resolution); the
operators still run in full four-dimensional index algebra.
"""

from __future__ import annotations

import numpy as np

from .backends import TorusChart
from .fields import Metric, TensorField
from . import operators as ops
from .operators import einsum

TRACKED_OPERATORS = ("exterior_derivative", "codifferential",
                     "laplace_beltrami", "riemann")


def conformal_riemann_oracle(phi, dphi, ddphi, dim):
    """Closed-form mixed Riemann tensor of ``exp(2 phi) delta``:
    ``R_{ijk}^l = -(d_i^l b_jk - d_j^l b_ik) - (d_jk b_i^l - d_ik b_j^l)
    - |grad phi|^2 (d_i^l d_jk - d_j^l d_ik)`` with
    ``b = Hess phi - dphi x dphi`` (flat derivatives, flat index raising)."""
    b = ddphi - einsum("...i,...j->...ij", dphi, dphi)
    g2 = einsum("...i,...i->...", dphi, dphi)
    eye = np.eye(dim)
    shape = b.shape[:-2]
    r = np.zeros(shape + (dim,) * 4)
    r -= einsum("il,...jk->...ijkl", eye, b) - einsum("jl,...ik->...ijkl", eye, b)
    r -= einsum("jk,...il->...ijkl", eye, b) - einsum("ik,...jl->...ijkl", eye, b)
    r -= einsum("...,il,jk->...ijkl", g2, eye, eye) - einsum(
        "...,jl,ik->...ijkl", g2, eye, eye
    )
    return r


def conformal_christoffel_oracle(dphi, dim):
    """``G^k_{ij} = d^k_i phi_j + d^k_j phi_i - d_ij phi^k``."""
    eye = np.eye(dim)
    return (
        einsum("ki,...j->...kij", eye, dphi)
        + einsum("kj,...i->...kij", eye, dphi)
        - einsum("ij,...k->...kij", eye, dphi)
    )


def _chart(n, stencil_order, aux_res, dim=4):
    return TorusChart(dim, (n,) + (aux_res,) * (dim - 1), 2.0 * np.pi, stencil_order)


def _flat_metric(chart):
    d = chart.dim
    return Metric.from_array(
        chart, np.broadcast_to(np.eye(d), chart.grid_shape + (d, d)).copy()
    )


def operator_errors(n, stencil_order=4, aux_res=8, conformal_amplitude=0.1):
    """Max-norm errors of the four tracked operators at resolution ``n``
    (first axis), against their closed-form oracles."""
    ch = _chart(n, stencil_order, aux_res)
    x = ch.coords()[0]
    d = ch.dim
    errors = {}

    # d of a 1-form: alpha = sin(x1) dx2 -> cos(x1) dx1 ^ dx2
    alpha = TensorField(ch, np.zeros(ch.grid_shape + (d,)), "d")
    alpha.data[..., 1] = np.sin(x)
    da = ops.exterior_derivative(alpha)
    exact = np.cos(x)
    errors["exterior_derivative"] = float(
        max(np.max(np.abs(da.data[..., 0, 1] - exact)),
            np.max(np.abs(da.data[..., 1, 0] + exact)))
    )

    g = _flat_metric(ch)
    # d* d of a scalar: f = sin(x1), d* d f = f for unit wave number
    f = TensorField.scalar(ch, np.sin(x))
    lapf = ops.codifferential(g, ops.exterior_derivative(f))
    errors["codifferential"] = float(np.max(np.abs(lapf.data - np.sin(x))))

    # form Laplacian on a 3-form: H = sin(x1) dx2^dx3^dx4 -> -H
    hdata = np.zeros(ch.grid_shape + (d, d, d))
    from .fields import symmetrize

    base = np.zeros(ch.grid_shape + (d, d, d))
    base[..., 1, 2, 3] = np.sin(x)
    hdata = 6.0 * symmetrize(base, ch.grid_ndim, antisymmetric=True)
    H = TensorField.form(ch, hdata, 3, enforce=False)
    lapH = ops.laplace_beltrami(g, H)
    errors["laplace_beltrami"] = float(np.max(np.abs(lapH.data + H.data)))

    # Riemann of the conformal metric exp(2 eps sin(x1)) delta
    eps = conformal_amplitude
    phi = eps * np.sin(x)
    gd = np.zeros(ch.grid_shape + (d, d))
    for i in range(d):
        gd[..., i, i] = np.exp(2.0 * phi)
    gc = Metric.from_array(ch, gd)
    dphi = np.zeros(ch.grid_shape + (d,))
    dphi[..., 0] = eps * np.cos(x)
    ddphi = np.zeros(ch.grid_shape + (d, d))
    ddphi[..., 0, 0] = -eps * np.sin(x)
    oracle = conformal_riemann_oracle(phi, dphi, ddphi, d)
    errors["riemann"] = float(np.max(np.abs(ops.riemann(gc) - oracle)))
    return errors


def fit_order(resolutions, errors):
    """Least-squares slope of ``log2 error`` against ``log2 h``."""
    logs_n = np.log2(np.asarray(resolutions, dtype=float))
    logs_e = np.log2(np.asarray(errors, dtype=float))
    slope = np.polyfit(logs_n, logs_e, 1)[0]
    return float(-slope)


def convergence_study(resolutions=(16, 32, 64), stencil_order=4, aux_res=8):
    """Measured order per operator over the refinement sequence."""
    table = {op: [] for op in TRACKED_OPERATORS}
    for n in resolutions:
        errs = operator_errors(n, stencil_order, aux_res)
        for op in TRACKED_OPERATORS:
            table[op].append(errs[op])
    return {
        op: {
            "resolutions": list(resolutions),
            "errors": table[op],
            "order": fit_order(resolutions, table[op]),
        }
        for op in TRACKED_OPERATORS
    }
