"""Evolution systems and their time integration.

Systems (state variables in parentheses):

* ``BFIELD``      -- ``dg = -2 Rc + H^2/2``, ``dH = lap_d H``  (g, H; any
  complex structures present are carried frozen, for naive-run diagnostics).
* ``PLURICLOSED`` -- ``dw = 2(del del* w + delbar delbar* w) + 2 i del
  delbar log det h`` on (M, J) with J fixed; the metric is evolved through
  ``dg = dw(., J.)``.  The overall factor normalizes time so that Kahler
  data reduce to ``dg = -2 Rc`` (matching the B-field system).
* ``GK_COUPLED``  -- B-field system plus ``dJ = lap J + [J, g^{-1} Rc]
  + Q(DJ)`` for each complex structure.
* ``GAUGE_FIXED`` -- GK_COUPLED plus ``L_X`` terms along
  ``X^k = g^{ij} (G^k_{ij} - G0^k_{ij})`` for a reference connection G0.

The integrator is classical RK4 (or explicit Euler) with a parabolic
step-size guard ``dt <= safety h_min^2 / max|g^{-1}|`` on grid backends,
automatic dt halving (up to 8 times) on violation, and hard aborts on NaNs
or loss of positivity.  Complex structures are reprojected onto
``J^2 = -Id`` after every step; the projection size is logged and must stay
at floor on valid runs.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from .backends import FrameAlgebra
from .fields import Metric, TensorField, symmetrize
from . import operators as ops
from .operators import einsum
from . import complexgeo as cg

SYSTEMS = ("BFIELD", "PLURICLOSED", "GK_COUPLED", "GAUGE_FIXED")


# ---------------------------------------------------------------------------
# right-hand sides
# ---------------------------------------------------------------------------

def bfield_rhs(g: Metric, H: TensorField, closedness_tol=None):
    """Coupled metric / three-form system ``(-2 Rc + H^2/2, lap_d H)``.

    The metric part is symmetrized (the discrete Ricci symmetry defect is
    a separate diagnostic); the H part keeps exact antisymmetry.  The sign
    symmetry ``(g, -H) -> (same dg, -dH)`` is exact because H enters the
    metric equation quadratically.
    """
    if closedness_tol is not None:
        dh = ops.exterior_derivative(H).max_norm()
        if dh > closedness_tol:
            raise ValueError("initial H is not closed (|dH| = %.3e)" % dh)
    rc = ops.ricci(g).data
    rc = 0.5 * (rc + np.swapaxes(rc, -1, -2))
    dg = -2.0 * rc + 0.5 * ops.h_squared(g, H).data
    dH = ops.laplace_beltrami(g, H)
    return TensorField(g.backend, dg, "dd", "sym", enforce=False), dH


def j_rhs(g: Metric, J: cg.AlmostComplexStructure, parts=False):
    """Parabolic complex-structure evolution
    ``dJ = lap J + [J, g^{-1} Rc] + Q(DJ)`` with the quadratic first-order
    term Q written out below.  The three summands are retrievable with
    ``parts=True``.  J need not be integrable; the expression is evaluated
    as written.
    """
    jd = J.data
    dj = ops.covariant_derivative(g, J.field)           # [..., a, k, l]
    ddj = ops.covariant_derivative(g, dj).data          # [..., b, a, k, l]
    lap = einsum("...ba,...bakl->...kl", g.inv, ddj)

    rc = ops.ricci(g).data
    p = einsum("...lm,...mk->...kl", g.inv, rc)         # (g^{-1} Rc)_k^l
    comm = einsum("...kp,...pl->...kl", jd, p) - einsum("...kp,...pl->...kl", p, jd)

    dju = einsum("...sa,...akl->...skl", g.inv, dj.data)  # D^s J_k^l
    djd = dj.data
    w = einsum("...ssp->...p", dju)                       # D^s J_s^p
    quad = (
        -einsum("...kp,...sil,...psi->...kl", jd, dju, djd)
        - einsum("...il,...skp,...psi->...kl", jd, dju, djd)
        + einsum("...sp,...sil,...pki->...kl", jd, dju, djd)
        + einsum("...il,...p,...pki->...kl", jd, w, djd)
        - einsum("...pl,...ktp,...t->...kl", jd, djd, w)
        + einsum("...kp,...ptl,...t->...kl", jd, djd, w)
        - einsum("...tp,...t,...pkl->...kl", jd, w, djd)
    )
    total = TensorField(g.backend, lap + comm + quad, "du", None, enforce=False)
    if parts:
        return {
            "laplacian": TensorField(g.backend, lap, "du", None, enforce=False),
            "commutator": TensorField(g.backend, comm, "du", None, enforce=False),
            "quadratic": TensorField(g.backend, quad, "du", None, enforce=False),
            "total": total,
        }
    return total


def pluriclosed_rhs(g: Metric, J: cg.AlmostComplexStructure, route="complex",
                    integrability_tol=1e-5, pluriclosed_tol=None):
    """Time derivative of the Kahler form under the pluriclosed system.

    ``route='complex'`` evaluates the del/delbar splitting in pointwise
    complex frames (coordinate backends).  ``route='real'`` evaluates the
    gauge-equivalent real form ``[-2 Rc + H^2/2 - L_X g](J., .)`` with
    ``H = d^c w`` and X the gauge vector field; it is the only route
    available on frame algebras, where no holomorphic determinant frame
    exists.  Both agree to discretization order on pluriclosed inputs
    (verified pointwise by an exact symbolic cross-check and by tests).
    """
    if np.isfinite(integrability_tol):
        nij = cg.nijenhuis(J).max_norm()
        if nij > integrability_tol:
            raise ValueError("pluriclosed flow needs integrable J (|N| = %.3e)" % nij)
    w = cg.kahler_form(g, J, compat_tol=np.inf)
    if pluriclosed_tol is not None:
        ddc = ops.exterior_derivative(cg.d_c(w, J)).max_norm()
        if ddc > pluriclosed_tol:
            raise ValueError("input is not pluriclosed (|d d^c w| = %.3e)" % ddc)
    if route == "auto":
        route = "real" if isinstance(g.backend, FrameAlgebra) else "complex"
    if route == "real":
        H = cg.d_c(w, J)
        X = cg.gauge_vector_field(g, J)
        rc = ops.ricci(g).data
        rc = 0.5 * (rc + np.swapaxes(rc, -1, -2))
        dg = -2.0 * rc + 0.5 * ops.h_squared(g, H).data \
            - ops.lie_derivative(g, X, g.field).data
        dw = einsum("...im,...mj->...ij", J.data, dg)
    elif route == "complex":
        eta = ops.codifferential(g, w)
        e01 = cg.type_projection(eta.data, J, 0, 1)
        e10 = cg.type_projection(eta.data, J, 1, 0)
        dA = ops.exterior_derivative(TensorField(g.backend, e01, "d"))
        dB = ops.exterior_derivative(TensorField(g.backend, e10, "d"))
        a11 = cg.type_projection(dA.data, J, 1, 1)
        b11 = cg.type_projection(dB.data, J, 1, 1)
        s = cg.log_det_hermitian(g, J)
        xi = cg.type_projection(
            ops.exterior_derivative(TensorField.scalar(g.backend, s)).data, J, 0, 1
        )
        c11 = 1j * cg.type_projection(
            ops.exterior_derivative(TensorField(g.backend, xi, "d")).data, J, 1, 1
        )
        dw = np.real(2.0 * (a11 + b11) + 2.0 * c11)
    else:
        raise ValueError("route must be 'complex', 'real' or 'auto'")
    dw = symmetrize(dw, g.backend.grid_ndim, antisymmetric=True)
    return TensorField.form(g.backend, dw, 2, enforce=False)


def gk_coupled_rhs(state: cg.GKState) -> dict:
    """Derivative arrays of the coupled system at a generalized Kahler
    state: the metric/torsion equations concatenated with the parabolic
    complex-structure evolution for each side."""
    return system_rhs("GK_COUPLED", FlowState.from_gk(state))


def deturck_gauge_rhs(state: cg.GKState, gamma0=None) -> dict:
    """Gauge-fixed system: the coupled equations plus the Lie derivative
    along the reference-connection vector field
    ``X^k = g^{ij}(G^k_{ij} - G0^k_{ij})`` (flat-chart reference by
    default, for which X vanishes on flat metrics)."""
    return system_rhs("GAUGE_FIXED", FlowState.from_gk(state), gamma0=gamma0)


def deturck_vector_field(g: Metric, gamma0=None) -> TensorField:
    """``X^k = g^{ij} (G^k_{ij} - G0^k_{ij})`` for a reference connection
    (flat-chart connection, i.e. zero coefficients, by default)."""
    gamma = ops.levi_civita(g)
    if gamma0 is not None:
        gamma = gamma - gamma0
    return TensorField.vector(g.backend, einsum("...ij,...kij->...k", g.inv, gamma))


# ---------------------------------------------------------------------------
# flow state plumbing
# ---------------------------------------------------------------------------

@dataclass
class FlowState:
    """Raw state arrays of one time slice (typed views built on demand)."""

    backend: object
    g: np.ndarray
    H: np.ndarray | None = None
    Jp: np.ndarray | None = None
    Jm: np.ndarray | None = None

    def arrays(self):
        out = {"g": self.g}
        if self.H is not None:
            out["H"] = self.H
        if self.Jp is not None:
            out["Jp"] = self.Jp
        if self.Jm is not None:
            out["Jm"] = self.Jm
        return out

    def metric(self, validate=False):
        return Metric.from_array(self.backend, self.g, validate=validate)

    def torsion(self):
        return TensorField(self.backend, self.H, "ddd", "alt", enforce=False)

    def jplus(self):
        return cg.AlmostComplexStructure.from_array(
            self.backend, self.Jp, project=False, tol=np.inf
        )

    def jminus(self):
        from .backends import minus_side

        return cg.AlmostComplexStructure.from_array(
            minus_side(self.backend), self.Jm, project=False, tol=np.inf
        )

    def copy(self):
        return FlowState(
            self.backend,
            self.g.copy(),
            None if self.H is None else self.H.copy(),
            None if self.Jp is None else self.Jp.copy(),
            None if self.Jm is None else self.Jm.copy(),
        )

    @classmethod
    def from_gk(cls, state: cg.GKState):
        return cls(
            state.backend,
            state.g.data.copy(),
            state.H.data.copy(),
            state.Jplus.data.copy(),
            state.Jminus.data.copy(),
        )

    def to_gk(self) -> cg.GKState:
        return cg.GKState(
            g=self.metric(validate=False),
            H=self.torsion(),
            Jplus=self.jplus(),
            Jminus=self.jminus(),
        )


def _axpy(state: FlowState, deriv: dict, coef: float) -> FlowState:
    out = state.copy()
    out.g = state.g + coef * deriv["g"]
    if state.H is not None and "H" in deriv:
        out.H = state.H + coef * deriv["H"]
    if state.Jp is not None and "Jp" in deriv:
        out.Jp = state.Jp + coef * deriv["Jp"]
    if state.Jm is not None and "Jm" in deriv:
        out.Jm = state.Jm + coef * deriv["Jm"]
    return out


def _combine(state: FlowState, ks, dt) -> FlowState:
    out = state.copy()
    w = (dt / 6.0, dt / 3.0, dt / 3.0, dt / 6.0)
    for key in ks[0]:
        total = sum(wi * k[key] for wi, k in zip(w, ks))
        setattr(out, key, getattr(state, key) + total)
    return out


def system_rhs(system: str, state: FlowState, frozen_j=False, gamma0=None) -> dict:
    """Derivative arrays of one system evaluation at ``state``."""
    backend = state.backend
    g = state.metric(validate=False)
    deriv = {}
    if system == "PLURICLOSED":
        J = state.jplus()
        dw = pluriclosed_rhs(g, J, route="auto", integrability_tol=np.inf)
        deriv["g"] = einsum("...ip,...jp->...ij", dw.data, J.data)
        if state.H is not None:
            deriv["H"] = np.zeros_like(state.H)
        return deriv

    if state.H is None:
        # torsion-free reduction (pure Ricci flow)
        rc = ops.ricci(g).data
        deriv["g"] = -1.0 * (rc + np.swapaxes(rc, -1, -2))
        H = None
    else:
        H = state.torsion()
        dg, dH = bfield_rhs(g, H)
        deriv["g"] = dg.data
        deriv["H"] = dH.data
    evolve_j = system in ("GK_COUPLED", "GAUGE_FIXED") and not frozen_j
    if state.Jp is not None:
        deriv["Jp"] = (
            j_rhs(g, state.jplus()).data if evolve_j else np.zeros_like(state.Jp)
        )
    if state.Jm is not None:
        if evolve_j:
            if isinstance(backend, FrameAlgebra):
                gm = Metric.from_array(backend.mirror(), state.g, validate=False)
            else:
                gm = g  # same chart: reuse cached connection/curvature
            deriv["Jm"] = j_rhs(gm, state.jminus()).data
        else:
            deriv["Jm"] = np.zeros_like(state.Jm)
    if system == "GAUGE_FIXED":
        X = deturck_vector_field(g, gamma0)
        deriv["g"] = deriv["g"] + ops.lie_derivative(g, X, g.field).data
        if H is not None:
            deriv["H"] = deriv["H"] + ops.lie_derivative(g, X, H).data
        if state.Jp is not None and evolve_j:
            deriv["Jp"] = deriv["Jp"] + ops.lie_derivative(g, X, state.jplus().field).data
        if state.Jm is not None and evolve_j:
            if isinstance(backend, FrameAlgebra):
                gm = Metric.from_array(backend.mirror(), state.g, validate=False)
            else:
                gm = g
            Xm = TensorField.vector(gm.backend, X.data)
            deriv["Jm"] = deriv["Jm"] + ops.lie_derivative(gm, Xm, state.jminus().field).data
    return deriv


# ---------------------------------------------------------------------------
# time integration
# ---------------------------------------------------------------------------

@dataclass
class FlowProblem:
    system: str
    state: FlowState
    dt: float
    steps: int
    scheme: str = "RK4"
    safety: float = 0.2
    record_every: int = 1
    snapshot_stride: int = 0
    snapshot_times: object = None   # optional explicit times to keep states
    on_step: object = None          # optional callback(t, state) -> stored extra
    frozen_j: bool = False
    gamma0: object = None
    max_halvings: int = 8

    def __post_init__(self):
        if self.system not in SYSTEMS:
            raise ValueError("unknown system %r" % self.system)
        if self.scheme not in ("RK4", "EULER"):
            raise ValueError("scheme must be RK4 or EULER")


@dataclass
class FlowTrajectory:
    times: list = dc_field(default_factory=list)
    rows: list = dc_field(default_factory=list)
    snapshots: dict = dc_field(default_factory=dict)
    states: dict = dc_field(default_factory=dict)
    extras: dict = dc_field(default_factory=dict)
    step_times: list = dc_field(default_factory=list)
    status: str = "OK"
    message: str = ""
    dt_final: float = 0.0
    halvings: int = 0
    j_projection_max: float = 0.0

    def column(self, name):
        return np.array([row[name] for row in self.rows])

    def final_state(self):
        if not self.states:
            raise ValueError("no states recorded")
        return self.states[max(self.states)]


RESIDUAL_COLUMNS = [
    "t",
    "norm_Rc",
    "norm_H",
    "norm_dH",
    "norm_Np",
    "norm_Nm",
    "r1",
    "r2",
    "r3",
    "compat_p",
    "compat_m",
    "min_eig_g",
    "norm_Xp",
    "norm_Xm",
    "j2_defect",
]


def residual_row(t, state: FlowState):
    """One monitoring row (all max-norms; absent structures report nan)."""
    g = state.metric(validate=False)
    row = dict.fromkeys(RESIDUAL_COLUMNS, float("nan"))
    row["t"] = t
    rc = ops.ricci(g)
    row["norm_Rc"] = rc.max_norm()
    row["min_eig_g"] = float(np.min(np.linalg.eigvalsh(state.g)))
    if state.H is not None:
        H = state.torsion()
        row["norm_H"] = H.max_norm()
        row["norm_dH"] = ops.exterior_derivative(H).max_norm()
    j2 = 0.0
    if state.Jp is not None:
        Jp = state.jplus()
        row["norm_Np"] = cg.nijenhuis(Jp).max_norm()
        row["compat_p"] = Jp.compat_defect(g)
        row["norm_Xp"] = cg.gauge_vector_field(g, Jp).max_norm()
        j2 = max(j2, Jp.square_defect())
        if state.H is not None:
            wp = cg.kahler_form(g, Jp, compat_tol=np.inf)
            row["r1"] = (cg.d_c(wp, Jp) - H).max_norm()
            row["r3"] = row["norm_dH"]
    if state.Jm is not None:
        gm_backend = (
            state.backend.mirror()
            if isinstance(state.backend, FrameAlgebra)
            else state.backend
        )
        gm = Metric.from_array(gm_backend, state.g, validate=False)
        Jm = state.jminus()
        row["norm_Nm"] = cg.nijenhuis(Jm).max_norm()
        row["compat_m"] = Jm.compat_defect(gm)
        row["norm_Xm"] = cg.gauge_vector_field(gm, Jm).max_norm()
        j2 = max(j2, Jm.square_defect())
        if state.H is not None:
            hm = TensorField(gm_backend, state.H, "ddd", "alt", enforce=False)
            wm = cg.kahler_form(gm, Jm, compat_tol=np.inf)
            row["r2"] = (cg.d_c(wm, Jm) + hm).max_norm()
    row["j2_defect"] = j2
    return row


def _cfl_limit(state: FlowState, safety):
    backend = state.backend
    eigs = np.linalg.eigvalsh(state.g)
    min_eig = float(np.min(eigs))
    if min_eig <= 0:
        return 0.0, min_eig
    hmin2 = 1.0 if isinstance(backend, FrameAlgebra) else min(backend.spacing) ** 2
    return safety * hmin2 * min_eig, min_eig


def integrate(problem: FlowProblem) -> FlowTrajectory:
    """March the system with per-step guards and residual monitoring."""
    traj = FlowTrajectory()
    state = problem.state.copy()
    t = 0.0
    dt = float(problem.dt)
    halvings = 0
    steps_left = int(problem.steps)
    step_index = 0
    traj.times.append(t)
    traj.rows.append(residual_row(t, state))
    traj.step_times.append(0.0)
    snap_times = None
    if problem.snapshot_times is not None:
        snap_times = sorted(float(ts) for ts in problem.snapshot_times)

    def want_snapshot(tcur, dtcur):
        if problem.snapshot_stride and step_index % problem.snapshot_stride == 0:
            return True
        if snap_times is not None:
            return any(abs(tcur - ts) <= 0.51 * dtcur for ts in snap_times)
        return False

    if problem.snapshot_stride or (snap_times and abs(snap_times[0]) < 1e-15):
        traj.snapshots[0.0] = state.copy()
        traj.states[0.0] = traj.snapshots[0.0]
    if problem.on_step is not None:
        traj.extras[0.0] = problem.on_step(0.0, state)

    def rhs(s):
        return system_rhs(problem.system, s, problem.frozen_j, problem.gamma0)

    while steps_left > 0:
        limit, min_eig = _cfl_limit(state, problem.safety)
        if min_eig <= 0:
            traj.status = "DEGENERATE"
            traj.message = "metric lost positivity at t=%.6g (min eig %.3e)" % (t, min_eig)
            break
        while dt > limit:
            if halvings >= problem.max_halvings:
                traj.status = "ABORTED"
                traj.message = "CFL violation persists after %d halvings" % halvings
                traj.dt_final = dt
                traj.halvings = halvings
                return traj
            dt *= 0.5
            steps_left *= 2
            halvings += 1
        if problem.scheme == "EULER":
            k1 = rhs(state)
            state = _axpy(state, k1, dt)
        else:
            k1 = rhs(state)
            k2 = rhs(_axpy(state, k1, 0.5 * dt))
            k3 = rhs(_axpy(state, k2, 0.5 * dt))
            k4 = rhs(_axpy(state, k3, dt))
            state = _combine(state, (k1, k2, k3, k4), dt)
        t += dt
        step_index += 1
        steps_left -= 1
        if np.isnan(state.g).any() or (state.H is not None and np.isnan(state.H).any()):
            traj.status = "ABORTED"
            traj.message = "NaN at step %d (t=%.6g)" % (step_index, t)
            break
        # renormalize complex structures onto J^2 = -Id
        for key in ("Jp", "Jm"):
            jarr = getattr(state, key)
            if jarr is None:
                continue
            fixed = cg.renormalize_j(jarr)
            traj.j_projection_max = max(
                traj.j_projection_max, float(np.max(np.abs(fixed - jarr)))
            )
            setattr(state, key, fixed)
        traj.step_times.append(t)
        if problem.on_step is not None:
            traj.extras[t] = problem.on_step(t, state)
        if step_index % problem.record_every == 0 or steps_left == 0:
            traj.times.append(t)
            traj.rows.append(residual_row(t, state))
        if want_snapshot(t, dt):
            traj.snapshots[t] = state.copy()
            traj.states[t] = traj.snapshots[t]
    traj.states[t] = state.copy()
    traj.dt_final = dt
    traj.halvings = halvings
    return traj
