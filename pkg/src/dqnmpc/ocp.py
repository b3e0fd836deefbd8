"""Pose-twist optimal control problem over the dual-quaternion state.

Defines the left-invariant pose error and its log-map cost, the
Gauss-Newton residual/Jacobian factorization of the stage and terminal
costs, the multiple-shooting dynamics defects, and the inequality rows
(unit-norm band on the pose, box bounds on the input).  The sqp module
consumes these through a small model object so the same orchestration
also drives the decoupled baseline controller.

State layout (14): [q (8 dual-quaternion), omega (3, body), v (3, body)].
Input layout (6):  [Jinv*tau (3), dual linear channels (3)] where the
x/y dual channels are structurally zero for a thrust-along-z vehicle
and are pinned by the solver rather than bounded.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels as _k
from .dq_algebra import dq_canonical, dq_conj, dq_mul, UnitDualQuaternion
from .dynamics import QuadrotorParams
from .reference import ReferencePoint

__all__ = [
    "Weights",
    "OcpConfig",
    "DecisionTrajectory",
    "LinearizedStage",
    "pose_error",
    "twist_error",
    "stage_cost",
    "terminal_cost",
    "cost_residuals",
    "terminal_residuals",
    "dynamics_defect",
    "constraint_eval",
    "DqOcpModel",
]

# input channels that are structurally zero (x/y dual linear channels)
PINNED_INPUT_CHANNELS = (3, 4)


def _spd_sqrt_t(M: np.ndarray, name: str) -> np.ndarray:
    """Upper Cholesky factor U with M = U'U; validates SPD."""
    M = np.asarray(M, float)
    if M.ndim == 1:
        M = np.diag(M)
    if not np.allclose(M, M.T, atol=1e-12):
        raise ValueError(f"{name} must be symmetric")
    try:
        return np.linalg.cholesky(M).T
    except np.linalg.LinAlgError:
        raise ValueError(f"{name} must be positive definite") from None


@dataclass(frozen=True)
class Weights:
    """Cost weights: Qp on the pose log error (3 rotational then 3
    translational components), Qv on the twist error, R on the input
    error, with QpN/QvN terminal counterparts (default 10x stage)."""

    Qp: np.ndarray = field(default_factory=lambda: np.diag([50.0] * 3 + [100.0] * 3))
    Qv: np.ndarray = field(default_factory=lambda: np.eye(6))
    R: np.ndarray = field(default_factory=lambda: 0.5 * np.eye(6))
    QpN: np.ndarray | None = None
    QvN: np.ndarray | None = None

    def __post_init__(self):
        for name in ("Qp", "Qv", "R"):
            M = np.asarray(getattr(self, name), float)
            if M.ndim == 1:
                M = np.diag(M)
            object.__setattr__(self, name, M)
        if self.QpN is None:
            object.__setattr__(self, "QpN", 10.0 * self.Qp)
        else:
            object.__setattr__(self, "QpN", np.asarray(self.QpN, float))
        if self.QvN is None:
            object.__setattr__(self, "QvN", 10.0 * self.Qv)
        else:
            object.__setattr__(self, "QvN", np.asarray(self.QvN, float))
        # cache the transposed Cholesky factors used by the residuals
        object.__setattr__(self, "_sp", _spd_sqrt_t(self.Qp, "Qp"))
        object.__setattr__(self, "_sv", _spd_sqrt_t(self.Qv, "Qv"))
        object.__setattr__(self, "_sr", _spd_sqrt_t(self.R, "R"))
        object.__setattr__(self, "_spN", _spd_sqrt_t(self.QpN, "QpN"))
        object.__setattr__(self, "_svN", _spd_sqrt_t(self.QvN, "QvN"))


@dataclass(frozen=True)
class OcpConfig:
    """Horizon discretization and constraint data.

    ``dt = horizon_s / n_nodes``.  ``u_min``/``u_max`` bound the free
    input channels; entries for pinned channels are ignored.
    ``norm_tol`` is the half-width of the unit-norm band replacing the
    pair of opposing unit-norm inequalities (exact equality is not
    representable as two strict inequalities in floating point).
    """

    horizon_s: float = 1.5
    n_nodes: int = 30
    u_min: np.ndarray | None = None
    u_max: np.ndarray | None = None
    norm_tol: float = 1e-6

    def __post_init__(self):
        if self.n_nodes < 2:
            raise ValueError("n_nodes must be at least 2")
        if self.horizon_s <= 0:
            raise ValueError("horizon_s must be positive")
        if self.norm_tol <= 0:
            raise ValueError("norm_tol must be positive")
        if self.u_min is not None or self.u_max is not None:
            if self.u_min is None or self.u_max is None:
                raise ValueError("u_min and u_max must be given together")
            object.__setattr__(self, "u_min", np.asarray(self.u_min, float))
            object.__setattr__(self, "u_max", np.asarray(self.u_max, float))
            if not np.all(self.u_min < self.u_max):
                raise ValueError("u_min must be strictly below u_max")

    @property
    def dt(self) -> float:
        return self.horizon_s / self.n_nodes

    def bounds_for(self, params: QuadrotorParams) -> tuple[np.ndarray, np.ndarray]:
        """Input bounds, defaulting to the vehicle's actuation limits
        mapped into the dual-input coordinates."""
        if self.u_min is not None:
            return self.u_min, self.u_max
        big = 1e3
        lo = np.array([-params.tau_max, -params.tau_max, -params.tau_max] , float)
        lo = lo / params.j_diag
        hi = -lo
        u_min = np.concatenate([lo, [-big, -big, params.f_min / params.m]])
        u_max = np.concatenate([hi, [big, big, params.f_max / params.m]])
        return u_min, u_max


@dataclass
class DecisionTrajectory:
    """Shooting iterate: states[k] for nodes 1..N, inputs[k] for the
    N-1 intervals between them."""

    states: np.ndarray  # (N, 14)
    inputs: np.ndarray  # (N-1, 6)

    def copy(self) -> "DecisionTrajectory":
        return DecisionTrajectory(self.states.copy(), self.inputs.copy())


@dataclass
class LinearizedStage:
    A: np.ndarray
    B: np.ndarray
    r_cost: np.ndarray
    Jx_cost: np.ndarray
    Ju_cost: np.ndarray
    norm_val: float
    norm_jac: np.ndarray


def _q8(q):
    if isinstance(q, UnitDualQuaternion):
        return q.as_array()
    return np.asarray(q, float)


def pose_error(qd, q):
    """Left-invariant pose error qd* x q, sign-canonicalized.

    Square matrices of unit dual quaternions commute with this error:
    premultiplying both arguments by a common unit dual quaternion
    leaves it unchanged.  Returns the same kind (array or
    UnitDualQuaternion) as the inputs.
    """
    wrap = isinstance(qd, UnitDualQuaternion) and isinstance(q, UnitDualQuaternion)
    e = dq_canonical(dq_mul(dq_conj(_q8(qd)), _q8(q)))
    if wrap:
        return UnitDualQuaternion.from_array(e)
    return e


def twist_error(wd, w) -> np.ndarray:
    """Component-wise dual-twist error wd - w."""
    return np.asarray(wd, float) - np.asarray(w, float)


def _x14(x) -> np.ndarray:
    if hasattr(x, "as_vector"):
        return x.as_vector()
    return np.asarray(x, float)


def stage_cost(x, u, ref: ReferencePoint, w: Weights) -> float:
    """|Ln(qe)|^2_Qp + |we|^2_Qv + |ue|^2_R."""
    x = _x14(x)
    e, _ = _k.dq_error_ln_jac(ref.qd, x[:8])
    we = ref.wd - x[8:14]
    ue = ref.ud - np.asarray(u, float)
    return float(e @ (w.Qp @ e) + we @ (w.Qv @ we) + ue @ (w.R @ ue))


def terminal_cost(x, ref: ReferencePoint, w: Weights) -> float:
    x = _x14(x)
    e, _ = _k.dq_error_ln_jac(ref.qd, x[:8])
    we = ref.wd - x[8:14]
    return float(e @ (w.QpN @ e) + we @ (w.QvN @ we))


def cost_residuals(x, u, ref: ReferencePoint, w: Weights):
    """Gauss-Newton residual r with |r|^2 = stage_cost and its exact
    Jacobians (Jx 18x14, Ju 18x6)."""
    x = _x14(x)
    e, Je = _k.dq_error_ln_jac(ref.qd, x[:8])
    we = ref.wd - x[8:14]
    ue = ref.ud - np.asarray(u, float)
    r = np.concatenate([w._sp @ e, w._sv @ we, w._sr @ ue])
    Jx = np.zeros((18, 14))
    Jx[0:6, 0:8] = w._sp @ Je
    Jx[6:12, 8:14] = -w._sv
    Ju = np.zeros((18, 6))
    Ju[12:18, :] = -w._sr
    return r, Jx, Ju


def terminal_residuals(x, ref: ReferencePoint, w: Weights):
    x = _x14(x)
    e, Je = _k.dq_error_ln_jac(ref.qd, x[:8])
    we = ref.wd - x[8:14]
    r = np.concatenate([w._spN @ e, w._svN @ we])
    Jx = np.zeros((12, 14))
    Jx[0:6, 0:8] = w._spN @ Je
    Jx[6:12, 8:14] = -w._svN
    return r, Jx


def dynamics_defect(x_k, u_k, x_k1, cfg: OcpConfig, params: QuadrotorParams):
    """Shooting defect x_{k+1} - F(x_k, u_k) and the RK4 Jacobians
    A = dF/dx_k, B = dF/du_k.

    F is the raw RK4 map (no reprojection): the unit-norm manifold is
    enforced by the constraint band plus post-step renormalization, so
    A is a plain flow Jacobian with A -> I as dt -> 0.
    """
    x_k, x_k1 = _x14(x_k), _x14(x_k1)
    xn, A, B = _k.dq_rk4_jac(
        x_k, np.asarray(u_k, float), cfg.dt, params.j_diag, params.g,
        params.drag_c / params.m, False,
    )
    return x_k1 - xn, A, B


def constraint_eval(x, u, cfg: OcpConfig, params: QuadrotorParams):
    """Values and Jacobians of the stacked inequality blocks:

        [ |P(q)| - 1 - tol,  1 - |P(q)| - tol,  u - u_max,  u_min - u ]

    all feasible iff every entry <= 0.  The two norm rows implement the
    unit-norm band of half-width ``cfg.norm_tol``.
    """
    x = _x14(x)
    u = np.asarray(u, float)
    u_min, u_max = cfg.bounds_for(params)
    pn = float(np.linalg.norm(x[:4]))
    v = pn - 1.0
    vals = np.concatenate([[v - cfg.norm_tol, -v - cfg.norm_tol], u - u_max, u_min - u])
    Jx = np.zeros((14, 14))
    row = np.zeros(14)
    row[:4] = x[:4] / pn
    Jx[0] = row
    Jx[1] = -row
    Ju = np.zeros((14, 6))
    Ju[2:8] = np.eye(6)
    Ju[8:14] = -np.eye(6)
    return vals, Jx, Ju


class DqOcpModel:
    """Model adapter binding the dual-quaternion OCP to the generic SQP
    orchestrator.  One instance per solver; refs are set per solve."""

    nx = 14
    nu = 6

    def __init__(self, params: QuadrotorParams, cfg: OcpConfig, w: Weights):
        self.params = params
        self.cfg = cfg
        self.w = w
        self.refs: list[ReferencePoint] = []
        u_min, u_max = cfg.bounds_for(params)
        self.u_min = u_min.copy()
        self.u_max = u_max.copy()
        self.u_fixed = np.zeros(6, bool)
        self.u_fixed[list(PINNED_INPUT_CHANNELS)] = True
        self._drag = params.drag_c / params.m

    def set_refs(self, refs: list[ReferencePoint]):
        self.refs = refs

    def step(self, x, u):
        # raw RK4: the unit norm is the constraint band's job, and the
        # raw map is what the defect Jacobians differentiate
        return _k.dq_rk4(x, u, self.cfg.dt, self.params.j_diag, self.params.g,
                         self._drag, False)

    def step_jac(self, x, u):
        return _k.dq_rk4_jac(x, u, self.cfg.dt, self.params.j_diag, self.params.g,
                             self._drag, False)

    def stage_residual(self, k, x, u):
        return cost_residuals(x, u, self.refs[k], self.w)

    def terminal_residual(self, x):
        return terminal_residuals(x, self.refs[-1], self.w)

    def stage_cost_val(self, k, x, u):
        return stage_cost(x, u, self.refs[k], self.w)

    def terminal_cost_val(self, x):
        return terminal_cost(x, self.refs[-1], self.w)

    def norm_row(self, x):
        pn = float(np.linalg.norm(x[:4]))
        jac = np.zeros(14)
        jac[:4] = x[:4] / pn
        return pn - 1.0, jac

    def ortho_row(self, x):
        # second unit-DQ invariant: primary and dual parts orthogonal;
        # banding it keeps the post-step reprojection second order
        jac = np.zeros(14)
        jac[:4] = x[4:8]
        jac[4:8] = x[:4]
        return float(x[:4] @ x[4:8]), jac

    def normalize_state(self, x):
        out = np.asarray(x, float).copy()
        out[:8] = _k.dq_normalize(out[:8])
        return out

    def blend_to_ref(self, x0, a):
        """State a fraction ``a`` along the screw geodesic from x0 to
        the terminal reference pose, twist blended linearly."""
        qr = self.refs[-1].qd
        s = _k.dq_log(_k.dq_canonical(_k.dq_mul(_k.dq_conj(x0[:8]), qr)))
        out = np.empty(14)
        out[:8] = _k.dq_normalize(_k.dq_mul(x0[:8], _k.dq_exp(a * s)))
        out[8:14] = (1.0 - a) * x0[8:14] + a * self.refs[-1].wd
        return out

    def ref_state(self, k):
        r = self.refs[k]
        return np.concatenate([r.qd, r.wd])

    def ref_input(self, k):
        return self.refs[k].ud.copy()

    def pin_values(self, k):
        return self.refs[k].ud[list(PINNED_INPUT_CHANNELS)]
