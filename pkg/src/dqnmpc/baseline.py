"""Decoupled-error NMPC over the classical quadrotor state.

The comparison controller: position, velocity, orientation, and
body-rate errors enter the cost as separate quadratic terms, with the
orientation term on the imaginary part of the attitude error
quaternion.  That error vector has norm sin(theta/2), so its gradient
in the angle collapses as theta approaches pi -- the structural
difference the pose-log controller is measured against.  Dynamics, QP,
and SQP machinery are shared; this module only supplies the model
adapter and the error/cost definitions.

State layout (13): [p (3, world), v (3, world), r (4, unit quaternion),
omega (3, body)].  Input layout (4): [f (collective thrust), tau (3)].
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels as _k
from .dynamics import QuadrotorParams
from .ocp import OcpConfig, _spd_sqrt_t
from .reference import ReferencePoint
from .sqp import SolverConfig, rti_step, sqp_solve

__all__ = [
    "BaselineWeights",
    "baseline_orientation_error",
    "baseline_stage_cost",
    "baseline_terminal_cost",
    "BaselineOcpModel",
    "baseline_solve",
    "baseline_rti_step",
]


@dataclass(frozen=True)
class BaselineWeights:
    """Cost weights for the decoupled formulation.

    Translation, velocity, and input defaults match the pose-log
    controller's quadratic expansion at small errors on the stock
    vehicle: the half-pose log scales position by 1/2 (hence
    Qpos = Qp_trans/4) and Rb maps the dual-input penalty 0.5*I through
    u = [m*a_z, J*alpha].  The orientation weight is tuned, not
    matched: it is set where hover-regulation settling still equals the
    pose-log controller's (within 10%) while attitude corrections stay
    settling-driven rather than tracking-optimal, which is how the
    decoupled formulation is tuned in practice.  Terminal weights
    default to 10x the stage weights.
    """

    Qpos: np.ndarray = field(default_factory=lambda: 25.0 * np.eye(3))
    Qvel: np.ndarray = field(default_factory=lambda: np.eye(3))
    Qquat: np.ndarray = field(default_factory=lambda: 10.0 * np.eye(3))
    Qomega: np.ndarray = field(default_factory=lambda: np.eye(3))
    Rb: np.ndarray = field(
        default_factory=lambda: np.diag([0.5, 5000.0, 5000.0, 1250.0])
    )
    QposN: np.ndarray | None = None
    QvelN: np.ndarray | None = None
    QquatN: np.ndarray | None = None
    QomegaN: np.ndarray | None = None

    def __post_init__(self):
        for name in ("Qpos", "Qvel", "Qquat", "Qomega", "Rb"):
            M = np.asarray(getattr(self, name), float)
            if M.ndim == 1:
                M = np.diag(M)
            object.__setattr__(self, name, M)
        for name in ("QposN", "QvelN", "QquatN", "QomegaN"):
            M = getattr(self, name)
            if M is None:
                M = 10.0 * getattr(self, name[:-1])
            object.__setattr__(self, name, np.asarray(M, float))
        for name in ("Qpos", "Qvel", "Qquat", "Qomega", "Rb",
                     "QposN", "QvelN", "QquatN", "QomegaN"):
            object.__setattr__(
                self, "_s" + name.lower(), _spd_sqrt_t(getattr(self, name), name)
            )


def _lmat(q: np.ndarray) -> np.ndarray:
    """Left-multiplication matrix: q x b == _lmat(q) @ b."""
    w, x, y, z = q
    return np.array([
        [w, -x, -y, -z],
        [x, w, -z, y],
        [y, z, w, -x],
        [z, -y, x, w],
    ])


def _ori_error_jac(r_d, r):
    """Sign-canonicalized Im(r_d* x r) and its 3x4 Jacobian in r."""
    rc = _k.quat_conj(np.asarray(r_d, float))
    e = _k.quat_mul(rc, np.asarray(r, float))
    s = 1.0 if e[0] >= 0.0 else -1.0
    return s * e[1:], s * _lmat(rc)[1:, :]


def baseline_orientation_error(r_d, r) -> np.ndarray:
    """Imaginary part of the sign-canonicalized attitude error r_d* x r.

    Its norm is sin(theta/2) for an error of angle theta: it peaks at
    theta = pi with zero derivative there, so the induced quadratic
    cost loses gradient exactly where the error is largest.
    """
    e, _ = _ori_error_jac(r_d, r)
    return e


def baseline_stage_cost(x, u, ref: ReferencePoint, w: BaselineWeights) -> float:
    """|pe|^2_Qpos + |ve|^2_Qvel + |Im(qe)|^2_Qquat + |we|^2_Qomega + |ue|^2_Rb."""
    x = np.asarray(x, float)
    xr, ur = ref.x_cl, ref.u_cl
    pe = xr[0:3] - x[0:3]
    ve = xr[3:6] - x[3:6]
    qe = baseline_orientation_error(xr[6:10], x[6:10])
    we = xr[10:13] - x[10:13]
    ue = ur - np.asarray(u, float)
    return float(
        pe @ (w.Qpos @ pe) + ve @ (w.Qvel @ ve) + qe @ (w.Qquat @ qe)
        + we @ (w.Qomega @ we) + ue @ (w.Rb @ ue)
    )


def baseline_terminal_cost(x, ref: ReferencePoint, w: BaselineWeights) -> float:
    x = np.asarray(x, float)
    xr = ref.x_cl
    pe = xr[0:3] - x[0:3]
    ve = xr[3:6] - x[3:6]
    qe = baseline_orientation_error(xr[6:10], x[6:10])
    we = xr[10:13] - x[10:13]
    return float(
        pe @ (w.QposN @ pe) + ve @ (w.QvelN @ ve) + qe @ (w.QquatN @ qe)
        + we @ (w.QomegaN @ we)
    )


class BaselineOcpModel:
    """Model adapter binding the decoupled OCP to the SQP orchestrator.

    Same duck type as the dual-quaternion model: raw (unnormalized) RK4
    shooting map, Gauss-Newton cost residuals, a unit-norm band row on
    the attitude quaternion, and box bounds on the wrench.  All four
    input channels are free; there are no pinned channels.
    """

    nx = 13
    nu = 4

    def __init__(self, params: QuadrotorParams, cfg: OcpConfig, w: BaselineWeights):
        self.params = params
        self.cfg = cfg
        self.w = w
        self.refs: list[ReferencePoint] = []
        if cfg.u_min is not None:
            self.u_min = cfg.u_min.copy()
            self.u_max = cfg.u_max.copy()
        else:
            tm = params.tau_max
            self.u_min = np.array([params.f_min, -tm, -tm, -tm])
            self.u_max = np.array([params.f_max, tm, tm, tm])
        self._drag = params.drag_c

    def set_refs(self, refs: list[ReferencePoint]):
        self.refs = refs

    def step(self, x, u):
        p = self.params
        return _k.cl_rk4(x, u, self.cfg.dt, p.m, p.j_diag, p.g, self._drag,
                         np.zeros(3), np.zeros(3), False)

    def step_jac(self, x, u):
        p = self.params
        return _k.cl_rk4_jac(x, u, self.cfg.dt, p.m, p.j_diag, p.g,
                             self._drag, False)

    def stage_residual(self, k, x, u):
        w, ref = self.w, self.refs[k]
        xr = ref.x_cl
        qe, Jq = _ori_error_jac(xr[6:10], x[6:10])
        r = np.concatenate([
            w._sqpos @ (xr[0:3] - x[0:3]),
            w._sqvel @ (xr[3:6] - x[3:6]),
            w._sqquat @ qe,
            w._sqomega @ (xr[10:13] - x[10:13]),
            w._srb @ (ref.u_cl - u),
        ])
        Jx = np.zeros((16, 13))
        Jx[0:3, 0:3] = -w._sqpos
        Jx[3:6, 3:6] = -w._sqvel
        Jx[6:9, 6:10] = w._sqquat @ Jq
        Jx[9:12, 10:13] = -w._sqomega
        Ju = np.zeros((16, 4))
        Ju[12:16, :] = -w._srb
        return r, Jx, Ju

    def terminal_residual(self, x):
        w, ref = self.w, self.refs[-1]
        xr = ref.x_cl
        qe, Jq = _ori_error_jac(xr[6:10], x[6:10])
        r = np.concatenate([
            w._sqposn @ (xr[0:3] - x[0:3]),
            w._sqveln @ (xr[3:6] - x[3:6]),
            w._sqquatn @ qe,
            w._sqomegan @ (xr[10:13] - x[10:13]),
        ])
        Jx = np.zeros((12, 13))
        Jx[0:3, 0:3] = -w._sqposn
        Jx[3:6, 3:6] = -w._sqveln
        Jx[6:9, 6:10] = w._sqquatn @ Jq
        Jx[9:12, 10:13] = -w._sqomegan
        return r, Jx

    def stage_cost_val(self, k, x, u):
        return baseline_stage_cost(x, u, self.refs[k], self.w)

    def terminal_cost_val(self, x):
        return baseline_terminal_cost(x, self.refs[-1], self.w)

    def norm_row(self, x):
        rq = x[6:10]
        n = float(np.linalg.norm(rq))
        jac = np.zeros(13)
        jac[6:10] = rq / n
        return n - 1.0, jac

    def normalize_state(self, x):
        out = np.asarray(x, float).copy()
        out[6:10] /= np.linalg.norm(out[6:10])
        return out

    def blend_to_ref(self, x0, a):
        """State a fraction ``a`` of the way to the terminal reference:
        translation/velocity/rates linear, attitude along the geodesic."""
        xr = self.refs[-1].x_cl
        out = (1.0 - a) * np.asarray(x0, float) + a * xr
        e = _k.quat_mul(_k.quat_conj(x0[6:10]), xr[6:10])
        w = _k.quat_log(_k.quat_canonical(e))
        out[6:10] = _k.quat_mul(x0[6:10], _k.quat_exp(a * w))
        return out

    def ref_state(self, k):
        return self.refs[k].x_cl.copy()

    def ref_input(self, k):
        return self.refs[k].u_cl.copy()


def baseline_solve(model: BaselineOcpModel, x0, scfg: SolverConfig, warm=None):
    """Full SQP solve of the decoupled OCP; contract of ``sqp_solve``."""
    return sqp_solve(model, x0, scfg, warm=warm)


def baseline_rti_step(model: BaselineOcpModel, x0, scfg: SolverConfig, warm=None):
    """One real-time iteration of the decoupled OCP; contract of ``rti_step``."""
    return rti_step(model, x0, scfg, warm=warm)
