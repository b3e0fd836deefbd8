"""Quadrotor rigid-body dynamics.

Two equivalent forms of the same vehicle:

- classical decoupled form on ``[p, v, r, omega]`` (world position and
  velocity, body->world attitude quaternion, body rates)
- unified dual-quaternion form on ``[dq, omega, v_body]`` where the
  pose dual quaternion and the dual twist evolve jointly

plus RK4 stepping with manifold reprojection and a disturbance-capable
plant integrator for robustness studies.  Flat-vector layouts:

- classical: 13 floats ``[p(3), v(3), r(4), omega(3)]``
- dual form: 14 floats ``[dq(8), omega(3), v_body(3)]``
- wrench input: 4 floats ``[f, tau(3)]``
- dual input: 6 floats ``[Jinv tau (3), (f/m) e_z (3)]``
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels as _k
from .dq_algebra import dq_from_pose, dq_normalize, dq_to_pose, dq_unit_defects

__all__ = [
    "QuadrotorParams",
    "WrenchInput",
    "ClassicalState",
    "DqState",
    "DisturbanceConfig",
    "classical_derivative",
    "dq_derivative",
    "dual_input_from_wrench",
    "wrench_from_dual_input",
    "rk4_step",
    "classical_step",
    "dq_step",
    "convert_state",
    "convert_state_inverse",
    "cl_to_dq_vec",
    "dq_to_cl_vec",
    "plant_step",
]


@dataclass(frozen=True)
class QuadrotorParams:
    """Physical parameters; defaults model a 1 kg research quadrotor."""

    m: float = 1.0
    j_diag: np.ndarray = field(default_factory=lambda: np.array([0.01, 0.01, 0.02]))
    g: float = 9.81
    drag_c: float = 0.0
    f_min: float = 0.0
    f_max: float | None = None
    tau_max: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "j_diag", np.asarray(self.j_diag, float))
        if self.m <= 0:
            raise ValueError("mass must be positive")
        if np.any(self.j_diag <= 0):
            raise ValueError("inertia diagonal must be positive")
        if self.f_max is None:
            object.__setattr__(self, "f_max", 4.0 * self.m * self.g)

    @property
    def J(self) -> np.ndarray:
        return np.diag(self.j_diag)

    @property
    def e_z(self) -> np.ndarray:
        return np.array([0.0, 0.0, 1.0])

    @property
    def u_min(self) -> np.ndarray:
        return np.array([self.f_min, -self.tau_max, -self.tau_max, -self.tau_max])

    @property
    def u_max(self) -> np.ndarray:
        return np.array([self.f_max, self.tau_max, self.tau_max, self.tau_max])

    def hover_wrench(self) -> np.ndarray:
        return np.array([self.m * self.g, 0.0, 0.0, 0.0])


@dataclass(frozen=True)
class WrenchInput:
    f: float
    tau: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "tau", np.asarray(self.tau, float))
        if self.f < 0:
            raise ValueError("thrust must be non-negative")

    @classmethod
    def from_array(cls, u) -> "WrenchInput":
        u = np.asarray(u, float)
        return cls(float(u[0]), u[1:4])

    def as_array(self) -> np.ndarray:
        return np.concatenate([[self.f], self.tau])


@dataclass(frozen=True)
class ClassicalState:
    p: np.ndarray
    v: np.ndarray
    r: np.ndarray
    w: np.ndarray

    def __post_init__(self):
        for name in ("p", "v", "r", "w"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), float))
        if abs(np.linalg.norm(self.r) - 1.0) > 1e-9:
            raise ValueError("attitude quaternion must be unit within 1e-9")

    @classmethod
    def from_vector(cls, x) -> "ClassicalState":
        x = np.asarray(x, float)
        return cls(x[:3], x[3:6], x[6:10], x[10:13])

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.p, self.v, self.r, self.w])

    @classmethod
    def hover(cls, p=(0.0, 0.0, 0.0)) -> "ClassicalState":
        return cls(np.asarray(p, float), np.zeros(3), np.array([1.0, 0, 0, 0]), np.zeros(3))


@dataclass(frozen=True)
class DqState:
    """Unified state: pose dual quaternion and dual twist (om, v_body)."""

    q: np.ndarray
    om: np.ndarray
    vb: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "q", np.asarray(self.q, float))
        object.__setattr__(self, "om", np.asarray(self.om, float))
        object.__setattr__(self, "vb", np.asarray(self.vb, float))
        nd, od = dq_unit_defects(self.q)
        if nd > 1e-6 or od > 1e-6:
            raise ValueError("pose dual quaternion violates unit invariants")

    @classmethod
    def from_vector(cls, x) -> "DqState":
        x = np.asarray(x, float)
        return cls(x[:8], x[8:11], x[11:14])

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.q, self.om, self.vb])


@dataclass(frozen=True)
class DisturbanceConfig:
    """Plant-side mismatches; the identity config leaves the model exact."""

    drag_scale: float = 1.0
    mass_scale: float = 1.0
    inertia_scale: float = 1.0
    ext_force: np.ndarray = field(default_factory=lambda: np.zeros(3))
    ext_moment: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        object.__setattr__(self, "ext_force", np.asarray(self.ext_force, float))
        object.__setattr__(self, "ext_moment", np.asarray(self.ext_moment, float))
        if min(self.drag_scale, self.mass_scale, self.inertia_scale) <= 0:
            raise ValueError("disturbance scales must be positive")


_Z3 = np.zeros(3)


def _vec(x) -> np.ndarray:
    return x.as_vector() if hasattr(x, "as_vector") else np.asarray(x, float)


def _uvec(u) -> np.ndarray:
    return u.as_array() if hasattr(u, "as_array") else np.asarray(u, float)


def classical_derivative(x, u, params: QuadrotorParams) -> np.ndarray:
    """Time derivative of the 13-vector classical state."""
    return _k.cl_deriv(
        _vec(x), _uvec(u), params.m, params.j_diag, params.g, params.drag_c, _Z3, _Z3
    )


def dq_derivative(x, u_hat, params: QuadrotorParams) -> np.ndarray:
    """Time derivative of the 14-vector dual-form state.

    The pose obeys 0.5 * q (x) twist; the twist derivative is the dual
    acceleration (gyroscopic term, gravity seen in body frame, drag)
    plus the dual input.
    """
    return _k.dq_deriv(
        _vec(x), _uvec(u_hat), params.j_diag, params.g, params.drag_c / params.m
    )


def dual_input_from_wrench(u, params: QuadrotorParams) -> np.ndarray:
    """Map (f, tau) to the dual input [Jinv tau, (f/m) e_z]."""
    u = _uvec(u)
    out = np.zeros(6)
    out[:3] = u[1:4] / params.j_diag
    out[5] = u[0] / params.m
    return out


def wrench_from_dual_input(u_hat, params: QuadrotorParams) -> np.ndarray:
    """Inverse of dual_input_from_wrench; x/y dual channels are dropped
    (structurally zero for a thrust-along-z vehicle)."""
    u_hat = _uvec(u_hat)
    out = np.empty(4)
    out[0] = u_hat[5] * params.m
    out[1:4] = u_hat[:3] * params.j_diag
    return out


def rk4_step(deriv, x, u, dt: float):
    """Generic RK4 step x_{k+1} = x_k + dt/6 (k1 + 2k2 + 2k3 + k4).

    ``deriv(x, u)`` supplies the vector field.  Results in the two
    quadrotor state layouts are reprojected onto their manifolds (dual
    quaternion for 14 components, attitude quaternion for 13); other
    state sizes pass through unchanged.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    x = np.asarray(x, float)
    k1 = np.asarray(deriv(x, u), float)
    k2 = np.asarray(deriv(x + 0.5 * dt * k1, u), float)
    k3 = np.asarray(deriv(x + 0.5 * dt * k2, u), float)
    k4 = np.asarray(deriv(x + dt * k3, u), float)
    xn = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if xn.shape == (14,):
        xn[:8] = dq_normalize(xn[:8])
    elif xn.shape == (13,):
        xn[6:10] /= np.linalg.norm(xn[6:10])
    return xn


def classical_step(x, u, dt: float, params: QuadrotorParams) -> np.ndarray:
    """RK4 step of the classical form (compiled kernel path)."""
    return _k.cl_rk4(
        _vec(x), _uvec(u), dt, params.m, params.j_diag, params.g, params.drag_c, _Z3, _Z3
    )


def dq_step(x, u_hat, dt: float, params: QuadrotorParams) -> np.ndarray:
    """RK4 step of the dual form (compiled kernel path)."""
    return _k.dq_rk4(
        _vec(x), _uvec(u_hat), dt, params.j_diag, params.g, params.drag_c / params.m
    )


def cl_to_dq_vec(x) -> np.ndarray:
    """Flat classical 13-vector -> flat dual-form 14-vector."""
    x = _vec(x)
    out = np.empty(14)
    out[:8] = dq_from_pose(x[:3], x[6:10])
    out[8:11] = x[10:13]
    out[11:14] = _k.quat_rotate_wb(x[6:10], x[3:6])
    return out


def dq_to_cl_vec(x) -> np.ndarray:
    """Flat dual-form 14-vector -> flat classical 13-vector."""
    x = _vec(x)
    p, r = dq_to_pose(x[:8])
    out = np.empty(13)
    out[:3] = p
    out[3:6] = _k.quat_rotate_bw(r, x[11:14])
    out[6:10] = r
    out[10:13] = x[8:11]
    return out


def convert_state(x: ClassicalState) -> DqState:
    return DqState.from_vector(cl_to_dq_vec(x.as_vector()))


def convert_state_inverse(x: DqState) -> ClassicalState:
    return ClassicalState.from_vector(dq_to_cl_vec(x.as_vector()))


def plant_step(
    x,
    u,
    truth: QuadrotorParams,
    dist: DisturbanceConfig,
    dt: float,
    max_substep: float = 1e-3,
) -> np.ndarray:
    """Advance the true plant one control period.

    Applies the disturbance config on top of the true parameters
    (scaled mass/inertia/drag, constant external force in the world
    frame and moment in the body frame) and integrates with RK4
    substeps no longer than ``max_substep``.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    return _k.cl_rollout(
        _vec(x),
        _uvec(u),
        dt,
        max_substep,
        truth.m * dist.mass_scale,
        truth.j_diag * dist.inertia_scale,
        truth.g,
        truth.drag_c * dist.drag_scale,
        dist.ext_force,
        dist.ext_moment,
    )
