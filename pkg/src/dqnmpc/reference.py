"""Analytic reference trajectories and the flatness map to pose references.

Trajectories are per-axis sinusoids ``p_i(t) = center_i + A_i sin(w_i t
+ phi_i)`` with exact derivatives; hover and circle are special cases.
The flatness map turns a flat output (p and derivatives, yaw) into the
full reference triplet: desired pose dual quaternion, desired dual
twist, and desired dual input with zero torque feedforward.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels as _k
from .dq_algebra import dq_from_pose, quat_mul
from .dynamics import QuadrotorParams

__all__ = [
    "OutOfWindow",
    "SingularReference",
    "TrajectorySpec",
    "FlatOutput",
    "ReferencePoint",
    "eval_flat",
    "flat_to_reference",
    "reference_at",
    "sample_references",
]


class OutOfWindow(ValueError):
    """Time outside the trajectory's [0, duration] window."""


class SingularReference(ValueError):
    """Flat output without a well-defined thrust direction."""


@dataclass(frozen=True)
class TrajectorySpec:
    kind: str = "hover"
    center: np.ndarray = field(default_factory=lambda: np.zeros(3))
    amplitudes: np.ndarray = field(default_factory=lambda: np.zeros(3))
    angular_freqs: np.ndarray = field(default_factory=lambda: np.zeros(3))
    phases: np.ndarray = field(default_factory=lambda: np.zeros(3))
    yaw_mode: str = "fixed"
    yaw_fixed: float = 0.0
    duration: float = 20.0

    def __post_init__(self):
        if self.kind not in ("hover", "circle", "lissajous"):
            raise ValueError(f"unknown trajectory kind {self.kind!r}")
        if self.yaw_mode not in ("fixed", "tangent"):
            raise ValueError(f"unknown yaw mode {self.yaw_mode!r}")
        for name in ("center", "amplitudes", "angular_freqs", "phases"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), float))
        if self.duration <= 0:
            raise ValueError("duration must be positive")

    @property
    def v_max(self) -> float:
        """Maximum reference speed over the window (dense sampling)."""
        ts = np.linspace(0.0, self.duration, 8192)
        w = self.angular_freqs
        v = self.amplitudes[:, None] * w[:, None] * np.cos(np.outer(w, ts) + self.phases[:, None])
        return float(np.max(np.linalg.norm(v, axis=0)))

    @classmethod
    def hover(cls, center=(0, 0, 0), yaw: float = 0.0, duration: float = 20.0) -> "TrajectorySpec":
        return cls(kind="hover", center=np.asarray(center, float), yaw_fixed=yaw, duration=duration)

    @classmethod
    def circle(
        cls, center=(0, 0, 1), radius: float = 1.0, omega: float = 1.0,
        yaw_mode: str = "fixed", yaw: float = 0.0, duration: float = 20.0,
    ) -> "TrajectorySpec":
        # x = R cos(w t), y = R sin(w t) via per-axis sine phases
        return cls(
            kind="circle",
            center=np.asarray(center, float),
            amplitudes=np.array([radius, radius, 0.0]),
            angular_freqs=np.array([omega, omega, 0.0]),
            phases=np.array([np.pi / 2.0, 0.0, 0.0]),
            yaw_mode=yaw_mode,
            yaw_fixed=yaw,
            duration=duration,
        )


@dataclass(frozen=True)
class FlatOutput:
    p: np.ndarray
    v: np.ndarray
    a: np.ndarray
    j: np.ndarray
    yaw: float
    yaw_rate: float


@dataclass(frozen=True)
class ReferencePoint:
    """Desired pose/twist/input triplet plus classical-form mirrors."""

    qd: np.ndarray
    wd: np.ndarray
    ud: np.ndarray
    x_cl: np.ndarray
    u_cl: np.ndarray


def eval_flat(spec: TrajectorySpec, t: float) -> FlatOutput:
    """Flat output (p, v, a, j, yaw, yaw_rate) at time t."""
    if t < 0.0 or t > spec.duration:
        raise OutOfWindow(f"t = {t} outside [0, {spec.duration}]")
    A, w, ph = spec.amplitudes, spec.angular_freqs, spec.phases
    arg = w * t + ph
    s, c = np.sin(arg), np.cos(arg)
    p = spec.center + A * s
    v = A * w * c
    a = -A * w**2 * s
    j = -A * w**3 * c
    if spec.yaw_mode == "fixed":
        yaw, yaw_rate = spec.yaw_fixed, 0.0
    else:
        vxy2 = v[0] * v[0] + v[1] * v[1]
        if vxy2 < 1e-12:
            yaw, yaw_rate = spec.yaw_fixed, 0.0
        else:
            yaw = float(np.arctan2(v[1], v[0]))
            yaw_rate = float((v[0] * a[1] - v[1] * a[0]) / vxy2)
    return FlatOutput(p=p, v=v, a=a, j=j, yaw=yaw, yaw_rate=yaw_rate)


def _tilt_quat(z_b: np.ndarray) -> np.ndarray:
    """Minimal rotation taking e_z onto z_b."""
    w = 1.0 + z_b[2]
    if w <= 1e-9:
        raise SingularReference("thrust direction antipodal to e_z")
    h = np.array([w, -z_b[1], z_b[0], 0.0])
    # imaginary part is e_z x z_b = (-z_b[1], z_b[0], 0)
    return h / np.linalg.norm(h)


def flat_to_reference(flat: FlatOutput, params: QuadrotorParams) -> ReferencePoint:
    """Differential-flatness map from flat output to reference triplet.

    Thrust axis from a + g e_z, attitude as tilt-then-yaw, exact body
    rates from the jerk (time derivative of the tilt construction) plus
    yaw rate.  The desired dual input carries zero torque feedforward;
    only the thrust channel is populated.
    """
    g = params.g
    T = flat.a + np.array([0.0, 0.0, g])
    Tn = float(np.linalg.norm(T))
    if Tn <= 1e-6:
        raise SingularReference("free-fall reference: ||a + g e_z|| ~ 0")
    z_b = T / Tn
    f_d = params.m * Tn

    r_tilt = _tilt_quat(z_b)
    half = 0.5 * flat.yaw
    r_yaw = np.array([np.cos(half), 0.0, 0.0, np.sin(half)])
    r_d = quat_mul(r_tilt, r_yaw)

    # exact rates: zdot projects the jerk off the thrust axis, then the
    # tilt quaternion's derivative follows from its closed form
    zdot = (flat.j - z_b * float(z_b @ flat.j)) / Tn
    h = np.array([1.0 + z_b[2], -z_b[1], z_b[0], 0.0])
    hn = float(np.linalg.norm(h))
    hdot = np.array([zdot[2], -zdot[1], zdot[0], 0.0])
    rtilt_dot = (hdot - r_tilt * float(r_tilt @ hdot)) / hn
    ryaw_dot = 0.5 * flat.yaw_rate * np.array([-np.sin(half), 0.0, 0.0, np.cos(half)])
    rd_dot = quat_mul(rtilt_dot, r_yaw) + quat_mul(r_tilt, ryaw_dot)
    om_d = 2.0 * quat_mul(_k.quat_conj(r_d), rd_dot)[1:]

    v_b = _k.quat_rotate_wb(r_d, flat.v)
    qd = dq_from_pose(flat.p, r_d)
    wd = np.concatenate([om_d, v_b])
    ud = np.array([0.0, 0.0, 0.0, 0.0, 0.0, f_d / params.m])
    x_cl = np.concatenate([flat.p, flat.v, r_d, om_d])
    u_cl = np.array([f_d, 0.0, 0.0, 0.0])
    return ReferencePoint(qd=qd, wd=wd, ud=ud, x_cl=x_cl, u_cl=u_cl)


def reference_at(spec: TrajectorySpec, t: float, params: QuadrotorParams) -> ReferencePoint:
    return flat_to_reference(eval_flat(spec, t), params)


def sample_references(
    spec: TrajectorySpec, t0: float, dt: float, n: int, params: QuadrotorParams
) -> list[ReferencePoint]:
    """References at t0 + i dt for i in 0..n-1, clamped to the window.

    Horizon sampling near the end of a trajectory holds the final
    point, which turns any finite trajectory into hover-at-the-end.
    """
    out = []
    for i in range(n):
        t = min(max(t0 + i * dt, 0.0), spec.duration)
        out.append(reference_at(spec, t, params))
    return out
