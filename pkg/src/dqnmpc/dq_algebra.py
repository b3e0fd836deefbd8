"""Quaternion, dual-number, and dual-quaternion algebra.

Conventions used across the package:

- quaternions are length-4 float arrays ``[w, x, y, z]`` (scalar first,
  Hamilton products, unit quaternions act on vectors as body->world
  rotations via ``r (x) v (x) r*``)
- dual quaternions are length-8 arrays ``[primary(4), dual(4)]``; a
  rigid pose with translation ``p`` and rotation ``r`` is encoded as
  ``r + 0.5 eps (p (x) r)``
- the log of a unit dual quaternion is the screw tangent ``(phi, t)``
  where ``phi`` is the full rotation vector (angle in [0, pi]) and ``t``
  the recovered translation; the log-map *value* used in error costs is
  half of both components

All functions accept plain array-likes and return fresh ndarrays.  The
wrapper classes below carry the same data with invariant checks for use
at API boundaries; hot paths stay on raw arrays.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels as _k

__all__ = [
    "DegenerateDualQuaternion",
    "Quaternion",
    "PureQuaternion",
    "UnitQuaternion",
    "DualQuaternion",
    "UnitDualQuaternion",
    "DualVector",
    "ScrewTangent",
    "quat_mul",
    "quat_conj_norm",
    "quat_canonical",
    "quat_log",
    "quat_exp",
    "rotate_vector",
    "rotate_vector_inv",
    "quat_to_matrix",
    "dq_mul",
    "dq_conj",
    "dq_canonical",
    "dq_identity",
    "dq_from_pose",
    "dq_to_pose",
    "dq_log",
    "dq_exp",
    "dq_normalize",
    "dq_unit_defects",
]


class DegenerateDualQuaternion(ValueError):
    """Raised when normalization meets a (near-)zero primary part."""


# ---------------------------------------------------------------------------
# quaternion operations


def quat_mul(a, b) -> np.ndarray:
    """Hamilton product a (x) b."""
    return _k.quat_mul(np.asarray(a, float), np.asarray(b, float))


def quat_conj_norm(q) -> tuple[np.ndarray, float]:
    """Conjugate and Euclidean norm of q."""
    q = np.asarray(q, float)
    return _k.quat_conj(q), float(np.linalg.norm(q))


def quat_canonical(q) -> np.ndarray:
    """Sign-canonical representative: scalar part >= 0, ties broken by
    the lexicographically largest imaginary part."""
    return _k.quat_canonical(np.asarray(q, float))


def quat_log(r) -> np.ndarray:
    """Half-angle rotation vector (theta/2)*axis of a unit quaternion.

    Canonicalizes the sign first, so the result norm is in [0, pi/2]
    and log(r) == log(-r).
    """
    return _k.quat_log(np.asarray(r, float))


def quat_exp(v) -> np.ndarray:
    """Unit quaternion exp of the pure quaternion (0, v); inverts quat_log."""
    return _k.quat_exp(np.asarray(v, float))


def rotate_vector(r, v) -> np.ndarray:
    """Adjoint action r* (x) v (x) r (world -> body for attitude r)."""
    return _k.quat_rotate_wb(np.asarray(r, float), np.asarray(v, float))


def rotate_vector_inv(r, v) -> np.ndarray:
    """Inverse adjoint r (x) v (x) r* (body -> world)."""
    return _k.quat_rotate_bw(np.asarray(r, float), np.asarray(v, float))


def quat_to_matrix(r) -> np.ndarray:
    """3x3 rotation matrix acting like rotate_vector_inv(r, .)."""
    w, x, y, z = np.asarray(r, float)
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


# ---------------------------------------------------------------------------
# dual-quaternion operations


def dq_mul(a, b) -> np.ndarray:
    """Dual-quaternion product (eps^2 = 0)."""
    return _k.dq_mul(np.asarray(a, float), np.asarray(b, float))


def dq_conj(q) -> np.ndarray:
    """Quaternion conjugate of both parts."""
    return _k.dq_conj(np.asarray(q, float))


def dq_canonical(q) -> np.ndarray:
    """Sign-canonical representative (primary scalar part >= 0)."""
    return _k.dq_canonical(np.asarray(q, float))


def dq_identity() -> np.ndarray:
    out = np.zeros(8)
    out[0] = 1.0
    return out


def dq_from_pose(p, r) -> np.ndarray:
    """Unit dual quaternion r + 0.5 eps (p (x) r) for translation p."""
    return _k.dq_from_pose(np.asarray(p, float), np.asarray(r, float))


def dq_to_pose(q) -> tuple[np.ndarray, np.ndarray]:
    """Recover (p, r): p = 2 D (x) P*, r = P."""
    q = np.asarray(q, float)
    return _k.dq_translation(q), q[:4].copy()


def dq_log(q) -> "ScrewTangent":
    """Screw tangent (phi, t) of a unit dual quaternion.

    The primary part of the actual log map is phi/2 and the dual part
    t/2; callers weighting log-map errors use halves of these fields.
    """
    s = _k.dq_log(np.asarray(q, float))
    return ScrewTangent(phi=s[:3], t=s[3:])


def dq_exp(s) -> np.ndarray:
    """Unit dual quaternion with screw tangent s; inverts dq_log."""
    if isinstance(s, ScrewTangent):
        s = s.as_array()
    return _k.dq_exp(np.asarray(s, float))


def dq_normalize(q) -> np.ndarray:
    """Reproject onto the unit dual-quaternion set.

    Primary part scaled to unit norm, dual part stripped of its
    component along the primary part.  Idempotent.
    """
    try:
        return _k.dq_normalize(np.asarray(q, float))
    except ValueError as exc:
        raise DegenerateDualQuaternion(str(exc)) from None


def dq_unit_defects(q) -> tuple[float, float]:
    """(|norm(P) - 1|, |<P, D>|): both vanish on unit dual quaternions."""
    q = np.asarray(q, float)
    return abs(float(np.linalg.norm(q[:4])) - 1.0), abs(float(q[:4] @ q[4:]))


# ---------------------------------------------------------------------------
# wrapper types for API boundaries


@dataclass(frozen=True)
class Quaternion:
    w: float
    x: float
    y: float
    z: float

    @classmethod
    def from_array(cls, q) -> "Quaternion":
        q = np.asarray(q, float)
        return cls(float(q[0]), float(q[1]), float(q[2]), float(q[3]))

    def as_array(self) -> np.ndarray:
        return np.array([self.w, self.x, self.y, self.z])

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.as_array()))


@dataclass(frozen=True)
class PureQuaternion:
    x: float
    y: float
    z: float

    @classmethod
    def from_vector(cls, v) -> "PureQuaternion":
        v = np.asarray(v, float)
        return cls(float(v[0]), float(v[1]), float(v[2]))

    def as_vector(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])

    def as_array(self) -> np.ndarray:
        return np.array([0.0, self.x, self.y, self.z])


@dataclass(frozen=True)
class UnitQuaternion:
    q: Quaternion

    def __post_init__(self):
        if abs(self.q.norm - 1.0) > 1e-9:
            raise ValueError(f"quaternion norm {self.q.norm} is not 1 within 1e-9")

    @classmethod
    def from_array(cls, q) -> "UnitQuaternion":
        return cls(Quaternion.from_array(q))

    def as_array(self) -> np.ndarray:
        return self.q.as_array()

    def renormalized(self) -> "UnitQuaternion":
        a = self.q.as_array()
        return UnitQuaternion.from_array(a / np.linalg.norm(a))


@dataclass(frozen=True)
class DualQuaternion:
    p: Quaternion
    d: Quaternion

    @classmethod
    def from_array(cls, q) -> "DualQuaternion":
        q = np.asarray(q, float)
        return cls(Quaternion.from_array(q[:4]), Quaternion.from_array(q[4:]))

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.p.as_array(), self.d.as_array()])


@dataclass(frozen=True)
class UnitDualQuaternion:
    q: DualQuaternion

    def __post_init__(self):
        nd, od = dq_unit_defects(self.q.as_array())
        if nd > 1e-9 or od > 1e-9:
            raise ValueError(
                f"unit dual-quaternion invariants violated (norm defect {nd}, orthogonality defect {od})"
            )

    @classmethod
    def from_array(cls, q) -> "UnitDualQuaternion":
        return cls(DualQuaternion.from_array(q))

    def as_array(self) -> np.ndarray:
        return self.q.as_array()


@dataclass(frozen=True)
class DualVector:
    """Pure dual quaternion: 3-vector primary and dual parts."""

    prim: PureQuaternion
    dual: PureQuaternion

    @classmethod
    def from_array(cls, v) -> "DualVector":
        v = np.asarray(v, float)
        return cls(PureQuaternion.from_vector(v[:3]), PureQuaternion.from_vector(v[3:]))

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.prim.as_vector(), self.dual.as_vector()])


@dataclass(frozen=True)
class ScrewTangent:
    """Pose increment: full rotation vector phi and translation t."""

    phi: np.ndarray
    t: np.ndarray

    def as_array(self) -> np.ndarray:
        return np.concatenate([np.asarray(self.phi, float), np.asarray(self.t, float)])
