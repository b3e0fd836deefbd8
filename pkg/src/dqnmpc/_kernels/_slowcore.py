"""Pure-numpy kernel backend.

Reference implementation of the numeric hot loops.  A compiled Cython
twin (`_fastcore`) implements the same signatures; `dqnmpc._kernels`
picks one at import time.  Everything here is float64 ndarrays:

- quaternion: shape (4,), scalar first [w, x, y, z], Hamilton convention
- dual quaternion: shape (8,), [real(4), dual(4)]
- screw tangent: shape (6,), [phi(3), t(3)] (full rotation vector and
  translation; the log-map *value* is half of these)
- dual-form state: shape (14,), [dq(8), omega_body(3), v_body(3)]
- classical state: shape (13,), [p(3), v_world(3), r(4), omega_body(3)]
- dual-form input: shape (6,), [Jinv*tau(3), (f/m)*e_z(3)]
- classical input: shape (4,), [f, tau(3)]
"""

from __future__ import annotations

import numpy as np

BACKEND = "python"

_EPS_ANGLE = 1e-7


# ---------------------------------------------------------------------------
# quaternion primitives


def quat_mul(a, b):
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ]
    )


def quat_conj(q):
    return np.array([q[0], -q[1], -q[2], -q[3]])


def quat_canonical(q):
    """Flip sign so the scalar part is >= 0.

    A zero scalar part resolves to the representative whose imaginary
    part is lexicographically largest, so both covers of a pi rotation
    map to the same quaternion.
    """
    w = q[0]
    if w > 0.0:
        return np.asarray(q, dtype=float).copy()
    if w < 0.0:
        return -np.asarray(q, dtype=float)
    for k in (1, 2, 3):
        if q[k] > 0.0:
            return np.asarray(q, dtype=float).copy()
        if q[k] < 0.0:
            return -np.asarray(q, dtype=float)
    return np.asarray(q, dtype=float).copy()


def quat_rotate_wb(r, v):
    """r* (x) v (x) r for a 3-vector v (world -> body for an attitude r)."""
    return quat_mul(quat_mul(quat_conj(r), np.array([0.0, v[0], v[1], v[2]])), r)[1:]


def quat_rotate_bw(r, v):
    """r (x) v (x) r* (body -> world)."""
    return quat_mul(quat_mul(r, np.array([0.0, v[0], v[1], v[2]])), quat_conj(r))[1:]


def quat_exp(u):
    """Exponential of the pure quaternion (0, u); inverse of quat_log."""
    s = np.linalg.norm(u)
    if s < _EPS_ANGLE:
        c = 1.0 - s * s / 6.0
        return np.array([1.0 - s * s / 2.0, c * u[0], c * u[1], c * u[2]])
    c = np.sin(s) / s
    return np.array([np.cos(s), c * u[0], c * u[1], c * u[2]])


def quat_log(r):
    """Rotation-vector half-angle log: returns (theta/2)*axis, theta in [0, pi].

    Canonicalizes the input sign first, so log(r) == log(-r).
    """
    r = quat_canonical(r)
    w = r[0]
    v = r[1:]
    s = np.linalg.norm(v)
    if s < _EPS_ANGLE:
        # atan2(s, w)/s ~ (1/w)(1 - s^2/(3 w^2)) for w near 1
        k = (1.0 - s * s / (3.0 * w * w)) / w
        return k * v
    return (np.arctan2(s, w) / s) * v


def _quat_log_jac(r):
    """4x3-transposed Jacobian d quat_log / d r (3x4) of the raw formula.

    The formula is evaluated after canonicalization; the caller accounts
    for the sign flip.  Valid for near-unit quaternions.
    """
    w = r[0]
    v = r[1:]
    s2 = float(v @ v)
    s = np.sqrt(s2)
    n2 = s2 + w * w
    J = np.empty((3, 4))
    if s < 1e-4:
        # series about s = 0 (w ~ 1): a/s = 1/w - s^2/(3w^3),
        # coefficient of v v^T: -2/(3w^3) + (4/5) s^2 / w^5
        k = 1.0 / w - s2 / (3.0 * w**3)
        kv = -2.0 / (3.0 * w**3) + 0.8 * s2 / w**5
    else:
        a = np.arctan2(s, w)
        k = a / s
        kv = w / (n2 * s2) - a / (s2 * s)
    J[:, 0] = -v / n2
    J[:, 1:] = k * np.eye(3) + kv * np.outer(v, v)
    return J


def _l4(q):
    w, x, y, z = q
    return np.array(
        [
            [w, -x, -y, -z],
            [x, w, -z, y],
            [y, z, w, -x],
            [z, -y, x, w],
        ]
    )


def _r4(q):
    w, x, y, z = q
    return np.array(
        [
            [w, -x, -y, -z],
            [x, w, z, -y],
            [y, -z, w, x],
            [z, y, -x, w],
        ]
    )


_CONJ = np.diag([1.0, -1.0, -1.0, -1.0])


# ---------------------------------------------------------------------------
# dual-quaternion primitives


def dq_mul(a, b):
    out = np.empty(8)
    out[:4] = quat_mul(a[:4], b[:4])
    out[4:] = quat_mul(a[:4], b[4:]) + quat_mul(a[4:], b[:4])
    return out


def dq_conj(q):
    return np.array([q[0], -q[1], -q[2], -q[3], q[4], -q[5], -q[6], -q[7]])


def dq_canonical(q):
    w = q[0]
    if w > 0.0:
        return np.asarray(q, dtype=float).copy()
    if w < 0.0:
        return -np.asarray(q, dtype=float)
    for k in (1, 2, 3):
        if q[k] > 0.0:
            return np.asarray(q, dtype=float).copy()
        if q[k] < 0.0:
            return -np.asarray(q, dtype=float)
    return np.asarray(q, dtype=float).copy()


def dq_from_pose(p, r):
    out = np.empty(8)
    out[:4] = r
    out[4:] = 0.5 * quat_mul(np.array([0.0, p[0], p[1], p[2]]), r)
    return out


def dq_translation(q):
    """Translation recovered as 2 * dual (x) conj(real)."""
    return 2.0 * quat_mul(q[4:], quat_conj(q[:4]))[1:]


def dq_normalize(q):
    """Project onto the unit dual-quaternion set.

    Scales the real part to unit norm and removes the dual component
    along the real part.  Raises ValueError when the real part norm is
    at or below 1e-12 (no meaningful direction to normalize onto).
    """
    p = q[:4]
    d = q[4:]
    n2 = float(p @ p)
    n = np.sqrt(n2)
    if n <= 1e-12:
        raise ValueError("dual quaternion real part has (near-)zero norm")
    out = np.empty(8)
    out[:4] = p / n
    out[4:] = d / n - (float(d @ p) / (n2 * n)) * p
    return out


def dq_normalize_jac(q):
    """8x8 Jacobian of dq_normalize at q."""
    p = q[:4]
    d = q[4:]
    n2 = float(p @ p)
    n = np.sqrt(n2)
    n3 = n2 * n
    dp = float(d @ p)
    J = np.zeros((8, 8))
    jp = np.eye(4) / n - np.outer(p, p) / n3
    J[:4, :4] = jp
    J[4:, 4:] = jp
    J[4:, :4] = (
        -(np.outer(d, p) + np.outer(p, d) + dp * np.eye(4)) / n3
        + (3.0 * dp / (n3 * n2)) * np.outer(p, p)
    )
    return J


def dq_log(q):
    """Screw tangent (phi, t) with q = exp of half of it; q must be unit."""
    qc = dq_canonical(q)
    out = np.empty(6)
    out[:3] = 2.0 * quat_log(qc[:4])
    out[3:] = dq_translation(qc)
    return out


def dq_exp(s):
    return dq_from_pose(s[3:], quat_exp(0.5 * s[:3]))


def dq_error_ln_jac(qd, q):
    """Ln value of the left-invariant error conj(qd) (x) q, with Jacobian.

    Returns (e, J): e is the 6-vector (phi/2, t/2) of the error pose and
    J = de/dq (6x8) at the given q.  qd is treated as constant.
    """
    a = dq_conj(qd)
    u = dq_mul(a, q)
    sign = 1.0
    uc = u
    w = u[0]
    if w < 0.0 or (
        w == 0.0 and (u[1] < 0.0 or (u[1] == 0.0 and (u[2] < 0.0 or (u[2] == 0.0 and u[3] < 0.0))))
    ):
        sign = -1.0
        uc = -u
    p = uc[:4]
    d = uc[4:]
    e = np.empty(6)
    e[:3] = quat_log(p)
    hd = quat_mul(d, quat_conj(p))
    e[3:] = hd[1:]

    Jh = np.zeros((6, 8))
    Jh[:3, :4] = _quat_log_jac(p)
    Jh[3:, :4] = (_l4(d) @ _CONJ)[1:, :]
    Jh[3:, 4:] = _r4(quat_conj(p))[1:, :]

    L = np.zeros((8, 8))
    lp = _l4(a[:4])
    L[:4, :4] = lp
    L[4:, 4:] = lp
    L[4:, :4] = _l4(a[4:])
    return e, sign * (Jh @ L)


# ---------------------------------------------------------------------------
# rigid-body vector fields

_EZ = np.array([0.0, 0.0, 1.0])


def _dq_deriv(x, u, jd, grav, drag_vb):
    qp = x[:4]
    qd = x[4:8]
    om = x[8:11]
    vb = x[11:14]
    omq = np.array([0.0, om[0], om[1], om[2]])
    vbq = np.array([0.0, vb[0], vb[1], vb[2]])
    dx = np.empty(14)
    dx[:4] = 0.5 * quat_mul(qp, omq)
    dx[4:8] = 0.5 * (quat_mul(qp, vbq) + quat_mul(qd, omq))
    dx[8:11] = -(np.cross(om, jd * om)) / jd + u[:3]
    gb = quat_rotate_wb(qp, grav * _EZ)
    dx[11:14] = np.cross(vb, om) - gb - drag_vb * vb + u[3:]
    return dx


def dq_deriv(x, u, jd, grav, drag_vb):
    return _dq_deriv(np.asarray(x, float), np.asarray(u, float), np.asarray(jd, float), grav, drag_vb)


def _skew(v):
    return np.array(
        [
            [0.0, -v[2], v[1]],
            [v[2], 0.0, -v[0]],
            [-v[1], v[0], 0.0],
        ]
    )


def _dq_deriv_jac(x, u, jd, grav, drag_vb):
    qp = x[:4]
    qd = x[4:8]
    om = x[8:11]
    vb = x[11:14]
    omq = np.array([0.0, om[0], om[1], om[2]])
    vbq = np.array([0.0, vb[0], vb[1], vb[2]])

    fx = np.zeros((14, 14))
    fu = np.zeros((14, 6))

    r4om = _r4(omq)
    fx[:4, :4] = 0.5 * r4om
    fx[:4, 8:11] = 0.5 * _l4(qp)[:, 1:]

    fx[4:8, :4] = 0.5 * _r4(vbq)
    fx[4:8, 4:8] = 0.5 * r4om
    fx[4:8, 8:11] = 0.5 * _l4(qd)[:, 1:]
    fx[4:8, 11:14] = 0.5 * _l4(qp)[:, 1:]

    J = np.diag(jd)
    fx[8:11, 8:11] = -np.diag(1.0 / jd) @ (_skew(om) @ J - _skew(jd * om))
    fu[8:11, :3] = np.eye(3)

    gq = np.array([0.0, 0.0, 0.0, grav])
    dgb = _r4(quat_mul(gq, qp)) @ _CONJ + _l4(quat_mul(quat_conj(qp), gq))
    fx[11:14, :4] = -dgb[1:, :]
    fx[11:14, 8:11] = _skew(vb)
    fx[11:14, 11:14] = -_skew(om) - drag_vb * np.eye(3)
    fu[11:14, 3:] = np.eye(3)
    return fx, fu


def dq_rk4(x, u, dt, jd, grav, drag_vb, normalize=True):
    """One RK4 step of the dual-form dynamics.

    ``normalize`` reprojects the pose onto the unit manifold; the OCP
    uses the raw map (the norm is handled by its constraint band).
    """
    x = np.asarray(x, float)
    k1 = _dq_deriv(x, u, jd, grav, drag_vb)
    k2 = _dq_deriv(x + 0.5 * dt * k1, u, jd, grav, drag_vb)
    k3 = _dq_deriv(x + 0.5 * dt * k2, u, jd, grav, drag_vb)
    k4 = _dq_deriv(x + dt * k3, u, jd, grav, drag_vb)
    xn = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not normalize:
        return xn
    out = xn.copy()
    out[:8] = dq_normalize(xn[:8])
    return out


def dq_rk4_jac(x, u, dt, jd, grav, drag_vb, normalize=True):
    """RK4 step with analytic sensitivities (xn, A=dxn/dx, B=dxn/du)."""
    x = np.asarray(x, float)
    u = np.asarray(u, float)
    I = np.eye(14)

    k1 = _dq_deriv(x, u, jd, grav, drag_vb)
    f1x, f1u = _dq_deriv_jac(x, u, jd, grav, drag_vb)
    x2 = x + 0.5 * dt * k1
    k2 = _dq_deriv(x2, u, jd, grav, drag_vb)
    f2x, f2u = _dq_deriv_jac(x2, u, jd, grav, drag_vb)
    K2x = f2x @ (I + 0.5 * dt * f1x)
    K2u = f2x @ (0.5 * dt * f1u) + f2u
    x3 = x + 0.5 * dt * k2
    k3 = _dq_deriv(x3, u, jd, grav, drag_vb)
    f3x, f3u = _dq_deriv_jac(x3, u, jd, grav, drag_vb)
    K3x = f3x @ (I + 0.5 * dt * K2x)
    K3u = f3x @ (0.5 * dt * K2u) + f3u
    x4 = x + dt * k3
    k4 = _dq_deriv(x4, u, jd, grav, drag_vb)
    f4x, f4u = _dq_deriv_jac(x4, u, jd, grav, drag_vb)
    K4x = f4x @ (I + dt * K3x)
    K4u = f4x @ (dt * K3u) + f4u

    xn = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    A = I + (dt / 6.0) * (f1x + 2.0 * K2x + 2.0 * K3x + K4x)
    B = (dt / 6.0) * (f1u + 2.0 * K2u + 2.0 * K3u + K4u)

    if not normalize:
        return xn, A, B
    out = xn.copy()
    out[:8] = dq_normalize(xn[:8])
    JN = np.eye(14)
    JN[:8, :8] = dq_normalize_jac(xn[:8])
    return out, JN @ A, JN @ B


def _cl_deriv(x, u, m, jd, grav, drag_c, fext, mext):
    v = x[3:6]
    r = x[6:10]
    om = x[10:13]
    dx = np.empty(13)
    dx[:3] = v
    thrust_dir = quat_rotate_bw(r, _EZ)
    dx[3:6] = (u[0] / m) * thrust_dir - grav * _EZ - (drag_c / m) * v + fext / m
    dx[6:10] = 0.5 * quat_mul(r, np.array([0.0, om[0], om[1], om[2]]))
    dx[10:13] = (u[1:] - np.cross(om, jd * om) + mext) / jd
    return dx


def cl_deriv(x, u, m, jd, grav, drag_c, fext, mext):
    return _cl_deriv(
        np.asarray(x, float),
        np.asarray(u, float),
        m,
        np.asarray(jd, float),
        grav,
        drag_c,
        np.asarray(fext, float),
        np.asarray(mext, float),
    )


def _cl_deriv_jac(x, u, m, jd, grav, drag_c):
    r = x[6:10]
    om = x[10:13]
    omq = np.array([0.0, om[0], om[1], om[2]])
    fx = np.zeros((13, 13))
    fu = np.zeros((13, 4))
    fx[:3, 3:6] = np.eye(3)

    ez_q = np.array([0.0, 0.0, 0.0, 1.0])
    dtd = _r4(quat_mul(ez_q, quat_conj(r))) + _l4(quat_mul(r, ez_q)) @ _CONJ
    fx[3:6, 6:10] = (u[0] / m) * dtd[1:, :]
    fx[3:6, 3:6] = -(drag_c / m) * np.eye(3)
    fu[3:6, 0] = quat_rotate_bw(r, _EZ) / m

    fx[6:10, 6:10] = 0.5 * _r4(omq)
    fx[6:10, 10:13] = 0.5 * _l4(r)[:, 1:]

    J = np.diag(jd)
    fx[10:13, 10:13] = -np.diag(1.0 / jd) @ (_skew(om) @ J - _skew(jd * om))
    fu[10:13, 1:] = np.diag(1.0 / jd)
    return fx, fu


_ZERO3 = np.zeros(3)


def cl_rk4(x, u, dt, m, jd, grav, drag_c, fext, mext, normalize=True):
    """One RK4 step of the classical dynamics."""
    x = np.asarray(x, float)
    k1 = _cl_deriv(x, u, m, jd, grav, drag_c, fext, mext)
    k2 = _cl_deriv(x + 0.5 * dt * k1, u, m, jd, grav, drag_c, fext, mext)
    k3 = _cl_deriv(x + 0.5 * dt * k2, u, m, jd, grav, drag_c, fext, mext)
    k4 = _cl_deriv(x + dt * k3, u, m, jd, grav, drag_c, fext, mext)
    xn = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if normalize:
        xn[6:10] /= np.linalg.norm(xn[6:10])
    return xn


def cl_rk4_jac(x, u, dt, m, jd, grav, drag_c, normalize=True):
    """Classical RK4 step with analytic sensitivities (no external wrench)."""
    x = np.asarray(x, float)
    u = np.asarray(u, float)
    I = np.eye(13)
    k1 = _cl_deriv(x, u, m, jd, grav, drag_c, _ZERO3, _ZERO3)
    f1x, f1u = _cl_deriv_jac(x, u, m, jd, grav, drag_c)
    x2 = x + 0.5 * dt * k1
    k2 = _cl_deriv(x2, u, m, jd, grav, drag_c, _ZERO3, _ZERO3)
    f2x, f2u = _cl_deriv_jac(x2, u, m, jd, grav, drag_c)
    K2x = f2x @ (I + 0.5 * dt * f1x)
    K2u = f2x @ (0.5 * dt * f1u) + f2u
    x3 = x + 0.5 * dt * k2
    k3 = _cl_deriv(x3, u, m, jd, grav, drag_c, _ZERO3, _ZERO3)
    f3x, f3u = _cl_deriv_jac(x3, u, m, jd, grav, drag_c)
    K3x = f3x @ (I + 0.5 * dt * K2x)
    K3u = f3x @ (0.5 * dt * K2u) + f3u
    x4 = x + dt * k3
    k4 = _cl_deriv(x4, u, m, jd, grav, drag_c, _ZERO3, _ZERO3)
    f4x, f4u = _cl_deriv_jac(x4, u, m, jd, grav, drag_c)
    K4x = f4x @ (I + dt * K3x)
    K4u = f4x @ (dt * K3u) + f4u

    xn = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    A = I + (dt / 6.0) * (f1x + 2.0 * K2x + 2.0 * K3x + K4x)
    B = (dt / 6.0) * (f1u + 2.0 * K2u + 2.0 * K3u + K4u)

    if not normalize:
        return xn, A, B
    r = xn[6:10]
    n = np.linalg.norm(r)
    JN = I.copy()
    JN[6:10, 6:10] = np.eye(4) / n - np.outer(r, r) / n**3
    xn = xn.copy()
    xn[6:10] = r / n
    return xn, JN @ A, JN @ B


def cl_rollout(x, u, dt_total, max_sub_dt, m, jd, grav, drag_c, fext, mext):
    """Integrate the classical dynamics over dt_total with RK4 substeps."""
    n_sub = max(1, int(np.ceil(dt_total / max_sub_dt - 1e-12)))
    h = dt_total / n_sub
    out = np.asarray(x, float).copy()
    for _ in range(n_sub):
        out = cl_rk4(out, u, h, m, jd, grav, drag_c, fext, mext)
    return out
