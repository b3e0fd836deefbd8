# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernel backend.

Same contracts and array conventions as `_slowcore` (the pure-numpy
reference); see that module's docstring.  Typed-memoryview C loops, no
numpy calls inside the hot paths.
"""

import numpy as np

from libc.math cimport sqrt, sin, cos, atan2, ceil

BACKEND = "cython"

cdef double _EPS_ANGLE = 1e-7


# ---------------------------------------------------------------------------
# C helpers

cdef inline void _qmul(const double* a, const double* b, double* o) nogil:
    o[0] = a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3]
    o[1] = a[0] * b[1] + a[1] * b[0] + a[2] * b[3] - a[3] * b[2]
    o[2] = a[0] * b[2] - a[1] * b[3] + a[2] * b[0] + a[3] * b[1]
    o[3] = a[0] * b[3] + a[1] * b[2] - a[2] * b[1] + a[3] * b[0]

cdef inline void _qconj(const double* q, double* o) nogil:
    o[0] = q[0]; o[1] = -q[1]; o[2] = -q[2]; o[3] = -q[3]

cdef inline double _sign_canon(const double* q) nogil:
    # +1 keeps q, -1 flips it; w == 0 ties go to lexicographically
    # largest imaginary part
    cdef int k
    if q[0] > 0.0:
        return 1.0
    if q[0] < 0.0:
        return -1.0
    for k in range(1, 4):
        if q[k] > 0.0:
            return 1.0
        if q[k] < 0.0:
            return -1.0
    return 1.0

cdef inline void _rot_wb(const double* r, const double* v, double* o) nogil:
    # r* (x) v (x) r
    cdef double rc[4]
    cdef double vq[4]
    cdef double t[4]
    cdef double res[4]
    _qconj(r, rc)
    vq[0] = 0.0; vq[1] = v[0]; vq[2] = v[1]; vq[3] = v[2]
    _qmul(rc, vq, t)
    _qmul(t, r, res)
    o[0] = res[1]; o[1] = res[2]; o[2] = res[3]

cdef inline void _rot_bw(const double* r, const double* v, double* o) nogil:
    # r (x) v (x) r*
    cdef double rc[4]
    cdef double vq[4]
    cdef double t[4]
    cdef double res[4]
    _qconj(r, rc)
    vq[0] = 0.0; vq[1] = v[0]; vq[2] = v[1]; vq[3] = v[2]
    _qmul(r, vq, t)
    _qmul(t, rc, res)
    o[0] = res[1]; o[1] = res[2]; o[2] = res[3]

cdef inline void _l4_fill(const double* q, double* M) nogil:
    # row-major 4x4 left-multiplication matrix: q (x) p = L(q) p
    M[0] = q[0];  M[1] = -q[1]; M[2] = -q[2]; M[3] = -q[3]
    M[4] = q[1];  M[5] = q[0];  M[6] = -q[3]; M[7] = q[2]
    M[8] = q[2];  M[9] = q[3];  M[10] = q[0]; M[11] = -q[1]
    M[12] = q[3]; M[13] = -q[2]; M[14] = q[1]; M[15] = q[0]

cdef inline void _r4_fill(const double* q, double* M) nogil:
    # row-major 4x4 right-multiplication matrix: p (x) q = R(q) p
    M[0] = q[0];  M[1] = -q[1]; M[2] = -q[2]; M[3] = -q[3]
    M[4] = q[1];  M[5] = q[0];  M[6] = q[3];  M[7] = -q[2]
    M[8] = q[2];  M[9] = -q[3]; M[10] = q[0]; M[11] = q[1]
    M[12] = q[3]; M[13] = q[2]; M[14] = -q[1]; M[15] = q[0]

cdef inline void _matmul(const double* A, int n, int k, const double* B, int m, double* O) nogil:
    cdef int i, j, p
    cdef double acc
    for i in range(n):
        for j in range(m):
            acc = 0.0
            for p in range(k):
                acc += A[i * k + p] * B[p * m + j]
            O[i * m + j] = acc

cdef inline void _dqmul(const double* a, const double* b, double* o) nogil:
    cdef double t1[4]
    cdef double t2[4]
    _qmul(a, b, o)
    _qmul(a, b + 4, t1)
    _qmul(a + 4, b, t2)
    o[4] = t1[0] + t2[0]; o[5] = t1[1] + t2[1]
    o[6] = t1[2] + t2[2]; o[7] = t1[3] + t2[3]

cdef inline int _dqnorm(const double* q, double* o) nogil:
    cdef double n2 = q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]
    cdef double n = sqrt(n2)
    cdef double dp
    cdef int i
    if n <= 1e-12:
        return 1
    dp = q[4] * q[0] + q[5] * q[1] + q[6] * q[2] + q[7] * q[3]
    for i in range(4):
        o[i] = q[i] / n
    for i in range(4):
        o[4 + i] = q[4 + i] / n - (dp / (n2 * n)) * q[i]
    return 0

cdef inline void _dqnorm_jac(const double* q, double* J) nogil:
    # J row-major 8x8
    cdef double n2 = q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]
    cdef double n = sqrt(n2)
    cdef double n3 = n2 * n
    cdef double n5 = n3 * n2
    cdef double dp = q[4] * q[0] + q[5] * q[1] + q[6] * q[2] + q[7] * q[3]
    cdef int i, j
    cdef double jp
    for i in range(64):
        J[i] = 0.0
    for i in range(4):
        for j in range(4):
            jp = -q[i] * q[j] / n3
            if i == j:
                jp += 1.0 / n
            J[i * 8 + j] = jp
            J[(4 + i) * 8 + (4 + j)] = jp
            J[(4 + i) * 8 + j] = (
                -(q[4 + i] * q[j] + q[i] * q[4 + j]) / n3
                + 3.0 * dp * q[i] * q[j] / n5
            )
            if i == j:
                J[(4 + i) * 8 + j] -= dp / n3
    # no dependence of primary rows on dual part (already zero)

cdef inline void _qlog_jac(const double* r, double* J) nogil:
    # J row-major 3x4, raw-formula derivative at near-unit canonical r
    cdef double w = r[0]
    cdef double s2 = r[1] * r[1] + r[2] * r[2] + r[3] * r[3]
    cdef double s = sqrt(s2)
    cdef double n2 = s2 + w * w
    cdef double k, kv, a
    cdef int i, j
    if s < 1e-4:
        k = 1.0 / w - s2 / (3.0 * w * w * w)
        kv = -2.0 / (3.0 * w * w * w) + 0.8 * s2 / (w * w * w * w * w)
    else:
        a = atan2(s, w)
        k = a / s
        kv = w / (n2 * s2) - a / (s2 * s)
    for i in range(3):
        J[i * 4] = -r[1 + i] / n2
        for j in range(3):
            J[i * 4 + 1 + j] = kv * r[1 + i] * r[1 + j]
        J[i * 4 + 1 + i] += k

cdef inline void _qlog(const double* r_in, double* o) nogil:
    cdef double r[4]
    cdef double sgn = _sign_canon(r_in)
    cdef int i
    for i in range(4):
        r[i] = sgn * r_in[i]
    cdef double s = sqrt(r[1] * r[1] + r[2] * r[2] + r[3] * r[3])
    cdef double k
    if s < _EPS_ANGLE:
        k = (1.0 - s * s / (3.0 * r[0] * r[0])) / r[0]
    else:
        k = atan2(s, r[0]) / s
    o[0] = k * r[1]; o[1] = k * r[2]; o[2] = k * r[3]

cdef inline void _qexp(const double* u, double* o) nogil:
    cdef double s = sqrt(u[0] * u[0] + u[1] * u[1] + u[2] * u[2])
    cdef double c
    if s < _EPS_ANGLE:
        c = 1.0 - s * s / 6.0
        o[0] = 1.0 - s * s / 2.0
    else:
        c = sin(s) / s
        o[0] = cos(s)
    o[1] = c * u[0]; o[2] = c * u[1]; o[3] = c * u[2]


# ---------------------------------------------------------------------------
# quaternion / dual-quaternion API

def quat_mul(a, b):
    cdef double[::1] av = np.ascontiguousarray(a, dtype=np.float64)
    cdef double[::1] bv = np.ascontiguousarray(b, dtype=np.float64)
    out = np.empty(4)
    cdef double[::1] ov = out
    _qmul(&av[0], &bv[0], &ov[0])
    return out

def quat_conj(q):
    cdef double[::1] qv = np.ascontiguousarray(q, dtype=np.float64)
    out = np.empty(4)
    cdef double[::1] ov = out
    _qconj(&qv[0], &ov[0])
    return out

def quat_canonical(q):
    cdef double[::1] qv = np.ascontiguousarray(q, dtype=np.float64)
    cdef double sgn = _sign_canon(&qv[0])
    out = np.empty(4)
    cdef double[::1] ov = out
    cdef int i
    for i in range(4):
        ov[i] = sgn * qv[i]
    return out

def quat_rotate_wb(r, v):
    cdef double[::1] rv = np.ascontiguousarray(r, dtype=np.float64)
    cdef double[::1] vv = np.ascontiguousarray(v, dtype=np.float64)
    out = np.empty(3)
    cdef double[::1] ov = out
    _rot_wb(&rv[0], &vv[0], &ov[0])
    return out

def quat_rotate_bw(r, v):
    cdef double[::1] rv = np.ascontiguousarray(r, dtype=np.float64)
    cdef double[::1] vv = np.ascontiguousarray(v, dtype=np.float64)
    out = np.empty(3)
    cdef double[::1] ov = out
    _rot_bw(&rv[0], &vv[0], &ov[0])
    return out

def quat_exp(u):
    cdef double[::1] uv = np.ascontiguousarray(u, dtype=np.float64)
    out = np.empty(4)
    cdef double[::1] ov = out
    _qexp(&uv[0], &ov[0])
    return out

def quat_log(r):
    cdef double[::1] rv = np.ascontiguousarray(r, dtype=np.float64)
    out = np.empty(3)
    cdef double[::1] ov = out
    _qlog(&rv[0], &ov[0])
    return out

def _quat_log_jac(r):
    cdef double[::1] rv = np.ascontiguousarray(r, dtype=np.float64)
    out = np.empty((3, 4))
    cdef double[:, ::1] ov = out
    _qlog_jac(&rv[0], &ov[0, 0])
    return out

def dq_mul(a, b):
    cdef double[::1] av = np.ascontiguousarray(a, dtype=np.float64)
    cdef double[::1] bv = np.ascontiguousarray(b, dtype=np.float64)
    out = np.empty(8)
    cdef double[::1] ov = out
    _dqmul(&av[0], &bv[0], &ov[0])
    return out

def dq_conj(q):
    cdef double[::1] qv = np.ascontiguousarray(q, dtype=np.float64)
    out = np.empty(8)
    cdef double[::1] ov = out
    _qconj(&qv[0], &ov[0])
    _qconj(&qv[0] + 4, &ov[0] + 4)
    return out

def dq_canonical(q):
    cdef double[::1] qv = np.ascontiguousarray(q, dtype=np.float64)
    cdef double sgn = _sign_canon(&qv[0])
    out = np.empty(8)
    cdef double[::1] ov = out
    cdef int i
    for i in range(8):
        ov[i] = sgn * qv[i]
    return out

def dq_from_pose(p, r):
    cdef double[::1] pv = np.ascontiguousarray(p, dtype=np.float64)
    cdef double[::1] rv = np.ascontiguousarray(r, dtype=np.float64)
    out = np.empty(8)
    cdef double[::1] ov = out
    cdef double pq[4]
    cdef double t[4]
    cdef int i
    pq[0] = 0.0; pq[1] = pv[0]; pq[2] = pv[1]; pq[3] = pv[2]
    _qmul(pq, &rv[0], t)
    for i in range(4):
        ov[i] = rv[i]
        ov[4 + i] = 0.5 * t[i]
    return out

def dq_translation(q):
    cdef double[::1] qv = np.ascontiguousarray(q, dtype=np.float64)
    cdef double rc[4]
    cdef double t[4]
    _qconj(&qv[0], rc)
    _qmul(&qv[0] + 4, rc, t)
    out = np.empty(3)
    cdef double[::1] ov = out
    ov[0] = 2.0 * t[1]; ov[1] = 2.0 * t[2]; ov[2] = 2.0 * t[3]
    return out

def dq_normalize(q):
    cdef double[::1] qv = np.ascontiguousarray(q, dtype=np.float64)
    out = np.empty(8)
    cdef double[::1] ov = out
    if _dqnorm(&qv[0], &ov[0]) != 0:
        raise ValueError("dual quaternion real part has (near-)zero norm")
    return out

def dq_normalize_jac(q):
    cdef double[::1] qv = np.ascontiguousarray(q, dtype=np.float64)
    out = np.empty((8, 8))
    cdef double[:, ::1] ov = out
    _dqnorm_jac(&qv[0], &ov[0, 0])
    return out

def dq_log(q):
    cdef double[::1] qv = np.ascontiguousarray(q, dtype=np.float64)
    cdef double sgn = _sign_canon(&qv[0])
    cdef double qc[8]
    cdef double rc[4]
    cdef double t[4]
    cdef int i
    for i in range(8):
        qc[i] = sgn * qv[i]
    out = np.empty(6)
    cdef double[::1] ov = out
    _qlog(qc, &ov[0])
    ov[0] *= 2.0; ov[1] *= 2.0; ov[2] *= 2.0
    _qconj(qc, rc)
    _qmul(qc + 4, rc, t)
    ov[3] = 2.0 * t[1]; ov[4] = 2.0 * t[2]; ov[5] = 2.0 * t[3]
    return out

def dq_exp(s):
    cdef double[::1] sv = np.ascontiguousarray(s, dtype=np.float64)
    cdef double h[3]
    cdef double r[4]
    h[0] = 0.5 * sv[0]; h[1] = 0.5 * sv[1]; h[2] = 0.5 * sv[2]
    _qexp(h, r)
    cdef double pq[4]
    cdef double t[4]
    pq[0] = 0.0; pq[1] = sv[3]; pq[2] = sv[4]; pq[3] = sv[5]
    _qmul(pq, r, t)
    out = np.empty(8)
    cdef double[::1] ov = out
    cdef int i
    for i in range(4):
        ov[i] = r[i]
        ov[4 + i] = 0.5 * t[i]
    return out

def dq_error_ln_jac(qd, q):
    cdef double[::1] dv = np.ascontiguousarray(qd, dtype=np.float64)
    cdef double[::1] qv = np.ascontiguousarray(q, dtype=np.float64)
    cdef double a[8]
    cdef double u[8]
    cdef double pc[4]
    cdef double hd[4]
    cdef double tmp16[16]
    cdef double Jh[48]
    cdef double L[64]
    cdef double sgn
    cdef int i, j

    _qconj(&dv[0], a)
    _qconj(&dv[0] + 4, a + 4)
    _dqmul(a, &qv[0], u)
    sgn = _sign_canon(u)
    for i in range(8):
        u[i] = sgn * u[i]

    e = np.empty(6)
    cdef double[::1] ev = e
    _qlog(u, &ev[0])
    _qconj(u, pc)
    _qmul(u + 4, pc, hd)
    ev[3] = hd[1]; ev[4] = hd[2]; ev[5] = hd[3]

    # Jh (6x8): d e / d u at the canonical error u
    for i in range(48):
        Jh[i] = 0.0
    cdef double jl[12]
    _qlog_jac(u, jl)
    for i in range(3):
        for j in range(4):
            Jh[i * 8 + j] = jl[i * 4 + j]
    # translation rows: Im(d (x) p*) -> wrt p: rows 1:4 of L4(d) C; wrt d: rows 1:4 of R4(p*)
    _l4_fill(u + 4, tmp16)
    for i in range(3):
        Jh[(3 + i) * 8 + 0] = tmp16[(1 + i) * 4 + 0]
        for j in range(1, 4):
            Jh[(3 + i) * 8 + j] = -tmp16[(1 + i) * 4 + j]
    _r4_fill(pc, tmp16)
    for i in range(3):
        for j in range(4):
            Jh[(3 + i) * 8 + 4 + j] = tmp16[(1 + i) * 4 + j]

    # L (8x8): left multiplication by a = conj(qd)
    for i in range(64):
        L[i] = 0.0
    _l4_fill(a, tmp16)
    for i in range(4):
        for j in range(4):
            L[i * 8 + j] = tmp16[i * 4 + j]
            L[(4 + i) * 8 + (4 + j)] = tmp16[i * 4 + j]
    _l4_fill(a + 4, tmp16)
    for i in range(4):
        for j in range(4):
            L[(4 + i) * 8 + j] = tmp16[i * 4 + j]

    Jout = np.empty((6, 8))
    cdef double[:, ::1] Jv = Jout
    _matmul(Jh, 6, 8, L, 8, &Jv[0, 0])
    if sgn < 0.0:
        for i in range(6):
            for j in range(8):
                Jv[i, j] = -Jv[i, j]
    return e, Jout


# ---------------------------------------------------------------------------
# dual-form rigid-body dynamics

cdef inline void _dq_deriv_c(const double* x, const double* u, const double* jd,
                             double grav, double drag_vb, double* dx) nogil:
    cdef double omq[4]
    cdef double vbq[4]
    cdef double t1[4]
    cdef double t2[4]
    cdef double gv[3]
    cdef double gb[3]
    cdef const double* om = x + 8
    cdef const double* vb = x + 11
    cdef int i
    omq[0] = 0.0; omq[1] = om[0]; omq[2] = om[1]; omq[3] = om[2]
    vbq[0] = 0.0; vbq[1] = vb[0]; vbq[2] = vb[1]; vbq[3] = vb[2]
    _qmul(x, omq, t1)
    for i in range(4):
        dx[i] = 0.5 * t1[i]
    _qmul(x, vbq, t1)
    _qmul(x + 4, omq, t2)
    for i in range(4):
        dx[4 + i] = 0.5 * (t1[i] + t2[i])
    # omega dot = -Jinv (om x J om) + u_p
    dx[8] = -(om[1] * jd[2] * om[2] - om[2] * jd[1] * om[1]) / jd[0] + u[0]
    dx[9] = -(om[2] * jd[0] * om[0] - om[0] * jd[2] * om[2]) / jd[1] + u[1]
    dx[10] = -(om[0] * jd[1] * om[1] - om[1] * jd[0] * om[0]) / jd[2] + u[2]
    gv[0] = 0.0; gv[1] = 0.0; gv[2] = grav
    _rot_wb(x, gv, gb)
    # vb dot = vb x om - gb - drag*vb + u_d
    dx[11] = vb[1] * om[2] - vb[2] * om[1] - gb[0] - drag_vb * vb[0] + u[3]
    dx[12] = vb[2] * om[0] - vb[0] * om[2] - gb[1] - drag_vb * vb[1] + u[4]
    dx[13] = vb[0] * om[1] - vb[1] * om[0] - gb[2] - drag_vb * vb[2] + u[5]

cdef inline void _dq_deriv_jac_c(const double* x, const double* jd,
                                 double grav, double drag_vb,
                                 double* fx, double* fu) nogil:
    # fx row-major 14x14, fu 14x6
    cdef double omq[4]
    cdef double vbq[4]
    cdef double M[16]
    cdef double t1[4]
    cdef double t2[4]
    cdef const double* om = x + 8
    cdef const double* vb = x + 11
    cdef int i, j
    for i in range(196):
        fx[i] = 0.0
    for i in range(84):
        fu[i] = 0.0
    omq[0] = 0.0; omq[1] = om[0]; omq[2] = om[1]; omq[3] = om[2]
    vbq[0] = 0.0; vbq[1] = vb[0]; vbq[2] = vb[1]; vbq[3] = vb[2]

    _r4_fill(omq, M)
    for i in range(4):
        for j in range(4):
            fx[i * 14 + j] = 0.5 * M[i * 4 + j]
            fx[(4 + i) * 14 + 4 + j] = 0.5 * M[i * 4 + j]
    _r4_fill(vbq, M)
    for i in range(4):
        for j in range(4):
            fx[(4 + i) * 14 + j] = 0.5 * M[i * 4 + j]
    _l4_fill(x, M)
    for i in range(4):
        for j in range(3):
            fx[i * 14 + 8 + j] = 0.5 * M[i * 4 + 1 + j]
            fx[(4 + i) * 14 + 11 + j] = 0.5 * M[i * 4 + 1 + j]
    _l4_fill(x + 4, M)
    for i in range(4):
        for j in range(3):
            fx[(4 + i) * 14 + 8 + j] = 0.5 * M[i * 4 + 1 + j]

    # d omdot / d om: -Jinv (skew(om) J - skew(J om))
    fx[8 * 14 + 9] = -(jd[2] - jd[1]) * om[2] / jd[0]
    fx[8 * 14 + 10] = -(jd[2] - jd[1]) * om[1] / jd[0]
    fx[9 * 14 + 8] = -(jd[0] - jd[2]) * om[2] / jd[1]
    fx[9 * 14 + 10] = -(jd[0] - jd[2]) * om[0] / jd[1]
    fx[10 * 14 + 8] = -(jd[1] - jd[0]) * om[1] / jd[2]
    fx[10 * 14 + 9] = -(jd[1] - jd[0]) * om[0] / jd[2]
    for i in range(3):
        fu[(8 + i) * 6 + i] = 1.0

    # d vbdot / d qp = -(rows 1:4 of R4(g (x) qp) C + L4(qp* (x) g))
    cdef double gq[4]
    cdef double qc[4]
    cdef double M2[16]
    gq[0] = 0.0; gq[1] = 0.0; gq[2] = 0.0; gq[3] = grav
    _qmul(gq, x, t1)
    _r4_fill(t1, M)
    _qconj(x, qc)
    _qmul(qc, gq, t2)
    _l4_fill(t2, M2)
    for i in range(3):
        fx[(11 + i) * 14 + 0] = -(M[(1 + i) * 4 + 0] + M2[(1 + i) * 4 + 0])
        for j in range(1, 4):
            fx[(11 + i) * 14 + j] = -(-M[(1 + i) * 4 + j] + M2[(1 + i) * 4 + j])

    # d vbdot / d om = skew(vb); d vbdot / d vb = -skew(om) - drag I
    fx[11 * 14 + 9] = -vb[2]; fx[11 * 14 + 10] = vb[1]
    fx[12 * 14 + 8] = vb[2];  fx[12 * 14 + 10] = -vb[0]
    fx[13 * 14 + 8] = -vb[1]; fx[13 * 14 + 9] = vb[0]
    fx[11 * 14 + 12] = om[2];  fx[11 * 14 + 13] = -om[1]
    fx[12 * 14 + 11] = -om[2]; fx[12 * 14 + 13] = om[0]
    fx[13 * 14 + 11] = om[1];  fx[13 * 14 + 12] = -om[0]
    for i in range(3):
        fx[(11 + i) * 14 + 11 + i] -= drag_vb
        fu[(11 + i) * 6 + 3 + i] = 1.0

def dq_deriv(x, u, jd, grav, drag_vb):
    cdef double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef double[::1] uv = np.ascontiguousarray(u, dtype=np.float64)
    cdef double[::1] jv = np.ascontiguousarray(jd, dtype=np.float64)
    out = np.empty(14)
    cdef double[::1] ov = out
    _dq_deriv_c(&xv[0], &uv[0], &jv[0], grav, drag_vb, &ov[0])
    return out

cdef inline void _dq_rk4_raw(const double* x, const double* u, double dt,
                             const double* jd, double grav, double drag_vb,
                             double* xn) nogil:
    cdef double k1[14]
    cdef double k2[14]
    cdef double k3[14]
    cdef double k4[14]
    cdef double xt[14]
    cdef int i
    _dq_deriv_c(x, u, jd, grav, drag_vb, k1)
    for i in range(14):
        xt[i] = x[i] + 0.5 * dt * k1[i]
    _dq_deriv_c(xt, u, jd, grav, drag_vb, k2)
    for i in range(14):
        xt[i] = x[i] + 0.5 * dt * k2[i]
    _dq_deriv_c(xt, u, jd, grav, drag_vb, k3)
    for i in range(14):
        xt[i] = x[i] + dt * k3[i]
    _dq_deriv_c(xt, u, jd, grav, drag_vb, k4)
    for i in range(14):
        xn[i] = x[i] + (dt / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])

def dq_rk4(x, u, dt, jd, grav, drag_vb, bint normalize=True):
    cdef double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef double[::1] uv = np.ascontiguousarray(u, dtype=np.float64)
    cdef double[::1] jv = np.ascontiguousarray(jd, dtype=np.float64)
    cdef double xr[14]
    out = np.empty(14)
    cdef double[::1] ov = out
    cdef int i
    _dq_rk4_raw(&xv[0], &uv[0], dt, &jv[0], grav, drag_vb, xr)
    if not normalize:
        for i in range(14):
            ov[i] = xr[i]
        return out
    if _dqnorm(xr, &ov[0]) != 0:
        raise ValueError("dual quaternion real part has (near-)zero norm")
    for i in range(8, 14):
        ov[i] = xr[i]
    return out

def dq_rk4_jac(x, u, dt, jd, grav, drag_vb, bint normalize=True):
    cdef double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef double[::1] uv = np.ascontiguousarray(u, dtype=np.float64)
    cdef double[::1] jv = np.ascontiguousarray(jd, dtype=np.float64)
    cdef double k1[14]
    cdef double k2[14]
    cdef double k3[14]
    cdef double k4[14]
    cdef double xt[14]
    cdef double f1x[196]
    cdef double f2x[196]
    cdef double fxs[196]
    cdef double f1u[84]
    cdef double fus[84]
    cdef double K2x[196]
    cdef double K3x[196]
    cdef double K4x[196]
    cdef double K2u[84]
    cdef double K3u[84]
    cdef double K4u[84]
    cdef double T[196]
    cdef double Tu[84]
    cdef double xr[14]
    cdef double JN[64]
    cdef int i, j, p
    cdef const double* xp = &xv[0]
    cdef const double* up = &uv[0]
    cdef const double* jp = &jv[0]

    _dq_deriv_c(xp, up, jp, grav, drag_vb, k1)
    _dq_deriv_jac_c(xp, jp, grav, drag_vb, f1x, f1u)

    for i in range(14):
        xt[i] = xp[i] + 0.5 * dt * k1[i]
    _dq_deriv_c(xt, up, jp, grav, drag_vb, k2)
    _dq_deriv_jac_c(xt, jp, grav, drag_vb, fxs, fus)
    for i in range(196):
        T[i] = 0.5 * dt * f1x[i]
    for i in range(14):
        T[i * 14 + i] += 1.0
    _matmul(fxs, 14, 14, T, 14, K2x)
    for i in range(84):
        Tu[i] = 0.5 * dt * f1u[i]
    _matmul(fxs, 14, 14, Tu, 6, K2u)
    for i in range(84):
        K2u[i] += fus[i]

    for i in range(14):
        xt[i] = xp[i] + 0.5 * dt * k2[i]
    _dq_deriv_c(xt, up, jp, grav, drag_vb, k3)
    _dq_deriv_jac_c(xt, jp, grav, drag_vb, fxs, fus)
    for i in range(196):
        T[i] = 0.5 * dt * K2x[i]
    for i in range(14):
        T[i * 14 + i] += 1.0
    _matmul(fxs, 14, 14, T, 14, K3x)
    for i in range(84):
        Tu[i] = 0.5 * dt * K2u[i]
    _matmul(fxs, 14, 14, Tu, 6, K3u)
    for i in range(84):
        K3u[i] += fus[i]

    for i in range(14):
        xt[i] = xp[i] + dt * k3[i]
    _dq_deriv_c(xt, up, jp, grav, drag_vb, k4)
    _dq_deriv_jac_c(xt, jp, grav, drag_vb, fxs, fus)
    for i in range(196):
        T[i] = dt * K3x[i]
    for i in range(14):
        T[i * 14 + i] += 1.0
    _matmul(fxs, 14, 14, T, 14, K4x)
    for i in range(84):
        Tu[i] = dt * K3u[i]
    _matmul(fxs, 14, 14, Tu, 6, K4u)
    for i in range(84):
        K4u[i] += fus[i]

    for i in range(14):
        xr[i] = xp[i] + (dt / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
    # A_raw into T, B_raw into Tu
    for i in range(196):
        T[i] = (dt / 6.0) * (f1x[i] + 2.0 * K2x[i] + 2.0 * K3x[i] + K4x[i])
    for i in range(14):
        T[i * 14 + i] += 1.0
    for i in range(84):
        Tu[i] = (dt / 6.0) * (f1u[i] + 2.0 * K2u[i] + 2.0 * K3u[i] + K4u[i])

    xn = np.empty(14)
    A = np.empty((14, 14))
    B = np.empty((14, 6))
    cdef double[::1] xnv = xn
    cdef double[:, ::1] Av = A
    cdef double[:, ::1] Bv = B
    if not normalize:
        for i in range(14):
            xnv[i] = xr[i]
            for j in range(14):
                Av[i, j] = T[i * 14 + j]
            for j in range(6):
                Bv[i, j] = Tu[i * 6 + j]
        return xn, A, B
    if _dqnorm(xr, &xnv[0]) != 0:
        raise ValueError("dual quaternion real part has (near-)zero norm")
    for i in range(8, 14):
        xnv[i] = xr[i]
    _dqnorm_jac(xr, JN)
    # A = blockdiag(JN, I6) @ A_raw ; B likewise
    cdef double acc
    for i in range(8):
        for j in range(14):
            acc = 0.0
            for p in range(8):
                acc += JN[i * 8 + p] * T[p * 14 + j]
            Av[i, j] = acc
        for j in range(6):
            acc = 0.0
            for p in range(8):
                acc += JN[i * 8 + p] * Tu[p * 6 + j]
            Bv[i, j] = acc
    for i in range(8, 14):
        for j in range(14):
            Av[i, j] = T[i * 14 + j]
        for j in range(6):
            Bv[i, j] = Tu[i * 6 + j]
    return xn, A, B


# ---------------------------------------------------------------------------
# classical rigid-body dynamics

cdef inline void _cl_deriv_c(const double* x, const double* u, double m,
                             const double* jd, double grav, double drag_c,
                             const double* fext, const double* mext,
                             double* dx) nogil:
    cdef double ez[3]
    cdef double td[3]
    cdef double omq[4]
    cdef double t1[4]
    cdef const double* v = x + 3
    cdef const double* r = x + 6
    cdef const double* om = x + 10
    cdef int i
    dx[0] = v[0]; dx[1] = v[1]; dx[2] = v[2]
    ez[0] = 0.0; ez[1] = 0.0; ez[2] = 1.0
    _rot_bw(r, ez, td)
    for i in range(3):
        dx[3 + i] = (u[0] / m) * td[i] - (drag_c / m) * v[i] + fext[i] / m
    dx[5] -= grav
    omq[0] = 0.0; omq[1] = om[0]; omq[2] = om[1]; omq[3] = om[2]
    _qmul(r, omq, t1)
    for i in range(4):
        dx[6 + i] = 0.5 * t1[i]
    dx[10] = (u[1] - (om[1] * jd[2] * om[2] - om[2] * jd[1] * om[1]) + mext[0]) / jd[0]
    dx[11] = (u[2] - (om[2] * jd[0] * om[0] - om[0] * jd[2] * om[2]) + mext[1]) / jd[1]
    dx[12] = (u[3] - (om[0] * jd[1] * om[1] - om[1] * jd[0] * om[0]) + mext[2]) / jd[2]

cdef inline void _cl_deriv_jac_c(const double* x, const double* u, double m,
                                 const double* jd, double grav, double drag_c,
                                 double* fx, double* fu) nogil:
    # fx 13x13, fu 13x4 row-major
    cdef double M[16]
    cdef double M2[16]
    cdef double t1[4]
    cdef double t2[4]
    cdef double rc[4]
    cdef double ezq[4]
    cdef double ez[3]
    cdef double td[3]
    cdef double omq[4]
    cdef const double* r = x + 6
    cdef const double* om = x + 10
    cdef int i, j
    for i in range(169):
        fx[i] = 0.0
    for i in range(52):
        fu[i] = 0.0
    for i in range(3):
        fx[i * 13 + 3 + i] = 1.0
        fx[(3 + i) * 13 + 3 + i] = -drag_c / m

    ezq[0] = 0.0; ezq[1] = 0.0; ezq[2] = 0.0; ezq[3] = 1.0
    _qconj(r, rc)
    _qmul(ezq, rc, t1)
    _r4_fill(t1, M)
    _qmul(r, ezq, t2)
    _l4_fill(t2, M2)
    # d(r (x) ez (x) r*)/dr rows 1:4 of R4(ez r*) + L4(r ez) C
    for i in range(3):
        fx[(3 + i) * 13 + 6] = (u[0] / m) * (M[(1 + i) * 4] + M2[(1 + i) * 4])
        for j in range(1, 4):
            fx[(3 + i) * 13 + 6 + j] = (u[0] / m) * (M[(1 + i) * 4 + j] - M2[(1 + i) * 4 + j])
    ez[0] = 0.0; ez[1] = 0.0; ez[2] = 1.0
    _rot_bw(r, ez, td)
    for i in range(3):
        fu[(3 + i) * 4] = td[i] / m

    omq[0] = 0.0; omq[1] = om[0]; omq[2] = om[1]; omq[3] = om[2]
    _r4_fill(omq, M)
    for i in range(4):
        for j in range(4):
            fx[(6 + i) * 13 + 6 + j] = 0.5 * M[i * 4 + j]
    _l4_fill(r, M)
    for i in range(4):
        for j in range(3):
            fx[(6 + i) * 13 + 10 + j] = 0.5 * M[i * 4 + 1 + j]

    fx[10 * 13 + 11] = -(jd[2] - jd[1]) * om[2] / jd[0]
    fx[10 * 13 + 12] = -(jd[2] - jd[1]) * om[1] / jd[0]
    fx[11 * 13 + 10] = -(jd[0] - jd[2]) * om[2] / jd[1]
    fx[11 * 13 + 12] = -(jd[0] - jd[2]) * om[0] / jd[1]
    fx[12 * 13 + 10] = -(jd[1] - jd[0]) * om[1] / jd[2]
    fx[12 * 13 + 11] = -(jd[1] - jd[0]) * om[0] / jd[2]
    for i in range(3):
        fu[(10 + i) * 4 + 1 + i] = 1.0 / jd[i]

def cl_deriv(x, u, m, jd, grav, drag_c, fext, mext):
    cdef double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef double[::1] uv = np.ascontiguousarray(u, dtype=np.float64)
    cdef double[::1] jv = np.ascontiguousarray(jd, dtype=np.float64)
    cdef double[::1] fv = np.ascontiguousarray(fext, dtype=np.float64)
    cdef double[::1] mv = np.ascontiguousarray(mext, dtype=np.float64)
    out = np.empty(13)
    cdef double[::1] ov = out
    _cl_deriv_c(&xv[0], &uv[0], m, &jv[0], grav, drag_c, &fv[0], &mv[0], &ov[0])
    return out

cdef inline void _cl_rk4_c(const double* x, const double* u, double dt, double m,
                           const double* jd, double grav, double drag_c,
                           const double* fext, const double* mext,
                           double* xn, bint normalize) nogil:
    cdef double k1[13]
    cdef double k2[13]
    cdef double k3[13]
    cdef double k4[13]
    cdef double xt[13]
    cdef double n
    cdef int i
    _cl_deriv_c(x, u, m, jd, grav, drag_c, fext, mext, k1)
    for i in range(13):
        xt[i] = x[i] + 0.5 * dt * k1[i]
    _cl_deriv_c(xt, u, m, jd, grav, drag_c, fext, mext, k2)
    for i in range(13):
        xt[i] = x[i] + 0.5 * dt * k2[i]
    _cl_deriv_c(xt, u, m, jd, grav, drag_c, fext, mext, k3)
    for i in range(13):
        xt[i] = x[i] + dt * k3[i]
    _cl_deriv_c(xt, u, m, jd, grav, drag_c, fext, mext, k4)
    for i in range(13):
        xn[i] = x[i] + (dt / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
    if not normalize:
        return
    n = sqrt(xn[6] * xn[6] + xn[7] * xn[7] + xn[8] * xn[8] + xn[9] * xn[9])
    for i in range(6, 10):
        xn[i] /= n

def cl_rk4(x, u, dt, m, jd, grav, drag_c, fext, mext, bint normalize=True):
    cdef double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef double[::1] uv = np.ascontiguousarray(u, dtype=np.float64)
    cdef double[::1] jv = np.ascontiguousarray(jd, dtype=np.float64)
    cdef double[::1] fv = np.ascontiguousarray(fext, dtype=np.float64)
    cdef double[::1] mv = np.ascontiguousarray(mext, dtype=np.float64)
    out = np.empty(13)
    cdef double[::1] ov = out
    _cl_rk4_c(&xv[0], &uv[0], dt, m, &jv[0], grav, drag_c, &fv[0], &mv[0], &ov[0], normalize)
    return out

def cl_rk4_jac(x, u, dt, m, jd, grav, drag_c, bint normalize=True):
    cdef double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef double[::1] uv = np.ascontiguousarray(u, dtype=np.float64)
    cdef double[::1] jv = np.ascontiguousarray(jd, dtype=np.float64)
    cdef double z3[3]
    cdef double k1[13]
    cdef double k2[13]
    cdef double k3[13]
    cdef double k4[13]
    cdef double xt[13]
    cdef double f1x[169]
    cdef double fxs[169]
    cdef double f1u[52]
    cdef double fus[52]
    cdef double K2x[169]
    cdef double K3x[169]
    cdef double K4x[169]
    cdef double K2u[52]
    cdef double K3u[52]
    cdef double K4u[52]
    cdef double T[169]
    cdef double Tu[52]
    cdef double xr[13]
    cdef int i, j, p
    cdef const double* xp = &xv[0]
    cdef const double* up = &uv[0]
    cdef const double* jp = &jv[0]
    z3[0] = 0.0; z3[1] = 0.0; z3[2] = 0.0

    _cl_deriv_c(xp, up, m, jp, grav, drag_c, z3, z3, k1)
    _cl_deriv_jac_c(xp, up, m, jp, grav, drag_c, f1x, f1u)

    for i in range(13):
        xt[i] = xp[i] + 0.5 * dt * k1[i]
    _cl_deriv_c(xt, up, m, jp, grav, drag_c, z3, z3, k2)
    _cl_deriv_jac_c(xt, up, m, jp, grav, drag_c, fxs, fus)
    for i in range(169):
        T[i] = 0.5 * dt * f1x[i]
    for i in range(13):
        T[i * 13 + i] += 1.0
    _matmul(fxs, 13, 13, T, 13, K2x)
    for i in range(52):
        Tu[i] = 0.5 * dt * f1u[i]
    _matmul(fxs, 13, 13, Tu, 4, K2u)
    for i in range(52):
        K2u[i] += fus[i]

    for i in range(13):
        xt[i] = xp[i] + 0.5 * dt * k2[i]
    _cl_deriv_c(xt, up, m, jp, grav, drag_c, z3, z3, k3)
    _cl_deriv_jac_c(xt, up, m, jp, grav, drag_c, fxs, fus)
    for i in range(169):
        T[i] = 0.5 * dt * K2x[i]
    for i in range(13):
        T[i * 13 + i] += 1.0
    _matmul(fxs, 13, 13, T, 13, K3x)
    for i in range(52):
        Tu[i] = 0.5 * dt * K2u[i]
    _matmul(fxs, 13, 13, Tu, 4, K3u)
    for i in range(52):
        K3u[i] += fus[i]

    for i in range(13):
        xt[i] = xp[i] + dt * k3[i]
    _cl_deriv_c(xt, up, m, jp, grav, drag_c, z3, z3, k4)
    _cl_deriv_jac_c(xt, up, m, jp, grav, drag_c, fxs, fus)
    for i in range(169):
        T[i] = dt * K3x[i]
    for i in range(13):
        T[i * 13 + i] += 1.0
    _matmul(fxs, 13, 13, T, 13, K4x)
    for i in range(52):
        Tu[i] = dt * K3u[i]
    _matmul(fxs, 13, 13, Tu, 4, K4u)
    for i in range(52):
        K4u[i] += fus[i]

    for i in range(13):
        xr[i] = xp[i] + (dt / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
    for i in range(169):
        T[i] = (dt / 6.0) * (f1x[i] + 2.0 * K2x[i] + 2.0 * K3x[i] + K4x[i])
    for i in range(13):
        T[i * 13 + i] += 1.0
    for i in range(52):
        Tu[i] = (dt / 6.0) * (f1u[i] + 2.0 * K2u[i] + 2.0 * K3u[i] + K4u[i])

    xn = np.empty(13)
    A = np.empty((13, 13))
    B = np.empty((13, 4))
    cdef double[::1] xnv = xn
    cdef double[:, ::1] Av = A
    cdef double[:, ::1] Bv = B
    if not normalize:
        for i in range(13):
            xnv[i] = xr[i]
            for j in range(13):
                Av[i, j] = T[i * 13 + j]
            for j in range(4):
                Bv[i, j] = Tu[i * 4 + j]
        return xn, A, B
    cdef double n2 = xr[6] * xr[6] + xr[7] * xr[7] + xr[8] * xr[8] + xr[9] * xr[9]
    cdef double n = sqrt(n2)
    cdef double n3 = n2 * n
    cdef double JQ[16]
    for i in range(4):
        for j in range(4):
            JQ[i * 4 + j] = -xr[6 + i] * xr[6 + j] / n3
        JQ[i * 4 + i] += 1.0 / n
    for i in range(13):
        xnv[i] = xr[i]
    for i in range(6, 10):
        xnv[i] = xr[i] / n
    cdef double acc
    for i in range(13):
        for j in range(13):
            Av[i, j] = T[i * 13 + j]
        for j in range(4):
            Bv[i, j] = Tu[i * 4 + j]
    for i in range(4):
        for j in range(13):
            acc = 0.0
            for p in range(4):
                acc += JQ[i * 4 + p] * T[(6 + p) * 13 + j]
            Av[6 + i, j] = acc
        for j in range(4):
            acc = 0.0
            for p in range(4):
                acc += JQ[i * 4 + p] * Tu[(6 + p) * 4 + j]
            Bv[6 + i, j] = acc
    return xn, A, B

def cl_rollout(x, u, dt_total, max_sub_dt, m, jd, grav, drag_c, fext, mext):
    cdef double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef double[::1] uv = np.ascontiguousarray(u, dtype=np.float64)
    cdef double[::1] jv = np.ascontiguousarray(jd, dtype=np.float64)
    cdef double[::1] fv = np.ascontiguousarray(fext, dtype=np.float64)
    cdef double[::1] mv = np.ascontiguousarray(mext, dtype=np.float64)
    cdef int n_sub = <int>ceil(dt_total / max_sub_dt - 1e-12)
    if n_sub < 1:
        n_sub = 1
    cdef double h = dt_total / n_sub
    cdef double a[13]
    cdef double b[13]
    cdef int i, k
    for i in range(13):
        a[i] = xv[i]
    for k in range(n_sub):
        _cl_rk4_c(a, &uv[0], h, m, &jv[0], grav, drag_c, &fv[0], &mv[0], b, 1)
        for i in range(13):
            a[i] = b[i]
    out = np.empty(13)
    cdef double[::1] ov = out
    for i in range(13):
        ov[i] = a[i]
    return out
