import numpy as np
import sys

sys.path.insert(0, "src")
from dqnmpc._kernels import _slowcore as K

rng = np.random.default_rng(0)


def fd_jac(f, x, h=1e-6):
    y0 = f(x)
    J = np.empty((len(y0), len(x)))
    for i in range(len(x)):
        xp = x.copy(); xp[i] += h
        xm = x.copy(); xm[i] -= h
        J[:, i] = (f(xp) - f(xm)) / (2 * h)
    return J


def rand_unit_q():
    q = rng.normal(size=4)
    return q / np.linalg.norm(q)


def rand_unit_dq():
    return K.dq_from_pose(rng.normal(size=3), rand_unit_q())


# 1. quat log jac (raw formula, canonical inputs)
def _raw_log(r):
    w = r[0]; v = r[1:]
    s = np.linalg.norm(v)
    if s < 1e-9:
        return v / w
    return (np.arctan2(s, w) / s) * v


err = 0.0
for _ in range(200):
    q = rand_unit_q()
    if q[0] < 1e-3:
        continue
    if q[0] < 0:
        q = -q
    J = K._quat_log_jac(q)
    Jfd = fd_jac(_raw_log, q)
    err = max(err, np.abs(J - Jfd).max())
print("quat_log_jac err", err)

# small-angle branch
for s in (1e-5, 5e-5, 2e-4):
    v = s * np.array([1.0, -2.0, 0.5]) / np.linalg.norm([1.0, -2.0, 0.5])
    q = np.array([np.sqrt(1 - s * s), *v])
    J = K._quat_log_jac(q)
    Jfd = fd_jac(_raw_log, q, h=1e-7)
    print("small branch", s, np.abs(J - Jfd).max())

# 2. dq_normalize_jac
err = 0.0
for _ in range(100):
    q = rand_unit_dq() + 0.05 * rng.normal(size=8)
    J = K.dq_normalize_jac(q)
    Jfd = fd_jac(K.dq_normalize, q)
    err = max(err, np.abs(J - Jfd).max())
print("dq_normalize_jac err", err)

# 3. dq_error_ln_jac
err = 0.0
for _ in range(100):
    qd = rand_unit_dq()
    q = rand_unit_dq()
    e, J = K.dq_error_ln_jac(qd, q)
    Jfd = fd_jac(lambda qq: K.dq_error_ln_jac(qd, qq)[0], q)
    err = max(err, np.abs(J - Jfd).max())
print("dq_error_ln_jac err", err)

# check e value: identity error
qd = rand_unit_dq()
e, _ = K.dq_error_ln_jac(qd, qd)
print("self error", np.abs(e).max())

# e vs dq_log of error / 2
qd = rand_unit_dq(); q = rand_unit_dq()
e, _ = K.dq_error_ln_jac(qd, q)
s = K.dq_log(K.dq_mul(K.dq_conj(qd), q))
print("ln vs screw/2", np.abs(e - 0.5 * s).max())

# 4. dq deriv jacobians
jd = np.array([0.01, 0.012, 0.02])
for _ in range(20):
    x = np.concatenate([rand_unit_dq(), rng.normal(size=6)])
    u = rng.normal(size=6)
    fx, fu = K._dq_deriv_jac(x, u, jd, 9.81, 0.3)
    fxd = fd_jac(lambda xx: K.dq_deriv(xx, u, jd, 9.81, 0.3), x)
    fud = fd_jac(lambda uu: K.dq_deriv(x, uu, jd, 9.81, 0.3), u)
    assert np.abs(fx - fxd).max() < 1e-7, np.abs(fx - fxd).max()
    assert np.abs(fu - fud).max() < 1e-7
print("dq_deriv_jac ok")

# 5. dq_rk4_jac
err = 0.0
for _ in range(20):
    x = np.concatenate([rand_unit_dq(), rng.normal(size=6)])
    u = rng.normal(size=6)
    xn, A, B = K.dq_rk4_jac(x, u, 0.05, jd, 9.81, 0.1)
    xn2 = K.dq_rk4(x, u, 0.05, jd, 9.81, 0.1)
    assert np.abs(xn - xn2).max() < 1e-14
    Afd = fd_jac(lambda xx: K.dq_rk4(xx, u, 0.05, jd, 9.81, 0.1), x)
    Bfd = fd_jac(lambda uu: K.dq_rk4(x, uu, 0.05, jd, 9.81, 0.1), u)
    err = max(err, np.abs(A - Afd).max(), np.abs(B - Bfd).max())
print("dq_rk4_jac err", err)

# 6. classical deriv + rk4 jac
m = 1.3
for _ in range(20):
    x = np.concatenate([rng.normal(size=6), rand_unit_q(), rng.normal(size=3)])
    u = rng.normal(size=4)
    fx, fu = K._cl_deriv_jac(x, u, m, jd, 9.81, 0.25)
    fxd = fd_jac(lambda xx: K.cl_deriv(xx, u, m, jd, 9.81, 0.25, np.zeros(3), np.zeros(3)), x)
    fud = fd_jac(lambda uu: K.cl_deriv(x, uu, m, jd, 9.81, 0.25, np.zeros(3), np.zeros(3)), u)
    assert np.abs(fx - fxd).max() < 1e-7, np.abs(fx - fxd).max()
    assert np.abs(fu - fud).max() < 1e-7
    xn, A, B = K.cl_rk4_jac(x, u, 0.05, m, jd, 9.81, 0.25)
    Afd = fd_jac(lambda xx: K.cl_rk4(xx, u, 0.05, m, jd, 9.81, 0.25, np.zeros(3), np.zeros(3)), x)
    Bfd = fd_jac(lambda uu: K.cl_rk4(x, uu, 0.05, m, jd, 9.81, 0.25, np.zeros(3), np.zeros(3)), u)
    assert np.abs(A - Afd).max() < 1e-6, np.abs(A - Afd).max()
    assert np.abs(B - Bfd).max() < 1e-6
print("cl jacs ok")

# 7. representation equivalence quick check: same physical traj both forms
def cl_to_dq_state(x):
    p, v, r, om = x[:3], x[3:6], x[6:10], x[10:13]
    vb = K.quat_rotate_wb(r, v)
    return np.concatenate([K.dq_from_pose(p, r), om, vb])

m0 = 1.0
x_cl = np.concatenate([rng.normal(size=3), rng.normal(size=3), rand_unit_q(), 0.5 * rng.normal(size=3)])
f, tau = 12.0, np.array([0.001, -0.002, 0.0005])
u_cl = np.array([f, *tau])
u_dq = np.concatenate([tau / jd, [0, 0, f / m0]])
xd = cl_to_dq_state(x_cl)
for _ in range(200):
    x_cl = K.cl_rk4(x_cl, u_cl, 0.01, m0, jd, 9.81, 0.0, np.zeros(3), np.zeros(3))
    xd = K.dq_rk4(xd, u_dq, 0.01, jd, 9.81, 0.0)
xd_from_cl = cl_to_dq_state(x_cl)
qa = K.dq_canonical(xd[:8]); qb = K.dq_canonical(xd_from_cl[:8])
print("repr equiv pose", np.abs(qa - qb).max(), "twist", np.abs(xd[8:] - xd_from_cl[8:]).max())
