"""Independent reference implementations the tests check against.

Everything here is written from first principles (rotation matrices,
homogeneous transforms, brute-force enumeration, central differences)
without calling into the package, so agreement is evidence rather than
tautology.
"""

from __future__ import annotations

import itertools

import numpy as np


def rot_matrix(q) -> np.ndarray:
    """3x3 rotation matrix of a unit quaternion [w, x, y, z]."""
    w, x, y, z = np.asarray(q, float)
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def homogeneous(p, r) -> np.ndarray:
    """4x4 rigid transform from translation p and unit quaternion r."""
    T = np.eye(4)
    T[:3, :3] = rot_matrix(r)
    T[:3, 3] = np.asarray(p, float)
    return T


def random_unit_quat(rng) -> np.ndarray:
    q = rng.normal(size=4)
    return q / np.linalg.norm(q)


def random_pose(rng):
    return rng.uniform(-3.0, 3.0, size=3), random_unit_quat(rng)


def fd_jac(f, x, eps: float = 1e-6) -> np.ndarray:
    """Central finite-difference Jacobian of f at x."""
    x = np.asarray(x, float)
    f0 = np.asarray(f(x), float)
    J = np.empty((f0.size, x.size))
    for i in range(x.size):
        xp = x.copy(); xp[i] += eps
        xm = x.copy(); xm[i] -= eps
        J[:, i] = (np.asarray(f(xp), float) - np.asarray(f(xm), float)) / (2 * eps)
    return J


def rel_err(J, J_ref) -> float:
    """Max-norm error relative to the reference's scale."""
    scale = max(1.0, float(np.max(np.abs(J_ref))))
    return float(np.max(np.abs(J - J_ref))) / scale


def euler_omega_dot(w, tau, j_diag) -> np.ndarray:
    """Rigid-body rate derivative J^-1 (tau - w x (J w)), expanded."""
    w = np.asarray(w, float)
    J = np.diag(np.asarray(j_diag, float))
    return np.linalg.solve(J, np.asarray(tau, float) - np.cross(w, J @ w))


# ---------------------------------------------------------------------------
# brute-force QP oracle


def enum_qp_oracle(H, g, Aeq, beq, Aineq, lb, ub):
    """Globally optimal x of a strictly convex box-inequality QP by
    enumerating every active set of one-sided constraints.

    Returns None when no active set yields a feasible KKT point (the
    problem is infeasible).  Candidate KKT systems whose linear solve
    does not actually satisfy the system (near-singular active sets)
    are rejected by residual, not trusted.
    """
    H = np.asarray(H, float)
    g = np.asarray(g, float)
    n = g.size
    Aeq = np.zeros((0, n)) if Aeq is None else np.atleast_2d(np.asarray(Aeq, float))
    beq = np.zeros(0) if beq is None else np.atleast_1d(np.asarray(beq, float))
    ones = []
    if Aineq is not None:
        Aineq = np.atleast_2d(np.asarray(Aineq, float))
        for i in range(Aineq.shape[0]):
            if np.isfinite(lb[i]):
                ones.append((-Aineq[i], -float(lb[i])))
            if np.isfinite(ub[i]):
                ones.append((Aineq[i], float(ub[i])))

    meq = Aeq.shape[0]
    best = None
    for k in range(len(ones) + 1):
        for S in itertools.combinations(range(len(ones)), k):
            rows = [Aeq] + [ones[j][0][None, :] for j in S]
            A = np.vstack(rows) if (meq or S) else np.zeros((0, n))
            b = np.concatenate([beq] + [[ones[j][1]] for j in S]) if (meq or S) \
                else np.zeros(0)
            m = A.shape[0]
            KKT = np.block([[H, A.T], [A, np.zeros((m, m))]])
            rhs = np.concatenate([-g, b])
            try:
                sol = np.linalg.solve(KKT, rhs)
            except np.linalg.LinAlgError:
                continue
            if np.linalg.norm(KKT @ sol - rhs) > 1e-8 * max(1.0, np.linalg.norm(rhs)):
                continue
            x, mult = sol[:n], sol[n + meq:]
            if any(a @ x > b1 + 1e-9 for a, b1 in ones):
                continue
            if np.any(mult < -1e-9):
                continue
            f = 0.5 * x @ H @ x + g @ x
            if best is None or f < best[0] - 1e-12:
                best = (f, x)
    return None if best is None else best[1]


def random_boxed_qp(rng):
    """Random strictly convex QP in the oracle's reach: n <= 6, at most
    4 two-sided inequality rows (some bounds knocked out to infinity),
    occasionally one equality row."""
    n = int(rng.integers(2, 7))
    M = rng.normal(size=(n, n))
    H = M @ M.T + (0.1 + rng.random()) * np.eye(n)
    g = rng.normal(size=n)
    m_ineq = int(rng.integers(0, 5))
    Aineq = lb = ub = None
    if m_ineq:
        Aineq = rng.normal(size=(m_ineq, n))
        mid = rng.normal(size=m_ineq)
        half = rng.random(m_ineq) * 1.5
        lb, ub = mid - half, mid + half
        for i in range(m_ineq):
            r = rng.random()
            if r < 0.25:
                lb[i] = -np.inf
            elif r < 0.5:
                ub[i] = np.inf
    Aeq = beq = None
    if n > 2 and rng.random() < 0.4:
        Aeq = np.zeros((1, n))
        if rng.random() < 0.5:
            Aeq[0, int(rng.integers(0, n))] = 1.0
        else:
            Aeq[0] = rng.normal(size=n)
        beq = rng.normal(size=1) * 0.3
    return H, g, Aeq, beq, Aineq, lb, ub
