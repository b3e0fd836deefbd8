"""Scratch validation of qp.py against brute-force enumeration."""
import itertools
import numpy as np
from dqnmpc.qp import DenseQp, solve_qp, kkt_residuals


def enum_oracle(qp):
    """Enumerate active sets of one-sided constraints; return optimal x."""
    n = qp.n
    ones = []
    for i in range(qp.Aineq.shape[0]):
        if np.isfinite(qp.lb[i]):
            ones.append((-qp.Aineq[i], -qp.lb[i]))  # -a x <= -lb
        if np.isfinite(qp.ub[i]):
            ones.append((qp.Aineq[i], qp.ub[i]))
    best = None
    for k in range(len(ones) + 1):
        for S in itertools.combinations(range(len(ones)), k):
            A_act = np.vstack([qp.Aeq] + [ones[j][0][None, :] for j in S]) if (qp.Aeq.shape[0] or S) else np.zeros((0, n))
            b_act = np.concatenate([qp.beq] + [[ones[j][1]] for j in S]) if (qp.Aeq.shape[0] or S) else np.zeros(0)
            m = A_act.shape[0]
            KKT = np.block([[qp.H, A_act.T], [A_act, np.zeros((m, m))]])
            rhs = np.concatenate([-qp.g, b_act])
            try:
                sol = np.linalg.solve(KKT, rhs)
            except np.linalg.LinAlgError:
                continue
            x, mult = sol[:n], sol[n + qp.Aeq.shape[0]:]
            # feasibility
            ok = True
            for j, (a, b) in enumerate(ones):
                if a @ x > b + 1e-8:
                    ok = False
                    break
            if not ok:
                continue
            if np.any(mult < -1e-8):
                continue
            f = 0.5 * x @ qp.H @ x + qp.g @ x
            if best is None or f < best[0] - 1e-12:
                best = (f, x)
    return best


rng = np.random.default_rng(7)
n_fail = 0
for trial in range(400):
    n = int(rng.integers(2, 7))
    M = rng.normal(size=(n, n))
    H = M @ M.T + (0.1 + rng.random()) * np.eye(n)
    g = rng.normal(size=n)
    m_ineq = int(rng.integers(0, 5))
    Aineq = rng.normal(size=(m_ineq, n)) if m_ineq else None
    lb = ub = None
    if m_ineq:
        mid = rng.normal(size=m_ineq)
        half = rng.random(m_ineq) * 1.5
        lb = mid - half
        ub = mid + half
        # randomly knock out some bounds to infinity
        for i in range(m_ineq):
            r = rng.random()
            if r < 0.25:
                lb[i] = -np.inf
            elif r < 0.5:
                ub[i] = np.inf
    meq = int(rng.integers(0, 2)) if n > 2 else 0
    Aeq = beq = None
    if meq:
        if rng.random() < 0.5:
            Aeq = np.zeros((1, n)); Aeq[0, int(rng.integers(0, n))] = 1.0
        else:
            Aeq = rng.normal(size=(1, n))
        beq = rng.normal(size=1) * 0.3
    qp = DenseQp(H, g, Aeq, beq, Aineq, lb, ub)
    oracle = enum_oracle(qp)
    sol = solve_qp(qp)
    if oracle is None:
        if sol.status != "infeasible":
            print(f"trial {trial}: oracle infeasible but solver said {sol.status}")
            n_fail += 1
        continue
    if sol.status != "optimal":
        print(f"trial {trial}: solver status {sol.status}, oracle has solution")
        n_fail += 1
        continue
    err = np.max(np.abs(sol.x - oracle[1]))
    kkt = kkt_residuals(qp, sol)
    if err > 1e-7 or kkt.max() > 1e-7:
        print(f"trial {trial}: err={err:.2e} kkt={kkt.max():.2e}")
        n_fail += 1

print(f"random QP vs enumeration oracle: {400 - n_fail}/400 ok")

# warm start returns the same primal
qp = DenseQp(np.diag([2.0, 1.0, 3.0]), np.array([1.0, -2.0, 0.5]),
             None, None, np.array([[1.0, 1.0, 0.0], [0.0, 1.0, -1.0]]),
             np.array([-0.5, -np.inf]), np.array([0.5, 0.2]))
cold = solve_qp(qp)
warm = solve_qp(qp, warm=cold)
print("warm == cold:", np.max(np.abs(cold.x - warm.x)) < 1e-12, "pivots", cold.n_pivots, "->", warm.n_pivots)

# infeasible pair
qp_inf = DenseQp(np.eye(1), np.zeros(1), None, None,
                 np.array([[1.0], [1.0]]), np.array([1.0, -np.inf]), np.array([np.inf, 0.0]))
print("infeasible detected:", solve_qp(qp_inf).status == "infeasible")

# unit-row fast path vs general path agreement
rng = np.random.default_rng(3)
for _ in range(50):
    n = 8
    M = rng.normal(size=(n, n)); H = M @ M.T + np.eye(n)
    g = rng.normal(size=n)
    Aeq = np.zeros((3, n))
    for k, c in enumerate([1, 4, 6]):
        Aeq[k, c] = 1.0
    beq = rng.normal(size=3)
    Aineq = rng.normal(size=(3, n))
    lb = -0.3 * np.ones(3); ub = 0.3 * np.ones(3)
    q1 = DenseQp(H, g, Aeq, beq, Aineq, lb, ub)
    s1 = solve_qp(q1)
    # rotate equality rows so the fast path is skipped
    Rm = np.array([[1.0, 0.2, 0.0], [0.0, 1.0, -0.3], [0.1, 0.0, 1.0]])
    q2 = DenseQp(H, g, Rm @ Aeq, Rm @ beq, Aineq, lb, ub)
    s2 = solve_qp(q2)
    assert np.max(np.abs(s1.x - s2.x)) < 1e-8, np.max(np.abs(s1.x - s2.x))
    assert kkt_residuals(q1, s1).max() < 1e-8
    assert kkt_residuals(q2, s2).max() < 1e-8
print("fast path == general path: ok")

# equality-only solve
qp_eq = DenseQp(np.diag([1.0, 2.0]), np.array([0.3, -0.4]), np.array([[1.0, 1.0]]), np.array([1.0]))
s = solve_qp(qp_eq)
print("eq-only kkt:", kkt_residuals(qp_eq, s).max() < 1e-10, "x:", s.x)
