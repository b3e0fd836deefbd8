"""Dense convex QP solver with full KKT residual reporting.

Solves

    min  0.5 x' H x + g' x
    s.t. Aeq x = beq
         lb <= Aineq x <= ub        (either bound may be infinite)

by eliminating the equalities and running a dual active-set method
(Goldfarb-Idnani) on the reduced problem.  The dual method starts from
the unconstrained minimizer and adds violated constraints one at a
time, which is what makes warm working sets cheap for the SQP/RTI loop
above it: near a solved problem there is simply nothing to add.

Equality elimination has a fast path for unit coordinate rows (the only
kind the condensed control QPs produce: initial-state pins and fixed
input channels) and a QR null-space path for general rows.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

__all__ = [
    "DenseQp",
    "QpSolution",
    "KktResiduals",
    "QpInfeasible",
    "solve_qp",
    "kkt_residuals",
]

_FEAS_TOL = 1e-10


class QpInfeasible(RuntimeError):
    """No point satisfies the equality and inequality system."""


@dataclass
class DenseQp:
    H: np.ndarray
    g: np.ndarray
    Aeq: np.ndarray | None = None
    beq: np.ndarray | None = None
    Aineq: np.ndarray | None = None
    lb: np.ndarray | None = None
    ub: np.ndarray | None = None

    def __post_init__(self):
        self.H = np.asarray(self.H, float)
        self.g = np.asarray(self.g, float)
        n = self.g.size
        if self.Aeq is None:
            self.Aeq = np.zeros((0, n))
            self.beq = np.zeros(0)
        else:
            self.Aeq = np.atleast_2d(np.asarray(self.Aeq, float))
            self.beq = np.atleast_1d(np.asarray(self.beq, float))
        if self.Aineq is None:
            self.Aineq = np.zeros((0, n))
            self.lb = np.zeros(0)
            self.ub = np.zeros(0)
        else:
            self.Aineq = np.atleast_2d(np.asarray(self.Aineq, float))
            self.lb = np.atleast_1d(np.asarray(self.lb, float))
            self.ub = np.atleast_1d(np.asarray(self.ub, float))

    @property
    def n(self) -> int:
        return self.g.size


@dataclass
class QpSolution:
    x: np.ndarray
    lam_eq: np.ndarray
    mu_lb: np.ndarray
    mu_ub: np.ndarray
    status: str  # optimal | max_iter | infeasible
    n_pivots: int = 0
    active_set: tuple = ()
    reg_added: float = 0.0


@dataclass(frozen=True)
class KktResiduals:
    stationarity: float
    eq_feas: float
    ineq_feas: float
    comp: float

    def max(self) -> float:
        return max(self.stationarity, self.eq_feas, self.ineq_feas, self.comp)

    def as_dict(self) -> dict:
        return {
            "stationarity": self.stationarity,
            "eq_feas": self.eq_feas,
            "ineq_feas": self.ineq_feas,
            "comp": self.comp,
        }


def _chol_with_escalation(H: np.ndarray) -> tuple[np.ndarray, float]:
    """Cholesky factor of H, adding an escalating shift if needed."""
    try:
        return np.linalg.cholesky(H), 0.0
    except np.linalg.LinAlgError:
        pass
    shift = 1e-8
    eye = np.eye(H.shape[0])
    while shift <= 1e-2:
        try:
            return np.linalg.cholesky(H + shift * eye), shift
        except np.linalg.LinAlgError:
            shift *= 10.0
    raise np.linalg.LinAlgError("Hessian not positive definite even with 1e-2 shift")


@dataclass
class _Reduced:
    """Reduced (equality-eliminated) problem data."""

    Z: np.ndarray | None  # None means coordinate selection
    free: np.ndarray | None
    x_part: np.ndarray
    H: np.ndarray
    g: np.ndarray
    C: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    rows: np.ndarray  # original Aineq row per reduced constraint


def _eliminate(qp: DenseQp) -> _Reduced:
    n = qp.n
    m = qp.Aeq.shape[0]
    if m == 0:
        x_part = np.zeros(n)
        return _Reduced(None, np.arange(n), x_part, qp.H, qp.g,
                        qp.Aineq, qp.lb, qp.ub, np.arange(qp.Aineq.shape[0]))

    # fast path: every equality row is a unit coordinate row
    cols = np.argmax(np.abs(qp.Aeq), axis=1)
    is_unit = True
    for i in range(m):
        row = qp.Aeq[i]
        if abs(row[cols[i]] - 1.0) > 0 or np.count_nonzero(row) != 1:
            is_unit = False
            break
    if is_unit and np.unique(cols).size == m:
        fixed = cols
        free = np.setdiff1d(np.arange(n), fixed)
        x_part = np.zeros(n)
        x_part[fixed] = qp.beq
        Hr = qp.H[np.ix_(free, free)]
        gr = qp.g[free] + qp.H[np.ix_(free, fixed)] @ qp.beq
        C = qp.Aineq[:, free]
        shift = qp.Aineq[:, fixed] @ qp.beq if m else 0.0
        return _Reduced(None, free, x_part, Hr, gr, C, qp.lb - shift, qp.ub - shift,
                        np.arange(qp.Aineq.shape[0]))

    # general path: null-space of Aeq via QR of Aeq'
    Q, R = np.linalg.qr(qp.Aeq.T, mode="complete")
    Rm = R[:m, :m]
    if np.min(np.abs(np.diag(Rm))) < 1e-12 * max(1.0, np.max(np.abs(Rm))):
        raise ValueError("equality rows are linearly dependent")
    x_part = Q[:, :m] @ np.linalg.solve(Rm.T, qp.beq)
    Z = Q[:, m:]
    Hr = Z.T @ qp.H @ Z
    gr = Z.T @ (qp.g + qp.H @ x_part)
    C = qp.Aineq @ Z
    shift = qp.Aineq @ x_part
    return _Reduced(Z, None, x_part, Hr, gr, C, qp.lb - shift, qp.ub - shift,
                    np.arange(qp.Aineq.shape[0]))


def solve_qp(qp: DenseQp, warm: QpSolution | None = None, max_iter: int = 200) -> QpSolution:
    """Solve the QP; see module docstring for the algorithm.

    ``warm`` supplies a previous solution whose active set is tried
    first; the returned primal point does not depend on it (the problem
    is strictly convex).  Status is ``optimal``, ``max_iter``, or
    ``infeasible``; on non-optimal exits the best iterate is returned.
    """
    red = _eliminate(qp)
    nr = red.g.size
    L, reg = _chol_with_escalation(red.H)

    # one-sided constraint list: (row, side) with side +1 for upper
    # C x <= hi, side -1 for lower C x >= lo
    sides = []
    for i in range(red.C.shape[0]):
        if np.isfinite(red.lo[i]):
            sides.append((i, -1))
        if np.isfinite(red.hi[i]):
            sides.append((i, +1))
    n_one = len(sides)

    y = solve_triangular(L.T, solve_triangular(L, -red.g, lower=True), lower=False) \
        if nr else np.zeros(0)
    u = np.zeros(0)
    W: list[int] = []  # indices into sides
    B = np.zeros((nr, 0))  # L^{-1} N for the working set
    n_pivots = 0
    status = "optimal"

    def violation(j):
        i, s = sides[j]
        val = float(red.C[i] @ y)
        return (val - red.hi[i]) if s > 0 else (red.lo[i] - val)

    def drop_index(kk):
        nonlocal B, u
        W.pop(kk)
        B = np.delete(B, kk, axis=1)
        u = np.delete(u, kk)

    warm_pref: list[int] = []
    if warm is not None and warm.active_set:
        lookup = {rs: j for j, rs in enumerate(sides)}
        warm_pref = [lookup[rs] for rs in warm.active_set if rs in lookup]

    while True:
        # pick the next violated constraint (warm-set members first)
        pick, pick_v = -1, _FEAS_TOL
        for j in warm_pref:
            if j in W:
                continue
            v = violation(j)
            if v > pick_v:
                pick, pick_v = j, v
                break
        if pick < 0:
            for j in range(n_one):
                if j in W:
                    continue
                v = violation(j)
                if v > pick_v + 1e-15:
                    pick, pick_v = j, v
        if pick < 0:
            break  # feasible: done
        i, s = sides[pick]
        nvec = s * red.C[i]
        bval = s * (red.hi[i] if s > 0 else red.lo[i])
        # now the constraint reads nvec' y <= bval
        u_pick = 0.0
        while True:
            n_pivots += 1
            if n_pivots > max_iter:
                status = "max_iter"
                break
            w = solve_triangular(L, nvec, lower=True)
            if W:
                # thin QR of B gives both the dual direction r and an
                # orthogonal projection for the primal direction; the
                # curvature n'z = |w_perp|^2 is nonnegative by
                # construction, so linear dependence is detected by the
                # size of the projection residual rather than by a
                # normal-equations solve that can misbehave.
                Qb, Rb = np.linalg.qr(B)
                qw = Qb.T @ w
                w_perp = w - Qb @ qw
                r = solve_triangular(Rb, qw, lower=False)
            else:
                w_perp = w
                r = np.zeros(0)
            denom = float(w_perp @ w_perp)
            viol = float(nvec @ y) - bval
            # dual blocking step
            t1, drop = np.inf, -1
            for kk in range(len(W)):
                if r[kk] > 1e-14:
                    cand = u[kk] / r[kk]
                    if cand < t1 - 1e-15:
                        t1, drop = cand, kk
            if denom <= 1e-22 or np.sqrt(denom) <= 1e-12 * max(1.0, float(np.linalg.norm(w))):
                # candidate normal lies in the span of the working set
                if not np.isfinite(t1):
                    status = "infeasible"
                    break
                u = u - t1 * r
                u_pick += t1
                drop_index(drop)
                continue
            z = solve_triangular(L.T, w_perp, lower=False)
            t2 = viol / denom
            t = min(t1, t2)
            y = y - t * z
            if len(W):
                u = u - t * r
            u_pick += t
            if t2 <= t1:
                W.append(pick)
                B = np.column_stack([B, w])
                u = np.append(u, u_pick)
                break
            drop_index(drop)
        if status != "optimal":
            break

    # map back to full coordinates
    if red.Z is None:
        x = red.x_part.copy()
        x[red.free] = y
    else:
        x = red.x_part + red.Z @ y

    m_rows = qp.Aineq.shape[0]
    mu_lb = np.zeros(m_rows)
    mu_ub = np.zeros(m_rows)
    for kk, j in enumerate(W):
        i, s = sides[j]
        if s > 0:
            mu_ub[i] += u[kk]
        else:
            mu_lb[i] += u[kk]

    # equality multipliers from stationarity: Aeq' lam = -(H x + g + Aineq'(mu_ub - mu_lb))
    lam = np.zeros(qp.Aeq.shape[0])
    if qp.Aeq.shape[0]:
        rhs = -(qp.H @ x + qp.g + qp.Aineq.T @ (mu_ub - mu_lb))
        lam = np.linalg.lstsq(qp.Aeq.T, rhs, rcond=None)[0]

    return QpSolution(
        x=x,
        lam_eq=lam,
        mu_lb=mu_lb,
        mu_ub=mu_ub,
        status=status,
        n_pivots=n_pivots,
        active_set=tuple(sides[j] for j in W),
        reg_added=reg,
    )


def kkt_residuals(qp: DenseQp, sol: QpSolution) -> KktResiduals:
    """KKT residuals of (qp, sol), re-derived from the problem data."""
    x = sol.x
    grad = qp.H @ x + qp.g
    if qp.Aeq.shape[0]:
        grad = grad + qp.Aeq.T @ sol.lam_eq
    if qp.Aineq.shape[0]:
        grad = grad + qp.Aineq.T @ (sol.mu_ub - sol.mu_lb)
    stationarity = float(np.max(np.abs(grad))) if grad.size else 0.0

    eq = qp.Aeq @ x - qp.beq if qp.Aeq.shape[0] else np.zeros(0)
    eq_feas = float(np.max(np.abs(eq))) if eq.size else 0.0

    if qp.Aineq.shape[0]:
        vals = qp.Aineq @ x
        up = vals - qp.ub
        lo = qp.lb - vals
        up_v = np.where(np.isfinite(qp.ub), up, -np.inf)
        lo_v = np.where(np.isfinite(qp.lb), lo, -np.inf)
        ineq_feas = float(max(0.0, np.max(up_v), np.max(lo_v)))
        comp_terms = np.concatenate(
            [
                np.abs(sol.mu_ub * np.where(np.isfinite(qp.ub), up, 0.0)),
                np.abs(sol.mu_lb * np.where(np.isfinite(qp.lb), lo, 0.0)),
            ]
        )
        comp = float(np.max(comp_terms)) if comp_terms.size else 0.0
    else:
        ineq_feas = 0.0
        comp = 0.0
    return KktResiduals(stationarity, eq_feas, ineq_feas, comp)
