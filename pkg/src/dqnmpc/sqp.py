"""Gauss-Newton SQP over the multiple-shooting OCP.

Each iteration linearizes the model (cost residuals, dynamics, norm
band) around the current shooting trajectory, condenses the defects so
the QP decision vector is [dx_1; du_1; ...; du_{N-1}], solves the dense
QP, and expands the solution back to state increments.  Two modes:

* ``full_sqp`` iterates to a KKT tolerance with an l1-merit
  backtracking line search, escalating the Levenberg shift whenever a
  direction fails to make merit progress (used for the iteration-count
  and KKT-residual studies);
* ``rti`` performs exactly one iteration with a full step and a
  shifted warm start (used for closed-loop tracking at rate).

The orchestrator is model-agnostic: anything exposing the small
interface used below (step/step_jac, stage residuals, optional norm
row, bounds and pinned channels) runs through the same code path, which
is how the decoupled baseline controller shares this machinery.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .ocp import DecisionTrajectory
from .qp import DenseQp, KktResiduals, QpSolution, solve_qp

__all__ = ["SolverConfig", "SolveStats", "build_subproblem", "cold_start",
           "reference_start", "shift_warm_start", "sqp_solve", "rti_step"]


@dataclass(frozen=True)
class SolverConfig:
    mode: str = "full_sqp"  # full_sqp | rti
    max_sqp_iter: int = 50
    tol_kkt: float = 1e-6
    step_rule: str = "backtracking"  # backtracking | full_step
    levenberg: float = 1e-8
    merit_penalty: float = 1e3
    qp_max_iter: int = 200
    armijo_c: float = 1e-4
    backtrack_beta: float = 0.5

    def __post_init__(self):
        if self.mode not in ("full_sqp", "rti"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.step_rule not in ("backtracking", "full_step"):
            raise ValueError(f"unknown step_rule {self.step_rule!r}")
        if self.tol_kkt <= 0 or self.max_sqp_iter < 1:
            raise ValueError("tolerances and iteration caps must be positive")


@dataclass
class SolveStats:
    sqp_iters: int
    kkt: KktResiduals
    qp_iters_total: int
    solve_time: float
    status: str  # converged | max_iter | qp_failed | rti


class _Subproblem:
    """Condensed QP plus the expansion/KKT bookkeeping."""

    __slots__ = ("qp", "E", "c", "defects", "beq_pin", "norm_vals", "norm_nodes",
                 "bound_rows", "n_norm", "g", "stage_resid", "term_resid")

    def __init__(self):
        self.norm_nodes = []
        self.stage_resid = []


def _fixed_mask(model) -> np.ndarray:
    mask = getattr(model, "u_fixed", None)
    if mask is None:
        return np.zeros(model.nu, bool)
    return mask


def build_subproblem(model, traj: DecisionTrajectory, x0: np.ndarray,
                     scfg: SolverConfig) -> _Subproblem:
    """Linearize and condense around ``traj`` with measured state ``x0``."""
    xs, us = traj.states, traj.inputs
    N = xs.shape[0]
    if us.shape[0] != N - 1:
        raise ValueError("inputs must have one fewer row than states")
    nx, nu = model.nx, model.nu
    nz = nx + (N - 1) * nu

    E = np.zeros((N, nx, nz))
    E[0, :, :nx] = np.eye(nx)
    c = np.zeros((N, nx))
    defects = np.zeros((N - 1, nx))

    H = np.zeros((nz, nz))
    g = np.zeros(nz)

    has_norm = hasattr(model, "norm_row")
    stage_resid = []
    norm_rows = []
    norm_lo = []
    norm_hi = []
    norm_vals = []
    norm_nodes = []
    norm_tol = model.cfg.norm_tol if has_norm else 0.0

    def band_rows(x):
        rows = [model.norm_row(x)]
        if hasattr(model, "ortho_row"):
            rows.append(model.ortho_row(x))
        return rows

    for k in range(N - 1):
        na = nx + k * nu  # active column count of E[k]
        Ek = E[k, :, :na]

        r, Jx, Ju = model.stage_residual(k, xs[k], us[k])
        stage_resid.append((r, Jx, Ju))
        G = np.zeros((r.size, na + nu))
        G[:, :na] = Jx @ Ek
        G[:, na:] = Ju
        h = r + Jx @ c[k]
        H[: na + nu, : na + nu] += G.T @ G
        g[: na + nu] += G.T @ h

        xn, A, B = model.step_jac(xs[k], us[k])
        defects[k] = xn - xs[k + 1]
        E[k + 1, :, :na] = A @ Ek
        E[k + 1, :, na: na + nu] = B
        c[k + 1] = A @ c[k] + defects[k]

        if has_norm and k > 0:
            for v, jrow in band_rows(xs[k]):
                shift = v + float(jrow @ c[k])
                norm_rows.append((k, jrow))
                norm_lo.append(-norm_tol - shift)
                norm_hi.append(norm_tol - shift)
                norm_vals.append(v)
                norm_nodes.append(k)

    rN, JxN = model.terminal_residual(xs[N - 1])
    GN = JxN @ E[N - 1]
    H += GN.T @ GN
    g += GN.T @ (rN + JxN @ c[N - 1])
    if has_norm:
        for v, jrow in band_rows(xs[N - 1]):
            shift = v + float(jrow @ c[N - 1])
            norm_rows.append((N - 1, jrow))
            norm_lo.append(-norm_tol - shift)
            norm_hi.append(norm_tol - shift)
            norm_vals.append(v)
            norm_nodes.append(N - 1)

    H[np.diag_indices_from(H)] += scfg.levenberg

    # equalities: initial-state pin plus structurally fixed input channels
    fixed = _fixed_mask(model)
    n_fix = int(fixed.sum())
    n_eq = nx + (N - 1) * n_fix
    Aeq = np.zeros((n_eq, nz))
    beq = np.zeros(n_eq)
    Aeq[:nx, :nx] = np.eye(nx)
    beq[:nx] = x0 - xs[0]
    row = nx
    fix_idx = np.flatnonzero(fixed)
    for k in range(N - 1):
        pins = model.pin_values(k) if hasattr(model, "pin_values") else np.zeros(n_fix)
        for j, ch in enumerate(fix_idx):
            Aeq[row, nx + k * nu + ch] = 1.0
            beq[row] = pins[j] - us[k, ch]
            row += 1

    # inequalities: norm-band rows through the sensitivities, then
    # simple bound rows on the free input channels
    free_idx = np.flatnonzero(~fixed)
    n_ineq = len(norm_rows) + (N - 1) * free_idx.size
    Aineq = np.zeros((n_ineq, nz))
    lb = np.empty(n_ineq)
    ub = np.empty(n_ineq)
    for i, (k, jrow) in enumerate(norm_rows):
        na = nx + k * nu if k < N - 1 else nz
        Aineq[i, :na] = jrow @ E[k, :, :na]
        lb[i] = norm_lo[i]
        ub[i] = norm_hi[i]
    row = len(norm_rows)
    for k in range(N - 1):
        for ch in free_idx:
            Aineq[row, nx + k * nu + ch] = 1.0
            lb[row] = model.u_min[ch] - us[k, ch]
            ub[row] = model.u_max[ch] - us[k, ch]
            row += 1

    sub = _Subproblem()
    sub.qp = DenseQp(H, g, Aeq, beq, Aineq, lb, ub)
    sub.E = E
    sub.c = c
    sub.defects = defects
    sub.beq_pin = beq
    sub.norm_vals = np.asarray(norm_vals)
    sub.norm_nodes = norm_nodes
    sub.n_norm = len(norm_rows)
    sub.g = g
    sub.stage_resid = stage_resid
    sub.term_resid = (rN, JxN)
    return sub


def _nlp_kkt(model, sub: _Subproblem, traj: DecisionTrajectory,
             sol: QpSolution, norm_tol: float) -> KktResiduals:
    """KKT residuals of the nonlinear problem at the current iterate,
    using the subproblem's multipliers (the QP gradient at z = 0)."""
    qp = sub.qp
    grad = qp.g + qp.Aeq.T @ sol.lam_eq
    if qp.Aineq.shape[0]:
        grad = grad + qp.Aineq.T @ (sol.mu_ub - sol.mu_lb)
    stationarity = float(np.max(np.abs(grad)))

    eq = float(np.max(np.abs(sub.beq_pin))) if sub.beq_pin.size else 0.0
    if sub.defects.size:
        eq = max(eq, float(np.max(np.abs(sub.defects))))

    us = traj.inputs
    fixed = _fixed_mask(model)
    free_idx = np.flatnonzero(~fixed)
    ineq = 0.0
    comp = 0.0
    for i in range(sub.n_norm):
        v = sub.norm_vals[i]
        ineq = max(ineq, abs(v) - norm_tol)
        comp = max(comp, abs(sol.mu_ub[i] * (v - norm_tol)),
                   abs(sol.mu_lb[i] * (-norm_tol - v)))
    row = sub.n_norm
    for k in range(us.shape[0]):
        for ch in free_idx:
            lo = model.u_min[ch] - us[k, ch]
            hi = model.u_max[ch] - us[k, ch]
            ineq = max(ineq, -hi, lo)
            comp = max(comp, abs(sol.mu_ub[row] * hi), abs(sol.mu_lb[row] * lo))
            row += 1
    return KktResiduals(stationarity, eq, max(0.0, ineq), comp)


def _post_step_kkt(model, sub: _Subproblem, sol: QpSolution,
                   traj: DecisionTrajectory, x0: np.ndarray,
                   norm_tol: float) -> KktResiduals:
    """Residuals after a full step: stationarity/complementarity from
    the solved subproblem at its optimum, equality/inequality
    feasibility re-evaluated on the stepped nonlinear trajectory."""
    from .qp import kkt_residuals

    qp_kkt = kkt_residuals(sub.qp, sol)
    xs, us = traj.states, traj.inputs
    eq = float(np.max(np.abs(x0 - xs[0])))
    for k in range(us.shape[0]):
        eq = max(eq, float(np.max(np.abs(model.step(xs[k], us[k]) - xs[k + 1]))))
    ineq = 0.0
    if hasattr(model, "norm_row"):
        for k in range(xs.shape[0]):
            v, _ = model.norm_row(xs[k])
            ineq = max(ineq, abs(v) - norm_tol)
            if hasattr(model, "ortho_row"):
                v, _ = model.ortho_row(xs[k])
                ineq = max(ineq, abs(v) - norm_tol)
    fixed = _fixed_mask(model)
    free_idx = np.flatnonzero(~fixed)
    if free_idx.size:
        ineq = max(ineq, float(np.max(us[:, free_idx] - model.u_max[free_idx])),
                   float(np.max(model.u_min[free_idx] - us[:, free_idx])))
    return KktResiduals(qp_kkt.stationarity, eq, max(0.0, ineq), qp_kkt.comp)


def _merit(model, traj: DecisionTrajectory, x0: np.ndarray, rho: float) -> float:
    """Gauss-Newton objective (half the summed costs, the scaling whose
    multipliers the penalty must dominate) plus an l1 penalty on the
    defects and the initial-state gap."""
    xs, us = traj.states, traj.inputs
    N = xs.shape[0]
    f = 0.0
    pen = float(np.sum(np.abs(x0 - xs[0])))
    for k in range(N - 1):
        f += model.stage_cost_val(k, xs[k], us[k])
        pen += float(np.sum(np.abs(model.step(xs[k], us[k]) - xs[k + 1])))
    f += model.terminal_cost_val(xs[N - 1])
    return 0.5 * f + rho * pen


def _cost_slope(sub: _Subproblem, dxs, dus) -> float:
    """Directional derivative of the merit's cost term along the step."""
    s = 0.0
    for k, (r, Jx, Ju) in enumerate(sub.stage_resid):
        s += float(r @ (Jx @ dxs[k] + Ju @ dus[k]))
    rN, JxN = sub.term_resid
    s += float(rN @ (JxN @ dxs[-1]))
    return s


def _expand(sub: _Subproblem, z: np.ndarray, N: int, nx: int, nu: int):
    dxs = np.empty((N, nx))
    for k in range(N):
        na = min(nx + k * nu, z.size)
        dxs[k] = sub.E[k, :, :na] @ z[:na] + sub.c[k]
    dus = z[nx:].reshape(N - 1, nu)
    return dxs, dus


def _apply(model, traj: DecisionTrajectory, dxs, dus, alpha: float) -> DecisionTrajectory:
    xs = traj.states + alpha * dxs
    if hasattr(model, "normalize_state"):
        for k in range(xs.shape[0]):
            xs[k] = model.normalize_state(xs[k])
    return DecisionTrajectory(xs, traj.inputs + alpha * dus)


def cold_start(model, x0: np.ndarray) -> DecisionTrajectory:
    """Geodesic blend from the measured state toward the terminal
    reference, with reference inputs.

    Node 0 sits exactly at x0, so the pinned initial increment is zero
    and the banded unit-norm rows stay feasible — a fully
    reference-initialized guess cannot guarantee that when x0 is far
    from the reference (the pinned increment is then a chord between
    two unit quaternions, and no input can cancel its norm defect).
    Interior nodes follow the model's pose interpolation toward the
    goal, which hands the first linearization a trajectory that already
    arrives instead of a wall of terminal error; far-pose solves that
    limit-cycle from a tiled guess converge from this one.  Models
    without an interpolation hook fall back to tiling x0.
    """
    N = model.cfg.n_nodes
    x0 = np.asarray(x0, float)
    if hasattr(model, "blend_to_ref"):
        xs = np.stack([x0 if k == 0 else model.blend_to_ref(x0, k / (N - 1))
                       for k in range(N)])
    else:
        xs = np.tile(x0, (N, 1))
    us = np.stack([model.ref_input(k) for k in range(N - 1)])
    return DecisionTrajectory(xs, us)


def reference_start(model) -> DecisionTrajectory:
    """States and inputs taken from the reference (RTI bootstrap)."""
    N = model.cfg.n_nodes
    xs = np.stack([model.ref_state(k) for k in range(N)])
    us = np.stack([model.ref_input(k) for k in range(N - 1)])
    return DecisionTrajectory(xs, us)


def sqp_solve(model, x0, scfg: SolverConfig,
              warm: DecisionTrajectory | None = None):
    """Full SQP to convergence; returns (trajectory, SolveStats)."""
    t_start = time.perf_counter()
    x0 = np.asarray(x0, float)
    traj = warm.copy() if warm is not None else cold_start(model, x0)
    N, nx, nu = traj.states.shape[0], model.nx, model.nu
    norm_tol = model.cfg.norm_tol if hasattr(model, "norm_row") else 0.0

    qp_iters = 0
    kkt = KktResiduals(np.inf, np.inf, np.inf, np.inf)
    status = "max_iter"
    prev_sol: QpSolution | None = None
    iters = 0
    rho = scfg.merit_penalty
    sigma = scfg.levenberg  # Levenberg shift, escalated on bad directions
    can_cold_restart = warm is not None

    for _ in range(scfg.max_sqp_iter):
        sub = build_subproblem(model, traj, x0, scfg)
        H_base = None
        first_solve = True
        accepted = False
        alpha = 1.0
        sol = None

        while True:  # damping escalation over one linearization
            if sigma > scfg.levenberg:
                if H_base is None:
                    H_base = sub.qp.H.copy()
                sub.qp.H = H_base + (sigma - scfg.levenberg) * np.eye(H_base.shape[0])
            sol = solve_qp(sub.qp, warm=prev_sol, max_iter=scfg.qp_max_iter)
            qp_iters += sol.n_pivots
            if first_solve:
                iters += 1
            if sol.status == "infeasible":
                status = "qp_failed"
                break
            can_cold_restart = False
            prev_sol = sol
            if first_solve:
                first_solve = False
                kkt = _nlp_kkt(model, sub, traj, sol, norm_tol)
                if kkt.max() < scfg.tol_kkt:
                    status = "converged"
                    break

            dxs, dus = _expand(sub, sol.x, N, nx, nu)
            if scfg.step_rule == "full_step":
                traj = _apply(model, traj, dxs, dus, 1.0)
                alpha, accepted = 1.0, True
                break

            phi0 = _merit(model, traj, x0, rho)
            viol = float(np.sum(np.abs(sub.beq_pin[:nx]))) \
                + float(np.sum(np.abs(sub.defects)))
            D = _cost_slope(sub, dxs, dus) - rho * viol
            best = None
            if D < 0.0:
                alpha = 1.0
                while alpha > 1e-4:
                    cand = _apply(model, traj, dxs, dus, alpha)
                    phi = _merit(model, cand, x0, rho)
                    if phi <= phi0 + scfg.armijo_c * alpha * D:
                        traj, accepted = cand, True
                        break
                    if best is None or phi < best[0]:
                        best = (phi, alpha, cand)
                    alpha *= scfg.backtrack_beta
                if accepted:
                    break
            # the direction is not usable at this damping (merit ascent
            # or Armijo exhausted): shorten and bend it toward steepest
            # descent by raising the shift, reusing the linearization
            if sigma < 1e6:
                sigma = max(sigma * 100.0, 1e-4)
                continue
            # fully damped and still no Armijo pass: take a plain merit
            # decrease if one was seen, otherwise stop
            if best is not None and best[0] < phi0 - 1e-12:
                _, alpha, traj = best
                accepted = True
            break

        if status == "qp_failed" and can_cold_restart:
            # a stale warm start can pin the first state across a gap
            # the banded norm rows cannot absorb; start over locally
            traj = cold_start(model, x0)
            prev_sol = None
            status = "max_iter"
            can_cold_restart = False
            continue
        if status in ("qp_failed", "converged"):
            break
        if not accepted:
            break  # no progress possible: report max_iter with best-so-far
        sigma = max(scfg.levenberg, 0.1 * sigma)

        if alpha == 1.0:
            # the subproblem's own residuals, with feasibility
            # re-evaluated nonlinearly at the stepped iterate, detect
            # convergence one linearization early when the model was
            # (near-)exact — a linear-quadratic problem finishes here
            # on its first iteration
            kkt_post = _post_step_kkt(model, sub, sol, traj, x0, norm_tol)
            if kkt_post.max() < scfg.tol_kkt:
                kkt = kkt_post
                status = "converged"
                break

    return traj, SolveStats(
        sqp_iters=iters,
        kkt=kkt,
        qp_iters_total=qp_iters,
        solve_time=time.perf_counter() - t_start,
        status=status,
    )


def shift_warm_start(traj: DecisionTrajectory) -> DecisionTrajectory:
    """Advance the horizon one interval, duplicating the last stage."""
    xs = np.vstack([traj.states[1:], traj.states[-1:]])
    us = np.vstack([traj.inputs[1:], traj.inputs[-1:]]) if traj.inputs.shape[0] > 1 \
        else traj.inputs.copy()
    return DecisionTrajectory(xs, us)


def rti_step(model, x0, scfg: SolverConfig, warm: DecisionTrajectory | None = None):
    """One real-time iteration: linearize, solve, full step, shift.

    Returns (u_first, shifted_warm_start, SolveStats).  On QP failure
    the previous warm input is held and the failure is flagged.
    """
    t_start = time.perf_counter()
    x0 = np.asarray(x0, float)
    traj = warm.copy() if warm is not None else reference_start(model)
    N, nx, nu = traj.states.shape[0], model.nx, model.nu
    norm_tol = model.cfg.norm_tol if hasattr(model, "norm_row") else 0.0

    sub = build_subproblem(model, traj, x0, scfg)
    sol = solve_qp(sub.qp, max_iter=scfg.qp_max_iter)
    if sol.status == "infeasible":
        stats = SolveStats(1, KktResiduals(np.inf, np.inf, np.inf, np.inf),
                           sol.n_pivots, time.perf_counter() - t_start, "qp_failed")
        return traj.inputs[0].copy(), shift_warm_start(traj), stats

    kkt = _nlp_kkt(model, sub, traj, sol, norm_tol)
    dxs, dus = _expand(sub, sol.x, N, nx, nu)
    traj = _apply(model, traj, dxs, dus, 1.0)
    u_first = traj.inputs[0].copy()
    stats = SolveStats(1, kkt, sol.n_pivots, time.perf_counter() - t_start, "rti")
    return u_first, shift_warm_start(traj), stats
