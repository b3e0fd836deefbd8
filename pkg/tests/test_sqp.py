"""SQP orchestrator: condensing, globalization, warm starts, and RTI."""

from types import SimpleNamespace

import numpy as np
import pytest

from dqnmpc.dq_algebra import dq_to_pose, dq_unit_defects
from dqnmpc.dynamics import ClassicalState, QuadrotorParams, cl_to_dq_vec, dq_step
from dqnmpc.ocp import DecisionTrajectory, DqOcpModel, OcpConfig, Weights
from dqnmpc.reference import TrajectorySpec, sample_references
from dqnmpc.sqp import (
    SolverConfig,
    _expand,
    build_subproblem,
    cold_start,
    reference_start,
    rti_step,
    shift_warm_start,
    sqp_solve,
)


class _LinearModel:
    """Double integrator with quadratic costs: the SQP must finish it in
    a single iteration, and batch least squares gives the exact answer."""

    nx = 2
    nu = 1

    def __init__(self, n_nodes=12, dt=0.1, goal=(1.0, 0.0)):
        self.cfg = SimpleNamespace(n_nodes=n_nodes, dt=dt, norm_tol=0.0)
        self.A = np.array([[1.0, dt], [0.0, 1.0]])
        self.B = np.array([[0.5 * dt * dt], [dt]])
        self.u_min = np.array([-50.0])
        self.u_max = np.array([50.0])
        self.sq = np.diag([1.0, 0.3])
        self.sr = np.array([[0.4]])
        self.sqN = np.diag([3.0, 1.0])
        self.goal = np.asarray(goal, float)

    def step(self, x, u):
        return self.A @ x + self.B @ u

    def step_jac(self, x, u):
        return self.step(x, u), self.A.copy(), self.B.copy()

    def stage_residual(self, k, x, u):
        r = np.concatenate([self.sq @ (x - self.goal), self.sr @ u])
        Jx = np.vstack([self.sq, np.zeros((1, 2))])
        Ju = np.vstack([np.zeros((2, 1)), self.sr])
        return r, Jx, Ju

    def terminal_residual(self, x):
        return self.sqN @ (x - self.goal), self.sqN.copy()

    def stage_cost_val(self, k, x, u):
        r, _, _ = self.stage_residual(k, x, u)
        return float(r @ r)

    def terminal_cost_val(self, x):
        r, _ = self.terminal_residual(x)
        return float(r @ r)

    def ref_state(self, k):
        return self.goal.copy()

    def ref_input(self, k):
        return np.zeros(1)


def _lq_batch_solution(m: _LinearModel, x0):
    """Stacked least-squares solution of the same LQ problem."""
    N = m.cfg.n_nodes
    nu = N - 1
    rows_M, rows_y = [], []
    # x_k = A^k x0 + sum_j A^(k-1-j) B u_j
    pows = [np.eye(2)]
    for _ in range(N):
        pows.append(m.A @ pows[-1])

    def state_map(k):
        S = np.zeros((2, nu))
        for j in range(k):
            S[:, j : j + 1] = pows[k - 1 - j] @ m.B
        return pows[k] @ x0, S

    for k in range(N - 1):
        xk_const, Sk = state_map(k)
        rows_M.append(m.sq @ Sk)
        rows_y.append(-m.sq @ (xk_const - m.goal))
        Ru = np.zeros((1, nu))
        Ru[0, k] = m.sr[0, 0]
        rows_M.append(Ru)
        rows_y.append(np.zeros(1))
    xN_const, SN = state_map(N - 1)
    rows_M.append(m.sqN @ SN)
    rows_y.append(-m.sqN @ (xN_const - m.goal))
    M, y = np.vstack(rows_M), np.concatenate(rows_y)
    u, *_ = np.linalg.lstsq(M, y, rcond=None)
    return u


def _dq_model(params, n_nodes=30, norm_tol=1e-6, horizon=1.5):
    cfg = OcpConfig(horizon_s=horizon, n_nodes=n_nodes, norm_tol=norm_tol)
    m = DqOcpModel(params, cfg, Weights())
    spec = TrajectorySpec.hover(duration=1e6)
    m.set_refs(sample_references(spec, 0.0, cfg.dt, n_nodes, params))
    return m


def _offset_x0(p=(0.5, 0.0, 0.0), yaw=0.0):
    x = ClassicalState.hover(p).as_vector()
    x[6:10] = [np.cos(yaw / 2), 0.0, 0.0, np.sin(yaw / 2)]
    return cl_to_dq_vec(x)


def _merit_of(model, traj, x0, rho=1e3):
    xs, us = traj.states, traj.inputs
    f = sum(model.stage_cost_val(k, xs[k], us[k]) for k in range(len(us)))
    f += model.terminal_cost_val(xs[-1])
    pen = float(np.sum(np.abs(x0 - xs[0])))
    pen += sum(float(np.sum(np.abs(model.step(xs[k], us[k]) - xs[k + 1])))
               for k in range(len(us)))
    return 0.5 * f + rho * pen


# ---------------------------------------------------------------------------
# linear-quadratic exactness


def test_lq_single_iteration_matches_batch_least_squares():
    m = _LinearModel()
    x0 = np.array([-0.8, 0.4])
    scfg = SolverConfig(levenberg=1e-10)
    traj, stats = sqp_solve(m, x0, scfg)
    assert stats.status == "converged"
    assert stats.sqp_iters == 1
    u_ref = _lq_batch_solution(m, x0)
    assert np.max(np.abs(traj.inputs.ravel() - u_ref)) < 1e-8
    assert np.allclose(traj.states[0], x0, atol=1e-12)
    # rollout consistency: accepted trajectory has (near) zero defects
    for k in range(m.cfg.n_nodes - 1):
        assert np.allclose(m.step(traj.states[k], traj.inputs[k]),
                           traj.states[k + 1], atol=1e-8)


def test_condensed_objective_matches_residual_expansion(params, rng):
    """0.5 z'Hz + g'z equals the change of the Gauss-Newton objective."""
    cases = []
    m_lq = _LinearModel()
    t_lq = cold_start(m_lq, np.array([0.3, -0.2]))
    cases.append((m_lq, t_lq, np.array([0.3, -0.2])))
    m_dq = _dq_model(params)
    x0 = _offset_x0((0.4, -0.2, 0.3), yaw=0.8)
    cases.append((m_dq, cold_start(m_dq, x0), x0))

    scfg = SolverConfig()
    for model, traj, x0 in cases:
        sub = build_subproblem(model, traj, x0, scfg)
        N, nx, nu = traj.states.shape[0], model.nx, model.nu
        H0 = sub.qp.H - scfg.levenberg * np.eye(sub.qp.H.shape[0])

        def gn(z):
            dxs, dus = _expand(sub, z, N, nx, nu)
            tot = 0.0
            for k, (r, Jx, Ju) in enumerate(sub.stage_resid):
                rr = r + Jx @ dxs[k] + Ju @ dus[k]
                tot += rr @ rr
            rN, JxN = sub.term_resid
            rr = rN + JxN @ dxs[N - 1]
            return 0.5 * (tot + rr @ rr)

        for _ in range(5):
            z = rng.normal(scale=1e-2, size=H0.shape[0])
            lhs = gn(z) - gn(np.zeros_like(z))
            rhs = 0.5 * z @ H0 @ z + sub.qp.g @ z
            assert lhs == pytest.approx(rhs, rel=1e-9, abs=1e-12)


def test_build_subproblem_shape_check(params):
    m = _dq_model(params)
    bad = DecisionTrajectory(np.zeros((5, 14)), np.zeros((5, 6)))
    with pytest.raises(ValueError):
        build_subproblem(m, bad, np.zeros(14), SolverConfig())


# ---------------------------------------------------------------------------
# full SQP on the pose OCP


def test_hover_warm_start_converges_immediately(params):
    m = _dq_model(params)
    x0 = m.ref_state(0)
    warm = reference_start(m)
    traj, stats = sqp_solve(m, x0, SolverConfig(), warm=warm)
    assert stats.status == "converged"
    assert stats.sqp_iters == 1
    assert np.max(np.abs(traj.states - warm.states)) < 1e-8
    assert np.max(np.abs(traj.inputs - warm.inputs)) < 1e-8
    assert stats.kkt.max() < 1e-6


def test_regulation_solve_converges(params):
    m = _dq_model(params)
    x0 = _offset_x0((1.0, -0.5, 0.5), yaw=2.6)
    traj, stats = sqp_solve(m, x0, SolverConfig())
    assert stats.status == "converged"
    assert stats.kkt.max() < 1e-6
    assert stats.sqp_iters <= 50
    # trajectory ends near the goal pose
    p_end, _ = dq_to_pose(traj.states[-1, :8])
    assert np.linalg.norm(p_end) < 0.2


def test_merit_nonincreasing_over_iterations(params):
    m = _dq_model(params)
    x0 = _offset_x0((1.5, 0.0, 0.8), yaw=2.6)
    merits = []
    for cap in range(1, 7):
        traj, stats = sqp_solve(m, x0, SolverConfig(max_sqp_iter=cap))
        assert stats.sqp_iters <= cap
        merits.append(_merit_of(m, traj, x0))
    for a, b in zip(merits, merits[1:]):
        assert b <= a + 1e-10


def test_solution_stays_on_manifold(params):
    m = _dq_model(params)
    traj, stats = sqp_solve(m, _offset_x0((1.0, 0.4, -0.3), yaw=1.9), SolverConfig())
    assert stats.status == "converged"
    for x in traj.states:
        nd, od = dq_unit_defects(x[:8])
        assert nd < 1e-9 and od < 1e-9


def test_solver_determinism(params):
    m = _dq_model(params)
    x0 = _offset_x0((0.9, -0.6, 0.2), yaw=1.2)
    t1, s1 = sqp_solve(m, x0, SolverConfig())
    t2, s2 = sqp_solve(m, x0, SolverConfig())
    assert np.array_equal(t1.states, t2.states)
    assert np.array_equal(t1.inputs, t2.inputs)
    assert s1.sqp_iters == s2.sqp_iters
    assert s1.qp_iters_total == s2.qp_iters_total
    assert s1.kkt.as_dict() == s2.kkt.as_dict()


# ---------------------------------------------------------------------------
# initialization strategies


def test_cold_start_geodesic_blend(params):
    m = _dq_model(params)
    x0 = _offset_x0((2.0, 1.0, -0.5), yaw=2.9)
    traj = cold_start(m, x0)
    assert np.array_equal(traj.states[0], x0)
    for x in traj.states:
        nd, od = dq_unit_defects(x[:8])
        assert nd < 1e-12 and od < 1e-12
    # last node reaches the terminal reference
    assert np.max(np.abs(traj.states[-1] - m.ref_state(m.cfg.n_nodes - 1))) < 1e-9
    assert np.array_equal(traj.inputs[3], m.ref_input(3))


def test_cold_start_tiling_fallback():
    m = _LinearModel()
    x0 = np.array([0.7, -0.1])
    traj = cold_start(m, x0)
    assert np.all(traj.states == x0)
    assert np.all(traj.inputs == 0.0)


def test_reference_start_and_shift(params):
    m = _dq_model(params, n_nodes=8)
    traj = reference_start(m)
    assert traj.states.shape == (8, 14) and traj.inputs.shape == (7, 6)
    traj.states[:] = np.arange(8)[:, None]
    traj.inputs[:] = np.arange(7)[:, None]
    sh = shift_warm_start(traj)
    assert np.all(sh.states[:-1] == traj.states[1:])
    assert np.all(sh.states[-1] == traj.states[-1])
    assert np.all(sh.inputs[:-1] == traj.inputs[1:])
    assert np.all(sh.inputs[-1] == traj.inputs[-1])


# ---------------------------------------------------------------------------
# real-time iteration


def test_rti_at_reference_returns_reference_input(params):
    m = _dq_model(params)
    x0 = m.ref_state(0)
    u1, warm, stats = rti_step(m, x0, SolverConfig(mode="rti"), reference_start(m))
    assert stats.status == "rti"
    assert stats.sqp_iters == 1
    assert np.max(np.abs(u1 - m.ref_input(0))) < 1e-8
    assert warm.states.shape == (m.cfg.n_nodes, 14)


def test_rti_closed_loop_regulates(params):
    m = _dq_model(params)
    scfg = SolverConfig(mode="rti")
    x = _offset_x0((0.5, 0.0, 0.0))
    warm = None
    dt = m.cfg.dt
    for _ in range(int(3.0 / dt)):
        u, warm, stats = rti_step(m, x, scfg, warm)
        assert stats.status == "rti"
        x = dq_step(x, u, dt, QuadrotorParams())
    p, _ = dq_to_pose(x[:8])
    assert np.linalg.norm(p) < 0.01


def test_shifted_warm_start_beats_reference_start(params):
    m = _dq_model(params)
    scfg = SolverConfig(mode="rti")
    x = _offset_x0((0.5, -0.3, 0.2))
    u, warm, _ = rti_step(m, x, scfg, None)
    x = dq_step(x, u, m.cfg.dt, QuadrotorParams())

    def total_defect(traj):
        d = float(np.sum(np.abs(x - traj.states[0])))
        for k in range(traj.inputs.shape[0]):
            d += float(np.sum(np.abs(m.step(traj.states[k], traj.inputs[k])
                                     - traj.states[k + 1])))
        return d

    assert total_defect(warm) < total_defect(reference_start(m))


# ---------------------------------------------------------------------------
# config


def test_solver_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(mode="pdip")
    with pytest.raises(ValueError):
        SolverConfig(step_rule="exact")
    with pytest.raises(ValueError):
        SolverConfig(tol_kkt=0.0)
    with pytest.raises(ValueError):
        SolverConfig(max_sqp_iter=0)
    assert SolverConfig().mode == "full_sqp"
