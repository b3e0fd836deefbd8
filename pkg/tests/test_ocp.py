"""Pose-error cost blocks, shooting defects, and constraint rows."""

import numpy as np
import pytest

from dqnmpc.dq_algebra import (
    UnitDualQuaternion,
    dq_canonical,
    dq_conj,
    dq_from_pose,
    dq_identity,
    dq_log,
    dq_mul,
    quat_exp,
)
from dqnmpc.dynamics import QuadrotorParams, cl_to_dq_vec, dual_input_from_wrench
from dqnmpc.ocp import (
    DecisionTrajectory,
    DqOcpModel,
    OcpConfig,
    Weights,
    constraint_eval,
    cost_residuals,
    dynamics_defect,
    pose_error,
    stage_cost,
    terminal_cost,
    terminal_residuals,
    twist_error,
)
from dqnmpc.reference import ReferencePoint, TrajectorySpec, reference_at

from _oracles import fd_jac, random_pose, rel_err


def _random_x14(rng):
    x = np.empty(13)
    x[:3] = rng.uniform(-2, 2, 3)
    x[3:6] = rng.normal(scale=1.5, size=3)
    q = rng.normal(size=4)
    x[6:10] = q / np.linalg.norm(q)
    x[10:13] = rng.normal(scale=2.0, size=3)
    return cl_to_dq_vec(x)


def _ref_point(qd, wd=None, ud=None):
    wd = np.zeros(6) if wd is None else np.asarray(wd, float)
    ud = np.zeros(6) if ud is None else np.asarray(ud, float)
    return ReferencePoint(qd=np.asarray(qd, float), wd=wd, ud=ud,
                          x_cl=np.zeros(13), u_cl=np.zeros(4))


def _rich_ref(rng, params):
    spec = TrajectorySpec.circle(radius=1.3, omega=0.9, yaw_mode="tangent")
    return reference_at(spec, float(rng.uniform(0.2, 6.0)), params)


# ---------------------------------------------------------------------------
# errors


def test_pose_error_basic(rng):
    q = dq_from_pose(*random_pose(rng))
    assert np.allclose(pose_error(q, q), dq_identity(), atol=1e-14)
    p = np.array([0.3, -0.7, 1.1])
    e = pose_error(dq_identity(), dq_from_pose(p, [1.0, 0, 0, 0]))
    assert np.allclose(e, dq_from_pose(p, [1.0, 0, 0, 0]), atol=1e-15)


def test_pose_error_left_invariant(rng):
    for _ in range(100):
        qd = dq_from_pose(*random_pose(rng))
        q = dq_from_pose(*random_pose(rng))
        g = dq_from_pose(*random_pose(rng))
        a = pose_error(qd, q)
        b = pose_error(dq_mul(g, qd), dq_mul(g, q))
        assert np.allclose(a, b, atol=1e-12)


def test_pose_error_wrapper_passthrough(rng):
    qd = UnitDualQuaternion.from_array(dq_from_pose(*random_pose(rng)))
    q = UnitDualQuaternion.from_array(dq_from_pose(*random_pose(rng)))
    e = pose_error(qd, q)
    assert isinstance(e, UnitDualQuaternion)
    assert np.allclose(e.as_array(),
                       pose_error(qd.as_array(), q.as_array()), atol=1e-15)


def test_twist_error(rng):
    w = rng.normal(size=6)
    assert np.array_equal(twist_error(w, w), np.zeros(6))
    assert np.array_equal(twist_error(np.zeros(6), w), -w)
    wd = rng.normal(size=6)
    assert np.array_equal(twist_error(wd, w), wd - w)


# ---------------------------------------------------------------------------
# costs


def test_stage_cost_zero_at_reference(params, rng):
    ref = _rich_ref(rng, params)
    x = np.concatenate([ref.qd, ref.wd])
    assert stage_cost(x, ref.ud, ref, Weights()) == pytest.approx(0.0, abs=1e-20)
    assert terminal_cost(x, ref, Weights()) == pytest.approx(0.0, abs=1e-20)


def test_stage_cost_pure_yaw():
    w1 = Weights(Qp=np.eye(6), Qv=np.eye(6), R=np.eye(6))
    ref = _ref_point(dq_identity())
    for th in (0.2, 1.0, 2.5):
        r = quat_exp(np.array([0.0, 0.0, 0.5 * th]))
        x = np.concatenate([dq_from_pose(np.zeros(3), r), np.zeros(6)])
        assert stage_cost(x, np.zeros(6), ref, w1) == pytest.approx((th / 2) ** 2,
                                                                    rel=1e-12)


def test_stage_cost_decomposition(params, rng):
    w = Weights(Qp=np.diag(rng.uniform(1, 5, 6)), Qv=np.diag(rng.uniform(0.5, 2, 6)),
                R=np.diag(rng.uniform(0.1, 1, 6)))
    for _ in range(50):
        ref = _rich_ref(rng, params)
        x = _random_x14(rng)
        u = rng.normal(size=6)
        qe = dq_canonical(dq_mul(dq_conj(ref.qd), x[:8]))
        s = dq_log(qe)
        ln = 0.5 * s.as_array()
        we = ref.wd - x[8:14]
        ue = ref.ud - u
        want = ln @ w.Qp @ ln + we @ w.Qv @ we + ue @ w.R @ ue
        assert stage_cost(x, u, ref, w) == pytest.approx(want, rel=1e-12, abs=1e-12)


def test_cost_left_invariance(params, rng):
    w = Weights()
    for _ in range(50):
        ref = _rich_ref(rng, params)
        x = _random_x14(rng)
        u = rng.normal(size=6)
        g = dq_from_pose(*random_pose(rng))
        ref2 = _ref_point(dq_mul(g, ref.qd), ref.wd, ref.ud)
        x2 = np.concatenate([dq_mul(g, x[:8]), x[8:14]])
        assert stage_cost(x2, u, ref2, w) == pytest.approx(
            stage_cost(x, u, ref, w), rel=1e-10)


def test_cost_positivity(params, rng):
    w = Weights()
    ref = _rich_ref(rng, params)
    for _ in range(100):
        x = _random_x14(rng)
        u = rng.normal(size=6)
        c = stage_cost(x, u, ref, w)
        assert c >= 0.0
        if np.max(np.abs(np.concatenate([ref.qd, ref.wd]) - x)) > 1e-3:
            assert c > 0.0


def test_orientation_sensitivity_no_saturation():
    """The log-based orientation penalty keeps growing out to theta = pi."""
    w1 = Weights(Qp=np.eye(6), Qv=np.eye(6), R=np.eye(6))
    ref = _ref_point(dq_identity())

    def ori_cost(th):
        r = quat_exp(np.array([0.0, 0.0, 0.5 * th]))
        x = np.concatenate([dq_from_pose(np.zeros(3), r), np.zeros(6)])
        return stage_cost(x, np.zeros(6), ref, w1)

    ths = np.linspace(1e-3, np.pi - 1e-6, 400)
    cs = np.array([ori_cost(t) for t in ths])
    assert np.all(np.diff(cs) > 0)
    h = 1e-5
    d_mid = (ori_cost(np.pi / 2 + h) - ori_cost(np.pi / 2 - h)) / (2 * h)
    d_end = (ori_cost(np.pi - 0.01 + h) - ori_cost(np.pi - 0.01 - h)) / (2 * h)
    assert d_end > 0.9 * d_mid


# ---------------------------------------------------------------------------
# residuals and Jacobians


def test_residuals_match_cost(params, rng):
    w = Weights()
    for _ in range(50):
        ref = _rich_ref(rng, params)
        x, u = _random_x14(rng), rng.normal(size=6)
        r, Jx, Ju = cost_residuals(x, u, ref, w)
        assert r.shape == (18,) and Jx.shape == (18, 14) and Ju.shape == (18, 6)
        assert r @ r == pytest.approx(stage_cost(x, u, ref, w), rel=1e-12)
        rN, JxN = terminal_residuals(x, ref, w)
        assert rN @ rN == pytest.approx(terminal_cost(x, ref, w), rel=1e-12)
    ref = _rich_ref(rng, params)
    r, _, _ = cost_residuals(np.concatenate([ref.qd, ref.wd]), ref.ud, ref, w)
    assert np.allclose(r, 0.0, atol=1e-14)


def test_residual_jacobians_match_fd(params, rng):
    w = Weights()
    for _ in range(10):
        ref = _rich_ref(rng, params)
        x, u = _random_x14(rng), rng.normal(size=6)
        r, Jx, Ju = cost_residuals(x, u, ref, w)
        assert rel_err(Jx, fd_jac(lambda xx: cost_residuals(xx, u, ref, w)[0], x)) < 1e-5
        assert rel_err(Ju, fd_jac(lambda uu: cost_residuals(x, uu, ref, w)[0], u)) < 1e-5
        rN, JxN = terminal_residuals(x, ref, w)
        assert rel_err(JxN, fd_jac(lambda xx: terminal_residuals(xx, ref, w)[0], x)) < 1e-5


def test_dynamics_defect_zero_on_image(params, rng, ocp_cfg):
    x = _random_x14(rng)
    u = rng.normal(scale=0.5, size=6)
    u[5] += params.g
    d, A, B = dynamics_defect(x, u, np.zeros(14), ocp_cfg, params)
    x_next = -d  # defect = x_{k+1} - F(x_k, u_k)
    d2, _, _ = dynamics_defect(x, u, x_next, ocp_cfg, params)
    assert np.allclose(d2, 0.0, atol=1e-14)


def test_dynamics_defect_jacobians(params, rng, ocp_cfg):
    for _ in range(10):
        x = _random_x14(rng)
        u = rng.normal(scale=0.5, size=6)
        u[5] += params.g
        _, A, B = dynamics_defect(x, u, np.zeros(14), ocp_cfg, params)

        def F(xx, uu):
            return -dynamics_defect(xx, uu, np.zeros(14), ocp_cfg, params)[0]

        assert rel_err(A, fd_jac(lambda xx: F(xx, u), x)) < 1e-5
        assert rel_err(B, fd_jac(lambda uu: F(x, uu), u)) < 1e-5


def test_dynamics_jacobian_continuity(params):
    """A -> I linearly in dt; the rate constant is set by the gravity
    coupling (2g) in the body-velocity rows."""
    x = np.concatenate([dq_identity(), np.zeros(6)])
    uh = dual_input_from_wrench(params.hover_wrench(), params)
    devs = []
    for dt in (1e-4, 1e-5):
        cfg = OcpConfig(horizon_s=dt * 30, n_nodes=30)
        _, A, _ = dynamics_defect(x, uh, np.zeros(14), cfg, params)
        dev = np.max(np.abs(A - np.eye(14)))
        assert dev < 25.0 * dt
        devs.append(dev)
    assert devs[0] / devs[1] == pytest.approx(10.0, rel=1e-3)


# ---------------------------------------------------------------------------
# inequality rows


def test_constraints_interior(params, ocp_cfg):
    x = np.concatenate([dq_identity(), np.zeros(6)])
    u = np.zeros(6)
    u[5] = params.g
    vals, Jx, Ju = constraint_eval(x, u, ocp_cfg, params)
    assert vals.shape == (14,)
    assert np.all(vals <= 0.0)
    assert vals[0] == pytest.approx(-ocp_cfg.norm_tol)
    assert vals[1] == pytest.approx(-ocp_cfg.norm_tol)


def test_constraints_scaled_primary(params, ocp_cfg):
    x = np.concatenate([dq_identity(), np.zeros(6)])
    x[:4] *= 1.1
    vals, _, _ = constraint_eval(x, np.zeros(6), ocp_cfg, params)
    assert vals[0] == pytest.approx(0.1 - ocp_cfg.norm_tol, rel=1e-12)
    assert vals[1] == pytest.approx(-0.1 - ocp_cfg.norm_tol, rel=1e-12)


def test_constraints_active_bound(params, ocp_cfg):
    x = np.concatenate([dq_identity(), np.zeros(6)])
    _, u_max = ocp_cfg.bounds_for(params)
    vals, _, _ = constraint_eval(x, u_max, ocp_cfg, params)
    assert np.allclose(vals[2:8], 0.0, atol=1e-15)


def test_constraint_norm_gradient(params, ocp_cfg, rng):
    x = _random_x14(rng)
    vals, Jx, Ju = constraint_eval(x, np.zeros(6), ocp_cfg, params)
    fd = fd_jac(lambda xx: constraint_eval(xx, np.zeros(6), ocp_cfg, params)[0], x)
    assert rel_err(Jx, fd) < 1e-6
    assert np.allclose(Ju[2:8], np.eye(6)) and np.allclose(Ju[8:14], -np.eye(6))


def test_default_bounds(params):
    u_min, u_max = OcpConfig().bounds_for(params)
    assert np.allclose(u_max[:3], params.tau_max / params.j_diag)
    assert u_min[5] == params.f_min / params.m
    assert u_max[5] == pytest.approx(params.f_max / params.m)
    assert np.all(u_min < u_max)


# ---------------------------------------------------------------------------
# config and model adapter


def test_weights_validation():
    with pytest.raises(ValueError, match="Qp"):
        Weights(Qp=-np.eye(6))
    w = Weights(Qv=np.full(6, 2.0))  # diagonal shorthand
    assert np.allclose(w.Qv, 2.0 * np.eye(6))
    assert np.allclose(w.QpN, 10.0 * w.Qp)


def test_ocp_config_validation():
    with pytest.raises(ValueError):
        OcpConfig(n_nodes=1)
    with pytest.raises(ValueError):
        OcpConfig(horizon_s=0.0)
    with pytest.raises(ValueError):
        OcpConfig(norm_tol=0.0)
    with pytest.raises(ValueError):
        OcpConfig(u_min=np.zeros(6))
    with pytest.raises(ValueError):
        OcpConfig(u_min=np.zeros(6), u_max=np.zeros(6))
    assert OcpConfig(horizon_s=1.5, n_nodes=30).dt == pytest.approx(0.05)


def test_model_adapter_contract(params, ocp_cfg, hover_refs):
    m = DqOcpModel(params, ocp_cfg, Weights())
    m.set_refs(hover_refs)
    assert m.nx == 14 and m.nu == 6
    assert np.array_equal(m.u_fixed, [False, False, False, True, True, False])
    x = m.ref_state(0)
    u = m.ref_input(0)
    r, Jx, Ju = m.stage_residual(0, x, u)
    assert np.allclose(r, 0.0, atol=1e-12)
    rN, _ = m.terminal_residual(x)
    assert np.allclose(rN, 0.0, atol=1e-12)
    xn, A, B = m.step_jac(x, u)
    assert np.allclose(xn, m.step(x, u), atol=1e-15)
    assert m.stage_cost_val(0, x, u) == pytest.approx(0.0, abs=1e-18)
    assert m.terminal_cost_val(x) == pytest.approx(0.0, abs=1e-18)
    assert np.allclose(m.pin_values(0), u[[3, 4]])
    nrm = m.norm_row(x)
    assert nrm[0] == pytest.approx(0.0, abs=1e-12)
    traj = DecisionTrajectory(np.tile(x, (3, 1)), np.tile(u, (2, 1)))
    assert np.array_equal(traj.copy().states, traj.states)
