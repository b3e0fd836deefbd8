"""Rigid-body dynamics in both state forms, checked against hand oracles."""

import numpy as np
import pytest

from dqnmpc.dq_algebra import dq_identity, dq_to_pose, dq_unit_defects, quat_mul
from dqnmpc.dynamics import (
    ClassicalState,
    DisturbanceConfig,
    DqState,
    QuadrotorParams,
    WrenchInput,
    classical_derivative,
    classical_step,
    cl_to_dq_vec,
    convert_state,
    convert_state_inverse,
    dq_derivative,
    dq_step,
    dq_to_cl_vec,
    dual_input_from_wrench,
    plant_step,
    rk4_step,
    wrench_from_dual_input,
)

from _oracles import euler_omega_dot, random_unit_quat, rot_matrix


def _random_cl(rng, speed=2.0):
    x = np.empty(13)
    x[:3] = rng.uniform(-3, 3, 3)
    x[3:6] = rng.normal(scale=speed, size=3)
    x[6:10] = random_unit_quat(rng)
    x[10:13] = rng.normal(scale=3.0, size=3)
    return x


# ---------------------------------------------------------------------------
# derivatives


def test_classical_hover_equilibrium(params):
    x = ClassicalState.hover((1.0, -2.0, 3.0)).as_vector()
    dx = classical_derivative(x, params.hover_wrench(), params)
    assert np.allclose(dx, 0.0, atol=1e-14)


def test_classical_free_fall(params):
    x = ClassicalState.hover().as_vector()
    dx = classical_derivative(x, np.zeros(4), params)
    assert np.allclose(dx[3:6], [0, 0, -9.81], atol=1e-14)
    assert np.allclose(np.delete(dx, [3, 4, 5]), 0.0, atol=1e-14)


def test_classical_omega_dot_matches_euler(params, rng):
    for _ in range(100):
        x = _random_cl(rng)
        u = np.concatenate([[5.0], rng.normal(scale=0.3, size=3)])
        dx = classical_derivative(x, u, params)
        ref = euler_omega_dot(x[10:13], u[1:4], params.j_diag)
        assert np.allclose(dx[10:13], ref, atol=1e-12)


def test_dual_input_map(params):
    u_hat = dual_input_from_wrench(params.hover_wrench(), params)
    assert np.allclose(u_hat, [0, 0, 0, 0, 0, params.g], atol=1e-14)
    assert np.array_equal(dual_input_from_wrench(np.zeros(4), params), np.zeros(6))


def test_dual_input_roundtrip(params, rng):
    for _ in range(100):
        u = np.concatenate([[rng.uniform(0, 20)], rng.normal(scale=0.5, size=3)])
        back = wrench_from_dual_input(dual_input_from_wrench(u, params), params)
        assert np.allclose(back, u, atol=1e-12)


def test_dq_hover_equilibrium(params):
    x = np.concatenate([dq_identity(), np.zeros(6)])
    u_hat = dual_input_from_wrench(params.hover_wrench(), params)
    assert np.allclose(dq_derivative(x, u_hat, params), 0.0, atol=1e-14)


def test_dq_constant_twist_pose_rate(params):
    # identity pose: primary rate is om/2, dual rate is vb/2
    om, vb = np.array([0.1, -0.2, 0.3]), np.array([1.0, 2.0, -0.5])
    x = np.concatenate([dq_identity(), om, vb])
    u_hat = dual_input_from_wrench(params.hover_wrench(), params)
    dx = dq_derivative(x, u_hat, params)
    assert np.allclose(dx[:4], 0.5 * np.concatenate([[0.0], om]), atol=1e-14)
    assert np.allclose(dx[4:8], 0.5 * np.concatenate([[0.0], vb]), atol=1e-14)


@pytest.mark.parametrize("drag", [0.0, 0.1])
def test_dq_derivative_matches_classical(drag, rng):
    """Both vector fields describe one motion, related by the state map."""
    par = QuadrotorParams(drag_c=drag)
    for _ in range(100):
        x_cl = _random_cl(rng)
        u = np.concatenate([[rng.uniform(0, 20)], rng.normal(scale=0.3, size=3)])
        x_dq = cl_to_dq_vec(x_cl)
        f_cl = classical_derivative(x_cl, u, par)
        f_dq = dq_derivative(x_dq, dual_input_from_wrench(u, par), par)

        R = rot_matrix(x_cl[6:10])
        om, vb = x_dq[8:11], x_dq[11:14]
        assert np.allclose(f_dq[:4], f_cl[6:10], atol=1e-12)          # pose rate
        assert np.allclose(f_dq[8:11], f_cl[10:13], atol=1e-12)       # body rates
        assert np.allclose(R @ vb, f_cl[:3], atol=1e-12)              # velocity map
        assert np.allclose(R @ (np.cross(om, vb) + f_dq[11:14]),
                           f_cl[3:6], atol=1e-11)                     # acceleration
        p, r = dq_to_pose(x_dq[:8])
        d_dual = 0.5 * (quat_mul(np.concatenate([[0.0], f_cl[:3]]), r)
                        + quat_mul(np.concatenate([[0.0], p]), f_dq[:4]))
        assert np.allclose(f_dq[4:8], d_dual, atol=1e-12)


# ---------------------------------------------------------------------------
# integration


def test_rk4_generic_field():
    x = np.array([0.5, -1.0, 2.0])
    assert np.array_equal(rk4_step(lambda x, u: np.zeros(3), x, None, 0.1), x)
    # xdot = x over dt = 0.1: classic RK4 value
    out = rk4_step(lambda x, u: x, np.array([1.0]), None, 0.1)
    assert abs(out[0] - np.exp(0.1)) < 1e-7
    assert out[0] == pytest.approx(1.1051708333333332, abs=1e-15)
    with pytest.raises(ValueError):
        rk4_step(lambda x, u: x, np.array([1.0]), None, 0.0)


def test_step_kernels_match_generic_rk4(params, rng):
    for _ in range(20):
        x_cl = _random_cl(rng)
        u = np.concatenate([[rng.uniform(0, 20)], rng.normal(scale=0.3, size=3)])
        a = classical_step(x_cl, u, 0.01, params)
        b = rk4_step(lambda x, uu: classical_derivative(x, uu, params), x_cl, u, 0.01)
        assert np.allclose(a, b, atol=1e-13)
        x_dq = cl_to_dq_vec(x_cl)
        uh = dual_input_from_wrench(u, params)
        a = dq_step(x_dq, uh, 0.01, params)
        b = rk4_step(lambda x, uu: dq_derivative(x, uu, params), x_dq, uh, 0.01)
        assert np.allclose(a, b, atol=1e-13)


def test_both_forms_integrate_identically(params, rng):
    """Short rollouts in either representation land on the same state."""
    x_cl = _random_cl(rng, speed=1.0)
    x_dq = cl_to_dq_vec(x_cl)
    u = np.array([11.0, 0.02, -0.01, 0.005])
    uh = dual_input_from_wrench(u, params)
    for _ in range(200):
        x_cl = classical_step(x_cl, u, 1e-3, params)
        x_dq = dq_step(x_dq, uh, 1e-3, params)
    back = dq_to_cl_vec(x_dq)
    assert np.allclose(back[:3], x_cl[:3], atol=1e-9)
    qe = quat_mul(np.array([1, -1, -1, -1.0]) * x_cl[6:10], back[6:10])
    assert abs(abs(qe[0]) - 1.0) < 1e-9


def test_state_conversions(params, rng):
    hover = ClassicalState.hover((0.5, 0.0, 1.0))
    dq = convert_state(hover)
    assert np.allclose(dq.om, 0) and np.allclose(dq.vb, 0)
    assert np.allclose(convert_state_inverse(dq).as_vector(), hover.as_vector())
    # world x-velocity at identity attitude is body x-velocity
    x = hover.as_vector().copy()
    x[3:6] = [1.0, 0.0, 0.0]
    assert np.allclose(cl_to_dq_vec(x)[11:14], [1, 0, 0], atol=1e-15)
    for _ in range(200):
        x = _random_cl(rng)
        assert np.allclose(dq_to_cl_vec(cl_to_dq_vec(x)), x, atol=1e-12)
        nd, od = dq_unit_defects(cl_to_dq_vec(x)[:8])
        assert nd < 1e-12 and od < 1e-12


# ---------------------------------------------------------------------------
# plant with disturbances


def test_plant_identity_matches_nominal(params, rng):
    x = _random_cl(rng)
    u = np.array([9.0, 0.01, 0.0, -0.02])
    a = plant_step(x, u, params, DisturbanceConfig(), 1e-3)
    b = classical_step(x, u, 1e-3, params)
    assert np.allclose(a, b, atol=1e-12)


def test_plant_external_force(params):
    x = ClassicalState.hover().as_vector()
    dist = DisturbanceConfig(ext_force=[0.0, 0.0, 7.07])
    xn = plant_step(x, params.hover_wrench(), params, dist, 1e-3)
    assert xn[5] == pytest.approx(7.07 / params.m * 1e-3, rel=1e-12)


def test_plant_mass_scale(params):
    x = ClassicalState.hover().as_vector()
    xn = plant_step(x, params.hover_wrench(), params, DisturbanceConfig(mass_scale=1.2), 1e-3)
    accel = params.g * (1.0 / 1.2 - 1.0)  # hover thrust under a heavier truth
    assert xn[5] == pytest.approx(accel * 1e-3, rel=1e-9)


def test_plant_preserves_attitude_norm(params, rng):
    x = _random_cl(rng)
    for _ in range(50):
        x = plant_step(x, [9.81, 0.05, -0.03, 0.02], params,
                       DisturbanceConfig(drag_scale=2.0, ext_moment=[0.01, 0, 0]), 0.02)
    assert abs(np.linalg.norm(x[6:10]) - 1.0) < 1e-9


def test_energy_and_momentum_conservation(params):
    """Unforced, drag-free flight keeps E and the angular momentum norm."""
    x = np.concatenate([[0, 0, 0], [2.0, -1.0, 4.0],
                        [1.0, 0, 0, 0], [3.0, 2.0, 1.0]])

    def energy(x):
        return (0.5 * params.m * x[3:6] @ x[3:6] + params.m * params.g * x[2]
                + 0.5 * x[10:13] @ (params.j_diag * x[10:13]))

    e0 = energy(x)
    h0 = np.linalg.norm(params.j_diag * x[10:13])
    for _ in range(1000):
        x = plant_step(x, np.zeros(4), params, DisturbanceConfig(), 1e-3)
    assert abs(energy(x) - e0) / abs(e0) < 1e-6
    assert abs(np.linalg.norm(params.j_diag * x[10:13]) - h0) / h0 < 1e-6


# ---------------------------------------------------------------------------
# validation


def test_value_checks():
    with pytest.raises(ValueError):
        WrenchInput(-1.0, np.zeros(3))
    with pytest.raises(ValueError):
        QuadrotorParams(m=0.0)
    with pytest.raises(ValueError):
        QuadrotorParams(j_diag=[0.01, -0.01, 0.02])
    with pytest.raises(ValueError):
        ClassicalState([0, 0, 0], [0, 0, 0], [1.0, 0.1, 0, 0], [0, 0, 0])
    with pytest.raises(ValueError):
        DqState(np.array([1.0, 0, 0, 0, 0.5, 0, 0, 0]), np.zeros(3), np.zeros(3))
    with pytest.raises(ValueError):
        DisturbanceConfig(mass_scale=0.0)
    with pytest.raises(ValueError):
        plant_step(ClassicalState.hover().as_vector(), np.zeros(4),
                   QuadrotorParams(), DisturbanceConfig(), -0.1)
    assert QuadrotorParams().f_max == pytest.approx(4 * 9.81)
    assert WrenchInput.from_array([5.0, 0.1, 0.2, 0.3]).f == 5.0
