"""Analytic trajectories and the flatness map to pose/twist/input references."""

import numpy as np
import pytest

from dqnmpc.dq_algebra import dq_mul, dq_to_pose, dq_unit_defects, rotate_vector_inv
from dqnmpc.dynamics import QuadrotorParams
from dqnmpc.reference import (
    FlatOutput,
    OutOfWindow,
    ReferencePoint,
    SingularReference,
    TrajectorySpec,
    eval_flat,
    flat_to_reference,
    reference_at,
    sample_references,
)

LISSAJOUS = TrajectorySpec(
    kind="lissajous", center=(0.0, 0.0, 2.0), amplitudes=(2.0, 1.5, 0.75),
    angular_freqs=(1.235, 2.47, 2.47), phases=(0.0, 0.4, 1.1), duration=20.0,
)


def test_hover_flat_output():
    spec = TrajectorySpec.hover(center=(1, -2, 3), yaw=0.7)
    for t in (0.0, 5.3, 20.0):
        f = eval_flat(spec, t)
        assert np.array_equal(f.p, [1, -2, 3])
        assert np.all(f.v == 0) and np.all(f.a == 0) and np.all(f.j == 0)
        assert f.yaw == 0.7 and f.yaw_rate == 0.0


def test_circle_flat_output():
    spec = TrajectorySpec.circle(center=(0, 0, 1), radius=1.0, omega=1.0)
    f = eval_flat(spec, 0.0)
    assert np.allclose(f.p, [1, 0, 1], atol=1e-15)
    assert np.linalg.norm(f.v) == pytest.approx(1.0)
    # centripetal acceleration points back to the center
    assert np.allclose(f.a, [-1, 0, 0], atol=1e-15)
    for t in np.linspace(0, 6, 25):
        f = eval_flat(spec, t)
        assert np.linalg.norm(f.v) == pytest.approx(1.0)
        assert np.allclose(f.a, -(f.p - spec.center), atol=1e-12)


def test_out_of_window():
    spec = TrajectorySpec.hover(duration=10.0)
    with pytest.raises(OutOfWindow):
        eval_flat(spec, -0.1)
    with pytest.raises(OutOfWindow):
        eval_flat(spec, 10.1)


def test_flat_derivative_consistency():
    h = 1e-4
    for t in np.linspace(1.0, 19.0, 13):
        f = eval_flat(LISSAJOUS, t)
        fp, fm = eval_flat(LISSAJOUS, t + h), eval_flat(LISSAJOUS, t - h)
        scale = max(1.0, np.max(np.abs(f.v)), np.max(np.abs(f.a)), np.max(np.abs(f.j)))
        assert np.max(np.abs((fp.p - fm.p) / (2 * h) - f.v)) / scale < 1e-5
        assert np.max(np.abs((fp.v - fm.v) / (2 * h) - f.a)) / scale < 1e-5
        assert np.max(np.abs((fp.a - fm.a) / (2 * h) - f.j)) / scale < 1e-5


def test_tangent_yaw_rate_consistency():
    spec = TrajectorySpec.circle(radius=1.5, omega=0.8, yaw_mode="tangent")
    h = 1e-4
    for t in (0.5, 2.0, 3.7):
        f = eval_flat(spec, t)
        dyaw = (eval_flat(spec, t + h).yaw - eval_flat(spec, t - h).yaw) / (2 * h)
        assert dyaw == pytest.approx(f.yaw_rate, abs=1e-5)


# ---------------------------------------------------------------------------
# flatness map


def test_hover_reference(params):
    rp = reference_at(TrajectorySpec.hover(yaw=0.7), 1.0, params)
    half = 0.35
    assert np.allclose(rp.x_cl[6:10], [np.cos(half), 0, 0, np.sin(half)], atol=1e-15)
    assert np.allclose(rp.wd, 0.0, atol=1e-15)
    assert rp.u_cl[0] == pytest.approx(params.m * params.g)
    assert np.allclose(rp.ud, [0, 0, 0, 0, 0, params.g], atol=1e-15)


def test_vertical_boost_doubles_thrust(params):
    flat = FlatOutput(p=np.zeros(3), v=np.zeros(3), a=np.array([0, 0, params.g]),
                      j=np.zeros(3), yaw=0.3, yaw_rate=0.0)
    rp = flat_to_reference(flat, params)
    assert rp.u_cl[0] == pytest.approx(2 * params.m * params.g)
    assert abs(rp.x_cl[7]) < 1e-15 and abs(rp.x_cl[8]) < 1e-15  # yaw-only tilt


def test_singular_references(params):
    base = dict(p=np.zeros(3), v=np.zeros(3), j=np.zeros(3), yaw=0.0, yaw_rate=0.0)
    with pytest.raises(SingularReference):
        flat_to_reference(FlatOutput(a=np.array([0, 0, -params.g]), **base), params)
    with pytest.raises(SingularReference):
        flat_to_reference(FlatOutput(a=np.array([0, 0, -2 * params.g]), **base), params)


def test_reference_point_wellformed(params):
    for t in np.linspace(0, 10, 21):
        rp = reference_at(LISSAJOUS, t, params)
        nd, od = dq_unit_defects(rp.qd)
        assert nd < 1e-12 and od < 1e-12
        p, r = dq_to_pose(rp.qd)
        assert np.allclose(p, rp.x_cl[:3], atol=1e-12)
        assert np.allclose(r, rp.x_cl[6:10], atol=1e-15)
        assert rp.ud[5] * params.m == pytest.approx(rp.u_cl[0])
        assert np.all(rp.ud[:5] == 0) and np.all(rp.u_cl[1:] == 0)


def test_kinematic_consistency(params):
    """d/dt of the reference pose equals half the pose times the dual twist."""
    h = 1e-5
    for spec in (TrajectorySpec.circle(radius=1, omega=1.0),
                 TrajectorySpec.circle(radius=1.5, omega=0.8, yaw_mode="tangent"),
                 LISSAJOUS):
        for t in (0.4, 1.7, 3.9, 8.2):
            rp = reference_at(spec, t, params)
            qp = reference_at(spec, t + h, params).qd
            qm = reference_at(spec, t - h, params).qd
            twist = np.concatenate([[0.0], rp.wd[:3], [0.0], rp.wd[3:]])
            fd = (qp - qm) / (2 * h)
            assert np.max(np.abs(fd - 0.5 * dq_mul(rp.qd, twist))) < 1e-6


@pytest.mark.parametrize("spec", [TrajectorySpec.circle(radius=1.0, omega=1.0), LISSAJOUS],
                         ids=["circle", "lissajous"])
def test_open_loop_consistency(spec, params):
    """Reference attitude plus reference thrust reproduces the translation.

    Integrates p/v under piecewise-constant (f_d, r_d) sampled at 1 kHz;
    staying within 5 cm over 2 s pins thrust magnitude and direction to
    the flat acceleration.
    """
    f0 = eval_flat(spec, 0.0)
    p, v = f0.p.copy(), f0.v.copy()
    dt = 1e-3
    for i in range(2000):
        rp = reference_at(spec, i * dt, params)
        acc = (rp.u_cl[0] / params.m) * rotate_vector_inv(rp.x_cl[6:10], [0.0, 0.0, 1.0])
        acc = acc - np.array([0.0, 0.0, params.g])
        p = p + v * dt + 0.5 * acc * dt * dt
        v = v + acc * dt
    assert np.linalg.norm(p - eval_flat(spec, 2.0).p) < 0.05


def test_yaw_decoupling(params):
    kw = dict(radius=1.2, omega=0.9)
    for t in (0.3, 2.2, 5.1):
        a = reference_at(TrajectorySpec.circle(yaw_mode="fixed", **kw), t, params)
        b = reference_at(TrajectorySpec.circle(yaw_mode="tangent", **kw), t, params)
        assert a.u_cl[0] == pytest.approx(b.u_cl[0], rel=1e-12)
        assert not np.allclose(a.x_cl[6:10], b.x_cl[6:10])


# ---------------------------------------------------------------------------
# speed calibration and sampling


def test_circle_v_max():
    spec = TrajectorySpec.circle(radius=2.0, omega=1.5)
    assert spec.v_max == pytest.approx(3.0, rel=0.01)


def test_lissajous_v_max_calibration():
    assert 4.63 <= LISSAJOUS.v_max <= 4.68


def test_sample_references_clamps(params):
    spec = TrajectorySpec.circle(duration=5.0)
    pts = sample_references(spec, 4.0, 0.5, 6, params)
    assert len(pts) == 6
    end = reference_at(spec, 5.0, params)
    for rp in pts[3:]:  # t = 5.5, 6.0, ... all held at the endpoint
        assert np.array_equal(rp.qd, end.qd)
    assert isinstance(pts[0], ReferencePoint)


def test_trajectory_spec_validation():
    with pytest.raises(ValueError):
        TrajectorySpec(kind="spiral")
    with pytest.raises(ValueError):
        TrajectorySpec(yaw_mode="free")
    with pytest.raises(ValueError):
        TrajectorySpec(duration=0.0)
