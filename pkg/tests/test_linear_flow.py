import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_state
from oracles import rel_err, rk4_frozen
from vesselsplit.linear_flow import build_s2_operators, s2_flow
from vesselsplit.rotations import GimbalLockError, euler_from_quat, euler_rodrigues, pi_e_inv, quat_from_euler
from vesselsplit.vessel_model import ControlConfig, State, VesselParams, restoring_force, restoring_moment

seeds = st.integers(0, 2 ** 32 - 1)


def wrap(a):
    return (a + np.pi) % (2 * np.pi) - np.pi


def operators_direct(s, p, c):
    """Coefficients of the linear sub-system written with dense matrices."""
    Q = euler_rodrigues(s.q)
    th = euler_from_quat(s.q).as_array()
    M = pi_e_inv(th) @ Q
    Ti = np.diag(1 / p.T)
    A = -Ti @ (np.diag(p.D_r) + M.T @ np.diag(c.Kd_r) @ M)
    B = -(np.diag(p.D_t) + Q.T @ np.diag(c.Kd_t) @ Q) / p.m_v
    th_err = wrap(th - c.theta_ref)
    w_r1 = -Ti @ (Q.T @ restoring_moment(s.q, p) + M.T @ (c.Kp_r * th_err + c.Ki_r * s.phi_theta))
    w_r2 = -Ti @ M.T @ (c.Ki_r * th_err)
    w_t = -Q.T @ (restoring_force(s.x, p) + c.Kp_t * (s.x - c.x_ref) + c.Ki_t * s.phi_x) / p.m_v
    return A, B, w_r1, w_r2, w_t


def test_operators_without_gains(params, rng):
    c = ControlConfig().without_gains()
    s = random_state(rng)
    s.x[2] = params.z_eq
    ops = build_s2_operators(s, params, c)
    np.testing.assert_array_equal(ops.A, np.diag(-params.D_r / params.T))
    np.testing.assert_array_equal(ops.B, np.diag(-params.D_t / params.m_v))
    assert not ops.w_t.any() and not ops.w_r2.any()
    ref = -euler_rodrigues(s.q).T @ restoring_moment(s.q, params) / params.T
    np.testing.assert_allclose(ops.w_r1, ref, rtol=1e-14, atol=1e-14 * np.abs(ref).max())


def test_operators_inactive_drop_gains(params, ctrl, rng):
    s = random_state(rng)
    on = build_s2_operators(s, params, ctrl.without_gains())
    off = build_s2_operators(s, params, ctrl, active=False)
    for name in ("A", "B", "w_r1", "w_r2", "w_t"):
        np.testing.assert_array_equal(getattr(off, name), getattr(on, name))


def test_operators_at_reference(params, ctrl):
    s = State(np.zeros(3), quat_from_euler(ctrl.theta_ref), np.zeros(3), ctrl.x_ref.copy())
    ops = build_s2_operators(s, params, ctrl)
    np.testing.assert_allclose(ops.w_r1, 0, atol=1e-20)
    np.testing.assert_allclose(ops.w_r2, 0, atol=1e-20)
    np.testing.assert_allclose(ops.w_t, 0, atol=1e-20)
    c_abs = ControlConfig(w_r2_uses_absolute_theta=True)
    ops = build_s2_operators(s, params, c_abs)
    M = pi_e_inv(ctrl.theta_ref) @ euler_rodrigues(s.q)
    np.testing.assert_allclose(ops.w_r2, -M.T @ (c_abs.Ki_r * ctrl.theta_ref) / params.T, rtol=1e-14)


@given(seeds)
def test_operators_generic(seed):
    p = VesselParams()
    c = ControlConfig(Kp_r=[1e7, 2e7, 1e8], Kd_r=[3e8, 1e8, 1e9], Ki_r=[1e4, 5e3, 2e5])
    s = random_state(np.random.default_rng(seed))
    ops = build_s2_operators(s, p, c)
    for got, ref in zip((ops.A, ops.B, ops.w_r1, ops.w_r2, ops.w_t), operators_direct(s, p, c)):
        np.testing.assert_allclose(got, ref, rtol=1e-13, atol=1e-14 * np.abs(ref).max())


def test_gimbal_check(params, ctrl):
    s = State(np.zeros(3), quat_from_euler((0, np.pi / 2, 0)), np.zeros(3), np.zeros(3))
    with pytest.raises(GimbalLockError):
        build_s2_operators(s, params, ctrl)
    with pytest.raises(GimbalLockError):
        s2_flow(s, 0.1, params, ctrl)
    s2_flow(s, 0.1, params, ctrl, active=False)


def test_zero_step(params, ctrl, rng):
    s = random_state(rng)
    np.testing.assert_array_equal(s2_flow(s, 0.0, params, ctrl).to_array(), s.to_array())


def test_pure_decay(params):
    c = ControlConfig().without_gains()
    s = State([0.1, -0.2, 0.05], [1, 0, 0, 0], [1.0, 2.0, -0.5], [0.0, 0.0, params.z_eq])
    g = 3.0
    out = s2_flow(s, g, params, c)
    np.testing.assert_allclose(out.omega, np.exp(-g * params.D_r / params.T) * s.omega, rtol=1e-14)
    np.testing.assert_allclose(out.v, np.exp(-g * params.D_t / params.m_v) * s.v, rtol=1e-14)


@pytest.mark.parametrize("active", [True, False])
def test_against_rk4(params, ctrl, rng, active):
    for _ in range(3):
        s = random_state(rng)
        y = s.to_array()
        out = s2_flow(s, 0.5, params, ctrl, active).to_array()
        ref = rk4_frozen(y, params.pack(), ctrl.pack(), 2, 0.5, 1e-5, active)
        assert rel_err(out, ref) < 1e-9
        # attitude, position and the position integral are frozen, bit for bit
        for sl in (slice(3, 7), slice(10, 13), slice(16, 19)):
            np.testing.assert_array_equal(out[sl], y[sl])


@given(seeds, st.floats(0.0, 3.0), st.floats(0.0, 3.0))
def test_group_property(seed, g1, g2):
    p, c = VesselParams(), ControlConfig()
    s = random_state(np.random.default_rng(seed))
    once = s2_flow(s, g1 + g2, p, c).to_array()
    twice = s2_flow(s2_flow(s, g1, p, c), g2, p, c).to_array()
    np.testing.assert_allclose(twice, once, rtol=1e-12, atol=1e-12 * np.abs(once).max())


@given(seeds, st.floats(0.0, 2.0))
def test_time_reversal(seed, g):
    p, c = VesselParams(), ControlConfig()
    s = random_state(np.random.default_rng(seed))
    back = s2_flow(s2_flow(s, g, p, c), -g, p, c).to_array()
    np.testing.assert_allclose(back, s.to_array(), rtol=1e-11, atol=1e-11 * np.abs(s.to_array()).max())
