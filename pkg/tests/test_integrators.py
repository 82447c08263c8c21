import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_state
from vesselsplit.free_flow import s1_flow
from vesselsplit.integrators import (METHODS, SchemeCoefficients, Verdict, grid, improved_euler_step,
                                     integrate, rk4_step, sp4_coefficients, sp6_coefficients,
                                     splitting_step, strang_coefficients)
from vesselsplit.linear_flow import s2_flow
from vesselsplit.rotations import GimbalLockError, quat_from_euler
from vesselsplit.vessel_model import ControlConfig, State, VesselParams, hamiltonian

seeds = st.integers(0, 2 ** 32 - 1)
SCHEMES = [strang_coefficients(), sp4_coefficients(), sp6_coefficients()]


@pytest.mark.parametrize("sc", SCHEMES, ids=lambda s: s.name)
def test_scheme_invariants(sc):
    seq = sc.sequence()
    assert seq == seq[::-1]
    assert [k for k, _ in seq][0] == "S2" and seq[-1][0] == "S2"
    for kind in ("S1", "S2"):
        assert sum(w for k, w in seq if k == kind) == pytest.approx(1.0, abs=1e-15)
    # kinds alternate after merging
    assert all(a[0] != b[0] for a, b in zip(seq, seq[1:]))


def test_strang_coefficients():
    sc = strang_coefficients()
    assert sc.a == (0.5, 0.0) and sc.b == (0.5,) and sc.order == 2
    assert sc.sequence() == [("S2", 0.5), ("S1", 1.0), ("S2", 0.5)]


def test_closure_coefficients():
    sp4 = sp4_coefficients()
    assert sp4.b[2] == pytest.approx(0.434336666566456, abs=1e-14)
    assert sp4.a[3] == 1.0 - 2.0 * sum(sp4.a[:3])
    assert sp4.a[0] == 0.07920369643119565
    sp6 = sp6_coefficients()
    assert sp6.a[5] == 1.0 - 2.0 * sum(sp6.a[:5])
    assert sp6.b[4] == 0.5 - sum(sp6.b[:4])
    assert sp6.a[0] == 0.05026276440039238
    with pytest.raises(ValueError):
        SchemeCoefficients(a=(0.5,), b=(0.5,), order=2, name="bad")


def test_grid():
    assert grid(0.0, 10.0, 0.5) == (20, 0.0)
    assert grid(0.0, 780.0, 1.95) == (400, 0.0)
    n, rem = grid(0.0, 10.0, 3.0)
    assert n == 3 and rem == pytest.approx(1.0)


@pytest.mark.parametrize("method", METHODS)
def test_zero_step_is_identity(method, params, ctrl, rng):
    s = random_state(rng)
    if method == "RK4":
        out = rk4_step(s, 0.0, params, ctrl)
    elif method == "IE":
        out = improved_euler_step(s, 0.0, params, ctrl)
    else:
        out = splitting_step(s, 0.0, method, params, ctrl)
    np.testing.assert_allclose(out.to_array(), s.to_array(), rtol=1e-15, atol=1e-15)


@pytest.mark.parametrize("scheme", ["SP2", "SP4", "SP6"])
@given(seeds, st.floats(0.01, 2.0))
def test_time_symmetry(scheme, seed, h):
    p, c = VesselParams(), ControlConfig()
    s = random_state(np.random.default_rng(seed))
    back = splitting_step(splitting_step(s, h, scheme, p, c, active=False), -h, scheme, p, c, active=False)
    y = s.to_array()
    np.testing.assert_allclose(back.to_array(), y, rtol=1e-10, atol=1e-10 * np.abs(y).max())


@pytest.mark.parametrize("scheme", ["SP2", "SP4", "SP6"])
@given(seeds)
def test_subflow_composition_preserves_quaternion_norm(scheme, seed):
    # the composed sub-flows, before the end-of-step renormalization
    p, c = VesselParams(), ControlConfig()
    s = random_state(np.random.default_rng(seed))
    h = 1.0
    sc = {"SP2": strang_coefficients, "SP4": sp4_coefficients, "SP6": sp6_coefficients}[scheme]()
    for kind, w in sc.sequence():
        s = s1_flow(s, w * h, p, c, sc.order) if kind == "S1" else s2_flow(s, w * h, p, c)
    assert abs(np.linalg.norm(s.q) - 1.0) < 1e-12


@pytest.mark.parametrize("method", METHODS)
def test_unit_quaternion_along_run(method):
    cfg_p, cfg_c = VesselParams(), ControlConfig()
    traj = integrate(State.initial(), 0.0, 100.0, 0.5, method, cfg_p, cfg_c, diagnostics=False)
    assert traj.verdict is Verdict.completed
    np.testing.assert_allclose(np.linalg.norm(traj.states[:, 3:7], axis=1), 1.0, atol=1e-10)


def test_gimbal_lock_propagates(params, ctrl):
    s = State(np.zeros(3), quat_from_euler((0, np.pi / 2, 0)), np.zeros(3), np.zeros(3))
    for fn in (lambda: rk4_step(s, 0.1, params, ctrl), lambda: improved_euler_step(s, 0.1, params, ctrl),
               lambda: splitting_step(s, 0.1, "SP4", params, ctrl)):
        with pytest.raises(GimbalLockError):
            fn()


def test_integrate_validation(params, ctrl):
    s = State.initial()
    with pytest.raises(ValueError):
        integrate(s, 0.0, 1.0, 0.0, "SP4", params, ctrl)
    with pytest.raises(ValueError):
        integrate(s, 1.0, 1.0, 0.1, "SP4", params, ctrl)
    with pytest.raises(ValueError):
        integrate(s, 0.0, 1.0, 0.1, "SP3", params, ctrl)
    with pytest.raises(ValueError):
        integrate(s, 0.0, 1.0, 0.1, "SP4", params, ctrl, activation="late")
    with pytest.raises(ValueError):
        integrate(s, 0.0, 1.0, 0.1, "SP4", params, ctrl, magnus_order=3)


def test_recording_and_partial_step(params, ctrl):
    traj = integrate(State.initial(), 0.0, 10.0, 3.0, "SP4", params, ctrl, stride=2)
    np.testing.assert_allclose(traj.times, [0.0, 6.0, 10.0])
    assert np.all(np.diff(traj.times) > 0)
    assert len(traj.states) == len(traj.hamiltonians) == len(traj.control_norms) == 3
    full = integrate(State.initial(), 0.0, 10.0, 3.0, "SP4", params, ctrl)
    np.testing.assert_array_equal(full.states[-1], traj.states[-1])
    np.testing.assert_array_equal(full.states[2], traj.states[1])


def test_equilibrium_is_constant(params):
    c = ControlConfig(t_on=0.0)
    s = State(np.zeros(3), quat_from_euler(c.theta_ref), np.zeros(3), c.x_ref.copy())
    for m in METHODS:
        traj = integrate(s, 0.0, 20.0, 1.0, m, params, c)
        np.testing.assert_allclose(traj.states - traj.states[0], 0.0, atol=1e-9)
        np.testing.assert_allclose(traj.control_norms, 0.0, atol=1e-9)


def test_controls_zero_before_activation(params, ctrl):
    traj = integrate(State.initial(), 0.0, 60.0, 0.5, "SP4", params, ctrl)
    before = traj.times < ctrl.t_on
    assert not traj.control_norms[before].any()
    assert (traj.control_norms[traj.times > ctrl.t_on] > 0).all()


def test_activation_split_and_boundary(params):
    # t_on falls inside the step [48, 51]
    c = ControlConfig(t_on=50.0)
    a = integrate(State.initial(), 0.0, 60.0, 3.0, "SP4", params, c, activation="split")
    b = integrate(State.initial(), 0.0, 60.0, 3.0, "SP4", params, c, activation="boundary")
    # identical up to the step that contains t_on
    np.testing.assert_array_equal(a.states[:17], b.states[:17])
    assert not np.array_equal(a.states[17], b.states[17])
    # split: the controller acts for one second of that step; boundary: from t = 51
    assert a.control_norms[17].any() and b.control_norms[17].any()
    assert b.states[17, 13:].any() and not np.allclose(a.states[17, 13:], b.states[17, 13:])
    # on an aligned grid both rules coincide
    a = integrate(State.initial(), 0.0, 60.0, 0.5, "SP4", params, c, activation="split")
    b = integrate(State.initial(), 0.0, 60.0, 0.5, "SP4", params, c, activation="boundary")
    np.testing.assert_array_equal(a.states, b.states)


def test_split_activation_matches_manual_steps(params):
    c = ControlConfig(t_on=50.0)
    traj = integrate(State.initial(), 0.0, 51.0, 3.0, "SP4", params, c)
    s = State.initial()
    for _ in range(16):
        s = splitting_step(s, 3.0, "SP4", params, c, active=False)
    s = splitting_step(s, 2.0, "SP4", params, c, active=False)
    s.phi_theta[:] = 0.0
    s.phi_x[:] = 0.0
    s = splitting_step(s, 1.0, "SP4", params, c, active=True)
    np.testing.assert_array_equal(traj.states[-1], s.to_array())


def test_integral_states_reset_at_activation(params):
    c = ControlConfig(t_on=10.0)
    traj = integrate(State.initial(), 0.0, 10.5, 0.5, "RK4", params, c)
    assert traj.states[-2, 13:].any()
    # one step after the reset the integrals are O(h) times the error
    s = traj.state(20)
    s.phi_theta[:] = 0.0
    s.phi_x[:] = 0.0
    np.testing.assert_array_equal(traj.states[-1], rk4_step(s, 0.5, params, c).to_array())


@pytest.mark.parametrize("method, h", [("RK4", 3.0), ("IE", 6.0), ("RK4", 6.0), ("SP2", 6.0), ("SP4", 6.0)])
def test_unstable_verdicts(params, ctrl, method, h):
    traj = integrate(State.initial(), 0.0, 780.0, h, method, params, ctrl)
    assert traj.verdict is Verdict.unstable
    assert "t_fail" in traj.meta and method in traj.message
    assert np.isfinite(traj.states).all()


def test_stable_verdicts(params, ctrl):
    for method, h in (("SP4", 5.0), ("RK4", 2.0), ("SP2", 1.0)):
        assert integrate(State.initial(), 0.0, 780.0, h, method, params, ctrl).verdict is Verdict.completed


def test_strang_energy_has_no_drift():
    p = VesselParams(D_r=[0, 0, 0], D_t=[0, 0, 0])
    c = ControlConfig(t_on=np.inf)
    traj = integrate(State.initial(), 0.0, 100.0, 0.1, "SP2", p, c)
    h0 = hamiltonian(State.initial(), p)
    dev = (traj.hamiltonians - h0) / h0
    assert np.abs(dev).max() < 1e-2
    # bounded oscillation: the second half is no worse than the first
    half = len(dev) // 2
    assert np.abs(dev[half:]).max() < 1.5 * np.abs(dev[:half]).max()
    assert abs(dev[half:].mean() - dev[:half].mean()) < 0.2 * np.abs(dev).max()


def test_splitting_conserves_energy_per_step():
    p = VesselParams(D_r=[0, 0, 0], D_t=[0, 0, 0])
    c = ControlConfig(t_on=np.inf)
    s = State.initial()
    h0 = hamiltonian(s, p)
    errs = [abs(hamiltonian(splitting_step(s, h, "SP2", p, c, active=False), p) - h0) for h in (0.2, 0.1)]
    assert errs[0] / errs[1] > 8 / 1.5
