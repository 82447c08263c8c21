"""Controlled rigid-body vessel model in quaternion form.

State vectors are packed into flat ``float64`` arrays of length 19 for the
compiled kernels::

    [0:3]   omega      body angular velocity (rad/s)
    [3:7]   q          attitude quaternion, scalar first
    [7:10]  v          body linear velocity (m/s)
    [10:13] x          spatial position (m)
    [13:16] phi_theta  integral of the Euler-angle error (rad s)
    [16:19] phi_x      integral of the position error (m s)

:class:`VesselParams` and :class:`ControlConfig` pack to the arrays consumed
by the kernels with ``.pack()``; only diagonal inertia, damping and gain
matrices are supported, so they are stored as 3-vectors of diagonal entries.
"""

from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np
from numba import njit

from .rotations import (
    EPS_GIMBAL,
    GimbalLockError,
    _cross,
    _euler_from_rot,
    _euler_rodrigues,
    _hat,
    _mm,
    _mtv,
    _mv,
    _pi_e_inv,
    _quat_mul,
    quat_from_euler,
)

N_STATE = 19
OMEGA, Q, V, X, PHI_THETA, PHI_X = (
    slice(0, 3), slice(3, 7), slice(7, 10), slice(10, 13), slice(13, 16), slice(16, 19))

# packed parameter layout
_P_T, _P_M, _P_DR, _P_DT = slice(0, 3), 3, slice(4, 7), slice(7, 10)
_P_GML, _P_GMT, _P_G, _P_RHO, _P_AWP, _P_ZEQ = 10, 11, 12, 13, 14, 15
# packed control layout
_C_KPR, _C_KDR, _C_KIR = slice(0, 3), slice(3, 6), slice(6, 9)
_C_KPT, _C_KDT, _C_KIT = slice(9, 12), slice(12, 15), slice(15, 18)
_C_THREF, _C_XREF, _C_ABS = slice(18, 21), slice(21, 24), 24


def _diag(a, name):
    a = np.asarray(a, dtype=np.float64)
    if a.shape == (3, 3):
        if np.any(a - np.diag(np.diag(a))):
            raise ValueError(f"{name} must be diagonal")
        a = np.diag(a).copy()
    if a.shape != (3,):
        raise ValueError(f"{name}: expected 3 diagonal entries, got shape {a.shape}")
    return a


@dataclass
class VesselParams:
    """Physical constants of the vessel (SI units); defaults are the supply-vessel data set."""

    T: np.ndarray = field(default_factory=lambda: np.array([2.873071e8, 2.90000e9, 2.726143e9]))
    m_v: float = 6.3622085e6
    D_r: np.ndarray = field(default_factory=lambda: np.array(
        [9.329153987e2, 6.514979127508227e8, 3.15094664584e4]))
    D_t: np.ndarray = field(default_factory=lambda: np.array([3.53933789e1, 1.1781388e2, 1.4566249e6]))
    GM_L: float = 103.628
    GM_T: float = 2.1440
    g: float = 9.81
    rho_w: float = 1.025e3
    A_wp: float = 1.3834e3
    z_eq: float = 0.0

    def __post_init__(self):
        self.T = _diag(self.T, "T")
        self.D_r = _diag(self.D_r, "D_r")
        self.D_t = _diag(self.D_t, "D_t")
        if np.any(self.T <= 0) or self.m_v <= 0:
            raise ValueError("inertia and mass must be positive")

    @property
    def c(self):
        """Heave stiffness ``g rho_w A_wp``."""
        return self.g * self.rho_w * self.A_wp

    @property
    def G(self):
        return self.m_v * self.g * np.diag([self.GM_L, self.GM_T, 0.0])

    def pack(self):
        p = np.empty(16)
        p[_P_T] = self.T
        p[_P_M] = self.m_v
        p[_P_DR] = self.D_r
        p[_P_DT] = self.D_t
        p[_P_GML] = self.GM_L
        p[_P_GMT] = self.GM_T
        p[_P_G] = self.g
        p[_P_RHO] = self.rho_w
        p[_P_AWP] = self.A_wp
        p[_P_ZEQ] = self.z_eq
        return p


@dataclass
class ControlConfig:
    """PID gains (diagonals), set point and activation time of the controller."""

    Kp_r: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 1e8]))
    Kd_r: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 1e9]))
    Ki_r: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 2e5]))
    Kp_t: np.ndarray = field(default_factory=lambda: np.array([4e5, 4e5, 0.0]))
    Kd_t: np.ndarray = field(default_factory=lambda: np.array([4e6, 4e6, 0.0]))
    Ki_t: np.ndarray = field(default_factory=lambda: np.array([1e3, 1e3, 0.0]))
    theta_ref: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 0.54]))
    x_ref: np.ndarray = field(default_factory=lambda: np.array([780.0, 20.0, 0.0]))
    t_on: float = 50.0
    # reproduce the literal w_r2 formula that uses theta instead of the error angle
    w_r2_uses_absolute_theta: bool = False

    def __post_init__(self):
        for name in ("Kp_r", "Kd_r", "Ki_r", "Kp_t", "Kd_t", "Ki_t"):
            val = _diag(getattr(self, name), name)
            if np.any(val < 0):
                raise ValueError(f"{name} must be nonnegative")
            setattr(self, name, val)
        self.theta_ref = np.asarray(self.theta_ref, dtype=np.float64).reshape(3)
        self.x_ref = np.asarray(self.x_ref, dtype=np.float64).reshape(3)

    def pack(self):
        c = np.empty(25)
        c[_C_KPR] = self.Kp_r
        c[_C_KDR] = self.Kd_r
        c[_C_KIR] = self.Ki_r
        c[_C_KPT] = self.Kp_t
        c[_C_KDT] = self.Kd_t
        c[_C_KIT] = self.Ki_t
        c[_C_THREF] = self.theta_ref
        c[_C_XREF] = self.x_ref
        c[_C_ABS] = 1.0 if self.w_r2_uses_absolute_theta else 0.0
        return c

    def without_gains(self):
        z = np.zeros(3)
        return replace(self, Kp_r=z, Kd_r=z, Ki_r=z, Kp_t=z, Kd_t=z, Ki_t=z)


@dataclass
class State:
    """Full dynamical state; see the module docstring for the packed layout."""

    omega: np.ndarray
    q: np.ndarray
    v: np.ndarray
    x: np.ndarray
    phi_theta: np.ndarray = field(default_factory=lambda: np.zeros(3))
    phi_x: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        for name, n in (("omega", 3), ("q", 4), ("v", 3), ("x", 3), ("phi_theta", 3), ("phi_x", 3)):
            setattr(self, name, np.asarray(getattr(self, name), dtype=np.float64).reshape(n))

    @classmethod
    def from_array(cls, y):
        y = np.asarray(y, dtype=np.float64)
        return cls(y[OMEGA].copy(), y[Q].copy(), y[V].copy(), y[X].copy(),
                   y[PHI_THETA].copy(), y[PHI_X].copy())

    def to_array(self):
        return np.concatenate([self.omega, self.q, self.v, self.x, self.phi_theta, self.phi_x])

    @classmethod
    def initial(cls, theta0=(0.05, -0.02, 0.10), x0=(723.0, 0.0, 0.0), omega0=(0.0, 0.0, 0.0),
                v0=(0.0, 0.0, 0.0)):
        """Initial condition of the reference scenario (arguments override it)."""
        return cls(np.array(omega0, float), quat_from_euler(theta0), np.array(v0, float),
                   np.array(x0, float))


class PortVars(NamedTuple):
    m_ang: np.ndarray
    p_lin: np.ndarray
    mu: np.ndarray
    zbar: float

    def xi(self):
        return np.concatenate([self.m_ang, self.p_lin, self.mu, [self.zbar]])


# ---------------------------------------------------------------------------
# compiled kernels
# ---------------------------------------------------------------------------

@njit(cache=True)
def _wrap(a):
    """Map angles into (-pi, pi]."""
    return a - 2.0 * np.pi * np.ceil((a - np.pi) / (2.0 * np.pi))


@njit(cache=True)
def _restoring_moment(rot, p):
    m_g = p[_P_M] * p[_P_G]
    # (Q r) x (m g e3) with r = (GM_L Q31, GM_T Q32, 0)
    a0 = p[_P_GML] * rot[2, 0]
    a1 = p[_P_GMT] * rot[2, 1]
    out = np.empty(3)
    out[0] = m_g * (rot[1, 0] * a0 + rot[1, 1] * a1)
    out[1] = -m_g * (rot[0, 0] * a0 + rot[0, 1] * a1)
    out[2] = 0.0
    return out


@njit(cache=True)
def _restoring_force(x, p):
    out = np.zeros(3)
    out[2] = p[_P_G] * p[_P_RHO] * p[_P_AWP] * (x[2] - p[_P_ZEQ])
    return out


@njit(cache=True)
def _theta_error(ang, c):
    return _wrap(ang - c[_C_THREF])


@njit(cache=True)
def _controls(y, c, active):
    """Body-frame control torque and force ``(tau_r, tau_t)``."""
    if not active:
        return np.zeros(3), np.zeros(3)
    rot = _euler_rodrigues(y[3:7])
    ang = _euler_from_rot(rot)
    m = _mm(_pi_e_inv(ang), rot)
    th_err = _theta_error(ang, c)
    th_dot = _mv(m, y[0:3])
    tau_r = -_mtv(m, c[_C_KPR] * th_err + c[_C_KDR] * th_dot + c[_C_KIR] * y[13:16])
    x_err = y[10:13] - c[_C_XREF]
    x_dot = _mv(rot, y[7:10])
    tau_t = -_mtv(rot, c[_C_KPT] * x_err + c[_C_KDT] * x_dot + c[_C_KIT] * y[16:19])
    return tau_r, tau_t


@njit(cache=True)
def _s1_field(y, p, c):
    T = p[_P_T]
    w = y[0:3]
    rot = _euler_rodrigues(y[3:7])
    out = np.zeros(N_STATE)
    out[0:3] = _cross(T * w, w) / T
    wq = np.array([0.0, w[0], w[1], w[2]])
    out[3:7] = 0.5 * _quat_mul(y[3:7], wq)
    out[7:10] = -_cross(w, y[7:10])
    out[10:13] = _mv(rot, y[7:10])
    out[16:19] = y[10:13] - c[_C_XREF]
    return out


@njit(cache=True)
def _s2_field(y, p, c, active):
    rot = _euler_rodrigues(y[3:7])
    tau_r, tau_t = _controls(y, c, active)
    g_r = _restoring_moment(rot, p)
    g_t = _restoring_force(y[10:13], p)
    out = np.zeros(N_STATE)
    out[0:3] = -(p[_P_DR] * y[0:3] + _mtv(rot, g_r) - tau_r) / p[_P_T]
    out[7:10] = -(p[_P_DT] * y[7:10] + _mtv(rot, g_t) - tau_t) / p[_P_M]
    out[13:16] = _theta_error(_euler_from_rot(rot), c)
    return out


@njit(cache=True)
def _rhs(y, p, c, active):
    T = p[_P_T]
    w = y[0:3]
    v = y[7:10]
    rot = _euler_rodrigues(y[3:7])
    ang = _euler_from_rot(rot)
    tau_r, tau_t = _controls(y, c, active)
    g_r = _restoring_moment(rot, p)
    g_t = _restoring_force(y[10:13], p)
    out = np.empty(N_STATE)
    out[0:3] = (_cross(T * w, w) - (p[_P_DR] * w + _mtv(rot, g_r) - tau_r)) / T
    wq = np.array([0.0, w[0], w[1], w[2]])
    out[3:7] = 0.5 * _quat_mul(y[3:7], wq)
    out[7:10] = -_cross(w, v) - (p[_P_DT] * v + _mtv(rot, g_t) - tau_t) / p[_P_M]
    out[10:13] = _mv(rot, v)
    out[13:16] = _theta_error(ang, c)
    out[16:19] = y[10:13] - c[_C_XREF]
    return out


@njit(cache=True)
def _hamiltonian(y, p):
    T = p[_P_T]
    w = y[0:3]
    v = y[7:10]
    rot = _euler_rodrigues(y[3:7])
    mu = rot[2, :]
    m_g = p[_P_M] * p[_P_G]
    zbar = y[12] - p[_P_ZEQ]
    kin = 0.5 * np.sum(T * w * w) + 0.5 * p[_P_M] * np.sum(v * v)
    pot = 0.5 * m_g * (p[_P_GML] * mu[0] ** 2 + p[_P_GMT] * mu[1] ** 2)
    pot += 0.5 * p[_P_G] * p[_P_RHO] * p[_P_AWP] * zbar * zbar
    return kin + pot


@njit(cache=True)
def _supply_rate(y, p, c, active):
    tau_r, tau_t = _controls(y, c, active)
    w = y[0:3]
    v = y[7:10]
    return np.sum(v * (-p[_P_DT] * v + tau_t)) + np.sum(w * (-p[_P_DR] * w + tau_r))


@njit(cache=True)
def _control_norms(y, p, c, active):
    tau_r, tau_t = _controls(y, c, active)
    return np.sqrt(np.sum((tau_r / p[_P_T]) ** 2)), np.sqrt(np.sum((tau_t / p[_P_M]) ** 2))


@njit(cache=True)
def _diagnostics(ys, p, c, active):
    """Hamiltonian and scaled control norms for each row of ``ys``."""
    n = ys.shape[0]
    out = np.empty((n, 3))
    for i in range(n):
        out[i, 0] = _hamiltonian(ys[i], p)
        out[i, 1], out[i, 2] = _control_norms(ys[i], p, c, active[i])
    return out


# ---------------------------------------------------------------------------
# public API
# ---------------------------------------------------------------------------

def _state_array(s):
    return s.to_array() if isinstance(s, State) else np.asarray(s, dtype=np.float64)


def _check_unit(y, tol=1e-8):
    nrm = np.linalg.norm(y[Q])
    if abs(nrm - 1.0) > tol:
        raise ValueError(f"state quaternion has norm {nrm!r}")


def _check_gimbal(y):
    rot = _euler_rodrigues(y[Q])
    if abs(rot[2, 0]) >= np.cos(EPS_GIMBAL):
        raise GimbalLockError("Pi_e is not invertible for theta = +-pi/2")


def restoring_moment(q, params):
    """Spatial restoring moment ``(Q r) x (m_v g e3)`` with the metacentric moment arm ``r``."""
    return _restoring_moment(_euler_rodrigues(np.asarray(q, dtype=np.float64)), params.pack())


def restoring_force(x, params):
    """Spatial buoyancy force ``g rho_w A_wp (z - z_eq) e3``."""
    return _restoring_force(np.asarray(x, dtype=np.float64), params.pack())


def control_torques(s, ctrl, active=True):
    """Body-frame PID torque ``tau_r`` and force ``tau_t``; zeros when ``active`` is false."""
    y = _state_array(s)
    if active:
        _check_gimbal(y)
    return _controls(y, ctrl.pack(), bool(active))


def rhs_full(s, params, ctrl, active=True):
    """Time derivative of the full system, returned as a :class:`State` of derivatives."""
    y = _state_array(s)
    _check_unit(y)
    if active:
        _check_gimbal(y)
    return State.from_array(_rhs(y, params.pack(), ctrl.pack(), bool(active)))


def s1_field(s, params, ctrl):
    """Vector field of the conservative (free rigid body) part."""
    return State.from_array(_s1_field(_state_array(s), params.pack(), ctrl.pack()))


def s2_field(s, params, ctrl, active=True):
    """Vector field of the damping/restoring/control part."""
    y = _state_array(s)
    if active:
        _check_gimbal(y)
    return State.from_array(_s2_field(y, params.pack(), ctrl.pack(), bool(active)))


def port_vars(s, params):
    y = _state_array(s)
    rot = _euler_rodrigues(y[Q])
    return PortVars(params.T * y[OMEGA], params.m_v * y[V], rot.T @ np.array([0.0, 0.0, 1.0]),
                    float(y[12] - params.z_eq))


def hamiltonian(s, params):
    """Kinetic plus potential energy ``H = K + U`` (J)."""
    y = _state_array(s)
    _check_unit(y)
    return float(_hamiltonian(y, params.pack()))


def hamiltonian_xi(xi, params):
    """``H`` as a function of the port variables ``xi = [m, p, mu, zbar]``."""
    xi = np.asarray(xi, dtype=np.float64)
    m, pl, mu, zbar = xi[0:3], xi[3:6], xi[6:9], xi[9]
    return (0.5 * m @ (m / params.T) + 0.5 * pl @ pl / params.m_v
            + 0.5 * mu @ params.G @ mu + 0.5 * params.c * zbar ** 2)


def grad_hamiltonian_xi(xi, params):
    xi = np.asarray(xi, dtype=np.float64)
    return np.concatenate([xi[0:3] / params.T, xi[3:6] / params.m_v, params.G @ xi[6:9],
                           [params.c * xi[9]]])


def structure_matrix(xi, params):
    """Skew-symmetric interconnection matrix ``S(xi)`` of the port-Hamiltonian form."""
    xi = np.asarray(xi, dtype=np.float64)
    m, mu = xi[0:3], xi[6:9]
    s = np.zeros((10, 10))
    s[0:3, 0:3] = _hat(m)
    s[0:3, 6:9] = _hat(mu)
    s[3:6, 3:6] = -params.m_v * _hat(m / params.T)
    s[3:6, 9] = -mu
    s[6:9, 0:3] = _hat(mu)
    s[9, 3:6] = mu
    return s


def supply_rate(s, params, ctrl, active=True):
    """Power balance ``nu^T (-D nu + tau)``, equal to dH/dt along solutions."""
    y = _state_array(s)
    if active:
        _check_gimbal(y)
    return float(_supply_rate(y, params.pack(), ctrl.pack(), bool(active)))


def control_norms(s, params, ctrl, active=True):
    """``(||T^-1 tau_r||, ||m_v^-1 tau_t||)``."""
    y = _state_array(s)
    return tuple(float(a) for a in _control_norms(y, params.pack(), ctrl.pack(), bool(active)))


def euler_angles(s):
    """ZYX Euler angles of the state attitude (no singularity check)."""
    return _euler_from_rot(_euler_rodrigues(_state_array(s)[Q]))
