"""Exact flow of the damping/restoring/control sub-system.

With the attitude ``Q0`` and position ``x0`` frozen, the velocities obey the
linear systems

    omega' = A omega + w_r1 + s w_r2,      v' = B v + w_t,

whose solutions are written with phi-functions (variation of constants)::

    omega(g) = exp(gA) omega0 + g phi1(gA) w_r1 + g^2 phi2(gA) w_r2
    v(g)     = exp(gB) v0     + g phi1(gB) w_t

and the Euler-angle integral state grows linearly, ``phi_theta += g theta_err0``.
"""

from dataclasses import dataclass

import numpy as np
from numba import njit

from .rotations import _euler_from_rot, _euler_rodrigues, _mm, _mtv, _pi_e_inv
from .special_functions import _phi_action
from .vessel_model import (
    _C_ABS,
    _C_KDR,
    _C_KDT,
    _C_KIR,
    _C_KIT,
    _C_KPR,
    _C_KPT,
    _C_XREF,
    _P_DR,
    _P_DT,
    _P_M,
    _P_T,
    State,
    _check_gimbal,
    _restoring_force,
    _restoring_moment,
    _state_array,
    _theta_error,
)


@njit(cache=True)
def _s2_operators(y, p, c, active):
    T = p[_P_T]
    m_v = p[_P_M]
    rot = _euler_rodrigues(y[3:7])
    ang = _euler_from_rot(rot)
    th_err = _theta_error(ang, c)
    w_r1 = -_mtv(rot, _restoring_moment(rot, p)) / T
    w_r2 = np.zeros(3)
    w_t = -_mtv(rot, _restoring_force(y[10:13], p)) / m_v
    A = np.zeros((3, 3))
    B = np.zeros((3, 3))
    for i in range(3):
        A[i, i] = -p[_P_DR][i] / T[i]
        B[i, i] = -p[_P_DT][i] / m_v
    if active:
        # M maps body angular velocity to Euler-angle rates
        M = _mm(_pi_e_inv(ang), rot)
        kd_r = c[_C_KDR]
        kd_t = c[_C_KDT]
        for i in range(3):
            for j in range(3):
                sr = 0.0
                st = 0.0
                for k in range(3):
                    sr += M[k, i] * kd_r[k] * M[k, j]
                    st += rot[k, i] * kd_t[k] * rot[k, j]
                A[i, j] -= sr / T[i]
                B[i, j] -= st / m_v
        w_r1 -= _mtv(M, c[_C_KPR] * th_err + c[_C_KIR] * y[13:16]) / T
        th_i = ang if c[_C_ABS] != 0.0 else th_err
        w_r2 = -_mtv(M, c[_C_KIR] * th_i) / T
        w_t -= _mtv(rot, c[_C_KPT] * (y[10:13] - c[_C_XREF]) + c[_C_KIT] * y[16:19]) / m_v
    return A, B, w_r1, w_r2, w_t, th_err


@njit(cache=True)
def _s2_flow(y, gamma, p, c, active):
    out = y.copy()
    if gamma == 0.0:
        return out
    A, B, w_r1, w_r2, w_t, th_err = _s2_operators(y, p, c, active)
    out[0:3] = _phi_action(A, gamma, y[0:3], w_r1, w_r2)
    out[7:10] = _phi_action(B, gamma, y[7:10], w_t, np.zeros(3))
    out[13:16] = y[13:16] + gamma * th_err
    return out


@dataclass(frozen=True)
class S2Operators:
    """Frozen-coefficient data of the linear sub-system at one state.

    ``A`` and ``B`` are generally non-symmetric; ``w_r2`` multiplies the
    elapsed time inside the sub-step.
    """

    A: np.ndarray
    B: np.ndarray
    w_r1: np.ndarray
    w_r2: np.ndarray
    w_t: np.ndarray


def build_s2_operators(s, params, ctrl, active=True):
    """Assemble ``A, B, w_r1, w_r2, w_t`` at state ``s`` (gain terms dropped when inactive).

    Raises
    ------
    GimbalLockError
        If control is active and the pitch is at +-pi/2.
    """
    y = _state_array(s)
    if active:
        _check_gimbal(y)
    A, B, w_r1, w_r2, w_t, _ = _s2_operators(y, params.pack(), ctrl.pack(), bool(active))
    return S2Operators(A, B, w_r1, w_r2, w_t)


def s2_flow(s, gamma, params, ctrl, active=True):
    """Advance the linear sub-system exactly by ``gamma``; q, x and phi_x stay bit-identical."""
    y = _state_array(s)
    if active:
        _check_gimbal(y)
    return State.from_array(_s2_flow(y, float(gamma), params.pack(), ctrl.pack(), bool(active)))
