"""Attitude plumbing: quaternions (Euler parameters), the hat map, ZYX Euler
angles, the Euler-angle rate matrix and the SO(3) exponential.

Quaternions are plain ``float64`` arrays of shape ``(4,)`` in scalar-first
order ``[q0, q1, q2, q3]``; rotation matrices are ``(3, 3)`` arrays.  The
rotation ``E(q)`` maps body-frame vectors to the spatial frame.

Every public function is a thin wrapper around a compiled kernel (the
``_``-prefixed twin) so that the integrators can call the kernels directly
from compiled loops.
"""

from typing import NamedTuple

import numpy as np
from numba import njit

#: Minimum distance (rad) of the pitch angle from +-pi/2.
EPS_GIMBAL = 1e-6
#: Quaternions whose norm is this close to 1 are silently renormalised.
UNIT_TOL = 1e-8

_COS_EPS_GIMBAL = np.cos(EPS_GIMBAL)


class GimbalLockError(ValueError):
    """Pitch angle too close to +-pi/2 for the Euler-angle representation."""


class NonUnitQuaternionError(ValueError):
    pass


class EulerAngles(NamedTuple):
    phi: float  # roll
    theta: float  # pitch
    psi: float  # yaw

    def as_array(self):
        return np.array([self.phi, self.theta, self.psi])


# ---------------------------------------------------------------------------
# compiled kernels
# ---------------------------------------------------------------------------

@njit(cache=True)
def _hat(v):
    m = np.zeros((3, 3))
    m[0, 1] = -v[2]
    m[0, 2] = v[1]
    m[1, 0] = v[2]
    m[1, 2] = -v[0]
    m[2, 0] = -v[1]
    m[2, 1] = v[0]
    return m


@njit(cache=True)
def _cross(a, b):
    out = np.empty(3)
    out[0] = a[1] * b[2] - a[2] * b[1]
    out[1] = a[2] * b[0] - a[0] * b[2]
    out[2] = a[0] * b[1] - a[1] * b[0]
    return out


@njit(cache=True)
def _mv(m, v):
    """``m @ v`` for 3x3 ``m`` without the BLAS call overhead."""
    out = np.empty(3)
    for i in range(3):
        out[i] = m[i, 0] * v[0] + m[i, 1] * v[1] + m[i, 2] * v[2]
    return out


@njit(cache=True)
def _mtv(m, v):
    """``m.T @ v`` for 3x3 ``m``."""
    out = np.empty(3)
    for i in range(3):
        out[i] = m[0, i] * v[0] + m[1, i] * v[1] + m[2, i] * v[2]
    return out


@njit(cache=True)
def _mm(a, b):
    out = np.empty((3, 3))
    for i in range(3):
        for j in range(3):
            out[i, j] = a[i, 0] * b[0, j] + a[i, 1] * b[1, j] + a[i, 2] * b[2, j]
    return out


@njit(cache=True)
def _quat_mul(p, q):
    out = np.empty(4)
    out[0] = p[0] * q[0] - p[1] * q[1] - p[2] * q[2] - p[3] * q[3]
    out[1] = p[0] * q[1] + q[0] * p[1] + p[2] * q[3] - p[3] * q[2]
    out[2] = p[0] * q[2] + q[0] * p[2] + p[3] * q[1] - p[1] * q[3]
    out[3] = p[0] * q[3] + q[0] * p[3] + p[1] * q[2] - p[2] * q[1]
    return out


@njit(cache=True)
def _quat_normalize(q):
    return q / np.sqrt(q[0] ** 2 + q[1] ** 2 + q[2] ** 2 + q[3] ** 2)


@njit(cache=True)
def _euler_rodrigues(q):
    q0, q1, q2, q3 = q[0], q[1], q[2], q[3]
    r = np.empty((3, 3))
    r[0, 0] = 1.0 - 2.0 * (q2 * q2 + q3 * q3)
    r[0, 1] = 2.0 * (q1 * q2 - q0 * q3)
    r[0, 2] = 2.0 * (q0 * q2 + q1 * q3)
    r[1, 0] = 2.0 * (q0 * q3 + q1 * q2)
    r[1, 1] = 1.0 - 2.0 * (q1 * q1 + q3 * q3)
    r[1, 2] = 2.0 * (q2 * q3 - q0 * q1)
    r[2, 0] = 2.0 * (q1 * q3 - q0 * q2)
    r[2, 1] = 2.0 * (q0 * q1 + q2 * q3)
    r[2, 2] = 1.0 - 2.0 * (q1 * q1 + q2 * q2)
    return r


@njit(cache=True)
def _quat_from_euler(phi, theta, psi):
    cx, sx = np.cos(0.5 * phi), np.sin(0.5 * phi)
    cy, sy = np.cos(0.5 * theta), np.sin(0.5 * theta)
    cz, sz = np.cos(0.5 * psi), np.sin(0.5 * psi)
    q = np.empty(4)
    # q_z(psi) * q_y(theta) * q_x(phi)
    q[0] = cz * cy * cx + sz * sy * sx
    q[1] = cz * cy * sx - sz * sy * cx
    q[2] = cz * sy * cx + sz * cy * sx
    q[3] = sz * cy * cx - cz * sy * sx
    if q[0] < 0.0:
        q = -q
    return q


@njit(cache=True)
def _euler_from_rot(r):
    """ZYX angles of a rotation matrix; no singularity check."""
    out = np.empty(3)
    out[0] = np.arctan2(r[2, 1], r[2, 2])
    out[1] = np.arctan2(-r[2, 0], np.sqrt(r[0, 0] ** 2 + r[1, 0] ** 2))
    out[2] = np.arctan2(r[1, 0], r[0, 0])
    return out


@njit(cache=True)
def _euler_from_quat(q):
    return _euler_from_rot(_euler_rodrigues(q))


@njit(cache=True)
def _pi_e(ang):
    ct, st = np.cos(ang[1]), np.sin(ang[1])
    cp, sp = np.cos(ang[2]), np.sin(ang[2])
    m = np.zeros((3, 3))
    m[0, 0] = ct * cp
    m[0, 1] = -sp
    m[1, 0] = ct * sp
    m[1, 1] = cp
    m[2, 0] = -st
    m[2, 2] = 1.0
    return m


@njit(cache=True)
def _pi_e_inv(ang):
    ct, tt = np.cos(ang[1]), np.tan(ang[1])
    cp, sp = np.cos(ang[2]), np.sin(ang[2])
    m = np.zeros((3, 3))
    m[0, 0] = cp / ct
    m[0, 1] = sp / ct
    m[1, 0] = -sp
    m[1, 1] = cp
    m[2, 0] = cp * tt
    m[2, 1] = sp * tt
    m[2, 2] = 1.0
    return m


@njit(cache=True)
def _so3_coeffs(th):
    """sin(th)/th and (1 - cos(th))/th**2 with a series branch near 0."""
    if th < 1e-4:
        t2 = th * th
        return 1.0 - t2 / 6.0 + t2 * t2 / 120.0, 0.5 - t2 / 24.0 + t2 * t2 / 720.0
    return np.sin(th) / th, (1.0 - np.cos(th)) / (th * th)


@njit(cache=True)
def _so3_exp(w):
    th = np.sqrt(w[0] ** 2 + w[1] ** 2 + w[2] ** 2)
    a, b = _so3_coeffs(th)
    k = _hat(w)
    return np.eye(3) + a * k + b * _mm(k, k)


@njit(cache=True)
def _quat_exp(w):
    """Unit quaternion ``q`` with ``E(q) = exp(hat(w))``."""
    th = np.sqrt(w[0] ** 2 + w[1] ** 2 + w[2] ** 2)
    half = 0.5 * th
    if half < 1e-4:
        h2 = half * half
        s = 0.5 * (1.0 - h2 / 6.0 + h2 * h2 / 120.0)  # sin(half)/th
    else:
        s = np.sin(half) / th
    out = np.empty(4)
    out[0] = np.cos(half)
    out[1] = s * w[0]
    out[2] = s * w[1]
    out[3] = s * w[2]
    return out


# ---------------------------------------------------------------------------
# public API
# ---------------------------------------------------------------------------

def _vec(v, n=3):
    a = np.asarray(v, dtype=np.float64)
    if a.shape != (n,):
        raise ValueError(f"expected shape ({n},), got {a.shape}")
    return a


def _unit(q):
    q = _vec(q, 4)
    nrm = np.sqrt(q @ q)
    if abs(nrm - 1.0) > UNIT_TOL:
        raise NonUnitQuaternionError(f"quaternion norm {nrm!r} is not 1")
    return q / nrm


def hat(v):
    """Skew matrix with ``hat(v) @ u == cross(v, u)``."""
    return _hat(_vec(v))


def vee(m, tol=1e-10):
    """Inverse of :func:`hat`."""
    m = np.asarray(m, dtype=np.float64)
    if m.shape != (3, 3):
        raise ValueError(f"expected a 3x3 matrix, got shape {m.shape}")
    if np.linalg.norm(m + m.T) > tol:
        raise ValueError("matrix is not skew-symmetric")
    return np.array([m[2, 1], m[0, 2], m[1, 0]])


def quat_mul(p, q):
    """Quaternion product ``(p0 q0 - p.q, p0 q + q0 p + p x q)``."""
    return _quat_mul(_vec(p, 4), _vec(q, 4))


def quat_conj(q):
    q = _vec(q, 4)
    return np.array([q[0], -q[1], -q[2], -q[3]])


def quat_left(p):
    """Matrix ``L(p)`` with ``quat_mul(p, q) == L(p) @ q``."""
    p = _vec(p, 4)
    out = np.empty((4, 4))
    out[0, 0] = p[0]
    out[0, 1:] = -p[1:]
    out[1:, 0] = p[1:]
    out[1:, 1:] = p[0] * np.eye(3) + _hat(p[1:])
    return out


def quat_right(q):
    """Matrix ``R(q)`` with ``quat_mul(p, q) == R(q) @ p``."""
    q = _vec(q, 4)
    out = np.empty((4, 4))
    out[0, 0] = q[0]
    out[0, 1:] = -q[1:]
    out[1:, 0] = q[1:]
    out[1:, 1:] = q[0] * np.eye(3) - _hat(q[1:])
    return out


def euler_rodrigues(q):
    """Rotation matrix ``E(q) = I + 2 q0 hat(qv) + 2 hat(qv)^2`` of a unit quaternion.

    Inputs within ``UNIT_TOL`` of unit norm are renormalised; anything further
    off raises :class:`NonUnitQuaternionError`.
    """
    return _euler_rodrigues(_unit(q))


def quat_from_euler(angles):
    """Unit quaternion of ``R_z(psi) R_y(theta) R_x(phi)``, canonicalised to ``q0 >= 0``."""
    phi, theta, psi = (float(a) for a in angles)
    return _quat_from_euler(phi, theta, psi)


def euler_from_quat(q):
    """ZYX Euler angles ``(phi, theta, psi)`` of a unit quaternion.

    Raises
    ------
    GimbalLockError
        If the pitch is within ``EPS_GIMBAL`` of +-pi/2.
    """
    r = euler_rodrigues(q)
    if abs(r[2, 0]) >= _COS_EPS_GIMBAL:
        raise GimbalLockError("pitch at +-pi/2: Euler angles are singular")
    return EulerAngles(*_euler_from_rot(r))


def rot_x(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_z(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def pi_e(angles):
    """Matrix mapping Euler-angle rates to the spatial angular velocity."""
    return _pi_e(_vec(angles))


def _check_pitch(theta):
    if abs(abs(theta) - np.pi / 2) < EPS_GIMBAL or abs(theta) > np.pi / 2:
        raise GimbalLockError("Pi_e is not invertible for theta = +-pi/2")


def pi_e_inv(angles):
    """Analytic inverse of :func:`pi_e`; raises :class:`GimbalLockError` near theta = +-pi/2."""
    a = _vec(angles)
    _check_pitch(a[1])
    return _pi_e_inv(a)


def so3_exp(w):
    """Rodrigues formula for ``expm(hat(w))``."""
    return _so3_exp(_vec(w))


def quat_exp(w):
    """Unit quaternion whose rotation matrix is ``so3_exp(w)``."""
    return _quat_exp(_vec(w))
