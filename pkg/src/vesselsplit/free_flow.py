"""Exact flow of the conservative sub-system: free rigid body plus the
translational drift it carries along.

The angular velocity solves Euler's equations ``T w' = T w x w`` exactly via
Jacobi elliptic functions; the attitude is advanced with a truncated Magnus
expansion (orders 2, 4, 6) sampled at Gauss-Legendre nodes of that exact
``w(t)``.

The Euler-top solution is packed into a float array (see ``_top_setup``);
:class:`EulerTopSolution` is the readable view of it.
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np
from numba import njit

from .rotations import _cross, _euler_rodrigues, _mtv, _mv, _quat_exp, _quat_mul, _quat_normalize
from .special_functions import _ellipf, _sncndn

AXIS_TOL = 1e-12
SEPARATRIX_TOL = 1e-10

_SQ3 = np.sqrt(3.0)
_SQ15 = np.sqrt(15.0)

# packed solution layout
_CASE, _K, _LAM, _AMP, _PHASE, _PERM, _U0, _W0 = 0, 1, 2, slice(3, 6), slice(6, 9), slice(9, 12), 12, slice(13, 16)
N_SOL = 16


class TopCase(Enum):
    axis_equilibrium = 0
    generic_elliptic = 1
    separatrix = 2


@njit(cache=True)
def _top_setup(w0, T, with_phase=True):
    sol = np.zeros(N_SOL)
    sol[_W0] = w0
    m = T * w0
    wn = np.sqrt(np.sum(w0 * w0))
    mn = np.sqrt(np.sum(m * m))
    if wn == 0.0 or np.sqrt(np.sum(_cross(m, w0) ** 2)) <= AXIS_TOL * mn * wn:
        sol[_CASE] = 0.0
        return sol
    order = np.argsort(T)
    lo, mid, hi = order[0], order[1], order[2]
    tm = T[mid]
    # M^2 - 2 E T_mid without cancellation between the two invariants
    d_lo = T[lo] * w0[lo] ** 2 * (T[lo] - tm)
    d_hi = T[hi] * w0[hi] ** 2 * (T[hi] - tm)
    delta = d_lo + d_hi
    if delta >= 0.0:
        i1, i2, i3 = lo, mid, hi
    else:
        i1, i2, i3 = hi, mid, lo
    # relative to the two terms, not to M^2: near the middle axis both are tiny
    sep = abs(delta) < SEPARATRIX_TOL * (d_hi - d_lo)
    I1, I2, I3 = T[i1], T[i2], T[i3]
    w1, w2, w3 = w0[i1], w0[i2], w0[i3]
    P = I1 * (I3 - I1) * w1 * w1 + I2 * (I3 - I2) * w2 * w2  # 2 E I3 - M^2
    R = I2 * (I2 - I1) * w2 * w2 + I3 * (I3 - I1) * w3 * w3  # M^2 - 2 E I1
    a1 = np.sqrt(P / (I1 * (I3 - I1)))
    a2 = np.sqrt(P / (I2 * (I3 - I2)))
    a3 = np.sqrt(R / (I3 * (I3 - I1)))
    if w3 < 0.0:
        a3 = -a3
    if sep:
        k = 1.0
        if w1 < 0.0:
            a1 = -a1
    else:
        k = abs(np.sqrt(min(max((I2 - I1) * P / ((I3 - I2) * R), 0.0), 1.0)))
    # parity of the axis permutation flips the sign of the cross product
    parity = 1.0 if (i1, i2, i3) in ((0, 1, 2), (1, 2, 0), (2, 0, 1)) else -1.0
    lam = parity * (I3 - I1) / I2 * a3 * a1 / a2
    sn0, cn0 = w2 / a2, w1 / a1
    r = np.hypot(sn0, cn0)
    sn0, cn0 = sn0 / r, cn0 / r
    # from the data rather than sqrt(1 - k^2 sn0^2), which cancels near the separatrix
    dn0 = w3 / a3
    sol[_CASE] = 2.0 if sep else 1.0
    sol[_K] = k
    sol[_LAM] = lam
    sol[3], sol[4], sol[5] = a1, a2, a3
    sol[6], sol[7], sol[8] = sn0, cn0, dn0
    sol[9], sol[10], sol[11] = i1, i2, i3
    if not with_phase:
        pass
    elif sep:
        sol[_U0] = np.arctanh(min(max(sn0, -1.0 + 1e-16), 1.0 - 1e-16))
    else:
        sol[_U0] = _ellipf(np.arctan2(sn0, cn0), k)
    return sol


@njit(cache=True)
def _top_eval(sol, t):
    if sol[_CASE] == 0.0:
        return sol[_W0].copy()
    k = sol[_K]
    s, c, d = _sncndn(sol[_LAM] * t, k)
    sn0, cn0, dn0 = sol[6], sol[7], sol[8]
    den = 1.0 - k * k * sn0 * sn0 * s * s
    sn = (sn0 * c * d + s * cn0 * dn0) / den
    cn = (cn0 * c - sn0 * s * dn0 * d) / den
    dn = (dn0 * d - k * k * sn0 * s * cn0 * c) / den
    out = np.empty(3)
    out[int(sol[9])] = sol[3] * cn
    out[int(sol[10])] = sol[4] * sn
    out[int(sol[11])] = sol[5] * dn
    return out


@njit(cache=True)
def _magnus_left(a1, a2, a3, h, order):
    """Magnus exponent for Y' = hat(a(t)) Y from samples at the quadrature nodes."""
    if order == 2:
        return h * a1
    if order == 4:
        return 0.5 * h * (a1 + a2) + (_SQ3 / 12.0) * h * h * _cross(a2, a1)
    al1 = h * a2
    al2 = (_SQ15 * h / 3.0) * (a3 - a1)
    al3 = (10.0 * h / 3.0) * (a3 - 2.0 * a2 + a1)
    c1 = _cross(al1, al2)
    c2 = -_cross(al1, 2.0 * al3 + c1) / 60.0
    return al1 + al3 / 12.0 + _cross(-20.0 * al1 - al3 + c1, al2 + c2) / 240.0


@njit(cache=True)
def _magnus_omega(sol, gamma, order):
    """Rotation vector ``w`` with ``Q(gamma) = Q0 exp(hat(w))`` for Q' = Q hat(omega(t))."""
    if sol[_CASE] == 0.0:
        return gamma * sol[_W0]
    if order == 2:
        a1 = _top_eval(sol, 0.5 * gamma)
        a2 = a1
        a3 = a1
    elif order == 4:
        a1 = _top_eval(sol, (0.5 - _SQ3 / 6.0) * gamma)
        a2 = _top_eval(sol, (0.5 + _SQ3 / 6.0) * gamma)
        a3 = a2
    else:
        a1 = _top_eval(sol, (0.5 - _SQ15 / 10.0) * gamma)
        a2 = _top_eval(sol, 0.5 * gamma)
        a3 = _top_eval(sol, (0.5 + _SQ15 / 10.0) * gamma)
    # right-multiplied form: Omega[a] = -Omega_left[-a]
    return -_magnus_left(-a1, -a2, -a3, gamma, order)


@njit(cache=True)
def _magnus_attitude(q0, sol, gamma, order):
    return _quat_normalize(_quat_mul(q0, _quat_exp(_magnus_omega(sol, gamma, order))))


@njit(cache=True)
def _s1_flow(y, gamma, T, x_ref, order):
    out = y.copy()
    if gamma == 0.0:
        return out
    sol = _top_setup(y[0:3], T, False)
    out[0:3] = _top_eval(sol, gamma)
    q = _magnus_attitude(y[3:7], sol, gamma, order)
    out[3:7] = q
    rot0 = _euler_rodrigues(y[3:7])
    vs = _mv(rot0, y[7:10])  # spatial velocity, constant along this flow
    out[7:10] = _mtv(_euler_rodrigues(q), vs)
    out[10:13] = y[10:13] + gamma * vs
    out[16:19] = y[16:19] + gamma * (y[10:13] - x_ref) + 0.5 * gamma * gamma * vs
    return out


# ---------------------------------------------------------------------------
# public API
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EulerTopSolution:
    """Exact angular velocity of a torque-free rigid body with diagonal inertia.

    For the elliptic cases, in the permuted axes ``axis_permutation``::

        w = (a1 cn(u), a2 sn(u), a3 dn(u)),  u = frequency * t + phase

    Call the object with a time to evaluate ``w(t)`` in the original axes.
    """

    packed: np.ndarray

    @property
    def case_tag(self):
        return TopCase(int(self.packed[_CASE]))

    @property
    def modulus(self):
        return float(self.packed[_K])

    @property
    def frequency(self):
        return float(self.packed[_LAM])

    @property
    def amplitudes(self):
        return self.packed[_AMP].copy()

    @property
    def phase(self):
        return float(self.packed[_U0])

    @property
    def axis_permutation(self):
        return tuple(int(i) for i in self.packed[_PERM])

    def __call__(self, t):
        return _top_eval(self.packed, float(t))


def solve_euler_top(omega0, T):
    """Classify the initial angular velocity and build the exact Euler-top solution."""
    T = np.asarray(T, dtype=np.float64)
    if T.shape == (3, 3):
        T = np.diag(T).copy()
    if np.any(T <= 0):
        raise ValueError("inertia must be positive definite")
    return EulerTopSolution(_top_setup(np.asarray(omega0, dtype=np.float64), T))


def _check_order(order):
    if order not in (2, 4, 6):
        raise ValueError(f"Magnus order must be 2, 4 or 6, got {order!r}")


def magnus_attitude(q0, sol, gamma, order=4):
    """Advance ``q' = q omega(t) / 2`` over ``gamma`` with a Magnus method of the given order."""
    _check_order(order)
    return _magnus_attitude(np.asarray(q0, dtype=np.float64), sol.packed, float(gamma), int(order))


def s1_flow(s, gamma, params, ctrl, order=4):
    """Exact (up to the Magnus truncation) flow of the conservative part over ``gamma``.

    Returns a new :class:`~vesselsplit.vessel_model.State`.
    """
    from .vessel_model import State

    _check_order(order)
    y = s.to_array() if isinstance(s, State) else np.asarray(s, dtype=np.float64)
    return State.from_array(_s1_flow(y, float(gamma), params.T, ctrl.x_ref, int(order)))
