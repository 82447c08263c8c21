"""Symmetric splitting compositions and the reference Runge-Kutta methods.

A splitting step of size ``h`` applies the palindromic product

    S2(a1 h) S1(b1 h) S2(a2 h) ... S2(a_{m+1} h) ... S1(b1 h) S2(a1 h)

where ``S1`` is the exact free-rigid-body flow and ``S2`` the exact linear
flow.  The product is expanded once into a flat list of ``(kind, weight)``
pairs; zero weights are dropped and neighbouring flows of the same kind merged.

:func:`integrate` drives any method on a uniform grid, switches the
controller on at ``t_on`` (resetting the integral states) and flags
divergence instead of raising.
"""

from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from numba import njit

from .free_flow import _s1_flow
from .linear_flow import _s2_flow
from .rotations import _COS_EPS_GIMBAL, _euler_rodrigues, _quat_normalize
from .vessel_model import _P_T, _C_XREF, State, _check_gimbal, _diagnostics, _rhs, _state_array

#: ``integrate`` stops with an unstable verdict once ``|omega|`` exceeds this.
OMEGA_MAX = 1e6
#: same for ``|v|``; the translational block can blow up while omega stays bounded
V_MAX = 1e6

_S1, _S2 = 1, 2
_IE, _RK4, _SPLIT = 0, 1, 2
_OK, _DIVERGED, _GIMBAL = 0, 1, 2


@dataclass(frozen=True)
class SchemeCoefficients:
    """Coefficients ``a`` (S2 durations, ``m + 1`` values) and ``b`` (S1, ``m`` values)."""

    a: tuple
    b: tuple
    order: int
    name: str

    def __post_init__(self):
        if len(self.a) != len(self.b) + 1:
            raise ValueError("a palindromic scheme needs len(a) == len(b) + 1")

    def sequence(self):
        """Fully expanded ``[(kind, weight), ...]`` with ``kind`` in {"S1", "S2"}."""
        m = len(self.b)
        half = []
        for i in range(m):
            half += [("S2", self.a[i]), ("S1", self.b[i])]
        raw = half + [("S2", self.a[m])] + half[::-1]
        out = []
        for kind, w in raw:
            if w == 0.0:
                continue
            if out and out[-1][0] == kind:
                out[-1] = (kind, out[-1][1] + w)
            else:
                out.append((kind, w))
        return out

    def packed(self):
        seq = self.sequence()
        kinds = np.array([_S1 if k == "S1" else _S2 for k, _ in seq], dtype=np.int64)
        return kinds, np.array([w for _, w in seq])


def strang_coefficients():
    return SchemeCoefficients(a=(0.5, 0.0), b=(0.5,), order=2, name="SP2")


def sp4_coefficients():
    a1 = 0.0792036964311956500000000000000000000000
    a2 = 0.353172906049773728818833445330
    a3 = -0.042065080357719520000000000000000000000
    b1 = 0.209515106613361881525060713987
    b2 = -0.14385177317981800000000000000000000
    a4 = 1.0 - 2.0 * (a1 + a2 + a3)
    b3 = 0.5 - (b1 + b2)
    return SchemeCoefficients(a=(a1, a2, a3, a4), b=(b1, b2, b3), order=4, name="SP4")


def sp6_coefficients():
    a1 = 0.0502627644003923808654389538920
    a2 = 0.413514300428346618921141630839
    a3 = 0.045079889794397660000000000000000000
    a4 = -0.188054853819571375656897886496
    a5 = 0.541960678450781151905056284542
    b1 = 0.148816447901042828823498193483
    b2 = -0.132385865767782744686048193902
    b3 = 0.0673076046921849473963237618218
    b4 = 0.432666402578172649872653897748
    a6 = 1.0 - 2.0 * (a1 + a2 + a3 + a4 + a5)
    b5 = 0.5 - (b1 + b2 + b3 + b4)
    return SchemeCoefficients(a=(a1, a2, a3, a4, a5, a6), b=(b1, b2, b3, b4, b5), order=6, name="SP6")


SCHEMES = {"SP2": strang_coefficients, "SP4": sp4_coefficients, "SP6": sp6_coefficients}
METHODS = ("IE", "RK4", "SP2", "SP4", "SP6")


# ---------------------------------------------------------------------------
# compiled steps
# ---------------------------------------------------------------------------

@njit(cache=True)
def _renormalize(y):
    y[3:7] = _quat_normalize(y[3:7])
    return y


@njit(cache=True)
def _split_step(y, h, kinds, weights, p, c, active, morder):
    T = p[_P_T]
    x_ref = c[_C_XREF]
    for i in range(kinds.shape[0]):
        if kinds[i] == _S1:
            y = _s1_flow(y, weights[i] * h, T, x_ref, morder)
        else:
            y = _s2_flow(y, weights[i] * h, p, c, active)
    return _renormalize(y)


@njit(cache=True)
def _rk4_step(y, h, p, c, active):
    k1 = _rhs(y, p, c, active)
    k2 = _rhs(y + 0.5 * h * k1, p, c, active)
    k3 = _rhs(y + 0.5 * h * k2, p, c, active)
    k4 = _rhs(y + h * k3, p, c, active)
    return _renormalize(y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4))


@njit(cache=True)
def _ie_step(y, h, p, c, active):
    k1 = _rhs(y, p, c, active)
    k2 = _rhs(y + h * k1, p, c, active)
    return _renormalize(y + (0.5 * h) * (k1 + k2))


@njit(cache=True)
def _step(y, h, method, kinds, weights, p, c, active, morder):
    if method == _RK4:
        return _rk4_step(y, h, p, c, active)
    if method == _IE:
        return _ie_step(y, h, p, c, active)
    return _split_step(y, h, kinds, weights, p, c, active, morder)


@njit(cache=True)
def _status(y, active):
    for i in range(y.shape[0]):
        if not np.isfinite(y[i]):
            return _DIVERGED
    if np.sqrt(y[0] ** 2 + y[1] ** 2 + y[2] ** 2) > OMEGA_MAX:
        return _DIVERGED
    if np.sqrt(y[7] ** 2 + y[8] ** 2 + y[9] ** 2) > V_MAX:
        return _DIVERGED
    if active and abs(_euler_rodrigues(y[3:7])[2, 0]) >= _COS_EPS_GIMBAL:
        return _GIMBAL
    return _OK


@njit(cache=True)
def _run(y0, t0, n_full, h, rem, method, kinds, weights, p, c, t_on, split_on, morder, stride, out):
    """Fixed-step loop; returns ``(n_recorded, status, n_steps_done)``.

    Rows of ``out`` receive the state at step indices 0, stride, 2 stride, ...
    and the final state.  The step containing ``t_on`` is split there when
    ``split_on`` is set, otherwise the controller starts at the first grid
    point at or after ``t_on``.
    """
    tol = 1e-9 * h
    y = y0.copy()
    active = t0 >= t_on - tol
    out[0] = y
    n_rec = 1
    n_total = n_full + (1 if rem > 0.0 else 0)
    for n in range(n_total):
        t = t0 + n * h
        hn = h if n < n_full else rem
        if not active and t >= t_on - tol:
            active = True
            y[13:19] = 0.0
        status = _status(y, active)
        if status != _OK:
            return n_rec, status, n
        if not active and split_on and t + hn > t_on + tol:
            y = _step(y, t_on - t, method, kinds, weights, p, c, False, morder)
            y[13:19] = 0.0
            active = True
            status = _status(y, active)
            if status != _OK:
                return n_rec, status, n
            y = _step(y, t + hn - t_on, method, kinds, weights, p, c, True, morder)
        else:
            y = _step(y, hn, method, kinds, weights, p, c, active, morder)
        if (n + 1) % stride == 0 or n + 1 == n_total:
            out[n_rec] = y
            n_rec += 1
    status = _status(y, active)
    if status == _GIMBAL:
        status = _OK  # the final state is never used to build a control
    return n_rec, status, n_total


# ---------------------------------------------------------------------------
# public API
# ---------------------------------------------------------------------------

class Verdict(str, Enum):
    completed = "completed"
    unstable = "unstable"


@dataclass
class Trajectory:
    """Recorded states with energy and scaled control norms at the same instants."""

    times: np.ndarray
    states: np.ndarray  # (n, 19) packed states
    hamiltonians: np.ndarray
    control_norms: np.ndarray  # (n, 2): |T^-1 tau_r|, |m_v^-1 tau_t|
    verdict: Verdict = Verdict.completed
    method: str = ""
    h: float = 0.0
    message: str = ""
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.times)

    def state(self, i):
        return State.from_array(self.states[i])

    @property
    def final(self):
        return State.from_array(self.states[-1])


def _method_args(method, magnus_order):
    if method == "IE":
        return _IE, np.zeros(0, np.int64), np.zeros(0), 2
    if method == "RK4":
        return _RK4, np.zeros(0, np.int64), np.zeros(0), 2
    if method in SCHEMES:
        scheme = SCHEMES[method]()
    elif isinstance(method, SchemeCoefficients):
        scheme = method
    else:
        raise ValueError(f"unknown method {method!r}; expected one of {', '.join(METHODS)}")
    kinds, weights = scheme.packed()
    order = scheme.order if magnus_order is None else int(magnus_order)
    if order not in (2, 4, 6):
        raise ValueError(f"Magnus order must be 2, 4 or 6, got {order!r}")
    return _SPLIT, kinds, weights, order


def splitting_step(s, h, scheme, params, ctrl, active=True, magnus_order=None):
    """One step of a symmetric splitting scheme (Magnus order defaults to the scheme order)."""
    y = _state_array(s)
    if active:
        _check_gimbal(y)
    if isinstance(scheme, str):
        scheme = SCHEMES[scheme]()
    _, kinds, weights, order = _method_args(scheme, magnus_order)
    return State.from_array(_split_step(y.copy(), float(h), kinds, weights, params.pack(),
                                        ctrl.pack(), bool(active), order))


def rk4_step(s, h, params, ctrl, active=True):
    y = _state_array(s)
    if active:
        _check_gimbal(y)
    return State.from_array(_rk4_step(y, float(h), params.pack(), ctrl.pack(), bool(active)))


def improved_euler_step(s, h, params, ctrl, active=True):
    """Heun's method (explicit trapezoidal rule)."""
    y = _state_array(s)
    if active:
        _check_gimbal(y)
    return State.from_array(_ie_step(y, float(h), params.pack(), ctrl.pack(), bool(active)))


def grid(t0, t_end, h):
    """Number of full steps and the length of the trailing partial step."""
    span = t_end - t0
    n_full = int(np.floor(span / h + 1e-9))
    rem = span - n_full * h
    if rem <= 1e-9 * h:
        rem = 0.0
    return n_full, rem


def integrate(s0, t0, t_end, h, method, params, ctrl, stride=1, magnus_order=None,
              activation="split", diagnostics=True):
    """Integrate from ``t0`` to ``t_end`` with fixed step ``h``.

    Parameters
    ----------
    method : str or SchemeCoefficients
        ``"IE"``, ``"RK4"``, ``"SP2"``, ``"SP4"``, ``"SP6"`` or custom coefficients.
    stride : int
        Record every ``stride``-th step (the final state is always recorded).
    activation : {"split", "boundary"}
        ``"split"`` ends a sub-step exactly at ``ctrl.t_on``; ``"boundary"``
        switches the controller on at the first grid point at or after it.
        Either way the integral states are reset to zero at the switch.
    diagnostics : bool
        Compute the Hamiltonian and control norms of the recorded states.

    Returns
    -------
    Trajectory
        With ``verdict == "unstable"`` when the run diverged (non-finite
        values, ``|omega| > OMEGA_MAX`` or ``|v| > V_MAX``) or hit the gimbal singularity while
        controlled; the recorded data then stop at the last good record.
    """
    if not h > 0:
        raise ValueError(f"step size must be positive, got {h!r}")
    if not t_end > t0:
        raise ValueError("t_end must be larger than t0")
    if stride < 1:
        raise ValueError("stride must be a positive integer")
    if activation not in ("split", "boundary"):
        raise ValueError(f"activation must be 'split' or 'boundary', got {activation!r}")
    mid, kinds, weights, morder = _method_args(method, magnus_order)
    y0 = _state_array(s0).copy()
    if abs(np.linalg.norm(y0[3:7]) - 1.0) > 1e-8:
        raise ValueError("initial quaternion is not a unit quaternion")
    y0[3:7] /= np.linalg.norm(y0[3:7])
    n_full, rem = grid(t0, t_end, h)
    n_total = n_full + (rem > 0)
    out = np.empty((n_total // stride + 2, y0.size))
    p, c = params.pack(), ctrl.pack()
    t_on = float(ctrl.t_on)
    n_rec, status, n_done = _run(y0, float(t0), n_full, float(h), rem, mid, kinds, weights, p, c,
                                 t_on, activation == "split", morder, int(stride), out)
    steps = np.arange(n_rec) * stride
    if status == _OK:
        steps[-1] = n_total
    times = t0 + np.minimum(steps, n_full) * h
    if status == _OK and rem > 0:
        times[-1] = t_end
    states = out[:n_rec].copy()
    name = method if isinstance(method, str) else method.name
    traj = Trajectory(times, states, np.full(n_rec, np.nan), np.full((n_rec, 2), np.nan),
                      method=name, h=float(h))
    if status != _OK:
        traj.verdict = Verdict.unstable
        t_fail = t0 + n_done * h
        what = "diverged" if status == _DIVERGED else "reached pitch +-pi/2 under control"
        traj.message = f"{name} h={h:g}: solution {what} at t={t_fail:.6g}"
        traj.meta["t_fail"] = t_fail
    if diagnostics:
        active = times >= t_on - 1e-9 * h
        if activation == "boundary":
            # the switch happens at the first grid point at or after t_on
            active = times >= t0 + np.ceil((t_on - t0) / h - 1e-9) * h - 1e-9 * h
        d = _diagnostics(states, p, c, active)
        traj.hamiltonians = d[:, 0]
        traj.control_norms = d[:, 1:]
    return traj
