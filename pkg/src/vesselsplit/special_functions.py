"""Jacobi elliptic functions, the complete elliptic integral K, small dense
matrix exponentials and the phi-functions of exponential integrators.

phi_k(Z) = 1/(k-1)! * int_0^1 exp(Z (1 - x)) x^(k-1) dx, so that
exp(Z) = I + Z phi_1(Z) and phi_1(Z) = I + Z phi_2(Z).
"""

from typing import NamedTuple

import numpy as np
from numba import njit

_EPS = 2.220446049250313e-16
_K_MAX = 1.0 - 1e-12


class EllipticTriple(NamedTuple):
    sn: float
    cn: float
    dn: float


# ---------------------------------------------------------------------------
# elliptic functions
# ---------------------------------------------------------------------------

@njit(cache=True)
def _agm(a, b):
    for _ in range(64):
        if abs(a - b) <= _EPS * a:
            break
        a, b = 0.5 * (a + b), np.sqrt(a * b)
    return 0.5 * (a + b)


@njit(cache=True)
def _ellipk(k):
    return 0.5 * np.pi / _agm(1.0, np.sqrt((1.0 - k) * (1.0 + k)))


@njit(cache=True)
def _sncndn(u, k):
    """Descending Landen (AGM) evaluation of sn, cn, dn for 0 <= k <= 1."""
    if k == 0.0:
        return np.sin(u), np.cos(u), 1.0
    if k >= 1.0:
        t = np.tanh(u)
        s = 1.0 / np.cosh(u)
        return t, s, s
    a = np.empty(40)
    c = np.empty(40)
    a[0] = 1.0
    b = np.sqrt((1.0 - k) * (1.0 + k))
    c[0] = k
    n = 0
    while abs(c[n]) > _EPS * a[n] and n < 39:
        a[n + 1] = 0.5 * (a[n] + b)
        c[n + 1] = 0.5 * (a[n] - b)
        b = np.sqrt(a[n] * b)
        n += 1
    phi = (2.0 ** n) * a[n] * u
    for j in range(n, 0, -1):
        phi = 0.5 * (phi + np.arcsin(c[j] / a[j] * np.sin(phi)))
    sn = np.sin(phi)
    cn = np.cos(phi)
    # 1 - k^2 sn^2 written as a sum of two nonnegative terms
    dn = np.sqrt(cn * cn + (1.0 - k) * (1.0 + k) * sn * sn)
    return sn, cn, dn


@njit(cache=True)
def _carlson_rf(x, y, z):
    for _ in range(100):
        sx, sy, sz = np.sqrt(x), np.sqrt(y), np.sqrt(z)
        lam = sx * sy + sy * sz + sz * sx
        x, y, z = 0.25 * (x + lam), 0.25 * (y + lam), 0.25 * (z + lam)
        mu = (x + y + z) / 3.0
        dx, dy, dz = 1.0 - x / mu, 1.0 - y / mu, 1.0 - z / mu
        if max(abs(dx), abs(dy), abs(dz)) < 1e-4:
            break
    e2 = dx * dy - dz * dz
    e3 = dx * dy * dz
    return (1.0 + (e2 / 24.0 - 0.1 - 3.0 * e3 / 44.0) * e2 + e3 / 14.0) / np.sqrt(mu)


@njit(cache=True)
def _ellipf(phi, k):
    """Incomplete elliptic integral of the first kind F(phi, k), any real phi, k < 1."""
    n = np.floor(phi / np.pi + 0.5)
    r = phi - n * np.pi
    s, c = np.sin(r), np.cos(r)
    f = s * _carlson_rf(c * c, 1.0 - k * k * s * s, 1.0)
    if n != 0.0:
        f += 2.0 * n * _ellipk(k)
    return f


def elliptic_K(k):
    """Complete elliptic integral of the first kind, modulus convention.

    Raises ``ValueError`` outside ``0 <= k < 1 - 1e-12`` (K diverges as k -> 1).
    """
    k = float(k)
    if not 0.0 <= k < _K_MAX:
        raise ValueError(f"elliptic_K: modulus {k!r} outside [0, 1)")
    return _ellipk(k)


def elliptic_F(phi, k):
    k = float(k)
    if not 0.0 <= k < _K_MAX:
        raise ValueError(f"elliptic_F: modulus {k!r} outside [0, 1)")
    return _ellipf(float(phi), k)


def jacobi_sn_cn_dn(u, k):
    """Jacobi elliptic functions ``sn, cn, dn`` at real ``u`` for modulus ``0 <= k <= 1``.

    ``k = 0`` gives ``(sin u, cos u, 1)`` and ``k = 1`` gives ``(tanh u, sech u, sech u)``.
    """
    k = float(k)
    if not 0.0 <= k <= 1.0:
        raise ValueError(f"jacobi_sn_cn_dn: modulus {k!r} outside [0, 1]")
    return EllipticTriple(*_sncndn(float(u), k))


# ---------------------------------------------------------------------------
# matrix exponential and phi-functions
# ---------------------------------------------------------------------------

@njit(cache=True)
def _mm_into(a, b, out):
    n = a.shape[0]
    for i in range(n):
        for j in range(n):
            acc = 0.0
            for k in range(n):
                acc += a[i, k] * b[k, j]
            out[i, j] = acc


_INV_FACT = np.array([1.0 / np.prod(np.arange(1.0, k + 1.0)) for k in range(13)])


@njit(cache=True)
def _expm(z):
    """Scaling and squaring around a degree-12 Taylor polynomial.

    Z is scaled so that ||Z / 2^s||_inf <= 1/4, which puts the truncation
    error below 3e-18; the polynomial is evaluated Paterson-Stockmeyer style
    in powers of Z^4 (six matrix products).
    """
    n = z.shape[0]
    nrm = 0.0
    for i in range(n):
        row = 0.0
        for j in range(n):
            row += abs(z[i, j])
        if not np.isfinite(row):
            nrm = np.inf
            break
        nrm = max(nrm, row)
    if nrm > 1e300:
        # diverged input; let the caller's divergence check see it
        return np.full((n, n), np.nan)
    s = 0
    if nrm > 0.25:
        s = int(np.ceil(np.log2(nrm / 0.25)))
    z1 = z / (2.0 ** s)
    z2 = np.empty((n, n))
    z3 = np.empty((n, n))
    z4 = np.empty((n, n))
    _mm_into(z1, z1, z2)
    _mm_into(z2, z1, z3)
    _mm_into(z2, z2, z4)
    c = _INV_FACT
    # p = B0 + Z4 (B1 + Z4 (B2 + Z4 c12)), Bk = sum_j c[4k+j] Z^j
    e = np.empty((n, n))
    tmp = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            e[i, j] = c[12] * z4[i, j] + c[9] * z1[i, j] + c[10] * z2[i, j] + c[11] * z3[i, j]
        e[i, i] += c[8]
    for k in (1, 0):
        _mm_into(z4, e, tmp)
        for i in range(n):
            for j in range(n):
                e[i, j] = (tmp[i, j] + c[4 * k + 1] * z1[i, j] + c[4 * k + 2] * z2[i, j]
                           + c[4 * k + 3] * z3[i, j])
            e[i, i] += c[4 * k]
    for _ in range(s):
        _mm_into(e, e, tmp)
        e, tmp = tmp, e
    return e


@njit(cache=True)
def _phi_matrices(z):
    n = z.shape[0]
    big = np.zeros((3 * n, 3 * n))
    big[:n, :n] = z
    for i in range(n):
        big[i, n + i] = 1.0
        big[n + i, 2 * n + i] = 1.0
    e = _expm(big)
    return e[:n, :n].copy(), e[:n, n:2 * n].copy(), e[:n, 2 * n:].copy()


@njit(cache=True)
def _phi_action(a, gamma, y0, w1, w2):
    """exp(gA) y0 + g phi1(gA) w1 + g^2 phi2(gA) w2 via one augmented exponential.

    The augmentation is (n+2)-square, or (n+1)-square when ``w2`` vanishes.
    """
    n = a.shape[0]
    quad = False
    for i in range(n):
        if w2[i] != 0.0:
            quad = True
    k = n + 2 if quad else n + 1
    m = np.zeros((k, k))
    # scale the forcing columns to the size of gamma A so they do not drive
    # the squaring count; the result is scaled back below
    na = 0.0
    nw = 0.0
    for i in range(n):
        row = 0.0
        for j in range(n):
            m[i, j] = gamma * a[i, j]
            row += abs(m[i, j])
        na = max(na, row)
        nw = max(nw, abs(gamma * w1[i]), abs(gamma * w2[i]))
    beta = 1.0
    if nw > 0.0:
        beta = nw / max(na, abs(gamma))
    for i in range(n):
        m[i, k - 1] = gamma * w1[i] / beta
        if quad:
            m[i, n] = gamma * w2[i] / beta
    if quad:
        m[n, n + 1] = gamma
    e = _expm(m)
    out = np.empty(n)
    for i in range(n):
        acc = e[i, k - 1] * beta
        for j in range(n):
            acc += e[i, j] * y0[j]
        out[i] = acc
    return out


def _square(z):
    z = np.asarray(z, dtype=np.float64)
    if z.ndim != 2 or z.shape[0] != z.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {z.shape}")
    return z


def expm3(z):
    """Matrix exponential of a small dense matrix (designed for 3x3)."""
    return _expm(np.ascontiguousarray(_square(z)))


def phi1(z):
    return _phi_matrices(np.ascontiguousarray(_square(z)))[1]


def phi2(z):
    return _phi_matrices(np.ascontiguousarray(_square(z)))[2]


def phi_functions(z):
    """``(exp(Z), phi_1(Z), phi_2(Z))`` from a single block-augmented exponential."""
    return _phi_matrices(np.ascontiguousarray(_square(z)))
