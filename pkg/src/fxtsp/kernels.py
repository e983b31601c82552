"""Compiled vector-field kernels for the built-in systems.

Every kernel takes a model kind, a flat parameter vector and preallocated
output buffers, so a single cached integrator core can serve all models.
The fast kernel is written in boundary-layer form g(x, y + h(x)) so that
tiny offsets y from the slow manifold never pass through z, where they
would be lost to rounding.  Division by eps happens in the integrator.

Parameter layouts:

* ``KIND_DECAY``: ``[slow_rate, fast_rate]``; xdot = -a x, eps zdot = -b z.
* ``KIND_HIGHORDER``: ``[xi1, xi2]``.
* ``KIND_GRADFLOW``: ``[n, k, nu, xi1, xi2, Q (row-major n*n), A (n*n)]``.
* ``KIND_LAYER``: ``[xi]``; xdot = -sgnpow(x, xi) - x^3 and the same law for
  eps zdot, h = 0.  Two decoupled copies of a scalar fixed-time layer.
"""

import numpy as np
from numba import njit

KIND_DECAY = 0
KIND_HIGHORDER = 1
KIND_GRADFLOW = 2
KIND_LAYER = 3

# Below this norm a power term is treated as exactly zero.
TINY = 1e-300


@njit(cache=True)
def nnpow(a, p):
    """a**p for a >= 0, with 0**p = 0."""
    if a <= 0.0:
        return 0.0
    return np.exp(p * np.log(a))


@njit(cache=True)
def spow(v, p):
    """Signed power |v|**p * sign(v)."""
    a = abs(v)
    if a < TINY:
        return 0.0
    r = np.exp(p * np.log(a))
    return r if v > 0.0 else -r


@njit(cache=True)
def dspow(v, p):
    """Derivative of the signed power, with |v| floored at TINY."""
    a = max(abs(v), TINY)
    return p * np.exp((p - 1.0) * np.log(a))


@njit(cache=True)
def vpow(v, xi, out):
    """out = v / |v|**xi, zero below the underflow guard."""
    r = np.sqrt(np.sum(v * v))
    if r < TINY:
        out[:] = 0.0
        return
    s = np.exp(-xi * np.log(r))
    for i in range(v.size):
        out[i] = v[i] * s


@njit(cache=True)
def vpow_jac_add(v, xi, scale, J):
    """J += scale * d(v / |v|**xi)/dv."""
    r = np.sqrt(np.sum(v * v))
    n = v.size
    if r < TINY:
        s = np.exp(-xi * np.log(TINY))
        for i in range(n):
            J[i, i] += scale * s
        return
    s = np.exp(-xi * np.log(r))
    for i in range(n):
        J[i, i] += scale * s
        for j in range(n):
            J[i, j] -= scale * s * xi * v[i] * v[j] / (r * r)


@njit(cache=True)
def _gf_unpack(p):
    n = int(p[0])
    Q = p[5:5 + n * n].reshape((n, n))
    A = p[5 + n * n:5 + 2 * n * n].reshape((n, n))
    return n, p[1], p[2], p[3], p[4], Q, A


@njit(cache=True)
def slow(kind, p, x, z, out):
    if kind == KIND_DECAY:
        for i in range(x.size):
            out[i] = -p[0] * x[i]
    elif kind == KIND_HIGHORDER:
        xi1 = p[0]
        out[0] = -spow(x[0], xi1) - x[0] ** 3 + z[0]
        out[1] = -spow(z[0], xi1) - z[0] ** 3 - x[0]
    elif kind == KIND_LAYER:
        out[0] = -spow(x[0], p[0]) - x[0] ** 3
    else:
        n, k, nu, xi1, xi2, Q, A = _gf_unpack(p)
        grad = Q @ z
        t1 = np.empty(n)
        t2 = np.empty(n)
        vpow(grad, xi1, t1)
        vpow(grad, xi2, t2)
        for i in range(n):
            out[i] = -k * (t1[i] + t2[i])


@njit(cache=True)
def fast_bl(kind, p, x, y, out):
    """Fast field in boundary-layer form, g(x, y + h(x)), taken from y directly."""
    if kind == KIND_DECAY:
        for i in range(y.size):
            out[i] = -p[1] * y[i]
    elif kind == KIND_HIGHORDER:
        w = y[0]
        out[0] = -spow(w, p[1]) - w ** 3
    elif kind == KIND_LAYER:
        out[0] = -spow(y[0], p[0]) - y[0] ** 3
    else:
        n, k, nu, xi1, xi2, Q, A = _gf_unpack(p)
        t1 = np.empty(n)
        t2 = np.empty(n)
        vpow(y, xi1, t1)
        vpow(y, xi2, t2)
        ay = A @ y
        for i in range(n):
            out[i] = ay[i] - nu * (t1[i] + t2[i])


@njit(cache=True)
def qss(kind, p, x, out):
    """Quasi-steady-state map h(x)."""
    if kind == KIND_DECAY or kind == KIND_LAYER:
        out[:] = 0.0
    elif kind == KIND_HIGHORDER:
        out[0] = x[1]
    else:
        out[:] = x


@njit(cache=True)
def qss_jac(kind, p, x, D):
    """Jacobian dh/dx (M x N)."""
    D[:, :] = 0.0
    if kind == KIND_HIGHORDER:
        D[0, 1] = 1.0
    elif kind == KIND_GRADFLOW:
        for i in range(x.size):
            D[i, i] = 1.0


@njit(cache=True)
def slow_jac(kind, p, x, z, Jx, Jz):
    Jx[:, :] = 0.0
    Jz[:, :] = 0.0
    if kind == KIND_DECAY:
        for i in range(x.size):
            Jx[i, i] = -p[0]
    elif kind == KIND_HIGHORDER:
        xi1 = p[0]
        Jx[0, 0] = -dspow(x[0], xi1) - 3.0 * x[0] ** 2
        Jz[0, 0] = 1.0
        Jx[1, 0] = -1.0
        Jz[1, 0] = -dspow(z[0], xi1) - 3.0 * z[0] ** 2
    elif kind == KIND_LAYER:
        Jx[0, 0] = -dspow(x[0], p[0]) - 3.0 * x[0] ** 2
    else:
        n, k, nu, xi1, xi2, Q, A = _gf_unpack(p)
        grad = Q @ z
        D = np.zeros((n, n))
        vpow_jac_add(grad, xi1, -k, D)
        vpow_jac_add(grad, xi2, -k, D)
        Jz[:, :] = D @ Q


@njit(cache=True)
def fast_bl_jac(kind, p, x, y, Jx, Jy):
    """Partials of g(x, y + h(x)) with respect to x (through h) and y."""
    Jx[:, :] = 0.0
    Jy[:, :] = 0.0
    if kind == KIND_DECAY:
        for i in range(y.size):
            Jy[i, i] = -p[1]
    elif kind == KIND_HIGHORDER:
        w = y[0]
        Jy[0, 0] = -dspow(w, p[1]) - 3.0 * w * w
    elif kind == KIND_LAYER:
        Jy[0, 0] = -dspow(y[0], p[0]) - 3.0 * y[0] ** 2
    else:
        n, k, nu, xi1, xi2, Q, A = _gf_unpack(p)
        D = A.copy()
        vpow_jac_add(y, xi1, -nu, D)
        vpow_jac_add(y, xi2, -nu, D)
        Jy[:, :] = D
