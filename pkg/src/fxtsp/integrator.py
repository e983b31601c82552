"""Compiled stiff integrator for two-time-scale systems.

The state is advanced in boundary-layer coordinates u = (x, y) with
y = z - h(x), using the shifted field (f, g/eps - dh f).  Near the slow
manifold the fast offset y is far below the floating-point spacing of z,
so working with y directly is what keeps the fast dynamics resolvable.

The scheme is the L-stable, stiffly accurate ESDIRK3(2)4L[2]SA tableau of
Kennedy and Carpenter with its embedded second-order estimate.  Stage
equations are solved by Newton iteration on analytic Jacobians; when a
full step fails to reduce the residual (Hölder terms with exponent below
1/2 make plain Newton overshoot), a golden-section search picks the step
length.
"""

import numpy as np
from numba import njit

from .kernels import fast_bl, fast_bl_jac, qss, qss_jac, slow, slow_jac

_G = 1767732205903.0 / 4055673282236.0
ESDIRK_A = np.array([
    [0.0, 0.0, 0.0, 0.0],
    [_G, _G, 0.0, 0.0],
    [2746238789719.0 / 10658868560708.0, -640167445237.0 / 6845629431997.0, _G, 0.0],
    [1471266399579.0 / 7840856788654.0, -4482444167858.0 / 7529755066697.0,
     11266239266428.0 / 11593286722821.0, _G],
])
ESDIRK_B = ESDIRK_A[3].copy()
ESDIRK_BHAT = np.array([
    2756255671327.0 / 12835298489170.0, -10771552573575.0 / 22201958757719.0,
    9247589265047.0 / 10645013368117.0, 2193209047091.0 / 5459859503100.0,
])

STATUS_OK = 0
STATUS_UNDERFLOW = 1
STATUS_DIVERGED = 2
STATUS_BUDGET = 3

_EPS_MACH = 2.220446049250313e-16
_NEWTON_TOL = 1e-5
_NEWTON_ITERS = 60
_MAX_CONSECUTIVE_REJECTS = 400
_DIVERGENCE_NORM = 1e150


@njit(cache=True)
def shifted_rhs(kind, p, n_slow, eps, u, out):
    """Shifted field at u = (x, y); writes (f, g/eps - dh f) into out."""
    m = u.size - n_slow
    x = u[:n_slow]
    z = np.empty(m)
    qss(kind, p, x, z)
    for i in range(m):
        z[i] += u[n_slow + i]
    f = np.empty(n_slow)
    g = np.empty(m)
    D = np.empty((m, n_slow))
    slow(kind, p, x, z, f)
    fast_bl(kind, p, x, u[n_slow:], g)
    qss_jac(kind, p, x, D)
    for i in range(n_slow):
        out[i] = f[i]
    for i in range(m):
        acc = g[i] / eps
        for j in range(n_slow):
            acc -= D[i, j] * f[j]
        out[n_slow + i] = acc


@njit(cache=True)
def shifted_jac(kind, p, n_slow, eps, u, J):
    """Jacobian of the shifted field (curvature of h is neglected)."""
    m = u.size - n_slow
    x = u[:n_slow]
    z = np.empty(m)
    qss(kind, p, x, z)
    for i in range(m):
        z[i] += u[n_slow + i]
    fx = np.empty((n_slow, n_slow))
    fz = np.empty((n_slow, m))
    gx = np.empty((m, n_slow))
    gy = np.empty((m, m))
    D = np.empty((m, n_slow))
    slow_jac(kind, p, x, z, fx, fz)
    fast_bl_jac(kind, p, x, u[n_slow:], gx, gy)
    qss_jac(kind, p, x, D)
    jxx = fx + fz @ D
    jyx = gx / eps - D @ jxx
    jyy = gy / eps - D @ fz
    J[:n_slow, :n_slow] = jxx
    J[:n_slow, n_slow:] = fz
    J[n_slow:, :n_slow] = jyx
    J[n_slow:, n_slow:] = jyy


@njit(cache=True)
def _residual(kind, p, n_slow, eps, R, hg, Y, sc, fbuf, G):
    shifted_rhs(kind, p, n_slow, eps, Y, fbuf)
    worst = 0.0
    for k in range(Y.size):
        G[k] = Y[k] - R[k] - hg * fbuf[k]
        worst = max(worst, abs(G[k]) / sc[k])
    return worst


@njit(cache=True)
def _solve_stage(kind, p, n_slow, eps, R, hg, Y, sc, M):
    """Solve Y = R + hg * F(Y) in place; M receives the last Newton matrix."""
    n = Y.size
    fbuf = np.empty(n)
    G = np.empty(n)
    Gt = np.empty(n)
    Yt = np.empty(n)
    res = _residual(kind, p, n_slow, eps, R, hg, Y, sc, fbuf, G)
    for _ in range(_NEWTON_ITERS):
        shifted_jac(kind, p, n_slow, eps, Y, M)
        for i in range(n):
            for j in range(n):
                M[i, j] *= -hg
            M[i, i] += 1.0
        d = -np.linalg.solve(M, G)
        dn = 0.0
        for k in range(n):
            dn = max(dn, abs(d[k]) / max(sc[k], 2.0 * _EPS_MACH * abs(Y[k])))
        if dn < _NEWTON_TOL:
            return True
        lam = 1.0
        for k in range(n):
            Yt[k] = Y[k] + d[k]
        rt = _residual(kind, p, n_slow, eps, R, hg, Yt, sc, fbuf, Gt)
        if not rt < (1.0 - 1e-4) * res:
            a, b = 0.0, 1.0
            gr = 0.6180339887498949
            c1 = b - gr * (b - a)
            c2 = a + gr * (b - a)
            for k in range(n):
                Yt[k] = Y[k] + c1 * d[k]
            m1 = _residual(kind, p, n_slow, eps, R, hg, Yt, sc, fbuf, Gt)
            for k in range(n):
                Yt[k] = Y[k] + c2 * d[k]
            m2 = _residual(kind, p, n_slow, eps, R, hg, Yt, sc, fbuf, Gt)
            for _ls in range(30):
                if m1 < m2:
                    b = c2
                    c2 = c1
                    m2 = m1
                    c1 = b - gr * (b - a)
                    for k in range(n):
                        Yt[k] = Y[k] + c1 * d[k]
                    m1 = _residual(kind, p, n_slow, eps, R, hg, Yt, sc, fbuf, Gt)
                else:
                    a = c1
                    c1 = c2
                    m1 = m2
                    c2 = a + gr * (b - a)
                    for k in range(n):
                        Yt[k] = Y[k] + c2 * d[k]
                    m2 = _residual(kind, p, n_slow, eps, R, hg, Yt, sc, fbuf, Gt)
            lam = 0.5 * (a + b)
            if lam * dn < _NEWTON_TOL:
                return res < 1e-3
        for k in range(n):
            Y[k] += lam * d[k]
        res = _residual(kind, p, n_slow, eps, R, hg, Y, sc, fbuf, G)
    return False


@njit(cache=True)
def _original_coords(kind, p, n_slow, u, xz):
    m = u.size - n_slow
    hz = np.empty(m)
    qss(kind, p, u[:n_slow], hz)
    for i in range(n_slow):
        xz[i] = u[i]
    for i in range(m):
        xz[n_slow + i] = u[n_slow + i] + hz[i]
    return np.sqrt(np.sum(xz * xz))


@njit(cache=True)
def run(kind, p, n_slow, eps, u0, t_max, rel_tol, abs_tol, h_init, h_max,
        radius, dwell, max_steps, record):
    """Integrate from shifted state u0.

    Returns (status, t_end, settle_time, accepted, rejected, times, states,
    count, u_end).  ``settle_time`` is negative when the state never stayed
    inside ``radius`` for ``dwell``.  Recorded states are in original (x, z)
    coordinates.
    """
    n = u0.size
    A = ESDIRK_A
    B = ESDIRK_B
    BH = ESDIRK_BHAT
    gam = A[1, 1]
    S = 4
    u = u0.copy()
    K = np.zeros((S, n))
    R = np.empty(n)
    Y = np.empty(n)
    sc = np.empty(n)
    ev = np.empty(n)
    M = np.empty((n, n))
    xz = np.empty(n)

    cap = 1024 if record else 1
    times = np.empty(cap)
    states = np.empty((cap, n))
    count = 0

    t = 0.0
    nrm = _original_coords(kind, p, n_slow, u, xz)
    if record:
        times[0] = t
        states[0] = xz
        count = 1
    inside_since = 0.0 if nrm <= radius else -1.0

    shifted_rhs(kind, p, n_slow, eps, u, K[0])
    if h_init > 0.0:
        h = h_init
    else:
        d0 = 0.0
        d1 = 0.0
        for k in range(n):
            s = abs_tol + rel_tol * abs(u[k])
            d0 = max(d0, abs(u[k]) / s)
            d1 = max(d1, abs(K[0, k]) / s)
        h = 1e-6 if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * d0 / d1
    accepted = 0
    rejected = 0
    streak = 0
    status = STATUS_OK

    while t < t_max:
        if accepted + rejected >= max_steps:
            status = STATUS_BUDGET
            break
        h = min(h, h_max, t_max - t)
        if h <= 4.0 * _EPS_MACH * max(abs(t), 1e-300) or h < 1e-300 \
                or streak > _MAX_CONSECUTIVE_REJECTS:
            status = STATUS_UNDERFLOW
            break
        for k in range(n):
            sc[k] = abs_tol + rel_tol * abs(u[k])
        ok = True
        for i in range(1, S):
            for k in range(n):
                acc = u[k]
                for j in range(i):
                    acc += h * A[i, j] * K[j, k]
                R[k] = acc
                Y[k] = acc + h * gam * K[i - 1, k]
            if not _solve_stage(kind, p, n_slow, eps, R, h * gam, Y, sc, M):
                ok = False
                break
            for k in range(n):
                K[i, k] = (Y[k] - R[k]) / (h * gam)
        if not ok:
            rejected += 1
            streak += 1
            h *= 0.25
            continue
        for k in range(n):
            e = 0.0
            for j in range(S):
                e += h * (B[j] - BH[j]) * K[j, k]
            ev[k] = e
        # Damp the stiff part of the estimate with the last Newton matrix.
        ev = np.linalg.solve(M, ev)
        err = 0.0
        for k in range(n):
            err = max(err, abs(ev[k]) / (abs_tol + rel_tol * max(abs(u[k]), abs(Y[k]))))
        if not err <= 1.0:
            rejected += 1
            streak += 1
            if np.isfinite(err):
                h *= max(0.2, 0.9 * err ** (-1.0 / 3.0))
            else:
                h *= 0.25
            continue
        streak = 0
        t += h
        u[:] = Y
        accepted += 1
        nrm = _original_coords(kind, p, n_slow, u, xz)
        if not np.isfinite(nrm) or nrm > _DIVERGENCE_NORM:
            status = STATUS_DIVERGED
            break
        if nrm < abs_tol * 1e-3:
            u[:] = 0.0
            xz[:] = 0.0
            nrm = 0.0
        shifted_rhs(kind, p, n_slow, eps, u, K[0])
        if record:
            if count == cap:
                cap *= 2
                nt = np.empty(cap)
                ns = np.empty((cap, n))
                nt[:count] = times[:count]
                ns[:count] = states[:count]
                times = nt
                states = ns
            times[count] = t
            states[count] = xz
            count += 1
        if nrm > radius:
            inside_since = -1.0
        elif inside_since < 0.0:
            inside_since = t
        if inside_since >= 0.0 and t - inside_since >= dwell:
            break
        h *= min(5.0, 0.9 * max(err, 1e-12) ** (-1.0 / 3.0))

    settle = inside_since if (inside_since >= 0.0 and t - inside_since >= dwell) else -1.0
    return status, t, settle, accepted, rejected, times, states, count, u
