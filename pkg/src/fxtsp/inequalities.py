"""Computable gaps for the auxiliary inequalities behind the certificate.

Every ``*_gap`` is oriented so that gap >= 0 means the inequality holds.
All gap functions broadcast over leading batch axes (vector arguments use
the last axis), which is what the randomized suite relies on.  Each has a
private ``_..._terms`` twin returning ``(gap, scale)``, where ``scale`` is
the sum of the magnitudes of the terms involved; the suite counts a
violation only when ``gap < -slack * scale``.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameterError
from .powers import signed_power, vector_power

DEFAULT_SEED = 0xF1C5ED
DEFAULT_SLACK = 1e-9


def _pow(a, p):
    """Elementwise a**p for a >= 0 with 0**p = 0; p may be an array."""
    a = np.asarray(a, dtype=float)
    p = np.asarray(p, dtype=float)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        out = np.where(a > 0, np.exp(p * np.log(np.where(a > 0, a, 1.0))), 0.0)
    return out


def _scalar(v):
    return float(v) if np.ndim(v) == 0 else v


# --- majorization and Karamata -------------------------------------------------

def majorizes(a, b, rtol=1e-12):
    """True iff sorted-nonincreasing a majorizes b (prefix sums dominate, totals agree)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise InvalidParameterError("majorizes expects two sequences of equal length")
    if np.any(np.diff(a) > 0) or np.any(np.diff(b) > 0):
        raise InvalidParameterError("sequences must be sorted nonincreasing")
    sa, sb = np.cumsum(a), np.cumsum(b)
    tol = rtol * max(1.0, np.abs(a).sum(), np.abs(b).sum())
    return bool(np.all(sa[:-1] >= sb[:-1] - tol) and abs(sa[-1] - sb[-1]) <= tol)


def _karamata_terms(exponent, a, b):
    e = np.asarray(exponent, dtype=float)
    ek = e[..., None] if e.ndim else e
    fa = _pow(a, ek).sum(axis=-1)
    fb = _pow(b, ek).sum(axis=-1)
    gap = np.where(e >= 1, fa - fb, fb - fa)
    return gap, fa + fb


def karamata_gap(exponent, a, b):
    """Sum f(a) - sum f(b) for convex f = t^p (p >= 1), reversed for concave p in (0, 1]."""
    if not exponent > 0:
        raise InvalidParameterError("exponent must be positive")
    a = -np.sort(-np.asarray(a, dtype=float))
    b = -np.sort(-np.asarray(b, dtype=float))
    if np.any(a < 0) or np.any(b < 0):
        raise InvalidParameterError("power functions are applied to nonnegative entries only")
    if not majorizes(a, b):
        raise InvalidParameterError("first sequence does not majorize the second")
    return float(_karamata_terms(exponent, a, b)[0])


# --- middle power and weighted AM-GM ----------------------------------------------

def _middle_power_terms(x, a, a_low, a_high):
    lo, hi, mid = _pow(x, a_low), _pow(x, a_high), _pow(x, a)
    return lo + hi - mid, lo + hi + mid


def middle_power_gap(x, a, a_low, a_high):
    """x^a_low + x^a_high - x^a for a_low < a < a_high."""
    if not (np.all(np.asarray(x) > 0)):
        raise InvalidParameterError("x must be positive")
    if not (np.all(np.asarray(a_low) < np.asarray(a)) and np.all(np.asarray(a) < np.asarray(a_high))):
        raise InvalidParameterError("need a_low < a < a_high")
    return _scalar(_middle_power_terms(x, a, a_low, a_high)[0])


def _amgm_terms(w, x):
    total = w.sum(axis=-1)
    arith = (w * x).sum(axis=-1) / total
    with np.errstate(divide="ignore"):
        logs = np.where(x > 0, np.log(np.where(x > 0, x, 1.0)), -np.inf)
    geo = np.exp((w * logs).sum(axis=-1) / total)
    return arith - geo, arith + geo


def weighted_amgm_gap(w, x):
    """Weighted arithmetic mean minus weighted geometric mean."""
    w = np.asarray(w, dtype=float)
    x = np.asarray(x, dtype=float)
    if w.shape != x.shape:
        raise InvalidParameterError("weights and values must have equal length")
    if np.any(w <= 0):
        raise InvalidParameterError("weights must be positive")
    if np.any(x < 0):
        raise InvalidParameterError("values must be nonnegative")
    return _scalar(_amgm_terms(w, x)[0])


# --- Upsilon functions and their bounds -------------------------------------------

def _check_xi(index, xi):
    xi_arr = np.asarray(xi)
    if index == 1 and not np.all((xi_arr > 0) & (xi_arr < 1)):
        raise InvalidParameterError("index 1 needs xi in (0, 1)")
    if index == 2 and not np.all(xi_arr < 0):
        raise InvalidParameterError("index 2 needs xi < 0")
    if index not in (1, 2):
        raise InvalidParameterError("index must be 1 or 2")


def _upsilon_parts(xi, x, y):
    own = np.sum(x * vector_power(x, xi), axis=-1)
    shifted = np.sum(x * vector_power(x + y, xi), axis=-1)
    return own, shifted


def upsilon(index, xi, x, y):
    """x . (x/|x|^xi - (x+y)/|x+y|^xi)."""
    _check_xi(index, xi)
    own, shifted = _upsilon_parts(xi, np.asarray(x, float), np.asarray(y, float))
    return _scalar(own - shifted)


def upsilon_total(xi1, xi2, x, y):
    return upsilon(1, xi1, x, y) + upsilon(2, xi2, x, y)


def upsilon2_constant(xi2):
    """1 + max(1, -xi2 / 2^(xi2 + 1))."""
    xi2 = np.asarray(xi2, dtype=float)
    return _scalar(1 + np.maximum(1.0, -xi2 / 2 ** (xi2 + 1)))


def _upsilon1_terms(xi1, x, y):
    own, shifted = _upsilon_parts(xi1, x, y)
    nx, ny = np.linalg.norm(x, axis=-1), np.linalg.norm(y, axis=-1)
    bound = 2 ** xi1 * nx * _pow(ny, 1 - xi1)
    return bound - np.abs(own - shifted), bound + np.abs(own) + np.abs(shifted), bound


def _upsilon2_terms(xi2, x, y):
    own, shifted = _upsilon_parts(xi2, x, y)
    nx, ny = np.linalg.norm(x, axis=-1), np.linalg.norm(y, axis=-1)
    bound = upsilon2_constant(xi2) * nx * ny * (_pow(nx, -xi2) + _pow(ny, -xi2))
    return bound - np.abs(own - shifted), bound + np.abs(own) + np.abs(shifted), bound


def upsilon1_bound_gap(xi1, x, y):
    """2^xi1 |x| |y|^(1-xi1) - |Upsilon_1(x, y)|."""
    _check_xi(1, xi1)
    return _scalar(_upsilon1_terms(xi1, np.asarray(x, float), np.asarray(y, float))[0])


def upsilon2_bound_gap(xi2, x, y):
    """Delta(xi2) |x||y| (|x|^-xi2 + |y|^-xi2) - |Upsilon_2(x, y)|."""
    _check_xi(2, xi2)
    return _scalar(_upsilon2_terms(xi2, np.asarray(x, float), np.asarray(y, float))[0])


# --- product splitting with class-K-infinity weights --------------------------------

@dataclass(frozen=True)
class AlphaPair:
    """Weights alpha_lower(q), alpha_upper(q) for splitting |x|^p1 |y|^p2.

    Each map is a pointwise min (lower) or max (upper) of monomials
    coef * q**power, stored as tuples of (coef, power).
    """

    p1: float
    p2: float
    lower_terms: tuple
    upper_terms: tuple

    def alpha_lower(self, q):
        q = np.asarray(q, dtype=float)
        with np.errstate(over="ignore", under="ignore"):
            vals = [c * _pow(q, p) for c, p in self.lower_terms]
        return _scalar(np.minimum.reduce(vals))

    def alpha_upper(self, q):
        q = np.asarray(q, dtype=float)
        with np.errstate(over="ignore", under="ignore"):
            vals = [c * _pow(q, p) for c, p in self.upper_terms]
        return _scalar(np.maximum.reduce(vals))

    def combine(self, other):
        """One pair valid for both exponent pairs: min of lowers, max of uppers."""
        return AlphaPair(math.nan, math.nan, self.lower_terms + other.lower_terms,
                         self.upper_terms + other.upper_terms)

    def to_record(self):
        return {"p1": self.p1, "p2": self.p2,
                "lower_terms": [list(t) for t in self.lower_terms],
                "upper_terms": [list(t) for t in self.upper_terms]}


EQUAL_EXPONENT_LOWER = (2.0, 1.0)
EQUAL_EXPONENT_UPPER = (0.25, 1.0)


def alpha_pair(p1, p2):
    if not (p1 > 0 and p2 > 0):
        raise InvalidParameterError("exponents must be positive")
    if p1 == p2:
        return AlphaPair(p1, p2, (EQUAL_EXPONENT_LOWER,), (EQUAL_EXPONENT_UPPER,))
    hi, lo = max(p1, p2), min(p1, p2)
    p = hi + lo
    lower = (p / (hi - lo), p / (hi - lo))
    upper = (2 * lo / p, p / (2 * lo))
    return AlphaPair(p1, p2, (EQUAL_EXPONENT_LOWER, lower), (EQUAL_EXPONENT_UPPER, upper))


def _product_split_terms(p1, p2, lower, upper, x, y, two_term):
    ax, ay = np.abs(x), np.abs(y)
    p = p1 + p2
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        # alpha_lower may underflow to 0; the bound is then vacuous (infinite).
        inv = 1.0 / np.asarray(lower, dtype=float)
        rhs = inv * _pow(ax, p) + upper * _pow(ax * ay, p / 2) + inv * _pow(ay, p)
        lhs = _pow(ax, p1) * _pow(ay, p2)
        if two_term:
            lhs = lhs + _pow(ax, p2) * _pow(ay, p1)
            rhs = 2 * rhs
    return rhs - lhs, rhs + lhs


def lemma6_gap(pair, q, x, y, reading="single"):
    """Right minus left of the product split.

    ``reading="single"`` bounds |x|^p1 |y|^p2 by the three-term right side;
    ``reading="double"`` bounds the symmetric two-term left side by twice it.
    """
    if not np.all(np.asarray(q) > 0):
        raise InvalidParameterError("q must be positive")
    if reading not in ("single", "double"):
        raise InvalidParameterError("reading must be 'single' or 'double'")
    gap, _ = _product_split_terms(pair.p1, pair.p2, pair.alpha_lower(q), pair.alpha_upper(q),
                                  x, y, reading == "double")
    return _scalar(gap)


def lemma6_gaps(pair, q, x, y):
    """Both readings: (single-term gap, two-term gap)."""
    return lemma6_gap(pair, q, x, y, "single"), lemma6_gap(pair, q, x, y, "double")


# --- lower bounds for Vt^2, Wt^2 and Vt Wt ------------------------------------------

def tilde_coefficients(lam_min, xi1, xi2):
    """(r1, r2, r3) for quadratic V, W with smallest eigenvalue lam_min."""
    r1 = 2 ** (xi1 / 2 - 1) * lam_min ** (1 - xi1 / 2)
    r2 = 2 ** (xi2 / 2 - 1) * lam_min ** (1 - xi2 / 2)
    r3 = 2 ** ((xi1 + xi2) / 4) * lam_min ** (1 - (xi1 + xi2) / 4)
    return r1, r2, r3


def _quadratic(v, Q):
    return 0.5 * np.einsum("...i,...ij,...j->...", v, Q, v)


def _tilde_terms(lam_min, xi1, xi2, x, y, Q=None):
    lam_min = np.asarray(lam_min, dtype=float)
    if Q is None:
        V = 0.5 * lam_min * np.sum(x * x, axis=-1)
        W = 0.5 * lam_min * np.sum(y * y, axis=-1)
    else:
        V, W = _quadratic(x, Q), _quadratic(y, Q)
    a1, a2 = 1 - xi1 / 2, 1 - xi2 / 2
    vt = _pow(V, a1 / 2) + _pow(V, a2 / 2)
    wt = _pow(W, a1 / 2) + _pow(W, a2 / 2)
    r1, r2, r3 = tilde_coefficients(lam_min, xi1, xi2)
    nx, ny = np.linalg.norm(x, axis=-1), np.linalg.norm(y, axis=-1)
    mid = 2 - (xi1 + xi2) / 2

    def square_bound(n):
        return r1 * _pow(n, 2 - xi1) + r2 * _pow(n, 2 - xi2) + r3 * _pow(n, mid)

    bx, by = square_bound(nx), square_bound(ny)
    bxy = (r1 * _pow(nx * ny, a1) + r2 * _pow(nx * ny, a2)
           + 0.5 * r3 * (_pow(nx, a1) * _pow(ny, a2) + _pow(nx, a2) * _pow(ny, a1)))
    return ((vt * vt - bx, vt * vt + bx),
            (wt * wt - by, wt * wt + by),
            (vt * wt - bxy, vt * wt + bxy))


def tilde_lower_gaps(Q_lambda_min, xi1, xi2, x, y, Q=None):
    """Gaps for Vt^2, Wt^2 and Vt*Wt against their power-sum lower bounds.

    V = x'Qx/2 and W = y'Qy/2.  Without ``Q`` the isotropic matrix
    lam_min*I is used, which is the extremal case of the bounds.
    """
    if not (0 < xi1 < 1 and xi2 < 0 and Q_lambda_min > 0):
        raise InvalidParameterError("need xi1 in (0, 1), xi2 < 0 and a positive eigenvalue bound")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if Q is not None:
        Q = np.asarray(Q, dtype=float)
        if not np.allclose(Q, Q.T, rtol=0, atol=1e-12 * np.abs(Q).max()):
            raise InvalidParameterError("Q must be symmetric")
        if np.linalg.eigvalsh(Q)[0] < Q_lambda_min * (1 - 1e-12):
            raise InvalidParameterError("Q_lambda_min exceeds the smallest eigenvalue of Q")
    terms = _tilde_terms(Q_lambda_min, xi1, xi2, x, y, Q)
    return tuple(_scalar(g) for g, _ in terms)


# --- signed powers -------------------------------------------------------------------

def _lemma8_terms(xi, x, y):
    bound = 2 * np.abs(x) * _pow(np.abs(y), xi)
    own = np.abs(x) * _pow(np.abs(x), xi)
    shifted = x * np.sign(y + x) * _pow(np.abs(y + x), xi)
    return bound - (own - shifted), bound + np.abs(own) + np.abs(shifted)


def lemma8_gap(xi, x, y):
    """2|x||y|^xi - x (sgnpow(x, xi) - sgnpow(x + y, xi))."""
    if not np.all((np.asarray(xi) > 0) & (np.asarray(xi) < 1)):
        raise InvalidParameterError("xi must lie in (0, 1)")
    return _scalar(_lemma8_terms(xi, np.asarray(x, float), np.asarray(y, float))[0])
