"""Vectorized power maps that stay finite at the origin."""

import numpy as np

from .errors import InvalidParameterError

# Norms below this are treated as exactly zero (avoids 0/0 in v/|v|^xi).
UNDERFLOW_NORM = 1e-300


def nonneg_power(a, p):
    """a**p for a >= 0 with the convention 0**p = 0 (p > 0 or p < 0 alike)."""
    a = np.asarray(a, dtype=float)
    out = np.zeros_like(a)
    pos = a > 0
    out[pos] = np.exp(p * np.log(a[pos]))
    return out if out.ndim else float(out)


def signed_power(x, nu):
    """Odd extension |x|**nu * sign(x)."""
    if not nu > 0:
        raise InvalidParameterError(f"signed_power needs a positive exponent, got {nu}")
    x = np.asarray(x, dtype=float)
    out = np.sign(x) * nonneg_power(np.abs(x), nu)
    return out if out.ndim else float(out)


def vector_power(v, xi):
    """v / |v|**xi along the last axis, zero below the underflow guard."""
    v = np.asarray(v, dtype=float)
    xi = np.asarray(xi, dtype=float)
    if xi.ndim:
        xi = xi[..., None]
    r = np.linalg.norm(v, axis=-1, keepdims=True)
    safe = np.where(r < UNDERFLOW_NORM, 1.0, r)
    scale = np.where(r < UNDERFLOW_NORM, 0.0, np.exp(-xi * np.log(safe)))
    return v * scale


def norm(v):
    return np.linalg.norm(np.asarray(v, dtype=float), axis=-1)
