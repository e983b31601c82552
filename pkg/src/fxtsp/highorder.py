"""Second-order plant with fixed-time parasitic dynamics.

    x1dot = -sgnpow(x1, xi1) - x1^3 + z
    x2dot = -sgnpow(z, xi1) - z^3 - x1
    eps zdot = -sgnpow(z - x2, xi2) - (z - x2)^3

with 0 < xi2 <= xi1 < 1, quasi-steady state h(x) = x2 and certificates
V = |x|^2 / 2, W = y^2 / 2.
"""

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import certify as cert
from .errors import InadmissibleQError, InvalidParameterError
from .gradflow import choose_q
from .inequalities import alpha_pair
from .kernels import KIND_HIGHORDER, KIND_LAYER
from .model import ComparisonBound, SystemModel
from .powers import nonneg_power, signed_power

# Divisor in the admissibility rule 1/alpha_lower(q) < mu / 12.
ADMISSIBILITY_DIVISOR = 12.0

REFERENCE_EPS = 1e-3
REFERENCE_X0 = (356.0, 241.0)
REFERENCE_Z0 = (191.0,)


@dataclass(frozen=True)
class HighOrderParams:
    xi1: float = 1 / 3
    xi2: float = 1 / 4
    mu: float = 0.4
    q: Optional[float] = None

    def __post_init__(self):
        if not 0 < self.xi2 <= self.xi1 < 1:
            raise InvalidParameterError(f"need 0 < xi2 <= xi1 < 1, got xi1={self.xi1}, xi2={self.xi2}")
        if not 0 < self.mu < 0.5:
            raise InvalidParameterError(f"mu must lie in (0, 1/2), got {self.mu}")
        if self.q is not None and not self.q > 0:
            raise InvalidParameterError("q must be positive")

    def to_record(self):
        return {"xi1": self.xi1, "xi2": self.xi2, "mu": self.mu, "q": self.q}

    @classmethod
    def from_record(cls, rec):
        unknown = set(rec) - {"xi1", "xi2", "mu", "q"}
        if unknown:
            raise InvalidParameterError(f"unknown high-order fields: {sorted(unknown)}")
        return cls(**{k: (None if v is None else float(v)) for k, v in rec.items()})


def _sp(v, p):
    v = np.asarray(v, dtype=float)
    return np.sign(v) * nonneg_power(np.abs(v), p)


def build_system(params):
    xi1, xi2 = params.xi1, params.xi2

    def f(x, z):
        x = np.asarray(x, dtype=float)
        z = np.asarray(z, dtype=float)[..., 0]
        x1, x2 = x[..., 0], x[..., 1]
        return np.stack([-_sp(x1, xi1) - x1 ** 3 + z, -_sp(z, xi1) - z ** 3 - x1], axis=-1)

    def layer(x, y):
        y = np.asarray(y, dtype=float)
        return -_sp(y, xi2) - y ** 3

    def g(x, z):
        return layer(x, np.asarray(z, dtype=float) - np.asarray(x, dtype=float)[..., 1:2])

    row = np.array([[0.0, 1.0]])
    return SystemModel(
        slow_dim=2, fast_dim=1, f=f, g=g,
        h=lambda x: np.asarray(x, dtype=float)[..., 1:2].copy(),
        dh=lambda x: np.broadcast_to(row, np.shape(x)[:-1] + (1, 2)).copy(),
        comparison_bound=ComparisonBound("identity"),
        g_layer=layer, kernel=(KIND_HIGHORDER, np.array([xi1, xi2])), name="highorder",
    )


def boundary_layer_system(params):
    """Stretched-time boundary layer of the fast state, one copy per coordinate.

    Both states obey ydot = -sgnpow(y, xi2) - y^3 when eps = 1, so the settling
    time of either is bounded by the layer certificate alone.
    """
    xi2 = params.xi2

    def law(v):
        v = np.asarray(v, dtype=float)
        return -_sp(v, xi2) - v ** 3

    return SystemModel(
        slow_dim=1, fast_dim=1, f=lambda x, z: law(x), g=lambda x, z: law(z),
        h=lambda x: np.zeros_like(np.asarray(x, dtype=float)),
        dh=lambda x: np.zeros(np.shape(x) + (1,)),
        g_layer=lambda x, y: law(y), kernel=(KIND_LAYER, np.array([xi2])), name="highorder-layer",
    )


def layer_settling_bound(params):
    _, bc = certificates(params)
    return 1 / (bc.kappa1 * (1 - bc.b1)) + 1 / (bc.kappa2 * (bc.b2 - 1))


def _half_square(v):
    v = np.asarray(v, dtype=float)
    return 0.5 * np.sum(v * v, axis=-1)


def certificates(params):
    rc = cert.PowerLawCertificate(
        k1=1.0, k2=1.0, a1=(params.xi1 + 1) / 2, a2=2.0,
        V=_half_square, gradV=lambda x: np.array(x, dtype=float),
        sandwich=("quadratic", 0.5, 0.5),
    )
    bc = cert.BoundaryCertificate(
        kappa1=2 ** ((params.xi2 + 1) / 2), kappa2=4.0, b1=(params.xi2 + 1) / 2, b2=2.0,
        W=lambda x, y: _half_square(y),
        gradW_x=lambda x, y: np.zeros_like(np.asarray(x, dtype=float)),
        gradW_y=lambda x, y: np.array(y, dtype=float),
        sandwich=("quadratic", 0.5, 0.5),
    )
    return rc, bc


def alpha(params):
    """Weights valid for both splits used: (1, xi1) and the cubic pair (3, 1)."""
    return alpha_pair(1.0, params.xi1).combine(alpha_pair(3.0, 1.0))


def admissible_q(params):
    return choose_q(params.mu, params.mu / ADMISSIBILITY_DIVISOR, alpha(params).alpha_lower)


def interconnection_bounds(params):
    """delta1 = c1 = delta2 = mu, chi1 = (2^((9+xi1)/4) + 16) q, chi2 = chi1 + 12, c2 = mu + 8.

    chi2 and c2 collect the pieces 12 Wt Vt and 8 Wt^2 that the I2 estimate
    adds on top of the I1 estimate.
    """
    mu = params.mu
    q = admissible_q(params) if params.q is None else params.q
    threshold = mu / ADMISSIBILITY_DIVISOR
    if not 1.0 / alpha(params).alpha_lower(q) < threshold:
        raise InadmissibleQError(f"q = {q} is inadmissible: need 1/alpha_lower(q) < mu/12 = {threshold:.6g}",
                                 admissible_q(params))
    chi1 = (2 ** ((9 + params.xi1) / 4) + 16) * q
    return cert.InterconnectionBounds(chi1=chi1, delta1=mu, c1=mu, chi2=chi1 + 12, delta2=mu, c2=mu + 8)


def interconnection_terms(params, x, y):
    """(I1, I2) with the cubic differences expanded to avoid cancellation."""
    xi1 = params.xi1
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)[..., 0]
    x1, x2 = x[..., 0], x[..., 1]
    z = y + x2
    i1 = y * x1 + x2 * (_sp(x2, xi1) - _sp(z, xi1)) - x2 * y ** 3 - 3 * x2 ** 2 * y ** 2 - 3 * x2 ** 3 * y
    i2 = y * _sp(z, xi1) + y * z ** 3 + y * x1
    return i1, i2


def interconnection_terms_literal(params, x, y):
    """I1, I2 exactly as written (cancels badly for large states; used as a cross-check)."""
    xi1 = params.xi1
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)[..., 0]
    x1, x2 = x[..., 0], x[..., 1]
    z = y + x2
    i1 = y * x1 - x2 * _sp(z, xi1) - x2 * z ** 3 + x2 ** 4 + x2 * _sp(x2, xi1)
    i2 = y * _sp(z, xi1) + y * z ** 3 + y * x1
    return i1, i2


def i1_chain_bound(params, x, y):
    """|y||x1| + 2|x2||y|^xi1 + |y|^3|x2| + 3|y||x2|^3, the intermediate I1 estimate."""
    x = np.asarray(x, dtype=float)
    ay = np.abs(np.asarray(y, dtype=float)[..., 0])
    ax1, ax2 = np.abs(x[..., 0]), np.abs(x[..., 1])
    return ay * ax1 + 2 * ax2 * nonneg_power(ay, params.xi1) + ay ** 3 * ax2 + 3 * ay * ax2 ** 3


def reproduce_reference_example(cfg=None, theta=None):
    """Simulate the reference configuration and report the certificate chain."""
    from . import sim

    params = HighOrderParams()
    model = build_system(params)
    rc, bc = certificates(params)
    bounds = interconnection_bounds(params)
    c = cert.certify(rc, bc, bounds, theta=theta)
    cfg = cfg or sim.IntegratorConfig()
    traj = sim.integrate(model, REFERENCE_EPS, REFERENCE_X0, REFERENCE_Z0, cfg,
                         diagnostics=sim.certificate_diagnostics(model, rc, bc, c.theta))
    mono = sim.monitor_lyapunov(model, rc, bc, c.theta, c.gamma1, c.gamma2, c.lambda_min, traj,
                                eps=REFERENCE_EPS)
    return {
        "system": "highorder",
        "inputs": {"eps": REFERENCE_EPS, "xi1": params.xi1, "xi2": params.xi2, "mu": params.mu,
                   "x0": list(REFERENCE_X0), "z0": list(REFERENCE_Z0)},
        "q": bounds.chi1 / (2 ** ((9 + params.xi1) / 4) + 16),
        "certificate": c.to_record(),
        "settle_time": traj.settle_time,
        "settle_radius": cfg.settle_radius,
        "steps": traj.steps,
        "step_rejections": traj.step_rejections,
        "final_time": float(traj.times[-1]),
        "monotonicity": mono,
        "notes": ["the quoted figure gives no axis values; convergence is checked, not curve shape",
                  "eps = 1e-3 lies far above eps*, so the certificate does not cover this run"],
    }
