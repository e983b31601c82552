"""Composite Lyapunov certificate Psi = theta V + (1 - theta) W.

Given decay constants for the reduced and boundary-layer certificates and
the six interconnection scalars, this module assembles the 2x2 matrix P,
picks theta, solves det P = 0 for the time-scale threshold eps*, chooses
the exponents gamma1/gamma2 and reports the resulting settling-time bound.
"""

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import CapabilityError, InfeasibleCertificateError, InvalidParameterError
from .powers import nonneg_power

THETA_GRID_STEP = 1e-3

CERTIFICATE_FIELDS = (
    "k1", "k2", "a1", "a2", "kappa1", "kappa2", "b1", "b2",
    "chi1", "delta1", "c1", "chi2", "delta2", "c2",
    "theta", "eps_star", "gamma1", "gamma2", "settling_bound",
)


@dataclass(frozen=True)
class PowerLawCertificate:
    """Reduced-system certificate: Vdot <= -k1 V^a1 - k2 V^a2."""

    k1: float
    k2: float
    a1: float
    a2: float
    V: Optional[Callable] = None
    gradV: Optional[Callable] = None
    # Sandwich bounds alpha_1(|x|) <= V(x) <= alpha_2(|x|), descriptors only.
    sandwich: Optional[tuple] = None

    def __post_init__(self):
        if not (self.k1 > 0 and self.k2 > 0):
            raise InvalidParameterError("k1 and k2 must be positive")
        if not (0 < self.a1 < 1 < self.a2):
            raise InvalidParameterError(f"need 0 < a1 < 1 < a2, got a1={self.a1}, a2={self.a2}")

    @property
    def k_lower(self):
        return min(self.k1, self.k2)


@dataclass(frozen=True)
class BoundaryCertificate:
    """Boundary-layer certificate: dW/dy g <= -kappa1 W^b1 - kappa2 W^b2."""

    kappa1: float
    kappa2: float
    b1: float
    b2: float
    W: Optional[Callable] = None
    gradW_x: Optional[Callable] = None
    gradW_y: Optional[Callable] = None
    sandwich: Optional[tuple] = None

    def __post_init__(self):
        if not (self.kappa1 > 0 and self.kappa2 > 0):
            raise InvalidParameterError("kappa1 and kappa2 must be positive")
        if not (0 < self.b1 < 1 < self.b2):
            raise InvalidParameterError(f"need 0 < b1 < 1 < b2, got b1={self.b1}, b2={self.b2}")

    @property
    def kappa_lower(self):
        return min(self.kappa1, self.kappa2)


@dataclass(frozen=True)
class InterconnectionBounds:
    """I1 <= chi1 Vt Wt + delta1 Vt^2 + c1 Wt^2, and likewise for I2."""

    chi1: float
    delta1: float
    c1: float
    chi2: float
    delta2: float
    c2: float

    def coupling_condition(self, k_lower):
        return self.delta1 < 0.5 * k_lower or self.delta2 < 0

    def as_dict(self):
        return {k: getattr(self, k) for k in ("chi1", "delta1", "c1", "chi2", "delta2", "c2")}


def tilde_value(v, p_low, p_high):
    """v^(p_low/2) + v^(p_high/2), the square-root-scale companion of V or W."""
    v = np.asarray(v, dtype=float)
    if np.any(v < 0):
        raise InvalidParameterError("tilde_value needs v >= 0")
    out = nonneg_power(v, p_low / 2) + nonneg_power(v, p_high / 2)
    return out if np.ndim(out) else float(out)


def _check_theta(theta):
    if not 0 < theta < 1:
        raise InvalidParameterError(f"theta must lie in (0, 1), got {theta}")


def p11(k_lower, bounds, theta):
    return theta * k_lower / 2 - theta * bounds.delta1 - (1 - theta) * bounds.delta2


def p12(bounds, theta):
    return -0.5 * (theta * bounds.chi1 + (1 - theta) * bounds.chi2)


def p22_parts(kappa_lower, bounds, theta):
    """P22 = slope / eps - offset; returns (slope, offset)."""
    return (1 - theta) * kappa_lower / 2, theta * bounds.c1 + (1 - theta) * bounds.c2


def build_P(k_lower, kappa_lower, bounds, theta, eps):
    _check_theta(theta)
    if not eps > 0:
        raise InvalidParameterError(f"eps must be positive, got {eps}")
    slope, offset = p22_parts(kappa_lower, bounds, theta)
    off = p12(bounds, theta)
    return np.array([[p11(k_lower, bounds, theta), off], [off, slope / eps - offset]])


def epsilon_star(k_lower, kappa_lower, bounds, theta):
    """Largest eps with P(theta, eps) positive definite on (0, eps)."""
    _check_theta(theta)
    a = p11(k_lower, bounds, theta)
    if not a > 0:
        raise InfeasibleCertificateError(f"P11 = {a:.6g} <= 0 at theta = {theta}")
    slope, offset = p22_parts(kappa_lower, bounds, theta)
    denom = p12(bounds, theta) ** 2 / a + offset
    if denom <= 0:
        return math.inf
    return slope / denom


def feasible_theta(k_lower, bounds, kappa_lower=1.0):
    """Theta on a 1e-3 grid with P11 > 0 that maximizes eps* (ties go to the smaller theta).

    kappa_lower only rescales eps*, so the choice does not depend on it.
    """
    if not bounds.coupling_condition(k_lower):
        raise InfeasibleCertificateError(
            f"coupling condition fails: delta1={bounds.delta1} >= k_lower/2={k_lower / 2} and delta2={bounds.delta2} >= 0")
    n = int(round(1 / THETA_GRID_STEP))
    best_theta, best_eps = None, -math.inf
    for i in range(1, n):
        theta = i / n
        if not p11(k_lower, bounds, theta) > 0:
            continue
        e = epsilon_star(k_lower, kappa_lower, bounds, theta)
        if e > best_eps:
            best_theta, best_eps = theta, e
    if best_theta is None:
        raise InfeasibleCertificateError("no theta on the grid gives P11 > 0")
    return best_theta


def select_gammas(a1, a2, b1, b2):
    if not (0 < a1 < 1 and 0 < b1 < 1 and a2 > 1 and b2 > 1):
        raise InvalidParameterError("need a1, b1 in (0, 1) and a2, b2 > 1")
    return (max(a1, b1) + 1) / 2, (1 + min(a2, b2)) / 2


def settling_time_bound(lambda_min, gamma1, gamma2):
    """Fixed-time bound for Psidot <= -(lambda/2)(Psi^g1 + 2^(1-g2) Psi^g2)."""
    if not lambda_min > 0:
        raise InvalidParameterError(f"lambda_min must be positive, got {lambda_min}")
    if not (0 < gamma1 < 1 < gamma2):
        raise InvalidParameterError("need 0 < gamma1 < 1 < gamma2")
    return 2 / (lambda_min * (1 - gamma1)) + 2 ** gamma2 / (lambda_min * (gamma2 - 1))


def lambda_min_2x2(P):
    P = np.asarray(P, dtype=float)
    if P.shape != (2, 2):
        raise InvalidParameterError("expected a 2x2 matrix")
    if abs(P[0, 1] - P[1, 0]) > 1e-12 * max(1.0, np.abs(P).max()):
        raise InvalidParameterError("matrix is not symmetric")
    a, b, d = P[0, 0], 0.5 * (P[0, 1] + P[1, 0]), P[1, 1]
    mean = 0.5 * (a + d)
    rad = math.hypot(0.5 * (a - d), b)
    lo = mean - rad
    # Recover the small root from the product when cancellation would eat it.
    if mean > 0 and lo < 1e-8 * mean:
        lo = (a * d - b * b) / (mean + rad)
    return lo


def composite_value(theta, V_val, W_val):
    _check_theta(theta)
    return theta * np.asarray(V_val, dtype=float) + (1 - theta) * np.asarray(W_val, dtype=float)


def composite_lie_derivative(model, rc, bc, theta, eps, x, y):
    """Psidot along the shifted dynamics, from the analytic gradients."""
    if rc.gradV is None or bc.gradW_x is None or bc.gradW_y is None:
        raise CapabilityError("composite Lie derivative needs gradV, gradW_x and gradW_y")
    _check_theta(theta)
    if not eps > 0:
        raise InvalidParameterError(f"eps must be positive, got {eps}")
    x = model.check_slow(x)
    y = model.check_fast(y)
    fx = model.f(x, y + model.h(x))
    fy = model.layer(x, y)
    dhf = np.einsum("...ij,...j->...i", model.dh(x), fx)
    gy = bc.gradW_y(x, y)
    slow_part = np.sum(rc.gradV(x) * fx, axis=-1)
    w_part = np.sum(bc.gradW_x(x, y) * fx, axis=-1) + np.sum(gy * fy, axis=-1) / eps - np.sum(gy * dhf, axis=-1)
    return theta * slow_part + (1 - theta) * w_part


def decrease_rate(lambda_min, gamma1, gamma2, psi):
    """Right side -(lambda/2)(Psi^g1 + 2^(1-g2) Psi^g2) of the composite decrease."""
    return -(lambda_min / 2) * (nonneg_power(psi, gamma1) + 2 ** (1 - gamma2) * nonneg_power(psi, gamma2))


@dataclass(frozen=True)
class CompositeCertificate:
    rc: PowerLawCertificate
    bc: BoundaryCertificate
    bounds: InterconnectionBounds
    theta: float
    eps_star: float
    gamma1: float
    gamma2: float
    eps_ref: float
    lambda_min: float
    settling_bound: float

    def P(self, eps):
        return build_P(self.rc.k_lower, self.bc.kappa_lower, self.bounds, self.theta, eps)

    def lambda_min_at(self, eps):
        return lambda_min_2x2(self.P(eps))

    def to_record(self):
        rec = {
            "k1": self.rc.k1, "k2": self.rc.k2, "a1": self.rc.a1, "a2": self.rc.a2,
            "kappa1": self.bc.kappa1, "kappa2": self.bc.kappa2, "b1": self.bc.b1, "b2": self.bc.b2,
        }
        rec.update(self.bounds.as_dict())
        rec.update(theta=self.theta, eps_star=self.eps_star, gamma1=self.gamma1,
                   gamma2=self.gamma2, settling_bound=self.settling_bound)
        return {k: rec[k] for k in CERTIFICATE_FIELDS}


def certify(rc, bc, bounds, theta=None, eps=None):
    """Assemble the composite certificate.

    The settling bound is reported at ``eps`` when given (it must lie below
    eps*), otherwise at eps*/2, or at eps = 1 for a decoupled system whose
    eps* is infinite.
    """
    k_lower, kappa_lower = rc.k_lower, bc.kappa_lower
    if theta is None:
        theta = feasible_theta(k_lower, bounds, kappa_lower)
    # A given theta with P11 > 0 already implies the coupling condition.
    e_star = epsilon_star(k_lower, kappa_lower, bounds, theta)
    if eps is None:
        eps = e_star / 2 if math.isfinite(e_star) else 1.0
    elif not eps < e_star:
        raise InfeasibleCertificateError(f"eps = {eps:.6g} is not below eps* = {e_star:.6g}")
    g1, g2 = select_gammas(rc.a1, rc.a2, bc.b1, bc.b2)
    lam = lambda_min_2x2(build_P(k_lower, kappa_lower, bounds, theta, eps))
    if not lam > 0:
        raise InfeasibleCertificateError(f"lambda_min(P) = {lam:.6g} is not positive at eps = {eps:.6g}")
    return CompositeCertificate(rc, bc, bounds, theta, e_star, g1, g2, eps, lam,
                                settling_time_bound(lam, g1, g2))
