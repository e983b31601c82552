"""Fixed-time gradient flow driving a plant stabilized in fixed time.

Slow state x follows  xdot = -k (phi_1(Qz) + phi_2(Qz)),  phi_i(v) = v/|v|^xi_i,
on the quadratic cost x'Qx/2; the plant  eps zdot = Az + Bu  is closed with
u = -B^-1 A x + B^-1 (-nu phi_1(z - x) - nu phi_2(z - x)), so B cancels and
the fast field is  A(z - x) - nu (phi_1(z - x) + phi_2(z - x)), with h(x) = x.

Q may be asymmetric (the reference example uses [3, 2; 3, 5]).  The decay
constants follow the eigenvalues of Q as written; gradients of V = x'Qx/2
are available both as Qx (``gradient="as_written"``) and as the true
gradient (Q + Q')x/2 (``gradient="symmetrized"``).
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import certify as cert
from .errors import InadmissibleQError, InfeasibleCertificateError, InvalidParameterError
from .inequalities import AlphaPair, alpha_pair, tilde_coefficients, upsilon, upsilon2_constant
from .kernels import KIND_GRADFLOW
from .model import ComparisonBound, SystemModel
from .powers import vector_power

Q_GRID_RATIO = 1.05

# Weights used by the worked example: alpha_lower(q) = 2q, alpha_upper(q) = q.
EXAMPLE_ALPHA = AlphaPair(1.0, 1.0, ((2.0, 1.0),), ((1.0, 1.0),))


@dataclass(frozen=True)
class GradFlowParams:
    Q: np.ndarray = field(default_factory=lambda: np.array([[3.0, 2.0], [3.0, 5.0]]))
    A: np.ndarray = None
    B: np.ndarray = None
    k: float = 1.0
    nu: float = 6.0
    xi1: float = 1 / 3
    xi2: float = -2 / 3

    def __post_init__(self):
        Q = np.atleast_2d(np.asarray(self.Q, dtype=float))
        n = Q.shape[0]
        if Q.shape != (n, n):
            raise InvalidParameterError("Q must be square")
        A = np.diag(-np.ones(n)) if self.A is None else np.atleast_2d(np.asarray(self.A, dtype=float))
        B = np.eye(n) if self.B is None else np.atleast_2d(np.asarray(self.B, dtype=float))
        if A.shape != (n, n) or B.shape != (n, n):
            raise InvalidParameterError("A and B must match the shape of Q")
        if not np.isfinite(np.linalg.cond(B)) or abs(np.linalg.det(B)) == 0:
            raise InvalidParameterError("B must be nonsingular")
        if not self.k > 0 or not self.nu > 0:
            raise InvalidParameterError("k and nu must be positive")
        if not 0 < self.xi1 < 1 or not self.xi2 < 0:
            raise InvalidParameterError("need xi1 in (0, 1) and xi2 < 0")
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        eigenvalues(Q)

    @property
    def dim(self):
        return self.Q.shape[0]

    def to_record(self):
        return {"Q": self.Q.tolist(), "A": self.A.tolist(), "B": self.B.tolist(),
                "k": self.k, "nu": self.nu, "xi1": self.xi1, "xi2": self.xi2}

    @classmethod
    def from_record(cls, rec):
        allowed = {"Q", "A", "B", "k", "nu", "xi1", "xi2"}
        unknown = set(rec) - allowed
        if unknown:
            raise InvalidParameterError(f"unknown gradient-flow fields: {sorted(unknown)}")
        return cls(**{k: (np.asarray(v, dtype=float) if k in "QAB" else float(v)) for k, v in rec.items()})


def eigenvalues(Q):
    """Sorted real eigenvalues of Q; complex or nonpositive spectra are rejected."""
    Q = np.asarray(Q, dtype=float)
    if Q.shape == (2, 2):
        tr, det = Q[0, 0] + Q[1, 1], Q[0, 0] * Q[1, 1] - Q[0, 1] * Q[1, 0]
        disc = tr * tr / 4 - det
        if disc < 0:
            raise InvalidParameterError("Q has complex eigenvalues")
        root = math.sqrt(disc)
        ev = np.array([tr / 2 - root, tr / 2 + root])
    else:
        ev = np.linalg.eigvals(Q)
        if np.any(np.abs(ev.imag) > 1e-12 * max(1.0, np.abs(ev).max())):
            raise InvalidParameterError("Q has complex eigenvalues")
        ev = np.sort(ev.real)
    if not ev[0] > 0:
        raise InvalidParameterError("Q must have positive eigenvalues")
    return ev


def spectral_data(params):
    ev = eigenvalues(params.Q)
    return ev[0], ev[-1], float(np.linalg.norm(params.Q @ params.A, 2))


def gain_threshold(params):
    """nu must exceed sigma_max(QA) / lambda_min(Q)."""
    lo, _, sig = spectral_data(params)
    return sig / lo


def build_system(params, check_gain=True):
    if check_gain and not params.nu > gain_threshold(params):
        raise InfeasibleCertificateError(
            f"gain nu = {params.nu} does not exceed sigma_max(QA)/lambda_min(Q) = {gain_threshold(params):.6g}")
    Q, A, n = params.Q, params.A, params.dim
    k, nu, xi1, xi2 = params.k, params.nu, params.xi1, params.xi2

    def f(x, z):
        grad = np.asarray(z, dtype=float) @ Q.T
        return -k * (vector_power(grad, xi1) + vector_power(grad, xi2))

    def layer(x, y):
        y = np.asarray(y, dtype=float)
        return y @ A.T - nu * (vector_power(y, xi1) + vector_power(y, xi2))

    def g(x, z):
        return layer(x, np.asarray(z, dtype=float) - np.asarray(x, dtype=float))

    kernel_params = np.concatenate([[n, k, nu, xi1, xi2], Q.ravel(), A.ravel()])
    return SystemModel(
        slow_dim=n, fast_dim=n, f=f, g=g,
        h=lambda x: np.array(x, dtype=float),
        dh=lambda x: np.broadcast_to(np.eye(n), np.shape(x) + (n,)).copy(),
        comparison_bound=ComparisonBound("identity"),
        g_layer=layer, kernel=(KIND_GRADFLOW, kernel_params), name="gradflow",
    )


def _gradient_matrix(params, gradient):
    if gradient == "as_written":
        return params.Q
    if gradient == "symmetrized":
        return 0.5 * (params.Q + params.Q.T)
    raise InvalidParameterError("gradient must be 'as_written' or 'symmetrized'")


def _quadratic(Q):
    return lambda v: 0.5 * np.einsum("...i,ij,...j->...", np.asarray(v, float), Q, np.asarray(v, float))


def _sandwich(Q):
    sym = np.linalg.eigvalsh(0.5 * (Q + Q.T))
    return ("quadratic", 0.5 * sym[0], 0.5 * sym[-1])


def reduced_certificate(params, gradient="as_written"):
    lo, hi, _ = spectral_data(params)
    k, xi1, xi2 = params.k, params.xi1, params.xi2
    G = _gradient_matrix(params, gradient)
    return cert.PowerLawCertificate(
        k1=2 ** (1 - xi1 / 2) * k * lo ** 2 * hi ** (-1 - xi1 / 2),
        k2=2 ** (1 - xi2 / 2) * k * lo ** (2 - xi2) * hi ** (-1 + xi2 / 2),
        a1=1 - xi1 / 2, a2=1 - xi2 / 2,
        V=_quadratic(params.Q),
        gradV=lambda x: np.asarray(x, float) @ G.T,
        sandwich=_sandwich(params.Q),
    )


def boundary_certificate(params, gradient="as_written"):
    lo, hi, sig = spectral_data(params)
    margin = params.nu * lo - sig
    if not margin > 0:
        raise InfeasibleCertificateError(f"nu * lambda_min(Q) - sigma_max(QA) = {margin:.6g} is not positive")
    G = _gradient_matrix(params, gradient)
    W = _quadratic(params.Q)

    def kappa(xi):
        return 2 ** (1 - xi / 2) * hi ** (-1 + xi / 2) * margin

    return cert.BoundaryCertificate(
        kappa1=kappa(params.xi1), kappa2=kappa(params.xi2),
        b1=1 - params.xi1 / 2, b2=1 - params.xi2 / 2,
        W=lambda x, y: W(y),
        gradW_x=lambda x, y: np.zeros_like(np.asarray(x, float)),
        gradW_y=lambda x, y: np.asarray(y, float) @ G.T,
        sandwich=_sandwich(params.Q),
    )


def coupling_constants(params, mu):
    """r1, r2, N1, N2, eta and mu* for a given mu."""
    lo, hi, _ = spectral_data(params)
    k, xi1, xi2 = params.k, params.xi1, params.xi2
    r1, r2, _ = tilde_coefficients(lo, xi1, xi2)
    n1 = 2 ** xi1 * hi ** (2 - xi1) * k
    n2 = upsilon2_constant(xi2) * hi ** (2 - xi2) * k
    return {
        "r1": r1, "r2": r2, "N1": n1, "N2": n2,
        "eta": min(mu * r1 / n1, mu * r2 / n2),
        "mu_star": mu + k * max(hi ** (2 - xi1) / r1, hi ** (2 - xi2) / r2),
    }


def product_split_alpha(params):
    """Weights from the product-split construction for exponent pairs (1, 1 - xi_i)."""
    return alpha_pair(1.0, 1 - params.xi1).combine(alpha_pair(1.0, 1 - params.xi2))


def choose_q(mu, eta, alpha_lower):
    """Smallest q = 1.05^j (j integer) with 1 / alpha_lower(q) < eta."""
    if not (mu > 0 and eta > 0):
        raise InvalidParameterError("mu and eta must be positive")

    def ok(j):
        return 1.0 / alpha_lower(Q_GRID_RATIO ** j) < eta

    j = 0
    if ok(j):
        while ok(j - 1):
            j -= 1
    else:
        while not ok(j):
            j += 1
    return Q_GRID_RATIO ** j


def interconnection_bounds(params, mu, q=None, alpha=EXAMPLE_ALPHA, eta=None):
    """delta1 = c1 = delta2 = mu, c2 = mu*, chi1 = chi2 = alpha_upper(q) mu / eta.

    ``eta`` may be overridden (the worked example rounds it to 2e-4).
    """
    k_lower = reduced_certificate(params).k_lower
    if not 0 < mu < k_lower / 2:
        raise InvalidParameterError(f"mu must lie in (0, k_lower/2) = (0, {k_lower / 2:.6g})")
    consts = coupling_constants(params, mu)
    eta = consts["eta"] if eta is None else eta
    if q is None:
        q = choose_q(mu, eta, alpha.alpha_lower)
    if not 1.0 / alpha.alpha_lower(q) < eta:
        raise InadmissibleQError(f"q = {q} is inadmissible: 1/alpha_lower(q) >= eta = {eta:.6g}",
                                 choose_q(mu, eta, alpha.alpha_lower))
    chi = alpha.alpha_upper(q) * mu / eta
    return cert.InterconnectionBounds(chi1=chi, delta1=mu, c1=mu, chi2=chi, delta2=mu, c2=consts["mu_star"])


def interconnection_terms(params, x, y):
    """(I1, I2) = (k Ups(Qx, Qy), -k Ups(Qy, Qx) + k(|Qy|^(2-xi1) + |Qy|^(2-xi2)))."""
    Q, k, xi1, xi2 = params.Q, params.k, params.xi1, params.xi2
    qx = np.asarray(x, float) @ Q.T
    qy = np.asarray(y, float) @ Q.T

    def ups(a, b):
        return upsilon(1, xi1, a, b) + upsilon(2, xi2, a, b)

    ny = np.linalg.norm(qy, axis=-1)
    i1 = k * ups(qx, qy)
    i2 = -k * ups(qy, qx) + k * (ny ** (2 - xi1) + ny ** (2 - xi2))
    return i1, i2


def reference_params():
    return GradFlowParams()


REFERENCE = {
    "k1": 0.359, "k2": 0.453, "k_lower": 0.359, "eta": 2e-4, "mu_star": 262.6,
    "chi": 1.5e6, "P11": 0.02, "P12": -750000.0, "P22_slope": 0.045, "P22_offset": 87.0,
    "eps_star": 1e-15,
}


def _entry(value, ref):
    dev = abs(value - ref) / abs(ref) if ref else math.nan
    return {"value": value, "reference": ref, "rel_deviation": dev}


def _chain(k_lower, kappa_lower, mu, q, eta, mu_star, theta):
    chi = EXAMPLE_ALPHA.alpha_upper(q) * mu / eta
    bounds = cert.InterconnectionBounds(chi, mu, mu, chi, mu, mu_star)
    slope, offset = cert.p22_parts(kappa_lower, bounds, theta)
    return {
        "eta": eta, "chi": chi,
        "P11": cert.p11(k_lower, bounds, theta), "P12": cert.p12(bounds, theta),
        "P22_slope": slope, "P22_offset": offset,
        "eps_star": cert.epsilon_star(k_lower, kappa_lower, bounds, theta),
    }


def reproduce_reference_example(mu=0.1, q=3000.0, theta=2 / 3, kappa_lower=0.27, rounded_eta=2e-4):
    """Recompute every constant of the worked example next to its quoted value.

    The quoted chain rounds eta to 2e-4 before forming chi; both the rounded
    chain (which yields P12 = -750000 exactly) and the exact chain are
    reported.  kappa_lower = 0.27 is implied by the quoted P22 entry rather
    than derived, because the example does not state nu or A.
    """
    params = reference_params()
    rc = reduced_certificate(params)
    consts = coupling_constants(params, mu)
    rounded = _chain(rc.k_lower, kappa_lower, mu, q, rounded_eta, consts["mu_star"], theta)
    exact = _chain(rc.k_lower, kappa_lower, mu, q, consts["eta"], consts["mu_star"], theta)
    if not 1.0 / EXAMPLE_ALPHA.alpha_lower(q) < consts["eta"]:
        raise InadmissibleQError("q inadmissible for the exact eta", choose_q(mu, consts["eta"], EXAMPLE_ALPHA.alpha_lower))
    eps_star = rounded["eps_star"]
    quantities = {
        "k1": _entry(rc.k1, REFERENCE["k1"]),
        "k2": _entry(rc.k2, REFERENCE["k2"]),
        "k_lower": _entry(rc.k_lower, REFERENCE["k_lower"]),
        "eta": _entry(consts["eta"], REFERENCE["eta"]),
        "mu_star": _entry(consts["mu_star"], REFERENCE["mu_star"]),
        "chi": _entry(rounded["chi"], REFERENCE["chi"]),
        "P11": _entry(rounded["P11"], REFERENCE["P11"]),
        "P12": _entry(rounded["P12"], REFERENCE["P12"]),
        "P22_slope": _entry(rounded["P22_slope"], REFERENCE["P22_slope"]),
        "P22_offset": _entry(rounded["P22_offset"], REFERENCE["P22_offset"]),
        "eps_star": _entry(eps_star, REFERENCE["eps_star"]),
    }
    default_gains = GradFlowParams()
    bc = boundary_certificate(default_gains)
    return {
        "system": "gradflow",
        "inputs": {
            "Q": params.Q.tolist(), "k": params.k, "xi1": params.xi1, "xi2": params.xi2,
            "mu": mu, "q": q, "theta": theta, "kappa_lower": kappa_lower,
            "alpha_lower": "2q", "alpha_upper": "q", "rounded_eta": rounded_eta,
        },
        "k_lower": rc.k_lower,
        "chi": rounded["chi"],
        "eps_star": eps_star,
        "quantities": quantities,
        "constants": {"r1": consts["r1"], "r2": consts["r2"], "N1": consts["N1"], "N2": consts["N2"]},
        "exact_chain": exact,
        "default_gains": {
            "A": default_gains.A.tolist(), "nu": default_gains.nu,
            "gain_threshold": gain_threshold(default_gains),
            "kappa1": bc.kappa1, "kappa2": bc.kappa2, "kappa_lower": bc.kappa_lower,
        },
        "notes": [
            "kappa_lower is taken as given (implied by the quoted P22 slope), not recomputed",
            "Q is asymmetric; constants use its eigenvalues as written",
            "eps_star and the P entries use eta rounded to 2e-4; exact_chain keeps eta unrounded",
        ],
    }
