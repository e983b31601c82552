"""Two-time-scale systems  xdot = f(x, z),  eps zdot = g(x, z).

Evaluators take arrays whose last axis is the state dimension and may carry
any number of leading batch axes, so the same model serves single-point
queries and the vectorized oracle suites.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import InvalidParameterError, ShapeError


@dataclass(frozen=True)
class ComparisonBound:
    """Named class-K bound on |h(x)|: currently ``scale * r**power``."""

    name: str = "identity"
    scale: float = 1.0
    power: float = 1.0

    def __call__(self, r):
        return self.scale * np.asarray(r, dtype=float) ** self.power

    def to_record(self):
        return {"name": self.name, "scale": self.scale, "power": self.power}


@dataclass(frozen=True)
class SystemModel:
    slow_dim: int
    fast_dim: int
    f: Callable
    g: Callable
    h: Callable
    dh: Callable
    comparison_bound: ComparisonBound = field(default_factory=ComparisonBound)
    # g(x, y + h(x)) evaluated from y directly; keeps small offsets exact.
    g_layer: Optional[Callable] = None
    # (kind, params) for the compiled integrator core, None for custom models.
    kernel: Optional[tuple] = None
    name: str = "custom"

    def __post_init__(self):
        if int(self.slow_dim) < 1 or int(self.fast_dim) < 1:
            raise InvalidParameterError("state dimensions must be positive")

    def check_slow(self, x):
        x = np.asarray(x, dtype=float)
        if x.ndim == 0 or x.shape[-1] != self.slow_dim:
            raise ShapeError(f"slow state must have last dimension {self.slow_dim}, got shape {x.shape}")
        return x

    def check_fast(self, z):
        z = np.asarray(z, dtype=float)
        if z.ndim == 0 or z.shape[-1] != self.fast_dim:
            raise ShapeError(f"fast state must have last dimension {self.fast_dim}, got shape {z.shape}")
        return z

    def layer(self, x, y):
        """g(x, y + h(x))."""
        if self.g_layer is not None:
            return self.g_layer(x, y)
        return self.g(x, y + self.h(x))


def _check_eps(eps):
    if not (np.isfinite(eps) and eps > 0):
        raise InvalidParameterError(f"eps must be positive and finite, got {eps}")


def full_field(model, eps, x, z):
    """(f(x, z), g(x, z) / eps)."""
    _check_eps(eps)
    x = model.check_slow(x)
    z = model.check_fast(z)
    return model.f(x, z), model.g(x, z) / eps


def reduced_field(model, x):
    """f(x, h(x))."""
    x = model.check_slow(x)
    return model.f(x, model.h(x))


def boundary_layer_field(model, x, y):
    """g(x, y + h(x)) with x frozen."""
    x = model.check_slow(x)
    y = model.check_fast(y)
    return model.layer(x, y)


def shifted_field(model, eps, x, y):
    """(f, g/eps - dh f) in the offset coordinate y = z - h(x)."""
    _check_eps(eps)
    x = model.check_slow(x)
    y = model.check_fast(y)
    fx = model.f(x, y + model.h(x))
    gy = model.layer(x, y) / eps
    return fx, gy - np.einsum("...ij,...j->...i", model.dh(x), fx)


def decay_model(slow_rate=1.0, fast_rate=1.0, slow_dim=1):
    """Linear test system xdot = -a x, eps zdot = -b z (h = 0)."""
    a, b = float(slow_rate), float(fast_rate)
    n = int(slow_dim)
    return SystemModel(
        slow_dim=n,
        fast_dim=n,
        f=lambda x, z: -a * np.asarray(x, dtype=float),
        g=lambda x, z: -b * np.asarray(z, dtype=float),
        h=lambda x: np.zeros_like(np.asarray(x, dtype=float)),
        dh=lambda x: np.zeros(np.shape(x) + (n,)),
        g_layer=lambda x, y: -b * np.asarray(y, dtype=float),
        kernel=(0, np.array([a, b])),
        name="decay",
    )
