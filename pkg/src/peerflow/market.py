"""Market primitives: the exogenous model, the provider's strategy, and the CP-side formulas."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from peerflow.errors import DegenerateTiersError
from peerflow.families import (
    CapacityFunction,
    Distribution,
    GainFunction,
    InversePowerCapacity,
    PowerGain,
    PowerLaw,
)


@dataclass(frozen=True)
class MarketModel:
    """All exogenous structure of the platform.

    f_u, f_v, f_w are the user value, CP value and CP demand distributions;
    ``c`` is the total capacity and ``k`` the cost per unit of traffic.
    """

    f_u: Distribution
    f_v: Distribution
    f_w: Distribution
    gain: GainFunction
    capacity: CapacityFunction
    c: float = 0.2
    k: float = 0.2

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError("total capacity c must be positive")
        if not self.k >= 0:
            raise ValueError("unit cost k must be non-negative")

    @property
    def n_mean(self) -> float:
        """Mean CP demand N."""
        return float(self.f_w.mean())

    @classmethod
    def baseline(cls, alpha: float = 1.0, beta: float = 1.0, c: float = 0.2, k: float = 0.2) -> "MarketModel":
        """The reference family: F_u = F_v = x**0.33, F_w = w**alpha, G = 1 - phi**(1/beta), H = 1/phi."""
        return cls(
            f_u=PowerLaw(0.33),
            f_v=PowerLaw(0.33),
            f_w=PowerLaw(alpha),
            gain=PowerGain(beta),
            capacity=InversePowerCapacity(1.0),
            c=c,
            k=k,
        )

    def replace(self, **changes) -> "MarketModel":
        from dataclasses import replace

        return replace(self, **changes)


@dataclass(frozen=True)
class Strategy:
    """Provider decision: user price p, paid-peering price q, paid capacity share r."""

    p: float
    q: float
    r: float

    def __post_init__(self):
        if not (self.p > 0 and self.q > 0):
            raise ValueError(f"prices must be positive, got p={self.p}, q={self.q}")
        if not (0.0 <= self.r <= 1.0):
            raise ValueError(f"capacity share must lie in [0, 1], got r={self.r}")

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.p, self.q, self.r)


class Choice(enum.Enum):
    PAID = "paid"
    FREE = "free"
    EXIT = "exit"


def user_population(model: MarketModel, p):
    """Active user share M(p) = 1 - F_u(p)."""
    return 1.0 - model.f_u.cdf(p)


def boundary_value(q: float, phi_h: float, phi_l: float, gain: GainFunction) -> float:
    """CP value above which paid peering is (weakly) preferred."""
    g_h = gain.g(phi_h)
    g_l = gain.g(phi_l)
    if not g_h > g_l:
        raise DegenerateTiersError(f"G(phi_h)={g_h} is not above G(phi_l)={g_l}")
    return q * g_h / (g_h - g_l)


def boundary_from_ratio(q, t):
    """Same threshold written through the gain ratio t = G(phi_l)/G(phi_h)."""
    if isinstance(t, np.ndarray):
        with np.errstate(divide="ignore"):
            return np.where(t < 1.0, q / np.where(t < 1.0, 1.0 - t, 1.0), np.inf)
    return q / (1.0 - t) if t < 1.0 else math.inf


def cp_choice(v: float, p: float, q: float, phi_h: float, phi_l: float, model: MarketModel) -> tuple[Choice, float]:
    """Tier chosen by a CP of value v (unit demand) and the utility it earns there."""
    gain = model.gain
    m = user_population(model, p)
    g_h, g_l = gain.g(phi_h), gain.g(phi_l)
    v_bar = boundary_value(q, phi_h, phi_l, gain) if g_h > g_l else math.inf
    if v >= v_bar:
        return Choice.PAID, (v - q) * m * g_h
    if g_l <= 0.0:
        return Choice.EXIT, 0.0
    return Choice.FREE, v * m * g_l


def loads_at(model: MarketModel, p: float, q: float, phi_h: float, phi_l: float) -> tuple[float, float]:
    """Induced loads (D_h, D_l) on the paid and free tiers at congestion (phi_h, phi_l)."""
    gain = model.gain
    mass = user_population(model, p) * model.n_mean
    if mass <= 0.0:
        return 0.0, 0.0
    g_h, g_l = gain.g(phi_h), gain.g(phi_l)
    v_bar = q * g_h / (g_h - g_l) if g_h > g_l else math.inf
    f_v = model.f_v.cdf(v_bar)
    return mass * (1.0 - f_v) * g_h, mass * f_v * g_l
