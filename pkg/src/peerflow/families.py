"""Closed-form model primitives: value/demand distributions, gain and capacity functions.

Every function accepts either a Python float or a numpy array, so the same
objects serve the scalar solver and the vectorised grid solver.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate

from peerflow.roots import bisect

Array = float | np.ndarray


def _clip(x, lo, hi):
    if isinstance(x, np.ndarray):
        return np.clip(x, lo, hi)
    return min(max(x, lo), hi)


def elasticity(f: Callable, f_prime: Callable, x):
    """Generic elasticity ``-(x / f(x)) * f'(x)`` (positive for decreasing f)."""
    return -(x / f(x)) * f_prime(x)


# ---------------------------------------------------------------------------
# Distributions on R+
# ---------------------------------------------------------------------------


class Distribution:
    """A continuous cdf on [0, support_upper].

    Subclasses provide ``cdf`` and ``pdf``; ``quantile``, ``mean`` and
    ``surplus`` fall back to numeric routines when no closed form is given.
    """

    name = "abstract"
    support_upper = math.inf

    def cdf(self, x):
        raise NotImplementedError

    def pdf(self, x):
        raise NotImplementedError

    def params(self) -> dict:
        return {}

    def quantile(self, u):
        return self.quantile_numeric(u)

    def quantile_numeric(self, u, xtol: float = 1e-12):
        """Invert the cdf by bisection (the cdf must be strictly increasing)."""
        if isinstance(u, np.ndarray):
            return np.array([self.quantile_numeric(float(ui), xtol) for ui in u.ravel()]).reshape(u.shape)
        if u <= 0.0:
            return 0.0
        hi = self.support_upper
        if not math.isfinite(hi):
            hi = 1.0
            while self.cdf(hi) < u:
                hi *= 2.0
        return bisect(lambda x: self.cdf(x) - u, 0.0, hi, xtol=xtol)

    def hazard(self, x):
        return self.pdf(x) / (1.0 - self.cdf(x))

    def mean(self) -> float:
        return self.surplus(0.0)

    def surplus(self, p):
        """Integral of (u - p) dF(u) over u > p."""
        if isinstance(p, np.ndarray):
            return np.array([self.surplus(float(pi)) for pi in p.ravel()]).reshape(p.shape)
        return self.surplus_numeric(p)

    def surplus_numeric(self, p: float) -> float:
        """Adaptive quadrature of the tail integral, written as the integral of 1 - F."""
        hi = self.support_upper
        if p >= hi:
            return 0.0
        val, _ = integrate.quad(lambda u: 1.0 - self.cdf(u), p, hi, epsabs=1e-13, epsrel=1e-12, limit=200)
        return val


@dataclass(frozen=True)
class PowerLaw(Distribution):
    """F(x) = x**exponent on [0, 1]."""

    exponent: float

    name = "power"
    support_upper = 1.0

    def __post_init__(self):
        if not self.exponent > 0:
            raise ValueError("power-law exponent must be positive")

    def params(self):
        return {"exponent": self.exponent}

    def cdf(self, x):
        return _clip(x, 0.0, 1.0) ** self.exponent

    def pdf(self, x):
        a = self.exponent
        inside = (x > 0) & (x <= 1) if isinstance(x, np.ndarray) else 0 < x <= 1
        if isinstance(x, np.ndarray):
            with np.errstate(divide="ignore"):
                return np.where(inside, a * np.where(inside, x, 1.0) ** (a - 1.0), 0.0)
        return a * x ** (a - 1.0) if inside else 0.0

    def quantile(self, u):
        return _clip(u, 0.0, 1.0) ** (1.0 / self.exponent)

    def mean(self):
        return self.exponent / (self.exponent + 1.0)

    def surplus(self, p):
        a = self.exponent
        x = _clip(p, 0.0, 1.0)
        return a * ((1.0 - x ** (a + 1.0)) / (a + 1.0) - x * (1.0 - x**a) / a)


@dataclass(frozen=True)
class Exponential(Distribution):
    """F(x) = 1 - exp(-rate * x) on [0, inf)."""

    rate: float

    name = "exponential"
    support_upper = math.inf

    def __post_init__(self):
        if not self.rate > 0:
            raise ValueError("exponential rate must be positive")

    def params(self):
        return {"rate": self.rate}

    def cdf(self, x):
        return 1.0 - np.exp(-self.rate * _clip(x, 0.0, math.inf))

    def pdf(self, x):
        if isinstance(x, np.ndarray):
            return np.where(x >= 0, self.rate * np.exp(-self.rate * np.maximum(x, 0.0)), 0.0)
        return self.rate * math.exp(-self.rate * x) if x >= 0 else 0.0

    def quantile(self, u):
        return -np.log1p(-_clip(u, 0.0, 1.0)) / self.rate

    def hazard(self, x):
        return self.rate + 0.0 * x

    def mean(self):
        return 1.0 / self.rate

    def surplus(self, p):
        return np.exp(-self.rate * _clip(p, 0.0, math.inf)) / self.rate


@dataclass(frozen=True)
class Uniform(Distribution):
    """Uniform on [low, high] with 0 <= low < high."""

    low: float = 0.0
    high: float = 1.0

    name = "uniform"

    def __post_init__(self):
        if not (0.0 <= self.low < self.high):
            raise ValueError("uniform bounds must satisfy 0 <= low < high")

    @property
    def support_upper(self):
        return self.high

    def params(self):
        return {"low": self.low, "high": self.high}

    def cdf(self, x):
        return _clip((x - self.low) / (self.high - self.low), 0.0, 1.0)

    def pdf(self, x):
        width = self.high - self.low
        if isinstance(x, np.ndarray):
            return np.where((x >= self.low) & (x <= self.high), 1.0 / width, 0.0)
        return 1.0 / width if self.low <= x <= self.high else 0.0

    def quantile(self, u):
        return self.low + _clip(u, 0.0, 1.0) * (self.high - self.low)

    def mean(self):
        return 0.5 * (self.low + self.high)

    def surplus(self, p):
        x = _clip(p, self.low, self.high)
        below = _clip(self.low - p, 0.0, math.inf)
        return (self.high - x) ** 2 / (2.0 * (self.high - self.low)) + below


DISTRIBUTIONS = {"power": PowerLaw, "exponential": Exponential, "uniform": Uniform}


# ---------------------------------------------------------------------------
# Gain functions G: [0,1] -> [0,1], decreasing, G(0)=1, G(1)=0
# ---------------------------------------------------------------------------


class GainFunction:
    name = "abstract"

    def g(self, phi):
        raise NotImplementedError

    def g_prime(self, phi):
        raise NotImplementedError

    def g_inverse(self, y):
        raise NotImplementedError

    def elasticity(self, phi):
        return elasticity(self.g, self.g_prime, phi)

    def params(self) -> dict:
        return {}


@dataclass(frozen=True)
class PowerGain(GainFunction):
    """G(phi) = 1 - phi**(1/beta); larger beta means more congestion-sensitive usage."""

    beta: float = 1.0

    name = "power"

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError("beta must be positive")

    def params(self):
        return {"beta": self.beta}

    def g(self, phi):
        return 1.0 - phi ** (1.0 / self.beta)

    def g_prime(self, phi):
        return -(1.0 / self.beta) * phi ** (1.0 / self.beta - 1.0)

    def g_inverse(self, y):
        return (1.0 - y) ** self.beta

    def elasticity(self, phi):
        z = phi ** (1.0 / self.beta)
        return z / (self.beta * (1.0 - z))


@dataclass(frozen=True)
class ConvexGain(GainFunction):
    """G(phi) = (1 - phi)**gamma; convex for gamma > 1 (video-like traffic)."""

    gamma: float = 2.0

    name = "convex"

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")

    def params(self):
        return {"gamma": self.gamma}

    def g(self, phi):
        return (1.0 - phi) ** self.gamma

    def g_prime(self, phi):
        return -self.gamma * (1.0 - phi) ** (self.gamma - 1.0)

    def g_inverse(self, y):
        return 1.0 - y ** (1.0 / self.gamma)

    def elasticity(self, phi):
        return self.gamma * phi / (1.0 - phi)


GAINS = {"power": PowerGain, "convex": ConvexGain}


# ---------------------------------------------------------------------------
# Capacity functions H: (0,1] -> R+, decreasing, H -> inf at 0
# ---------------------------------------------------------------------------


class CapacityFunction:
    name = "abstract"

    def h(self, phi):
        raise NotImplementedError

    def h_prime(self, phi):
        raise NotImplementedError

    def h_inverse(self, y):
        raise NotImplementedError

    def elasticity(self, phi):
        return elasticity(self.h, self.h_prime, phi)

    def params(self) -> dict:
        return {}


@dataclass(frozen=True)
class InversePowerCapacity(CapacityFunction):
    """H(phi) = phi**(-gamma); gamma = 1 gives the classic d/phi capacity requirement."""

    gamma: float = 1.0

    name = "inverse-power"

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")

    def params(self):
        return {"gamma": self.gamma}

    def h(self, phi):
        return phi ** (-self.gamma)

    def h_prime(self, phi):
        return -self.gamma * phi ** (-self.gamma - 1.0)

    def h_inverse(self, y):
        return y ** (-1.0 / self.gamma)

    def elasticity(self, phi):
        return self.gamma + 0.0 * phi


CAPACITIES = {"inverse-power": InversePowerCapacity}
