"""Bracketing root finders for monotone scalar functions."""

from __future__ import annotations

import numpy as np
from scipy import optimize

from peerflow.errors import BracketError, NonConvergenceError


def bisect(f, lo: float, hi: float, xtol: float = 1e-12, ftol: float = 0.0, max_iter: int = 200) -> float:
    """Bisection on [lo, hi]; f(lo) and f(hi) must differ in sign (zero counts as either)."""
    flo = f(lo)
    if flo == 0.0:
        return lo
    fhi = f(hi)
    if fhi == 0.0:
        return hi
    if (flo > 0) == (fhi > 0):
        raise BracketError(f"no sign change on [{lo:.3g}, {hi:.3g}]: f={flo:.3g}, {fhi:.3g}")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if hi - lo <= xtol or mid in (lo, hi):
            return mid
        fm = f(mid)
        if fm == 0.0 or abs(fm) <= ftol:
            return mid
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    raise NonConvergenceError(f"bisection did not reach xtol={xtol} in {max_iter} steps")


def brent(f, lo: float, hi: float, xtol: float = 1e-12, max_iter: int = 200) -> float:
    """Brent's bracketing method; converges whenever bisection would."""
    flo = f(lo)
    if flo == 0.0:
        return lo
    fhi = f(hi)
    if fhi == 0.0:
        return hi
    if (flo > 0) == (fhi > 0):
        raise BracketError(f"no sign change on [{lo:.3g}, {hi:.3g}]: f={flo:.3g}, {fhi:.3g}")
    try:
        return optimize.brentq(f, lo, hi, xtol=xtol, rtol=4 * np.finfo(float).eps, maxiter=max_iter)
    except RuntimeError as exc:
        raise NonConvergenceError(str(exc)) from exc


def find_root(f, lo: float, hi: float, method: str = "brent", xtol: float = 1e-12, max_iter: int = 200) -> float:
    if method == "brent":
        return brent(f, lo, hi, xtol=xtol, max_iter=max_iter)
    if method == "bisect":
        return bisect(f, lo, hi, xtol=xtol, max_iter=max_iter)
    raise ValueError(f"unknown root method {method!r}")


def bisect_vec(f, lo: np.ndarray, hi: np.ndarray, decreasing: bool = True, n_iter: int = 64) -> np.ndarray:
    """Elementwise bisection for a batch of monotone problems.

    ``f`` maps an array of abscissae to an array of values. Elements with no
    sign change come back as NaN; the caller decides what that means.
    """
    lo = np.array(lo, dtype=float, copy=True)
    hi = np.array(hi, dtype=float, copy=True)
    sign = 1.0 if decreasing else -1.0
    flo = sign * f(lo)
    fhi = sign * f(hi)
    ok = (flo >= 0) & (fhi <= 0)
    for _ in range(n_iter):
        mid = 0.5 * (lo + hi)
        fm = sign * f(mid)
        right = fm > 0
        lo = np.where(right, mid, lo)
        hi = np.where(right, hi, mid)
    out = 0.5 * (lo + hi)
    return np.where(ok, out, np.nan)
