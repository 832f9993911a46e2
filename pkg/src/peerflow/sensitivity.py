"""First-order sensitivities of the equilibrium.

``analytic_sensitivities`` works in the (p, q, t) coordinates of the
constructive solver and uses closed forms obtained by implicitly
differentiating the capacity identity d_h H(phi_h) + d_l H(phi_l) = c
together with G(phi_l) = t G(phi_h). ``theta_elasticities`` differentiates the
full solver numerically in the strategy coordinates (p, q, r).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

from peerflow.equilibrium import DEFAULT_SETTINGS, SolverSettings, solve_equilibrium, state_at_ratio
from peerflow.errors import DomainError, PeerflowError
from peerflow.market import MarketModel, Strategy, boundary_from_ratio

log = logging.getLogger(__name__)

FD_REL_STEP = 1e-5


@dataclass(frozen=True)
class SensitivityReport:
    p: float
    q: float
    t: float
    phi_h: float
    phi_l: float
    d_h: float
    d_l: float
    dphi_h_dp: float
    dphi_h_dq: float
    dphi_h_dt: float
    dphi_l_dp: float
    dphi_l_dq: float
    dphi_l_dt: float
    dd_h_dp: float
    dd_h_dq: float
    dd_h_dt: float
    dd_l_dp: float
    dd_l_dq: float
    dd_l_dt: float
    kappa: float

    DERIVATIVES = (
        "dphi_h_dp", "dphi_h_dq", "dphi_h_dt",
        "dphi_l_dp", "dphi_l_dq", "dphi_l_dt",
        "dd_h_dp", "dd_h_dq", "dd_h_dt",
        "dd_l_dp", "dd_l_dq", "dd_l_dt",
    )

    def sign_violations(self) -> list[str]:
        """Names of derivatives whose sign contradicts the expected monotonicity."""
        expected = {
            "dd_h_dp": -1, "dd_l_dp": -1, "dd_h_dq": -1,
            "dd_l_dq": 1, "dd_h_dt": -1, "dd_l_dt": 1,
        }
        bad = []
        for name, sign in expected.items():
            value = getattr(self, name)
            strict = name.endswith("_dt")
            if (sign * value < 0) or (strict and value == 0):
                bad.append(name)
        return bad


def analytic_sensitivities(
    model: MarketModel, p: float, q: float, t: float, settings: SolverSettings = DEFAULT_SETTINGS
) -> SensitivityReport:
    """Closed-form partial derivatives of congestion and loads at eta = (p, q, t)."""
    if not (0.0 < t < 1.0):
        raise DomainError(f"gain ratio must be strictly inside (0, 1), got {t}")
    gain, cap, f_v = model.gain, model.capacity, model.f_v
    st = state_at_ratio(model, p, q, t, settings)
    ph, pl, dh, dl = st.phi_h, st.phi_l, st.d_h, st.d_l
    eg_h, eg_l = gain.elasticity(ph), gain.elasticity(pl)
    if eg_h == 0.0 or eg_l == 0.0:
        raise DomainError("gain elasticity vanishes at an equilibrium congestion level")
    eh_h, eh_l = cap.elasticity(ph), cap.elasticity(pl)
    h_h, h_l = cap.h(ph), cap.h(pl)
    a_h, a_l = dh * h_h, dl * h_l  # capacity used by each tier

    kappa = a_h * (eh_h / eg_h + 1.0) + a_l * (eh_l / eg_l + 1.0)

    v_bar = boundary_from_ratio(q, t)
    fv = f_v.cdf(v_bar)
    if not (0.0 < fv < 1.0):
        raise DomainError(f"boundary value {v_bar} lies outside the interior of the CP value support")
    fv_prime = f_v.pdf(v_bar)
    dfv_dq = fv_prime / (1.0 - t)
    dfv_dt = fv_prime * q / (1.0 - t) ** 2

    m = 1.0 - model.f_u.cdf(p)
    m_ratio = -model.f_u.pdf(p) / m  # M'(p)/M(p)
    split = a_l / fv - a_h / (1.0 - fv)
    lead = ph / (kappa * eg_h)

    dphi_h_dp = lead * m_ratio * (a_h + a_l)
    dphi_h_dq = lead * dfv_dq * split
    dphi_h_dt = lead * (dfv_dt * split + dl * (h_l / t + cap.h_prime(pl) * gain.g(ph) / gain.g_prime(pl)))

    chain = pl * eg_h / (ph * eg_l)
    dphi_l_dp = chain * dphi_h_dp
    dphi_l_dq = chain * dphi_h_dq
    dphi_l_dt = chain * dphi_h_dt + gain.g(ph) / gain.g_prime(pl)

    spread = a_h * eh_h / eg_h + a_l * eh_l / eg_l
    dd_h_dp = dh * m_ratio / kappa * spread
    dd_l_dp = dl * m_ratio / kappa * spread
    dd_h_dq = dh / kappa * dfv_dq * (-split) - dfv_dq * dh / (1.0 - fv)
    dd_l_dq = dl / kappa * dfv_dq * (-split) + dfv_dq * dl / fv
    dd_h_dt = dd_h_dq / dfv_dq * dfv_dt - dh / (t * kappa) * a_l * (eh_l / eg_l + 1.0)
    dd_l_dt = dd_l_dq / dfv_dq * dfv_dt + dl / (t * kappa) * a_h * (eh_h / eg_h + 1.0)

    report = SensitivityReport(
        p=p, q=q, t=t, phi_h=ph, phi_l=pl, d_h=dh, d_l=dl,
        dphi_h_dp=dphi_h_dp, dphi_h_dq=dphi_h_dq, dphi_h_dt=dphi_h_dt,
        dphi_l_dp=dphi_l_dp, dphi_l_dq=dphi_l_dq, dphi_l_dt=dphi_l_dt,
        dd_h_dp=dd_h_dp, dd_h_dq=dd_h_dq, dd_h_dt=dd_h_dt,
        dd_l_dp=dd_l_dp, dd_l_dq=dd_l_dq, dd_l_dt=dd_l_dt,
        kappa=kappa,
    )
    bad = report.sign_violations()
    if bad:
        log.info("sign pattern differs at p=%g q=%g t=%g: %s", p, q, t, ", ".join(bad))
    return report


def ratio_finite_differences(
    model: MarketModel, p: float, q: float, t: float, rel_step: float = FD_REL_STEP,
    settings: SolverSettings = DEFAULT_SETTINGS,
) -> dict[str, float]:
    """Central differences of (phi_h, phi_l, d_h, d_l) in (p, q, t), keyed like SensitivityReport.

    The t step is taken relative to min(t, 1 - t): near t = 1 the boundary value
    q/(1 - t) varies on the scale of 1 - t, not of t.
    """
    out = {}
    base = {"p": p, "q": q, "t": t}
    scale = {"p": p, "q": q, "t": min(t, 1.0 - t)}
    for var in ("p", "q", "t"):
        h = rel_step * scale[var]
        up = dict(base, **{var: base[var] + h})
        dn = dict(base, **{var: base[var] - h})
        s_up = state_at_ratio(model, up["p"], up["q"], up["t"], settings)
        s_dn = state_at_ratio(model, dn["p"], dn["q"], dn["t"], settings)
        for name in ("phi_h", "phi_l", "d_h", "d_l"):
            key = ("dphi_" + name[4:] if name.startswith("phi") else "dd_" + name[2:]) + "_d" + var
            out[key] = (getattr(s_up, name) - getattr(s_dn, name)) / (2.0 * h)
    return out


@dataclass(frozen=True)
class ThetaElasticities:
    """Elasticities -(x/y) dy/dx of the equilibrium loads in the strategy coordinates."""

    d_h_p: float
    d_l_p: float
    d_h_q: float
    d_l_q: float
    d_h_r: float | None
    d_l_r: float | None
    d_t_p: float
    d_t_q: float
    d_t_r: float | None


def _central(f, x: float, lo: float, hi: float, rel_step: float):
    """Central difference of a vector-valued f at x, shrinking the step at most twice."""
    h = rel_step * abs(x) if x != 0 else rel_step
    for _ in range(3):
        if lo <= x - h and x + h <= hi:
            try:
                up, dn = f(x + h), f(x - h)
            except PeerflowError:
                h *= 0.1
                continue
            return [(u - d) / (2.0 * h) for u, d in zip(up, dn)]
        h *= 0.1
    raise DomainError(f"central difference at {x} leaves the feasible range [{lo}, {hi}]")


def _loads(model, p, q, r, settings):
    e = solve_equilibrium(model, Strategy(p, q, r), settings)
    return (e.d_h, e.d_l, e.d_t)


def _elastic(x, y, dy):
    if y == 0.0:
        raise DomainError("elasticity of a zero quantity is undefined")
    return -(x / y) * dy


def theta_elasticities(
    model: MarketModel, strategy: Strategy, settings: SolverSettings = DEFAULT_SETTINGS,
    rel_step: float = FD_REL_STEP, with_r: bool | None = None,
) -> ThetaElasticities:
    """Finite-difference elasticities of d_h, d_l, d_t with respect to p, q and r.

    r-elasticities need r strictly inside (0, 1) and are None otherwise.
    Elasticities of a tier whose load is identically zero (d_h at r = 0,
    d_l at r = 1) are reported as 0.
    """
    p, q, r = strategy.as_tuple()
    base = _loads(model, p, q, r, settings)
    if with_r is None:
        with_r = 0.0 < r < 1.0
    big = float("inf")
    gp = _central(lambda x: _loads(model, x, q, r, settings), p, 0.0, big, rel_step)
    gq = _central(lambda x: _loads(model, p, x, r, settings), q, 0.0, big, rel_step)

    def el(x, i, grad, allow_zero):
        if base[i] == 0.0 and allow_zero:
            return 0.0
        return _elastic(x, base[i], grad[i])

    d_h_zero = r == 0.0
    d_l_zero = r == 1.0
    gr = None
    if with_r:
        gr = _central(lambda x: _loads(model, p, q, x, settings), r, 0.0, 1.0, rel_step)
    return ThetaElasticities(
        d_h_p=el(p, 0, gp, d_h_zero),
        d_l_p=el(p, 1, gp, d_l_zero),
        d_h_q=el(q, 0, gq, d_h_zero),
        d_l_q=el(q, 1, gq, d_l_zero),
        d_h_r=el(r, 0, gr, False) if gr else None,
        d_l_r=el(r, 1, gr, False) if gr else None,
        d_t_p=el(p, 2, gp, False),
        d_t_q=el(q, 2, gq, False),
        d_t_r=el(r, 2, gr, False) if gr else None,
    )


def kappa_from_differences(model: MarketModel, p: float, q: float, t: float, rel_step: float = FD_REL_STEP,
                           settings: SolverSettings = DEFAULT_SETTINGS) -> float:
    """K(eta) recovered from a central difference of phi_h in p.

    Inverts dphi_h/dp = phi_h (M'/M) (d_h H(phi_h) + d_l H(phi_l)) / (K e^G(phi_h)),
    so it shares no algebra with the closed form it is compared against.
    """
    st = state_at_ratio(model, p, q, t, settings)
    cap = model.capacity
    used = st.d_h * cap.h(st.phi_h) + st.d_l * cap.h(st.phi_l)
    m_ratio = -model.f_u.pdf(p) / (1.0 - model.f_u.cdf(p))
    h = rel_step * p
    up = state_at_ratio(model, p + h, q, t, settings).phi_h
    dn = state_at_ratio(model, p - h, q, t, settings).phi_h
    slope = (up - dn) / (2.0 * h)
    return st.phi_h * m_ratio * used / (model.gain.elasticity(st.phi_h) * slope)


def identity_drift(model: MarketModel, report: SensitivityReport) -> dict[str, float]:
    """Derivative of d_h H(phi_h) + d_l H(phi_l) along p, q and t; each should vanish."""
    cap = model.capacity
    h_h, h_l = cap.h(report.phi_h), cap.h(report.phi_l)
    hp_h, hp_l = cap.h_prime(report.phi_h), cap.h_prime(report.phi_l)
    out = {}
    for var in ("p", "q", "t"):
        g = lambda name: getattr(report, f"{name}_d{var}")  # noqa: E731
        out[var] = (g("dd_h") * h_h + report.d_h * hp_h * g("dphi_h")
                    + g("dd_l") * h_l + report.d_l * hp_l * g("dphi_l"))
    return out
