"""Cressie-Read divergence specs parameterizing DRO/DORO objectives."""
from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class CressieReadSpec:
    """One point of the Cressie-Read family, fully resolved.

    ``beta`` is the divergence order in (1, inf]; ``beta == inf`` is CVaR.
    ``beta_star`` is the conjugate exponent beta/(beta-1), ``rho`` the
    divergence radius, ``c`` the dual scaling constant and ``alpha`` the
    minimal group size that generated ``rho`` (kept for reporting).
    """

    beta: float
    beta_star: float
    rho: float
    c: float
    alpha: float

    @property
    def is_cvar(self) -> bool:
        return math.isinf(self.beta)


def f_beta(t: float, beta: float) -> float:
    """Divergence generator (t^beta - beta*t + beta - 1) / (beta*(beta-1)).

    Non-negative for t >= 0 and zero exactly at t = 1.
    """
    if not beta > 1 or math.isinf(beta):
        raise ValueError(f"beta must be finite and > 1, got {beta}")
    if t < 0:
        raise ValueError(f"t must be non-negative, got {t}")
    return (t**beta - beta * t + beta - 1.0) / (beta * (beta - 1.0))


def make_spec(kind: str, alpha: float, beta: float | None = None) -> CressieReadSpec:
    """Build a spec from a divergence kind and the minimal group size alpha.

    ``kind`` is one of ``cvar``, ``chi2`` or ``general`` (the latter requires
    a finite ``beta`` > 1).  The radius is rho = f_beta(1/alpha) (with the
    CVaR limit rho = -log(alpha)), so alpha = 1 always gives rho = 0, c = 1.
    """
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"alpha must be in (0, 1], got {alpha}")
    if kind == "cvar":
        return CressieReadSpec(
            beta=math.inf,
            beta_star=1.0,
            rho=-math.log(alpha),
            c=1.0 / alpha,
            alpha=alpha,
        )
    if kind == "chi2":
        beta = 2.0
    elif kind == "general":
        if beta is None or not beta > 1 or math.isinf(beta):
            raise ValueError("kind 'general' requires a finite beta > 1")
    else:
        raise ValueError(f"unknown spec kind {kind!r}")
    rho = f_beta(1.0 / alpha, beta)
    c = (1.0 + beta * (beta - 1.0) * rho) ** (1.0 / beta)
    return CressieReadSpec(
        beta=beta,
        beta_star=beta / (beta - 1.0),
        rho=rho,
        c=c,
        alpha=alpha,
    )


def chi2_spec_from_rho(rho: float) -> CressieReadSpec:
    """Chi-square spec with a radius given directly; alpha is back-solved
    from rho = (1/alpha - 1)^2 / 2."""
    if rho < 0:
        raise ValueError("rho must be non-negative")
    return CressieReadSpec(
        beta=2.0,
        beta_star=2.0,
        rho=rho,
        c=math.sqrt(1.0 + 2.0 * rho),
        alpha=1.0 / (1.0 + math.sqrt(2.0 * rho)),
    )
