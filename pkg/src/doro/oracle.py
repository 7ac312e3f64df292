"""Exact and brute-force computations on finite discrete loss distributions.

These are the ground-truth oracles used to validate the dual-form risk code:
primal suprema computed directly over the probability simplex, closed forms
for special families, and total-variation / divergence utilities.  Nothing in
this module calls into :mod:`doro.risk`.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .specs import CressieReadSpec

MAX_BRUTEFORCE_SUPPORT = 6

# Default simplex-grid subdivisions by support size; the SLSQP polish pass
# does the precision work, the grid only has to land in the right basin.
_GRID_DEFAULT = {1: 1, 2: 400, 3: 80, 4: 28, 5: 14, 6: 10}


class DiscreteDistribution:
    """Atoms (loss value, probability mass); duplicates merged, sorted by loss."""

    def __init__(self, losses, masses):
        losses = np.asarray(losses, dtype=np.float64).ravel()
        masses = np.asarray(masses, dtype=np.float64).ravel()
        if losses.shape != masses.shape or losses.size == 0:
            raise ValueError("losses and masses must be non-empty and aligned")
        if not np.all(np.isfinite(losses)) or np.any(losses < 0):
            raise ValueError("losses must be finite and non-negative")
        if np.any(masses <= 0):
            raise ValueError("masses must be strictly positive")
        if abs(float(masses.sum()) - 1.0) > 1e-12:
            raise ValueError("masses must sum to 1")
        values, inverse = np.unique(losses, return_inverse=True)
        self.losses = values
        self.masses = np.bincount(inverse, weights=masses)

    @classmethod
    def from_pairs(cls, pairs):
        losses, masses = zip(*pairs)
        return cls(losses, masses)

    @classmethod
    def point_mass(cls, loss):
        return cls([loss], [1.0])

    @property
    def support_size(self) -> int:
        return self.losses.size

    def mean(self) -> float:
        return float(np.dot(self.masses, self.losses))

    def var(self) -> float:
        mu = self.mean()
        return float(np.dot(self.masses, (self.losses - mu) ** 2))

    def moment(self, k: int) -> float:
        return float(np.dot(self.masses, self.losses**k))


def _union_masses(P: DiscreteDistribution, Q: DiscreteDistribution):
    support = np.union1d(P.losses, Q.losses)
    p = np.zeros(support.size)
    q = np.zeros(support.size)
    p[np.searchsorted(support, P.losses)] = P.masses
    q[np.searchsorted(support, Q.losses)] = Q.masses
    return support, p, q


def tv_distance(P: DiscreteDistribution, Q: DiscreteDistribution) -> float:
    """Total variation: half the L1 mass difference over the union support."""
    _, p, q = _union_masses(P, Q)
    return 0.5 * float(np.abs(p - q).sum())


def _f_beta_vec(t: np.ndarray, beta: float) -> np.ndarray:
    return (t**beta - beta * t + beta - 1.0) / (beta * (beta - 1.0))


def cressie_read_divergence(
    Q: DiscreteDistribution, P: DiscreteDistribution, beta: float
) -> float:
    """D_beta(Q || P); +inf when Q is not absolutely continuous w.r.t. P."""
    if not beta > 1 or math.isinf(beta):
        raise ValueError(f"beta must be finite and > 1, got {beta}")
    _, p, q = _union_masses(P, Q)
    if np.any((p == 0) & (q > 0)):
        return math.inf
    on = p > 0
    return float(np.dot(p[on], _f_beta_vec(q[on] / p[on], beta)))


def cvar_primal_exact(P: DiscreteDistribution, alpha: float) -> float:
    """Mean of the worst-alpha slice of the loss distribution, exactly.

    Equals the supremum of E_Q[l] over Q with dQ/dP <= 1/alpha.  The boundary
    atom is split so that exactly alpha mass is averaged.
    """
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"alpha must be in (0, 1], got {alpha}")
    order = np.argsort(P.losses)[::-1]
    losses = P.losses[order]
    masses = P.masses[order]
    remaining = alpha
    total = 0.0
    for loss, mass in zip(losses, masses):
        take = min(mass, remaining)
        total += take * loss
        remaining -= take
        if remaining <= 1e-15:
            break
    return total / alpha


def _dro_feasible(q: np.ndarray, P: DiscreteDistribution, spec: CressieReadSpec,
                  slack: float = 1e-9) -> np.ndarray:
    if spec.is_cvar:
        return np.all(q <= P.masses / spec.alpha + slack, axis=-1)
    div = np.einsum("i,...i->...", P.masses, _f_beta_vec(q / P.masses, spec.beta))
    return div <= spec.rho + slack


def _simplex_grid(m: int, n: int) -> np.ndarray:
    """All compositions of n into m non-negative parts, as masses k/n."""
    out = []
    for dividers in itertools.combinations(range(n + m - 1), m - 1):
        prev = -1
        counts = []
        for d in dividers:
            counts.append(d - prev - 1)
            prev = d
        counts.append(n + m - 2 - prev)
        out.append(counts)
    return np.asarray(out, dtype=np.float64) / n


def dro_primal_bruteforce(
    P: DiscreteDistribution, spec: CressieReadSpec, resolution: int | None = None
) -> float:
    """Maximize E_Q[l] over the divergence ball by direct search on the simplex.

    A dense composition grid locates the basin; SLSQP polishing from the best
    grid points (and from Q = P) pushes the accuracy well below 1e-3 for
    supports up to 6.  The result lower-bounds the true supremum.
    """
    m = P.support_size
    if m > MAX_BRUTEFORCE_SUPPORT:
        raise ValueError(
            f"support size {m} exceeds the brute-force limit {MAX_BRUTEFORCE_SUPPORT}"
        )
    if spec.rho == 0.0:
        return P.mean()
    if m == 1:
        return float(P.losses[0])
    n = resolution if resolution is not None else _GRID_DEFAULT[m]
    grid = _simplex_grid(m, n)
    feasible = grid[_dro_feasible(grid, P, spec)]
    objectives = feasible @ P.losses
    starts = [P.masses.copy()]
    for idx in np.argsort(objectives)[::-1][:3]:
        starts.append(feasible[idx])
    best = float(objectives.max(initial=P.mean()))

    losses = P.losses
    if spec.is_cvar:
        bounds = [(0.0, min(1.0, p / spec.alpha)) for p in P.masses]
        constraints = [{"type": "eq", "fun": lambda q: q.sum() - 1.0}]
    else:
        bounds = [(0.0, 1.0)] * m
        constraints = [
            {"type": "eq", "fun": lambda q: q.sum() - 1.0},
            {
                "type": "ineq",
                "fun": lambda q: spec.rho
                - float(np.dot(P.masses, _f_beta_vec(q / P.masses, spec.beta))),
            },
        ]
    for q0 in starts:
        res = optimize.minimize(
            lambda q: -float(q @ losses),
            q0,
            method="SLSQP",
            bounds=bounds,
            constraints=constraints,
            options={"maxiter": 200, "ftol": 1e-12},
        )
        q = np.clip(res.x, 0.0, None)
        s = q.sum()
        if s <= 0:
            continue
        q = q / s
        if _dro_feasible(q, P, spec, slack=1e-7):
            best = max(best, float(q @ losses))
    return best


@dataclass(frozen=True)
class Chi2Closed:
    """Variance-regularization form of the chi-square DRO risk."""

    risk: float | None
    eta_star: float | None
    applicable: bool


def chi2_variance_form(P: DiscreteDistribution, rho: float) -> Chi2Closed:
    """Closed form E + sqrt(2*rho*Var) valid when rho <= Var / (2 E^2).

    In that regime the dual minimizer is eta* = E - sqrt(Var / (2 rho)) <= 0;
    outside it the dual minimizer is non-negative and the dual solver must be
    used instead.
    """
    if rho < 0:
        raise ValueError("rho must be non-negative")
    mean = P.mean()
    var = P.var()
    if rho == 0.0:
        return Chi2Closed(risk=mean, eta_star=None, applicable=False)
    if var == 0.0 or rho > var / (2.0 * mean**2):
        return Chi2Closed(risk=None, eta_star=None, applicable=False)
    return Chi2Closed(
        risk=mean + math.sqrt(2.0 * rho * var),
        eta_star=mean - math.sqrt(var / (2.0 * rho)),
        applicable=True,
    )


def _dual_objective_exact(P: DiscreteDistribution, eta: float,
                          spec: CressieReadSpec) -> float:
    excess = np.maximum(P.losses - eta, 0.0)
    moment = float(np.dot(P.masses, excess**spec.beta_star))
    return spec.c * moment ** (1.0 / spec.beta_star) + eta


def dro_dual_exact(P: DiscreteDistribution, spec: CressieReadSpec) -> float:
    """High-precision DRO risk of a discrete distribution.

    CVaR goes through the exact primal; chi-square uses the closed variance
    form when it applies; everything else minimizes the exact dual objective
    with scipy's bounded scalar minimizer on a widened bracket.
    """
    if spec.is_cvar:
        return cvar_primal_exact(P, spec.alpha)
    if spec.rho == 0.0:
        return P.mean()
    if spec.beta == 2.0:
        closed = chi2_variance_form(P, spec.rho)
        if closed.applicable:
            return closed.risk
        lo = 0.0  # eta* >= 0 outside the variance-form regime
    else:
        lo_val = float(P.losses.min())
        hi_val = float(P.losses.max())
        lo = lo_val - (hi_val - lo_val + 1.0)
        span = hi_val - lo
        for _ in range(90):
            f_lo = _dual_objective_exact(P, lo, spec)
            f_probe = _dual_objective_exact(P, lo + 1e-3 * span, spec)
            if f_lo >= f_probe - 1e-14 * (1.0 + abs(f_lo)):
                break
            lo -= span
            span = hi_val - lo
    hi = float(P.losses.max())
    if hi <= lo:
        hi = lo + 1.0
    res = optimize.minimize_scalar(
        lambda eta: _dual_objective_exact(P, eta, spec),
        bounds=(lo, hi),
        method="bounded",
        options={"xatol": 1e-12},
    )
    return float(res.fun)


def tail_truncate(P: DiscreteDistribution, eps: float) -> DiscreteDistribution:
    """Remove the upper-eps tail of the loss distribution and renormalize.

    The boundary atom is split so that exactly eps mass is removed.
    """
    if not 0.0 <= eps < 1.0:
        raise ValueError(f"eps must be in [0, 1), got {eps}")
    if eps == 0.0:
        return P
    order = np.argsort(P.losses)[::-1]
    masses = P.masses[order].copy()
    remaining = eps
    for i in range(masses.size):
        take = min(masses[i], remaining)
        masses[i] -= take
        remaining -= take
        if remaining <= 1e-15:
            break
    keep = masses > 1e-15
    return DiscreteDistribution(P.losses[order][keep], masses[keep] / (1.0 - eps))


def doro_risk_discrete(
    P_train: DiscreteDistribution, spec: CressieReadSpec, eps: float
) -> float:
    """DORO risk: DRO risk of the renormalized lower (1 - eps) loss slice."""
    if not 0.0 <= eps < 0.5:
        raise ValueError(f"eps must be in [0, 0.5), got {eps}")
    return dro_dual_exact(tail_truncate(P_train, eps), spec)


@dataclass(frozen=True)
class TwoPointFamily:
    """Two-parameter loss family: theta0 -> (0 w.p. 1-eps, M w.p. eps),
    theta1 -> the constant delta."""

    M: float
    delta: float
    eps: float

    def __post_init__(self):
        if self.M < 0 or self.delta < 0:
            raise ValueError("M and delta must be non-negative")
        if not 0.0 <= self.eps < 0.5:
            raise ValueError(f"eps must be in [0, 0.5), got {self.eps}")

    def distribution(self, theta: int) -> DiscreteDistribution:
        if theta == 0:
            if self.eps == 0.0:
                return DiscreteDistribution.point_mass(0.0)
            return DiscreteDistribution([0.0, self.M], [1.0 - self.eps, self.eps])
        if theta == 1:
            return DiscreteDistribution.point_mass(self.delta)
        raise ValueError("theta must be 0 or 1")


@dataclass(frozen=True)
class PmdeRisks:
    cvar_theta0: float
    cvar_theta1: float
    chi2_theta0: float
    chi2_theta1: float


def pmde_closed_forms(
    M: float, delta: float, eps: float, alpha: float, rho: float
) -> PmdeRisks:
    """Closed-form CVaR and chi-square DRO risks of the two-point family.

    Valid under alpha >= eps and 1 + 2*rho <= 1/eps; outside that regime the
    closed forms are not asserted and a ValueError is raised.
    """
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"alpha must be in (0, 1], got {alpha}")
    if eps > 0 and (alpha < eps or 1.0 + 2.0 * rho > 1.0 / eps):
        raise ValueError(
            "closed forms require alpha >= eps and 1 + 2*rho <= 1/eps"
        )
    return PmdeRisks(
        cvar_theta0=M * eps / alpha,
        cvar_theta1=delta,
        chi2_theta0=M * eps + M * math.sqrt(2.0 * rho * eps * (1.0 - eps)),
        chi2_theta1=delta,
    )


def huber_mix(
    P: DiscreteDistribution, P_tilde: DiscreteDistribution, eps: float
) -> DiscreteDistribution:
    """The eps-contaminated mixture (1 - eps) P + eps P_tilde."""
    if not 0.0 <= eps < 0.5:
        raise ValueError(f"eps must be in [0, 0.5), got {eps}")
    if eps == 0.0:
        return P
    losses = np.concatenate([P.losses, P_tilde.losses])
    masses = np.concatenate([(1.0 - eps) * P.masses, eps * P_tilde.masses])
    return DiscreteDistribution(losses, masses)


def empirical_moment(P: DiscreteDistribution, k2: int) -> float:
    """(E[l^{2k}])^{1/2k} for even 2k >= 2."""
    if k2 < 2 or k2 % 2 != 0:
        raise ValueError(f"k2 must be an even integer >= 2, got {k2}")
    return P.moment(k2) ** (1.0 / k2)


class GroupedPopulation:
    """Per-sample losses with K overlapping boolean domain masks."""

    def __init__(self, losses, domain_masks, masses=None):
        self.losses = np.asarray(losses, dtype=np.float64).ravel()
        n = self.losses.size
        if masses is None:
            self.masses = np.full(n, 1.0 / n)
        else:
            self.masses = np.asarray(masses, dtype=np.float64).ravel()
            if self.masses.shape != self.losses.shape:
                raise ValueError("masses must align with losses")
        self.domain_masks = [np.asarray(m, dtype=bool).ravel() for m in domain_masks]
        if not self.domain_masks:
            raise ValueError("at least one domain is required")
        for k, mask in enumerate(self.domain_masks):
            if mask.shape != self.losses.shape:
                raise ValueError(f"domain mask {k} has wrong length")
            if float(self.masses[mask].sum()) <= 0.0:
                raise ValueError(f"domain {k} has zero mass")

    @property
    def alpha(self) -> float:
        """Mass of the smallest domain."""
        return min(float(self.masses[m].sum()) for m in self.domain_masks)

    def as_distribution(self) -> DiscreteDistribution:
        return DiscreteDistribution(self.losses, self.masses / self.masses.sum())


def worst_case_risk(pop: GroupedPopulation) -> tuple[float, int]:
    """Max over domains of the conditional mean loss; ties go to the
    smallest domain index."""
    risks = []
    for mask in pop.domain_masks:
        m = pop.masses[mask]
        risks.append(float(np.dot(m, pop.losses[mask]) / m.sum()))
    idx = int(np.argmax(risks))
    return risks[idx], idx
