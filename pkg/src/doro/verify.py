"""Randomized self-checks: dual/primal equivalence, ordering bounds,
closed-form agreement, DORO monotonicity, and the Danskin gradient check.

Each check runs a seeded batch of trials and reports the first
counterexample verbatim on failure.  The CLI ``verify`` subcommand and the
acceptance tests both drive these.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import models, oracle
from .risk import LossBatch, doro_batch_risk, dual_sample_weights, minimize_eta
from .specs import chi2_spec_from_rho, make_spec


@dataclass
class CheckResult:
    name: str
    trials: int
    passed: bool
    counterexample: str | None = None
    detail: str = ""


def random_distribution(rng, max_support=6, max_loss=10.0) -> oracle.DiscreteDistribution:
    m = int(rng.integers(2, max_support + 1))
    losses = rng.uniform(0.0, max_loss, size=m)
    masses = rng.dirichlet(np.ones(m))
    masses = masses / masses.sum()
    return oracle.DiscreteDistribution(losses, masses)


def _as_batch(P: oracle.DiscreteDistribution) -> LossBatch:
    return LossBatch(P.losses, P.masses / P.masses.sum())


def check_dual_primal(trials=200, seed=0) -> CheckResult:
    """|dual minimize_eta - primal oracle| <= 1e-4 (CVaR) / 1e-3 (chi2)."""
    rng = np.random.default_rng(seed)
    for t in range(trials):
        P = random_distribution(rng)
        alpha = float(rng.uniform(0.05, 1.0))
        batch = _as_batch(P)
        cvar_spec = make_spec("cvar", alpha)
        dual = minimize_eta(batch, cvar_spec).risk
        primal = oracle.cvar_primal_exact(P, alpha)
        if abs(dual - primal) > 1e-4:
            return CheckResult(
                "dual-primal equivalence", trials, False,
                f"trial {t}: cvar alpha={alpha} losses={P.losses.tolist()} "
                f"masses={P.masses.tolist()} dual={dual} primal={primal}",
            )
        chi2_spec = make_spec("chi2", alpha)
        dual = minimize_eta(batch, chi2_spec).risk
        primal = oracle.dro_primal_bruteforce(P, chi2_spec)
        if abs(dual - primal) > 1e-3:
            return CheckResult(
                "dual-primal equivalence", trials, False,
                f"trial {t}: chi2 alpha={alpha} losses={P.losses.tolist()} "
                f"masses={P.masses.tolist()} dual={dual} primal={primal}",
            )
    return CheckResult("dual-primal equivalence", trials, True)


def random_population(rng, n_max=12, k_max=4) -> oracle.GroupedPopulation:
    """Random grouped population whose smallest domain covers at most half
    of the samples, so the minimal group size alpha is <= 1/2 as the
    CVaR/chi-square ordering bounds require."""
    n = int(rng.integers(4, n_max + 1))
    losses = rng.uniform(0.0, 10.0, size=n)
    k = int(rng.integers(1, k_max + 1))
    first = np.zeros(n, dtype=bool)
    first[rng.choice(n, size=int(rng.integers(1, n // 2 + 1)), replace=False)] = True
    masks = [first]
    for _ in range(k - 1):
        mask = rng.random(n) < rng.uniform(0.2, 0.9)
        if not mask.any():
            mask[int(rng.integers(0, n))] = True
        masks.append(mask)
    return oracle.GroupedPopulation(losses, masks)


def check_ordering(trials=200, seed=1) -> CheckResult:
    """R_max <= CVaR_alpha <= chi2-DRO, and the generalized bound for
    beta in {2, 4, inf} at rho = f_beta(1/alpha)."""
    rng = np.random.default_rng(seed)
    tol = 1e-3
    for t in range(trials):
        pop = random_population(rng)
        alpha = pop.alpha
        P = pop.as_distribution()
        r_max, _ = oracle.worst_case_risk(pop)
        cvar = oracle.cvar_primal_exact(P, alpha)
        chi2 = oracle.dro_dual_exact(P, make_spec("chi2", alpha))
        if not (r_max <= cvar + tol and cvar <= chi2 + tol):
            return CheckResult(
                "ordering bounds", trials, False,
                f"trial {t}: losses={pop.losses.tolist()} alpha={alpha} "
                f"r_max={r_max} cvar={cvar} chi2={chi2}",
            )
        for beta in (2.0, 4.0):
            risk = oracle.dro_dual_exact(P, make_spec("general", alpha, beta=beta))
            if r_max > risk + tol:
                return CheckResult(
                    "ordering bounds", trials, False,
                    f"trial {t}: beta={beta} r_max={r_max} dro={risk} "
                    f"losses={pop.losses.tolist()}",
                )
    return CheckResult("ordering bounds", trials, True)


def check_closed_forms(trials=50, seed=2) -> CheckResult:
    """Two-point-family closed forms vs the exact/brute-force oracles."""
    rng = np.random.default_rng(seed)
    done = 0
    t = 0
    while done < trials:
        t += 1
        eps = float(rng.uniform(0.01, 0.4))
        alpha = float(rng.uniform(eps, 1.0))
        rho_max = 0.5 * (1.0 / eps - 1.0)
        rho = float(rng.uniform(0.01, min(rho_max, 5.0)))
        if 1.0 + 2.0 * rho > 1.0 / eps:
            continue
        M = float(rng.uniform(0.5, 10.0))
        delta = float(rng.uniform(0.0, 5.0))
        closed = oracle.pmde_closed_forms(M, delta, eps, alpha, rho)
        family = oracle.TwoPointFamily(M=M, delta=delta, eps=eps)
        P0 = family.distribution(0)
        cvar0 = oracle.cvar_primal_exact(P0, alpha)
        if abs(closed.cvar_theta0 - cvar0) > 1e-8:
            return CheckResult(
                "closed-form agreement", trials, False,
                f"M={M} delta={delta} eps={eps} alpha={alpha}: "
                f"closed cvar={closed.cvar_theta0} exact={cvar0}",
            )
        chi20 = oracle.dro_primal_bruteforce(P0, chi2_spec_from_rho(rho))
        if abs(closed.chi2_theta0 - chi20) > 1e-3:
            return CheckResult(
                "closed-form agreement", trials, False,
                f"M={M} delta={delta} eps={eps} rho={rho}: "
                f"closed chi2={closed.chi2_theta0} bruteforce={chi20}",
            )
        done += 1
    return CheckResult("closed-form agreement", done, True)


def check_doro_monotone(trials=100, seed=3) -> CheckResult:
    """doro_batch_risk is non-increasing in eps and equals DRO at eps = 0."""
    rng = np.random.default_rng(seed)
    for t in range(trials):
        n = int(rng.integers(4, 20))
        losses = rng.uniform(0.0, 10.0, size=n)
        batch = LossBatch(losses)
        alpha = float(rng.uniform(0.1, 1.0))
        spec = make_spec("cvar" if t % 2 == 0 else "chi2", alpha)
        base = minimize_eta(batch, spec).risk
        previous = math.inf
        for eps in (0.0, 0.1, 0.2, 0.3, 0.4):
            risk, _, _ = doro_batch_risk(batch, spec, eps)
            if eps == 0.0 and risk != base:
                return CheckResult(
                    "doro monotonicity", trials, False,
                    f"trial {t}: eps=0 risk {risk} != dro risk {base}",
                )
            if risk > previous + 1e-9:
                return CheckResult(
                    "doro monotonicity", trials, False,
                    f"trial {t}: losses={losses.tolist()} eps={eps} "
                    f"risk {risk} > previous {previous}",
                )
            previous = risk
    return CheckResult("doro monotonicity", trials, True)


def danskin_relative_error(params, X, y, spec, eps, h=1e-5):
    """Relative error between the assembled gradient (eta held fixed at its
    minimizer) and central differences of the re-solved DORO objective."""

    def objective(p):
        losses = models.logistic_loss(models.forward(p, X), y)
        return doro_batch_risk(LossBatch(losses), spec, eps)[0]

    losses = models.logistic_loss(models.forward(params, X), y)
    batch = LossBatch(losses)
    risk, eta, kept = doro_batch_risk(batch, spec, eps)
    weights = dual_sample_weights(batch, eta, spec, kept)
    grad = models.backward(params, X, y, weights)

    analytic, numeric = [], []
    for name, arr in params.arrays():
        g = np.atleast_1d(np.asarray(getattr(grad, name), dtype=np.float64)).ravel()
        size = np.atleast_1d(np.asarray(arr)).size
        for i in range(size):
            plus = params.copy()
            minus = params.copy()
            models._bump(plus, name, i, +h)
            models._bump(minus, name, i, -h)
            numeric.append((objective(plus) - objective(minus)) / (2.0 * h))
            analytic.append(g[i])
    analytic = np.asarray(analytic)
    numeric = np.asarray(numeric)
    scale = max(np.linalg.norm(analytic), np.linalg.norm(numeric), 1e-8)
    return float(np.linalg.norm(analytic - numeric) / scale)


def check_danskin(trials=10, seed=4) -> CheckResult:
    """Treating eta* as constant must match finite differences of the full
    minimized objective to <= 1e-3 relative error."""
    rng = np.random.default_rng(seed)
    for t in range(trials):
        n, d = 16, 3
        X = rng.standard_normal((n, d))
        y = rng.integers(0, 2, size=n)
        params = models.init_params("linear", d, rng=rng)
        spec = make_spec("cvar" if t % 2 == 0 else "chi2",
                         float(rng.uniform(0.3, 0.9)))
        eps = float(rng.uniform(0.0, 0.3))
        err = danskin_relative_error(params, X, y, spec, eps)
        if err > 1e-3:
            return CheckResult(
                "danskin gradient", trials, False,
                f"trial {t}: spec={spec} eps={eps} relative error {err}",
            )
    return CheckResult("danskin gradient", trials, True)


def run_all(trials=None, seed=0, corrupt=False) -> list[CheckResult]:
    """Run the full verification suite.

    ``corrupt`` is a test hook that injects a failing check so the failure
    path of the CLI can be exercised.
    """
    scale = trials
    results = [
        check_dual_primal(trials=scale or 200, seed=seed),
        check_ordering(trials=scale or 200, seed=seed + 1),
        check_closed_forms(trials=scale or 50, seed=seed + 2),
        check_doro_monotone(trials=scale or 100, seed=seed + 3),
        check_danskin(trials=min(scale or 10, 25), seed=seed + 4),
    ]
    if corrupt:
        results.append(CheckResult(
            "corrupted spec hook", 1, False,
            "intentional failure injected via --corrupt",
        ))
    return results
