import math

import numpy as np
import pytest

from doro.oracle import (DiscreteDistribution, GroupedPopulation,
                         TwoPointFamily, chi2_variance_form,
                         cressie_read_divergence, cvar_primal_exact,
                         doro_risk_discrete, dro_dual_exact,
                         dro_primal_bruteforce, empirical_moment, huber_mix,
                         pmde_closed_forms, tail_truncate, tv_distance,
                         worst_case_risk)
from doro.specs import chi2_spec_from_rho, make_spec


def uniform(losses):
    losses = np.asarray(losses, dtype=np.float64)
    return DiscreteDistribution(losses, np.full(losses.size, 1.0 / losses.size))


def random_distribution(rng, max_support=6):
    m = int(rng.integers(2, max_support + 1))
    return DiscreteDistribution(rng.uniform(0.0, 10.0, size=m),
                                rng.dirichlet(np.ones(m)))


class TestDiscreteDistribution:
    def test_merges_duplicates(self):
        P = DiscreteDistribution([2.0, 1.0, 2.0], [0.2, 0.5, 0.3])
        np.testing.assert_array_equal(P.losses, [1.0, 2.0])
        np.testing.assert_allclose(P.masses, [0.5, 0.5])

    def test_moments(self):
        P = uniform([1.0, 3.0])
        assert P.mean() == pytest.approx(2.0)
        assert P.var() == pytest.approx(1.0)
        assert P.moment(2) == pytest.approx(5.0)

    def test_validation(self):
        with pytest.raises(ValueError):
            DiscreteDistribution([1.0], [0.5])
        with pytest.raises(ValueError):
            DiscreteDistribution([-1.0], [1.0])
        with pytest.raises(ValueError):
            DiscreteDistribution([1.0, 2.0], [1.0, 0.0])


class TestTvDistance:
    def test_identical(self):
        P = uniform([1.0, 2.0])
        assert tv_distance(P, P) == 0.0

    def test_disjoint(self):
        assert tv_distance(uniform([0.0]), uniform([1.0])) == 1.0

    def test_hand_value(self):
        P = DiscreteDistribution([0.0, 1.0], [0.5, 0.5])
        Q = DiscreteDistribution([0.0, 1.0], [0.9, 0.1])
        assert tv_distance(P, Q) == pytest.approx(0.4)
        assert tv_distance(Q, P) == pytest.approx(0.4)


class TestCressieReadDivergence:
    def test_identical(self):
        P = uniform([1.0, 2.0])
        assert cressie_read_divergence(P, P, 2.0) == 0.0

    def test_hand_value(self):
        P = uniform([0.0, 1.0])
        Q = DiscreteDistribution([0.0, 1.0], [0.9, 0.1])
        assert cressie_read_divergence(Q, P, 2.0) == pytest.approx(0.32)

    def test_absolute_continuity(self):
        P = uniform([0.0, 1.0])
        Q = uniform([0.0, 2.0])
        assert cressie_read_divergence(Q, P, 2.0) == math.inf

    def test_rejects_bad_beta(self):
        P = uniform([1.0])
        with pytest.raises(ValueError):
            cressie_read_divergence(P, P, 1.0)


class TestCvarPrimalExact:
    def test_worst_half(self):
        assert cvar_primal_exact(uniform([1, 2, 3, 4]), 0.5) == pytest.approx(3.5)

    def test_alpha_one_is_mean(self):
        P = DiscreteDistribution([1.0, 5.0], [0.25, 0.75])
        assert cvar_primal_exact(P, 1.0) == pytest.approx(P.mean())

    def test_inside_boundary_atom(self):
        assert cvar_primal_exact(uniform([1.0, 3.0]), 0.25) == pytest.approx(3.0)

    def test_rejects_bad_alpha(self):
        with pytest.raises(ValueError):
            cvar_primal_exact(uniform([1.0]), 0.0)


class TestDroPrimalBruteforce:
    def test_rho_zero_is_mean(self):
        P = uniform([1, 2, 3, 4])
        assert dro_primal_bruteforce(P, make_spec("chi2", 1.0)) == pytest.approx(
            P.mean()
        )

    def test_chi2_variance_value(self):
        P = uniform([0.0, 2.0])
        got = dro_primal_bruteforce(P, chi2_spec_from_rho(0.125))
        assert got == pytest.approx(1.5, abs=1e-6)

    def test_cvar_matches_exact(self):
        P = uniform([1, 2, 3, 4])
        got = dro_primal_bruteforce(P, make_spec("cvar", 0.5))
        assert got == pytest.approx(3.5, abs=1e-6)

    def test_refuses_large_support(self):
        P = uniform(np.arange(7.0))
        with pytest.raises(ValueError):
            dro_primal_bruteforce(P, make_spec("chi2", 0.5))


class TestChi2VarianceForm:
    def test_applicable_case(self):
        closed = chi2_variance_form(uniform([0.0, 2.0]), 0.125)
        assert closed.applicable
        assert closed.risk == pytest.approx(1.5)
        assert closed.eta_star == pytest.approx(-1.0)

    def test_degenerate_not_applicable(self):
        closed = chi2_variance_form(uniform([3.0]), 0.2)
        assert not closed.applicable
        assert dro_dual_exact(uniform([3.0]), chi2_spec_from_rho(0.2)) == (
            pytest.approx(3.0, abs=1e-6)
        )

    def test_boundary_continuity(self):
        # rho = Var / (2 E^2) exactly: both branches give risk 2
        P = uniform([0.0, 2.0])
        closed = chi2_variance_form(P, 0.5)
        assert closed.applicable
        assert closed.risk == pytest.approx(2.0)
        assert dro_dual_exact(P, chi2_spec_from_rho(0.5)) == pytest.approx(
            2.0, abs=1e-6
        )

    def test_eta_star_sign_split(self):
        rng = np.random.default_rng(5)
        for _ in range(30):
            P = random_distribution(rng)
            rho = float(rng.uniform(0.01, 2.0))
            closed = chi2_variance_form(P, rho)
            if closed.applicable:
                assert closed.eta_star <= 1e-12
                assert closed.risk == pytest.approx(
                    dro_dual_exact(P, chi2_spec_from_rho(rho)), abs=1e-6
                )


class TestDoroRiskDiscrete:
    def test_two_point_truncates_to_zero(self):
        family = TwoPointFamily(M=10.0, delta=0.0, eps=0.1)
        P = family.distribution(0)
        assert doro_risk_discrete(P, make_spec("cvar", 0.5), 0.1) == (
            pytest.approx(0.0, abs=1e-9)
        )

    def test_eps_zero(self):
        P = uniform([1, 2, 3, 4])
        spec = make_spec("cvar", 0.5)
        assert doro_risk_discrete(P, spec, 0.0) == pytest.approx(
            dro_dual_exact(P, spec)
        )

    def test_split_boundary_atom(self):
        P = DiscreteDistribution([1.0, 3.0], [0.5, 0.5])
        got = doro_risk_discrete(P, make_spec("cvar", 0.5), 0.25)
        assert got == pytest.approx(7.0 / 3.0, abs=1e-9)

    def test_rejects_bad_eps(self):
        with pytest.raises(ValueError):
            doro_risk_discrete(uniform([1.0]), make_spec("cvar", 0.5), 0.5)

    def test_monotone_in_eps(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            P = random_distribution(rng)
            spec = make_spec("chi2", float(rng.uniform(0.2, 0.9)))
            previous = math.inf
            for eps in (0.0, 0.1, 0.2, 0.3, 0.4):
                risk = doro_risk_discrete(P, spec, eps)
                assert risk <= previous + 1e-9
                previous = risk


class TestTailTruncate:
    def test_splits_boundary(self):
        P = DiscreteDistribution([1.0, 3.0], [0.5, 0.5])
        T = tail_truncate(P, 0.25)
        np.testing.assert_allclose(T.losses, [1.0, 3.0])
        np.testing.assert_allclose(T.masses, [2.0 / 3.0, 1.0 / 3.0])

    def test_tv_to_original(self):
        rng = np.random.default_rng(9)
        for _ in range(20):
            P = random_distribution(rng)
            eps = float(rng.uniform(0.01, 0.4))
            assert tv_distance(P, tail_truncate(P, eps)) <= eps / (1 - eps) + 1e-9


class TestPmdeClosedForms:
    def test_cvar_value(self):
        risks = pmde_closed_forms(10.0, 1.0, 0.1, 0.5, 0.1)
        assert risks.cvar_theta0 == pytest.approx(2.0)
        assert risks.cvar_theta1 == 1.0

    def test_chi2_value(self):
        risks = pmde_closed_forms(10.0, 1.0, 0.1, 0.5, 0.5)
        assert risks.chi2_theta0 == pytest.approx(4.0)
        assert risks.chi2_theta1 == 1.0

    def test_matches_oracles(self):
        M, eps, alpha, rho = 10.0, 0.1, 0.5, 0.5
        risks = pmde_closed_forms(M, 0.0, eps, alpha, rho)
        P0 = TwoPointFamily(M=M, delta=0.0, eps=eps).distribution(0)
        assert risks.cvar_theta0 == pytest.approx(
            cvar_primal_exact(P0, alpha), abs=1e-8
        )
        assert risks.chi2_theta0 == pytest.approx(
            dro_primal_bruteforce(P0, chi2_spec_from_rho(rho)), abs=1e-3
        )

    def test_rejects_hypothesis_violation(self):
        with pytest.raises(ValueError):
            pmde_closed_forms(10.0, 1.0, 0.2, 0.1, 0.5)  # alpha < eps
        with pytest.raises(ValueError):
            pmde_closed_forms(10.0, 1.0, 0.4, 0.5, 2.0)  # 1 + 2 rho > 1/eps


class TestHuberMix:
    def test_eps_zero_identity(self):
        P = uniform([1.0, 2.0])
        assert huber_mix(P, uniform([9.0]), 0.0) is P

    def test_point_masses(self):
        mixed = huber_mix(uniform([0.0]), uniform([1.0]), 0.1)
        np.testing.assert_allclose(mixed.losses, [0.0, 1.0])
        np.testing.assert_allclose(mixed.masses, [0.9, 0.1])

    def test_tv_bounded_by_eps(self):
        rng = np.random.default_rng(13)
        for _ in range(20):
            P = random_distribution(rng)
            Q = random_distribution(rng)
            eps = float(rng.uniform(0.0, 0.49))
            assert tv_distance(huber_mix(P, Q, eps), P) <= eps + 1e-12


class TestEmpiricalMoment:
    def test_constant(self):
        P = uniform([3.0])
        for k2 in (2, 4, 6):
            assert empirical_moment(P, k2) == pytest.approx(3.0)

    def test_hand_value(self):
        assert empirical_moment(uniform([1.0, 2.0]), 2) == pytest.approx(
            math.sqrt(2.5)
        )

    def test_lyapunov_monotone(self):
        rng = np.random.default_rng(17)
        for _ in range(20):
            P = random_distribution(rng)
            values = [empirical_moment(P, k2) for k2 in (2, 4, 6, 8)]
            for lo, hi in zip(values, values[1:]):
                assert lo <= hi + 1e-9

    def test_rejects_odd(self):
        with pytest.raises(ValueError):
            empirical_moment(uniform([1.0]), 3)


class TestWorstCaseRisk:
    def test_hand_value(self):
        losses = [1.0, 2.0, 3.0, 4.0]
        masks = [np.array([1, 1, 0, 0], bool), np.array([0, 0, 1, 1], bool),
                 np.array([0, 1, 1, 0], bool)]
        value, idx = worst_case_risk(GroupedPopulation(losses, masks))
        assert value == pytest.approx(3.5)
        assert idx == 1

    def test_single_domain(self):
        pop = GroupedPopulation([1.0, 3.0], [np.ones(2, bool)])
        value, idx = worst_case_risk(pop)
        assert value == pytest.approx(2.0)
        assert idx == 0

    def test_tie_breaks_to_smallest_index(self):
        masks = [np.array([1, 0], bool), np.array([0, 1], bool)]
        _, idx = worst_case_risk(GroupedPopulation([2.0, 2.0], masks))
        assert idx == 0

    def test_rejects_zero_mass_domain(self):
        with pytest.raises(ValueError):
            GroupedPopulation([1.0], [np.zeros(1, bool)])


def bottom_truncate(P, t):
    """Move the top-t tail mass of P onto a zero-loss atom.

    Among all Q with TV(P, Q) <= t this stochastically minimizes the loss,
    so its DRO risk equals the infimum of DRO risks over that TV ball.
    """
    order = np.argsort(P.losses)[::-1]
    masses = P.masses[order].copy()
    remaining = t
    for i in range(masses.size):
        take = min(masses[i], remaining)
        masses[i] -= take
        remaining -= take
        if remaining <= 1e-15:
            break
    losses = np.concatenate([P.losses[order], [0.0]])
    masses = np.concatenate([masses, [t - remaining]])
    keep = masses > 1e-15
    return DiscreteDistribution(losses[keep], masses[keep])


class TestContaminationLowerBound:
    def test_doro_dominates_tv_ball_infimum(self):
        # DORO risk of a Huber mixture is lower-bounded by the smallest DRO
        # risk within TV distance eps/(1-eps) of the clean distribution
        rng = np.random.default_rng(23)
        for trial in range(40):
            P = random_distribution(rng)
            P_tilde = random_distribution(rng)
            eps = float(rng.uniform(0.01, 0.4))
            mix = huber_mix(P, P_tilde, eps)
            spec = make_spec("cvar" if trial % 2 == 0 else "chi2",
                             float(rng.uniform(0.1, 0.9)))
            doro = doro_risk_discrete(mix, spec, eps)
            floor = dro_dual_exact(bottom_truncate(P, eps / (1 - eps)), spec)
            assert doro >= floor - 1e-7


class TestMomentGapInequality:
    @pytest.mark.parametrize("beta_star,k", [(1.0, 1), (1.0, 2), (2.0, 2)])
    def test_bound_holds(self, beta_star, k):
        rng = np.random.default_rng(29)
        for _ in range(50):
            m = int(rng.integers(2, 6))
            losses = rng.uniform(0.0, 10.0, size=m)
            P = DiscreteDistribution(losses, rng.dirichlet(np.ones(m)))
            Q = DiscreteDistribution(losses, rng.dirichlet(np.ones(m)))
            eta = float(rng.uniform(0.0, 8.0))
            excess = np.maximum(losses - eta, 0.0)
            lhs = float(np.dot(P.masses, excess**beta_star)) ** (1 / beta_star) - (
                float(np.dot(Q.masses, excess**beta_star)) ** (1 / beta_star)
            )
            s2k = float(np.dot(P.masses, excess ** (2 * k))) ** (1 / (2 * k))
            tv = tv_distance(P, Q)
            rhs = (
                s2k
                * tv ** (1 / beta_star - 1 / (2 * k))
                * beta_star ** (-1 / (2 * k))
                * (2 * k / (2 * k - beta_star)) ** (1 / beta_star)
            )
            assert lhs <= rhs + 1e-9
