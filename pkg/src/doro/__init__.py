"""Distributionally robust optimization (CVaR / chi-square) with the
outlier-robust DORO refinement, exact discrete oracles, and a desk-scale
training harness for tabular subpopulation-shift tasks."""

from .kernel import IMPLEMENTATION as KERNEL_IMPLEMENTATION
from .oracle import (Chi2Closed, DiscreteDistribution, GroupedPopulation,
                     TwoPointFamily, chi2_variance_form,
                     cressie_read_divergence, cvar_primal_exact,
                     doro_risk_discrete, dro_dual_exact,
                     dro_primal_bruteforce, empirical_moment, huber_mix,
                     pmde_closed_forms, tv_distance, worst_case_risk)
from .risk import (EtaSolution, LossBatch, SolverError, doro_batch_risk,
                   dual_objective, dual_sample_weights, minimize_eta, quantile)
from .specs import CressieReadSpec, chi2_spec_from_rho, f_beta, make_spec
from .trainer import (MetricsRecord, TrainConfig, TrainRun, TrainingDivergence,
                      evaluate, iterative_trim, model_select, stability_stat,
                      train)

__version__ = "0.1.0"

__all__ = [
    "CressieReadSpec", "chi2_spec_from_rho", "f_beta", "make_spec",
    "LossBatch", "EtaSolution", "SolverError", "dual_objective",
    "minimize_eta", "quantile", "doro_batch_risk", "dual_sample_weights",
    "DiscreteDistribution", "TwoPointFamily", "GroupedPopulation",
    "Chi2Closed", "tv_distance", "cressie_read_divergence",
    "cvar_primal_exact", "dro_primal_bruteforce", "dro_dual_exact",
    "chi2_variance_form", "doro_risk_discrete", "pmde_closed_forms",
    "huber_mix", "empirical_moment", "worst_case_risk",
    "TrainConfig", "MetricsRecord", "TrainRun", "TrainingDivergence",
    "train", "evaluate", "iterative_trim", "model_select", "stability_stat",
    "KERNEL_IMPLEMENTATION",
]
