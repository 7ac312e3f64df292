"""Dual DRO/DORO risk evaluation and minimization on finite loss batches."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernel
from .specs import CressieReadSpec

DEFAULT_ETA_TOL = 1e-9
DEFAULT_MAX_ITER = 200


class LossBatch:
    """A finite multiset of non-negative per-sample losses with weights.

    Weights default to uniform 1/n and must be strictly positive and sum to
    one (within 1e-12).
    """

    def __init__(self, losses, weights=None):
        self.losses = np.asarray(losses, dtype=np.float64).ravel()
        if self.losses.size == 0:
            raise ValueError("loss batch must be non-empty")
        if not np.all(np.isfinite(self.losses)):
            raise ValueError("losses must be finite")
        if np.any(self.losses < 0):
            raise ValueError("losses must be non-negative")
        if weights is None:
            self.weights = np.full(self.losses.size, 1.0 / self.losses.size)
        else:
            self.weights = np.asarray(weights, dtype=np.float64).ravel()
            if self.weights.shape != self.losses.shape:
                raise ValueError("weights must match losses in length")
            if np.any(self.weights <= 0):
                raise ValueError("weights must be strictly positive")
            if abs(float(self.weights.sum()) - 1.0) > 1e-12:
                raise ValueError("weights must sum to 1")

    def __len__(self):
        return self.losses.size

    @property
    def is_uniform(self) -> bool:
        return bool(np.allclose(self.weights, 1.0 / len(self), atol=1e-12))

    def mean(self) -> float:
        return float(np.dot(self.weights, self.losses))


@dataclass(frozen=True)
class EtaSolution:
    """Result of the scalar dual minimization."""

    eta_star: float
    risk: float
    iterations: int
    bracket: tuple[float, float]


class SolverError(RuntimeError):
    """Dual minimization failed to converge; carries the best iterate."""

    def __init__(self, message, best: EtaSolution | None = None):
        super().__init__(message)
        self.best = best


def dual_objective(batch: LossBatch, eta: float, spec: CressieReadSpec) -> float:
    """c * E_w[(l - eta)_+^{beta*}]^{1/beta*} + eta, convex in eta."""
    return kernel.dual_objective(
        batch.losses, batch.weights, eta, spec.c, spec.beta_star
    )


def minimize_eta(
    batch: LossBatch,
    spec: CressieReadSpec,
    tol: float = DEFAULT_ETA_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> EtaSolution:
    """Minimize the dual objective over eta with a bounded Brent search.

    The initial bracket is [min - (range + 1), max] with range = max - min;
    the kernel widens the left edge whenever the objective is still
    decreasing there (the chi-square minimizer can be far below zero for
    small radii).
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    lo_val = float(batch.losses.min())
    hi_val = float(batch.losses.max())
    lo = lo_val - (hi_val - lo_val + 1.0)
    try:
        eta, risk, nfev, blo, bhi = kernel.solve_eta(
            batch.losses, batch.weights, spec.c, spec.beta_star,
            lo, hi_val, tol, max_iter,
        )
    except ValueError as exc:
        raise SolverError(str(exc)) from exc
    return EtaSolution(eta_star=eta, risk=risk, iterations=nfev, bracket=(blo, bhi))


def quantile(batch: LossBatch, alpha: float) -> float:
    """inf{q : P(l > q) <= alpha} under the weighted empirical measure."""
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    order = np.argsort(batch.losses)
    losses = batch.losses[order]
    weights = batch.weights[order]
    # tail[i] = P(l > losses[i]); equal losses share one tail value.
    tail = 1.0 - np.cumsum(weights)
    for i in range(losses.size - 1, -1, -1):
        if i + 1 < losses.size and losses[i] == losses[i + 1]:
            tail[i] = tail[i + 1]
    for i in range(losses.size):
        if tail[i] <= alpha + 1e-12:
            return float(losses[i])
    return float(losses[-1])


def trimmed_indices(losses: np.ndarray, n_drop: int) -> np.ndarray:
    """Indices kept after discarding the n_drop largest losses.

    Ties at the boundary are discarded in order of decreasing original index,
    so the result is deterministic.
    """
    order = np.argsort(losses, kind="stable")
    return np.sort(order[: losses.size - n_drop])


def doro_batch_risk(
    batch: LossBatch,
    spec: CressieReadSpec,
    eps: float,
    tol: float = DEFAULT_ETA_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> tuple[float, float, np.ndarray]:
    """DORO risk of a uniform batch: drop the floor(eps*n) largest losses,
    then minimize the dual objective on the survivors.

    Returns (risk, eta_star, kept_indices).  eps = 0 reproduces
    :func:`minimize_eta` exactly.
    """
    if not 0.0 <= eps < 0.5:
        raise ValueError(f"eps must be in [0, 0.5), got {eps}")
    if not batch.is_uniform:
        raise ValueError("doro_batch_risk requires uniform sample weights")
    n = len(batch)
    n_drop = int(math.floor(eps * n))
    if n_drop >= n:
        raise ValueError("eps discards the entire batch")
    kept = trimmed_indices(batch.losses, n_drop)
    sub = LossBatch(batch.losses[kept])
    sol = minimize_eta(sub, spec, tol=tol, max_iter=max_iter)
    return sol.risk, sol.eta_star, kept


def dual_sample_weights(
    batch: LossBatch,
    eta: float,
    spec: CressieReadSpec,
    kept: np.ndarray | None = None,
) -> np.ndarray:
    """Per-sample subgradient of the batch dual objective w.r.t. each loss.

    Treats eta as constant (Danskin at the dual minimizer).  Discarded
    samples and samples with l < eta get weight zero.  For beta* = 1 the
    minimizer sits exactly at a sample loss (the alpha-quantile), so the
    boundary atoms carry the fractional weight left over after each sample
    strictly above eta takes c/n_kept; this makes the weights the exact
    gradient of the minimized objective wherever it is differentiable.
    rho = 0 means the ambiguity set collapses to the empirical measure,
    where the objective is the plain mean, so the weights are uniform over
    the kept samples.
    """
    n = len(batch)
    if kept is None:
        kept = np.arange(n)
    kept = np.asarray(kept, dtype=np.intp)
    if kept.size == 0:
        raise ValueError("kept index set must be non-empty")
    weights = np.zeros(n)
    n_kept = kept.size
    if spec.rho == 0.0:
        weights[kept] = 1.0 / n_kept
        return weights
    excess = np.maximum(batch.losses[kept] - eta, 0.0)
    if spec.beta_star == 1.0:
        kl = batch.losses[kept]
        cap = spec.c / n_kept
        tol = 1e-6 * max(1.0, abs(eta), float(kl.max()))
        above = kl > eta + tol
        w = np.where(above, cap, 0.0)
        boundary = np.abs(kl - eta) <= tol
        if boundary.any():
            leftover = max(1.0 - cap * float(above.sum()), 0.0)
            w[boundary] = min(leftover / float(boundary.sum()), cap)
        weights[kept] = w
        return weights
    moment = float(np.mean(excess**spec.beta_star))
    if moment == 0.0:
        return weights
    weights[kept] = (
        spec.c
        * excess ** (spec.beta_star - 1.0)
        * moment ** (1.0 / spec.beta_star - 1.0)
        / n_kept
    )
    return weights
