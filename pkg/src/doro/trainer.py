"""Training loop wiring ERM/DRO/DORO objectives to the numpy models, plus
evaluation metrics, iterative-trimming preprocessing and model selection."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import models
from .data import TabularDataset
from .risk import LossBatch, doro_batch_risk, dual_sample_weights, minimize_eta
from .specs import CressieReadSpec, make_spec

METHODS = ("erm", "cvar", "chi2-dro", "cvar-doro", "chi2-doro")
DORO_METHODS = ("cvar-doro", "chi2-doro")


class TrainingDivergence(RuntimeError):
    """Non-finite loss encountered; carries the offending epoch index."""

    def __init__(self, epoch: int):
        super().__init__(f"training diverged at epoch {epoch}")
        self.epoch = epoch


@dataclass(frozen=True)
class TrainConfig:
    method: str = "erm"
    alpha: float = 0.5
    eps: float = 0.0
    epochs: int = 10
    batch_size: int = 64
    learning_rate: float = 0.1
    momentum: float = 0.9
    weight_decay: float = 0.0
    seed: int = 0
    architecture: str = "linear"
    hidden: int = 16

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError("alpha must be in (0, 1]")
        if not 0.0 <= self.eps < 0.5:
            raise ValueError("eps must be in [0, 0.5)")
        if self.eps > 0 and self.method not in DORO_METHODS:
            raise ValueError("eps requires a doro method")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be positive")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must be in [0, 1)")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be non-negative")


def spec_for(method: str, alpha: float) -> CressieReadSpec | None:
    if method == "erm":
        return None
    kind = "cvar" if method.startswith("cvar") else "chi2"
    return make_spec(kind, alpha)


@dataclass
class MetricsRecord:
    epoch: int
    avg_accuracy: float
    worst_accuracy: float
    per_domain_accuracy: dict
    train_risk: float = math.nan
    eta_star: float = math.nan

    def to_dict(self) -> dict:
        return {
            "epoch": self.epoch,
            "avg_accuracy": self.avg_accuracy,
            "worst_accuracy": self.worst_accuracy,
            "per_domain_accuracy": self.per_domain_accuracy,
            "train_risk": self.train_risk,
            "eta_star": self.eta_star,
        }


@dataclass
class TrainRun:
    config: TrainConfig
    final_params: models.ModelParams
    history: list
    checkpoints: list


def evaluate(params: models.ModelParams, dataset: TabularDataset,
             epoch: int = 0, train_risk: float = math.nan,
             eta_star: float = math.nan) -> MetricsRecord:
    """Average and worst-domain accuracy of logit > 0 predictions.

    Overlapping membership counts a sample in every domain it belongs to;
    the average is over all samples regardless of domain.
    """
    logits = models.forward(params, dataset.features)
    correct = (logits > 0).astype(np.int64) == dataset.labels
    per_domain = {}
    for dom, mask in dataset.domain_masks.items():
        if not mask.any():
            raise ValueError(f"empty domain {dom!r}")
        per_domain[dom] = float(correct[mask].mean())
    return MetricsRecord(
        epoch=epoch,
        avg_accuracy=float(correct.mean()),
        worst_accuracy=min(per_domain.values()),
        per_domain_accuracy=per_domain,
        train_risk=train_risk,
        eta_star=eta_star,
    )


def _batch_step(params, velocity, X, y, spec, config):
    """One gradient step; returns (risk, eta_star)."""
    losses = models.logistic_loss(models.forward(params, X), y)
    if not np.all(np.isfinite(losses)):
        raise FloatingPointError("non-finite loss")
    n = losses.size
    if spec is None:
        risk = float(losses.mean())
        eta = math.nan
        weights = np.full(n, 1.0 / n)
    else:
        batch = LossBatch(losses)
        if config.method in DORO_METHODS:
            risk, eta, kept = doro_batch_risk(batch, spec, config.eps)
        else:
            sol = minimize_eta(batch, spec)
            risk, eta, kept = sol.risk, sol.eta_star, None
        weights = dual_sample_weights(batch, eta, spec, kept)
    grad = models.backward(params, X, y, weights)
    models.apply_gradient(params, velocity, grad, config.learning_rate,
                          config.momentum, config.weight_decay)
    return risk, eta


def train(dataset: TabularDataset, config: TrainConfig,
          eval_dataset: TabularDataset | None = None) -> TrainRun:
    """Deterministic mini-batch training; one metrics record per epoch."""
    if len(dataset) == 0:
        raise ValueError("dataset must be non-empty")
    eval_dataset = eval_dataset if eval_dataset is not None else dataset
    spec = spec_for(config.method, config.alpha)
    rng = np.random.default_rng(config.seed)
    params = models.init_params(config.architecture, dataset.dim,
                                config.hidden, rng)
    velocity = models.GradientBuffer(arch=params.arch)
    history, checkpoints = [], []
    n = len(dataset)
    for epoch in range(config.epochs):
        perm = rng.permutation(n)
        risks, etas = [], []
        for start in range(0, n, config.batch_size):
            idx = perm[start:start + config.batch_size]
            try:
                risk, eta = _batch_step(
                    params, velocity,
                    dataset.features[idx], dataset.labels[idx],
                    spec, config,
                )
            except FloatingPointError:
                raise TrainingDivergence(epoch) from None
            risks.append(risk)
            etas.append(eta)
        record = evaluate(
            params, eval_dataset, epoch=epoch,
            train_risk=float(np.mean(risks)),
            eta_star=float(np.nanmean(etas)) if not all(map(math.isnan, etas))
            else math.nan,
        )
        history.append(record)
        checkpoints.append(params.copy())
    return TrainRun(config=config, final_params=params, history=history,
                    checkpoints=checkpoints)


def sample_losses(params: models.ModelParams, dataset: TabularDataset) -> np.ndarray:
    return models.logistic_loss(models.forward(params, dataset.features),
                                dataset.labels)


def iterative_trim(dataset: TabularDataset, rounds: int, drop_per_round: int,
                   config: TrainConfig):
    """Repeated ERM training + removal of the highest-loss samples.

    Each round trains from a fresh seeded initialization on the surviving
    samples, then drops the ``drop_per_round`` largest-loss ones (boundary
    ties resolved toward larger original index).  Returns the trimmed
    dataset and the removed indices into the original dataset.
    """
    if rounds < 0 or drop_per_round < 0:
        raise ValueError("rounds and drop_per_round must be non-negative")
    if rounds * drop_per_round >= len(dataset):
        raise ValueError("trim would remove the entire dataset")
    erm_config = replace(config, method="erm", eps=0.0)
    surviving = np.arange(len(dataset))
    removed = []
    for _ in range(rounds):
        current = dataset.subset(surviving)
        run = train(current, erm_config)
        losses = sample_losses(run.final_params, current)
        order = np.argsort(losses, kind="stable")
        dropped_local = order[losses.size - drop_per_round:]
        removed.extend(surviving[dropped_local].tolist())
        keep_local = np.sort(order[: losses.size - drop_per_round])
        surviving = surviving[keep_local]
    return dataset.subset(surviving, name=f"{dataset.name}-trimmed"), sorted(removed)


SELECTION_STRATEGIES = ("oracle", "max-avg-acc", "min-cvar", "min-cvar-doro")


def model_select(run: TrainRun, validation: TabularDataset, strategy: str,
                 alpha: float = 0.2, eps: float = 0.005) -> int:
    """Pick an epoch index from a run; ties break toward the earliest epoch."""
    if strategy not in SELECTION_STRATEGIES:
        raise ValueError(f"unknown selection strategy {strategy!r}")
    if not run.checkpoints:
        raise ValueError("run has no checkpoints")
    if strategy in ("oracle", "max-avg-acc"):
        scores = []
        for params in run.checkpoints:
            record = evaluate(params, validation)
            scores.append(record.worst_accuracy if strategy == "oracle"
                          else record.avg_accuracy)
        return int(np.argmax(scores))
    spec = make_spec("cvar", alpha)
    risks = []
    for params in run.checkpoints:
        batch = LossBatch(sample_losses(params, validation))
        if strategy == "min-cvar":
            risks.append(minimize_eta(batch, spec).risk)
        else:
            risks.append(doro_batch_risk(batch, spec, eps)[0])
    return int(np.argmin(risks))


def stability_stat(run: TrainRun) -> tuple[float, float]:
    """Population std across epochs of (avg_accuracy, worst_accuracy)."""
    if len(run.history) < 2:
        raise ValueError("stability needs at least 2 epochs of history")
    avg = np.array([r.avg_accuracy for r in run.history])
    worst = np.array([r.worst_accuracy for r in run.history])
    return float(avg.std()), float(worst.std())
