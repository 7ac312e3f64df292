"""Tabular dataset ingestion, overlapping domain masks, and seeded synthetic
generators for subpopulation-shift and contamination experiments."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace

import numpy as np


class ParseError(ValueError):
    """CSV validation failure with a row/column location."""


@dataclass
class TabularDataset:
    features: np.ndarray        # (n, d)
    labels: np.ndarray          # (n,) in {0, 1}
    domain_masks: dict          # name -> boolean (n,) array; overlapping allowed
    name: str = "dataset"
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64).ravel()
        n = self.labels.size
        if self.features.shape[0] != n:
            raise ValueError("features and labels must have the same length")
        if not np.all(np.isfinite(self.features)):
            raise ValueError("features must be finite")
        if not np.all((self.labels == 0) | (self.labels == 1)):
            raise ValueError("labels must be binary")
        self.domain_masks = {
            k: np.asarray(v, dtype=bool).ravel() for k, v in self.domain_masks.items()
        }
        for dom, mask in self.domain_masks.items():
            if mask.size != n:
                raise ValueError(f"domain {dom!r} mask has wrong length")
            if not mask.any():
                raise ValueError(f"empty domain {dom!r}")

    def __len__(self):
        return self.labels.size

    @property
    def dim(self):
        return self.features.shape[1]

    def subset(self, indices, name=None) -> "TabularDataset":
        indices = np.asarray(indices)
        return TabularDataset(
            features=self.features[indices],
            labels=self.labels[indices],
            domain_masks={k: v[indices] for k, v in self.domain_masks.items()},
            name=name or self.name,
            metadata=dict(self.metadata),
        )


def _parse_cell(text, path, row, col):
    try:
        return float(text)
    except ValueError:
        raise ParseError(
            f"{path}: unparseable cell at row {row}, column {col}: {text!r}"
        ) from None


def load_csv(features_path, domains_path) -> TabularDataset:
    """Load a dataset from a features CSV (feature columns + final `label`
    column) and an aligned domains CSV (one 0/1 column per domain)."""
    with open(features_path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][-1] != "label":
        raise ParseError(f"{features_path}: final header column must be 'label'")
    header = rows[0][:-1]
    features, labels = [], []
    for r, row in enumerate(rows[1:], start=2):
        if len(row) != len(rows[0]):
            raise ParseError(f"{features_path}: row {r} has {len(row)} cells, "
                             f"expected {len(rows[0])}")
        features.append([_parse_cell(v, features_path, r, c + 1)
                         for c, v in enumerate(row[:-1])])
        label = _parse_cell(row[-1], features_path, r, len(row))
        if label not in (0.0, 1.0):
            raise ParseError(f"{features_path}: non-binary label at row {r}: {row[-1]!r}")
        labels.append(int(label))

    with open(domains_path, newline="") as fh:
        drows = list(csv.reader(fh))
    if not drows:
        raise ParseError(f"{domains_path}: empty file")
    if len(drows) - 1 != len(labels):
        raise ParseError(
            f"row-count mismatch: {features_path} has {len(labels)} data rows, "
            f"{domains_path} has {len(drows) - 1}"
        )
    domain_names = drows[0]
    masks = {dom: [] for dom in domain_names}
    for r, row in enumerate(drows[1:], start=2):
        if len(row) != len(domain_names):
            raise ParseError(f"{domains_path}: row {r} has {len(row)} cells, "
                             f"expected {len(domain_names)}")
        for c, v in enumerate(row):
            flag = _parse_cell(v, domains_path, r, c + 1)
            if flag not in (0.0, 1.0):
                raise ParseError(
                    f"{domains_path}: non-boolean value at row {r}, column {c + 1}"
                )
            masks[domain_names[c]].append(bool(flag))
    try:
        return TabularDataset(
            features=np.asarray(features),
            labels=np.asarray(labels),
            domain_masks={k: np.asarray(v) for k, v in masks.items()},
            metadata={"feature_names": header},
        )
    except ValueError as exc:
        raise ParseError(str(exc)) from exc


def save_csv(dataset: TabularDataset, features_path, domains_path) -> None:
    names = dataset.metadata.get(
        "feature_names", [f"x{i}" for i in range(dataset.dim)]
    )
    with open(features_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(names) + ["label"])
        for x, y in zip(dataset.features, dataset.labels):
            writer.writerow([repr(float(v)) for v in x] + [int(y)])
    with open(domains_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        domains = list(dataset.domain_masks)
        writer.writerow(domains)
        for i in range(len(dataset)):
            writer.writerow([int(dataset.domain_masks[d][i]) for d in domains])


def save_metadata(dataset: TabularDataset, path) -> None:
    """Sidecar record (generator spec, contaminated indices) for reproducibility."""
    with open(path, "w") as fh:
        json.dump(dataset.metadata, fh, indent=2, default=_jsonable)
        fh.write("\n")


def load_metadata(path) -> dict:
    with open(path) as fh:
        return json.load(fh)


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.integer, np.floating)):
        return obj.item()
    raise TypeError(f"not JSON-serializable: {type(obj)}")


@dataclass(frozen=True)
class SyntheticSpec:
    """Two-group Gaussian-cluster generator with a minority subpopulation.

    Each (group, label) cell is a Gaussian cluster; the minority group's
    clusters sit at rotated means so a linear model must trade the groups
    off against each other.  Fractions are exact counts (floor semantics).
    """

    n: int = 1000
    dim: int = 2
    minority_fraction: float = 0.1
    majority_means: tuple = ((2.0, 0.0), (-2.0, 0.0))      # label 1, label 0
    minority_means: tuple = ((-1.0, 2.5), (1.0, -2.5))     # label 1, label 0
    scale: float = 1.0
    label_flip_fraction: float = 0.0
    outlier_fraction: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.minority_fraction < 1.0:
            raise ValueError("minority_fraction must be in (0, 1)")
        if not 0.0 <= self.label_flip_fraction < 0.5:
            raise ValueError("label_flip_fraction must be in [0, 0.5)")
        if not 0.0 <= self.outlier_fraction < 0.5:
            raise ValueError("outlier_fraction must be in [0, 0.5)")


def default_spec(seed: int = 0) -> SyntheticSpec:
    return SyntheticSpec(seed=seed)


def synth_subpop(spec: SyntheticSpec) -> TabularDataset:
    """Deterministic synthetic subpopulation-shift dataset for one spec."""
    rng = np.random.default_rng(spec.seed)
    n_minority = int(spec.minority_fraction * spec.n)
    n_majority = spec.n - n_minority
    groups, labels, rows = [], [], []
    for group, count, means in (
        (0, n_majority, spec.majority_means),
        (1, n_minority, spec.minority_means),
    ):
        for i in range(count):
            label = i % 2
            mean = np.zeros(spec.dim)
            mean[: len(means[0])] = means[1 - label]
            rows.append(mean + spec.scale * rng.standard_normal(spec.dim))
            labels.append(label)
            groups.append(group)
    groups = np.asarray(groups)
    labels = np.asarray(labels)
    dataset = TabularDataset(
        features=np.asarray(rows),
        labels=labels,
        domain_masks={
            "majority": groups == 0,
            "minority": groups == 1,
            "class0": labels == 0,
            "class1": labels == 1,
        },
        name="synthetic",
        metadata={"spec": {k: getattr(spec, k) for k in spec.__dataclass_fields__}},
    )
    if spec.label_flip_fraction > 0:
        dataset = flip_labels(dataset, spec.label_flip_fraction, spec.seed + 1)
    if spec.outlier_fraction > 0:
        dataset = inject_outliers(dataset, spec.outlier_fraction, "label-flip",
                                  spec.seed + 2)
    return dataset


def flip_labels(dataset: TabularDataset, fraction: float, seed: int) -> TabularDataset:
    """Flip exactly floor(fraction * n) labels chosen without replacement."""
    if not 0.0 <= fraction < 0.5:
        raise ValueError("fraction must be in [0, 0.5)")
    n_flip = int(fraction * len(dataset))
    labels = dataset.labels.copy()
    if n_flip:
        rng = np.random.default_rng(seed)
        idx = rng.choice(len(dataset), size=n_flip, replace=False)
        labels[idx] = 1 - labels[idx]
    return replace(dataset, labels=labels)


def inject_outliers(dataset: TabularDataset, eps: float, mode: str,
                    seed: int, blowup: float = 10.0) -> TabularDataset:
    """Replace floor(eps * n) samples by outliers and record their indices.

    ``label-flip`` flips the chosen labels; ``feature-blowup`` additionally
    scales their features by ``blowup``.
    """
    if not 0.0 <= eps < 0.5:
        raise ValueError("eps must be in [0, 0.5)")
    if mode not in ("label-flip", "feature-blowup"):
        raise ValueError(f"unknown outlier mode {mode!r}")
    n_out = int(eps * len(dataset))
    labels = dataset.labels.copy()
    features = dataset.features.copy()
    idx = np.array([], dtype=np.intp)
    if n_out:
        rng = np.random.default_rng(seed)
        idx = np.sort(rng.choice(len(dataset), size=n_out, replace=False))
        labels[idx] = 1 - labels[idx]
        if mode == "feature-blowup":
            features[idx] *= blowup
    metadata = dict(dataset.metadata)
    metadata["contaminated_indices"] = idx.tolist()
    return replace(dataset, features=features, labels=labels, metadata=metadata)


class SplitError(ValueError):
    pass


def split(dataset: TabularDataset, train_fraction: float, seed: int):
    """Seeded shuffle-then-split; both sides must keep every domain non-empty."""
    n = len(dataset)
    n_train = int(train_fraction * n)
    if n_train == 0 or n_train == n:
        raise SplitError("both sides of the split must be non-empty")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    try:
        train = dataset.subset(perm[:n_train], name=f"{dataset.name}-train")
        evaluation = dataset.subset(perm[n_train:], name=f"{dataset.name}-eval")
    except ValueError as exc:
        raise SplitError(f"{exc}; try another seed") from exc
    return train, evaluation
