"""Tabular dataset ingestion and construction of the weak-supervision
world: a small labeled anomaly pool A, a large contaminated unlabeled
pool U, and an untouched test split.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import CapacityError, DataError, SchemaError


@dataclass
class LabeledDataset:
    """Feature matrix with binary labels (1 = anomaly, 0 = normal)."""

    features: np.ndarray
    labels: np.ndarray
    feature_names: list[str] | None = None

    def __post_init__(self):
        self.features = np.ascontiguousarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64).ravel()
        if self.features.ndim != 2:
            raise ValueError(f"features must be 2-D, got shape {self.features.shape}")
        if self.labels.shape[0] != self.features.shape[0]:
            raise ValueError(
                f"{self.labels.shape[0]} labels for {self.features.shape[0]} rows"
            )
        if not np.all((self.labels == 0) | (self.labels == 1)):
            raise ValueError("labels must be 0 or 1")
        if not np.all(np.isfinite(self.features)):
            raise DataError("features contain NaN or Inf")
        if self.feature_names is not None and len(self.feature_names) != self.dim:
            raise ValueError("feature_names length does not match feature count")

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    @property
    def n_anomalies(self) -> int:
        return int(self.labels.sum())

    def subset(self, idx) -> "LabeledDataset":
        return LabeledDataset(
            self.features[idx], self.labels[idx], self.feature_names
        )


@dataclass
class WeakSupervisionSplit:
    """Training-time world state.

    ``features`` is the training feature store; ``labeled_idx`` (set A)
    and ``unlabeled_idx`` (set U) are disjoint index lists into it.
    ``true_labels`` keeps the ground truth of every store row for
    diagnostics only; training must not consult it. Test data rides
    along so a single object describes one experimental world, but
    training reads only the store and the two index lists.
    """

    features: np.ndarray
    true_labels: np.ndarray
    labeled_idx: np.ndarray
    unlabeled_idx: np.ndarray
    contamination_rate: float
    seed: int | None = None
    test_features: np.ndarray | None = None
    test_labels: np.ndarray | None = None

    def __post_init__(self):
        self.features = np.ascontiguousarray(self.features, dtype=np.float64)
        self.true_labels = np.asarray(self.true_labels, dtype=np.int64).ravel()
        self.labeled_idx = np.asarray(self.labeled_idx, dtype=np.int64).ravel()
        self.unlabeled_idx = np.asarray(self.unlabeled_idx, dtype=np.int64).ravel()
        if self.labeled_idx.size < 1 or self.unlabeled_idx.size < 1:
            raise ValueError("both A and U must be nonempty")
        if np.intersect1d(self.labeled_idx, self.unlabeled_idx).size:
            raise ValueError("A and U overlap")

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    @property
    def n_labeled(self) -> int:
        return self.labeled_idx.size

    @property
    def n_unlabeled(self) -> int:
        return self.unlabeled_idx.size

    @property
    def a_features(self) -> np.ndarray:
        return self.features[self.labeled_idx]

    @property
    def u_features(self) -> np.ndarray:
        return self.features[self.unlabeled_idx]


def _parse_cell(raw: str, row: int, col: str) -> float:
    try:
        return float(raw)
    except ValueError:
        raise SchemaError(
            f"non-numeric value {raw!r} at row {row}, column {col!r}"
        ) from None


def load_feature_csv(
    path, label_column: str | int = "label"
) -> tuple[np.ndarray, list[str] | None, list[str]]:
    """Parse a headered numeric CSV.

    Returns ``(features, raw_labels_or_None, feature_names)``; the label
    column is optional here so score-time data without ground truth can
    reuse the same parser.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        if isinstance(label_column, int):
            label_pos = label_column if 0 <= label_column < len(header) else None
        else:
            label_pos = header.index(label_column) if label_column in header else None
        feature_names = [h for i, h in enumerate(header) if i != label_pos]
        rows: list[list[float]] = []
        raw_labels: list[str] = []
        for row_no, record in enumerate(reader, start=2):
            if not record or (len(record) == 1 and not record[0].strip()):
                continue
            if len(record) != len(header):
                raise SchemaError(
                    f"row {row_no} has {len(record)} cells, header has {len(header)}"
                )
            vals = []
            for i, cell in enumerate(record):
                if i == label_pos:
                    raw_labels.append(cell.strip())
                else:
                    vals.append(_parse_cell(cell.strip(), row_no, header[i]))
            rows.append(vals)
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    features = np.asarray(rows, dtype=np.float64)
    return features, (raw_labels if label_pos is not None else None), feature_names


def load_csv(
    path, label_column: str | int = "label", anomaly_value: str | None = None
) -> LabeledDataset:
    """Load a labeled CSV into a :class:`LabeledDataset`.

    Without ``anomaly_value`` the label column must hold only values
    numerically equal to 0 or 1. With it, rows whose label cell equals
    ``anomaly_value`` become anomalies and the rest normals; more than
    two distinct label values is rejected either way.
    """
    features, raw_labels, feature_names = load_feature_csv(path, label_column)
    if raw_labels is None:
        raise SchemaError(f"label column {label_column!r} not found in {path}")
    distinct = sorted(set(raw_labels))
    if len(distinct) > 2:
        raise SchemaError(
            f"label column has {len(distinct)} distinct values {distinct[:5]}, "
            "expected at most 2"
        )
    if anomaly_value is not None:
        if anomaly_value not in distinct:
            raise SchemaError(
                f"anomaly value {anomaly_value!r} not present in label column "
                f"(found {distinct})"
            )
        labels = np.asarray([1 if v == anomaly_value else 0 for v in raw_labels])
    else:
        mapped = {}
        for v in distinct:
            try:
                num = float(v)
            except ValueError:
                raise SchemaError(
                    f"label value {v!r} is not 0/1; pass an explicit anomaly value"
                ) from None
            if num not in (0.0, 1.0):
                raise SchemaError(
                    f"label value {v!r} is not 0/1; pass an explicit anomaly value"
                )
            mapped[v] = int(num)
        labels = np.asarray([mapped[v] for v in raw_labels])
    return LabeledDataset(features, labels, feature_names)


def save_csv(ds: LabeledDataset, path, label_column: str = "label") -> None:
    """Write a dataset as a headered CSV with the label in the last column."""
    names = ds.feature_names or [f"f{i + 1}" for i in range(ds.dim)]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(names) + [label_column])
        for x, y in zip(ds.features, ds.labels):
            writer.writerow([repr(float(v)) for v in x] + [int(y)])


def stratified_split(
    ds: LabeledDataset, train_fraction: float, rng: np.random.Generator
) -> tuple[LabeledDataset, LabeledDataset]:
    """Split into train/test preserving per-class proportions.

    Each class contributes ``round(train_fraction * count)`` rows to the
    train side, clamped so both sides keep at least one instance of each
    class. Original row order is preserved within each side.
    """
    if not 0.0 < train_fraction < 1.0:
        raise ValueError(f"train_fraction must be in (0, 1), got {train_fraction}")
    train_parts, test_parts = [], []
    for cls in (0, 1):
        idx = np.flatnonzero(ds.labels == cls)
        if idx.size < 2:
            raise DataError(
                f"class {cls} has {idx.size} instance(s); need at least 2 to split"
            )
        perm = rng.permutation(idx)
        n_train = int(round(train_fraction * idx.size))
        n_train = min(max(n_train, 1), idx.size - 1)
        train_parts.append(perm[:n_train])
        test_parts.append(perm[n_train:])
    train_idx = np.sort(np.concatenate(train_parts))
    test_idx = np.sort(np.concatenate(test_parts))
    return ds.subset(train_idx), ds.subset(test_idx)


def build_weak_supervision(
    train: LabeledDataset,
    n_labeled: int,
    contamination_rate: float,
    rng: np.random.Generator,
    test: LabeledDataset | None = None,
    anomaly_types: Sequence | None = None,
    known_types: set | None = None,
    seed: int | None = None,
) -> WeakSupervisionSplit:
    """Assemble the weak-supervision world from training data.

    U receives every normal training instance plus m randomly chosen
    anomalies, where m solves m / (n_normal + m) = contamination_rate;
    A receives ``n_labeled`` further anomalies, disjoint from the
    injected ones. Anomalies left over are discarded. When
    ``anomaly_types``/``known_types`` are given, only anomalies of a
    known type are eligible for A and for injection.
    """
    if n_labeled < 2:
        raise ValueError(f"n_labeled must be >= 2, got {n_labeled}")
    if not 0.0 <= contamination_rate < 0.5:
        raise ValueError(
            f"contamination_rate must be in [0, 0.5), got {contamination_rate}"
        )
    normal_idx = np.flatnonzero(train.labels == 0)
    anom_idx = np.flatnonzero(train.labels == 1)
    if anomaly_types is not None:
        if known_types is None:
            raise ValueError("known_types required when anomaly_types is given")
        types = np.asarray(anomaly_types)
        if types.shape[0] != train.n:
            raise ValueError("anomaly_types length does not match dataset")
        keep = np.isin(types[anom_idx], list(known_types))
        anom_idx = anom_idx[keep]
    n_normal = normal_idx.size
    if n_normal < 2:
        raise DataError(f"need at least 2 normal instances, got {n_normal}")
    m = int(round(contamination_rate * n_normal / (1.0 - contamination_rate)))
    needed = n_labeled + m
    if anom_idx.size < needed:
        raise CapacityError(
            f"need {needed} anomalies ({n_labeled} labeled + {m} injected), "
            f"only {anom_idx.size} available"
        )
    perm = rng.permutation(anom_idx)
    a_src = perm[:n_labeled]
    inject_src = perm[n_labeled : n_labeled + m]
    # Compact store: [normals | injected anomalies | labeled anomalies].
    store = np.concatenate(
        [train.features[normal_idx], train.features[inject_src], train.features[a_src]]
    )
    true_labels = np.concatenate(
        [np.zeros(n_normal, dtype=np.int64), np.ones(m + n_labeled, dtype=np.int64)]
    )
    unlabeled_idx = np.arange(n_normal + m)
    labeled_idx = np.arange(n_normal + m, n_normal + m + n_labeled)
    return WeakSupervisionSplit(
        features=store,
        true_labels=true_labels,
        labeled_idx=labeled_idx,
        unlabeled_idx=unlabeled_idx,
        contamination_rate=contamination_rate,
        seed=seed,
        test_features=None if test is None else test.features.copy(),
        test_labels=None if test is None else test.labels.copy(),
    )


def standardize(
    train_features: np.ndarray, *other_features: np.ndarray
) -> tuple[tuple[np.ndarray, ...], np.ndarray, np.ndarray]:
    """Center/scale by training statistics; apply the same map everywhere.

    Features with (population) std below 1e-12 are centered only.
    Returns ``(transformed, mean, scale)`` with the training matrix
    first in ``transformed``; ``scale`` is the divisor actually used.
    """
    train_features = np.asarray(train_features, dtype=np.float64)
    mean = train_features.mean(axis=0)
    std = train_features.std(axis=0)
    scale = np.where(std < 1e-12, 1.0, std)
    transformed = tuple(
        (np.asarray(x, dtype=np.float64) - mean) / scale
        for x in (train_features, *other_features)
    )
    return transformed, mean, scale


def apply_standardization(
    features: np.ndarray, mean: np.ndarray, scale: np.ndarray
) -> np.ndarray:
    """Apply a previously fitted standardization map."""
    return (np.asarray(features, dtype=np.float64) - mean) / scale


def standardize_split(
    split: WeakSupervisionSplit,
) -> tuple[WeakSupervisionSplit, np.ndarray, np.ndarray]:
    """Standardize a split's store (fit on A ∪ U rows) and its test data."""
    fit_rows = np.concatenate([split.unlabeled_idx, split.labeled_idx])
    _, mean, scale = standardize(split.features[fit_rows])
    new = WeakSupervisionSplit(
        features=apply_standardization(split.features, mean, scale),
        true_labels=split.true_labels.copy(),
        labeled_idx=split.labeled_idx.copy(),
        unlabeled_idx=split.unlabeled_idx.copy(),
        contamination_rate=split.contamination_rate,
        seed=split.seed,
        test_features=None
        if split.test_features is None
        else apply_standardization(split.test_features, mean, scale),
        test_labels=None if split.test_labels is None else split.test_labels.copy(),
    )
    return new, mean, scale
