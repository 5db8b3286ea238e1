"""Pairing-based data augmentation: stratified batches of instance
pairs with ordinal targets, plus closed-form calculators for the
behavior of the augmented training stream under contamination.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from .dataset import WeakSupervisionSplit


class PairClass(IntEnum):
    """Source classes of a sampled pair: both labeled anomalies, one
    labeled anomaly plus one unlabeled, or two unlabeled instances."""

    AA = 0
    AU = 1
    UU = 2


@dataclass(frozen=True)
class OrdinalLabels:
    """Ordinal regression targets per pair class, decreasing with the
    number of labeled anomalies in the pair: aa > au > uu >= 0."""

    aa: float = 8.0
    au: float = 4.0
    uu: float = 0.0

    def __post_init__(self):
        if not (self.aa > self.au > self.uu >= 0.0):
            raise ValueError(
                f"ordinal labels must satisfy aa > au > uu >= 0, "
                f"got ({self.aa}, {self.au}, {self.uu})"
            )

    def value_for(self, cls: PairClass) -> float:
        return (self.aa, self.au, self.uu)[int(cls)]


@dataclass
class PairBatch:
    """Stratified mini-batch of ordered instance pairs.

    Row layout is the AA block, then AU, then UU. AU rows always carry
    the labeled anomaly on the left. ``left_index``/``right_index``
    point into the originating split's feature store for diagnostics.
    """

    left: np.ndarray
    right: np.ndarray
    targets: np.ndarray
    classes: np.ndarray
    left_index: np.ndarray
    right_index: np.ndarray

    def __len__(self) -> int:
        return self.targets.shape[0]


@dataclass
class InstanceBatch:
    """Single-instance mini-batch for the one-stream ablation: half
    labeled anomalies (target au), half unlabeled (target uu)."""

    x: np.ndarray
    targets: np.ndarray
    from_anomaly_pool: np.ndarray
    index: np.ndarray

    def __len__(self) -> int:
        return self.targets.shape[0]


def _pick(pool: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
    return pool[rng.integers(0, pool.size, size=n)]


def sample_pair_batch(
    split: WeakSupervisionSplit,
    batch_size: int,
    labels: OrdinalLabels,
    rng: np.random.Generator,
) -> PairBatch:
    """Draw a stratified pair batch: b/4 AA, b/4 AU, b/2 UU.

    Sampling is uniform with replacement within each pool (self-pairs
    allowed), so the batch is well defined even for tiny pools. The
    composition is exact for every batch, not just in expectation.
    """
    if batch_size < 4 or batch_size % 4:
        raise ValueError(f"batch_size must be a positive multiple of 4, got {batch_size}")
    if split.n_labeled < 1 or split.n_unlabeled < 1:
        raise ValueError("both A and U must be nonempty for pair sampling")
    n_aa = batch_size // 4
    n_au = batch_size // 4
    n_uu = batch_size // 2
    aa_l = _pick(split.labeled_idx, n_aa, rng)
    aa_r = _pick(split.labeled_idx, n_aa, rng)
    au_l = _pick(split.labeled_idx, n_au, rng)
    au_r = _pick(split.unlabeled_idx, n_au, rng)
    uu_l = _pick(split.unlabeled_idx, n_uu, rng)
    uu_r = _pick(split.unlabeled_idx, n_uu, rng)
    left_index = np.concatenate([aa_l, au_l, uu_l])
    right_index = np.concatenate([aa_r, au_r, uu_r])
    classes = np.concatenate(
        [
            np.full(n_aa, PairClass.AA, dtype=np.uint8),
            np.full(n_au, PairClass.AU, dtype=np.uint8),
            np.full(n_uu, PairClass.UU, dtype=np.uint8),
        ]
    )
    targets = np.concatenate(
        [
            np.full(n_aa, labels.aa),
            np.full(n_au, labels.au),
            np.full(n_uu, labels.uu),
        ]
    )
    return PairBatch(
        left=split.features[left_index],
        right=split.features[right_index],
        targets=targets,
        classes=classes,
        left_index=left_index,
        right_index=right_index,
    )


def sample_instance_batch(
    split: WeakSupervisionSplit,
    batch_size: int,
    labels: OrdinalLabels,
    rng: np.random.Generator,
) -> InstanceBatch:
    """Draw a balanced single-instance batch: b/2 from A, b/2 from U."""
    if batch_size < 2 or batch_size % 2:
        raise ValueError(f"batch_size must be a positive multiple of 2, got {batch_size}")
    half = batch_size // 2
    a_idx = _pick(split.labeled_idx, half, rng)
    u_idx = _pick(split.unlabeled_idx, half, rng)
    index = np.concatenate([a_idx, u_idx])
    targets = np.concatenate([np.full(half, labels.au), np.full(half, labels.uu)])
    from_anomaly = np.concatenate(
        [np.ones(half, dtype=bool), np.zeros(half, dtype=bool)]
    )
    return InstanceBatch(
        x=split.features[index],
        targets=targets,
        from_anomaly_pool=from_anomaly,
        index=index,
    )


def training_pair_space_size(n_labeled: int, n_unlabeled: int) -> int:
    """Number of distinct pairwise samples the three stratified draws can
    produce: K^3 * N^3, exact (Python integers do not overflow)."""
    if n_labeled < 1 or n_unlabeled < 1:
        raise ValueError("pool sizes must be >= 1")
    return int(n_labeled) ** 3 * int(n_unlabeled) ** 3


def _check_eps(eps: float) -> float:
    if not 0.0 <= eps < 1.0:
        raise ValueError(f"contamination rate must be in [0, 1), got {eps}")
    return float(eps)


def expected_true_relation_proportions(eps: float) -> tuple[float, float, float]:
    """Expected fractions of sampled pairs whose *true* relation is
    anomaly-anomaly, anomaly-normal, and normal-normal, when the
    unlabeled pool carries anomaly fraction ``eps``.

    The three components sum to 1 for any eps.
    """
    eps = _check_eps(eps)
    p_aa = 0.25 + 0.25 * eps + 0.5 * eps * eps
    p_an = 0.25 + 0.75 * eps - eps * eps
    p_nn = 0.5 - eps + 0.5 * eps * eps
    return p_aa, p_an, p_nn


def mislabel_fraction(eps: float) -> float:
    """Expected fraction of unlabeled-unlabeled pairs containing at
    least one true anomaly, i.e. pairs whose ordinal target understates
    their true relation: 2*eps - eps**2."""
    eps = _check_eps(eps)
    return 2.0 * eps - eps * eps


def expected_scores(labels: OrdinalLabels, eps: float) -> tuple[float, float]:
    """Expected ensemble score of a true anomaly and of a true normal
    under a perfectly fitted regressor: ((aa + au) / 2,
    (au + uu - 2*eps*aa) / 2)."""
    eps = _check_eps(eps)
    anomaly_mean = (labels.aa + labels.au) / 2.0
    normal_mean = (labels.au + labels.uu - 2.0 * eps * labels.aa) / 2.0
    return anomaly_mean, normal_mean
