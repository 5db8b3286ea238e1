"""Training loop and ensemble scoring.

Training repeats (sample stratified batch, objective + gradients,
RMSprop step) for a fixed schedule. Scoring pairs each instance with
randomly drawn partners from A and U and averages the pair scores; the
instance sits on the right of anomaly partners and on the left of
unlabeled partners.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass

import numpy as np

from .dataset import WeakSupervisionSplit
from .errors import NumericError, SchemaError
from .model import (
    Model,
    ModelConfig,
    OptimizerState,
    build_variant,
    forward_pairs,
    forward_singles,
    objective_and_gradients,
    rmsprop_step,
)
from .ndcore import make_rng
from .pairgen import sample_instance_batch, sample_pair_batch


@dataclass
class TrainConfig:
    model: ModelConfig
    n_epochs: int = 50
    n_batches_per_epoch: int = 20
    batch_size: int = 512
    learning_rate: float = 0.001
    rmsprop_rho: float = 0.9
    rmsprop_eps: float = 1e-7
    ensemble_size: int = 30
    seed: int = 0

    def __post_init__(self):
        if min(self.n_epochs, self.n_batches_per_epoch, self.batch_size) < 1:
            raise ValueError("epochs, batches per epoch and batch size must be positive")
        if self.ensemble_size < 1:
            raise ValueError(f"ensemble_size must be >= 1, got {self.ensemble_size}")
        divisor = 4 if self.model.is_pairwise else 2
        if self.batch_size % divisor:
            raise ValueError(
                f"batch_size must be divisible by {divisor} for variant "
                f"{self.model.variant!r}, got {self.batch_size}"
            )


@dataclass
class TrainReport:
    objective_trace: list[float]
    seed: int
    wall_seconds: float
    n_epochs: int
    n_batches_per_epoch: int

    def epoch_means(self) -> list[float]:
        per = self.n_batches_per_epoch
        return [
            float(np.mean(self.objective_trace[i * per : (i + 1) * per]))
            for i in range(self.n_epochs)
        ]


def train(
    split: WeakSupervisionSplit,
    cfg: TrainConfig,
    rng: np.random.Generator | None = None,
) -> tuple[Model, TrainReport]:
    """Train a freshly initialized variant on the split.

    Deterministic given ``cfg.seed`` (or the state of an explicitly
    passed generator). Only the feature store and the A/U index lists
    are read; test data riding on the split is never touched.
    """
    if cfg.model.input_dim != split.dim:
        raise ValueError(
            f"model input_dim {cfg.model.input_dim} != data dim {split.dim}"
        )
    if rng is None:
        rng = make_rng(cfg.seed)
    started = time.perf_counter()
    model = build_variant(cfg.model, rng)
    state = OptimizerState.for_params(
        model.params, cfg.learning_rate, cfg.rmsprop_rho, cfg.rmsprop_eps
    )
    sample = sample_pair_batch if cfg.model.is_pairwise else sample_instance_batch
    trace: list[float] = []
    for _ in range(cfg.n_epochs):
        for _ in range(cfg.n_batches_per_epoch):
            batch = sample(split, cfg.batch_size, cfg.model.labels, rng)
            objective, grads = objective_and_gradients(model, batch)
            rmsprop_step(model.params, grads, state)
            if not model.params.all_finite():
                raise NumericError(
                    f"non-finite parameters after step {len(trace) + 1}"
                )
            trace.append(objective)
    report = TrainReport(
        objective_trace=trace,
        seed=cfg.seed,
        wall_seconds=time.perf_counter() - started,
        n_epochs=cfg.n_epochs,
        n_batches_per_epoch=cfg.n_batches_per_epoch,
    )
    return model, report


def draw_partner_indices(
    split: WeakSupervisionSplit, n_rows: int, ensemble_size: int, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Pre-draw scoring partners for n_rows instances, in row order.

    Returns positions into A and U (each ``n_rows x ensemble_size``),
    uniform with replacement. Pre-drawing makes per-row scores
    independent of evaluation order, so rows may be scored in parallel
    or in any order once the draw is fixed.
    """
    if split.n_labeled < 1 or split.n_unlabeled < 1:
        raise ValueError("both A and U must be nonempty for scoring")
    if ensemble_size < 1:
        raise ValueError(f"ensemble_size must be >= 1, got {ensemble_size}")
    a_pos = rng.integers(0, split.n_labeled, size=(n_rows, ensemble_size))
    u_pos = rng.integers(0, split.n_unlabeled, size=(n_rows, ensemble_size))
    return a_pos, u_pos


def score_with_partners(
    model: Model,
    x: np.ndarray,
    split: WeakSupervisionSplit,
    a_pos: np.ndarray,
    u_pos: np.ndarray,
) -> np.ndarray:
    """Ensemble scores of the rows of ``x`` with fixed partner draws."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if not model.config.is_pairwise:
        return forward_singles(model, x)
    n, e = a_pos.shape
    if x.shape[0] != n:
        raise ValueError(f"{n} partner rows for {x.shape[0]} instances")
    anchors = np.repeat(x, e, axis=0)
    a_partners = split.features[split.labeled_idx[a_pos.ravel()]]
    u_partners = split.features[split.unlabeled_idx[u_pos.ravel()]]
    s_a = forward_pairs(model, a_partners, anchors).reshape(n, e)
    s_u = forward_pairs(model, anchors, u_partners).reshape(n, e)
    return (s_a.sum(axis=1) + s_u.sum(axis=1)) / (2.0 * e)


def score_dataset(
    model: Model,
    x: np.ndarray,
    split: WeakSupervisionSplit,
    ensemble_size: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Ensemble score per row of ``x``.

    The one-stream variant evaluates each instance directly (its score
    is the mean of identical single-instance evaluations, so no partner
    randomness is consumed).
    """
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if not model.config.is_pairwise:
        return forward_singles(model, x)
    a_pos, u_pos = draw_partner_indices(split, x.shape[0], ensemble_size, rng)
    return score_with_partners(model, x, split, a_pos, u_pos)


def score_instance(
    model: Model,
    x: np.ndarray,
    split: WeakSupervisionSplit,
    ensemble_size: int,
    rng: np.random.Generator,
) -> float:
    """Ensemble score of a single instance."""
    return float(score_dataset(model, np.atleast_2d(x), split, ensemble_size, rng)[0])


def write_scores_csv(path, scores: np.ndarray, true_labels: np.ndarray | None = None) -> None:
    """Write ``row_index,score[,true_label]`` with full float precision."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        if true_labels is None:
            writer.writerow(["row_index", "score"])
            for i, s in enumerate(scores):
                writer.writerow([i, repr(float(s))])
        else:
            writer.writerow(["row_index", "score", "true_label"])
            for i, (s, y) in enumerate(zip(scores, true_labels)):
                writer.writerow([i, repr(float(s)), int(y)])


def read_scores_csv(path) -> tuple[np.ndarray, np.ndarray | None]:
    """Read a scores CSV; returns (scores, labels or None)."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty scores file") from None
        has_labels = "true_label" in header
        scores, labels = [], []
        for row_no, record in enumerate(reader, start=2):
            if not record:
                continue
            try:
                scores.append(float(record[1]))
                if has_labels:
                    labels.append(int(float(record[2])))
            except (IndexError, ValueError):
                raise SchemaError(
                    f"{path}: malformed scores row {row_no}: {record!r}"
                ) from None
    return np.asarray(scores), (np.asarray(labels) if has_labels else None)
