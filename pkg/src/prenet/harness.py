"""Synthetic fixtures and multi-run experiment orchestration.

One run: stratified 80/20 split -> weak-supervision world -> optional
standardization -> train -> score test set -> metrics. Run i of an
experiment uses seed ``base_seed + i``, so any run is reproducible in
isolation; the split construction consumes the seeded generator first,
so every variant sees identical worlds under shared seeds.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Mapping

import numpy as np

from .dataset import (
    LabeledDataset,
    build_weak_supervision,
    load_csv,
    standardize_split,
    stratified_split,
)
from .engine import TrainConfig, TrainReport, score_dataset, train
from .metrics import AggregateReport, MetricsReport, aggregate_runs, evaluate
from .model import VARIANTS, Model, ModelConfig, default_hidden_dims
from .ndcore import make_rng
from .pairgen import OrdinalLabels


@dataclass(frozen=True)
class SyntheticSpec:
    """Two isotropic unit-variance Gaussians: normals at the origin,
    anomalies at distance ``separation`` along the first axis."""

    n_normal: int = 1000
    n_anomaly: int = 50
    dim: int = 2
    separation: float = 6.0
    seed: int = 0

    def __post_init__(self):
        if self.n_normal < 1 or self.n_anomaly < 1 or self.dim < 1:
            raise ValueError("counts and dim must be >= 1")
        if self.separation < 0:
            raise ValueError(f"separation must be >= 0, got {self.separation}")


def generate_synthetic(spec: SyntheticSpec) -> LabeledDataset:
    """Sample the two-Gaussian fixture (normals first, then anomalies)."""
    rng = make_rng(spec.seed)
    normals = rng.standard_normal((spec.n_normal, spec.dim))
    anomalies = rng.standard_normal((spec.n_anomaly, spec.dim))
    anomalies[:, 0] += spec.separation
    features = np.concatenate([normals, anomalies])
    labels = np.concatenate(
        [np.zeros(spec.n_normal, dtype=np.int64), np.ones(spec.n_anomaly, dtype=np.int64)]
    )
    return LabeledDataset(features, labels)


@dataclass
class ExperimentSpec:
    """Everything one multi-run experiment needs."""

    source: str | SyntheticSpec
    variant: str = "prenet"
    n_runs: int = 10
    base_seed: int = 0
    n_labeled: int = 60
    contamination: float = 0.02
    train_fraction: float = 0.8
    standardize: bool = True
    label_column: str = "label"
    anomaly_value: str | None = None
    labels: OrdinalLabels = field(default_factory=OrdinalLabels)
    hidden_dims: tuple[int, ...] | None = None
    l2_lambda: float = 0.01
    n_epochs: int = 50
    n_batches_per_epoch: int = 20
    batch_size: int = 512
    learning_rate: float = 0.001
    ensemble_size: int = 30

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.n_runs < 1:
            raise ValueError(f"n_runs must be >= 1, got {self.n_runs}")

    def dataset_name(self) -> str:
        if isinstance(self.source, SyntheticSpec):
            return f"synthetic({self.source.n_normal}+{self.source.n_anomaly}d{self.source.dim})"
        return str(self.source)


def load_source(spec: ExperimentSpec) -> LabeledDataset:
    if isinstance(spec.source, SyntheticSpec):
        return generate_synthetic(spec.source)
    return load_csv(spec.source, spec.label_column, spec.anomaly_value)


@dataclass
class RunOutput:
    """Full artifacts of one run, for inspection beyond the metrics."""

    metrics: MetricsReport
    train_report: TrainReport
    model: Model
    scores: np.ndarray
    test_labels: np.ndarray


def train_config_for(spec: ExperimentSpec, input_dim: int, seed: int, variant: str | None = None) -> TrainConfig:
    variant = variant or spec.variant
    model_cfg = ModelConfig(
        variant=variant,
        input_dim=input_dim,
        hidden_dims=spec.hidden_dims
        if spec.hidden_dims is not None
        else default_hidden_dims(variant),
        l2_lambda=spec.l2_lambda,
        labels=spec.labels,
    )
    return TrainConfig(
        model=model_cfg,
        n_epochs=spec.n_epochs,
        n_batches_per_epoch=spec.n_batches_per_epoch,
        batch_size=spec.batch_size,
        learning_rate=spec.learning_rate,
        ensemble_size=spec.ensemble_size,
        seed=seed,
    )


def run_single(
    ds: LabeledDataset, spec: ExperimentSpec, seed: int, variant: str | None = None
) -> RunOutput:
    """One end-to-end run with a single run-owned generator."""
    rng = make_rng(seed)
    train_ds, test_ds = stratified_split(ds, spec.train_fraction, rng)
    split = build_weak_supervision(
        train_ds, spec.n_labeled, spec.contamination, rng, test=test_ds, seed=seed
    )
    if spec.standardize:
        split, _, _ = standardize_split(split)
    cfg = train_config_for(spec, ds.dim, seed, variant)
    model, report = train(split, cfg, rng=rng)
    scores = score_dataset(model, split.test_features, split, spec.ensemble_size, rng)
    metrics = evaluate(scores, split.test_labels, seed=seed)
    return RunOutput(metrics, report, model, scores, split.test_labels)


def _run_metrics(ds: LabeledDataset, spec: ExperimentSpec, seed: int) -> MetricsReport:
    return run_single(ds, spec, seed).metrics


def run_experiment(spec: ExperimentSpec, jobs: int = 1) -> AggregateReport:
    """Aggregate metrics over ``n_runs`` runs seeded base_seed + i.

    With ``jobs > 1`` runs execute in worker processes; each run owns its
    generator via the seed ladder, so results are identical to the
    sequential path.
    """
    ds = load_source(spec)
    seeds = [spec.base_seed + i for i in range(spec.n_runs)]
    reports: list[MetricsReport] = []
    if jobs > 1 and spec.n_runs > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, spec.n_runs)) as pool:
            futures = [pool.submit(_run_metrics, ds, spec, seed) for seed in seeds]
            for i, future in enumerate(futures):
                try:
                    reports.append(future.result())
                except Exception as exc:
                    exc.args = (f"run {i} (seed {seeds[i]}): {exc}",)
                    raise
    else:
        for i, seed in enumerate(seeds):
            try:
                reports.append(_run_metrics(ds, spec, seed))
            except Exception as exc:
                exc.args = (f"run {i} (seed {seed}): {exc}",)
                raise
    return aggregate_runs(reports)


def run_ablation_suite(
    spec: ExperimentSpec, variants: tuple[str, ...] = VARIANTS, jobs: int = 1
) -> dict[str, AggregateReport]:
    """Run every variant under identical per-run seeds (hence identical
    splits: the world is drawn before any variant-specific randomness).

    Custom ``hidden_dims`` are dropped here because the variants require
    different hidden-layer counts; each uses its own default stack.
    """
    out: dict[str, AggregateReport] = {}
    for variant in variants:
        out[variant] = run_experiment(
            replace(spec, variant=variant, hidden_dims=None), jobs=jobs
        )
    return out


def run_contamination_sweep(
    spec: ExperimentSpec, rates: list[float], jobs: int = 1
) -> dict[float, AggregateReport]:
    """One experiment per contamination rate with shared base seeds; the
    unlabeled pool is re-derived from the same training pool per rate."""
    out: dict[float, AggregateReport] = {}
    for rate in rates:
        out[rate] = run_experiment(replace(spec, contamination=rate), jobs=jobs)
    return out


def experiment_report_json(
    spec: ExperimentSpec, agg: AggregateReport, extra: Mapping | None = None
) -> dict:
    """Machine-readable experiment report."""
    doc = {
        "variant": spec.variant,
        "dataset": spec.dataset_name(),
        "seeds": [spec.base_seed + i for i in range(spec.n_runs)],
        "auc_roc": {
            "mean": agg.auc_roc_mean,
            "std": agg.auc_roc_std,
            "runs": [r.auc_roc for r in agg.runs],
        },
        "auc_pr": {
            "mean": agg.auc_pr_mean,
            "std": agg.auc_pr_std,
            "runs": [r.auc_pr for r in agg.runs],
        },
        "config": {
            "n_labeled": spec.n_labeled,
            "contamination": spec.contamination,
            "train_fraction": spec.train_fraction,
            "standardize": spec.standardize,
            "labels": [spec.labels.aa, spec.labels.au, spec.labels.uu],
            "hidden_dims": list(spec.hidden_dims) if spec.hidden_dims else None,
            "l2_lambda": spec.l2_lambda,
            "n_epochs": spec.n_epochs,
            "n_batches_per_epoch": spec.n_batches_per_epoch,
            "batch_size": spec.batch_size,
            "learning_rate": spec.learning_rate,
            "ensemble_size": spec.ensemble_size,
        },
    }
    if extra:
        doc.update(extra)
    return doc


def parse_spec_file(path) -> dict[str, str]:
    """Read a flat ``key = value`` experiment file.

    Keys mirror CLI flag names (dashes or underscores); blank lines and
    ``#`` comments are ignored. Values stay strings; the CLI applies
    them as overridable defaults.
    """
    values: dict[str, str] = {}
    with open(path) as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{line_no}: expected 'key = value', got {raw!r}")
            key, value = line.split("=", 1)
            values[key.strip().replace("-", "_")] = value.strip()
    return values
