"""Command-line interface.

Commands: synth, train, score, eval, experiment, ablate, sweep, theory.
Machine-readable results go to files (JSON/CSV); stdout carries short
human-readable summaries. Exit codes: 0 success, 2 usage error,
3 data/capacity error, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from datetime import datetime, timezone

import numpy as np

from . import __version__
from .dataset import (
    WeakSupervisionSplit,
    apply_standardization,
    build_weak_supervision,
    load_csv,
    load_feature_csv,
    save_csv,
    standardize_split,
)
from .engine import (
    TrainConfig,
    draw_partner_indices,
    read_scores_csv,
    score_with_partners,
    train,
    write_scores_csv,
)
from .errors import DataError, NumericError
from .harness import (
    ExperimentSpec,
    SyntheticSpec,
    experiment_report_json,
    generate_synthetic,
    parse_spec_file,
    run_ablation_suite,
    run_contamination_sweep,
    run_experiment,
)
from .metrics import evaluate
from .model import (
    VARIANTS,
    ModelConfig,
    forward_singles,
    load_checkpoint,
    save_checkpoint,
)
from .ndcore import make_rng
from .pairgen import (
    OrdinalLabels,
    expected_scores,
    expected_true_relation_proportions,
    mislabel_fraction,
)


def _parse_labels(text: str) -> OrdinalLabels:
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 3:
        raise ValueError(f"--labels expects 'aa,au,uu', got {text!r}")
    return OrdinalLabels(float(parts[0]), float(parts[1]), float(parts[2]))


def _parse_hidden_dims(text: str | None) -> tuple[int, ...] | None:
    if text is None:
        return None
    text = text.strip()
    if not text:
        return ()
    return tuple(int(p) for p in text.split(","))


def _timestamp() -> str:
    return datetime.now(timezone.utc).isoformat()


def _write_json(path, doc: dict) -> None:
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


def _add_experiment_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--data", help="labeled CSV dataset")
    p.add_argument("--label-column", default="label", help="name of the label column")
    p.add_argument("--anomaly-value", default=None,
                   help="label value to treat as the anomaly class")
    p.add_argument("--variant", choices=VARIANTS, default="prenet",
                   help="model variant")
    p.add_argument("--runs", type=int, default=10, help="independent runs to average")
    p.add_argument("--seed", type=int, default=0, help="base seed; run i uses seed+i")
    p.add_argument("--n-labeled", type=int, default=60,
                   help="labeled anomalies available for training")
    p.add_argument("--contamination", type=float, default=0.02,
                   help="anomaly fraction of the unlabeled pool")
    p.add_argument("--train-fraction", type=float, default=0.8,
                   help="fraction of each class kept for training")
    p.add_argument("--no-standardize", action="store_true",
                   help="skip z-scoring features with training statistics")
    p.add_argument("--labels", default="8,4,0", help="ordinal targets aa,au,uu")
    p.add_argument("--hidden-dims", default=None,
                   help="comma-separated hidden layer widths (default: per variant)")
    p.add_argument("--l2", type=float, default=0.01, dest="l2_lambda",
                   help="weight penalty coefficient")
    p.add_argument("--epochs", type=int, default=50, help="training epochs")
    p.add_argument("--batches-per-epoch", type=int, default=20,
                   help="mini-batches per epoch")
    p.add_argument("--batch-size", type=int, default=512,
                   help="pairs (or instances) per mini-batch")
    p.add_argument("--learning-rate", type=float, default=0.001,
                   help="RMSprop learning rate")
    p.add_argument("--ensemble-size", type=int, default=30,
                   help="partner draws per side when scoring")
    p.add_argument("--jobs", type=int, default=1,
                   help="worker processes for independent runs")


def _spec_from_args(args) -> ExperimentSpec:
    if not args.data:
        raise ValueError("--data is required (directly or via --spec-file)")
    return ExperimentSpec(
        source=args.data,
        variant=args.variant,
        n_runs=args.runs,
        base_seed=args.seed,
        n_labeled=args.n_labeled,
        contamination=args.contamination,
        train_fraction=args.train_fraction,
        standardize=not args.no_standardize,
        label_column=args.label_column,
        anomaly_value=args.anomaly_value,
        labels=_parse_labels(args.labels),
        hidden_dims=_parse_hidden_dims(args.hidden_dims),
        l2_lambda=args.l2_lambda,
        n_epochs=args.epochs,
        n_batches_per_epoch=args.batches_per_epoch,
        batch_size=args.batch_size,
        learning_rate=args.learning_rate,
        ensemble_size=args.ensemble_size,
    )


def cmd_synth(args) -> int:
    spec = SyntheticSpec(
        n_normal=args.n_normal,
        n_anomaly=args.n_anomaly,
        dim=args.dim,
        separation=args.separation,
        seed=args.seed,
    )
    ds = generate_synthetic(spec)
    save_csv(ds, args.output)
    print(f"wrote {ds.n} rows ({ds.n_anomalies} anomalies, dim {ds.dim}) to {args.output}")
    return 0


def cmd_train(args) -> int:
    if not args.data:
        raise ValueError("--data is required")
    ds = load_csv(args.data, args.label_column, args.anomaly_value)
    labels = _parse_labels(args.labels)
    rng = make_rng(args.seed)
    split = build_weak_supervision(
        ds, args.n_labeled, args.contamination, rng, seed=args.seed
    )
    mean = scale = None
    if not args.no_standardize:
        split, mean, scale = standardize_split(split)
    cfg = TrainConfig(
        model=ModelConfig(
            variant=args.variant,
            input_dim=ds.dim,
            hidden_dims=_parse_hidden_dims(args.hidden_dims),
            l2_lambda=args.l2_lambda,
            labels=labels,
        ),
        n_epochs=args.epochs,
        n_batches_per_epoch=args.batches_per_epoch,
        batch_size=args.batch_size,
        learning_rate=args.learning_rate,
        ensemble_size=args.ensemble_size,
        seed=args.seed,
    )
    model, report = train(split, cfg, rng=rng)
    save_checkpoint(
        args.output,
        model,
        mean=mean,
        scale=scale,
        anomaly_pool=split.a_features,
        unlabeled_pool=split.u_features,
    )
    report_path = args.report or f"{args.output}.train.json"
    _write_json(
        report_path,
        {
            "seed": report.seed,
            "n_epochs": report.n_epochs,
            "n_batches_per_epoch": report.n_batches_per_epoch,
            "objective_trace": report.objective_trace,
            "wall_seconds": report.wall_seconds,
        },
    )
    means = report.epoch_means()
    print(
        f"trained {args.variant} on {ds.n} rows: epoch objective "
        f"{means[0]:.4f} -> {means[-1]:.4f}, checkpoint {args.output}"
    )
    return 0


def cmd_score(args) -> int:
    model, extras = load_checkpoint(args.checkpoint)
    features, raw_labels, _ = load_feature_csv(args.data, args.label_column)
    labels = None
    if raw_labels is not None:
        ds = load_csv(args.data, args.label_column, args.anomaly_value)
        features, labels = ds.features, ds.labels
    if features.shape[1] != model.config.input_dim:
        raise DataError(
            f"{args.data} has {features.shape[1]} features, checkpoint expects "
            f"{model.config.input_dim}"
        )
    if extras["mean"] is not None:
        features = apply_standardization(features, extras["mean"], extras["scale"])
    rng = make_rng(args.seed)
    if model.config.is_pairwise:
        a_pool, u_pool = extras["anomaly_pool"], extras["unlabeled_pool"]
        if a_pool is None:
            raise DataError(
                f"{args.checkpoint} carries no partner pools; cannot score pairs"
            )
        store = np.concatenate([a_pool, u_pool])
        split = WeakSupervisionSplit(
            features=store,
            true_labels=np.concatenate(
                [np.ones(len(a_pool), dtype=np.int64), np.zeros(len(u_pool), dtype=np.int64)]
            ),
            labeled_idx=np.arange(len(a_pool)),
            unlabeled_idx=np.arange(len(a_pool), len(store)),
            contamination_rate=0.0,
        )
        a_pos, u_pos = draw_partner_indices(split, features.shape[0], args.ensemble_size, rng)
        scores = score_with_partners(model, features, split, a_pos, u_pos)
    else:
        scores = forward_singles(model, features)
    write_scores_csv(args.output, scores, labels)
    print(f"scored {features.shape[0]} rows -> {args.output}")
    return 0


def cmd_eval(args) -> int:
    scores, labels = read_scores_csv(args.scores)
    if labels is None:
        if not args.data:
            raise ValueError("scores file has no true_label column; pass --data")
        ds = load_csv(args.data, args.label_column, args.anomaly_value)
        if ds.n != scores.shape[0]:
            raise DataError(
                f"{scores.shape[0]} scores for {ds.n} labeled rows in {args.data}"
            )
        labels = ds.labels
    report = evaluate(scores, labels)
    doc = report.as_dict()
    doc["generated_at"] = _timestamp()
    _write_json(args.output, doc)
    print(f"auc_roc {report.auc_roc:.4f}  auc_pr {report.auc_pr:.4f} -> {args.output}")
    return 0


def cmd_experiment(args) -> int:
    spec = _spec_from_args(args)
    agg = run_experiment(spec, jobs=args.jobs)
    doc = experiment_report_json(spec, agg, extra={"generated_at": _timestamp()})
    _write_json(args.output, doc)
    print(
        f"{spec.variant} on {spec.dataset_name()}: "
        f"auc_roc {agg.auc_roc_mean:.4f}±{agg.auc_roc_std:.4f}  "
        f"auc_pr {agg.auc_pr_mean:.4f}±{agg.auc_pr_std:.4f}  ({agg.n_runs} runs)"
    )
    return 0


def cmd_ablate(args) -> int:
    spec = _spec_from_args(args)
    results = run_ablation_suite(spec, jobs=args.jobs)
    doc = {
        "dataset": spec.dataset_name(),
        "seeds": [spec.base_seed + i for i in range(spec.n_runs)],
        "generated_at": _timestamp(),
        "variants": {},
    }
    for variant, agg in results.items():
        doc["variants"][variant] = experiment_report_json(
            replace(spec, variant=variant), agg
        )
        print(
            f"{variant:7s} auc_roc {agg.auc_roc_mean:.4f}±{agg.auc_roc_std:.4f}  "
            f"auc_pr {agg.auc_pr_mean:.4f}±{agg.auc_pr_std:.4f}"
        )
    _write_json(args.output, doc)
    return 0


def cmd_sweep(args) -> int:
    spec = _spec_from_args(args)
    rates = [float(r) for r in args.rates.split(",")]
    results = run_contamination_sweep(spec, rates, jobs=args.jobs)
    doc = {
        "dataset": spec.dataset_name(),
        "variant": spec.variant,
        "generated_at": _timestamp(),
        "rates": {},
    }
    for rate, agg in results.items():
        doc["rates"][repr(rate)] = {
            "auc_roc": {"mean": agg.auc_roc_mean, "std": agg.auc_roc_std},
            "auc_pr": {"mean": agg.auc_pr_mean, "std": agg.auc_pr_std},
            "runs": [r.as_dict() for r in agg.runs],
        }
        print(
            f"contamination {rate:g}: auc_roc {agg.auc_roc_mean:.4f}  "
            f"auc_pr {agg.auc_pr_mean:.4f}"
        )
    _write_json(args.output, doc)
    return 0


def cmd_theory(args) -> int:
    labels = _parse_labels(args.labels)
    p_aa, p_an, p_nn = expected_true_relation_proportions(args.eps)
    mis = mislabel_fraction(args.eps)
    anom_mean, norm_mean = expected_scores(labels, args.eps)
    print(f"contamination rate:             {args.eps:g}")
    print(f"ordinal targets (aa, au, uu):   ({labels.aa:g}, {labels.au:g}, {labels.uu:g})")
    print(f"true pair relations (aa/an/nn): {p_aa:.6g} / {p_an:.6g} / {p_nn:.6g}")
    print(f"uu pairs with hidden anomaly:   {mis:.6g}")
    print(f"expected anomaly score:         {anom_mean:.6g}")
    print(f"expected normal score:          {norm_mean:.6g}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="prenet",
        description="Weakly-supervised anomaly detection by ordinal regression "
        "over random instance pairs.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subparsers = parser.add_subparsers(dest="command", required=True)

    class _Sub:
        """add_parser with defaults shown in --help."""

        def add_parser(self, name, **kw):
            kw.setdefault("formatter_class", argparse.ArgumentDefaultsHelpFormatter)
            return subparsers.add_parser(name, **kw)

    sub = _Sub()

    p = sub.add_parser("synth", help="generate a two-Gaussian synthetic dataset CSV")
    p.add_argument("--n-normal", type=int, default=1000, help="normal instances")
    p.add_argument("--n-anomaly", type=int, default=50, help="anomalous instances")
    p.add_argument("--dim", type=int, default=2, help="feature count")
    p.add_argument("--separation", type=float, default=6.0,
                   help="distance between class means in units of the shared std")
    p.add_argument("--seed", type=int, default=0, help="generator seed")
    p.add_argument("-o", "--output", required=True, help="dataset CSV path")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train on a labeled CSV (whole file is the training pool)")
    _add_experiment_flags(p)
    p.add_argument("-o", "--output", required=True, help="checkpoint JSON path")
    p.add_argument("--report", default=None,
                   help="training report JSON path (default: <checkpoint>.train.json)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("score", help="score a CSV with a trained checkpoint")
    p.add_argument("--checkpoint", required=True, help="checkpoint JSON from train")
    p.add_argument("--data", required=True, help="CSV to score (label column optional)")
    p.add_argument("--label-column", default="label", help="name of the label column")
    p.add_argument("--anomaly-value", default=None,
                   help="label value to treat as the anomaly class")
    p.add_argument("--ensemble-size", type=int, default=30,
                   help="partner draws per side")
    p.add_argument("--seed", type=int, default=0, help="partner-draw seed")
    p.add_argument("-o", "--output", required=True, help="scores CSV path")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("eval", help="compute AUC-ROC / AUC-PR from a scores CSV")
    p.add_argument("--scores", required=True, help="scores CSV from score")
    p.add_argument("--data", default=None, help="labeled CSV when scores lack true_label")
    p.add_argument("--label-column", default="label", help="name of the label column")
    p.add_argument("--anomaly-value", default=None,
                   help="label value to treat as the anomaly class")
    p.add_argument("-o", "--output", required=True, help="metrics JSON path")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("experiment", help="multi-run split/train/score/eval protocol")
    _add_experiment_flags(p)
    p.add_argument("--spec-file", default=None,
                   help="flat key=value file; explicit flags override it")
    p.add_argument("-o", "--output", required=True, help="aggregate report JSON path")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("ablate", help="run all model variants under shared splits")
    _add_experiment_flags(p)
    p.add_argument("--spec-file", default=None,
                   help="flat key=value file; explicit flags override it")
    p.add_argument("-o", "--output", required=True, help="per-variant report JSON path")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("sweep", help="repeat an experiment across contamination rates")
    _add_experiment_flags(p)
    p.add_argument("--spec-file", default=None,
                   help="flat key=value file; explicit flags override it")
    p.add_argument("--rates", default="0,0.02,0.05,0.1",
                   help="comma-separated contamination rates")
    p.add_argument("-o", "--output", required=True, help="sweep report JSON path")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("theory", help="closed-form expectations for a contamination rate")
    p.add_argument("--eps", type=float, required=True, help="contamination rate in [0, 1)")
    p.add_argument("--labels", default="8,4,0", help="ordinal targets aa,au,uu")
    p.set_defaults(func=cmd_theory)

    return parser


def _apply_spec_file(argv: list[str]) -> list[str]:
    """Splice values from --spec-file in as overridable defaults."""
    if "--spec-file" not in argv:
        return argv
    pos = argv.index("--spec-file")
    if pos + 1 >= len(argv):
        return argv
    values = parse_spec_file(argv[pos + 1])
    flag_args: list[str] = []
    for key, value in values.items():
        flag = "--" + key.replace("_", "-")
        if value.lower() in ("true", "false"):
            if value.lower() == "true":
                flag_args.append(flag)
        else:
            flag_args.extend([flag, value])
    # file values go right after the subcommand so explicit flags win
    return argv[:1] + flag_args + argv[1:]


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    if argv and argv[0] in ("experiment", "ablate", "sweep"):
        try:
            argv = _apply_spec_file(argv)
        except (OSError, ValueError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 4
    except (DataError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
