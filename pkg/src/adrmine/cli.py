"""Command-line interface for the mining and classification pipeline.

Every subcommand reads the same JSON run configuration (see the README)
and accepts the same overrides. Stages are deterministic, so each
subcommand recomputes what it needs from the configuration and writes
only its own artifacts:

  generate       write synthetic input tables under <output>/data
  ingest-check   load and validate the inputs, print a summary
  pairs          mine labeled pairs, write pairs.csv
  features       extract feature vectors, write features.csv
  train          fit the classifier, write model.pkl
  evaluate       score the validation split, write scores.csv/roc.csv/report.txt
  pipeline       run everything above in one go
  compare-masks  train under two feature masks and compare validation AUCs
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import evaluation, learn, pipeline
from .errors import AdrMineError, ParseError, StageError, ValidationError


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", required=True, help="JSON run configuration")
    parser.add_argument("--seed", type=int, help="override generation and split seeds")
    parser.add_argument("--threads", type=int, help="worker threads for mining stages")
    parser.add_argument("--output", help="override the output directory")
    parser.add_argument(
        "--feature-mask",
        dest="feature_mask",
        help='feature subset like "1-10" or "1,2,11" (1-based)',
    )
    parser.add_argument("--model", choices=list(learn.MODEL_KINDS), help="model kind")
    parser.add_argument(
        "--comparator",
        choices=["other-drugs", "matched"],
        help="comparison group for association features",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="chatty logging")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="adrmine",
        description="Mine drug-outcome pairs from longitudinal records and "
        "classify them as adverse reactions.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in [
        ("generate", "write synthetic input tables"),
        ("ingest-check", "validate inputs and print a summary"),
        ("pairs", "mine labeled drug-outcome pairs"),
        ("features", "extract feature vectors for mined pairs"),
        ("train", "fit the pair classifier"),
        ("evaluate", "score the validation split and report metrics"),
        ("pipeline", "run all stages end to end"),
        ("compare-masks", "compare two feature masks on the same split"),
    ]:
        _add_common(sub.add_parser(name, help=help_text))
    return parser


def _configure(args) -> pipeline.PipelineConfig:
    config = pipeline.load_config(args.config)
    return pipeline.apply_overrides(
        config,
        seed=args.seed,
        threads=args.threads,
        output=args.output,
        feature_mask=args.feature_mask,
        model=args.model,
        comparator=args.comparator,
    )


def _cmd_generate(config) -> int:
    if config.generator is None:
        raise ValidationError("generate needs a generator section in the config")
    world = pipeline.build_world(config, write=True)
    data_dir = Path(config.output_dir) / "data"
    print(f"wrote synthetic tables to {data_dir}")
    print(
        f"patients={len(world.dataset.patients)} "
        f"medical={len(world.dataset.medical)} therapy={len(world.dataset.therapy)} "
        f"report_years={len(world.corpus.years)}"
    )
    return 0


def _cmd_ingest_check(config) -> int:
    world = pipeline.build_world(config, write=False)
    n_reports = sum(len(world.corpus.reports(y)) for y in world.corpus.years)
    print(
        f"patients={len(world.dataset.patients)} "
        f"medical={len(world.dataset.medical)} therapy={len(world.dataset.therapy)}"
    )
    print(
        f"after registration filter: medical={len(world.filtered.medical)} "
        f"therapy={len(world.filtered.therapy)}"
    )
    print(
        f"reports={n_reports} over years {list(world.corpus.years)}; "
        f"side-effect listings for {len(world.labels.known_side_effects)} drugs; "
        f"{len(world.labels.non_adverse_roots)} non-adverse roots"
    )
    print("ok")
    return 0


def _cmd_pairs(config) -> int:
    world = pipeline.build_world(config, write=False)
    labeled = pipeline.mine_pairs(config, world, write=True)
    n_pos = sum(1 for p in labeled if p.label == 1)
    print(
        f"wrote {len(labeled)} labeled pairs ({n_pos} positive) to "
        f"{Path(config.output_dir) / 'pairs.csv'}"
    )
    return 0


def _cmd_features(config) -> int:
    world = pipeline.build_world(config, write=False)
    labeled = pipeline.mine_pairs(config, world, write=True)
    feats = pipeline.featurize_pairs(config, world, labeled, write=True)
    print(
        f"wrote {len(feats)} feature vectors to "
        f"{Path(config.output_dir) / 'features.csv'}"
    )
    return 0


def _prepared_matrix(config):
    world = pipeline.build_world(config, write=False)
    labeled = pipeline.mine_pairs(config, world, write=False)
    feats = pipeline.featurize_pairs(config, world, labeled, write=False)
    X, y, keys = learn.feature_matrix(feats)
    train_idx, val_idx = learn.split_data(X, y, config.split)
    return feats, X, y, keys, train_idx, val_idx


def _cmd_train(config) -> int:
    _, X, y, _, train_idx, _ = _prepared_matrix(config)
    model = learn.train(
        X[train_idx], y[train_idx],
        model_kind=config.model_kind,
        feature_mask=config.feature_mask,
        config=config.split,
    )
    path = Path(config.output_dir) / "model.pkl"
    learn.save_model(model, path)
    print(
        f"trained {config.model_kind} on {len(train_idx)} examples; "
        f"cv_auc={model.cv_auc_:.4f} best={model.best_params_}"
    )
    print(f"wrote {path}")
    return 0


def _cmd_evaluate(config) -> int:
    feats, X, y, keys, train_idx, val_idx = _prepared_matrix(config)
    model = learn.train(
        X[train_idx], y[train_idx],
        model_kind=config.model_kind,
        feature_mask=config.feature_mask,
        config=config.split,
    )
    out = Path(config.output_dir)
    val_scores = learn.score(model, X[val_idx])
    report = evaluation.evaluate_scores(val_scores, y[val_idx], config.threshold)
    evaluation.save_scores(
        ((keys[i][0], keys[i][1], int(y[i]), float(s)) for i, s in zip(val_idx, val_scores)),
        out / "scores.csv",
    )
    evaluation.save_roc(report.roc, out / "roc.csv")
    text = pipeline.format_report(
        config, feats, train_idx, val_idx, model, report, None,
        pipeline.consistency_distribution(feats),
    )
    (out / "report.txt").write_text(text, encoding="utf-8")
    print(text, end="")
    return 0


def _cmd_pipeline(config) -> int:
    result = pipeline.run_pipeline(config)
    print(result.report_text, end="")
    print(f"artifacts in {config.output_dir}")
    return 0


def _cmd_compare_masks(config) -> int:
    result = pipeline.compare_masks(config, mask_a=config.feature_mask)
    text = pipeline.format_mask_comparison(result)
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "compare.txt").write_text(text, encoding="utf-8")
    print(text, end="")
    return 0


_COMMANDS = {
    "generate": _cmd_generate,
    "ingest-check": _cmd_ingest_check,
    "pairs": _cmd_pairs,
    "features": _cmd_features,
    "train": _cmd_train,
    "evaluate": _cmd_evaluate,
    "pipeline": _cmd_pipeline,
    "compare-masks": _cmd_compare_masks,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        config = _configure(args)
        return _COMMANDS[args.command](config)
    except (ValidationError, ParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except AdrMineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
