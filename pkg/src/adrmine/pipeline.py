"""End-to-end orchestration: data to mined pairs to features to metrics.

A pipeline run works from either a synthetic-data configuration or paths
to existing input files, and produces deterministic artifacts in the
output directory:

* ``data/`` generated input tables (synthetic runs only)
* ``pairs.csv`` labeled mined pairs
* ``features.csv`` their feature vectors
* ``model.pkl`` the trained classifier
* ``scores.csv``, ``roc.csv``, ``report.txt`` validation results

Reruns with the same configuration produce byte-identical CSV artifacts
regardless of the thread count. Stage failures are wrapped in StageError
naming the stage; artifacts written by earlier stages are kept.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from collections.abc import Sequence

import numpy as np

from . import cohort_features, evaluation, ingest, learn, pairs as pairs_mod, syndata
from .cohort_features import ComparatorStrategy
from .domain import CohortDataset, OutcomeCode
from .errors import AdrMineError, StageError, ValidationError
from .evaluation import DelongResult, EvaluationReport
from .ingest import LabelSource, SrsCorpus
from .learn import AdrClassifier, SplitConfig
from .pairs import N_FEATURES, DrugEventPair
from .syndata import GeneratorConfig, GroundTruth
from .timelines import CohortIndex

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class InputPaths:
    """Locations of pre-existing input files."""

    patient: str
    medical: str
    therapy: str
    srs: tuple[tuple[int, str], ...] = ()
    side_effects: str | None = None
    non_adverse_roots: str | None = None

    def __post_init__(self):
        object.__setattr__(
            self, "srs", tuple((int(year), str(path)) for year, path in self.srs)
        )
        if self.side_effects is None or self.non_adverse_roots is None:
            raise ValidationError(
                "inputs need side_effects and non_adverse_roots files for labeling"
            )


@dataclass(frozen=True)
class PipelineConfig:
    """Everything a run needs; exactly one data source must be set."""

    output_dir: str = "out"
    generator: GeneratorConfig | None = None
    inputs: InputPaths | None = None
    drugs: tuple[str, ...] = ()
    comparator: ComparatorStrategy = ComparatorStrategy()
    model_kind: str = learn.LOGISTIC
    feature_mask: tuple[bool, ...] | None = None
    split: SplitConfig = field(default_factory=SplitConfig)
    threshold: float = 0.5
    threads: int = 1

    def __post_init__(self):
        if (self.generator is None) == (self.inputs is None):
            raise ValidationError("exactly one of generator/inputs must be configured")
        object.__setattr__(self, "drugs", tuple(self.drugs))
        if self.feature_mask is not None:
            mask = tuple(bool(v) for v in self.feature_mask)
            if len(mask) != N_FEATURES or not any(mask):
                raise ValidationError(
                    f"feature_mask must select 1..{N_FEATURES} of {N_FEATURES} components"
                )
            object.__setattr__(self, "feature_mask", mask)
        if self.threads < 1:
            raise ValidationError("threads must be positive")


def comparator_kind(text: str) -> str:
    """Normalize CLI/JSON comparator spellings to strategy kinds."""
    kind = text.strip().replace("-", "_")
    if kind == "matched":
        kind = cohort_features.MATCHED_CONTROLS
    return kind


def parse_feature_mask(text: str) -> tuple[bool, ...]:
    """Parse "1-10" or "1,3,11" style selections into a length-11 mask."""
    mask = [False] * N_FEATURES
    for token in text.split(","):
        token = token.strip()
        if not token:
            continue
        lo, _, hi = token.partition("-")
        try:
            start = int(lo)
            stop = int(hi) if hi else start
        except ValueError:
            raise ValidationError(f"bad feature-mask token {token!r}")
        if not 1 <= start <= stop <= N_FEATURES:
            raise ValidationError(
                f"feature-mask token {token!r} out of range 1..{N_FEATURES}"
            )
        for i in range(start - 1, stop):
            mask[i] = True
    if not any(mask):
        raise ValidationError("feature mask selects nothing")
    return tuple(mask)


def _mask_text(mask: Sequence[bool] | None) -> str:
    if mask is None:
        return "all"
    return ",".join(str(i + 1) for i, used in enumerate(mask) if used)


def load_config(path: str | Path) -> PipelineConfig:
    """Read a JSON run configuration; relative paths resolve to its folder."""
    path = Path(path)
    with open(path, encoding="utf-8") as handle:
        raw = json.load(handle)
    if not isinstance(raw, dict):
        raise ValidationError(f"{path}: config must be a JSON object")
    base = path.parent
    known = {
        "output_dir", "generator", "inputs", "drugs", "comparator", "model",
        "feature_mask", "split", "threshold", "threads",
    }
    unknown = set(raw) - known
    if unknown:
        raise ValidationError(f"{path}: unknown config keys {sorted(unknown)}")

    generator = None
    if "generator" in raw:
        generator = _parse_generator(raw["generator"])
    inputs = None
    if "inputs" in raw:
        spec = dict(raw["inputs"])
        srs = tuple((int(year), str(base / p)) for year, p in spec.pop("srs", []))
        inputs = InputPaths(
            patient=str(base / spec.pop("patient")),
            medical=str(base / spec.pop("medical")),
            therapy=str(base / spec.pop("therapy")),
            srs=srs,
            side_effects=str(base / spec.pop("side_effects")),
            non_adverse_roots=str(base / spec.pop("non_adverse_roots")),
        )
        if spec:
            raise ValidationError(f"unknown inputs keys {sorted(spec)}")

    comparator = raw.get("comparator", "other_drugs")
    if isinstance(comparator, str):
        comparator = ComparatorStrategy(kind=comparator_kind(comparator))
    else:
        comparator = ComparatorStrategy(
            kind=comparator_kind(str(comparator.get("kind", "other_drugs"))),
            controls_per_case=int(comparator.get("controls_per_case", 2)),
        )

    mask = raw.get("feature_mask")
    if isinstance(mask, str):
        mask = parse_feature_mask(mask)
    elif mask is not None:
        mask = tuple(bool(v) for v in mask)

    split_raw = raw.get("split", {})
    split = SplitConfig(
        train_fraction=float(split_raw.get("train_fraction", 0.8)),
        folds=int(split_raw.get("folds", 10)),
        seed=int(split_raw.get("seed", 0)),
    )

    output_dir = raw.get("output_dir", "out")
    output_path = Path(output_dir)
    if not output_path.is_absolute():
        output_path = base / output_path

    return PipelineConfig(
        output_dir=str(output_path),
        generator=generator,
        inputs=inputs,
        drugs=tuple(raw.get("drugs", [])),
        comparator=comparator,
        model_kind=str(raw.get("model", learn.LOGISTIC)),
        feature_mask=mask,
        split=split,
        threshold=float(raw.get("threshold", 0.5)),
        threads=int(raw.get("threads", 1)),
    )


def _parse_generator(spec: dict) -> GeneratorConfig:
    spec = dict(spec)
    seed = int(spec.get("seed", 0))
    n_drugs = int(spec.get("n_drugs", 5))
    n_codes = int(spec.get("n_outcome_codes", 60))

    def planted(key, chooser):
        value = spec.pop(key, ())
        if isinstance(value, dict):
            probability = value.get("probability", 0.3)
            if isinstance(probability, list):
                probability = tuple(probability)
            return chooser(seed, n_drugs, n_codes, int(value.get("count", 0)), probability)
        return tuple(
            syndata.InjectedAdr(str(d), str(c), float(p)) for d, c, p in value
        )

    injected = planted("injected_adrs", syndata.choose_injected_adrs)
    confounders = planted("injected_confounders", syndata.choose_confounders)
    allowed = {
        "seed", "n_patients", "n_drugs", "n_outcome_codes", "background_event_rate",
        "srs_report_probability_adr", "srs_report_probability_noise",
        "srs_exposures_per_drug_year", "years",
    }
    unknown = set(spec) - allowed
    if unknown:
        raise ValidationError(f"unknown generator keys {sorted(unknown)}")
    kwargs = {key: spec[key] for key in allowed if key in spec}
    if "years" in kwargs:
        kwargs["years"] = tuple(int(y) for y in kwargs["years"])
    return GeneratorConfig(
        injected_adrs=injected, injected_confounders=confounders, **kwargs
    )


def apply_overrides(
    config: PipelineConfig,
    seed: int | None = None,
    threads: int | None = None,
    output: str | None = None,
    feature_mask: str | None = None,
    model: str | None = None,
    comparator: str | None = None,
) -> PipelineConfig:
    """Command-line overrides; the seed reseeds generation and learning."""
    if seed is not None:
        if config.generator is not None:
            config = replace(config, generator=replace(config.generator, seed=seed))
        config = replace(config, split=replace(config.split, seed=seed))
    if threads is not None:
        config = replace(config, threads=threads)
    if output is not None:
        config = replace(config, output_dir=output)
    if feature_mask is not None:
        config = replace(config, feature_mask=parse_feature_mask(feature_mask))
    if model is not None:
        config = replace(config, model_kind=model)
    if comparator is not None:
        config = replace(
            config, comparator=ComparatorStrategy(kind=comparator_kind(comparator))
        )
    return config


def _stage(name: str, fn):
    try:
        return fn()
    except AdrMineError as exc:
        raise StageError(name, exc) from exc


@dataclass
class World:
    """Loaded and filtered inputs shared by the mining stages."""

    dataset: CohortDataset
    filtered: CohortDataset
    corpus: SrsCorpus
    labels: LabelSource
    index: CohortIndex
    truth: GroundTruth | None = None


def build_world(config: PipelineConfig, write: bool = True) -> World:
    """Generate or load the inputs, then apply the registration filter."""

    def generate():
        dataset, truth = syndata.generate_cohort(config.generator)
        corpus = syndata.generate_srs(config.generator, truth)
        if write:
            data_dir = Path(config.output_dir) / "data"
            ingest.save_cohort(
                dataset,
                data_dir / "patient.csv",
                data_dir / "medical.csv",
                data_dir / "therapy.csv",
            )
            ingest.save_srs(corpus, data_dir)
            ingest.save_labels(
                syndata.side_effect_rows(truth),
                sorted(truth.non_adverse_roots),
                data_dir / "side_effects.csv",
                data_dir / "non_adverse_roots.csv",
            )
        labels = LabelSource(
            known_side_effects=_se_mapping(syndata.side_effect_rows(truth)),
            non_adverse_roots=frozenset(
                OutcomeCode(code=c) for c in truth.non_adverse_roots
            ),
        )
        return dataset, corpus, labels, truth

    def load():
        paths = config.inputs
        dataset = ingest.load_cohort(paths.patient, paths.medical, paths.therapy)
        corpus = ingest.load_srs(paths.srs)
        labels = ingest.load_labels(paths.side_effects, paths.non_adverse_roots)
        return dataset, corpus, labels, None

    dataset, corpus, labels, truth = _stage(
        "generate" if config.generator else "load", generate if config.generator else load
    )
    filtered = _stage("ingest", lambda: ingest.apply_registration_filter(dataset))
    return World(
        dataset=dataset,
        filtered=filtered,
        corpus=corpus,
        labels=labels,
        index=CohortIndex(filtered),
        truth=truth,
    )


def _se_mapping(rows):
    mapping: dict[str, set[str]] = {}
    for drug, desc in rows:
        mapping.setdefault(ingest.canonical_term(drug), set()).add(
            ingest.canonical_term(desc)
        )
    return {drug: frozenset(descs) for drug, descs in mapping.items()}


def mine_pairs(config: PipelineConfig, world: World, write: bool = True) -> list[DrugEventPair]:
    """Candidate generation, temporal filtering and labeling."""

    def run():
        candidates = pairs_mod.generate_candidates(
            world.filtered,
            drugs=config.drugs or None,
            index=world.index,
            threads=config.threads,
        )
        kept = pairs_mod.filter_candidates(candidates)
        labeled = pairs_mod.label_pairs(kept, world.labels)
        log.info(
            "mined %d candidates, %d past the temporal filter, %d labeled",
            len(candidates), len(kept), len(labeled),
        )
        return labeled

    labeled = _stage("pairs", run)
    if write:
        pairs_mod.save_pairs(labeled, Path(config.output_dir) / "pairs.csv")
    return labeled


def featurize_pairs(
    config: PipelineConfig,
    world: World,
    labeled: Sequence[DrugEventPair],
    write: bool = True,
) -> list[DrugEventPair]:
    def run():
        return cohort_features.extract_features(
            world.filtered,
            labeled,
            strategy=config.comparator,
            corpus=world.corpus,
            index=world.index,
            threads=config.threads,
        )

    feats = _stage("features", run)
    if write:
        cohort_features.save_features(feats, Path(config.output_dir) / "features.csv")
    return feats


def consistency_distribution(
    featurized: Sequence[DrugEventPair],
) -> dict[int, dict[int, int]]:
    """Counts of the consistency component per label: {label: {value: n}}."""
    out: dict[int, dict[int, int]] = {}
    for pair in featurized:
        if pair.features is None:
            continue
        value = int(pair.features[-1])
        per_label = out.setdefault(pair.label, {})
        per_label[value] = per_label.get(value, 0) + 1
    return out


def format_consistency_distribution(distribution: dict[int, dict[int, int]]) -> str:
    labels = sorted(distribution)
    values = sorted({v for counts in distribution.values() for v in counts})
    lines = ["consistency distribution (rows: years with positive signal):"]
    header = "  years  " + "  ".join(f"label={lab}" for lab in labels)
    lines.append(header)
    for value in values:
        row = f"  {value:>5}  " + "  ".join(
            f"{distribution.get(lab, {}).get(value, 0):>7}" for lab in labels
        )
        lines.append(row)
    return "\n".join(lines)


_NO_CONSISTENCY_MASK = tuple([True] * (N_FEATURES - 1) + [False])


@dataclass
class PipelineResult:
    config: PipelineConfig
    n_candidates_labeled: int
    features: list[DrugEventPair]
    train_keys: list[tuple[str, str]]
    val_keys: list[tuple[str, str]]
    model: AdrClassifier
    report: EvaluationReport
    distribution: dict[int, dict[int, int]]
    ablation: DelongResult | None
    report_text: str
    paths: dict[str, Path]


def run_pipeline(config: PipelineConfig) -> PipelineResult:
    """Run every stage and write all artifacts under the output directory."""
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    world = build_world(config)
    labeled = mine_pairs(config, world)
    feats = featurize_pairs(config, world, labeled)

    def train_stage():
        X, y, keys = learn.feature_matrix(feats)
        train_idx, val_idx = learn.split_data(X, y, config.split)
        model = learn.train(
            X[train_idx], y[train_idx],
            model_kind=config.model_kind,
            feature_mask=config.feature_mask,
            config=config.split,
        )
        return X, y, keys, train_idx, val_idx, model

    X, y, keys, train_idx, val_idx, model = _stage("train", train_stage)
    learn.save_model(model, out / "model.pkl")

    def evaluate_stage():
        val_scores = learn.score(model, X[val_idx])
        report = evaluation.evaluate_scores(val_scores, y[val_idx], config.threshold)
        evaluation.save_scores(
            (
                (keys[i][0], keys[i][1], int(y[i]), float(s))
                for i, s in zip(val_idx, val_scores)
            ),
            out / "scores.csv",
        )
        evaluation.save_roc(report.roc, out / "roc.csv")

        ablation = None
        mask = config.feature_mask
        uses_consistency = mask is None or mask[-1]
        wide_enough = mask is None or sum(mask) > 1
        if uses_consistency and wide_enough:
            reduced = (
                _NO_CONSISTENCY_MASK
                if mask is None
                else tuple(list(mask[:-1]) + [False])
            )
            reduced_model = learn.train(
                X[train_idx], y[train_idx],
                model_kind=config.model_kind,
                feature_mask=reduced,
                config=config.split,
            )
            ablation = evaluation.delong_compare(
                val_scores, learn.score(reduced_model, X[val_idx]), y[val_idx]
            )
        return report, ablation, val_scores

    report, ablation, val_scores = _stage("evaluate", evaluate_stage)
    distribution = consistency_distribution(feats)
    text = format_report(config, feats, train_idx, val_idx, model, report, ablation,
                         distribution)
    (out / "report.txt").write_text(text, encoding="utf-8")

    return PipelineResult(
        config=config,
        n_candidates_labeled=len(labeled),
        features=feats,
        train_keys=[keys[i] for i in train_idx],
        val_keys=[keys[i] for i in val_idx],
        model=model,
        report=report,
        distribution=distribution,
        ablation=ablation,
        report_text=text,
        paths={
            "pairs": out / "pairs.csv",
            "features": out / "features.csv",
            "model": out / "model.pkl",
            "scores": out / "scores.csv",
            "roc": out / "roc.csv",
            "report": out / "report.txt",
        },
    )


def format_report(config, feats, train_idx, val_idx, model, report, ablation,
                  distribution) -> str:
    n_pos = sum(1 for p in feats if p.label == 1)
    lines = [
        f"examples: {len(feats)} ({n_pos} positive, {len(feats) - n_pos} negative)",
        f"train/validation: {len(train_idx)}/{len(val_idx)}",
        (
            f"model: {config.model_kind} (mask={_mask_text(config.feature_mask)}, "
            f"folds={model.cv_folds_}, seed={config.split.seed}) "
            f"best={model.best_params_} cv_auc={model.cv_auc_:.4f}"
        ),
        (
            f"validation at threshold {report.threshold:.2f}: "
            f"tp={report.tp} fp={report.fp} tn={report.tn} fn={report.fn}"
        ),
        f"sensitivity: {report.sensitivity:.4f}  specificity: {report.specificity:.4f}",
        f"auc: {report.auc:.4f}  partial_auc[fpr<=0.2]: {report.partial_auc:.4f}",
    ]
    if ablation is not None:
        lines.append(
            f"consistency ablation: auc_with={ablation.auc_a:.4f} "
            f"auc_without={ablation.auc_b:.4f} p={ablation.p_value:.3g}"
        )
    lines.append(format_consistency_distribution(distribution))
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class MaskComparison:
    """Validation metrics for two feature masks trained on the same split."""

    mask_a: tuple[bool, ...]
    mask_b: tuple[bool, ...]
    n_train: int
    n_val: int
    auc_a: float
    auc_b: float
    partial_auc_a: float
    partial_auc_b: float
    delong: DelongResult


def compare_masks(
    config: PipelineConfig,
    mask_a: tuple[bool, ...] | None = None,
    mask_b: tuple[bool, ...] | None = None,
) -> MaskComparison:
    """Train the same model under two masks and compare validation AUCs.

    Defaults compare the full vector against everything but the
    consistency component.
    """
    mask_a = tuple(mask_a) if mask_a is not None else tuple([True] * N_FEATURES)
    mask_b = tuple(mask_b) if mask_b is not None else _NO_CONSISTENCY_MASK
    world = build_world(config, write=False)
    labeled = mine_pairs(config, world, write=False)
    feats = featurize_pairs(config, world, labeled, write=False)

    def run():
        X, y, _ = learn.feature_matrix(feats)
        train_idx, val_idx = learn.split_data(X, y, config.split)
        scores = []
        for mask in (mask_a, mask_b):
            model = learn.train(
                X[train_idx], y[train_idx],
                model_kind=config.model_kind, feature_mask=mask, config=config.split,
            )
            scores.append(learn.score(model, X[val_idx]))
        y_val = y[val_idx]
        return MaskComparison(
            mask_a=mask_a,
            mask_b=mask_b,
            n_train=len(train_idx),
            n_val=len(val_idx),
            auc_a=evaluation.auc(scores[0], y_val),
            auc_b=evaluation.auc(scores[1], y_val),
            partial_auc_a=evaluation.partial_auc(scores[0], y_val),
            partial_auc_b=evaluation.partial_auc(scores[1], y_val),
            delong=evaluation.delong_compare(scores[0], scores[1], y_val),
        )

    return _stage("compare", run)


def format_mask_comparison(result: MaskComparison) -> str:
    return "\n".join(
        [
            f"examples: {result.n_train} train / {result.n_val} validation",
            f"mask A ({_mask_text(result.mask_a)}): auc={result.auc_a:.4f} "
            f"partial_auc={result.partial_auc_a:.4f}",
            f"mask B ({_mask_text(result.mask_b)}): auc={result.auc_b:.4f} "
            f"partial_auc={result.partial_auc_b:.4f}",
            f"paired difference: z={result.delong.z:.3f} p={result.delong.p_value:.3g}",
        ]
    ) + "\n"
