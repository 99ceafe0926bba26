"""Mining and classification of adverse-drug-reaction signals.

The package mines drug-outcome pairs from longitudinal health records,
derives causality-oriented features for each pair (including a
consistency signal from yearly spontaneous reports) and trains a binary
classifier to separate genuine adverse reactions from non-adverse
associations.
"""
from .cohort_features import (
    ComparatorStrategy,
    RiskSummary,
    extract_association,
    extract_experimentation,
    extract_features,
    extract_gradient,
    extract_specificity,
    extract_temporality,
    load_features,
    odds_ratio,
    risk,
    risk_difference,
    risk_ratio,
    save_features,
    select_matched_controls,
)
from .domain import (
    CohortDataset,
    MedicalRecord,
    OutcomeCode,
    Patient,
    PrescriptionRecord,
    code_level,
    is_descendant,
    is_parent,
)
from .errors import (
    AdrMineError,
    FeatureExtractionError,
    ParseError,
    StageError,
    ValidationError,
)
from .evaluation import (
    DelongResult,
    EvaluationReport,
    RocCurve,
    auc,
    confusion,
    delong_compare,
    evaluate_scores,
    partial_auc,
    roc_curve,
)
from .ingest import (
    LabelSource,
    SrsCorpus,
    SrsReport,
    apply_registration_filter,
    load_cohort,
    load_labels,
    load_srs,
    match_description,
    save_cohort,
    save_labels,
    save_srs,
)
from .learn import (
    AdrClassifier,
    SplitConfig,
    feature_matrix,
    load_model,
    save_model,
    score,
    split_data,
    train,
)
from .pairs import (
    DrugEventPair,
    filter_candidates,
    generate_candidates,
    label_pairs,
    load_pairs,
    save_pairs,
    temporal_counts,
)
from .pipeline import (
    InputPaths,
    MaskComparison,
    PipelineConfig,
    PipelineResult,
    compare_masks,
    load_config,
    parse_feature_mask,
    run_pipeline,
)
from .srs_features import (
    ContingencyTable,
    attach_consistency,
    build_contingency,
    consistency_feature,
    yearly_risk_difference,
)
from .syndata import (
    CodeUniverse,
    GeneratorConfig,
    GroundTruth,
    InjectedAdr,
    build_code_universe,
    choose_confounders,
    choose_injected_adrs,
    generate_cohort,
    generate_srs,
)
from .timelines import CohortIndex

__version__ = "0.1.0"
