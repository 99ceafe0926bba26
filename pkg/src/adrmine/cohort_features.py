"""Causality-oriented features computed from the cohort for each mined pair.

Each drug-outcome pair receives an 11-component vector; the first ten
components come from the longitudinal record and the eleventh from
spontaneous reports (see the companion module). Exposure is always taken
at each patient's first prescription of the drug, with the outcome
checked in the 30 days that follow.

x1  risk difference against the comparator group
x2  risk ratio, comparator events floored at one
x3  odds ratio, comparator events floored at one
x4  risk difference after removing prescriptions preceded within 365
    days by any same-family prescription
x5  ratio of prescriptions followed by the outcome to those preceded by
    it (before count floored at one)
x6  mean age of affected exposed over mean age of all exposed
x7  male-to-female ratio among affected over the same ratio among all
    exposed (female counts floored at one)
x8  hierarchy level of the outcome code
x9  mean first-prescription dosage of affected over that of all exposed
x10 fraction of re-exposed patients whose widely spaced (>30 days)
    prescriptions were each followed, and never preceded, by the outcome

Comparator groups: every patient at their first prescription of any
other drug, or per-case matched controls (same practice and gender,
nearest birth year).
"""
from __future__ import annotations

import csv
import datetime as dt
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from collections.abc import Iterable, Mapping, Sequence

from .domain import CohortDataset, code_level
from .errors import FeatureExtractionError, ParseError, ValidationError
from .ingest import SrsCorpus
from .pairs import N_FEATURES, DrugEventPair
from .timelines import CohortIndex, in_after_window, in_before_window

log = logging.getLogger(__name__)

FEATURE_NAMES = tuple(f"x{i}" for i in range(1, N_FEATURES + 1))
FEATURES_HEADER = ["drug_name", "code", *FEATURE_NAMES, "label"]

OTHER_DRUGS = "other_drugs"
MATCHED_CONTROLS = "matched_controls"


@dataclass(frozen=True)
class ComparatorStrategy:
    """How the unexposed comparison group is formed for a drug."""

    kind: str = OTHER_DRUGS
    controls_per_case: int = 2

    def __post_init__(self):
        if self.kind not in (OTHER_DRUGS, MATCHED_CONTROLS):
            raise ValidationError(f"unknown comparator kind {self.kind!r}")
        if self.controls_per_case < 1:
            raise ValidationError("controls_per_case must be positive")


@dataclass(frozen=True)
class RiskSummary:
    """2x2 exposure/outcome counts for one pair and comparator."""

    exposed_with_event: int
    exposed_total: int
    comparator_with_event: int
    comparator_total: int

    def __post_init__(self):
        if not 0 <= self.exposed_with_event <= self.exposed_total:
            raise ValidationError("exposed counts out of range")
        if not 0 <= self.comparator_with_event <= self.comparator_total:
            raise ValidationError("comparator counts out of range")


def risk(with_event: int, total: int) -> float:
    if total <= 0:
        raise ValidationError("risk needs a non-empty group")
    return with_event / total


def risk_difference(summary: RiskSummary) -> float:
    return risk(summary.exposed_with_event, summary.exposed_total) - risk(
        summary.comparator_with_event, summary.comparator_total
    )


def risk_ratio(summary: RiskSummary) -> float:
    """Exposed risk over comparator risk, comparator events floored at one."""
    floored = max(summary.comparator_with_event, 1)
    return risk(summary.exposed_with_event, summary.exposed_total) / risk(
        floored, summary.comparator_total
    )


def odds_ratio(summary: RiskSummary) -> float:
    """Exposed odds over comparator odds, comparator events floored at one.

    Raises when every exposed patient has the event (infinite exposed
    odds); returns 0.0 when flooring leaves the comparator with infinite
    odds instead.
    """
    e, te = summary.exposed_with_event, summary.exposed_total
    c = max(summary.comparator_with_event, 1)
    tc = summary.comparator_total
    if te <= 0 or tc <= 0:
        raise ValidationError("odds ratio needs non-empty groups")
    if e >= te:
        raise FeatureExtractionError(
            "every exposed patient has the outcome; exposed odds are infinite"
        )
    if c >= tc:
        return 0.0
    return (e / (te - e)) / (c / (tc - c))


def select_matched_controls(
    dataset: CohortDataset, case_patient_id: str, k: int = 2, index: CohortIndex | None = None
) -> list[str]:
    """The k same-practice, same-gender patients nearest in birth year."""
    index = index or CohortIndex(dataset)
    return list(index.matched_controls(case_patient_id, k))


class _DrugContext:
    """Per-drug exposure and comparator units, shared across a drug's pairs."""

    def __init__(self, index: CohortIndex, drug: str, strategy: ComparatorStrategy):
        self.index = index
        self.drug = drug
        self.exposed = [
            (pid, day, dosage)
            for pid, (day, dosage) in sorted(index.first_rx.get(drug, {}).items())
        ]
        self.comparator = self._comparator_units(index, self.exposed, strategy)

        filtered = index.family_filtered()
        self.filtered_index = filtered
        self.exposed_filtered = [
            (pid, day, dosage)
            for pid, (day, dosage) in sorted(filtered.first_rx.get(drug, {}).items())
        ]
        self.comparator_filtered = self._comparator_units(
            filtered, self.exposed_filtered, strategy
        )

        self.repeat_scripts = [
            (pid, index.script_days(pid, drug))
            for pid, _ in sorted(index.first_rx.get(drug, {}).items())
        ]

    def _comparator_units(self, index, exposed, strategy) -> list[tuple[str, int]]:
        if strategy.kind == OTHER_DRUGS:
            units = []
            for pid in sorted(index.patients):
                day = index.first_other_rx(pid, self.drug)
                if day is not None:
                    units.append((pid, day))
            return units
        units = []
        for pid, day, _ in exposed:
            for control in self.index.matched_controls(pid, strategy.controls_per_case):
                units.append((control, day))
        return units


def _event_count(index: CohortIndex, units: Iterable[tuple[str, int]], code: str) -> int:
    return sum(1 for pid, day in units if in_after_window(index.event_days(pid, code), day))


def _association(context: _DrugContext, code: str) -> tuple[float, float, float, float]:
    index = context.index
    if not context.exposed:
        raise FeatureExtractionError(f"no prescriptions of {context.drug!r}")
    if not context.comparator:
        raise FeatureExtractionError(f"empty comparator group for {context.drug!r}")
    summary = RiskSummary(
        exposed_with_event=_event_count(index, [(p, d) for p, d, _ in context.exposed], code),
        exposed_total=len(context.exposed),
        comparator_with_event=_event_count(index, context.comparator, code),
        comparator_total=len(context.comparator),
    )
    if not context.exposed_filtered:
        raise FeatureExtractionError(
            f"every prescription of {context.drug!r} follows a same-family prescription"
        )
    if not context.comparator_filtered:
        raise FeatureExtractionError(
            f"empty comparator group for {context.drug!r} after family filtering"
        )
    filtered_summary = RiskSummary(
        exposed_with_event=_event_count(
            index, [(p, d) for p, d, _ in context.exposed_filtered], code
        ),
        exposed_total=len(context.exposed_filtered),
        comparator_with_event=_event_count(index, context.comparator_filtered, code),
        comparator_total=len(context.comparator_filtered),
    )
    return (
        risk_difference(summary),
        risk_ratio(summary),
        odds_ratio(summary),
        risk_difference(filtered_summary),
    )


def extract_association(
    dataset: CohortDataset,
    pair: DrugEventPair,
    strategy: ComparatorStrategy = ComparatorStrategy(),
    index: CohortIndex | None = None,
) -> tuple[float, float, float, float]:
    """x1..x4 for one pair; raises FeatureExtractionError when undefined."""
    index = index or CohortIndex(dataset)
    return _association(_DrugContext(index, pair.drug_name, strategy), pair.outcome.code)


def extract_temporality(pair: DrugEventPair) -> float:
    """x5: prescriptions followed by the outcome over those preceded by it."""
    return pair.count_after / max(pair.count_before, 1)


def _affected(index, exposed, code):
    return [
        (pid, day, dosage)
        for pid, day, dosage in exposed
        if in_after_window(index.event_days(pid, code), day)
    ]


def _specificity(context: _DrugContext, code: str) -> tuple[float, float, float]:
    index = context.index
    if not context.exposed:
        raise FeatureExtractionError(f"no prescriptions of {context.drug!r}")
    affected = _affected(index, context.exposed, code)
    if not affected:
        raise FeatureExtractionError(
            f"no exposed patient has {code!r} after {context.drug!r}; "
            "group ratios are undefined"
        )

    def age(pid, day):
        return dt.date.fromordinal(day).year - index.patients[pid].year_of_birth

    mean_age_exposed = sum(age(p, d) for p, d, _ in context.exposed) / len(context.exposed)
    mean_age_affected = sum(age(p, d) for p, d, _ in affected) / len(affected)
    x6 = mean_age_affected / mean_age_exposed if mean_age_exposed else 1.0

    def gender_ratio(units):
        males = sum(1 for p, _, _ in units if index.patients[p].gender == "male")
        females = len(units) - males
        return males / max(females, 1)

    exposed_ratio = gender_ratio(context.exposed)
    x7 = gender_ratio(affected) / exposed_ratio if exposed_ratio else 1.0
    x8 = float(code_level(code))
    return x6, x7, x8


def extract_specificity(
    dataset: CohortDataset,
    pair: DrugEventPair,
    strategy: ComparatorStrategy = ComparatorStrategy(),
    index: CohortIndex | None = None,
) -> tuple[float, float, float]:
    """x6..x8: age ratio, gender-ratio ratio and outcome-code level."""
    index = index or CohortIndex(dataset)
    return _specificity(_DrugContext(index, pair.drug_name, strategy), pair.outcome.code)


def _gradient(context: _DrugContext, code: str) -> float:
    if not context.exposed:
        raise FeatureExtractionError(f"no prescriptions of {context.drug!r}")
    affected = _affected(context.index, context.exposed, code)
    if not affected:
        raise FeatureExtractionError(
            f"no exposed patient has {code!r} after {context.drug!r}"
        )
    mean_exposed = sum(dosage for _, _, dosage in context.exposed) / len(context.exposed)
    mean_affected = sum(dosage for _, _, dosage in affected) / len(affected)
    return mean_affected / mean_exposed if mean_exposed else 1.0


def extract_gradient(
    dataset: CohortDataset,
    pair: DrugEventPair,
    strategy: ComparatorStrategy = ComparatorStrategy(),
    index: CohortIndex | None = None,
) -> float:
    """x9: mean first-prescription dosage of affected over all exposed."""
    index = index or CohortIndex(dataset)
    return _gradient(_DrugContext(index, pair.drug_name, strategy), pair.outcome.code)


def _experimentation(context: _DrugContext, code: str) -> float:
    index = context.index
    rechallenged = 0
    positive = 0
    for pid, days in context.repeat_scripts:
        if not days or days[-1] - days[0] <= 30:
            continue
        rechallenged += 1
        events = index.event_days(pid, code)
        qualifying = [
            d
            for d in days
            if in_after_window(events, d) and not in_before_window(events, d)
        ]
        if qualifying and qualifying[-1] - qualifying[0] > 30:
            positive += 1
    return positive / rechallenged if rechallenged else 0.0


def extract_experimentation(
    dataset: CohortDataset,
    pair: DrugEventPair,
    strategy: ComparatorStrategy = ComparatorStrategy(),
    index: CohortIndex | None = None,
) -> float:
    """x10: outcome tracks repeated exposures.

    Denominator: patients with two prescriptions of the drug more than 30
    days apart. Numerator: those whose prescriptions followed by the
    outcome (and never preceded by it) are themselves more than 30 days
    apart. Returns 0.0 when nobody was re-exposed.
    """
    index = index or CohortIndex(dataset)
    return _experimentation(_DrugContext(index, pair.drug_name, strategy), pair.outcome.code)


def extract_features(
    dataset: CohortDataset,
    pairs: Sequence[DrugEventPair],
    strategy: ComparatorStrategy = ComparatorStrategy(),
    corpus: SrsCorpus | None = None,
    index: CohortIndex | None = None,
    threads: int = 1,
) -> list[DrugEventPair]:
    """Fill feature vectors for every pair, dropping undefinable ones.

    Pairs whose features cannot be computed (empty comparator, infinite
    odds and the like) are dropped with a logged warning. The consistency
    component is filled from ``corpus`` when given and left at zero
    otherwise. Output is sorted by (drug_name, code) and independent of
    ``threads``.
    """
    from .srs_features import attach_consistency

    index = index or CohortIndex(dataset)
    index.family_filtered()  # build once before any parallel work
    contexts = {
        drug: _DrugContext(index, drug, strategy)
        for drug in sorted({p.drug_name for p in pairs})
    }

    def featurize(pair: DrugEventPair) -> DrugEventPair | None:
        context = contexts[pair.drug_name]
        code = pair.outcome.code
        try:
            x1, x2, x3, x4 = _association(context, code)
            x5 = extract_temporality(pair)
            x6, x7, x8 = _specificity(context, code)
            x9 = _gradient(context, code)
            x10 = _experimentation(context, code)
        except FeatureExtractionError as exc:
            log.warning("dropping pair %s/%s: %s", pair.drug_name, code, exc)
            return None
        return replace(pair, features=(x1, x2, x3, x4, x5, x6, x7, x8, x9, x10, 0.0))

    if threads > 1 and len(pairs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(featurize, pairs))
    else:
        results = [featurize(p) for p in pairs]
    kept = sorted((p for p in results if p is not None), key=lambda p: p.key)
    if corpus is not None:
        kept = attach_consistency(kept, corpus)
    return kept


def save_features(pairs: Iterable[DrugEventPair], path: str | Path) -> None:
    """Write features.csv sorted by (drug_name, code); floats use repr."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(FEATURES_HEADER)
        for pair in sorted(pairs, key=lambda p: p.key):
            if pair.features is None:
                raise ValidationError(
                    f"pair {pair.drug_name}/{pair.outcome.code} has no feature vector"
                )
            writer.writerow(
                [pair.drug_name, pair.outcome.code]
                + [repr(v) for v in pair.features]
                + [str(pair.label)]
            )


def load_features(
    path: str | Path, descriptions: Mapping[str, str] | None = None
) -> list[DrugEventPair]:
    """Read features.csv back into pairs (temporal counts are not stored)."""
    from .domain import OutcomeCode

    descriptions = descriptions or {}
    out = []
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header != FEATURES_HEADER:
            raise ParseError(str(path), 1, f"expected header {','.join(FEATURES_HEADER)}")
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(FEATURES_HEADER):
                raise ParseError(str(path), line_no, f"expected {len(FEATURES_HEADER)} fields")
            drug, code, *rest = row
            try:
                features = tuple(float(v) for v in rest[:N_FEATURES])
                label = int(rest[N_FEATURES])
                out.append(
                    DrugEventPair(
                        drug_name=drug,
                        outcome=OutcomeCode(code=code, description=descriptions.get(code, "")),
                        count_after=0,
                        count_before=0,
                        label=label,
                        features=features,
                    )
                )
            except (ValidationError, ValueError) as exc:
                raise ParseError(str(path), line_no, str(exc)) from exc
    return sorted(out, key=lambda p: p.key)
