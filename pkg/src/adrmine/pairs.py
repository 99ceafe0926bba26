"""Mining of candidate drug-outcome pairs and their reference labels.

A candidate is a (drug, outcome code) pair for which at least three
distinct patients have the outcome recorded in the 30 days following
their first prescription of the drug. Candidates also carry counts over
all prescriptions of the drug: how many were followed by the outcome
within 30 days (count_after) and how many were preceded by it within 30
days (count_before). Pairs reported after exposure no more often than
before it are filtered out before labeling.
"""
from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from collections.abc import Iterable, Mapping, Sequence

from .domain import CohortDataset, OutcomeCode
from .errors import ParseError, ValidationError
from .ingest import LabelSource
from .timelines import CohortIndex, in_after_window, in_before_window

MIN_PATIENTS = 3
N_FEATURES = 11

LABEL_ADR = 1
LABEL_NON_ADVERSE = 0
LABEL_UNKNOWN = -1

PAIRS_HEADER = ["drug_name", "code", "count_after", "count_before", "label"]


@dataclass(frozen=True)
class DrugEventPair:
    """A mined drug-outcome pair with its temporal counts.

    ``features`` is filled by the feature-extraction stage and holds the
    11-component vector; ``label`` is 1 for a known side effect, 0 for a
    non-adverse outcome and -1 while unknown.
    """

    drug_name: str
    outcome: OutcomeCode
    count_after: int
    count_before: int
    label: int = LABEL_UNKNOWN
    features: tuple[float, ...] | None = None

    def __post_init__(self):
        if not self.drug_name:
            raise ValidationError("drug_name must be non-empty")
        if self.count_after < 0 or self.count_before < 0:
            raise ValidationError("temporal counts must be non-negative")
        if self.label not in (LABEL_ADR, LABEL_NON_ADVERSE, LABEL_UNKNOWN):
            raise ValidationError(f"invalid label {self.label!r}")
        if self.features is not None:
            object.__setattr__(self, "features", tuple(float(v) for v in self.features))
            if len(self.features) != N_FEATURES:
                raise ValidationError(
                    f"feature vector must have {N_FEATURES} components, got {len(self.features)}"
                )

    @property
    def key(self) -> tuple[str, str]:
        return (self.drug_name, self.outcome.code)


def _sort(pairs: Iterable[DrugEventPair]) -> list[DrugEventPair]:
    return sorted(pairs, key=lambda p: p.key)


def temporal_counts(
    dataset: CohortDataset,
    drug_name: str,
    outcome: OutcomeCode | str,
    index: CohortIndex | None = None,
) -> tuple[int, int]:
    """Counts over all prescriptions of the drug: (followed-by, preceded-by).

    A prescription on day d counts as followed by the outcome when the
    patient has an event of that code in (d, d+30], and as preceded when
    one falls in [d-30, d); day d itself belongs to neither window.
    """
    index = index or CohortIndex(dataset)
    code = outcome.code if isinstance(outcome, OutcomeCode) else outcome
    after = before = 0
    for day, pid, _ in index.scripts(drug_name):
        days = index.event_days(pid, code)
        if days:
            if in_after_window(days, day):
                after += 1
            if in_before_window(days, day):
                before += 1
    return after, before


def _candidates_for_drug(index: CohortIndex, drug: str) -> list[DrugEventPair]:
    patients_with_event: dict[str, set[str]] = {}
    for pid, (first_day, _) in index.first_rx.get(drug, {}).items():
        for code, days in index.codes_of(pid).items():
            if in_after_window(days, first_day):
                patients_with_event.setdefault(code, set()).add(pid)
    out = []
    for code in sorted(patients_with_event):
        if len(patients_with_event[code]) < MIN_PATIENTS:
            continue
        after, before = temporal_counts(index.dataset, drug, code, index=index)
        outcome = OutcomeCode(code=code, description=index.code_descriptions.get(code, ""))
        out.append(
            DrugEventPair(
                drug_name=drug, outcome=outcome, count_after=after, count_before=before
            )
        )
    return out


def generate_candidates(
    dataset: CohortDataset,
    drugs: Sequence[str] | None = None,
    index: CohortIndex | None = None,
    threads: int = 1,
) -> list[DrugEventPair]:
    """Mine candidate pairs from a registration-filtered cohort.

    A pair qualifies when at least three distinct patients have the
    outcome within 30 days after their first prescription of the drug.
    Results are sorted by (drug_name, code) and independent of ``threads``.
    """
    index = index or CohortIndex(dataset)
    drug_list = sorted(set(drugs)) if drugs is not None else index.drugs
    if threads > 1 and len(drug_list) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            per_drug = list(pool.map(lambda d: _candidates_for_drug(index, d), drug_list))
    else:
        per_drug = [_candidates_for_drug(index, d) for d in drug_list]
    return [pair for chunk in per_drug for pair in chunk]


def filter_candidates(pairs: Iterable[DrugEventPair]) -> list[DrugEventPair]:
    """Keep pairs reported after exposure more often than before it.

    The before count is floored at one so pairs never seen before
    exposure are kept whenever they occur at all afterwards.
    """
    return [p for p in pairs if p.count_after / max(p.count_before, 1) > 1.0]


def label_pairs(pairs: Iterable[DrugEventPair], labels: LabelSource) -> list[DrugEventPair]:
    """Attach reference labels, discarding pairs that receive neither.

    The non-adverse check runs first: an outcome descending from a
    non-adverse root is labeled 0 even if it is also listed as a side
    effect of the drug. Remaining pairs are labeled 1 when the outcome
    description matches a listed side effect of the drug, and dropped
    otherwise.
    """
    out = []
    for pair in pairs:
        if labels.is_non_adverse(pair.outcome):
            out.append(replace(pair, label=LABEL_NON_ADVERSE))
        elif labels.is_known_side_effect(pair.drug_name, pair.outcome.description):
            out.append(replace(pair, label=LABEL_ADR))
    return _sort(out)


def save_pairs(pairs: Iterable[DrugEventPair], path: str | Path) -> None:
    """Write pairs.csv sorted by (drug_name, code)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(PAIRS_HEADER)
        for pair in _sort(pairs):
            writer.writerow(
                [pair.drug_name, pair.outcome.code, str(pair.count_after),
                 str(pair.count_before), str(pair.label)]
            )


def load_pairs(
    path: str | Path, descriptions: Mapping[str, str] | None = None
) -> list[DrugEventPair]:
    """Read pairs.csv; ``descriptions`` restores outcome descriptions."""
    descriptions = descriptions or {}
    out = []
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header != PAIRS_HEADER:
            raise ParseError(str(path), 1, f"expected header {','.join(PAIRS_HEADER)}")
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(PAIRS_HEADER):
                raise ParseError(str(path), line_no, f"expected {len(PAIRS_HEADER)} fields")
            drug, code, after, before, label = row
            try:
                outcome = OutcomeCode(code=code, description=descriptions.get(code, ""))
                out.append(
                    DrugEventPair(
                        drug_name=drug,
                        outcome=outcome,
                        count_after=int(after),
                        count_before=int(before),
                        label=int(label),
                    )
                )
            except (ValidationError, ValueError) as exc:
                raise ParseError(str(path), line_no, str(exc)) from exc
    return _sort(out)
