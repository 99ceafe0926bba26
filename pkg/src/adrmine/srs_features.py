"""Consistency of a drug-outcome association across yearly report corpora.

Each year of spontaneous reports yields a 2x2 contingency table for the
pair: reports naming the drug with and without the outcome, and reports
of other drugs with and without it. The yearly signal is the risk
difference between those two report groups, treated as absent for years
in which no report names both the drug and the outcome. The consistency
feature (x11) counts the years with a strictly positive signal.

Report fields are matched like vocabulary terms: trimmed and
case-insensitive, no substring matching.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, replace
from collections.abc import Iterable, Sequence

from .errors import ValidationError
from .ingest import SrsCorpus, SrsReport, canonical_term
from .pairs import DrugEventPair


@dataclass(frozen=True)
class ContingencyTable:
    """Report counts for one (drug, outcome) pair in one year."""

    drug_with_outcome: int
    drug_without_outcome: int
    other_with_outcome: int
    other_without_outcome: int

    def __post_init__(self):
        for name in (
            "drug_with_outcome",
            "drug_without_outcome",
            "other_with_outcome",
            "other_without_outcome",
        ):
            if getattr(self, name) < 0:
                raise ValidationError(f"{name} must be non-negative")


def build_contingency(
    reports: Iterable[SrsReport], drug_name: str, outcome_description: str
) -> ContingencyTable:
    """Classify every report of one year against the pair."""
    drug_key = canonical_term(drug_name)
    outcome_key = canonical_term(outcome_description)
    a = b = c = d = 0
    for report in reports:
        names_drug = canonical_term(report.drug_name) == drug_key
        names_outcome = canonical_term(report.outcome_description) == outcome_key
        if names_drug:
            if names_outcome:
                a += 1
            else:
                b += 1
        elif names_outcome:
            c += 1
        else:
            d += 1
    return ContingencyTable(a, b, c, d)


def yearly_risk_difference(table: ContingencyTable) -> float | None:
    """Reporting-rate difference for one year, or None when absent.

    The signal is absent when no report names both the drug and the
    outcome. The rate among reports of other drugs is zero when there are
    no such reports.
    """
    a, b = table.drug_with_outcome, table.drug_without_outcome
    c, d = table.other_with_outcome, table.other_without_outcome
    if a == 0:
        return None
    other = c / (c + d) if c + d else 0.0
    return a / (a + b) - other


def consistency_feature(values: Sequence[float | None]) -> int:
    """Number of years with a strictly positive signal."""
    return sum(1 for v in values if v is not None and v > 0.0)


def yearly_values(
    corpus: SrsCorpus, drug_name: str, outcome_description: str
) -> list[tuple[int, float | None]]:
    """(year, signal) for every year of the corpus, in year order."""
    return [
        (year, yearly_risk_difference(build_contingency(corpus.reports(year), drug_name,
                                                        outcome_description)))
        for year in corpus.years
    ]


class _YearCounters:
    """Per-year counts keyed by canonical terms, shared across pairs."""

    def __init__(self, reports: Iterable[SrsReport]):
        self.pair_count: Counter[tuple[str, str]] = Counter()
        self.drug_count: Counter[str] = Counter()
        self.outcome_count: Counter[str] = Counter()
        self.total = 0
        for report in reports:
            drug = canonical_term(report.drug_name)
            outcome = canonical_term(report.outcome_description)
            self.pair_count[(drug, outcome)] += 1
            self.drug_count[drug] += 1
            self.outcome_count[outcome] += 1
            self.total += 1

    def table(self, drug_key: str, outcome_key: str) -> ContingencyTable:
        a = self.pair_count.get((drug_key, outcome_key), 0)
        b = self.drug_count.get(drug_key, 0) - a
        c = self.outcome_count.get(outcome_key, 0) - a
        return ContingencyTable(a, b, c, self.total - a - b - c)


def attach_consistency(
    pairs: Sequence[DrugEventPair], corpus: SrsCorpus
) -> list[DrugEventPair]:
    """Fill the consistency component of already-extracted feature vectors."""
    counters = [_YearCounters(corpus.reports(year)) for year in corpus.years]
    out = []
    for pair in pairs:
        if pair.features is None:
            raise ValidationError(
                f"pair {pair.drug_name}/{pair.outcome.code} has no feature vector; "
                "extract cohort features first"
            )
        drug_key = canonical_term(pair.drug_name)
        outcome_key = canonical_term(pair.outcome.description)
        values = [
            yearly_risk_difference(counter.table(drug_key, outcome_key))
            for counter in counters
        ]
        features = pair.features[:-1] + (float(consistency_feature(values)),)
        out.append(replace(pair, features=features))
    return out
