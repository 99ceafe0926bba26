"""Loading, validation and persistence of cohort, report and label files.

File formats (CSV, headers required, dates ISO-8601):

* ``patient.csv``: patient_id, year_of_birth, gender, practice_id,
  registration_date
* ``medical.csv``: patient_id, code, description, date
* ``therapy.csv``: patient_id, drug_name, drug_family, dosage, date
* ``srs_<year>.csv``: report_id, drug_name, outcome_description
* ``side_effects.csv``: drug_name, outcome_description
* ``non_adverse_roots.csv``: code

Parse failures carry file, line and column so bad rows can be located;
line 1 is the header row.
"""
from __future__ import annotations

import csv
import datetime as dt
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from pathlib import Path

from .domain import (
    CohortDataset,
    MedicalRecord,
    OutcomeCode,
    Patient,
    PrescriptionRecord,
    is_descendant,
)
from .errors import ParseError, ValidationError

REGISTRATION_RUN_IN_DAYS = 365

PATIENT_HEADER = ["patient_id", "year_of_birth", "gender", "practice_id", "registration_date"]
MEDICAL_HEADER = ["patient_id", "code", "description", "date"]
THERAPY_HEADER = ["patient_id", "drug_name", "drug_family", "dosage", "date"]
SRS_HEADER = ["report_id", "drug_name", "outcome_description"]
SIDE_EFFECTS_HEADER = ["drug_name", "outcome_description"]
ROOTS_HEADER = ["code"]


def canonical_term(text: str) -> str:
    """Canonical form used for vocabulary matching: trimmed and casefolded."""
    return text.strip().casefold()


def match_description(a: str, b: str) -> bool:
    """Exact equality of descriptions up to surrounding whitespace and case.

    Substring or token overlap is not a match: "CO Nausea" does not match
    "Nausea".
    """
    return canonical_term(a) == canonical_term(b)


@dataclass(frozen=True)
class SrsReport:
    """One spontaneous report: a drug name and an outcome description."""

    report_id: str
    year: int
    drug_name: str
    outcome_description: str

    def __post_init__(self):
        if not self.report_id.strip():
            raise ValidationError("report_id must be non-empty")
        if not self.drug_name.strip():
            raise ValidationError(f"report {self.report_id!r}: drug_name must be non-empty")
        if not self.outcome_description.strip():
            raise ValidationError(
                f"report {self.report_id!r}: outcome_description must be non-empty"
            )


@dataclass(frozen=True)
class SrsCorpus:
    """Spontaneous reports grouped by calendar year."""

    by_year: Mapping[int, tuple[SrsReport, ...]] = field(default_factory=dict)

    def __post_init__(self):
        for year, reports in self.by_year.items():
            for rep in reports:
                if rep.year != year:
                    raise ValidationError(
                        f"report {rep.report_id!r} has year {rep.year}, filed under {year}"
                    )

    @property
    def years(self) -> tuple[int, ...]:
        return tuple(sorted(self.by_year))

    def reports(self, year: int) -> tuple[SrsReport, ...]:
        return self.by_year.get(year, ())


@dataclass(frozen=True)
class LabelSource:
    """Reference labels: known side effects and non-adverse code roots.

    ``known_side_effects`` maps a canonical drug name to the canonical
    outcome descriptions listed for it.
    """

    known_side_effects: Mapping[str, frozenset[str]] = field(default_factory=dict)
    non_adverse_roots: frozenset[OutcomeCode] = frozenset()

    def is_known_side_effect(self, drug_name: str, description: str) -> bool:
        listed = self.known_side_effects.get(canonical_term(drug_name))
        return listed is not None and canonical_term(description) in listed

    def is_non_adverse(self, code: OutcomeCode | str) -> bool:
        """True iff the code is a strict descendant of a non-adverse root."""
        return any(is_descendant(root, code) for root in self.non_adverse_roots)


def _read_rows(path: str | Path, header: list[str]):
    path = Path(path)
    try:
        handle = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise ParseError(str(path), 0, f"cannot open file: {exc}") from exc
    with handle:
        reader = csv.reader(handle)
        try:
            first = next(reader)
        except StopIteration:
            raise ParseError(str(path), 1, f"missing header row, expected {','.join(header)}")
        if first != header:
            raise ParseError(
                str(path), 1, f"expected header {','.join(header)}, got {','.join(first)}"
            )
        rows = []
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ParseError(
                    str(path), line_no, f"expected {len(header)} fields, got {len(row)}"
                )
            rows.append((line_no, row))
    return rows


def _parse_date(path: Path | str, line_no: int, column: str, text: str) -> dt.date:
    try:
        return dt.date.fromisoformat(text.strip())
    except ValueError:
        raise ParseError(str(path), line_no, f"invalid ISO date {text!r}", column=column)


def _parse_int(path, line_no, column, text) -> int:
    try:
        return int(text.strip())
    except ValueError:
        raise ParseError(str(path), line_no, f"invalid integer {text!r}", column=column)


def _parse_float(path, line_no, column, text) -> float:
    try:
        return float(text.strip())
    except ValueError:
        raise ParseError(str(path), line_no, f"invalid number {text!r}", column=column)


def load_cohort(
    patient_path: str | Path, medical_path: str | Path, therapy_path: str | Path
) -> CohortDataset:
    """Load and validate the three cohort tables.

    Raises ParseError on malformed rows and on medical or therapy rows
    naming an unknown patient.
    """
    patients = []
    seen_ids: set[str] = set()
    for line_no, row in _read_rows(patient_path, PATIENT_HEADER):
        pid, yob, gender, practice, reg = row
        if pid in seen_ids:
            raise ParseError(str(patient_path), line_no, f"duplicate patient_id {pid!r}")
        seen_ids.add(pid)
        try:
            patients.append(
                Patient(
                    patient_id=pid,
                    year_of_birth=_parse_int(patient_path, line_no, "year_of_birth", yob),
                    gender=gender.strip(),
                    practice_id=practice.strip(),
                    registration_date=_parse_date(
                        patient_path, line_no, "registration_date", reg
                    ),
                )
            )
        except ValidationError as exc:
            raise ParseError(str(patient_path), line_no, str(exc)) from exc

    medical = []
    for line_no, row in _read_rows(medical_path, MEDICAL_HEADER):
        pid, code, description, date_text = row
        if pid not in seen_ids:
            raise ParseError(
                str(medical_path), line_no, f"unknown patient_id {pid!r}", column="patient_id"
            )
        try:
            outcome = OutcomeCode(code=code.strip(), description=description.strip())
        except ValidationError as exc:
            raise ParseError(str(medical_path), line_no, str(exc), column="code") from exc
        medical.append(
            MedicalRecord(
                patient_id=pid,
                code=outcome,
                date=_parse_date(medical_path, line_no, "date", date_text),
            )
        )

    therapy = []
    for line_no, row in _read_rows(therapy_path, THERAPY_HEADER):
        pid, drug, family, dosage, date_text = row
        if pid not in seen_ids:
            raise ParseError(
                str(therapy_path), line_no, f"unknown patient_id {pid!r}", column="patient_id"
            )
        try:
            therapy.append(
                PrescriptionRecord(
                    patient_id=pid,
                    drug_name=drug.strip(),
                    drug_family=family.strip(),
                    dosage=_parse_float(therapy_path, line_no, "dosage", dosage),
                    date=_parse_date(therapy_path, line_no, "date", date_text),
                )
            )
        except ValidationError as exc:
            raise ParseError(str(therapy_path), line_no, str(exc)) from exc

    return CohortDataset(patients=tuple(patients), medical=tuple(medical), therapy=tuple(therapy))


def apply_registration_filter(dataset: CohortDataset) -> CohortDataset:
    """Drop medical and therapy records from each patient's first year.

    A record is kept iff its date is at least 365 days after the patient's
    registration date (day 365 itself is kept). Events recorded during the
    run-in period often predate the registration and would distort
    before/after comparisons.
    """
    reg = {p.patient_id: p.registration_date.toordinal() for p in dataset.patients}

    def kept(record) -> bool:
        return record.date.toordinal() - reg[record.patient_id] >= REGISTRATION_RUN_IN_DAYS

    return CohortDataset(
        patients=dataset.patients,
        medical=tuple(r for r in dataset.medical if kept(r)),
        therapy=tuple(r for r in dataset.therapy if kept(r)),
    )


def load_srs(paths: Sequence[tuple[int, str | Path]]) -> SrsCorpus:
    """Load spontaneous-report files, one per year."""
    by_year: dict[int, tuple[SrsReport, ...]] = {}
    for year, path in paths:
        if year in by_year:
            raise ValidationError(f"duplicate report file for year {year}")
        reports = []
        for line_no, row in _read_rows(path, SRS_HEADER):
            report_id, drug, description = row
            try:
                reports.append(
                    SrsReport(
                        report_id=report_id.strip(),
                        year=year,
                        drug_name=drug.strip(),
                        outcome_description=description.strip(),
                    )
                )
            except ValidationError as exc:
                raise ParseError(str(path), line_no, str(exc)) from exc
        by_year[year] = tuple(reports)
    return SrsCorpus(by_year=by_year)


def load_labels(
    side_effects_path: str | Path, non_adverse_roots_path: str | Path
) -> LabelSource:
    """Load known side-effect listings and non-adverse code roots."""
    listed: dict[str, set[str]] = {}
    for line_no, row in _read_rows(side_effects_path, SIDE_EFFECTS_HEADER):
        drug, description = row
        if not drug.strip():
            raise ParseError(
                str(side_effects_path), line_no, "empty drug_name", column="drug_name"
            )
        if not description.strip():
            raise ParseError(
                str(side_effects_path),
                line_no,
                "empty outcome_description",
                column="outcome_description",
            )
        listed.setdefault(canonical_term(drug), set()).add(canonical_term(description))

    roots = set()
    for line_no, row in _read_rows(non_adverse_roots_path, ROOTS_HEADER):
        try:
            roots.add(OutcomeCode(code=row[0].strip()))
        except ValidationError as exc:
            raise ParseError(str(non_adverse_roots_path), line_no, str(exc), column="code") from exc

    return LabelSource(
        known_side_effects={drug: frozenset(descs) for drug, descs in listed.items()},
        non_adverse_roots=frozenset(roots),
    )


def _write_csv(path: str | Path, header: list[str], rows: Iterable[list[str]]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def save_cohort(
    dataset: CohortDataset,
    patient_path: str | Path,
    medical_path: str | Path,
    therapy_path: str | Path,
) -> None:
    """Write the three cohort tables in canonical sorted order."""
    _write_csv(
        patient_path,
        PATIENT_HEADER,
        (
            [p.patient_id, str(p.year_of_birth), p.gender, p.practice_id,
             p.registration_date.isoformat()]
            for p in sorted(dataset.patients, key=lambda p: p.patient_id)
        ),
    )
    _write_csv(
        medical_path,
        MEDICAL_HEADER,
        (
            [r.patient_id, r.code.code, r.code.description, r.date.isoformat()]
            for r in sorted(
                dataset.medical, key=lambda r: (r.patient_id, r.date, r.code.code)
            )
        ),
    )
    _write_csv(
        therapy_path,
        THERAPY_HEADER,
        (
            [r.patient_id, r.drug_name, r.drug_family, repr(r.dosage), r.date.isoformat()]
            for r in sorted(
                dataset.therapy,
                key=lambda r: (r.patient_id, r.date, r.drug_name, r.dosage),
            )
        ),
    )


def save_srs(corpus: SrsCorpus, directory: str | Path) -> list[tuple[int, Path]]:
    """Write one ``srs_<year>.csv`` per year; returns (year, path) pairs."""
    directory = Path(directory)
    out = []
    for year in corpus.years:
        path = directory / f"srs_{year}.csv"
        _write_csv(
            path,
            SRS_HEADER,
            ([r.report_id, r.drug_name, r.outcome_description] for r in corpus.reports(year)),
        )
        out.append((year, path))
    return out


def save_labels(
    side_effects: Iterable[tuple[str, str]],
    non_adverse_roots: Iterable[str],
    side_effects_path: str | Path,
    non_adverse_roots_path: str | Path,
) -> None:
    _write_csv(
        side_effects_path,
        SIDE_EFFECTS_HEADER,
        ([drug, desc] for drug, desc in sorted(set(side_effects))),
    )
    _write_csv(
        non_adverse_roots_path, ROOTS_HEADER, ([code] for code in sorted(set(non_adverse_roots)))
    )
