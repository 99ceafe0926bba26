"""Core record types shared by the whole pipeline, plus the hierarchical
outcome-code algebra (level, parent, descendant).

Outcome codes are 5-character clinical event codes with a prefix structure:
the leading characters are alphanumeric and the remainder is padded with
dots, e.g. ``A....`` (level 1) is the ancestor of ``A1...`` (level 2) which
is the ancestor of ``A11..`` (level 3). Codes are case-sensitive
identifiers; only free-text descriptions are matched case-insensitively
(see :func:`adrmine.ingest.match_description`).
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from datetime import date

from .errors import ValidationError

CODE_LENGTH = 5

# Alphanumeric prefix, dots only after the last non-dot character.
_CODE_RE = re.compile(r"^[0-9A-Za-z]+\.*$")

GENDERS = ("male", "female")


def validate_code(code: str) -> str:
    """Return ``code`` unchanged if it is a well-formed outcome code.

    Raises ValidationError for a wrong length, characters outside
    [0-9A-Za-z.], an all-dot code, or a dot before a non-dot character.
    """
    if not isinstance(code, str) or len(code) != CODE_LENGTH:
        raise ValidationError(f"outcome code must be exactly {CODE_LENGTH} characters: {code!r}")
    if not _CODE_RE.match(code):
        raise ValidationError(f"malformed outcome code: {code!r}")
    return code


@dataclass(frozen=True)
class OutcomeCode:
    """A hierarchical clinical event code and its free-text description."""

    code: str
    description: str = ""

    def __post_init__(self):
        validate_code(self.code)

    @property
    def level(self) -> int:
        return code_level(self)


@dataclass(frozen=True)
class Patient:
    patient_id: str
    year_of_birth: int
    gender: str
    practice_id: str
    registration_date: date

    def __post_init__(self):
        if self.gender not in GENDERS:
            raise ValidationError(f"gender must be one of {GENDERS}: {self.gender!r}")
        if self.year_of_birth > self.registration_date.year:
            raise ValidationError(
                f"patient {self.patient_id!r}: year_of_birth {self.year_of_birth} "
                f"is after registration {self.registration_date.isoformat()}"
            )


@dataclass(frozen=True)
class MedicalRecord:
    """A coded clinical event. Pre-registration dates are allowed here and
    removed later by the registration filter."""

    patient_id: str
    code: OutcomeCode
    date: date


@dataclass(frozen=True)
class PrescriptionRecord:
    patient_id: str
    drug_name: str
    drug_family: str
    dosage: float
    date: date

    def __post_init__(self):
        if self.dosage < 0:
            raise ValidationError(f"dosage must be nonnegative: {self.dosage}")


@dataclass(frozen=True)
class CohortDataset:
    """The three longitudinal tables: patients, medical events, prescriptions."""

    patients: tuple[Patient, ...]
    medical: tuple[MedicalRecord, ...]
    therapy: tuple[PrescriptionRecord, ...]

    def __post_init__(self):
        known = {p.patient_id for p in self.patients}
        if len(known) != len(self.patients):
            raise ValidationError("duplicate patient_id in patients table")
        for rec in self.medical:
            if rec.patient_id not in known:
                raise ValidationError(f"medical record references unknown patient {rec.patient_id!r}")
        for rec in self.therapy:
            if rec.patient_id not in known:
                raise ValidationError(f"therapy record references unknown patient {rec.patient_id!r}")

    def patient_by_id(self) -> dict[str, Patient]:
        return {p.patient_id: p for p in self.patients}


def code_level(code: OutcomeCode | str) -> int:
    """Level of a code: the 1-based index of its last non-dot character."""
    text = code.code if isinstance(code, OutcomeCode) else validate_code(code)
    return len(text.rstrip("."))


def _as_text(code: OutcomeCode | str) -> str:
    return code.code if isinstance(code, OutcomeCode) else validate_code(code)


def is_parent(parent: OutcomeCode | str, child: OutcomeCode | str) -> bool:
    """True iff ``parent`` sits exactly one level above ``child`` on the
    same branch (prefix agreement up to the parent's level)."""
    p, c = _as_text(parent), _as_text(child)
    lp = code_level(p)
    return code_level(c) == lp + 1 and p[:lp] == c[:lp]


def is_descendant(ancestor: OutcomeCode | str, code: OutcomeCode | str) -> bool:
    """True iff ``code`` is a strict descendant of ``ancestor`` (any number
    of levels down). A code is never a descendant of itself."""
    a, c = _as_text(ancestor), _as_text(code)
    la = code_level(a)
    return code_level(c) > la and a[:la] == c[:la]
