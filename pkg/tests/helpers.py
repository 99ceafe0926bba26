"""Small constructors for hand-built cohorts used across the tests."""
from __future__ import annotations

import datetime as dt

from adrmine.domain import (
    CohortDataset,
    MedicalRecord,
    OutcomeCode,
    Patient,
    PrescriptionRecord,
)


def day(text: str) -> dt.date:
    return dt.date.fromisoformat(text)


def patient(pid, yob=1960, gender="male", practice="pr0", reg="2000-01-01") -> Patient:
    return Patient(
        patient_id=pid,
        year_of_birth=yob,
        gender=gender,
        practice_id=practice,
        registration_date=day(reg),
    )


def med(pid, code, date, description=None) -> MedicalRecord:
    if description is None:
        description = f"Condition {code.rstrip('.')}"
    return MedicalRecord(
        patient_id=pid, code=OutcomeCode(code=code, description=description), date=day(date)
    )


def rx(pid, drug, date, family=None, dosage=10.0) -> PrescriptionRecord:
    return PrescriptionRecord(
        patient_id=pid,
        drug_name=drug,
        drug_family=family if family is not None else f"{drug}_fam",
        dosage=dosage,
        date=day(date),
    )


def dataset(patients, medical=(), therapy=()) -> CohortDataset:
    return CohortDataset(
        patients=tuple(patients), medical=tuple(medical), therapy=tuple(therapy)
    )
