"""Day-resolution indexes over a cohort for fast temporal-window queries.

All window arithmetic lives here so the mining and feature-extraction
modules share one set of conventions:

* dates are handled as proleptic-Gregorian ordinals (day numbers);
* the after-window of a prescription on day d is (d, d+30], the
  before-window is [d-30, d); the prescription day itself belongs to
  neither window.
"""
from __future__ import annotations

from bisect import bisect_left
from dataclasses import replace

from .domain import CohortDataset, Patient

WINDOW_DAYS = 30
FAMILY_LOOKBACK_DAYS = 365


def any_in_range(sorted_days: list[int], lo: int, hi: int) -> bool:
    """True iff some element of ``sorted_days`` lies in [lo, hi]."""
    i = bisect_left(sorted_days, lo)
    return i < len(sorted_days) and sorted_days[i] <= hi


def in_after_window(sorted_days: list[int], rx_day: int) -> bool:
    return any_in_range(sorted_days, rx_day + 1, rx_day + WINDOW_DAYS)


def in_before_window(sorted_days: list[int], rx_day: int) -> bool:
    return any_in_range(sorted_days, rx_day - WINDOW_DAYS, rx_day - 1)


class CohortIndex:
    """Read-only lookup structures built once per dataset.

    Safe to share across threads after construction; the matched-control
    cache is pre-warmed lazily but keyed deterministically.
    """

    def __init__(self, dataset: CohortDataset):
        self.dataset = dataset
        self.patients: dict[str, Patient] = dataset.patient_by_id()

        # (patient, code) -> sorted event days; code -> description registry.
        med: dict[str, dict[str, list[int]]] = {}
        code_descriptions: dict[str, str] = {}
        for rec in dataset.medical:
            med.setdefault(rec.patient_id, {}).setdefault(rec.code.code, []).append(
                rec.date.toordinal()
            )
            seen = code_descriptions.get(rec.code.code)
            # A code may carry differing descriptions across rows; keep the
            # lexicographic minimum so the choice is order-independent.
            if seen is None or rec.code.description < seen:
                code_descriptions[rec.code.code] = rec.code.description
        for by_code in med.values():
            for days in by_code.values():
                days.sort()
        self._med = med
        self.code_descriptions = code_descriptions

        # drug -> list of (day, patient, dosage); patient -> per-drug scripts.
        scripts_by_drug: dict[str, list[tuple[int, str, float]]] = {}
        per_patient_drug: dict[str, dict[str, list[tuple[int, float]]]] = {}
        family_days: dict[str, dict[str, list[int]]] = {}
        self.family_of: dict[str, str] = {}
        for rec in dataset.therapy:
            day = rec.date.toordinal()
            scripts_by_drug.setdefault(rec.drug_name, []).append((day, rec.patient_id, rec.dosage))
            per_patient_drug.setdefault(rec.patient_id, {}).setdefault(rec.drug_name, []).append(
                (day, rec.dosage)
            )
            family_days.setdefault(rec.patient_id, {}).setdefault(rec.drug_family, []).append(day)
            self.family_of[rec.drug_name] = rec.drug_family
        for lst in scripts_by_drug.values():
            lst.sort()
        for by_drug in per_patient_drug.values():
            for lst in by_drug.values():
                lst.sort()
        for by_family in family_days.values():
            for lst in by_family.values():
                lst.sort()
        self._scripts_by_drug = scripts_by_drug
        self._per_patient_drug = per_patient_drug
        self._family_days = family_days
        self.drugs: list[str] = sorted(scripts_by_drug)

        # drug -> patient -> (first day, dosage on that day); ties on the
        # same day resolved by the smaller dosage so results never depend
        # on record order.
        first_rx: dict[str, dict[str, tuple[int, float]]] = {}
        for pid, by_drug in per_patient_drug.items():
            for drug, lst in by_drug.items():
                first_rx.setdefault(drug, {})[pid] = lst[0]
        self.first_rx = first_rx

        # patient -> sorted (first day, drug) over that patient's drugs.
        self._firsts: dict[str, list[tuple[int, str]]] = {
            pid: sorted((lst[0][0], drug) for drug, lst in by_drug.items())
            for pid, by_drug in per_patient_drug.items()
        }

        pool: dict[tuple[str, str], list[tuple[int, str]]] = {}
        for p in dataset.patients:
            pool.setdefault((p.practice_id, p.gender), []).append((p.year_of_birth, p.patient_id))
        for lst in pool.values():
            lst.sort()
        self._match_pool = pool
        self._match_cache: dict[tuple[str, int], tuple[str, ...]] = {}
        self._family_filtered: CohortIndex | None = None

    def event_days(self, patient_id: str, code: str) -> list[int]:
        return self._med.get(patient_id, {}).get(code, [])

    def codes_of(self, patient_id: str) -> dict[str, list[int]]:
        """The patient's recorded codes, each with sorted event days."""
        return self._med.get(patient_id, {})

    def scripts(self, drug_name: str) -> list[tuple[int, str, float]]:
        """All prescriptions of a drug as sorted (day, patient, dosage)."""
        return self._scripts_by_drug.get(drug_name, [])

    def script_days(self, patient_id: str, drug_name: str) -> list[int]:
        return [day for day, _ in self._per_patient_drug.get(patient_id, {}).get(drug_name, [])]

    def first_other_rx(self, patient_id: str, exclude_drug: str) -> int | None:
        """Day of the patient's earliest prescription of any other drug."""
        firsts = self._firsts.get(patient_id, [])
        for day, drug in firsts[:2]:
            if drug != exclude_drug:
                return day
        return None

    def matched_controls(self, case_patient_id: str, k: int) -> tuple[str, ...]:
        """The k same-practice, same-gender patients nearest in birth year.

        Ties broken by smaller patient_id; shorter tuples are returned when
        the practice lacks candidates.
        """
        key = (case_patient_id, k)
        cached = self._match_cache.get(key)
        if cached is not None:
            return cached
        case = self.patients[case_patient_id]
        pool = self._match_pool.get((case.practice_id, case.gender), [])
        ranked = sorted(
            (abs(yob - case.year_of_birth), pid)
            for yob, pid in pool
            if pid != case_patient_id
        )
        controls = tuple(pid for _, pid in ranked[:k])
        self._match_cache[key] = controls
        return controls

    def family_filtered(self) -> "CohortIndex":
        """Index over the therapy table with confounded prescriptions removed.

        A prescription is removed when any prescription of the same drug
        family was recorded for the patient in the preceding 365 days.
        The lookback runs against the unfiltered table, so a removed
        prescription still disqualifies later ones.
        """
        if self._family_filtered is None:
            kept = []
            for rec in self.dataset.therapy:
                day = rec.date.toordinal()
                days = self._family_days[rec.patient_id][rec.drug_family]
                if not any_in_range(days, day - FAMILY_LOOKBACK_DAYS, day - 1):
                    kept.append(rec)
            filtered = replace(self.dataset, therapy=tuple(kept))
            self._family_filtered = CohortIndex(filtered)
        return self._family_filtered
