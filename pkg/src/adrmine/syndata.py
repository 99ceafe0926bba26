"""Synthetic cohort and spontaneous-report generation with known ground truth.

The generator produces the same tables the ingest module loads, plus the
ground truth needed to verify mining and learning end to end:

* a three-level outcome-code universe built from families of ten codes
  (one root, three children, six grandchildren); the last third of the
  families is designated non-adverse (family history, screening and the
  like), and their roots populate ``non_adverse_roots.csv``;
* background events that occur independently per (patient, code, 30-day
  interval) with a configurable rate;
* injected drug-outcome associations: after each prescription of the
  drug, the outcome is recorded within 1..30 days with the configured
  probability;
* optional injected confounders: the same event mechanism aimed at
  non-adverse codes, so the pair looks associated in the cohort but is
  labeled non-adverse and receives no spontaneous reports;
* yearly spontaneous reports whose drug-outcome combinations are
  correlated with the injected associations, with uppercase descriptions
  to exercise case-insensitive matching.

Everything is driven by ``numpy`` generators seeded from (seed, stream)
pairs, so each artifact is reproducible in isolation.
"""
from __future__ import annotations

import datetime as dt
import string
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .domain import CohortDataset, MedicalRecord, OutcomeCode, Patient, PrescriptionRecord, is_descendant
from .errors import ValidationError
from .ingest import SrsCorpus, SrsReport

OBSERVATION_MONTHS = 60
DAYS_PER_MONTH = 30
OBSERVATION_DAYS = OBSERVATION_MONTHS * DAYS_PER_MONTH
FIRST_SCRIPT_OFFSET = 40  # leaves room for a full before-window
FAMILY_SIZE = 10
REGISTRATION_EPOCH = dt.date(2004, 1, 1)

_FAMILY_LETTERS = string.ascii_uppercase + string.ascii_lowercase + string.digits


class InjectedAdr(NamedTuple):
    """A planted drug-outcome association."""

    drug_name: str
    outcome_code: str
    probability: float


@dataclass(frozen=True)
class CodeUniverse:
    """Deterministic outcome-code hierarchy used by the generator."""

    codes: tuple[OutcomeCode, ...]
    non_adverse_roots: tuple[str, ...]

    def description_of(self, code: str) -> str:
        for c in self.codes:
            if c.code == code:
                return c.description
        raise ValidationError(f"code {code!r} is not part of the universe")

    def is_non_adverse(self, code: str) -> bool:
        return any(is_descendant(root, code) for root in self.non_adverse_roots)

    @property
    def adverse_specific_codes(self) -> tuple[str, ...]:
        """Non-root adverse codes, the natural targets for planted signals."""
        roots = set(self.non_adverse_roots)
        return tuple(
            c.code
            for c in self.codes
            if c.level >= 2 and c.code not in roots and not self.is_non_adverse(c.code)
        )

    @property
    def non_adverse_descendants(self) -> tuple[str, ...]:
        return tuple(c.code for c in self.codes if self.is_non_adverse(c.code))


def build_code_universe(n_codes: int) -> CodeUniverse:
    """Build the first ``n_codes`` codes of the family-structured hierarchy.

    Family k uses letter k and contributes, in order: the root ``X....``,
    then each child ``Xi...`` followed by its grandchildren ``Xij..``.
    """
    if not 1 <= n_codes <= FAMILY_SIZE * len(_FAMILY_LETTERS):
        raise ValidationError(
            f"n_outcome_codes must be in 1..{FAMILY_SIZE * len(_FAMILY_LETTERS)}, got {n_codes}"
        )
    texts: list[str] = []
    for letter in _FAMILY_LETTERS:
        texts.append(f"{letter}....")
        for child in "123":
            texts.append(f"{letter}{child}...")
            for grand in "12":
                texts.append(f"{letter}{child}{grand}..")
        if len(texts) >= n_codes:
            break
    texts = texts[:n_codes]
    codes = tuple(
        OutcomeCode(code=t, description=f"Condition {t.rstrip('.')}") for t in texts
    )
    n_families = -(-n_codes // FAMILY_SIZE)
    n_non_adverse = max(1, n_families // 3) if n_families >= 2 else 0
    roots = tuple(
        f"{_FAMILY_LETTERS[i]}...." for i in range(n_families - n_non_adverse, n_families)
    )
    return CodeUniverse(codes=codes, non_adverse_roots=roots)


@dataclass(frozen=True)
class GeneratorConfig:
    """Knobs for one synthetic world; every field has a reproducible effect."""

    seed: int = 0
    n_patients: int = 1000
    n_drugs: int = 5
    n_outcome_codes: int = 60
    injected_adrs: tuple[InjectedAdr, ...] = ()
    injected_confounders: tuple[InjectedAdr, ...] = ()
    background_event_rate: float = 0.01
    srs_report_probability_adr: float = 0.3
    srs_report_probability_noise: float = 0.01
    srs_exposures_per_drug_year: int = 50
    years: tuple[int, ...] = (2010, 2011, 2012, 2013)

    def __post_init__(self):
        object.__setattr__(
            self, "injected_adrs", tuple(InjectedAdr(*entry) for entry in self.injected_adrs)
        )
        object.__setattr__(
            self,
            "injected_confounders",
            tuple(InjectedAdr(*entry) for entry in self.injected_confounders),
        )
        object.__setattr__(self, "years", tuple(self.years))
        if self.n_patients < 1:
            raise ValidationError("n_patients must be positive")
        if self.n_drugs < 1:
            raise ValidationError("n_drugs must be positive")
        if not 0.0 <= self.background_event_rate < 1.0:
            raise ValidationError("background_event_rate must be in [0, 1)")
        for name in ("srs_report_probability_adr", "srs_report_probability_noise"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValidationError(f"{name} must be in [0, 1]")
        for planted in self.injected_adrs + self.injected_confounders:
            if not 0.0 < planted.probability <= 1.0:
                raise ValidationError(
                    f"injected probability for {planted.drug_name!r}/"
                    f"{planted.outcome_code!r} must be in (0, 1]"
                )
        if self.srs_exposures_per_drug_year < 1:
            raise ValidationError("srs_exposures_per_drug_year must be positive")
        if len(set(self.years)) != len(self.years):
            raise ValidationError("years must be distinct")

    @property
    def drug_names(self) -> tuple[str, ...]:
        return tuple(f"drug_{i:02d}" for i in range(self.n_drugs))


@dataclass(frozen=True)
class GroundTruth:
    """What the generator planted, for verification downstream."""

    adr_pairs: tuple[InjectedAdr, ...]
    confounder_pairs: tuple[InjectedAdr, ...]
    non_adverse_roots: frozenset[str]
    description_of: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        for planted in self.adr_pairs:
            if any(is_descendant(root, planted.outcome_code) for root in self.non_adverse_roots):
                raise ValidationError(
                    f"planted association {planted.drug_name!r}/{planted.outcome_code!r} "
                    "falls under a non-adverse root"
                )

    @property
    def adr_keys(self) -> frozenset[tuple[str, str]]:
        return frozenset((p.drug_name, p.outcome_code) for p in self.adr_pairs)


def choose_injected_adrs(
    seed: int,
    n_drugs: int,
    n_outcome_codes: int,
    count: int,
    probability: float | tuple[float, float],
) -> tuple[InjectedAdr, ...]:
    """Pick ``count`` distinct adverse codes and spread them over the drugs.

    ``probability`` may be a single value or a (low, high) range filled in
    evenly across the picks.
    """
    universe = build_code_universe(n_outcome_codes)
    return _choose(seed, 2, n_drugs, universe.adverse_specific_codes, count, probability)


def choose_confounders(
    seed: int,
    n_drugs: int,
    n_outcome_codes: int,
    count: int,
    probability: float | tuple[float, float],
) -> tuple[InjectedAdr, ...]:
    """Pick ``count`` distinct non-adverse descendant codes as confounders."""
    universe = build_code_universe(n_outcome_codes)
    return _choose(seed, 3, n_drugs, universe.non_adverse_descendants, count, probability)


def _choose(seed, stream, n_drugs, candidates, count, probability) -> tuple[InjectedAdr, ...]:
    if count == 0:
        return ()
    if count > len(candidates):
        raise ValidationError(
            f"cannot pick {count} codes from {len(candidates)} candidates; "
            "increase n_outcome_codes"
        )
    rng = np.random.default_rng([seed, stream])
    picks = rng.choice(len(candidates), size=count, replace=False)
    if isinstance(probability, (int, float)):
        probs = [float(probability)] * count
    else:
        lo, hi = probability
        probs = list(np.linspace(lo, hi, count))
    return tuple(
        InjectedAdr(f"drug_{i % n_drugs:02d}", candidates[int(pick)], float(probs[i]))
        for i, pick in enumerate(picks)
    )


def generate_cohort(config: GeneratorConfig) -> tuple[CohortDataset, GroundTruth]:
    """Generate patients, medical events and prescriptions.

    Patients are observed for 60 30-day intervals from their registration
    date; prescriptions start 40 days in and end early enough that every
    after-window fits inside the observation span.
    """
    universe = build_code_universe(config.n_outcome_codes)
    drug_names = config.drug_names
    _validate_planted(config, universe, drug_names)

    rng = np.random.default_rng([config.seed, 0])
    n = config.n_patients

    n_practices = max(2, n // 50)
    practice_idx = rng.integers(0, n_practices, size=n)
    female = rng.random(n) < 0.5
    yob = rng.integers(1930, 2001, size=n)
    reg_offsets = rng.integers(0, 366, size=n)
    reg_days = REGISTRATION_EPOCH.toordinal() + reg_offsets

    patients = tuple(
        Patient(
            patient_id=f"p{i:05d}",
            year_of_birth=int(yob[i]),
            gender="female" if female[i] else "male",
            practice_id=f"pr{practice_idx[i]:03d}",
            registration_date=dt.date.fromordinal(int(reg_days[i])),
        )
        for i in range(n)
    )

    medical: list[MedicalRecord] = []
    code_objects = {c.code: c for c in universe.codes}

    # Background: one Bernoulli draw per (patient, code, 30-day interval),
    # the event placed uniformly inside its interval.
    rate = config.background_event_rate
    if rate > 0.0:
        for code in universe.codes:
            hits = rng.random((n, OBSERVATION_MONTHS)) < rate
            pat_idx, month_idx = np.nonzero(hits)
            within = rng.integers(0, DAYS_PER_MONTH, size=len(pat_idx))
            days = reg_days[pat_idx] + month_idx * DAYS_PER_MONTH + within
            for p_i, day in zip(pat_idx, days):
                medical.append(
                    MedicalRecord(
                        patient_id=f"p{p_i:05d}",
                        code=code,
                        date=dt.date.fromordinal(int(day)),
                    )
                )

    # Prescriptions: per (patient, drug) exposure flips, then 1 + Poisson
    # script counts at uniform offsets. Dosages vary around a per-drug base.
    therapy: list[PrescriptionRecord] = []
    scripts_by_drug: dict[str, tuple[np.ndarray, np.ndarray]] = {}
    p_exposed = min(1.0, 1.5 / config.n_drugs)
    last_offset = OBSERVATION_DAYS - DAYS_PER_MONTH - 1
    for di, drug in enumerate(drug_names):
        family = f"fam_{di // 2:02d}"
        base_dose = 10.0 * (di % 3 + 1)
        exposed = np.nonzero(rng.random(n) < p_exposed)[0]
        counts = 1 + rng.poisson(1.2, size=len(exposed))
        pat_rep = np.repeat(exposed, counts)
        offsets = rng.integers(FIRST_SCRIPT_OFFSET, last_offset + 1, size=len(pat_rep))
        mults = rng.choice([0.5, 1.0, 2.0], size=len(pat_rep))
        days = reg_days[pat_rep] + offsets
        for p_i, day, mult in zip(pat_rep, days, mults):
            therapy.append(
                PrescriptionRecord(
                    patient_id=f"p{p_i:05d}",
                    drug_name=drug,
                    drug_family=family,
                    dosage=base_dose * float(mult),
                    date=dt.date.fromordinal(int(day)),
                )
            )
        scripts_by_drug[drug] = (pat_rep, days)

    # Planted signals: after each prescription of the drug, the outcome
    # occurs within 1..30 days with the planted probability.
    for planted in config.injected_adrs + config.injected_confounders:
        pat_rep, days = scripts_by_drug[planted.drug_name]
        hits = rng.random(len(days)) < planted.probability
        offsets = rng.integers(1, DAYS_PER_MONTH + 1, size=int(hits.sum()))
        code = code_objects[planted.outcome_code]
        for p_i, day, off in zip(pat_rep[hits], days[hits], offsets):
            medical.append(
                MedicalRecord(
                    patient_id=f"p{p_i:05d}",
                    code=code,
                    date=dt.date.fromordinal(int(day + off)),
                )
            )

    medical.sort(key=lambda r: (r.patient_id, r.date, r.code.code))
    therapy.sort(key=lambda r: (r.patient_id, r.date, r.drug_name, r.dosage))

    dataset = CohortDataset(patients=patients, medical=tuple(medical), therapy=tuple(therapy))
    truth = GroundTruth(
        adr_pairs=config.injected_adrs,
        confounder_pairs=config.injected_confounders,
        non_adverse_roots=frozenset(universe.non_adverse_roots),
        description_of={c.code: c.description for c in universe.codes},
    )
    return dataset, truth


def _validate_planted(config, universe, drug_names):
    known_drugs = set(drug_names)
    seen: set[tuple[str, str]] = set()
    for planted in config.injected_adrs + config.injected_confounders:
        if planted.drug_name not in known_drugs:
            raise ValidationError(f"planted drug {planted.drug_name!r} is not generated")
        if planted.outcome_code not in {c.code for c in universe.codes}:
            raise ValidationError(f"planted code {planted.outcome_code!r} is not generated")
        key = (planted.drug_name, planted.outcome_code)
        if key in seen:
            raise ValidationError(f"duplicate planted pair {key!r}")
        seen.add(key)
    for planted in config.injected_adrs:
        if universe.is_non_adverse(planted.outcome_code):
            raise ValidationError(
                f"association {planted.drug_name!r}/{planted.outcome_code!r} targets "
                "a non-adverse code; use injected_confounders for that"
            )
    for planted in config.injected_confounders:
        if not universe.is_non_adverse(planted.outcome_code):
            raise ValidationError(
                f"confounder {planted.drug_name!r}/{planted.outcome_code!r} must be a "
                "strict descendant of a non-adverse root"
            )


def generate_srs(config: GeneratorConfig, truth: GroundTruth) -> SrsCorpus:
    """Generate yearly spontaneous reports correlated with planted signals.

    Per year and drug, a fixed number of exposures each report every
    planted outcome of the drug with the adr probability, and a random
    outcome from the whole universe with the noise probability.
    Descriptions are uppercased so downstream matching must ignore case.
    """
    universe = build_code_universe(config.n_outcome_codes)
    rng = np.random.default_rng([config.seed, 1])
    planted_by_drug: dict[str, list[str]] = {}
    for planted in truth.adr_pairs:
        planted_by_drug.setdefault(planted.drug_name, []).append(planted.outcome_code)
    for codes in planted_by_drug.values():
        codes.sort()

    by_year: dict[int, tuple[SrsReport, ...]] = {}
    for year in sorted(config.years):
        reports: list[SrsReport] = []
        seq = 0
        for drug in config.drug_names:
            n_exp = config.srs_exposures_per_drug_year
            for code in planted_by_drug.get(drug, ()):
                n_hits = int(rng.binomial(n_exp, config.srs_report_probability_adr))
                description = truth.description_of[code].upper()
                for _ in range(n_hits):
                    reports.append(
                        SrsReport(
                            report_id=f"r{year}_{seq:06d}",
                            year=year,
                            drug_name=drug,
                            outcome_description=description,
                        )
                    )
                    seq += 1
            n_noise = int(rng.binomial(n_exp, config.srs_report_probability_noise))
            picks = rng.integers(0, len(universe.codes), size=n_noise)
            for pick in picks:
                reports.append(
                    SrsReport(
                        report_id=f"r{year}_{seq:06d}",
                        year=year,
                        drug_name=drug,
                        outcome_description=universe.codes[int(pick)].description.upper(),
                    )
                )
                seq += 1
        by_year[year] = tuple(reports)
    return SrsCorpus(by_year=by_year)


def side_effect_rows(truth: GroundTruth) -> list[tuple[str, str]]:
    """Rows for ``side_effects.csv`` naming each planted association."""
    return sorted(
        (p.drug_name, truth.description_of[p.outcome_code].upper()) for p in truth.adr_pairs
    )
