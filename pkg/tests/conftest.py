"""Shared fixtures: small synthetic worlds with ground truth."""
from __future__ import annotations

import pytest

from adrmine.ingest import LabelSource, apply_registration_filter, canonical_term
from adrmine.domain import OutcomeCode
from adrmine.syndata import (
    GeneratorConfig,
    choose_confounders,
    choose_injected_adrs,
    generate_cohort,
    generate_srs,
)


def small_world(seed: int, n_patients: int = 80, with_confounders: bool = True):
    """A tiny generated world: (filtered dataset, corpus, labels, truth)."""
    adrs = choose_injected_adrs(seed, 3, 40, count=3, probability=(0.2, 0.5))
    confounders = (
        choose_confounders(seed, 3, 40, count=1, probability=0.3)
        if with_confounders
        else ()
    )
    config = GeneratorConfig(
        seed=seed,
        n_patients=n_patients,
        n_drugs=3,
        n_outcome_codes=40,
        injected_adrs=adrs,
        injected_confounders=confounders,
        background_event_rate=0.02,
        srs_report_probability_adr=0.4,
        srs_report_probability_noise=0.02,
        srs_exposures_per_drug_year=30,
    )
    dataset, truth = generate_cohort(config)
    corpus = generate_srs(config, truth)
    labels = LabelSource(
        known_side_effects={
            canonical_term(p.drug_name): frozenset(
                canonical_term(truth.description_of[q.outcome_code])
                for q in truth.adr_pairs
                if q.drug_name == p.drug_name
            )
            for p in truth.adr_pairs
        },
        non_adverse_roots=frozenset(OutcomeCode(code=c) for c in truth.non_adverse_roots),
    )
    return apply_registration_filter(dataset), corpus, labels, truth


@pytest.fixture(scope="session")
def toy_worlds():
    """A handful of small worlds for oracle-equivalence checks."""
    return [small_world(seed) for seed in range(6)]
