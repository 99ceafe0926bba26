"""Yearly report contingency tables and the consistency feature."""
import pytest
from hypothesis import given
from hypothesis import strategies as st

from adrmine.domain import OutcomeCode
from adrmine.errors import ValidationError
from adrmine.ingest import SrsCorpus, SrsReport
from adrmine.pairs import DrugEventPair
from adrmine.srs_features import (
    ContingencyTable,
    attach_consistency,
    build_contingency,
    consistency_feature,
    yearly_risk_difference,
    yearly_values,
)
from adrmine.syndata import GeneratorConfig, generate_cohort, generate_srs

import oracles


def report(drug, desc, year=2010, rid=None):
    rid = rid or f"r{abs(hash((drug, desc, year))) % 10**6}"
    return SrsReport(report_id=rid, year=year, drug_name=drug, outcome_description=desc)


def featured_pair(drug, code, description):
    return DrugEventPair(
        drug_name=drug,
        outcome=OutcomeCode(code=code, description=description),
        count_after=3,
        count_before=0,
        features=(0.0,) * 11,
    )


class TestBuildContingency:
    def test_empty_year(self):
        table = build_contingency([], "drugA", "Nausea")
        assert (table.drug_with_outcome, table.drug_without_outcome,
                table.other_with_outcome, table.other_without_outcome) == (0, 0, 0, 0)

    def test_single_exact_report(self):
        table = build_contingency([report("drugA", "NAUSEA")], "drugA", "Nausea")
        assert (table.drug_with_outcome, table.drug_without_outcome,
                table.other_with_outcome, table.other_without_outcome) == (1, 0, 0, 0)

    def test_partition_matches_bruteforce(self):
        reports = []
        drugs = ["drugA", "drugB", "drugC"]
        outcomes = ["NAUSEA", "RASH", "HEADACHE"]
        for i in range(20):
            reports.append(report(drugs[i % 3], outcomes[(i * 2) % 3], rid=f"r{i}"))
        table = build_contingency(reports, "drugA", "nausea")
        a = sum(1 for r in reports
                if r.drug_name == "drugA" and r.outcome_description == "NAUSEA")
        b = sum(1 for r in reports
                if r.drug_name == "drugA" and r.outcome_description != "NAUSEA")
        c = sum(1 for r in reports
                if r.drug_name != "drugA" and r.outcome_description == "NAUSEA")
        d = len(reports) - a - b - c
        assert (table.drug_with_outcome, table.drug_without_outcome,
                table.other_with_outcome, table.other_without_outcome) == (a, b, c, d)

    def test_no_substring_matching(self):
        table = build_contingency([report("drugA", "CO Nausea")], "drugA", "Nausea")
        assert table.drug_with_outcome == 0
        assert table.drug_without_outcome == 1

    def test_negative_counts_rejected(self):
        with pytest.raises(ValidationError):
            ContingencyTable(-1, 0, 0, 0)


class TestYearlyRiskDifference:
    def test_hand_arithmetic(self):
        assert yearly_risk_difference(ContingencyTable(5, 5, 1, 9)) == pytest.approx(0.4)

    def test_absent_when_pair_unreported(self):
        assert yearly_risk_difference(ContingencyTable(0, 7, 3, 11)) is None

    def test_degenerate_slice(self):
        assert yearly_risk_difference(ContingencyTable(3, 0, 0, 0)) == 1.0


class TestConsistencyFeature:
    def test_counts_positive_years(self):
        assert consistency_feature([0.4, 0.1, -0.05, None]) == 2

    def test_all_absent(self):
        assert consistency_feature([None, None]) == 0

    def test_all_positive(self):
        assert consistency_feature([0.1, 0.1, 0.1, 0.1]) == 4

    def test_zero_is_not_positive(self):
        assert consistency_feature([0.0, 0.1]) == 1

    @given(st.lists(st.one_of(st.none(), st.floats(-1, 1)), max_size=8))
    def test_order_invariant(self, values):
        assert consistency_feature(values) == consistency_feature(list(reversed(values)))


class TestYearlyValues:
    def corpus(self):
        return SrsCorpus(by_year={
            2010: (report("drugA", "NAUSEA", 2010, "a"), report("drugB", "NAUSEA", 2010, "b")),
            2011: (report("drugB", "RASH", 2011, "c"),),
            2012: (),
        })

    def test_values_in_year_order(self):
        values = yearly_values(self.corpus(), "drugA", "Nausea")
        assert [year for year, _ in values] == [2010, 2011, 2012]
        # 2010: a=1, b=0, c=1, d=0 -> 1.0 - 1.0 = 0.0; other years absent
        assert values[0][1] == pytest.approx(0.0)
        assert values[1][1] is None
        assert values[2][1] is None


class TestAttachConsistency:
    def corpus(self):
        def year(y, *pairs):
            return tuple(
                report(drug, desc, y, f"r{y}_{i}") for i, (drug, desc) in enumerate(pairs)
            )

        return SrsCorpus(by_year={
            2010: year(2010, ("drugA", "NAUSEA"), ("drugA", "NAUSEA"), ("drugB", "RASH")),
            2011: year(2011, ("drugA", "NAUSEA"), ("drugA", "RASH"), ("drugB", "NAUSEA")),
            2012: year(2012, ("drugB", "RASH"),),
            2013: year(2013, ("drugA", "NAUSEA"),),
        })

    def test_counts_positive_years(self):
        pair = featured_pair("drugA", "A11..", "Nausea")
        out = attach_consistency([pair], self.corpus())
        # 2010: 1.0-0.0; 2011: 0.5-1.0 (negative); 2012 absent; 2013: 1.0-0.0
        assert out[0].features[10] == 2.0
        assert out[0].features[:10] == pair.features[:10]

    def test_substring_pair_gets_zero(self):
        pair = featured_pair("drugA", "A11..", "CO Nausea")
        assert attach_consistency([pair], self.corpus())[0].features[10] == 0.0

    def test_unreported_pair_gets_zero(self):
        pair = featured_pair("drugZ", "A11..", "Vertigo")
        assert attach_consistency([pair], self.corpus())[0].features[10] == 0.0

    def test_unknown_drug_is_not_an_error(self):
        pair = featured_pair("never_prescribed", "A11..", "Nausea")
        assert attach_consistency([pair], self.corpus())[0].features[10] == 0.0

    def test_requires_features(self):
        bare = DrugEventPair(
            drug_name="drugA", outcome=OutcomeCode(code="A11.."), count_after=3, count_before=0
        )
        with pytest.raises(ValidationError):
            attach_consistency([bare], self.corpus())

    def test_matches_direct_loop_oracle(self):
        corpus = self.corpus()
        for drug, desc in [("drugA", "Nausea"), ("drugB", "Rash"), ("drugB", "Nausea")]:
            pair = featured_pair(drug, "A11..", desc)
            got = attach_consistency([pair], corpus)[0].features[10]
            assert got == float(oracles.consistency(corpus, drug, desc))

    def test_unrelated_reports_cannot_unshield_absent_years(self):
        corpus = self.corpus()
        pair = featured_pair("drugA", "A11..", "Nausea")
        base = attach_consistency([pair], corpus)[0].features[10]
        noisy = SrsCorpus(by_year={
            year: corpus.by_year[year]
            + tuple(report("drugQ", f"OTHER {i}", year, f"n{year}_{i}") for i in range(5))
            for year in corpus.by_year
        })
        # extra reports for other pairs can only help the rate difference
        # in years where a > 0, and 2012 stays absent
        got = attach_consistency([pair], noisy)[0].features[10]
        assert got >= base
        assert yearly_values(noisy, "drugA", "Nausea")[2][1] is None

    @given(
        st.lists(
            st.tuples(st.sampled_from(["d1", "d2", "d3"]), st.sampled_from(["O1", "O2", "O3"])),
            max_size=15,
        ),
        st.lists(
            st.tuples(st.sampled_from(["d1", "d2", "d3"]), st.sampled_from(["O1", "O2", "O3"])),
            max_size=15,
        ),
    )
    def test_counter_path_equals_table_path(self, year_a, year_b):
        corpus = SrsCorpus(by_year={
            2010: tuple(report(d, o, 2010, f"a{i}") for i, (d, o) in enumerate(year_a)),
            2011: tuple(report(d, o, 2011, f"b{i}") for i, (d, o) in enumerate(year_b)),
        })
        for drug in ("d1", "d2"):
            for desc in ("O1", "O3"):
                pair = featured_pair(drug, "A11..", desc)
                via_attach = attach_consistency([pair], corpus)[0].features[10]
                via_tables = consistency_feature(
                    [value for _, value in yearly_values(corpus, drug, desc)]
                )
                assert via_attach == float(via_tables)


def test_injected_pairs_outscore_noise_pairs():
    config = GeneratorConfig(
        seed=17, n_patients=20, n_drugs=3, n_outcome_codes=30,
        injected_adrs=[("drug_00", "A11..", 0.5), ("drug_01", "B21..", 0.5)],
        srs_report_probability_adr=0.3,
        srs_report_probability_noise=0.02,
        srs_exposures_per_drug_year=200,
    )
    _, truth = generate_cohort(config)
    corpus = generate_srs(config, truth)

    def x11(drug, code):
        pair = featured_pair(drug, code, truth.description_of[code])
        return attach_consistency([pair], corpus)[0].features[10]

    planted = [x11(d, c) for d, c, _ in truth.adr_pairs]
    noise = [x11("drug_02", code) for code in ("A12..", "B11..", "C11..")]
    assert min(planted) > max(noise)
    assert sum(planted) / len(planted) > sum(noise) / len(noise)
