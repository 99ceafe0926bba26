"""Candidate pair mining, temporal counts, filtering and labeling."""
import pytest

from adrmine.domain import OutcomeCode
from adrmine.errors import ParseError, ValidationError
from adrmine.ingest import LabelSource
from adrmine.pairs import (
    LABEL_ADR,
    LABEL_NON_ADVERSE,
    MIN_PATIENTS,
    DrugEventPair,
    filter_candidates,
    generate_candidates,
    label_pairs,
    load_pairs,
    save_pairs,
    temporal_counts,
)

import oracles
from helpers import dataset, med, patient, rx


def pair(drug="drugA", code="A11..", after=3, before=0, **kw):
    outcome = OutcomeCode(code=code, description=f"Condition {code.rstrip('.')}")
    return DrugEventPair(
        drug_name=drug, outcome=outcome, count_after=after, count_before=before, **kw,
    )


def mined_world():
    """Three patients qualify (drugX, A11..); a fourth contributes counts only."""
    patients = [patient(f"p{i}") for i in range(1, 7)]
    therapy = [
        rx("p1", "drugX", "2001-06-01"),
        rx("p1", "drugX", "2001-08-01"),
        rx("p2", "drugX", "2001-06-01"),
        rx("p3", "drugX", "2001-06-01"),
        rx("p4", "drugX", "2001-06-01"),
        rx("p5", "drugX", "2001-05-01"),
        rx("p5", "drugX", "2001-06-10"),
        rx("p6", "drugY", "2001-06-01"),
    ]
    medical = [
        med("p1", "A11..", "2001-06-10"),  # 9 days after first script
        med("p2", "A11..", "2001-07-01"),  # exactly 30 days after
        med("p3", "A11..", "2001-06-02"),  # 1 day after
        med("p3", "A11..", "2001-05-20"),  # 12 days before -> count_before
        med("p4", "A11..", "2001-07-16"),  # 45 days after, outside window
        med("p5", "A11..", "2001-06-20"),  # after 2nd script only, not 1st
        med("p1", "B1...", "2001-06-05"),
        med("p2", "B1...", "2001-06-05"),  # only two patients: no candidate
    ]
    return dataset(patients, medical, therapy)


class TestGenerateCandidates:
    def test_hand_built_world(self):
        pairs = generate_candidates(mined_world())
        assert [p.key for p in pairs] == [("drugX", "A11..")]
        found = pairs[0]
        # p1 first, p2 first, p3 first, p5 second script
        assert found.count_after == 4
        assert found.count_before == 1
        assert found.outcome.description == "Condition A11"

    def test_min_patient_threshold(self):
        ds = mined_world()
        assert MIN_PATIENTS == 3
        trimmed = dataset(
            ds.patients,
            [m for m in ds.medical if not (m.patient_id == "p3" and m.code.code == "A11..")],
            ds.therapy,
        )
        assert generate_candidates(trimmed) == []

    def test_event_on_script_day_in_neither_window(self):
        ds = dataset(
            [patient("p1")],
            [med("p1", "A11..", "2001-06-01")],
            [rx("p1", "drugX", "2001-06-01")],
        )
        assert temporal_counts(ds, "drugX", "A11..") == (0, 0)

    def test_candidacy_uses_first_script_only(self):
        pairs = generate_candidates(mined_world())
        # p5's event follows only the second script; removing one qualifying
        # patient drops the pair even though the count would still be 3.
        ds = mined_world()
        trimmed = dataset(
            ds.patients,
            [m for m in ds.medical if not (m.patient_id == "p2" and m.code.code == "A11..")],
            ds.therapy,
        )
        assert [p.key for p in pairs] == [("drugX", "A11..")]
        assert generate_candidates(trimmed) == []

    def test_drug_subset(self):
        ds = mined_world()
        assert generate_candidates(ds, drugs=["drugY"]) == []
        assert generate_candidates(ds, drugs=["drugX", "drugY"]) == generate_candidates(ds)

    def test_threads_equivalent(self, toy_worlds):
        for ds, _, _, _ in toy_worlds[:2]:
            assert generate_candidates(ds, threads=4) == generate_candidates(ds)

    def test_matches_bruteforce_oracle(self, toy_worlds):
        for ds, _, _, _ in toy_worlds:
            mined = {p.key: (p.count_after, p.count_before) for p in generate_candidates(ds)}
            expected_keys = set(oracles.candidates(ds, MIN_PATIENTS))
            assert set(mined) == expected_keys
            for drug, code in expected_keys:
                assert mined[(drug, code)] == oracles.temporal_counts(ds, drug, code)

    def test_sorted_output(self, toy_worlds):
        ds = toy_worlds[0][0]
        keys = [p.key for p in generate_candidates(ds)]
        assert keys == sorted(keys)


class TestTemporalCounts:
    def test_every_script_counted(self):
        ds = mined_world()
        assert temporal_counts(ds, "drugX", "A11..") == (4, 1)
        assert temporal_counts(ds, "drugX", OutcomeCode(code="B1...")) == (2, 0)
        assert temporal_counts(ds, "ghost", "A11..") == (0, 0)

    def test_same_script_can_count_both_ways(self):
        ds = dataset(
            [patient("p1")],
            [med("p1", "A11..", "2001-05-20"), med("p1", "A11..", "2001-06-10")],
            [rx("p1", "drugX", "2001-06-01")],
        )
        assert temporal_counts(ds, "drugX", "A11..") == (1, 1)


class TestFilterCandidates:
    @pytest.mark.parametrize(
        "after,before,kept",
        [(3, 0, True), (2, 1, True), (1, 0, False), (4, 2, True),
         (2, 2, False), (0, 0, False), (5, 4, True), (4, 4, False)],
    )
    def test_ratio_rule(self, after, before, kept):
        pairs = [pair(after=after, before=before)]
        assert (filter_candidates(pairs) == pairs) is kept

    def test_filter_matches_counts_from_mining(self, toy_worlds):
        ds = toy_worlds[0][0]
        mined = generate_candidates(ds)
        kept = {p.key for p in filter_candidates(mined)}
        expected = {
            p.key for p in mined if p.count_after / max(p.count_before, 1) > 1.0
        }
        assert kept == expected


class TestLabelPairs:
    def make_labels(self):
        return LabelSource(
            known_side_effects={"druga": frozenset({"condition a11", "condition z11"})},
            non_adverse_roots=frozenset({OutcomeCode(code="Z....")}),
        )

    def test_label_assignment_and_precedence(self):
        labels = self.make_labels()
        pairs = [
            pair("drugA", "B1..."),             # unknown: dropped
            pair("drugA", "A11.."),             # listed side effect
            pair("drugA", "Z11.."),             # non-adverse wins over listing
            pair("drugB", "Z12.."),             # non-adverse for any drug
        ]
        labeled = label_pairs(pairs, labels)
        assert [(p.key, p.label) for p in labeled] == [
            (("drugA", "A11.."), LABEL_ADR),
            (("drugA", "Z11.."), LABEL_NON_ADVERSE),
            (("drugB", "Z12.."), LABEL_NON_ADVERSE),
        ]

    def test_description_match_is_case_insensitive(self):
        labels = LabelSource(known_side_effects={"druga": frozenset({"condition a11"})})
        p = DrugEventPair(
            drug_name="drugA",
            outcome=OutcomeCode(code="A11..", description="CONDITION A11"),
            count_after=3, count_before=0,
        )
        assert label_pairs([p], labels)[0].label == LABEL_ADR

    def test_counts_preserved(self):
        labels = self.make_labels()
        labeled = label_pairs([pair("drugA", "A11..", after=7, before=2)], labels)
        assert (labeled[0].count_after, labeled[0].count_before) == (7, 2)


class TestPairValidation:
    def test_negative_counts_rejected(self):
        with pytest.raises(ValidationError):
            pair(after=-1)

    def test_bad_label_rejected(self):
        with pytest.raises(ValidationError):
            pair(label=7)

    def test_feature_length_enforced_and_coerced(self):
        with pytest.raises(ValidationError):
            pair(features=(1.0, 2.0))
        p = pair(features=tuple(range(11)))
        assert p.features == tuple(float(i) for i in range(11))


class TestPairsIo:
    def test_roundtrip(self, tmp_path):
        pairs = [
            pair("drugB", "B1...", after=4, before=1, label=LABEL_ADR),
            pair("drugA", "A11..", after=3, before=0, label=LABEL_NON_ADVERSE),
        ]
        path = tmp_path / "pairs.csv"
        save_pairs(pairs, path)
        loaded = load_pairs(path, descriptions={"A11..": "Condition A11"})
        assert [p.key for p in loaded] == [("drugA", "A11.."), ("drugB", "B1...")]
        assert loaded[0].outcome.description == "Condition A11"
        assert loaded[1].outcome.description == ""
        assert [(p.count_after, p.count_before, p.label) for p in loaded] == [
            (3, 0, LABEL_NON_ADVERSE), (4, 1, LABEL_ADR),
        ]

    def test_bad_header(self, tmp_path):
        path = tmp_path / "pairs.csv"
        path.write_text("a,b,c\n", encoding="utf-8")
        with pytest.raises(ParseError) as err:
            load_pairs(path)
        assert err.value.line == 1

    def test_bad_row_names_line(self, tmp_path):
        path = tmp_path / "pairs.csv"
        path.write_text(
            "drug_name,code,count_after,count_before,label\n"
            "drugA,A11..,3,0,1\n"
            "drugA,B1...,x,0,1\n",
            encoding="utf-8",
        )
        with pytest.raises(ParseError) as err:
            load_pairs(path)
        assert err.value.line == 3
