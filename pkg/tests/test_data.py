"""Dataset/gold validation diagnostics and dataset mechanics."""

import pytest

from crowdtest.data import (
    Discrimination,
    GoldSet,
    QuestionSpec,
    ResponseDataset,
    ResponseRecord,
    default_priors,
    validate,
)


def make_data():
    return ResponseDataset(
        questions=[QuestionSpec("q0", 3), QuestionSpec("q1", 2)],
        records=[
            ResponseRecord("alice", "q0", 2),
            ResponseRecord("alice", "q1", 0),
            ResponseRecord("bob", "q0", 1),
        ],
    )


class TestValidate:
    def test_well_formed_is_clean(self):
        assert validate(make_data(), GoldSet({"q0": 0})) == []

    def test_duplicate_record(self):
        data = ResponseDataset(
            questions=[QuestionSpec("q0", 2)],
            records=[ResponseRecord("a", "q0", 0), ResponseRecord("a", "q0", 1)],
        )
        problems = validate(data, GoldSet())
        assert len(problems) == 1
        assert problems[0].rule == "record.duplicate"
        assert "(a, q0)" in problems[0].subject

    def test_unknown_question(self):
        data = ResponseDataset(
            questions=[QuestionSpec("q0", 2)],
            records=[ResponseRecord("a", "nope", 0)],
        )
        rules = [v.rule for v in validate(data, GoldSet())]
        assert rules == ["record.unknown_question"]

    def test_response_out_of_range(self):
        data = ResponseDataset(
            questions=[QuestionSpec("q0", 2)],
            records=[ResponseRecord("a", "q0", 2)],
        )
        rules = [v.rule for v in validate(data, GoldSet())]
        assert rules == ["record.response_range"]

    def test_gold_option_equal_to_num_options(self):
        problems = validate(make_data(), GoldSet({"q1": 2}))
        assert [v.rule for v in problems] == ["gold.option_range"]

    def test_gold_unknown_question(self):
        problems = validate(make_data(), GoldSet({"zzz": 0}))
        assert [v.rule for v in problems] == ["gold.unknown_question"]

    def test_single_option_question_rejected(self):
        data = ResponseDataset(questions=[QuestionSpec("q0", 1)])
        assert [v.rule for v in validate(data, GoldSet())] == ["question.num_options"]

    def test_option_text_length_mismatch(self):
        data = ResponseDataset(
            questions=[QuestionSpec("q0", 3, option_texts=("a", "b"))]
        )
        assert [v.rule for v in validate(data, GoldSet())] == ["question.option_texts"]


class TestResponseDataset:
    def test_participants_union_declared_and_observed(self):
        data = ResponseDataset(
            questions=[QuestionSpec("q0", 2)],
            records=[ResponseRecord("seen", "q0", 0)],
            participants=["declared"],
        )
        assert data.participants == ("declared", "seen")

    def test_silent_participant_is_legal(self):
        data = ResponseDataset(
            questions=[QuestionSpec("q0", 2)], participants=["ghost"]
        )
        assert validate(data, GoldSet()) == []

    def test_subset_participants(self):
        sub = make_data().subset_participants(["bob"])
        assert sub.participants == ("bob",)
        assert len(sub.records) == 1
        assert len(sub.questions) == 2

    def test_lookup_helpers(self):
        data = make_data()
        assert data.num_options("q0") == 3
        assert data.question("q1").question_id == "q1"
        assert len(data.records_for_question("q0")) == 2


class TestPriorSpec:
    def test_defaults(self):
        priors = default_priors()
        assert priors.ability_prior.mean == 0.0
        assert priors.ability_prior.variance == 1.0
        assert priors.precision_prior.mean == pytest.approx(1.0)
        assert priors.discrimination.is_learned

    def test_fixed_discrimination_validation(self):
        assert Discrimination.fixed(2.5).tau == 2.5
        with pytest.raises(ValueError):
            Discrimination.fixed(0.0)
        with pytest.raises(ValueError):
            Discrimination(mode="learned", tau=1.0)
        with pytest.raises(ValueError):
            Discrimination(mode="other")
