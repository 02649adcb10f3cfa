import json
import random

import pytest

from conparse import (
    Inapplicable,
    InvalidKind,
    ValidityReport,
    check_validity,
    corrupt_validity,
    parse_bracketed,
    render_bracketed,
)
from conparse.treegen import random_tree

from helpers import SINGAPORE, SINGAPORE_MISSING


def test_valid_singapore():
    report = check_validity(SINGAPORE, None)
    assert report.valid
    assert report.errors == ()


def test_missing_word_annotation():
    report = check_validity(SINGAPORE_MISSING)
    assert not report.valid
    assert len(report.errors) == 1
    err = report.errors[0]
    assert err.kind is InvalidKind.MISSING_WORD
    assert err.location == "(NNP)"
    assert err.message == "The constituent (NNP) lacks a word."


def test_more_than_one_word_leaf():
    report = check_validity("(S (NP (NNP China)) (VP (VBD had been putting)))")
    kinds = [e.kind for e in report.errors]
    assert kinds == [InvalidKind.MORE_THAN_ONE_WORD]
    assert report.errors[0].location == "(VBD had been putting)"


def test_bracket_unmatched_counts():
    report = check_validity("(S (NP (NNP Singapore))")
    assert [e.kind for e in report.errors] == [InvalidKind.BRACKET_UNMATCHED]
    assert "3 left bracket(s) but 2 right bracket(s)" in report.errors[0].message


def test_bracket_unmatched_no_closers():
    report = check_validity("(S (NP (NNP")
    assert [e.kind for e in report.errors] == [InvalidKind.BRACKET_UNMATCHED]


def test_bracket_unmatched_closer_before_opener():
    for raw in (")(", "dog ) then ( cat", ") ("):
        report = check_validity(raw)
        assert [e.kind for e in report.errors] == [InvalidKind.BRACKET_UNMATCHED]


def test_bracket_unmatched_interleaved():
    report = check_validity("(S (NN a)) ) (")
    assert [e.kind for e in report.errors] == [InvalidKind.BRACKET_UNMATCHED]


def test_bracket_precedence_over_leaf_errors():
    # an empty leaf and a missing bracket: only the bracket error is reported
    report = check_validity("(S (NP (NNP )) (VP (VBZ is)")
    assert [e.kind for e in report.errors] == [InvalidKind.BRACKET_UNMATCHED]


def test_other_when_no_tree():
    for raw in ("", "I cannot parse this sentence.", None):
        report = check_validity(raw)
        assert [e.kind for e in report.errors] == [InvalidKind.OTHER]
        assert report.errors[0].location is None


def test_leading_and_trailing_prose_ignored():
    report = check_validity(f"Here is the tree: {SINGAPORE} Hope this helps!")
    assert report.valid


def test_all_leaf_errors_listed():
    raw = "(S (NP (NNP )) (VP (VBZ is going) (NP (NN ))))"
    report = check_validity(raw)
    kinds = sorted(e.kind.value for e in report.errors)
    assert kinds == ["missing_word", "missing_word", "more_than_one_word"]


def test_multiple_top_level_trees_are_other():
    report = check_validity("(S (NN a)) (S (NN b))")
    assert [e.kind for e in report.errors] == [InvalidKind.OTHER]
    assert "2 top-level constituents" in report.errors[0].message


def test_unlabeled_constituent_is_other():
    report = check_validity("( (NN dog))")
    assert [e.kind for e in report.errors] == [InvalidKind.OTHER]


def test_soundness_on_rendered_trees():
    rng = random.Random(13)
    for _ in range(100):
        tree = random_tree(rng)
        assert check_validity(render_bracketed(tree)).valid


def test_determinism():
    raw = "(S (NP (NNP )) (VP (VBZ is)"
    assert check_validity(raw) == check_validity(raw)


def test_location_present_except_other():
    import random
    rng = random.Random(6)
    alphabet = "()ab NNP."
    for _ in range(5000):
        raw = "".join(rng.choice(alphabet) for _ in range(rng.randint(0, 30)))
        for err in check_validity(raw).errors:
            if err.kind is InvalidKind.OTHER:
                assert err.location is None
            else:
                assert err.location is not None


@pytest.mark.parametrize("kind", [
    InvalidKind.MISSING_WORD,
    InvalidKind.MORE_THAN_ONE_WORD,
    InvalidKind.BRACKET_UNMATCHED,
])
def test_corruption_round_trip(kind):
    rng = random.Random(1000 + hash(kind) % 1000)
    for i in range(60):
        tree = random_tree(rng)
        while len(tree.sentence) < 2:
            tree = random_tree(rng)
        text, annotation = corrupt_validity(tree, kind, seed=i)
        report = check_validity(text)
        assert not report.valid
        assert any(e.kind is kind for e in report.errors)
        assert annotation in [e.message for e in report.errors]


def test_corrupt_missing_word_singapore():
    tree = parse_bracketed(SINGAPORE)
    text, annotation = corrupt_validity(tree, InvalidKind.MISSING_WORD, seed=7)
    report = check_validity(text)
    assert [e.kind for e in report.errors] == [InvalidKind.MISSING_WORD]
    assert annotation.endswith("lacks a word.")


def test_corrupt_bracket_drops_one_paren():
    tree = parse_bracketed(SINGAPORE)
    text, _ = corrupt_validity(tree, InvalidKind.BRACKET_UNMATCHED, seed=3)
    assert text.count(")") == SINGAPORE.count(")") - 1
    assert check_validity(text).errors[0].kind is InvalidKind.BRACKET_UNMATCHED


def test_corrupt_multiword_inapplicable_on_single_leaf():
    tree = parse_bracketed("(X (A a))")
    with pytest.raises(Inapplicable):
        corrupt_validity(tree, InvalidKind.MORE_THAN_ONE_WORD, seed=0)


def test_corrupt_other_inapplicable():
    tree = parse_bracketed("(X (A a))")
    with pytest.raises(Inapplicable):
        corrupt_validity(tree, InvalidKind.OTHER, seed=0)


def test_corrupt_deterministic():
    tree = parse_bracketed(SINGAPORE)
    a = corrupt_validity(tree, InvalidKind.MISSING_WORD, seed=5)
    b = corrupt_validity(tree, InvalidKind.MISSING_WORD, seed=5)
    assert a == b


def test_corrupt_multiword_without_sibling_preterminals():
    # no two preterminals share a parent, so the fallback path is used
    tree = parse_bracketed("(S (NP (NN dog)) (VP (VBZ runs)))")
    # NN dog and VBZ runs live under different parents
    text, annotation = corrupt_validity(tree, InvalidKind.MORE_THAN_ONE_WORD, seed=0)
    report = check_validity(text)
    assert any(e.kind is InvalidKind.MORE_THAN_ONE_WORD for e in report.errors)
    assert "contains more than one word." in annotation


def test_report_json_schema():
    report = check_validity(SINGAPORE_MISSING)
    payload = json.loads(report.to_json())
    assert payload["valid"] is False
    assert payload["errors"][0] == {
        "kind": "missing_word",
        "location": "(NNP)",
        "message": "The constituent (NNP) lacks a word.",
    }


def test_report_from_dict_round_trip():
    report = check_validity(SINGAPORE_MISSING)
    again = ValidityReport.from_dict(json.loads(report.to_json()))
    assert again == report


def test_from_dict_resolves_inconsistent_flag():
    report = ValidityReport.from_dict({
        "valid": True,
        "errors": [{"kind": "other", "location": None, "message": "x"}],
    })
    assert not report.valid
