import json
import random

import pytest

from conparse import (
    ErrorExemplar,
    MissingDemonstrations,
    PUNCT_TABLE,
    Strategy,
    build_checker_prompt,
    build_prompt,
    decode,
    default_error_exemplars,
    export_finetune_records,
    make_prompt_spec,
    parse_bracketed,
    postprocess,
    preprocess,
    preprocess_tree,
    render_bracketed,
    tokenize,
)
from conparse.linearize import LinearizedTree
from conparse.treegen import random_tree

from helpers import SINGAPORE

DEMOS = [
    ("the cat sleeps", "(S (NP (DT the) (NN cat)) (VP (VBZ sleeps)))"),
    ("dogs run", "(S (NP (NNS dogs)) (VP (VBP run)))"),
    ("a b", "(X (A a) (B b))"),
    ("c d", "(X (C c) (D d))"),
    ("e f", "(X (E e) (F f))"),
]


def test_preprocess_period():
    tokens = [t.surface for t in preprocess("Singapore is located in Asia.")]
    assert tokens == ["Singapore", "is", "located", "in", "Asia", "_PERIOD_"]


def test_preprocess_comma():
    assert [t.surface for t in preprocess("Hello , world")] == ["Hello", "_COMMA_", "world"]


def test_preprocess_attached_punctuation():
    tokens = [t.surface for t in preprocess('He said "go!" (twice).')]
    assert tokens == [
        "He", "said", "_QUOTE_", "go", "_EMARK_", "_QUOTE_",
        "-LRB-", "twice", "-RRB-", "_PERIOD_",
    ]


def test_postprocess_inverts_tokenwise():
    sentences = [
        "Singapore is located in Asia.",
        "Hello , world",
        "Wait: what?! (really)",
        "plain words only",
    ]
    for s in sentences:
        assert postprocess(preprocess(s)) == tokenize(s)


def test_punct_table_is_injective():
    assert len(set(PUNCT_TABLE.values())) == len(PUNCT_TABLE)


def test_preprocess_tree_maps_leaf_words():
    tree = parse_bracketed("(S (NP (NN dog)) (. .))")
    mapped = preprocess_tree(tree)
    assert mapped.words == ("dog", "_PERIOD_")
    assert [leaf.label for leaf in mapped.root.leaves()] == ["NN", "."]


def test_zero_shot_sections():
    spec = make_prompt_spec("zero", "Singapore is located in Asia")
    prompt = build_prompt(spec)
    i_intro = prompt.index("Task Introduction:")
    i_instr = prompt.index("Instruction:")
    i_input = prompt.index("Task Input:")
    assert i_intro < i_instr < i_input
    assert "Error-Avoiding Instruction:" not in prompt
    assert "Training Instances:" not in prompt
    assert prompt.rstrip().endswith("Tree:")


def test_few_shot_demo_count():
    spec = make_prompt_spec("few", "x y z", shots=5, demonstrations=DEMOS)
    prompt = build_prompt(spec)
    assert prompt.count("Sentence:") == 6  # 5 demos + task input
    assert prompt.index("Training Instances:") < prompt.index("Task Input:")


def test_few_shot_requires_demos():
    with pytest.raises(MissingDemonstrations):
        make_prompt_spec("few", "x", shots=3, demonstrations=DEMOS[:2])
    with pytest.raises(MissingDemonstrations):
        make_prompt_spec("few", "x", shots=0, demonstrations=[])


def test_les_contains_paper_annotations():
    spec = make_prompt_spec("les", "Singapore is located in Asia")
    prompt = build_prompt(spec)
    assert "The constituent (NNP) lacks a word." in prompt
    assert "'situated' does not exist in the original input sentence." in prompt
    assert "Error-Avoiding Instruction:" in prompt


def test_les_is_superset_of_base():
    base = build_prompt(make_prompt_spec("zero", "a b c"))
    les = build_prompt(make_prompt_spec("les", "a b c"))
    base_lines = base.splitlines()
    les_lines = les.splitlines()
    it = iter(les_lines)
    assert all(line in it for line in base_lines)  # subsequence, order preserved
    assert len(les_lines) > len(base_lines)


def test_les_with_shots_includes_demos():
    spec = make_prompt_spec("les", "x", shots=2, demonstrations=DEMOS)
    prompt = build_prompt(spec)
    assert "Training Instances:" in prompt
    assert prompt.index("Error-Avoiding Instruction:") < prompt.index("Training Instances:")


def test_les_needs_both_exemplar_kinds():
    only_invalid = [e for e in default_error_exemplars() if e.kind == "invalid"]
    with pytest.raises(MissingDemonstrations):
        make_prompt_spec("les", "x", error_exemplars=only_invalid)


def test_default_exemplars_balanced():
    exemplars = default_error_exemplars()
    assert len(exemplars) == 4
    assert sum(1 for e in exemplars if e.kind == "invalid") == 2
    assert sum(1 for e in exemplars if e.kind == "unfaithful") == 2


def test_exemplar_validation():
    with pytest.raises(ValueError):
        ErrorExemplar("(X)", "", "invalid")
    with pytest.raises(ValueError):
        ErrorExemplar("(X)", "msg", "bogus")


def test_prompt_determinism():
    a = build_prompt(make_prompt_spec("les", "a b", shots=2, demonstrations=DEMOS))
    b = build_prompt(make_prompt_spec("les", "a b", shots=2, demonstrations=DEMOS))
    assert a == b


def test_instruction_varies_with_strategy():
    prompts = {
        s: build_prompt(make_prompt_spec("zero", "a b", strategy=s))
        for s in Strategy
    }
    assert "bracketed sequence" in prompts[Strategy.BRACKET]
    assert "SHIFT" in prompts[Strategy.TRANSITION]
    assert "A is a B." in prompts[Strategy.SPAN]


def test_checker_prompt_contents():
    prompt = build_checker_prompt("validity", SINGAPORE, "Singapore is located in Asia")
    assert SINGAPORE in prompt
    assert "Singapore is located in Asia" in prompt
    assert '"valid"' in prompt
    assert "bracket_unmatched" in prompt


def test_checker_prompt_demos_verbatim_in_order():
    demos = ["DEMO-ONE text", "DEMO-TWO text"]
    prompt = build_checker_prompt("faithfulness", "(X (A a))", "a", demos)
    assert prompt.index("DEMO-ONE text") < prompt.index("DEMO-TWO text")
    assert prompt.index("DEMO-TWO text") < prompt.index("Tree:")


def test_checker_prompt_role_check():
    with pytest.raises(ValueError):
        build_checker_prompt("syntax", "(X (A a))", "a")


def test_finetune_single_tree():
    tree = parse_bracketed(SINGAPORE)
    records = list(export_finetune_records([tree], Strategy.BRACKET))
    assert len(records) == 1
    record = records[0]
    assert record.instruction == "Generate the constituency tree of the given sentence."
    assert record.input == "Singapore is located in Asia"
    decoded = decode(LinearizedTree(Strategy.BRACKET, record.output))
    assert render_bracketed(decoded) == SINGAPORE
    assert record.sequence.endswith(record.output)
    assert record.n_pieces == len(record.sequence.split())


@pytest.mark.parametrize("strategy", list(Strategy))
def test_finetune_round_trip_random(strategy):
    rng = random.Random(55)
    trees = [random_tree(rng, unique_tokens=True) for _ in range(20)]
    records = list(export_finetune_records(trees, strategy))
    assert len(records) == 20
    for tree, record in zip(trees, records):
        decoded = decode(LinearizedTree(strategy, record.output))
        assert render_bracketed(decoded) == render_bracketed(tree)


def test_finetune_json_fields():
    tree = parse_bracketed("(X (A a))")
    record = next(iter(export_finetune_records([tree])))
    payload = json.loads(json.dumps(record.to_dict()))
    assert set(payload) == {"instruction", "input", "output"}
