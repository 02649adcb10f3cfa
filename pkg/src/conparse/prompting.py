"""Sentence preprocessing and prompt construction.

Prompts follow a fixed section order: Task Introduction, Instruction, an
optional Error-Avoiding Instruction built from erroneous samples, optional
Training Instances, and the Task Input. Rendering is a pure function of its
inputs, so identical inputs give byte-identical prompts.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources
from typing import Iterable, Iterator, Sequence

from .linearize import Strategy, encode, decode, LinearizedTree
from .tree import ConstituencyTree, Token, TreeNode


class MissingDemonstrations(ValueError):
    """Few-shot or LES prompting without the required examples."""


# Reversible punctuation replacement; brackets map to their PTB escapes so
# they cannot collide with tree structure.
PUNCT_TABLE = {
    ".": "_PERIOD_",
    ",": "_COMMA_",
    ":": "_COLON_",
    ";": "_SEMICOLON_",
    "?": "_QMARK_",
    "!": "_EMARK_",
    '"': "_QUOTE_",
    "'": "_APOS_",
    "(": "-LRB-",
    ")": "-RRB-",
}
REVERSE_PUNCT = {v: k for k, v in PUNCT_TABLE.items()}


def tokenize(text: str) -> list[str]:
    """Whitespace tokenization with table punctuation peeled off token edges."""
    out: list[str] = []
    for piece in text.split():
        lead: list[str] = []
        tail: list[str] = []
        while piece and piece[0] in PUNCT_TABLE:
            lead.append(piece[0])
            piece = piece[1:]
        while piece and piece[-1] in PUNCT_TABLE:
            tail.append(piece[-1])
            piece = piece[:-1]
        out.extend(lead)
        if piece:
            out.append(piece)
        out.extend(reversed(tail))
    return out


def preprocess(sentence: str) -> list[Token]:
    """Tokenize and replace punctuation marks with their special symbols."""
    words = [PUNCT_TABLE.get(w, w) for w in tokenize(sentence)]
    return [Token(w, i) for i, w in enumerate(words)]


def postprocess(tokens: Sequence[Token] | Sequence[str]) -> list[str]:
    """Map special symbols back to the original punctuation, token-wise."""
    words = [t.surface if isinstance(t, Token) else str(t) for t in tokens]
    return [REVERSE_PUNCT.get(w, w) for w in words]


def preprocess_tree(tree: ConstituencyTree) -> ConstituencyTree:
    """Apply the punctuation mapping to the tree's leaf words."""

    def walk(node: TreeNode) -> TreeNode:
        if node.is_preterminal:
            surface = PUNCT_TABLE.get(node.token.surface, node.token.surface)
            return TreeNode(node.label, (), Token(surface, node.token.index))
        return TreeNode(node.label, tuple(walk(c) for c in node.children))

    return ConstituencyTree.from_root(walk(tree.root))


# --- templates ----------------------------------------------------------------

_PLACEHOLDER_RE = re.compile(r"\{([a-z_]+)\}")


def render_template(text: str, **fields: str) -> str:
    """Substitute {name} placeholders; literal braces elsewhere are left alone."""

    def sub(m: re.Match) -> str:
        name = m.group(1)
        if name not in fields:
            raise KeyError(f"template placeholder {{{name}}} has no value")
        return fields[name]

    return _PLACEHOLDER_RE.sub(sub, text)


def load_template(name: str) -> str:
    return (
        resources.files("conparse.templates")
        .joinpath(f"{name}.txt")
        .read_text(encoding="utf-8")
        .rstrip("\n")
    )


def default_task_introduction() -> str:
    return load_template("task_introduction")


def default_instruction(strategy: Strategy | str) -> str:
    return load_template(f"instruction_{Strategy(strategy).value}")


# --- prompt specs ---------------------------------------------------------------

@dataclass(frozen=True)
class ErrorExemplar:
    erroneous_tree: str
    annotation: str
    kind: str  # "invalid" | "unfaithful"

    def __post_init__(self):
        if not self.annotation:
            raise ValueError("exemplar annotation must be non-empty")
        if self.kind not in ("invalid", "unfaithful"):
            raise ValueError(f"unknown exemplar kind {self.kind!r}")


def default_error_exemplars() -> tuple[ErrorExemplar, ...]:
    """Four curated erroneous samples: two invalid, two unfaithful."""
    return (
        ErrorExemplar(
            "(S (NP (NNP Singapore)) (VP (VBZ is) (VP (VBN located) "
            "(PP (IN in) (NP (NNP ))))))",
            "The constituent (NNP) lacks a word.",
            "invalid",
        ),
        ErrorExemplar(
            "(S (NP (NNP China)) (VP (VBD had been putting) (NP (JJ huge) "
            "(NNS orders))))",
            "The constituent (VBD had been putting) contains more than one word.",
            "invalid",
        ),
        ErrorExemplar(
            "(S (NP (NNP Singapore)) (VP (VBZ is) (VP (VBN situated) "
            "(PP (IN in) (NP (NNP Asia))))))",
            "'situated' does not exist in the original input sentence.",
            "unfaithful",
        ),
        ErrorExemplar(
            "(S (NP (DT The) (NN project)) (VP (VBD took) (NP (CD 81) "
            "(NNS years))))",
            "'81' does not exist in the original input sentence.",
            "unfaithful",
        ),
    )


@dataclass(frozen=True)
class PromptSpec:
    task_introduction: str
    instruction: str
    demonstrations: tuple[tuple[str, str], ...]  # (sentence, linearized tree)
    error_avoiding: tuple[ErrorExemplar, ...]
    task_input: str

    def __post_init__(self):
        if not self.task_introduction or not self.instruction or not self.task_input:
            raise ValueError("task_introduction, instruction and task_input must be non-empty")


def make_prompt_spec(
    mode: str,
    task_input: str,
    *,
    strategy: Strategy | str = Strategy.BRACKET,
    shots: int = 0,
    demonstrations: Sequence[tuple[str, str]] = (),
    error_exemplars: Sequence[ErrorExemplar] | None = None,
    task_introduction: str | None = None,
    instruction: str | None = None,
) -> PromptSpec:
    """Assemble a PromptSpec for zero-shot, few-shot or LES prompting.

    LES uses the zero-shot base when shots == 0 and the few-shot base
    otherwise.
    """
    if mode not in ("zero", "few", "les"):
        raise ValueError(f"unknown prompt mode {mode!r}")

    demos: tuple[tuple[str, str], ...] = ()
    if mode == "few" or (mode == "les" and shots > 0):
        k = shots if shots > 0 else len(demonstrations)
        if k < 1 or len(demonstrations) < k:
            raise MissingDemonstrations(
                f"{k} demonstrations required, {len(demonstrations)} provided"
            )
        demos = tuple(demonstrations[:k])

    exemplars: tuple[ErrorExemplar, ...] = ()
    if mode == "les":
        exemplars = tuple(
            error_exemplars if error_exemplars is not None else default_error_exemplars()
        )
        kinds = {e.kind for e in exemplars}
        if not {"invalid", "unfaithful"} <= kinds:
            raise MissingDemonstrations(
                "LES needs at least one invalid and one unfaithful exemplar"
            )

    return PromptSpec(
        task_introduction=task_introduction or default_task_introduction(),
        instruction=instruction or default_instruction(strategy),
        demonstrations=demos,
        error_avoiding=exemplars,
        task_input=task_input,
    )


def build_prompt(spec: PromptSpec) -> str:
    """Render the prompt sections in their fixed order."""
    parts = [
        "Task Introduction:\n" + spec.task_introduction,
        "Instruction:\n" + spec.instruction,
    ]
    if spec.error_avoiding:
        exemplar_tpl = load_template("error_exemplar")
        rendered = "\n".join(
            render_template(exemplar_tpl, tree=e.erroneous_tree, annotation=e.annotation)
            for e in spec.error_avoiding
        )
        parts.append(
            "Error-Avoiding Instruction:\n"
            + load_template("error_avoiding_header")
            + "\n"
            + rendered
        )
    if spec.demonstrations:
        demo_tpl = load_template("demonstration")
        rendered = "\n".join(
            render_template(demo_tpl, sentence=s, tree=t)
            for s, t in spec.demonstrations
        )
        parts.append("Training Instances:\n" + rendered)
    parts.append(
        "Task Input:\n"
        + render_template(load_template("task_input"), sentence=spec.task_input)
    )
    return "\n\n".join(parts)


def build_checker_prompt(
    role: str,
    tree: str,
    sentence: str,
    demos: Sequence[str] = (),
) -> str:
    """Prompt a checker agent to reply in the corresponding report JSON schema.

    Demonstrations are included verbatim, in order, before the checked tree.
    """
    if role not in ("validity", "faithfulness"):
        raise ValueError(f"unknown checker role {role!r}")
    template = load_template(f"checker_{role}")
    demo_block = "".join(d.rstrip("\n") + "\n" for d in demos)
    return render_template(template, demos=demo_block, tree=tree, sentence=sentence)


# --- fine-tune record export ------------------------------------------------------

@dataclass(frozen=True)
class FinetuneRecord:
    """One training record: instruction, input sentence, linearized tree."""

    instruction: str
    input: str
    output: str

    @property
    def sequence(self) -> str:
        """Instruction, task input and linearized tree concatenated."""
        return f"{self.instruction}\n{self.input}\n{self.output}"

    @property
    def n_pieces(self) -> int:
        """Length of the concatenated sequence under whitespace splitting."""
        return len(self.sequence.split())

    def to_dict(self) -> dict:
        return {"instruction": self.instruction, "input": self.input, "output": self.output}


def export_finetune_records(
    trees: Iterable[ConstituencyTree],
    strategy: Strategy | str = Strategy.BRACKET,
    *,
    instruction: str | None = None,
    apply_preprocessing: bool = True,
) -> Iterator[FinetuneRecord]:
    """One record per tree; the record's output decodes back to its tree."""
    strategy = Strategy(strategy)
    instruction = instruction or load_template("finetune_instruction")
    for tree in trees:
        if apply_preprocessing:
            tree = preprocess_tree(tree)
        sentence = " ".join(t.surface for t in tree.sentence)
        payload = encode(tree, strategy).payload
        yield FinetuneRecord(instruction=instruction, input=sentence, output=payload)


def decode_finetune_output(record: FinetuneRecord, strategy: Strategy | str) -> ConstituencyTree:
    """Decode the linearized-tree suffix of a record's sequence."""
    return decode(LinearizedTree(Strategy(strategy), record.output))
