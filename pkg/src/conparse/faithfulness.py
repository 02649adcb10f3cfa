"""Detect trees that are unfaithful to the input sentence.

A structurally fine tree can still hallucinate: its yield may differ in
length (over-generation), differ word-for-word (word mismatch), or be absent
entirely (prediction failure). Over-generation subdivides into repetition,
continue-writing, and other length errors.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from enum import Enum
from typing import Mapping, Sequence

from .tree import ConstituencyTree, Token
from .validity import Inapplicable


class UnfaithfulKind(str, Enum):
    OVER_GENERATION = "over_generation"
    WORD_MISMATCH = "word_mismatch"
    PREDICTION_FAILURE = "prediction_failure"


class OvergenSub(str, Enum):
    REPETITION = "repetition"
    CONTINUE_WRITING = "continue_writing"
    OTHER = "other"


# Minimum length of a repeated block; shorter repeats occur in natural text.
REPEAT_WINDOW = 3


@dataclass(frozen=True)
class FaithfulnessError:
    kind: UnfaithfulKind
    sub: OvergenSub | None
    detail: str
    positions: tuple[int, ...]

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "sub": self.sub.value if self.sub else None,
            "detail": self.detail,
            "positions": list(self.positions),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FaithfulnessError":
        sub = d.get("sub")
        return cls(
            kind=UnfaithfulKind(d["kind"]),
            sub=OvergenSub(sub) if sub else None,
            detail=str(d.get("detail", "")),
            positions=tuple(int(p) for p in d.get("positions", [])),
        )


@dataclass(frozen=True)
class FaithfulnessReport:
    faithful: bool
    errors: tuple[FaithfulnessError, ...]

    def to_dict(self) -> dict:
        return {"faithful": self.faithful, "errors": [e.to_dict() for e in self.errors]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "FaithfulnessReport":
        errors = tuple(FaithfulnessError.from_dict(e) for e in d.get("errors", []))
        faithful = bool(d["faithful"]) if "faithful" in d else not errors
        if faithful and errors:
            faithful = False
        return cls(faithful=faithful, errors=errors)


def lenient_yield(raw: str) -> list[str] | None:
    """Pull leaf words out of bracketed text, tolerating structural damage.

    The first bare token after each '(' is a label; later bare tokens are
    words. Scans the whole output, so a doubled tree yields doubled words.
    Returns None when no words can be found.
    """
    if raw is None or "(" not in raw:
        return None
    start = raw.find("(")
    tokens = raw[start:].replace("(", " ( ").replace(")", " ) ").split()
    words: list[str] = []
    expect_label = False
    depth = 0
    for t in tokens:
        if t == "(":
            depth += 1
            expect_label = True
        elif t == ")":
            depth = max(0, depth - 1)
            expect_label = False
        elif expect_label:
            expect_label = False
        elif depth > 0:
            words.append(t)
    return words or None


def _surfaces(sentence: Sequence[Token] | Sequence[str]) -> list[str]:
    return [t.surface if isinstance(t, Token) else str(t) for t in sentence]


def _find_novel_repeat(pred: list[str], gold: list[str]) -> list[str] | None:
    """A block of >=REPEAT_WINDOW tokens doubled consecutively in pred but not in gold."""

    def contains(haystack: list[str], needle: list[str]) -> bool:
        k = len(needle)
        return any(haystack[i:i + k] == needle for i in range(len(haystack) - k + 1))

    for size in range(len(pred) // 2, REPEAT_WINDOW - 1, -1):
        for i in range(len(pred) - 2 * size + 1):
            block = pred[i:i + size]
            if pred[i + size:i + 2 * size] == block and not contains(gold, block + block):
                return block
    return None


def classify_overgeneration(
    pred: Sequence[Token] | Sequence[str], gold: Sequence[Token] | Sequence[str]
) -> OvergenSub:
    """Subclassify a length mismatch between predicted and input words."""
    pred_w, gold_w = _surfaces(pred), _surfaces(gold)
    if _find_novel_repeat(pred_w, gold_w) is not None:
        return OvergenSub.REPETITION
    if len(pred_w) > len(gold_w) and pred_w[:len(gold_w)] == gold_w:
        return OvergenSub.CONTINUE_WRITING
    return OvergenSub.OTHER


def check_faithfulness(
    pred: ConstituencyTree | str, sentence: Sequence[Token] | Sequence[str]
) -> FaithfulnessReport:
    """Compare the predicted yield against the input sentence tokens."""
    gold_w = _surfaces(sentence)

    if isinstance(pred, ConstituencyTree):
        pred_w = [t.surface for t in pred.sentence]
    else:
        extracted = lenient_yield(pred)
        if extracted is None:
            err = FaithfulnessError(
                UnfaithfulKind.PREDICTION_FAILURE, None,
                "The output does not contain a parseable constituency tree.",
                (),
            )
            return FaithfulnessReport(faithful=False, errors=(err,))
        pred_w = extracted

    if len(pred_w) != len(gold_w):
        sub = classify_overgeneration(pred_w, gold_w)
        if sub is OvergenSub.REPETITION:
            block = _find_novel_repeat(pred_w, gold_w)
            detail = f"The predicted tree repeats the fragment '{' '.join(block)}'."
        elif sub is OvergenSub.CONTINUE_WRITING:
            detail = "The predicted tree continues past the end of the input sentence."
        else:
            detail = (
                f"The predicted tree has {len(pred_w)} words but the input "
                f"sentence has {len(gold_w)}."
            )
        diverge = next(
            (i for i, (a, b) in enumerate(zip(pred_w, gold_w)) if a != b),
            min(len(pred_w), len(gold_w)),
        )
        err = FaithfulnessError(
            UnfaithfulKind.OVER_GENERATION, sub, detail, (diverge,)
        )
        return FaithfulnessReport(faithful=False, errors=(err,))

    errors = tuple(
        FaithfulnessError(
            UnfaithfulKind.WORD_MISMATCH, None,
            f"'{p}' does not exist in the original input sentence.",
            (i,),
        )
        for i, (p, g) in enumerate(zip(pred_w, gold_w))
        if p != g
    )
    return FaithfulnessReport(faithful=not errors, errors=errors)


# Built-in word-substitution table for unfaithful-sample construction:
# synonym swaps plus the digit alterations seen in hallucinated output.
SUBSTITUTIONS: Mapping[str, str] = {
    "located": "situated",
    "big": "large",
    "small": "little",
    "quick": "fast",
    "old": "ancient",
    "new": "recent",
    "buy": "purchase",
    "buys": "purchases",
    "sell": "trade",
    "sells": "trades",
    "begin": "start",
    "began": "started",
    "end": "finish",
    "ended": "finished",
    "house": "home",
    "man": "gentleman",
    "woman": "lady",
    "car": "automobile",
    "road": "street",
    "city": "town",
    "river": "stream",
    "happy": "glad",
    "sad": "unhappy",
    "rich": "wealthy",
    "poor": "needy",
    "important": "significant",
    "company": "firm",
    "market": "marketplace",
    "price": "cost",
    "share": "stock",
    "report": "account",
    "year": "annum",
    "week": "period",
    "government": "administration",
    "law": "statute",
    "said": "stated",
    "says": "states",
    "show": "display",
    "showed": "displayed",
    "make": "build",
    "made": "built",
    "found": "discovered",
    "runs": "operates",
    "sleeps": "rests",
    "near": "beside",
    "under": "beneath",
    "84": "81",
    "12": "21",
    "1989": "1998",
    "100": "110",
    "50": "40",
}


def corrupt_faithfulness(
    tree: ConstituencyTree,
    table: Mapping[str, str] | None = None,
    seed: int = 0,
) -> tuple[str, str]:
    """Replace exactly one word with its table entry.

    Returns (corrupted text, annotation); the annotation is the checker's own
    word-mismatch message for the substituted word.
    """
    table = SUBSTITUTIONS if table is None else table
    rng = random.Random(seed)
    candidates = [t.index for t in tree.sentence if t.surface in table]
    if not candidates:
        raise Inapplicable("no tree word appears in the substitution table")
    target = candidates[rng.randrange(len(candidates))]
    replacement = table[tree.sentence[target].surface]

    counter = {"i": 0}

    def walk(node):
        if node.is_preterminal:
            i = counter["i"]
            counter["i"] += 1
            word = replacement if i == target else node.token.surface
            return f"({node.label} {word})"
        return f"({node.label} {' '.join(walk(c) for c in node.children)})"

    text = walk(tree.root)
    annotation = f"'{replacement}' does not exist in the original input sentence."
    return text, annotation
