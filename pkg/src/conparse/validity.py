"""Structural validity checking and rule-based corruption of predicted trees.

Invalid outputs fall into four groups: a leaf with more than one word, a leaf
with no word, unmatched brackets, and everything else (including outputs with
no parseable tree at all). The checker lists every detectable error, except
that bracket imbalance suppresses leaf diagnosis, which would be unreliable.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from enum import Enum

from .tree import ConstituencyTree, TreeNode, render_bracketed


class InvalidKind(str, Enum):
    MORE_THAN_ONE_WORD = "more_than_one_word"
    MISSING_WORD = "missing_word"
    BRACKET_UNMATCHED = "bracket_unmatched"
    OTHER = "other"


class Inapplicable(ValueError):
    """The requested corruption cannot be applied to this tree."""


@dataclass(frozen=True)
class ValidityError:
    kind: InvalidKind
    location: str | int | None
    message: str

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "location": self.location, "message": self.message}

    @classmethod
    def from_dict(cls, d: dict) -> "ValidityError":
        return cls(
            kind=InvalidKind(d["kind"]),
            location=d.get("location"),
            message=str(d["message"]),
        )


@dataclass(frozen=True)
class ValidityReport:
    valid: bool
    errors: tuple[ValidityError, ...]

    def to_dict(self) -> dict:
        return {"valid": self.valid, "errors": [e.to_dict() for e in self.errors]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "ValidityReport":
        errors = tuple(ValidityError.from_dict(e) for e in d.get("errors", []))
        valid = bool(d["valid"]) if "valid" in d else not errors
        if valid and errors:
            valid = False
        return cls(valid=valid, errors=errors)


def _clean(errors: list[ValidityError]) -> ValidityReport:
    return ValidityReport(valid=not errors, errors=tuple(errors))


def extract_tree_region(raw: str) -> str | None:
    """The substring from the first '(' to the last ')', or None if absent.

    Prose before or after the brackets (preambles, sign-offs) is ignored.
    """
    if raw is None:
        return None
    start = raw.find("(")
    end = raw.rfind(")")
    if start == -1 or end == -1 or end < start:
        return None
    return raw[start:end + 1]


def check_validity(raw: str, sentence=None) -> ValidityReport:
    """Classify every structural defect of a predicted tree string.

    The sentence argument is accepted for interface symmetry with the
    faithfulness checker; validity is judged on structure alone.
    """
    errors: list[ValidityError] = []

    if raw is None or not raw.strip() or "(" not in raw:
        errors.append(ValidityError(
            InvalidKind.OTHER, None,
            "The output does not contain a constituency tree.",
        ))
        return _clean(errors)

    if ")" not in raw:
        n_left = raw.count("(")
        errors.append(ValidityError(
            InvalidKind.BRACKET_UNMATCHED, raw.find("("),
            f"The tree has {n_left} left bracket(s) but 0 right bracket(s).",
        ))
        return _clean(errors)

    region = extract_tree_region(raw)
    if region is None:
        # every ')' precedes the first '('
        errors.append(ValidityError(
            InvalidKind.BRACKET_UNMATCHED, raw.find(")"),
            "A right bracket precedes any left bracket.",
        ))
        return _clean(errors)
    open_offsets: list[int] = []
    for offset, ch in enumerate(region):
        if ch == "(":
            open_offsets.append(offset)
        elif ch == ")":
            if not open_offsets:
                errors.append(ValidityError(
                    InvalidKind.BRACKET_UNMATCHED, offset,
                    f"Unmatched right bracket at offset {offset}.",
                ))
                return _clean(errors)
            open_offsets.pop()
    if open_offsets:
        n_left = region.count("(")
        n_right = region.count(")")
        errors.append(ValidityError(
            InvalidKind.BRACKET_UNMATCHED, open_offsets[0],
            f"The tree has {n_left} left bracket(s) but {n_right} right bracket(s).",
        ))
        return _clean(errors)

    forest = _scan_forest(region, errors)
    if len(forest) > 1:
        errors.append(ValidityError(
            InvalidKind.OTHER, None,
            f"The output contains {len(forest)} top-level constituents instead of one tree.",
        ))
    for node in forest:
        _scan_leaves(node, errors)
    return _clean(errors)


@dataclass
class _ScanNode:
    label: str
    children: list["_ScanNode"]
    words: list[str]


def _scan_forest(region: str, errors: list[ValidityError]) -> list[_ScanNode]:
    """Lenient structural scan of a balanced region; never raises."""
    tokens = region.replace("(", " ( ").replace(")", " ) ").split()
    forest: list[_ScanNode] = []
    stack: list[_ScanNode] = []
    expect_label = False
    for t in tokens:
        if t == "(":
            node = _ScanNode("", [], [])
            if stack:
                stack[-1].children.append(node)
            else:
                forest.append(node)
            stack.append(node)
            expect_label = True
        elif t == ")":
            closing = stack.pop()
            if not closing.label:
                errors.append(ValidityError(
                    InvalidKind.OTHER, None,
                    "A constituent has no label.",
                ))
            expect_label = False
        else:
            if expect_label:
                stack[-1].label = t
                expect_label = False
            elif stack:
                stack[-1].words.append(t)
            # bare words outside any bracket are ignored
    return forest


def _scan_leaves(node: _ScanNode, errors: list[ValidityError]) -> None:
    if node.words and node.children:
        frag = f"({node.label} ...)"
        errors.append(ValidityError(
            InvalidKind.MORE_THAN_ONE_WORD, frag,
            f"The constituent {frag} mixes words and sub-constituents.",
        ))
    elif len(node.words) > 1:
        frag = f"({node.label} {' '.join(node.words)})"
        errors.append(ValidityError(
            InvalidKind.MORE_THAN_ONE_WORD, frag,
            f"The constituent {frag} contains more than one word.",
        ))
    elif not node.words and not node.children and node.label:
        frag = f"({node.label})"
        errors.append(ValidityError(
            InvalidKind.MISSING_WORD, frag,
            f"The constituent ({node.label}) lacks a word.",
        ))
    for child in node.children:
        _scan_leaves(child, errors)


# --- corruption ---------------------------------------------------------------

def _render_with_leaf(tree: ConstituencyTree, target: int, leaf_text) -> str:
    """Render the tree, replacing the target leaf's bracket via leaf_text(node)."""
    counter = {"i": 0}

    def walk(node: TreeNode) -> str:
        if node.is_preterminal:
            i = counter["i"]
            counter["i"] += 1
            if i == target:
                return leaf_text(node)
            return f"({node.label} {node.token.surface})"
        return f"({node.label} {' '.join(walk(c) for c in node.children)})"

    return walk(tree.root)


def _sibling_preterminal_pairs(tree: ConstituencyTree) -> list[tuple[int, int]]:
    """Leaf-index pairs (i, i+1) that are adjacent children of the same parent."""
    pairs: list[tuple[int, int]] = []

    def walk(node: TreeNode, start: int) -> int:
        if node.is_preterminal:
            return start + 1
        pos = start
        starts = []
        for child in node.children:
            starts.append(pos)
            pos = walk(child, pos)
        for (a, b), s in zip(zip(node.children, node.children[1:]), starts):
            if a.is_preterminal and b.is_preterminal:
                pairs.append((s, s + 1))
        return pos

    walk(tree.root, 0)
    return pairs


def _render_merging(tree: ConstituencyTree, first: int) -> str:
    """Render with leaves first and first+1 merged into one multi-word leaf."""
    counter = {"i": 0}

    def walk(node: TreeNode) -> str:
        if node.is_preterminal:
            i = counter["i"]
            counter["i"] += 1
            if i == first:
                return ""  # replaced together with the next leaf
            if i == first + 1:
                prev = _leaf(tree, first)
                return f"({prev.label} {prev.token.surface} {node.token.surface})"
            return f"({node.label} {node.token.surface})"
        parts = [walk(c) for c in node.children]
        inner = " ".join(p for p in parts if p)
        return f"({node.label} {inner})"

    return walk(tree.root)


def _leaf(tree: ConstituencyTree, index: int) -> TreeNode:
    for i, leaf in enumerate(tree.root.leaves()):
        if i == index:
            return leaf
    raise IndexError(index)


def corrupt_validity(
    tree: ConstituencyTree, kind: InvalidKind, seed: int = 0
) -> tuple[str, str]:
    """Inject exactly one structural error of the given kind.

    Returns (corrupted text, annotation); the annotation is the checker's own
    message for the injected error, suitable as gold feedback.
    """
    kind = InvalidKind(kind)
    rng = random.Random(seed)
    n_leaves = len(tree.sentence)

    if kind is InvalidKind.OTHER:
        raise Inapplicable("cannot corrupt a tree into the 'other' group")

    if kind is InvalidKind.MISSING_WORD:
        target = rng.randrange(n_leaves)
        text = _render_with_leaf(tree, target, lambda n: f"({n.label} )")
    elif kind is InvalidKind.MORE_THAN_ONE_WORD:
        if n_leaves < 2:
            raise Inapplicable("need at least two leaves to build a multi-word leaf")
        pairs = _sibling_preterminal_pairs(tree)
        if pairs:
            first, _ = pairs[rng.randrange(len(pairs))]
            text = _render_merging(tree, first)
        else:
            # no adjacent preterminal siblings: stuff the next word into a leaf
            target = rng.randrange(n_leaves - 1)
            extra = tree.sentence[target + 1].surface
            text = _render_with_leaf(
                tree, target, lambda n: f"({n.label} {n.token.surface} {extra})"
            )
    else:  # BRACKET_UNMATCHED
        text = render_bracketed(tree)
        closers = [i for i, c in enumerate(text) if c == ")"]
        drop = closers[rng.randrange(len(closers))]
        text = text[:drop] + text[drop + 1:]

    report = check_validity(text)
    injected = [e for e in report.errors if e.kind is kind]
    if report.valid or not injected:
        raise Inapplicable(f"corruption failed to produce a {kind.value} error")
    return text, injected[0].message
