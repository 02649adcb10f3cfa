"""Three tree-isomorphic linearization strategies with round-trip decoders.

Bracket: the plain bracket sequence. Transition: a top-down NT/SHIFT/REDUCE
action sequence. Span: one "A is a B." template sentence per node, in
preorder. Every strategy decodes back to the exact originating tree.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum

from .tree import (
    ConstituencyTree,
    Token,
    TreeNode,
    parse_bracketed,
    render_bracketed,
)


class Strategy(str, Enum):
    BRACKET = "bracket"
    TRANSITION = "transition"
    SPAN = "span"


class LinearizeError(ValueError):
    """A payload cannot be decoded back into a tree."""


class StackUnderflow(LinearizeError):
    """REDUCE with no open constituent on the stack."""


class DanglingNT(LinearizeError):
    """Open constituents (or no finished root) left at the end of the sequence."""


class EmptyConstituent(LinearizeError):
    """REDUCE closing a constituent with zero children."""


class UnconsumedBuffer(LinearizeError):
    """Actions remain after the root constituent is finished."""


class UnresolvableSpan(LinearizeError):
    """A template phrase cannot be matched against the remaining sentence."""


class CrossingSpans(LinearizeError):
    """A resolved span violates the nesting of an enclosing constituent."""


@dataclass(frozen=True)
class TransitionAction:
    """NT(label), SHIFT(pos word) or REDUCE."""

    kind: str  # "NT" | "SHIFT" | "REDUCE"
    label: str | None = None  # NT: nonterminal label; SHIFT: preterminal label
    word: str | None = None  # SHIFT only

    def __str__(self) -> str:
        if self.kind == "NT":
            return f"NT({self.label})"
        if self.kind == "SHIFT":
            return f"SHIFT({self.label} {self.word})"
        return "REDUCE"


def nt(label: str) -> TransitionAction:
    return TransitionAction("NT", label=label)


def shift(pos: str, word: str) -> TransitionAction:
    return TransitionAction("SHIFT", label=pos, word=word)


def reduce_() -> TransitionAction:
    return TransitionAction("REDUCE")


@dataclass(frozen=True)
class LinearizedTree:
    strategy: Strategy
    payload: str


# --- transition strategy ------------------------------------------------------

def oracle_transitions(tree: ConstituencyTree) -> list[TransitionAction]:
    """Top-down oracle: NT on entering an internal node, SHIFT at preterminals,
    REDUCE on leaving. Action count is 2 * internal nodes + token count."""
    actions: list[TransitionAction] = []

    def walk(node: TreeNode):
        if node.is_preterminal:
            actions.append(shift(node.label, node.token.surface))
            return
        actions.append(nt(node.label))
        for child in node.children:
            walk(child)
        actions.append(reduce_())

    walk(tree.root)
    return actions


_ACTION_RE = re.compile(
    r"NT\(([^\s()]+)\)|SHIFT\(([^\s()]+) ([^\s()]+)\)|REDUCE"
)


def parse_actions(text: str) -> list[TransitionAction]:
    """Parse the single-space-separated action text format."""
    actions: list[TransitionAction] = []
    pos = 0
    for m in _ACTION_RE.finditer(text):
        if text[pos:m.start()].strip():
            raise LinearizeError(
                f"unrecognized action text: {text[pos:m.start()].strip()!r}"
            )
        if m.group(1) is not None:
            actions.append(nt(m.group(1)))
        elif m.group(2) is not None:
            actions.append(shift(m.group(2), m.group(3)))
        else:
            actions.append(reduce_())
        pos = m.end()
    if text[pos:].strip():
        raise LinearizeError(f"unrecognized action text: {text[pos:].strip()!r}")
    if not actions:
        raise LinearizeError("empty action sequence")
    return actions


_OPEN = object()  # marks an open nonterminal on the stack


def execute_transitions(
    actions: list[TransitionAction],
) -> ConstituencyTree:
    """Run the stack machine; the sequence must leave exactly one finished
    constituent with every NT reduced."""
    stack: list = []  # (_OPEN, label) markers and finished TreeNodes
    words: list[str] = []

    for action in actions:
        if action.kind == "NT":
            stack.append((_OPEN, action.label))
        elif action.kind == "SHIFT":
            tok = Token(action.word, len(words))
            words.append(action.word)
            stack.append(TreeNode(action.label, (), tok))
        else:  # REDUCE
            children: list[TreeNode] = []
            while stack and not (isinstance(stack[-1], tuple) and stack[-1][0] is _OPEN):
                children.append(stack.pop())
            if not stack:
                raise StackUnderflow("REDUCE with no open constituent")
            _, label = stack.pop()
            if not children:
                raise EmptyConstituent(f"REDUCE closes an empty constituent ({label})")
            children.reverse()
            stack.append(TreeNode(label, tuple(children)))

    if any(isinstance(item, tuple) and item[0] is _OPEN for item in stack):
        raise DanglingNT("open constituents left at the end of the sequence")
    if len(stack) != 1:
        raise UnconsumedBuffer(
            f"{len(stack)} items left on the stack; expected a single root"
        )
    root = stack[0]
    if root.is_preterminal:
        raise DanglingNT("no root constituent: bare word left on the stack")
    return ConstituencyTree.from_root(root)


# --- span strategy ------------------------------------------------------------

def encode_span(tree: ConstituencyTree) -> LinearizedTree:
    """One template line per node in preorder, the root line first."""
    lines: list[str] = []

    def phrase(node: TreeNode) -> str:
        return " ".join(leaf.token.surface for leaf in node.leaves())

    def walk(node: TreeNode):
        lines.append(f"{phrase(node)} is a {node.label}.")
        for child in node.children:
            walk(child)

    walk(tree.root)
    return LinearizedTree(Strategy.SPAN, "\n".join(lines))


@dataclass
class _Frame:
    label: str
    start: int
    end: int
    cursor: int
    children: list[TreeNode] = field(default_factory=list)


def _parse_span_line(line: str) -> tuple[list[str], str]:
    line = line.strip()
    if not line.endswith("."):
        raise UnresolvableSpan(f"template line does not end with '.': {line!r}")
    body = line[:-1]
    phrase, sep, label = body.rpartition(" is a ")
    if not sep or not phrase.strip() or not label.strip():
        raise UnresolvableSpan(f"line does not match the 'A is a B.' template: {line!r}")
    return phrase.split(), label.strip()


def decode_span(payload: str) -> ConstituencyTree:
    """Rebuild a tree from template lines.

    Spans are assigned left to right at the earliest unused token position and
    nested under the enclosing open constituent. Phrases that cannot be placed
    raise UnresolvableSpan; phrases that match but overrun their enclosing
    span raise CrossingSpans. Ambiguous duplicate-phrase inputs fail one of
    those ways rather than decoding to a wrong tree.
    """
    raw_lines = [ln for ln in payload.splitlines() if ln.strip()]
    if not raw_lines:
        raise UnresolvableSpan("empty payload")
    parsed = [_parse_span_line(ln) for ln in raw_lines]

    sentence_words, root_label = parsed[0]
    n = len(sentence_words)
    tokens = [Token(w, i) for i, w in enumerate(sentence_words)]

    stack = [_Frame(root_label, 0, n, 0)]
    done: TreeNode | None = None

    def close_top() -> None:
        nonlocal done
        top = stack.pop()
        if top.children:
            node = TreeNode(top.label, tuple(top.children))
        else:
            node = TreeNode(top.label, (), tokens[top.start])
        if stack:
            stack[-1].children.append(node)
            stack[-1].cursor = top.end
        else:
            done = node

    for words, label in parsed[1:]:
        k = len(words)
        while True:
            if not stack:
                raise UnresolvableSpan(
                    f"no open constituent left for phrase {' '.join(words)!r}"
                )
            top = stack[-1]
            if top.cursor == top.end:
                if not top.children:
                    raise UnresolvableSpan(
                        f"constituent ({top.label}) spans no tokens"
                    )
                close_top()
                continue
            matches_here = sentence_words[top.cursor:top.cursor + k] == words
            if matches_here and top.cursor + k <= top.end:
                stack.append(_Frame(label, top.cursor, top.cursor + k, top.cursor))
                break
            if not top.children and top.end - top.start == 1:
                # the open node was a preterminal after all
                close_top()
                continue
            if matches_here:
                raise CrossingSpans(
                    f"phrase {' '.join(words)!r} crosses the boundary of ({top.label})"
                )
            raise UnresolvableSpan(
                f"phrase {' '.join(words)!r} not matchable at token {top.cursor}"
            )

    while stack:
        top = stack[-1]
        if top.cursor == top.end and top.children:
            close_top()
        elif not top.children and top.end - top.start == 1:
            close_top()
        else:
            raise UnresolvableSpan(
                f"constituent ({top.label}) is not fully covered by its phrases"
            )

    return ConstituencyTree.from_root(done)


# --- strategy dispatch ----------------------------------------------------------

def encode(tree: ConstituencyTree, strategy: Strategy | str) -> LinearizedTree:
    strategy = Strategy(strategy)
    if strategy is Strategy.BRACKET:
        return LinearizedTree(strategy, render_bracketed(tree))
    if strategy is Strategy.TRANSITION:
        payload = " ".join(str(a) for a in oracle_transitions(tree))
        return LinearizedTree(strategy, payload)
    return encode_span(tree)


def decode(lin: LinearizedTree) -> ConstituencyTree:
    if lin.strategy is Strategy.BRACKET:
        return parse_bracketed(lin.payload)
    if lin.strategy is Strategy.TRANSITION:
        return execute_transitions(parse_actions(lin.payload))
    return decode_span(lin.payload)
