"""Constituency-tree data model, bracketed-text reader/writer, and span extraction."""

from __future__ import annotations

from dataclasses import dataclass, field


class TreeError(ValueError):
    """A bracketed expression does not describe a well-formed constituency tree."""

    def __init__(self, message: str, location: str | int | None = None):
        super().__init__(message)
        self.location = location


class BracketUnmatched(TreeError):
    """Left and right brackets do not pair up."""


class MissingWord(TreeError):
    """A leaf constituent contains no word."""


class MoreThanOneWord(TreeError):
    """A leaf constituent contains several words (or words mixed with sub-constituents)."""


class EmptyLabel(TreeError):
    """A constituent has no label."""


# PTB tag inventories, used to classify labels into clause/phrase/word levels.
CLAUSE_TAGS = frozenset({"S", "SBAR", "SBARQ", "SINV", "SQ"})
PHRASE_TAGS = frozenset({
    "ADJP", "ADVP", "CONJP", "FRAG", "INTJ", "LST", "NAC", "NP", "NX", "PP",
    "PRN", "PRT", "QP", "RRC", "UCP", "VP", "WHADJP", "WHADVP", "WHNP",
    "WHPP", "X",
})
WORD_TAGS = frozenset({
    "CC", "CD", "DT", "EX", "FW", "IN", "JJ", "JJR", "JJS", "LS", "MD", "NN",
    "NNS", "NNP", "NNPS", "PDT", "POS", "PRP", "PRP$", "RB", "RBR", "RBS",
    "RP", "SYM", "TO", "UH", "VB", "VBD", "VBG", "VBN", "VBP", "VBZ", "WDT",
    "WP", "WP$", "WRB", ".", ",", ":", "``", "''", "-LRB-", "-RRB-", "#", "$",
})


def label_level(name: str) -> str:
    """Classify a constituent label as ``clause``, ``phrase`` or ``word``."""
    if name in CLAUSE_TAGS:
        return "clause"
    if name in WORD_TAGS:
        return "word"
    return "phrase"


@dataclass(frozen=True)
class ConstituentLabel:
    name: str
    level: str

    def __post_init__(self):
        if not self.name or any(c.isspace() or c in "()" for c in self.name):
            raise EmptyLabel(f"bad constituent label {self.name!r}")

    @classmethod
    def of(cls, name: str) -> "ConstituentLabel":
        return cls(name, label_level(name))


@dataclass(frozen=True)
class Token:
    """A single word of the input sentence, with its 0-based position."""

    surface: str
    index: int


@dataclass(frozen=True)
class TreeNode:
    """One node of a constituency tree.

    A preterminal carries exactly one token and no children; an internal node
    carries one or more children and no token.
    """

    label: str
    children: tuple["TreeNode", ...] = ()
    token: Token | None = None

    @property
    def is_preterminal(self) -> bool:
        return self.token is not None

    def iter_nodes(self):
        """Preorder traversal over all nodes."""
        yield self
        for child in self.children:
            yield from child.iter_nodes()

    def leaves(self):
        if self.is_preterminal:
            yield self
        else:
            for child in self.children:
                yield from child.leaves()


@dataclass(frozen=True)
class ConstituencyTree:
    """An immutable rooted labeled tree whose leaves carry exactly one token each."""

    root: TreeNode
    sentence: tuple[Token, ...]

    def __len__(self) -> int:
        return len(self.sentence)

    @property
    def words(self) -> tuple[str, ...]:
        return tuple(t.surface for t in self.sentence)

    @classmethod
    def from_root(cls, root: TreeNode) -> "ConstituencyTree":
        """Build a tree from a node, reassigning token indices in leaf order."""
        sentence: list[Token] = []

        def rebuild(node: TreeNode) -> TreeNode:
            if node.is_preterminal:
                tok = Token(node.token.surface, len(sentence))
                sentence.append(tok)
                return TreeNode(node.label, (), tok)
            if not node.children:
                raise MissingWord(
                    f"The constituent ({node.label}) lacks a word.",
                    location=f"({node.label})",
                )
            return TreeNode(node.label, tuple(rebuild(c) for c in node.children))

        new_root = rebuild(root)
        return cls(root=new_root, sentence=tuple(sentence))


@dataclass(frozen=True, order=True)
class LabeledSpan:
    """A labeled token span, start inclusive and end exclusive."""

    label: str
    start: int
    end: int


@dataclass
class _RawNode:
    """Parse-time node before arity validation and token indexing."""

    label: str
    children: list["_RawNode"] = field(default_factory=list)
    words: list[str] = field(default_factory=list)


def _tokenize(text: str) -> list[str]:
    return text.replace("(", " ( ").replace(")", " ) ").split()


def _read_node(tokens: list[str], i: int) -> tuple[_RawNode, int]:
    # tokens[i] is the opening bracket of this node
    i += 1
    if i >= len(tokens):
        raise BracketUnmatched("expression ends inside a constituent")
    head = tokens[i]
    if head == ")":
        raise EmptyLabel("constituent with no label")
    if head == "(":
        raise EmptyLabel("constituent with no label before a sub-constituent")
    node = _RawNode(label=head)
    i += 1
    while True:
        if i >= len(tokens):
            raise BracketUnmatched("missing ')' before end of expression")
        t = tokens[i]
        if t == "(":
            child, i = _read_node(tokens, i)
            node.children.append(child)
        elif t == ")":
            return node, i + 1
        else:
            node.words.append(t)
            i += 1


def _raw_to_tree(raw: _RawNode) -> ConstituencyTree:
    sentence: list[Token] = []

    def convert(node: _RawNode) -> TreeNode:
        if node.words and node.children:
            frag = f"({node.label} ...)"
            raise MoreThanOneWord(
                f"The constituent {frag} mixes words and sub-constituents.",
                location=frag,
            )
        if len(node.words) > 1:
            frag = f"({node.label} {' '.join(node.words)})"
            raise MoreThanOneWord(
                f"The constituent {frag} contains more than one word.",
                location=frag,
            )
        if node.words:
            tok = Token(node.words[0], len(sentence))
            sentence.append(tok)
            return TreeNode(node.label, (), tok)
        if not node.children:
            raise MissingWord(
                f"The constituent ({node.label}) lacks a word.",
                location=f"({node.label})",
            )
        return TreeNode(node.label, tuple(convert(c) for c in node.children))

    root = convert(raw)
    return ConstituencyTree(root=root, sentence=tuple(sentence))


def parse_bracketed(text: str) -> ConstituencyTree:
    """Parse a single bracketed expression into a tree.

    Raises BracketUnmatched, MissingWord, MoreThanOneWord or EmptyLabel on the
    first structural defect encountered.
    """
    tokens = _tokenize(text)
    if not tokens:
        raise BracketUnmatched("empty input")
    if tokens[0] != "(":
        raise BracketUnmatched("expected '(' at the start of the expression")
    raw, pos = _read_node(tokens, 0)
    if pos != len(tokens):
        raise BracketUnmatched("unexpected material after the closing bracket")
    return _raw_to_tree(raw)


def render_bracketed(tree: ConstituencyTree | TreeNode) -> str:
    """Render a tree as a single-space-separated bracket sequence."""
    node = tree.root if isinstance(tree, ConstituencyTree) else tree
    return _render(node)


def _render(node: TreeNode) -> str:
    if node.is_preterminal:
        return f"({node.label} {node.token.surface})"
    inner = " ".join(_render(c) for c in node.children)
    return f"({node.label} {inner})"


def yield_tokens(tree: ConstituencyTree) -> list[Token]:
    """Tokens at the leaves, in left-to-right order."""
    return [leaf.token for leaf in tree.root.leaves()]


def extract_spans(
    tree: ConstituencyTree, include_preterminals: bool = False
) -> list[LabeledSpan]:
    """One labeled span per node, preterminals excluded unless requested.

    Returned as a list with duplicates preserved, so unary chains contribute
    one span per node.
    """
    spans: list[LabeledSpan] = []

    def walk(node: TreeNode, start: int) -> int:
        if node.is_preterminal:
            if include_preterminals:
                spans.append(LabeledSpan(node.label, start, start + 1))
            return start + 1
        pos = start
        for child in node.children:
            pos = walk(child, pos)
        spans.append(LabeledSpan(node.label, start, pos))
        return pos

    walk(tree.root, 0)
    return spans


# --- treebank normalization -------------------------------------------------

def strip_function_tag(label: str) -> str:
    """Drop evalb-incompatible function-tag suffixes (NP-SBJ -> NP).

    Labels starting with '-' (-LRB-, -RRB-, -NONE-) are kept verbatim.
    """
    if label.startswith("-"):
        return label
    for i, c in enumerate(label):
        if c in "-=":
            return label[:i]
    return label


def _strip_function_tags(raw: _RawNode) -> _RawNode:
    return _RawNode(
        label=strip_function_tag(raw.label),
        children=[_strip_function_tags(c) for c in raw.children],
        words=list(raw.words),
    )


def _prune_empty_elements(raw: _RawNode) -> _RawNode | None:
    """Remove -NONE- leaves together with any unary chain they empty out."""
    if raw.words:
        return None if raw.label == "-NONE-" else raw
    kept = []
    for child in raw.children:
        pruned = _prune_empty_elements(child)
        if pruned is not None:
            kept.append(pruned)
    if not kept:
        return None
    return _RawNode(label=raw.label, children=kept, words=[])


def parse_treebank_tree(text: str) -> ConstituencyTree:
    """Parse one treebank expression, applying standard load-time normalization.

    Strips an optional label-less "( ... )" or "(TOP ...)" wrapper, truncates
    function-tag suffixes, and deletes -NONE- empty elements with their
    dominating unary chains.
    """
    tokens = _tokenize(text)
    if not tokens:
        raise BracketUnmatched("empty input")
    if tokens[0] != "(":
        raise BracketUnmatched("expected '(' at the start of the expression")

    if len(tokens) > 1 and tokens[1] == "(":
        # label-less wrapper: "( (S ...) )"
        kids: list[_RawNode] = []
        i = 1
        while i < len(tokens) and tokens[i] == "(":
            child, i = _read_node(tokens, i)
            kids.append(child)
        if i >= len(tokens) or tokens[i] != ")":
            raise BracketUnmatched("missing ')' for the outer wrapper")
        if i + 1 != len(tokens):
            raise BracketUnmatched("unexpected material after the closing bracket")
        if len(kids) != 1:
            raise EmptyLabel("a label-less wrapper must contain exactly one tree")
        raw = kids[0]
    else:
        raw, pos = _read_node(tokens, 0)
        if pos != len(tokens):
            raise BracketUnmatched("unexpected material after the closing bracket")

    raw = _strip_function_tags(raw)
    pruned = _prune_empty_elements(raw)
    if pruned is None:
        raise MissingWord("tree is empty after removing trace elements")
    while pruned.label in ("TOP", "ROOT") and len(pruned.children) == 1 and not pruned.words:
        pruned = pruned.children[0]
    return _raw_to_tree(pruned)


def iter_tree_strings(text: str):
    """Split treebank text into balanced expressions by bracket-depth tracking.

    Handles both one-tree-per-line and multi-line (.mrg style) layouts.
    Yields (expression, start_line) pairs; line numbers are 1-based.
    """
    depth = 0
    line = 1
    start_line = 1
    buf: list[str] = []
    for ch in text:
        if ch == "\n":
            line += 1
        if depth == 0:
            if ch == "(":
                start_line = line
                buf = ["("]
                depth = 1
            continue
        buf.append(ch)
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
            if depth == 0:
                yield "".join(buf), start_line
                buf = []
    if depth > 0:
        raise BracketUnmatched(
            f"unclosed tree starting at line {start_line}", location=start_line
        )
