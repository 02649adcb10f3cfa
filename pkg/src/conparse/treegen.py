"""Seeded random constituency-tree generation for tests and corruption demos."""

from __future__ import annotations

import random

from .tree import ConstituencyTree, Token, TreeNode

INTERNAL_LABELS = ("S", "NP", "VP", "PP", "ADJP", "ADVP", "SBAR", "QP")
POS_LABELS = ("NN", "NNS", "NNP", "VB", "VBD", "VBZ", "DT", "JJ", "IN", "RB", "CD")

# Small everyday vocabulary; overlaps the built-in word-substitution table so
# random trees can exercise faithfulness corruption.
DEFAULT_VOCAB = (
    "the", "a", "cat", "dog", "man", "woman", "city", "river", "house",
    "big", "small", "quick", "old", "new", "located", "situated", "runs",
    "sleeps", "buys", "sells", "found", "in", "on", "under", "near", "with",
    "and", "very", "quite", "84", "12", "orders", "company", "market",
    "price", "share", "report", "year", "week", "government", "law",
)


def random_tree(
    rng: random.Random,
    max_depth: int = 8,
    max_tokens: int = 25,
    *,
    unique_tokens: bool = False,
    vocab: tuple[str, ...] = DEFAULT_VOCAB,
) -> ConstituencyTree:
    """Generate a random valid tree with an internal root.

    With unique_tokens=True every word in the sentence is distinct, which
    keeps all phrase texts unambiguous for span-template round trips.
    """
    n = rng.randint(1, max_tokens)
    if unique_tokens:
        words = [f"w{i}" for i in range(n)]
    else:
        words = [rng.choice(vocab) for _ in range(n)]

    sentence = [Token(w, i) for i, w in enumerate(words)]

    def preterminal(i: int) -> TreeNode:
        return TreeNode(rng.choice(POS_LABELS), (), sentence[i])

    def build(lo: int, hi: int, depth: int) -> TreeNode:
        span = hi - lo
        if span == 1 and depth >= 2 and (depth >= max_depth - 1 or rng.random() < 0.4):
            return preterminal(lo)
        label = rng.choice(INTERNAL_LABELS)
        if depth >= max_depth - 1:
            kids = tuple(preterminal(i) for i in range(lo, hi))
            return TreeNode(label, kids)
        if span == 1:
            return TreeNode(label, (build(lo, hi, depth + 1),))
        if rng.random() < 0.12:
            # unary chain over the full span
            return TreeNode(label, (build(lo, hi, depth + 1),))
        k = rng.randint(2, min(4, span))
        cuts = sorted(rng.sample(range(lo + 1, hi), k - 1))
        bounds = [lo, *cuts, hi]
        kids = tuple(
            build(bounds[j], bounds[j + 1], depth + 1) for j in range(k)
        )
        return TreeNode(label, kids)

    root = build(0, n, 1)
    return ConstituencyTree(root=root, sentence=tuple(sentence))


def random_trees(seed: int, count: int, **kwargs) -> list[ConstituencyTree]:
    rng = random.Random(seed)
    return [random_tree(rng, **kwargs) for _ in range(count)]
