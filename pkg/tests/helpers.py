"""Shared strings and independent oracles used across the test suite."""

from conparse import ConstituencyTree, TreeNode

SINGAPORE = (
    "(S (NP (NNP Singapore)) (VP (VBZ is) (VP (VBN located) "
    "(PP (IN in) (NP (NNP Asia))))))"
)
SINGAPORE_MISSING = (
    "(S (NP (NNP Singapore)) (VP (VBZ is) (VP (VBN located) "
    "(PP (IN in) (NP (NNP ))))))"
)
SINGAPORE_SITUATED = (
    "(S (NP (NNP Singapore)) (VP (VBZ is) (VP (VBN situated) "
    "(PP (IN in) (NP (NNP Asia))))))"
)
CAT = "(S (NP (DT the) (NN cat)) (VP (VBZ sleeps)))"
CAT_RELABELED = "(S (NP (DT the) (NN cat)) (NP (VBZ sleeps)))"


def naive_spans(tree: ConstituencyTree, include_preterminals: bool = False):
    """Independent span enumeration by explicit recursion."""
    out = []

    def walk(node: TreeNode, start: int) -> int:
        if node.is_preterminal:
            if include_preterminals:
                out.append((node.label, start, start + 1))
            return start + 1
        pos = start
        for child in node.children:
            pos = walk(child, pos)
        out.append((node.label, start, pos))
        return pos

    walk(tree.root, 0)
    return out


def oracle_filter_spans(tree: ConstituencyTree, delete_labels, punct_pos):
    """Independent realization of scoring-span filtering."""
    punct_positions = sorted(
        leaf.token.index
        for leaf in tree.root.leaves()
        if leaf.label in punct_pos
    )

    def reindex(i: int) -> int:
        return i - sum(1 for p in punct_positions if p < i)

    spans = []
    for label, start, end in naive_spans(tree):
        if label in delete_labels:
            continue
        s, e = reindex(start), reindex(end)
        if e > s:
            spans.append((label, s, e))
    return spans


def oracle_match_count(gold_spans, pred_spans) -> int:
    """Naive double loop over two span multisets with consumption flags."""
    used = [False] * len(gold_spans)
    matched = 0
    for p in pred_spans:
        for i, g in enumerate(gold_spans):
            if not used[i] and g == p:
                used[i] = True
                matched += 1
                break
    return matched


def relabel_random_internal(tree: ConstituencyTree, rng) -> ConstituencyTree:
    """Copy of the tree with one internal node's label replaced."""
    internal = [
        n for n in tree.root.iter_nodes()
        if not n.is_preterminal
    ]
    target = internal[rng.randrange(len(internal))]
    new_label = "ZZZ" if target.label != "ZZZ" else "QQQ"

    def walk(node: TreeNode) -> TreeNode:
        label = new_label if node is target else node.label
        if node.is_preterminal:
            return TreeNode(label, (), node.token)
        return TreeNode(label, tuple(walk(c) for c in node.children))

    return ConstituencyTree.from_root(walk(tree.root))
