"""PARSEVAL-style labeled bracket scoring with an invalid-tree zero policy.

Counts are micro-aggregated: LP = sum(matched)/sum(predicted) and
LR = sum(matched)/sum(gold). An invalid prediction keeps its gold spans in
the recall denominator but contributes no matched or predicted spans, so it
drags the overall score down instead of being ignored.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

from .faithfulness import check_faithfulness
from .tree import ConstituencyTree, LabeledSpan, extract_spans, parse_bracketed
from .validity import check_validity, extract_tree_region


class InvalidPolicy(str, Enum):
    ZERO_COUNTS = "zero"
    SKIP_INVALID = "skip"


class EmptyCorpus(ValueError):
    """score_corpus needs at least one sentence."""


DEFAULT_DELETE_LABELS = frozenset({"TOP", "ROOT", "-NONE-"})
# evalb COLLINS.prm-style punctuation part-of-speech tags
DEFAULT_PUNCT_POS = frozenset({",", ":", "``", "''", "."})


@dataclass(frozen=True)
class EvalConfig:
    delete_labels: frozenset[str] = DEFAULT_DELETE_LABELS
    punctuation_pos: frozenset[str] = DEFAULT_PUNCT_POS
    invalid_policy: InvalidPolicy = InvalidPolicy.ZERO_COUNTS


@dataclass(frozen=True)
class SentenceCounts:
    matched: int
    predicted: int
    gold: int
    invalid: bool = False
    unfaithful: bool = False

    def __post_init__(self):
        if self.matched > min(self.predicted, self.gold):
            raise ValueError("matched cannot exceed predicted or gold")

    def to_dict(self) -> dict:
        return {
            "matched": self.matched,
            "predicted": self.predicted,
            "gold": self.gold,
            "invalid": self.invalid,
            "unfaithful": self.unfaithful,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SentenceCounts":
        return cls(
            matched=int(d["matched"]),
            predicted=int(d["predicted"]),
            gold=int(d["gold"]),
            invalid=bool(d.get("invalid", False)),
            unfaithful=bool(d.get("unfaithful", False)),
        )


@dataclass(frozen=True)
class ScoreReport:
    lp: float
    lr: float
    f1: float
    valid_f1: float
    overall_f1: float
    macro_f1: float
    invalid_rate: float  # percentage
    unfaithful_rate: float  # percentage
    n_sentences: int
    n_invalid: int
    n_unfaithful: int

    def to_dict(self) -> dict:
        return {
            "LP": self.lp,
            "LR": self.lr,
            "F1": self.f1,
            "valid_F1": self.valid_f1,
            "overall_F1": self.overall_f1,
            "macro_F1": self.macro_f1,
            "invalid_rate": self.invalid_rate,
            "unfaithful_rate": self.unfaithful_rate,
            "n_sentences": self.n_sentences,
            "n_invalid": self.n_invalid,
            "n_unfaithful": self.n_unfaithful,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def scoring_spans(tree: ConstituencyTree, config: EvalConfig) -> list[LabeledSpan]:
    """Spans used for scoring: preterminals excluded, deletable labels removed,
    punctuation tokens excised from the index space."""
    punct = {
        leaf.token.index
        for leaf in tree.root.leaves()
        if leaf.label in config.punctuation_pos
    }
    if punct:
        shift = []
        removed = 0
        for i in range(len(tree.sentence) + 1):
            shift.append(i - removed)
            if i in punct:
                removed += 1
    spans: list[LabeledSpan] = []
    for span in extract_spans(tree, include_preterminals=False):
        if span.label in config.delete_labels:
            continue
        if punct:
            start, end = shift[span.start], shift[span.end]
        else:
            start, end = span.start, span.end
        if end > start:
            spans.append(LabeledSpan(span.label, start, end))
    return spans


def _as_tree(pred: ConstituencyTree | str) -> ConstituencyTree | None:
    if isinstance(pred, ConstituencyTree):
        return pred
    region = extract_tree_region(pred)
    if region is None:
        return None
    try:
        return parse_bracketed(region)
    except ValueError:
        return None


def score_sentence(
    gold: ConstituencyTree,
    pred: ConstituencyTree | str,
    config: EvalConfig = EvalConfig(),
) -> SentenceCounts:
    """Count matched/predicted/gold labeled spans for one sentence.

    An invalid prediction zeroes matched and predicted while keeping the gold
    count, and sets the invalid flag.
    """
    gold_spans = scoring_spans(gold, config)

    if isinstance(pred, str):
        valid = check_validity(pred).valid
    else:
        valid = True
    unfaithful = not check_faithfulness(pred, gold.sentence).faithful

    if not valid:
        return SentenceCounts(
            matched=0, predicted=0, gold=len(gold_spans),
            invalid=True, unfaithful=unfaithful,
        )

    pred_tree = _as_tree(pred)
    if pred_tree is None:
        return SentenceCounts(
            matched=0, predicted=0, gold=len(gold_spans),
            invalid=True, unfaithful=unfaithful,
        )

    pred_spans = scoring_spans(pred_tree, config)
    matched = sum((Counter(gold_spans) & Counter(pred_spans)).values())
    return SentenceCounts(
        matched=matched,
        predicted=len(pred_spans),
        gold=len(gold_spans),
        invalid=False,
        unfaithful=unfaithful,
    )


def _prf(rows: list[SentenceCounts]) -> tuple[float, float, float]:
    sm = sum(r.matched for r in rows)
    sp = sum(r.predicted for r in rows)
    sg = sum(r.gold for r in rows)
    lp = 1.0 if sp == 0 else sm / sp
    lr = 1.0 if sg == 0 else sm / sg
    f1 = 0.0 if lp + lr == 0 else 2 * lp * lr / (lp + lr)
    return lp, lr, f1


def _sentence_f1(r: SentenceCounts) -> float:
    if r.invalid or r.predicted == 0 or r.gold == 0:
        # vacuous full credit only when both sides are empty and valid
        if not r.invalid and r.predicted == 0 and r.gold == 0:
            return 1.0
        return 0.0
    p = r.matched / r.predicted
    q = r.matched / r.gold
    return 0.0 if p + q == 0 else 2 * p * q / (p + q)


def score_corpus(
    rows: list[SentenceCounts], config: EvalConfig = EvalConfig()
) -> ScoreReport:
    """Micro-aggregate sentence counts into a corpus report.

    valid_F1 covers only structurally valid predictions; overall_F1 includes
    every sentence under the zero-counts policy. The headline LP/LR/F1 follow
    config.invalid_policy.
    """
    if not rows:
        raise EmptyCorpus("no sentences to score")

    overall = _prf(rows)
    valid_rows = [r for r in rows if not r.invalid]
    valid = _prf(valid_rows) if valid_rows else (0.0, 0.0, 0.0)

    if config.invalid_policy is InvalidPolicy.SKIP_INVALID:
        lp, lr, f1 = valid
    else:
        lp, lr, f1 = overall

    n = len(rows)
    n_invalid = sum(1 for r in rows if r.invalid)
    n_unfaithful = sum(1 for r in rows if r.unfaithful)
    return ScoreReport(
        lp=lp,
        lr=lr,
        f1=f1,
        valid_f1=valid[2],
        overall_f1=overall[2],
        macro_f1=sum(_sentence_f1(r) for r in rows) / n,
        invalid_rate=100.0 * n_invalid / n,
        unfaithful_rate=100.0 * n_unfaithful / n,
        n_sentences=n,
        n_invalid=n_invalid,
        n_unfaithful=n_unfaithful,
    )


def reduction_rate(f1_in_domain: float, f1_out_avg: float) -> float:
    """Relative F1 reduction from in-domain to out-of-domain, as a percentage."""
    if f1_in_domain == 0:
        raise ZeroDivisionError("in-domain F1 must be positive")
    return (f1_in_domain - f1_out_avg) / f1_in_domain * 100.0


def load_eval_config(path: str | Path) -> EvalConfig:
    """Read a key=value parameter file (DELETE_LABEL, PUNCT_POS, INVALID_POLICY).

    Repeated DELETE_LABEL / PUNCT_POS lines accumulate and replace the
    defaults; unspecified keys keep their defaults.
    """
    delete: list[str] = []
    punct: list[str] = []
    policy = InvalidPolicy.ZERO_COUNTS
    saw_policy = False
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not value:
            raise ValueError(f"{path}:{lineno}: expected KEY=VALUE, got {line!r}")
        if key == "DELETE_LABEL":
            delete.append(value)
        elif key == "PUNCT_POS":
            punct.append(value)
        elif key == "INVALID_POLICY":
            policy = InvalidPolicy(value)
            saw_policy = True
        else:
            raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
    return EvalConfig(
        delete_labels=frozenset(delete) if delete else DEFAULT_DELETE_LABELS,
        punctuation_pos=frozenset(punct) if punct else DEFAULT_PUNCT_POS,
        invalid_policy=policy if saw_policy else InvalidPolicy.ZERO_COUNTS,
    )
