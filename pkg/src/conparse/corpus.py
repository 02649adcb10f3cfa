"""Treebank ingestion, experiment orchestration, JSONL persistence and reports."""

from __future__ import annotations

import json
import logging
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

from .backend import BackendError, CompletionBackend, CompletionRequest
from .faithfulness import check_faithfulness
from .linearize import Strategy, encode
from .pmc import PMCConfig, run_pmc
from .prompting import build_prompt, make_prompt_spec, preprocess_tree
from .scoring import (
    EvalConfig,
    ScoreReport,
    SentenceCounts,
    reduction_rate,
    score_corpus,
    score_sentence,
    scoring_spans,
)
from .tree import (
    ConstituencyTree,
    TreeError,
    iter_tree_strings,
    parse_bracketed,
    parse_treebank_tree,
    render_bracketed,
)
from .validity import check_validity

log = logging.getLogger("conparse")

# Standard PTB section assignment; override per deployment as needed.
DEFAULT_PTB_SECTIONS = {"train": range(2, 22), "dev": range(22, 23), "test": range(23, 24)}


class TreebankError(Exception):
    def __init__(self, message: str, line: int | None = None):
        super().__init__(message)
        self.line = line


class EmptyTreebank(TreebankError):
    pass


@dataclass
class TreebankSplit:
    name: str  # train | dev | test
    domain: str
    trees: list[ConstituencyTree]


def load_treebank(
    path: str | Path,
    domain: str = "news",
    name: str = "test",
    *,
    lenient: bool = False,
) -> TreebankSplit:
    """Read a treebank file: balanced expressions in one-per-line or .mrg layout.

    Malformed trees abort the load unless lenient, in which case they are
    logged with their line numbers and skipped.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise
    trees: list[ConstituencyTree] = []
    try:
        for expr, line in iter_tree_strings(text):
            try:
                trees.append(parse_treebank_tree(expr))
            except TreeError as exc:
                if lenient:
                    log.warning("%s:%d: skipping malformed tree: %s", path, line, exc)
                    continue
                raise TreebankError(f"{path}:{line}: {exc}", line=line) from exc
    except TreeError as exc:
        raise TreebankError(f"{path}: {exc}") from exc
    if not trees:
        raise EmptyTreebank(f"{path}: no trees found")
    return TreebankSplit(name=name, domain=domain, trees=trees)


def demonstrations_from_trees(
    trees: Sequence[ConstituencyTree],
    strategy: Strategy | str = Strategy.BRACKET,
    k: int | None = None,
) -> list[tuple[str, str]]:
    """(sentence, linearized tree) pairs for few-shot prompting."""
    chosen = trees if k is None else trees[:k]
    demos = []
    for tree in chosen:
        tree = preprocess_tree(tree)
        sentence = " ".join(t.surface for t in tree.sentence)
        demos.append((sentence, encode(tree, strategy).payload))
    return demos


@dataclass
class ResultRecord:
    id: str
    domain: str
    sentence: str
    gold: str
    prediction_raw: str | None
    valid: bool
    validity_errors: list[dict]
    faithful: bool
    faithfulness_errors: list[dict]
    pmc_rounds: int | None
    counts: SentenceCounts | None
    error: str | None = None

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "domain": self.domain,
            "sentence": self.sentence,
            "gold": self.gold,
            "prediction_raw": self.prediction_raw,
            "valid": self.valid,
            "validity_errors": self.validity_errors,
            "faithful": self.faithful,
            "faithfulness_errors": self.faithfulness_errors,
            "pmc_rounds": self.pmc_rounds,
            "counts": self.counts.to_dict() if self.counts else None,
            "error": self.error,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, ensure_ascii=False)

    @classmethod
    def from_dict(cls, d: dict) -> "ResultRecord":
        counts = d.get("counts")
        return cls(
            id=d["id"],
            domain=d.get("domain", ""),
            sentence=d.get("sentence", ""),
            gold=d.get("gold", ""),
            prediction_raw=d.get("prediction_raw"),
            valid=bool(d.get("valid", False)),
            validity_errors=list(d.get("validity_errors", [])),
            faithful=bool(d.get("faithful", False)),
            faithfulness_errors=list(d.get("faithfulness_errors", [])),
            pmc_rounds=d.get("pmc_rounds"),
            counts=SentenceCounts.from_dict(counts) if counts else None,
            error=d.get("error"),
        )


def read_records(path: str | Path) -> list[ResultRecord]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(ResultRecord.from_dict(json.loads(line)))
    return records


def _completed_ids(path: Path) -> set[str]:
    if not path.exists():
        return set()
    return {r.id for r in read_records(path)}


def run_experiment(
    split: TreebankSplit,
    mode: str,
    backend: CompletionBackend,
    *,
    strategy: Strategy | str = Strategy.BRACKET,
    shots: int = 0,
    demonstrations: Sequence[tuple[str, str]] = (),
    error_exemplars=None,
    pmc_config: PMCConfig | None = None,
    eval_config: EvalConfig = EvalConfig(),
    out_path: str | Path | None = None,
    resume: bool = False,
    parallel: int = 1,
    temperature: float = 0.0,
    max_tokens: int = 2048,
    model_id: str = "",
    on_record: Callable[[ResultRecord], None] | None = None,
    on_session: Callable[[str, object], None] | None = None,
) -> list[ResultRecord]:
    """Run one prompting mode over a split, streaming records to JSONL.

    The per-sentence pipeline is: preprocess, build prompt (or run the
    refinement loop), complete, check validity, check faithfulness, score.
    Backend failures are recorded on their sentence and the run continues.
    With resume=True, ids already present in out_path are skipped and new
    records are appended.
    """
    if mode not in ("zero", "few", "les", "pmc"):
        raise ValueError(f"unknown experiment mode {mode!r}")
    strategy = Strategy(strategy)

    out_file = None
    skip: set[str] = set()
    if out_path is not None:
        out_path = Path(out_path)
        if resume:
            skip = _completed_ids(out_path)
        elif out_path.exists():
            out_path.unlink()
        out_file = open(out_path, "a", encoding="utf-8")

    def run_one(index: int) -> ResultRecord:
        rid = f"{split.domain}-{index:05d}"
        gold_tree = preprocess_tree(split.trees[index])
        sentence_text = " ".join(t.surface for t in gold_tree.sentence)
        pmc_rounds = None
        raw = None
        error = None
        try:
            if mode == "pmc":
                session = run_pmc(
                    gold_tree.sentence, backend,
                    pmc_config or PMCConfig(),
                    strategy=strategy,
                    demonstrations=tuple(demonstrations[:shots]) if shots else (),
                    temperature=temperature,
                    max_tokens=max_tokens,
                    model_id=model_id,
                )
                raw = session.final_raw
                pmc_rounds = len(session.rounds)
                if on_session is not None:
                    on_session(rid, session)
            else:
                spec = make_prompt_spec(
                    mode, sentence_text,
                    strategy=strategy,
                    shots=shots,
                    demonstrations=demonstrations,
                    error_exemplars=error_exemplars,
                )
                response = backend.complete(CompletionRequest(
                    prompt=build_prompt(spec),
                    temperature=temperature,
                    max_tokens=max_tokens,
                    model_id=model_id,
                ))
                raw = response.text
        except BackendError as exc:
            error = str(exc) or exc.__class__.__name__

        if raw is None:
            validity = check_validity("", gold_tree.sentence)
            faithfulness = check_faithfulness("", gold_tree.sentence)
            counts = SentenceCounts(
                matched=0, predicted=0,
                gold=len(scoring_spans(gold_tree, eval_config)),
                invalid=True, unfaithful=True,
            )
        else:
            validity = check_validity(raw, gold_tree.sentence)
            faithfulness = check_faithfulness(raw, gold_tree.sentence)
            counts = score_sentence(gold_tree, raw, eval_config)

        return ResultRecord(
            id=rid,
            domain=split.domain,
            sentence=sentence_text,
            gold=render_bracketed(gold_tree),
            prediction_raw=raw,
            valid=validity.valid,
            validity_errors=[e.to_dict() for e in validity.errors],
            faithful=faithfulness.faithful,
            faithfulness_errors=[e.to_dict() for e in faithfulness.errors],
            pmc_rounds=pmc_rounds,
            counts=counts,
            error=error,
        )

    pending = [
        i for i in range(len(split.trees))
        if f"{split.domain}-{i:05d}" not in skip
    ]
    records: list[ResultRecord] = []

    def emit(record: ResultRecord) -> None:
        records.append(record)
        if out_file is not None:
            out_file.write(record.to_json() + "\n")
            out_file.flush()
        if on_record is not None:
            on_record(record)

    try:
        if parallel <= 1:
            for i in pending:
                emit(run_one(i))
        else:
            with ThreadPoolExecutor(max_workers=parallel) as pool:
                for record in pool.map(run_one, pending):
                    emit(record)
    finally:
        if out_file is not None:
            out_file.close()
    return records


# --- reporting -----------------------------------------------------------------

class EmptyInput(ValueError):
    pass


@dataclass
class ReportRow:
    group: str
    score: ScoreReport
    invalid_kinds: Counter = field(default_factory=Counter)
    unfaithful_kinds: Counter = field(default_factory=Counter)

    def to_dict(self) -> dict:
        return {
            "group": self.group,
            **self.score.to_dict(),
            "invalid_kinds": dict(sorted(self.invalid_kinds.items())),
            "unfaithful_kinds": dict(sorted(self.unfaithful_kinds.items())),
        }


def _row_for(group: str, records: list[ResultRecord], config: EvalConfig) -> ReportRow:
    counts = [r.counts for r in records if r.counts is not None]
    if not counts:
        raise EmptyInput(f"group {group!r} has no scored records")
    score = score_corpus(counts, config)
    invalid_kinds: Counter = Counter()
    unfaithful_kinds: Counter = Counter()
    for r in records:
        if not r.valid:
            kinds = {e["kind"] for e in r.validity_errors} or {"other"}
            for kind in sorted(kinds):
                invalid_kinds[kind] += 1
        if not r.faithful:
            kinds = {e["kind"] for e in r.faithfulness_errors}
            for kind in sorted(kinds):
                unfaithful_kinds[kind] += 1
    return ReportRow(group, score, invalid_kinds, unfaithful_kinds)


def build_report(
    records: Sequence[ResultRecord],
    *,
    group_by: str = "domain",
    config: EvalConfig = EvalConfig(),
) -> tuple[list[ReportRow], ReportRow]:
    """Per-group rows plus an overall row."""
    if not records:
        raise EmptyInput("no records to report on")
    groups: dict[str, list[ResultRecord]] = {}
    for record in records:
        key = getattr(record, group_by, None) or "(all)"
        groups.setdefault(key, []).append(record)
    rows = [_row_for(g, rs, config) for g, rs in sorted(groups.items())]
    overall = _row_for("all", list(records), config)
    return rows, overall


def delta_f1(rows: Sequence[ReportRow], reference: str) -> float:
    """Relative F1 reduction of the non-reference groups vs the reference group."""
    ref = next((r for r in rows if r.group == reference), None)
    if ref is None:
        raise EmptyInput(f"reference group {reference!r} not present")
    others = [r for r in rows if r.group != reference]
    if not others:
        raise EmptyInput("no non-reference groups to compare against")
    avg = sum(r.score.overall_f1 for r in others) / len(others)
    return reduction_rate(ref.score.overall_f1, avg)


INPUT_LENGTH_BUCKETS = ((1, 10), (11, 20), (21, 30), (31, 40), (41, None))


def _bucket_label(lo: int, hi: int | None) -> str:
    if hi is None:
        return f">={lo}"
    if lo <= 1:
        return f"<={hi}"
    return f"{lo}-{hi}"


def report_by_input_length(
    records: Sequence[ResultRecord],
    *,
    config: EvalConfig = EvalConfig(),
) -> list[tuple[str, ScoreReport | None]]:
    """Corpus scores bucketed by sentence length in tokens."""
    out = []
    for lo, hi in INPUT_LENGTH_BUCKETS:
        members = [
            r.counts for r in records
            if r.counts is not None
            and lo <= len(r.sentence.split()) <= (hi if hi is not None else 10 ** 9)
        ]
        label = _bucket_label(lo, hi)
        out.append((label, score_corpus(members, config) if members else None))
    return out


def report_by_span_length(
    records: Sequence[ResultRecord],
    *,
    width: int = 5,
    config: EvalConfig = EvalConfig(),
) -> list[tuple[str, float, float, float, int]]:
    """Per-span-length-bucket (label, LP, LR, F1, gold count)."""
    matched: Counter = Counter()
    predicted: Counter = Counter()
    gold: Counter = Counter()

    def bucket(length: int) -> int:
        return (length - 1) // width

    from .scoring import _as_tree

    for record in records:
        gold_spans = scoring_spans(parse_bracketed(record.gold), config)
        for span in gold_spans:
            gold[bucket(span.end - span.start)] += 1
        if not record.valid or record.prediction_raw is None:
            continue
        pred_tree = _as_tree(record.prediction_raw)
        if pred_tree is None:
            continue
        pred_spans = scoring_spans(pred_tree, config)
        for span in pred_spans:
            predicted[bucket(span.end - span.start)] += 1
        inter = Counter(gold_spans) & Counter(pred_spans)
        for span, c in inter.items():
            matched[bucket(span.end - span.start)] += c

    out = []
    for b in sorted(set(gold) | set(predicted)):
        m, p, g = matched[b], predicted[b], gold[b]
        lp = 1.0 if p == 0 and m == 0 else (m / p if p else 0.0)
        lr = 1.0 if g == 0 and m == 0 else (m / g if g else 0.0)
        f1 = 0.0 if lp + lr == 0 else 2 * lp * lr / (lp + lr)
        label = f"{b * width + 1}-{(b + 1) * width}"
        out.append((label, lp, lr, f1, g))
    return out


def format_report_table(
    rows: Sequence[ReportRow],
    overall: ReportRow | None = None,
    *,
    reference: str | None = None,
) -> str:
    """Aligned plain-text report table."""
    header = (
        f"{'group':<12} {'n':>6} {'valid_F1':>9} {'overall_F1':>11} "
        f"{'macro_F1':>9} {'invalid%':>9} {'unfaith%':>9} "
        f"{'overgen':>8} {'wordmis':>8} {'failure':>8}"
    )
    lines = [header, "-" * len(header)]

    def fmt(row: ReportRow) -> str:
        s = row.score
        uk = row.unfaithful_kinds
        return (
            f"{row.group:<12} {s.n_sentences:>6} {s.valid_f1:>9.4f} "
            f"{s.overall_f1:>11.4f} {s.macro_f1:>9.4f} {s.invalid_rate:>9.2f} "
            f"{s.unfaithful_rate:>9.2f} {uk.get('over_generation', 0):>8} "
            f"{uk.get('word_mismatch', 0):>8} {uk.get('prediction_failure', 0):>8}"
        )

    lines.extend(fmt(r) for r in rows)
    if overall is not None:
        lines.append("-" * len(header))
        lines.append(fmt(overall))
    if reference is not None:
        lines.append("")
        lines.append(f"dF1 vs {reference}: {delta_f1(rows, reference):.2f}%")
    return "\n".join(lines)


def write_report_csv(rows: Sequence[ReportRow], overall: ReportRow, path: str | Path) -> None:
    import csv

    keys = [
        "group", "n_sentences", "LP", "LR", "F1", "valid_F1", "overall_F1",
        "macro_F1", "invalid_rate", "unfaithful_rate",
    ]
    kind_keys = [
        "more_than_one_word", "missing_word", "bracket_unmatched", "other",
        "over_generation", "word_mismatch", "prediction_failure",
    ]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(keys + kind_keys)
        for row in [*rows, overall]:
            d = row.to_dict()
            writer.writerow(
                [d[k] for k in keys]
                + [row.invalid_kinds.get(k, 0) for k in kind_keys[:4]]
                + [row.unfaithful_kinds.get(k, 0) for k in kind_keys[4:]]
            )


def write_report_json(
    rows: Sequence[ReportRow],
    overall: ReportRow,
    path: str | Path,
    *,
    extras: dict | None = None,
) -> None:
    payload = {
        "groups": [r.to_dict() for r in rows],
        "overall": overall.to_dict(),
    }
    if extras:
        payload.update(extras)
    Path(path).write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
