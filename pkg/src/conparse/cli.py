"""Command-line surface of the toolkit.

Exit codes: 0 ok, 1 usage error, 2 data error, 3 backend error.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .backend import BackendError, HTTPBackend, ScriptedBackend
from .corpus import (
    EmptyInput,
    TreebankError,
    build_report,
    delta_f1,
    demonstrations_from_trees,
    format_report_table,
    load_treebank,
    read_records,
    report_by_input_length,
    report_by_span_length,
    run_experiment,
    write_report_csv,
    write_report_json,
)
from .faithfulness import check_faithfulness, corrupt_faithfulness
from .linearize import LinearizedTree, LinearizeError, Strategy, decode as decode_lin, encode
from .pmc import CheckerMode, PMCConfig
from .prompting import preprocess, preprocess_tree
from .scoring import (
    EmptyCorpus,
    EvalConfig,
    InvalidPolicy,
    load_eval_config,
    score_corpus,
    score_sentence,
)
from .tree import TreeError, render_bracketed
from .validity import Inapplicable, InvalidKind, check_validity, corrupt_validity

STRATEGY = click.Choice([s.value for s in Strategy])


def _eval_config(config_file, invalid_policy) -> EvalConfig:
    cfg = load_eval_config(config_file) if config_file else EvalConfig()
    if invalid_policy:
        cfg = EvalConfig(
            delete_labels=cfg.delete_labels,
            punctuation_pos=cfg.punctuation_pos,
            invalid_policy=InvalidPolicy(invalid_policy),
        )
    return cfg


def _make_backend(kind: str, script: str | None):
    if kind == "script":
        if not script:
            raise click.UsageError("--backend script requires --script FILE")
        return ScriptedBackend.from_file(script)
    return HTTPBackend.from_env()


def _out_stream(out: str | None):
    return open(out, "w", encoding="utf-8") if out else sys.stdout


@click.group()
@click.version_option(package_name="conparse")
def cli():
    """Constituency parsing with LLMs: linearize trees, check and score
    predictions, build prompts, and run scripted or live experiments."""


@cli.command()
@click.argument("files", nargs=-1, required=True, type=click.Path())
@click.option("--lenient", is_flag=True, help="Skip malformed trees instead of failing.")
def stats(files, lenient):
    """Tree and token counts for treebank files."""
    click.echo(f"{'file':<40} {'trees':>8} {'tokens':>9} {'mean':>6} {'max':>5}")
    for path in files:
        split = load_treebank(path, domain=Path(path).stem, lenient=lenient)
        lengths = [len(t.sentence) for t in split.trees]
        click.echo(
            f"{path:<40} {len(lengths):>8} {sum(lengths):>9} "
            f"{sum(lengths) / len(lengths):>6.1f} {max(lengths):>5}"
        )


@cli.command()
@click.argument("treebank", type=click.Path())
@click.option("--strategy", type=STRATEGY, default="bracket", show_default=True)
@click.option("--out", type=click.Path(), help="Output file (default stdout).")
@click.option("--apply-preprocessing", is_flag=True, help="Map punctuation to special symbols first.")
@click.option("--lenient", is_flag=True)
def linearize(treebank, strategy, out, apply_preprocessing, lenient):
    """Linearize every tree of a treebank.

    Bracket and transition payloads are written one per line; span payloads
    are blocks of template lines separated by blank lines.
    """
    split = load_treebank(treebank, lenient=lenient)
    strategy = Strategy(strategy)
    stream = _out_stream(out)
    try:
        for tree in split.trees:
            if apply_preprocessing:
                tree = preprocess_tree(tree)
            payload = encode(tree, strategy).payload
            stream.write(payload + "\n")
            if strategy is Strategy.SPAN:
                stream.write("\n")
    finally:
        if out:
            stream.close()


@cli.command("decode")
@click.argument("payloads", type=click.Path())
@click.option("--strategy", type=STRATEGY, default="bracket", show_default=True)
@click.option("--out", type=click.Path())
def decode_cmd(payloads, strategy, out):
    """Decode linearized payloads back into bracket trees."""
    strategy = Strategy(strategy)
    text = Path(payloads).read_text(encoding="utf-8")
    if strategy is Strategy.SPAN:
        chunks = [c for c in text.split("\n\n") if c.strip()]
    else:
        chunks = [line for line in text.splitlines() if line.strip()]
    stream = _out_stream(out)
    try:
        for i, chunk in enumerate(chunks):
            try:
                tree = decode_lin(LinearizedTree(strategy, chunk))
            except ValueError as exc:
                raise LinearizeError(f"payload {i}: {exc}") from exc
            stream.write(render_bracketed(tree) + "\n")
    finally:
        if out:
            stream.close()


@cli.command()
@click.argument("predictions", type=click.Path())
@click.option("--out", type=click.Path(), help="JSONL report output (default stdout).")
def validate(predictions, out):
    """Structural validity reports for predictions, one per line."""
    lines = [
        ln for ln in Path(predictions).read_text(encoding="utf-8").splitlines()
        if ln.strip()
    ]
    stream = _out_stream(out)
    n_invalid = 0
    try:
        for i, line in enumerate(lines):
            report = check_validity(line)
            n_invalid += 0 if report.valid else 1
            stream.write(json.dumps(
                {"id": i, **report.to_dict()}, sort_keys=True, ensure_ascii=False
            ) + "\n")
    finally:
        if out:
            stream.close()
    click.echo(f"{n_invalid}/{len(lines)} invalid", err=True)


@cli.command()
@click.argument("predictions", type=click.Path())
@click.option("--sentences", type=click.Path(), help="One raw sentence per line.")
@click.option("--gold", type=click.Path(), help="Treebank supplying the sentences.")
@click.option("--out", type=click.Path())
def faithcheck(predictions, sentences, gold, out):
    """Faithfulness reports for predictions against their input sentences."""
    if bool(sentences) == bool(gold):
        raise click.UsageError("provide exactly one of --sentences or --gold")
    preds = [
        ln for ln in Path(predictions).read_text(encoding="utf-8").splitlines()
        if ln.strip()
    ]
    if sentences:
        sents = [
            preprocess(ln)
            for ln in Path(sentences).read_text(encoding="utf-8").splitlines()
            if ln.strip()
        ]
    else:
        split = load_treebank(gold)
        sents = [preprocess_tree(t).sentence for t in split.trees]
    if len(preds) != len(sents):
        raise TreebankError(
            f"{len(preds)} predictions but {len(sents)} sentences"
        )
    stream = _out_stream(out)
    n_unfaithful = 0
    try:
        for i, (pred, sent) in enumerate(zip(preds, sents)):
            report = check_faithfulness(pred, sent)
            n_unfaithful += 0 if report.faithful else 1
            stream.write(json.dumps(
                {"id": i, **report.to_dict()}, sort_keys=True, ensure_ascii=False
            ) + "\n")
    finally:
        if out:
            stream.close()
    click.echo(f"{n_unfaithful}/{len(preds)} unfaithful", err=True)


CORRUPT_KINDS = ["missing_word", "more_than_one_word", "bracket_unmatched", "word_mismatch"]


@cli.command()
@click.argument("treebank", type=click.Path())
@click.option("--kind", type=click.Choice(CORRUPT_KINDS), required=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path())
@click.option("--lenient", is_flag=True)
def corrupt(treebank, kind, seed, out, lenient):
    """Inject one error of the given kind into each tree."""
    split = load_treebank(treebank, lenient=lenient)
    stream = _out_stream(out)
    skipped = 0
    try:
        for i, tree in enumerate(split.trees):
            try:
                if kind == "word_mismatch":
                    text, annotation = corrupt_faithfulness(tree, seed=seed + i)
                else:
                    text, annotation = corrupt_validity(tree, InvalidKind(kind), seed=seed + i)
            except Inapplicable:
                skipped += 1
                continue
            stream.write(json.dumps(
                {"id": i, "kind": kind, "text": text, "annotation": annotation},
                sort_keys=True, ensure_ascii=False,
            ) + "\n")
    finally:
        if out:
            stream.close()
    if skipped:
        click.echo(f"skipped {skipped} trees the corruption does not apply to", err=True)


@cli.command()
@click.option("--gold", type=click.Path(), required=True)
@click.option("--pred", type=click.Path(), required=True)
@click.option("--config", "config_file", type=click.Path(),
              help="key=value parameter file (DELETE_LABEL, PUNCT_POS, INVALID_POLICY).")
@click.option("--invalid-policy", type=click.Choice([p.value for p in InvalidPolicy]))
@click.option("--apply-preprocessing", is_flag=True,
              help="Map gold punctuation to special symbols before comparing.")
@click.option("--json", "as_json", is_flag=True, help="Emit the report as JSON.")
@click.option("--lenient", is_flag=True)
def score(gold, pred, config_file, invalid_policy, apply_preprocessing, as_json, lenient):
    """Score predictions (one per line) against a gold treebank."""
    cfg = _eval_config(config_file, invalid_policy)
    split = load_treebank(gold, lenient=lenient)
    preds = Path(pred).read_text(encoding="utf-8").splitlines()
    preds = [p for p in preds if p.strip()]
    if len(preds) != len(split.trees):
        raise TreebankError(f"{len(preds)} predictions but {len(split.trees)} gold trees")
    rows = []
    for tree, text in zip(split.trees, preds):
        if apply_preprocessing:
            tree = preprocess_tree(tree)
        rows.append(score_sentence(tree, text, cfg))
    report = score_corpus(rows, cfg)
    if as_json:
        click.echo(report.to_json())
        return
    d = report.to_dict()
    for key in ["LP", "LR", "F1", "valid_F1", "overall_F1", "macro_F1"]:
        click.echo(f"{key:<12} {d[key]:.4f}")
    click.echo(f"{'invalid%':<12} {d['invalid_rate']:.2f}")
    click.echo(f"{'unfaithful%':<12} {d['unfaithful_rate']:.2f}")
    click.echo(f"{'sentences':<12} {d['n_sentences']}")


def _experiment_options(fn):
    fn = click.option("--strategy", type=STRATEGY, default="bracket", show_default=True)(fn)
    fn = click.option("--shots", type=int, default=0, show_default=True)(fn)
    fn = click.option("--demos", type=click.Path(),
                      help="Treebank whose first --shots trees become demonstrations.")(fn)
    fn = click.option("--backend", "backend_kind", type=click.Choice(["http", "script"]),
                      default="script", show_default=True)(fn)
    fn = click.option("--script", type=click.Path(),
                      help="Scripted-backend response file (JSONL).")(fn)
    fn = click.option("--out", type=click.Path(), help="Records output (JSONL).")(fn)
    fn = click.option("--domain", default="news", show_default=True)(fn)
    fn = click.option("--lenient", is_flag=True)(fn)
    fn = click.option("--resume", is_flag=True, help="Skip ids already in --out.")(fn)
    fn = click.option("--parallel", type=int, default=1, show_default=True)(fn)
    fn = click.option("--temperature", type=float, default=0.0, show_default=True)(fn)
    fn = click.option("--max-tokens", type=int, default=2048, show_default=True)(fn)
    fn = click.option("--model", default="", help="Model id sent to the backend.")(fn)
    fn = click.option("--config", "config_file", type=click.Path())(fn)
    fn = click.option("--invalid-policy", type=click.Choice([p.value for p in InvalidPolicy]))(fn)
    return fn


def _load_demos(demos, shots, strategy, lenient):
    if shots and not demos:
        raise click.UsageError("--shots needs --demos TREEBANK")
    if not demos:
        return []
    demo_split = load_treebank(demos, lenient=lenient)
    return demonstrations_from_trees(demo_split.trees, strategy, k=shots or None)


def _finish_run(records, out):
    ok = sum(1 for r in records if r.error is None)
    click.echo(f"completed {ok}/{len(records)} sentences", err=True)
    if records:
        rows, overall = build_report(records)
        click.echo(format_report_table(rows, overall))
    if out:
        click.echo(f"records written to {out}", err=True)


@cli.command()
@click.argument("treebank", type=click.Path())
@click.option("--mode", type=click.Choice(["zero", "few", "les", "pmc"]), default="zero",
              show_default=True)
@_experiment_options
def parse(treebank, mode, strategy, shots, demos, backend_kind, script, out, domain,
          lenient, resume, parallel, temperature, max_tokens, model, config_file,
          invalid_policy):
    """Parse a treebank's sentences with an LLM backend and score the output.

    --mode pmc runs the refinement loop with its defaults; the pmc subcommand
    exposes the loop's own knobs.
    """
    split = load_treebank(treebank, domain=domain, lenient=lenient)
    backend = _make_backend(backend_kind, script)
    records = run_experiment(
        split, mode, backend,
        strategy=Strategy(strategy),
        shots=shots,
        demonstrations=_load_demos(demos, shots, strategy, lenient),
        eval_config=_eval_config(config_file, invalid_policy),
        out_path=out,
        resume=resume,
        parallel=parallel,
        temperature=temperature,
        max_tokens=max_tokens,
        model_id=model,
    )
    _finish_run(records, out)


@cli.command()
@click.argument("treebank", type=click.Path())
@click.option("--pmc-rounds", type=int, default=3, show_default=True)
@click.option("--checker-mode", type=click.Choice([m.value for m in CheckerMode]),
              default="rule", show_default=True)
@click.option("--traces", type=click.Path(), help="Write per-sentence session traces (JSONL).")
@_experiment_options
def pmc(treebank, pmc_rounds, checker_mode, traces, strategy, shots, demos, backend_kind,
        script, out, domain, lenient, resume, parallel, temperature, max_tokens, model,
        config_file, invalid_policy):
    """Run the multi-agent refinement loop over a treebank."""
    import threading

    split = load_treebank(treebank, domain=domain, lenient=lenient)
    backend = _make_backend(backend_kind, script)
    trace_file = open(traces, "w", encoding="utf-8") if traces else None
    trace_lock = threading.Lock()

    def on_session(rid, session):
        if trace_file is not None:
            line = json.dumps(
                {"id": rid, "session": session.to_dict()},
                sort_keys=True, ensure_ascii=False,
            )
            with trace_lock:
                trace_file.write(line + "\n")

    try:
        records = run_experiment(
            split, "pmc", backend,
            strategy=Strategy(strategy),
            shots=shots,
            demonstrations=_load_demos(demos, shots, strategy, lenient),
            pmc_config=PMCConfig(max_rounds=pmc_rounds, checker_mode=CheckerMode(checker_mode)),
            eval_config=_eval_config(config_file, invalid_policy),
            out_path=out,
            resume=resume,
            parallel=parallel,
            temperature=temperature,
            max_tokens=max_tokens,
            model_id=model,
            on_session=on_session,
        )
    finally:
        if trace_file is not None:
            trace_file.close()
    _finish_run(records, out)


@cli.command()
@click.argument("records_file", type=click.Path())
@click.option("--group-by", default="domain", show_default=True)
@click.option("--reference", help="Group treated as in-domain for the dF1 column.")
@click.option("--by-input-length", is_flag=True)
@click.option("--by-span-length", is_flag=True)
@click.option("--out-dir", type=click.Path(), help="Write CSV, JSON and figures here.")
@click.option("--figures/--no-figures", default=True, show_default=True)
@click.option("--config", "config_file", type=click.Path())
@click.option("--invalid-policy", type=click.Choice([p.value for p in InvalidPolicy]))
def report(records_file, group_by, reference, by_input_length, by_span_length,
           out_dir, figures, config_file, invalid_policy):
    """Aggregate experiment records into tables, delimited files and figures."""
    cfg = _eval_config(config_file, invalid_policy)
    records = read_records(records_file)
    rows, overall = build_report(records, group_by=group_by, config=cfg)
    click.echo(format_report_table(rows, overall, reference=reference))

    length_rows = report_by_input_length(records, config=cfg) if by_input_length else None
    span_rows = report_by_span_length(records, config=cfg) if by_span_length else None
    if length_rows:
        click.echo("\nby input length:")
        for label, score_ in length_rows:
            shown = f"{score_.overall_f1:.4f}" if score_ else "-"
            click.echo(f"  {label:<8} {shown}")
    if span_rows:
        click.echo("\nby span length:")
        for label, _, _, f1, n in span_rows:
            click.echo(f"  {label:<8} {f1:.4f}  ({n} gold spans)")

    if not out_dir:
        return
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_report_csv(rows, overall, out / "report.csv")
    extras = {}
    if reference:
        extras["delta_f1"] = delta_f1(rows, reference)
    if length_rows:
        extras["by_input_length"] = {
            label: (score_.to_dict() if score_ else None) for label, score_ in length_rows
        }
    if span_rows:
        extras["by_span_length"] = [
            {"bucket": label, "LP": lp, "LR": lr, "F1": f1, "gold": n}
            for label, lp, lr, f1, n in span_rows
        ]
    write_report_json(rows, overall, out / "report.json", extras=extras)
    written = [out / "report.csv", out / "report.json"]
    if figures:
        from . import figures as fig

        if fig.save_domain_f1_bars(rows, out / "f1_by_group.png"):
            written.append(out / "f1_by_group.png")
        if fig.save_invalid_kind_pie(overall.invalid_kinds, out / "invalid_kinds.png"):
            written.append(out / "invalid_kinds.png")
        if fig.save_unfaithful_kind_bars(overall.unfaithful_kinds, out / "unfaithful_kinds.png"):
            written.append(out / "unfaithful_kinds.png")
        if length_rows and fig.save_length_f1_curve(length_rows, out / "f1_by_input_length.png"):
            written.append(out / "f1_by_input_length.png")
        if span_rows and fig.save_span_length_f1(span_rows, out / "f1_by_span_length.png"):
            written.append(out / "f1_by_span_length.png")
    click.echo("wrote " + ", ".join(str(p) for p in written), err=True)


@cli.command("export-finetune")
@click.argument("treebank", type=click.Path())
@click.option("--strategy", type=STRATEGY, default="bracket", show_default=True)
@click.option("--out", type=click.Path(), help="JSONL output (default stdout).")
@click.option("--instruction", help="Override the bundled task instruction.")
@click.option("--lenient", is_flag=True)
def export_finetune(treebank, strategy, out, instruction, lenient):
    """Export instruction/input/output fine-tuning records."""
    from .prompting import export_finetune_records

    split = load_treebank(treebank, lenient=lenient)
    stream = _out_stream(out)
    n = 0
    try:
        for record in export_finetune_records(
            split.trees, Strategy(strategy), instruction=instruction
        ):
            stream.write(json.dumps(record.to_dict(), sort_keys=True, ensure_ascii=False) + "\n")
            n += 1
    finally:
        if out:
            stream.close()
    click.echo(f"exported {n} records", err=True)


def main(argv=None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.UsageError as exc:
        exc.show()
        return 1
    except click.Abort:
        click.echo("aborted", err=True)
        return 1
    except BackendError as exc:
        click.echo(f"backend error: {exc}", err=True)
        return 3
    except (TreebankError, TreeError, LinearizeError, EmptyCorpus, EmptyInput,
            Inapplicable, FileNotFoundError, json.JSONDecodeError, ValueError) as exc:
        click.echo(f"data error: {exc}", err=True)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
