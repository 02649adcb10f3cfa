import json

import pytest

from conparse.cli import main

from helpers import CAT, SINGAPORE, SINGAPORE_MISSING

TREES = [SINGAPORE, CAT, "(S (NP (NNS dogs)) (VP (VBP run)))"]


@pytest.fixture
def treebank(tmp_path):
    path = tmp_path / "gold.txt"
    path.write_text("\n".join(TREES) + "\n", encoding="utf-8")
    return path


def wildcard_script(tmp_path, responses):
    path = tmp_path / "script.jsonl"
    path.write_text(
        json.dumps({"prompt_sha256": "*", "responses": responses}) + "\n",
        encoding="utf-8",
    )
    return path


def test_stats(treebank, capsys):
    assert main(["stats", str(treebank)]) == 0
    out = capsys.readouterr().out
    assert "3" in out and "trees" in out


def test_stats_missing_file(tmp_path, capsys):
    assert main(["stats", str(tmp_path / "nope.txt")]) == 2


def test_usage_error_exit_code(capsys):
    assert main(["linearize", "--strategy", "bogus", "x"]) == 1
    assert main(["definitely-not-a-command"]) == 1


def test_linearize_decode_round_trip(treebank, tmp_path, capsys):
    payloads = tmp_path / "payloads.txt"
    assert main(["linearize", str(treebank), "--strategy", "transition",
                 "--out", str(payloads)]) == 0
    assert main(["decode", str(payloads), "--strategy", "transition"]) == 0
    out = capsys.readouterr().out.strip().splitlines()
    assert out == TREES


def test_linearize_decode_span_blocks(treebank, tmp_path, capsys):
    payloads = tmp_path / "payloads.txt"
    assert main(["linearize", str(treebank), "--strategy", "span",
                 "--out", str(payloads)]) == 0
    assert main(["decode", str(payloads), "--strategy", "span"]) == 0
    out = capsys.readouterr().out.strip().splitlines()
    assert out == TREES


def test_decode_bad_payload_is_data_error(tmp_path, capsys):
    bad = tmp_path / "bad.txt"
    bad.write_text("NT(S) REDUCE REDUCE\n")
    assert main(["decode", str(bad), "--strategy", "transition"]) == 2


def test_validate(tmp_path, capsys):
    preds = tmp_path / "preds.txt"
    preds.write_text(SINGAPORE + "\n" + SINGAPORE_MISSING + "\n")
    assert main(["validate", str(preds)]) == 0
    captured = capsys.readouterr()
    lines = [json.loads(l) for l in captured.out.strip().splitlines()]
    assert lines[0]["valid"] is True
    assert lines[1]["valid"] is False
    assert "1/2 invalid" in captured.err


def test_faithcheck_with_gold(treebank, tmp_path, capsys):
    preds = tmp_path / "preds.txt"
    preds.write_text(
        SINGAPORE.replace("located", "situated") + "\n" + TREES[1] + "\n" + TREES[2] + "\n"
    )
    assert main(["faithcheck", str(preds), "--gold", str(treebank)]) == 0
    captured = capsys.readouterr()
    lines = [json.loads(l) for l in captured.out.strip().splitlines()]
    assert lines[0]["faithful"] is False
    assert lines[1]["faithful"] is True


def test_faithcheck_requires_exactly_one_source(tmp_path):
    preds = tmp_path / "preds.txt"
    preds.write_text("(X (A a))\n")
    assert main(["faithcheck", str(preds)]) == 1


def test_corrupt(treebank, capsys):
    assert main(["corrupt", str(treebank), "--kind", "missing_word", "--seed", "3"]) == 0
    lines = [json.loads(l) for l in capsys.readouterr().out.strip().splitlines()]
    assert len(lines) == 3
    assert all("lacks a word." in l["annotation"] for l in lines)


def test_score_command(treebank, tmp_path, capsys):
    preds = tmp_path / "preds.txt"
    preds.write_text(TREES[0] + "\n(S (NP (NNP\n" + TREES[2] + "\n")
    assert main(["score", "--gold", str(treebank), "--pred", str(preds)]) == 0
    out = capsys.readouterr().out
    assert "valid_F1" in out and "invalid%" in out

    assert main(["score", "--gold", str(treebank), "--pred", str(preds), "--json"]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["invalid_rate"] == pytest.approx(100 / 3)
    assert payload["valid_F1"] == 1.0


def test_score_count_mismatch(treebank, tmp_path):
    preds = tmp_path / "preds.txt"
    preds.write_text(TREES[0] + "\n")
    assert main(["score", "--gold", str(treebank), "--pred", str(preds)]) == 2


def test_parse_records_and_report(treebank, tmp_path, capsys):
    script = wildcard_script(tmp_path, TREES)
    records = tmp_path / "records.jsonl"
    assert main([
        "parse", str(treebank), "--mode", "zero", "--backend", "script",
        "--script", str(script), "--out", str(records), "--domain", "news",
    ]) == 0
    lines = records.read_text().strip().splitlines()
    assert len(lines) == 3

    out_dir = tmp_path / "report"
    assert main([
        "report", str(records), "--out-dir", str(out_dir), "--by-input-length",
        "--by-span-length",
    ]) == 0
    assert (out_dir / "report.csv").exists()
    assert (out_dir / "report.json").exists()
    assert (out_dir / "f1_by_group.png").exists()
    payload = json.loads((out_dir / "report.json").read_text())
    assert payload["overall"]["invalid_rate"] == 0.0


def test_parse_few_shot_requires_demo_file(treebank, tmp_path):
    script = wildcard_script(tmp_path, TREES)
    assert main([
        "parse", str(treebank), "--mode", "few", "--shots", "2",
        "--backend", "script", "--script", str(script),
    ]) == 1


def test_parse_http_without_env_is_backend_error(treebank, monkeypatch):
    monkeypatch.delenv("CONPARSE_API_BASE", raising=False)
    assert main(["parse", str(treebank), "--backend", "http"]) == 3


def test_parse_mode_pmc_alias(treebank, tmp_path, capsys):
    script = wildcard_script(tmp_path, [SINGAPORE_MISSING, SINGAPORE,
                                        TREES[1], TREES[2]])
    records = tmp_path / "records.jsonl"
    assert main([
        "parse", str(treebank), "--mode", "pmc", "--backend", "script",
        "--script", str(script), "--out", str(records),
    ]) == 0
    lines = [json.loads(l) for l in records.read_text().strip().splitlines()]
    assert lines[0]["pmc_rounds"] == 2
    assert lines[0]["valid"] is True


def test_report_reference_column(treebank, tmp_path, capsys):
    script = wildcard_script(tmp_path, TREES)
    records = tmp_path / "records.jsonl"
    main(["parse", str(treebank), "--backend", "script", "--script", str(script),
          "--out", str(records)])
    capsys.readouterr()
    assert main(["report", str(records), "--reference", "news"]) == 2  # only one group
    capsys.readouterr()
    # split the records over two domains to make the reference meaningful
    lines = records.read_text().strip().splitlines()
    rewritten = []
    for i, line in enumerate(lines):
        d = json.loads(line)
        d["domain"] = "news" if i == 0 else "law"
        rewritten.append(json.dumps(d, sort_keys=True))
    records.write_text("\n".join(rewritten) + "\n")
    assert main(["report", str(records), "--reference", "news"]) == 0
    out = capsys.readouterr().out
    assert "dF1 vs news" in out


def test_pmc_command_with_traces(treebank, tmp_path, capsys):
    script = wildcard_script(tmp_path, [SINGAPORE_MISSING, SINGAPORE,
                                        TREES[1], TREES[2]])
    records = tmp_path / "records.jsonl"
    traces = tmp_path / "traces.jsonl"
    assert main([
        "pmc", str(treebank), "--backend", "script", "--script", str(script),
        "--out", str(records), "--traces", str(traces), "--pmc-rounds", "3",
    ]) == 0
    trace_lines = [json.loads(l) for l in traces.read_text().strip().splitlines()]
    assert len(trace_lines) == 3
    assert trace_lines[0]["session"]["converged"] is True
    assert len(trace_lines[0]["session"]["rounds"]) == 2
    record_lines = [json.loads(l) for l in records.read_text().strip().splitlines()]
    assert record_lines[0]["pmc_rounds"] == 2
    assert record_lines[1]["pmc_rounds"] == 1


def test_export_finetune(treebank, capsys):
    assert main(["export-finetune", str(treebank), "--strategy", "bracket"]) == 0
    captured = capsys.readouterr()
    lines = [json.loads(l) for l in captured.out.strip().splitlines()]
    assert len(lines) == 3
    assert set(lines[0]) == {"instruction", "input", "output"}
    assert lines[0]["output"] == SINGAPORE
    assert "exported 3 records" in captured.err


def test_report_missing_records_file(tmp_path):
    assert main(["report", str(tmp_path / "none.jsonl")]) == 2


def test_help_exits_zero(capsys):
    assert main(["--help"]) == 0
    assert main(["parse", "--help"]) == 0
