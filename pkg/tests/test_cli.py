import json
import shutil
import subprocess
import sys

import pytest

from forecastskill.cli import main

SYNTH = ["synth", "--authors", "40", "--forecasts", "10", "--questions", "20", "--seed", "1"]


def run(argv, tmp_path, name="out.jsonl"):
    out = tmp_path / name
    code = main([*argv, "-o", str(out)])
    return code, out.read_bytes() if out.exists() else b""


def rows(data: bytes):
    return [json.loads(line) for line in data.decode().splitlines()]


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    path = d / "corpus.jsonl"
    assert main([*SYNTH, "-o", str(path)]) == 0
    return path


def test_header_row(corpus):
    head = rows(corpus.read_bytes())[0]
    assert head["_type"] == "header" and head["command"] == "synth" and head["seed"] == 1
    assert "seed" not in head["config"] and head["config"]["authors"] == 40
    assert len(head["input_sha256"]) == 64


def test_synth_score_rank_pipeline(corpus, tmp_path):
    code, scores = run(["score", str(corpus)], tmp_path, "scores.jsonl")
    assert code == 0
    score_rows = [r for r in rows(scores) if r["_type"] == "score"]
    assert len(score_rows) == 400
    (tmp_path / "scores.jsonl").write_bytes(scores)
    code, ranked = run(["rank", str(tmp_path / "scores.jsonl")], tmp_path, "rank.jsonl")
    assert code == 0
    profiles = [r for r in rows(ranked) if r["_type"] == "profile"]
    assert len(profiles) == 40
    assert [p["rank"] for p in profiles] == list(range(1, 41))


def test_default_synth_gives_two_hundred_profiles(tmp_path):
    assert main(["synth", "-o", str(tmp_path / "c.jsonl")]) == 0
    code, ranked = run(["rank", str(tmp_path / "c.jsonl")], tmp_path)
    assert code == 0
    assert sum(r["_type"] == "profile" for r in rows(ranked)) == 200


@pytest.mark.parametrize(
    "argv",
    [
        ["score"],
        ["rank", "--k", "5"],
        ["metrics"],
        ["compare", "--k", "10", "--bootstrap", "2000", "--metrics", "pct_uncertain_sentences,token_count"],
        ["evaluate", "--k", "10", "--folds", "3"],
        ["calibration", "--k", "10"],
    ],
)
def test_reruns_are_byte_identical_and_thread_free(corpus, tmp_path, argv):
    code1, a = run([*argv, str(corpus)], tmp_path, "a.jsonl")
    code2, b = run([*argv, str(corpus)], tmp_path, "b.jsonl")
    code3, c = run([*argv, str(corpus), "--threads", "4"], tmp_path, "c.jsonl")
    assert code1 == code2 == code3 == 0
    assert a == b == c


def test_synth_rerun_identical(tmp_path):
    _, a = run(SYNTH, tmp_path, "a.jsonl")
    _, b = run(SYNTH, tmp_path, "b.jsonl")
    assert a == b


def test_compare_text_table(tmp_path):
    # enough forecasts per author for the ranking to separate the skill tiers
    corpus = tmp_path / "big.jsonl"
    assert main(["synth", "--authors", "60", "--forecasts", "40", "--questions", "40", "--seed", "1",
                 "-o", str(corpus)]) == 0
    code, out = run(["compare", str(corpus), "--k", "15", "--bootstrap", "1000", "--format", "text",
                     "--metrics", "pct_uncertain_sentences,token_count"], tmp_path, "t.txt")
    assert code == 0
    table = {line.split()[0]: line.split()[-1] for line in out.decode().splitlines()
             if line.startswith(("pct_uncertain_sentences ", "token_count "))}
    # skilled authors hedge more and write longer justifications by construction
    assert table == {"pct_uncertain_sentences": "↑↑↑*", "token_count": "↑↑↑*"}


def test_train_and_apply_saved_model(corpus, tmp_path):
    model = tmp_path / "m.bin"
    code, out = run(["train", str(corpus), "--k", "10", "--model-out", str(model)], tmp_path)
    assert code == 0 and model.exists()
    assert any(r["_type"] == "train_summary" for r in rows(out))
    code, out = run(["evaluate", str(corpus), "--k", "10", "--model", str(model)], tmp_path)
    assert code == 0


def test_eps_extraction_round_trip(tmp_path):
    notes, gold = tmp_path / "notes.jsonl", tmp_path / "gold.tsv"
    assert main(["synth", "--domain", "eps", "--analysts", "3", "--notes", "10", "-o", str(notes),
                 "--gold", str(gold)]) == 0
    code, out = run(["eval-eps", str(notes), "--gold", str(gold)], tmp_path)
    assert code == 0
    (summary,) = [r for r in rows(out) if r["_type"] != "header"]
    assert summary["precision"] == 1.0 and summary["recall"] == 1.0


def test_usage_errors_exit_1(corpus, capsys):
    assert main(["rank", str(corpus), "--threads", "0"]) == 1
    assert main(["nonsense"]) == 1
    assert main(["compare", str(corpus), "--k", "abc"]) == 1
    assert "usage error" in capsys.readouterr().err


def test_data_errors_exit_2(tmp_path, capsys):
    bad = tmp_path / "bad.jsonl"
    bad.write_text('{"record_id": "x"}\n')
    assert main(["ingest", str(bad)]) == 2
    assert main(["score", str(tmp_path / "missing.jsonl")]) == 2
    assert "error" in capsys.readouterr().err


def test_ingest_allow_errors(tmp_path):
    bad = tmp_path / "bad.jsonl"
    bad.write_text('{"record_id": "x"}\n')
    code, out = run(["ingest", str(bad), "--allow-errors"], tmp_path)
    assert code == 0
    assert any(r["_type"] == "error" for r in rows(out))


def test_k_too_large_is_data_error(corpus):
    assert main(["rank", str(corpus), "--k", "21"]) == 2


@pytest.mark.skipif(shutil.which("forecastskill") is None, reason="console script not installed")
def test_console_script_stdin_pipeline(corpus):
    score = subprocess.run(["forecastskill", "score"], input=corpus.read_bytes(), capture_output=True, check=True)
    rank = subprocess.run(["forecastskill", "rank"], input=score.stdout, capture_output=True, check=True)
    assert sum(r["_type"] == "profile" for r in rows(rank.stdout)) == 40


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "forecastskill.cli", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.startswith("forecastskill")
