import json

import pytest

from tokompiler.bpe_baseline import BpeModel
from tokompiler.cli import main
from tokompiler.corpus_pipeline import ingest
from tokompiler.parser_frontend import parse


@pytest.fixture(autouse=True)
def clean_environment(monkeypatch):
    monkeypatch.delenv("TOKOMPILER_CONFIG", raising=False)
    monkeypatch.delenv("TOKOMPILER_SEED", raising=False)


@pytest.fixture
def array_decl_dir(tmp_path, array_decl_unit):
    source = tmp_path / "src"
    source.mkdir()
    (source / "array_decl.c").write_text(array_decl_unit.text)
    return source


def read_rows(path):
    return [json.loads(line) for line in path.read_text().splitlines() if line.strip()]


def test_tokenize_array_decl(array_decl_dir, tmp_path):
    out = tmp_path / "out"

    assert main(["tokenize", str(array_decl_dir), "--out", str(out)]) == 0

    rows = read_rows(out / "tokens.jsonl")
    assert len(rows) == 1
    assert rows[0]["unit_id"] == "array_decl.c"
    assert len(rows[0]["tokens"]) == 18
    assert len(list((out / "dicts").iterdir())) == 1


def test_tokenize_is_byte_identical_across_runs(corpus_root, tmp_path):
    for name in ("first", "second"):
        assert main(["tokenize", str(corpus_root), "--out", str(tmp_path / name), "--seed", "5"]) == 0

    first, second = tmp_path / "first", tmp_path / "second"
    assert (first / "tokens.jsonl").read_bytes() == (second / "tokens.jsonl").read_bytes()
    dicts = sorted(path.name for path in (first / "dicts").iterdir())
    assert dicts == sorted(path.name for path in (second / "dicts").iterdir())
    for name in dicts:
        assert (first / "dicts" / name).read_bytes() == (second / "dicts" / name).read_bytes()


def test_tokenize_empty_dir(tmp_path):
    source = tmp_path / "empty"
    source.mkdir()

    assert main(["tokenize", str(source), "--out", str(tmp_path / "out")]) == 0
    assert (tmp_path / "out" / "tokens.jsonl").read_text() == ""


def test_missing_root_exits_2(tmp_path):
    assert main(["tokenize", str(tmp_path / "missing"), "--out", str(tmp_path / "out")]) == 2


def test_bad_config_exits_2(array_decl_dir, tmp_path):
    config = tmp_path / "config.yaml"
    config.write_text("filter: [\n")

    assert main(["tokenize", str(array_decl_dir), "--out", str(tmp_path / "out"), "--config", str(config)]) == 2


def test_restore_round_trip(corpus_root, tmp_path):
    out = tmp_path / "out"
    assert main(["tokenize", str(corpus_root), "--out", str(out)]) == 0

    restored = tmp_path / "restored.jsonl"
    assert main(["restore", str(out / "tokens.jsonl"), "--dicts", str(out / "dicts"), "--out", str(restored)]) == 0

    expected = {unit.id: " ".join(parse(unit).lexemes()) for unit in ingest(corpus_root)}
    rows = read_rows(restored)
    assert {row["unit_id"] for row in rows} == set(expected)
    for row in rows:
        assert row["text"] == expected[row["unit_id"]]


def test_restore_missing_dictionary_exits_2(array_decl_dir, tmp_path):
    out = tmp_path / "out"
    assert main(["tokenize", str(array_decl_dir), "--out", str(out)]) == 0
    empty = tmp_path / "no_dicts"
    empty.mkdir()

    assert main(["restore", str(out / "tokens.jsonl"), "--dicts", str(empty), "--out", str(tmp_path / "r.jsonl")]) == 2


def test_restore_empty_tokens_file(tmp_path):
    tokens = tmp_path / "tokens.jsonl"
    tokens.write_text("")
    (tmp_path / "dicts").mkdir()
    restored = tmp_path / "restored.jsonl"

    assert main(["restore", str(tokens), "--dicts", str(tmp_path / "dicts"), "--out", str(restored)]) == 0
    assert restored.read_text() == ""


def test_vocab_from_tokens(array_decl_dir, tmp_path):
    out = tmp_path / "out"
    assert main(["tokenize", str(array_decl_dir), "--out", str(out), "--range-hi", "10"]) == 0
    vocab_file = tmp_path / "vocab.txt"

    assert main(["vocab", str(out / "tokens.jsonl"), "--out", str(vocab_file), "--range-hi", "10"]) == 0

    tokens = vocab_file.read_text().split("\n")
    assert "int" in tokens
    assert "10" in tokens
    assert "11" not in tokens


def test_vocab_on_empty_tokens_exits_2(tmp_path):
    tokens = tmp_path / "tokens.jsonl"
    tokens.write_text("")

    assert main(["vocab", str(tokens), "--out", str(tmp_path / "vocab.txt")]) == 2


def test_tokenize_with_vocabulary_writes_ids(array_decl_dir, tmp_path):
    first = tmp_path / "first"
    assert main(["tokenize", str(array_decl_dir), "--out", str(first)]) == 0
    vocab_file = tmp_path / "vocab.txt"
    assert main(["vocab", str(first / "tokens.jsonl"), "--out", str(vocab_file)]) == 0

    second = tmp_path / "second"
    assert main(["tokenize", str(array_decl_dir), "--out", str(second), "--vocab", str(vocab_file)]) == 0

    row = read_rows(second / "tokens.jsonl")[0]
    assert len(row["ids"]) == len(row["tokens"])


def test_corpus_outputs(corpus_root, tmp_path):
    out = tmp_path / "out"

    assert main(["corpus", str(corpus_root), "--out", str(out), "--min-tokens", "20"]) == 0

    report = json.loads((out / "stats.json").read_text())
    blocks = read_rows(out / "units.jsonl")
    assert report["filter_ledger"]["units_in"] == 6
    assert len(blocks) == sum(record["functions"] for record in report["languages"].values())
    assert all(block["parent_id"] for block in blocks)


def test_corpus_bpe_counter_needs_model(corpus_root, tmp_path):
    argv = ["corpus", str(corpus_root), "--out", str(tmp_path), "--token-counter", "bpe"]

    assert main(argv) == 2


def test_bpe_train_writes_model(corpus_root, tmp_path):
    model_file = tmp_path / "bpe.txt"
    argv = ["bpe-train", str(corpus_root), "--out", str(model_file), "--target-size", "300", "--sample-fraction", "1.0"]

    assert main(argv) == 0

    model = BpeModel.load(model_file)
    assert model.target_size == 300
    assert model.merges
    assert len(model) <= 300


def test_compare_writes_reports(corpus_root, tmp_path, capsys):
    out = tmp_path / "out"

    assert main(["compare", str(corpus_root), "--out", str(out), "--target-size", "400", "--order", "2"]) == 0

    report = json.loads((out / "report.json").read_text())
    assert set(report["tokenizers"]) == {"tokompiler", "bpe", "lexical"}
    assert len(report["rows"]) == 6
    assert set(report["normalized_ppl"]) == {"tokompiler", "bpe", "lexical"}
    table = (out / "report.txt").read_text()
    assert table in capsys.readouterr().out
    assert "Lowest per_source_char perplexity" in table


def test_compare_empty_dir_exits_2(tmp_path):
    source = tmp_path / "empty"
    source.mkdir()

    assert main(["compare", str(source), "--out", str(tmp_path / "out")]) == 2
