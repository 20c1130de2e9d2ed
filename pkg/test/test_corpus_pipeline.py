import json

import pytest

from tokompiler.bpe_baseline import BpeModel
from tokompiler.corpus_pipeline import (
    CorpusPipeline,
    TokenCounter,
    content_hash,
    deduplicate,
    extract_blocks,
    filter_unit,
    ingest,
    stats,
)
from tokompiler.errors import RootNotFound
from tokompiler.models import FilterConfig, FilterLedger, SourceUnit

THREE_FUNCTIONS = """int add(int a, int b) { int c = a + b; return c * 2; }
void t(void) {}
int sub(int a, int b) { int c = a - b; return c * 3; }
"""


def make_unit(text, language="c", unit_id="unit.c"):
    return SourceUnit(id=unit_id, language=language, origin=unit_id, text=text)


def run_vendored(corpus_root, **config):
    return CorpusPipeline(filter_config=FilterConfig(**config)).run(corpus_root)


def test_ingest_counts_matching_files(tmp_path):
    (tmp_path / "a.f90").write_text("program a\nend program a\n")
    (tmp_path / "sub").mkdir()
    (tmp_path / "sub" / "b.f90").write_text("program b\nend program b\n")
    (tmp_path / "c.c").write_text("int x;\n")
    (tmp_path / "notes.txt").write_text("not code\n")

    units = list(ingest(tmp_path))

    assert [unit.id for unit in units] == ["a.f90", "c.c", "sub/b.f90"]
    assert [unit.language for unit in units] == ["fortran", "c", "fortran"]


def test_ingest_empty_dir(tmp_path):
    assert list(ingest(tmp_path)) == []


def test_ingest_missing_root(tmp_path):
    with pytest.raises(RootNotFound):
        list(ingest(tmp_path / "missing"))


def test_ingest_skips_binary_and_empty_files(tmp_path):
    (tmp_path / "bin.c").write_bytes(b"int\x00x;\n")
    (tmp_path / "empty.c").write_text("  \n")
    (tmp_path / "latin.c").write_bytes(b"char *s = \"\xe9\";\n")
    ledger = FilterLedger()

    assert list(ingest(tmp_path, ledger=ledger)) == []
    assert ledger.skipped == {"binary": 1, "empty": 1, "undecodable": 1}


def test_unit_ids_are_root_relative(corpus_root):
    units = {unit.id: unit for unit in ingest(corpus_root)}

    assert set(units) == {
        "heat/include/grid.h",
        "heat/src/array_decl.c",
        "heat/src/jacobi.c",
        "heat/src/jacobi_copy.c",
        "linalg/dense.cpp",
        "ocean/advect.f90",
    }
    assert units["linalg/dense.cpp"].repo == "linalg"


def test_deduplicate_ignores_trailing_blank_lines():
    first = make_unit("int x;\n", unit_id="a.c")
    second = make_unit("int x;\n\n\n", unit_id="b.c")
    ledger = FilterLedger()

    kept = list(deduplicate([first, second], ledger))

    assert kept == [first]
    assert ledger.dropped == {"duplicate": 1}
    assert content_hash(first.text) == content_hash(second.text)


def test_deduplicate_is_idempotent(corpus_root):
    once = list(deduplicate(ingest(corpus_root)))

    assert list(deduplicate(once)) == once
    assert "heat/src/jacobi_copy.c" not in {unit.id for unit in once}


def test_filter_drops_large_files():
    unit = make_unit("int x;\n" * 300_000)

    assert filter_unit(unit, FilterConfig()).reason == "size"


def test_filter_drops_short_snippets():
    decision = filter_unit(make_unit("int x = 1;\n"), FilterConfig())

    assert not decision.keep
    assert decision.reason == "min_tokens"


def test_filter_drops_array_decl_under_defaults(array_decl_unit):
    decision = filter_unit(array_decl_unit, FilterConfig())

    assert decision.reason == "min_tokens"
    assert decision.tokens == 18


def test_filter_drops_parse_errors():
    decision = filter_unit(make_unit("int main( { return 0 \n"), FilterConfig(min_tokens=0))

    assert decision.reason == "parse_error"


def test_filter_keeps_when_above_threshold(array_decl_unit):
    decision = filter_unit(array_decl_unit, FilterConfig(min_tokens=17))

    assert decision.keep
    assert decision.reason is None


def test_filter_with_bpe_counter(array_decl_unit):
    counter = TokenCounter(bpe=BpeModel(merges=[]))
    decision = filter_unit(array_decl_unit, FilterConfig(min_tokens=20), counter)

    assert decision.keep
    assert decision.tokens == len(array_decl_unit.text.encode())


def test_extract_blocks_refilters_each_function():
    unit = make_unit(THREE_FUNCTIONS)
    ledger = FilterLedger()

    blocks = list(extract_blocks([unit], FilterConfig(min_tokens=15), ledger=ledger))

    assert [block.text.split("(")[0] for block in blocks] == ["int add", "int sub"]
    assert ledger.blocks_in == 3
    assert ledger.blocks_kept == 2
    assert ledger.blocks_dropped == {"min_tokens": 1}


def test_extract_blocks_without_functions():
    assert list(extract_blocks([make_unit("int x;\n")], FilterConfig(min_tokens=0))) == []


def test_extract_blocks_array_decl(array_decl_unit):
    assert len(list(extract_blocks([array_decl_unit], FilterConfig(min_tokens=0)))) == 1


def test_stats_empty():
    report = stats([], [])

    assert set(report.languages) == {"C", "C++", "Fortran"}
    for record in report.languages.values():
        assert (record.repos, record.size_bytes, record.files, record.functions) == (0, 0, 0, 0)


def test_vendored_corpus_report(corpus_root):
    result = run_vendored(corpus_root, min_tokens=20)
    ledger = result.stats.filter_ledger
    languages = result.stats.languages

    assert ledger.units_in == 6
    assert ledger.dropped == {"duplicate": 1, "min_tokens": 1}
    assert ledger.units_kept == 4
    assert ledger.conserved
    assert (languages["C"].repos, languages["C"].files, languages["C"].functions) == (1, 2, 3)
    assert (languages["C++"].repos, languages["C++"].files, languages["C++"].functions) == (1, 1, 3)
    assert (languages["Fortran"].repos, languages["Fortran"].files, languages["Fortran"].functions) == (1, 1, 3)


def test_report_has_table_shape(corpus_root):
    report = json.loads(run_vendored(corpus_root).stats.model_dump_json())

    assert set(report) == {"languages", "filter_ledger"}
    for record in report["languages"].values():
        assert set(record) == {"repos", "size_bytes", "size_gb", "files", "functions"}


def test_pipeline_is_deterministic(corpus_root):
    first = run_vendored(corpus_root, min_tokens=20)
    second = run_vendored(corpus_root, min_tokens=20)

    assert first.stats.model_dump_json() == second.stats.model_dump_json()
    assert [block.id for block in first.blocks] == [block.id for block in second.blocks]


def test_ledger_conserved_on_synthetic_corpus(synthetic_root):
    result = CorpusPipeline(filter_config=FilterConfig(min_tokens=60)).run(synthetic_root)
    ledger = result.stats.filter_ledger

    assert ledger.conserved
    assert ledger.units_in == 210
    assert ledger.blocks_in == ledger.blocks_kept + sum(ledger.blocks_dropped.values())


def test_bpe_counter_needs_a_model():
    with pytest.raises(ValueError):
        CorpusPipeline(filter_config=FilterConfig(token_counter="bpe"))
