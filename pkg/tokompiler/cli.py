import argparse
import logging
from functools import partial
from pathlib import Path
from typing import Callable, Dict, Iterator, List, Optional, Tuple

from pydantic import ValidationError

from tokompiler.anonymizer import load_dictionary, restore, save_dictionary
from tokompiler.bpe_baseline import BpeModel, train_bpe
from tokompiler.config import resolve_run_config
from tokompiler.corpus_pipeline import CorpusPipeline, ingest
from tokompiler.errors import (
    ConfigError,
    EmptyCorpus,
    MalformedModelFile,
    MalformedVocabFile,
    RootNotFound,
    TokompilerError,
)
from tokompiler.eval_harness import (
    perplexity_comparison,
    render_table,
    split_units,
    summarize,
    tokenize_all,
)
from tokompiler.lexicalizer import read_streams, write_streams
from tokompiler.models import RestoredUnit, RunConfig, SourceUnit, TokenizedUnit, TokenStream
from tokompiler.pipeline import TokompilerPipeline
from tokompiler.util import (
    add_default_args,
    atomic_write_text,
    log_progress,
    parallel_map,
    read_jsonl,
    safe_filename,
    write_jsonl,
)
from tokompiler.vocabulary import Vocabulary, build

logger = logging.getLogger(__name__)

TOKENS_FILE = "tokens.jsonl"
DICTS_DIR = "dicts"
UNITS_FILE = "units.jsonl"
STATS_FILE = "stats.json"
REPORT_JSON = "report.json"
REPORT_TEXT = "report.txt"


def load_units(cfg: RunConfig) -> Iterator[SourceUnit]:
    """Units from a `units.jsonl` written by `corpus`, or from a source tree or file."""
    if cfg.input.is_file() and cfg.input.suffix == ".jsonl":
        for unit in read_jsonl(cfg.input, SourceUnit):
            if unit.language in cfg.languages:
                yield unit
    else:
        yield from ingest(cfg.input, cfg.language_map())


def _tokenize_one(
    unit: SourceUnit, pipeline: TokompilerPipeline
) -> Tuple[str, Optional[List[TokenizedUnit]]]:
    try:
        return unit.id, pipeline.tokenize_scoped(unit)
    except Exception:
        logger.exception("Failed to tokenize %s", unit.id)
        return unit.id, None


def cmd_tokenize(cfg: RunConfig) -> int:
    vocab = Vocabulary.load(cfg.vocab_file) if cfg.vocab_file else None
    pipeline = TokompilerPipeline(cfg.settings.anonymizer, cfg.seed, vocab)
    dict_dir = cfg.out / DICTS_DIR
    dict_dir.mkdir(parents=True, exist_ok=True)

    failures = 0
    streams: List[TokenStream] = []
    results = parallel_map(partial(_tokenize_one, pipeline=pipeline), load_units(cfg), cfg.jobs)
    for unit_id, tokenized in log_progress(results, cfg.log_every, "tokenize"):
        if tokenized is None:
            failures += 1
            continue
        for item in tokenized:
            for warning in item.warnings:
                logger.warning("%s: %s", item.stream.unit_id, warning)
            save_dictionary(item.dictionary, dict_dir / safe_filename(item.stream.unit_id))
            streams.append(item.stream)

    count = write_streams(cfg.out / TOKENS_FILE, streams)
    logger.info("Wrote %d token streams to %s (%d failures)", count, cfg.out, failures)
    return 1 if failures and cfg.strict else 0


def cmd_restore(cfg: RunConfig) -> int:
    failures = 0
    restored: List[RestoredUnit] = []
    for stream in read_streams(cfg.input):
        path = cfg.dict_dir / safe_filename(stream.unit_id)
        if not path.exists():
            raise FileNotFoundError(f"No change dictionary for {stream.unit_id} in {cfg.dict_dir}")
        try:
            text = restore(stream, load_dictionary(path))
        except TokompilerError:
            logger.exception("Failed to restore %s", stream.unit_id)
            failures += 1
            continue
        restored.append(RestoredUnit(unit_id=stream.unit_id, text=text))

    write_jsonl(cfg.out, restored)
    logger.info("Restored %d units to %s (%d failures)", len(restored), cfg.out, failures)
    return 1 if failures and cfg.strict else 0


def cmd_corpus(cfg: RunConfig) -> int:
    bpe = BpeModel.load(cfg.bpe_file) if cfg.bpe_file else None
    pipeline = CorpusPipeline(
        filter_config=cfg.settings.filter,
        anonymizer_config=cfg.settings.anonymizer,
        language_map=cfg.language_map(),
        seed=cfg.seed,
        bpe=bpe,
        jobs=cfg.jobs,
        log_every=cfg.log_every,
    )
    result = pipeline.run(cfg.input)
    write_jsonl(cfg.out / UNITS_FILE, result.blocks)
    atomic_write_text(cfg.out / STATS_FILE, result.stats.model_dump_json(indent=2) + "\n")
    failures = result.stats.filter_ledger.dropped.get("error", 0)
    return 1 if failures and cfg.strict else 0


def cmd_vocab(cfg: RunConfig) -> int:
    anonymizer = cfg.settings.anonymizer
    vocab = build(
        read_streams(cfg.input),
        cfg.settings.vocab,
        number_range=(anonymizer.range_lo, anonymizer.range_hi),
    )
    vocab.save(cfg.out)
    logger.info("Wrote %d-token vocabulary to %s", len(vocab), cfg.out)
    return 0


def cmd_bpe_train(cfg: RunConfig) -> int:
    texts = [unit.text for unit in load_units(cfg)]
    model = train_bpe(
        texts,
        target_size=cfg.settings.bpe.target_size,
        sample_fraction=cfg.settings.bpe.sample_fraction,
        seed=cfg.seed,
    )
    model.save(cfg.out)
    logger.info("Wrote %d merges to %s", len(model.merges), cfg.out)
    return 0


def cmd_compare(cfg: RunConfig) -> int:
    settings = cfg.settings
    units = list(load_units(cfg))
    train, heldout = split_units(units, settings.heldout_fraction, cfg.seed)

    if cfg.bpe_file:
        bpe = BpeModel.load(cfg.bpe_file)
    else:
        if not train:
            raise EmptyCorpus(f"No units under {cfg.input} to train BPE on")
        bpe = train_bpe(
            [unit.text for unit in train],
            target_size=settings.bpe.target_size,
            sample_fraction=settings.bpe.sample_fraction,
            seed=cfg.seed,
        )

    pipeline = TokompilerPipeline(settings.anonymizer, cfg.seed)
    tokenized = tokenize_all(units, pipeline, bpe, jobs=cfg.jobs)
    failures = len(units) - len(tokenized)
    heldout_ids = {unit.id for unit in heldout}
    train_tokens = [item for item in tokenized if item.unit.id not in heldout_ids]
    heldout_tokens = [item for item in tokenized if item.unit.id in heldout_ids]

    vocab = None
    if cfg.vocab_file:
        vocab = Vocabulary.load(cfg.vocab_file)
    elif train_tokens:
        vocab = build(
            (TokenStream(unit_id=item.unit.id, tokens=item.tokompiler) for item in train_tokens),
            settings.vocab,
            number_range=(settings.anonymizer.range_lo, settings.anonymizer.range_hi),
        )

    report = summarize(tokenized, bpe, vocab, held_out=heldout_tokens or None)
    if train_tokens and heldout_tokens:
        try:
            report.normalized_ppl = perplexity_comparison(train_tokens, heldout_tokens, settings.ngram)
            report.normalizer = settings.ngram.normalizer
        except (EmptyCorpus, ZeroDivisionError) as e:
            logger.warning("Skipping perplexity comparison: %s", e)

    cfg.out.mkdir(parents=True, exist_ok=True)
    atomic_write_text(cfg.out / REPORT_JSON, report.model_dump_json(indent=2) + "\n")
    table = render_table(report)
    atomic_write_text(cfg.out / REPORT_TEXT, table)
    print(table)
    return 1 if failures and cfg.strict else 0


COMMANDS: Dict[str, Callable[[RunConfig], int]] = {
    "tokenize": cmd_tokenize,
    "restore": cmd_restore,
    "corpus": cmd_corpus,
    "vocab": cmd_vocab,
    "bpe-train": cmd_bpe_train,
    "compare": cmd_compare,
}


def _add_anonymizer_args(parser: argparse.ArgumentParser):
    parser.add_argument("--scope", choices=["file", "function"], help="Consistency scope")
    parser.add_argument("--range-lo", type=int, help="Lowest replacement number")
    parser.add_argument("--range-hi", type=int, help="Highest replacement number")


def _add_bpe_args(parser: argparse.ArgumentParser):
    parser.add_argument("--target-size", type=int, help="BPE vocabulary size to train to")
    parser.add_argument("--sample-fraction", type=float, help="Share of units BPE trains on")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    add_default_args(common)

    parser = argparse.ArgumentParser(
        prog="tokompiler", description="Anonymizing code tokenizer for C, C++ and Fortran"
    )
    commands = parser.add_subparsers(dest="command", required=True)

    tokenize = commands.add_parser("tokenize", parents=[common], help="Tokenize source units")
    tokenize.add_argument("input", type=Path, help="Source tree, source file or units.jsonl")
    tokenize.add_argument("--vocab", type=Path, help="Vocabulary file for token IDs")
    _add_anonymizer_args(tokenize)

    restore_cmd = commands.add_parser(
        "restore", parents=[common], help="Put original names back into token streams"
    )
    restore_cmd.add_argument("input", type=Path, help=f"{TOKENS_FILE} written by tokenize")
    restore_cmd.add_argument("--dicts", type=Path, required=True, help="Change dictionary directory")

    corpus = commands.add_parser("corpus", parents=[common], help="Build a filtered block corpus")
    corpus.add_argument("input", type=Path, help="Root of the code tree")
    corpus.add_argument("--min-tokens", type=int, help="Drop units with at most this many tokens")
    corpus.add_argument("--max-bytes", type=int, help="Drop files of at least this size")
    corpus.add_argument("--token-counter", choices=["tokompiler", "bpe"])
    corpus.add_argument("--bpe", type=Path, help="BPE model for --token-counter bpe")
    _add_anonymizer_args(corpus)

    vocab = commands.add_parser("vocab", parents=[common], help="Build a closed vocabulary")
    vocab.add_argument("input", type=Path, help=f"{TOKENS_FILE} written by tokenize")
    vocab.add_argument("--no-number-range", action="store_true", help="Leave out unseen numbers")
    _add_anonymizer_args(vocab)

    bpe = commands.add_parser("bpe-train", parents=[common], help="Train the BPE baseline")
    bpe.add_argument("input", type=Path, help="Source tree, source file or units.jsonl")
    _add_bpe_args(bpe)

    compare = commands.add_parser("compare", parents=[common], help="Compare tokenizers")
    compare.add_argument("input", type=Path, help="Source tree, source file or units.jsonl")
    compare.add_argument("--bpe", type=Path, help="Trained BPE model; trained on the fly if absent")
    compare.add_argument("--vocab", type=Path, help="Vocabulary; built from the train split if absent")
    compare.add_argument("--order", type=int, help="n-gram order")
    compare.add_argument(
        "--normalizer",
        choices=["per_token", "per_source_char"],
        help="Perplexity column that ranks tokenizers",
    )
    _add_anonymizer_args(compare)
    _add_bpe_args(compare)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, args.log_level),
        format="%(asctime)s - %(levelname)s - %(message)s",
    )
    try:
        cfg = resolve_run_config(args)
        return COMMANDS[cfg.subcommand](cfg)
    except (
        ConfigError,
        RootNotFound,
        EmptyCorpus,
        MalformedVocabFile,
        MalformedModelFile,
        FileNotFoundError,
        ValidationError,
    ) as e:
        logger.error("%s", e)
        return 2
