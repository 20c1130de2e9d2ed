"""
Corpus building: walk a local code tree, drop duplicates, filter by size,
parse health and token count, cut the survivors into function-level blocks
and report per-language statistics.
"""

import logging
from dataclasses import dataclass, field
from functools import partial
from hashlib import sha256
from pathlib import Path
from typing import Callable, Dict, Iterable, Iterator, List, Mapping, Optional, Tuple

from tokompiler.bpe_baseline import BpeModel, encode_bpe
from tokompiler.errors import RootNotFound
from tokompiler.languages import detect_language
from tokompiler.models import (
    DEFAULT_LANGUAGE_MAP,
    DEFAULT_SEED,
    LANGUAGE_NAMES,
    AnonymizerConfig,
    CorpusStats,
    FilterConfig,
    FilterLedger,
    Language,
    SourceUnit,
)
from tokompiler.parser_frontend import SyntaxTree, extract_functions, parse
from tokompiler.pipeline import TokompilerPipeline
from tokompiler.util import log_progress, parallel_map

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FilterDecision:
    keep: bool
    reason: Optional[str] = None
    tokens: Optional[int] = None

    @classmethod
    def drop(cls, reason: str, tokens: Optional[int] = None) -> "FilterDecision":
        return cls(keep=False, reason=reason, tokens=tokens)


class TokenCounter:
    """Counts the tokens a unit contributes toward `min_tokens`.

    Picklable, so it travels to worker processes.
    """

    def __init__(
        self,
        pipeline: Optional[TokompilerPipeline] = None,
        bpe: Optional[BpeModel] = None,
    ):
        self.pipeline = pipeline or TokompilerPipeline()
        self.bpe = bpe

    @property
    def kind(self) -> str:
        return "bpe" if self.bpe is not None else "tokompiler"

    def __call__(self, unit: SourceUnit, tree: Optional[SyntaxTree] = None) -> int:
        if self.bpe is not None:
            return len(encode_bpe(self.bpe, unit.text))
        return self.pipeline.count_tokens(unit, tree)


def content_hash(text: str) -> str:
    """Hash of the text with every whitespace run collapsed to one space."""
    return sha256(" ".join(text.split()).encode("utf-8")).hexdigest()


def _read_unit(path: Path, relative: str, language: Language, ledger: FilterLedger) -> Optional[SourceUnit]:
    try:
        data = path.read_bytes()
    except OSError as e:
        logger.warning("Skipping unreadable %s: %s", relative, e)
        ledger.skip("unreadable")
        return None
    if not data.strip():
        ledger.skip("empty")
        return None
    if b"\x00" in data:
        logger.debug("Skipping binary %s", relative)
        ledger.skip("binary")
        return None
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError:
        logger.debug("Skipping non UTF-8 %s", relative)
        ledger.skip("undecodable")
        return None
    return SourceUnit(id=relative, language=language, origin=relative, text=text)


def ingest(
    root: Path,
    language_map: Mapping[str, Language] = DEFAULT_LANGUAGE_MAP,
    ledger: Optional[FilterLedger] = None,
) -> Iterator[SourceUnit]:
    """One unit per source file under `root`, in sorted path order.

    Unit ids are paths relative to `root`. A single file is accepted as a
    root of its own.
    """
    root = Path(root)
    ledger = ledger if ledger is not None else FilterLedger()
    if not root.exists():
        raise RootNotFound(f"Input root {root} does not exist")

    if root.is_file():
        candidates = [(root, root.name)]
    else:
        candidates = sorted(
            ((path, path.relative_to(root).as_posix()) for path in root.rglob("*") if path.is_file()),
            key=lambda item: item[1],
        )

    for path, relative in candidates:
        language = detect_language(path, language_map)
        if language is None:
            continue
        unit = _read_unit(path, relative, language, ledger)
        if unit is not None:
            yield unit


def deduplicate(units: Iterable[SourceUnit], ledger: Optional[FilterLedger] = None) -> Iterator[SourceUnit]:
    """Keep the first unit of every content hash."""
    seen = set()
    for unit in units:
        digest = content_hash(unit.text)
        if digest in seen:
            logger.debug("Duplicate %s", unit.id)
            if ledger is not None:
                ledger.drop("duplicate")
            continue
        seen.add(digest)
        yield unit


def filter_unit(
    unit: SourceUnit,
    config: FilterConfig,
    counter: Optional[Callable[[SourceUnit, Optional[SyntaxTree]], int]] = None,
    tree: Optional[SyntaxTree] = None,
) -> FilterDecision:
    """Size first, then parse health, then token count."""
    if unit.size_bytes >= config.max_bytes:
        return FilterDecision.drop("size")
    tree = tree or parse(unit)
    if config.require_parse and tree.error_count > 0:
        return FilterDecision.drop("parse_error")
    counter = counter or TokenCounter()
    tokens = counter(unit, tree)
    if tokens <= config.min_tokens:
        return FilterDecision.drop("min_tokens", tokens)
    return FilterDecision(keep=True, tokens=tokens)


def _blocks_of(
    unit: SourceUnit,
    tree: SyntaxTree,
    config: FilterConfig,
    counter: Callable[[SourceUnit, Optional[SyntaxTree]], int],
) -> Tuple[List[SourceUnit], List[str]]:
    kept: List[SourceUnit] = []
    dropped: List[str] = []
    for block in extract_functions(tree, unit):
        try:
            tokens = counter(block, parse(block))
        except Exception:
            logger.exception("Failed to count tokens of block %s", block.id)
            dropped.append("error")
            continue
        if tokens <= config.min_tokens:
            dropped.append("min_tokens")
        else:
            kept.append(block)
    return kept, dropped


def extract_blocks(
    units: Iterable[SourceUnit],
    config: Optional[FilterConfig] = None,
    counter: Optional[Callable[[SourceUnit, Optional[SyntaxTree]], int]] = None,
    ledger: Optional[FilterLedger] = None,
) -> Iterator[SourceUnit]:
    """Function-level blocks of file units, each re-checked against min_tokens."""
    config = config or FilterConfig()
    counter = counter or TokenCounter()
    for unit in units:
        kept, dropped = _blocks_of(unit, parse(unit), config, counter)
        if ledger is not None:
            ledger.blocks_in += len(kept) + len(dropped)
            ledger.blocks_kept += len(kept)
            for reason in dropped:
                ledger.drop_block(reason)
        yield from kept


def stats(
    units_before: Iterable[SourceUnit],
    units_after: Iterable[SourceUnit],
    ledger: Optional[FilterLedger] = None,
) -> CorpusStats:
    """Per-language repos, bytes and files from the file units; functions from the blocks."""
    report = CorpusStats(filter_ledger=ledger or FilterLedger())
    repos: Dict[str, set] = {name: set() for name in LANGUAGE_NAMES.values()}
    for unit in units_before:
        name = LANGUAGE_NAMES[unit.language]
        record = report.languages[name]
        record.files += 1
        record.size_bytes += unit.size_bytes
        repos[name].add(unit.repo)
    for name, names in repos.items():
        report.languages[name].repos = len(names)
    for block in units_after:
        report.languages[LANGUAGE_NAMES[block.language]].functions += 1
    return report


@dataclass
class FileOutcome:
    unit: SourceUnit
    decision: FilterDecision
    blocks: List[SourceUnit] = field(default_factory=list)
    block_drops: List[str] = field(default_factory=list)


def process_file(unit: SourceUnit, config: FilterConfig, counter: TokenCounter) -> FileOutcome:
    """Filter one file and cut it into blocks; failures become an `error` drop."""
    try:
        tree = None if unit.size_bytes >= config.max_bytes else parse(unit)
        decision = filter_unit(unit, config, counter, tree)
        if not decision.keep:
            return FileOutcome(unit, decision)
        blocks, drops = _blocks_of(unit, tree, config, counter)
        return FileOutcome(unit, decision, blocks, drops)
    except Exception:
        logger.exception("Failed to process %s", unit.id)
        return FileOutcome(unit, FilterDecision.drop("error"))


@dataclass
class CorpusResult:
    files: List[SourceUnit]
    blocks: List[SourceUnit]
    stats: CorpusStats


class CorpusPipeline:
    def __init__(
        self,
        filter_config: Optional[FilterConfig] = None,
        anonymizer_config: Optional[AnonymizerConfig] = None,
        language_map: Mapping[str, Language] = DEFAULT_LANGUAGE_MAP,
        seed: int = DEFAULT_SEED,
        bpe: Optional[BpeModel] = None,
        jobs: int = 1,
        log_every: int = 1000,
    ):
        self.filter_config = filter_config or FilterConfig()
        self.language_map = dict(language_map)
        self.jobs = jobs
        self.log_every = log_every
        if self.filter_config.token_counter == "bpe" and bpe is None:
            raise ValueError("token_counter 'bpe' needs a trained BPE model")
        self.counter = TokenCounter(
            TokompilerPipeline(anonymizer_config, seed),
            bpe if self.filter_config.token_counter == "bpe" else None,
        )

    def run(self, root: Path) -> CorpusResult:
        ledger = FilterLedger()
        units = list(ingest(root, self.language_map, ledger))
        ledger.units_in = len(units)
        logger.info("Ingested %d files from %s", len(units), root)

        unique = list(deduplicate(units, ledger))
        worker = partial(process_file, config=self.filter_config, counter=self.counter)
        files: List[SourceUnit] = []
        blocks: List[SourceUnit] = []
        outcomes = parallel_map(worker, unique, jobs=self.jobs)
        for outcome in log_progress(outcomes, self.log_every, "corpus"):
            if not outcome.decision.keep:
                ledger.drop(outcome.decision.reason)
                continue
            ledger.units_kept += 1
            files.append(outcome.unit)
            blocks.extend(outcome.blocks)
            ledger.blocks_in += len(outcome.blocks) + len(outcome.block_drops)
            ledger.blocks_kept += len(outcome.blocks)
            for reason in outcome.block_drops:
                ledger.drop_block(reason)

        if not ledger.conserved:
            logger.error("Filter ledger does not balance: %s", ledger.model_dump())
        logger.info(
            "Kept %d of %d files, %d blocks (%s counter)",
            ledger.units_kept,
            ledger.units_in,
            ledger.blocks_kept,
            self.counter.kind,
        )
        return CorpusResult(files=files, blocks=blocks, stats=stats(files, blocks, ledger))
