"""
Tokenizer comparison: token counts, vocabulary sizes, OOV and an n-gram
perplexity proxy normalized so tokenizers with different vocabularies can be
compared.

Three tokenizers are measured side by side:
    tokompiler  anonymized, comment-free, replacement tokens split in two
    bpe         byte-level BPE over the raw source text
    lexical     the syntax-aware lexer's tokens, no anonymization
"""

import logging
import math
from collections import Counter, defaultdict
from dataclasses import dataclass
from functools import partial
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from tokompiler.anonymizer import make_rng
from tokompiler.bpe_baseline import BpeModel, encode_bpe
from tokompiler.errors import EmptyCorpus, ZeroNormalizer
from tokompiler.models import (
    ComparisonReport,
    ComparisonRow,
    NgramConfig,
    Normalizer,
    PerplexityResult,
    SourceUnit,
    TokenizerSummary,
    TokenStream,
)
from tokompiler.parser_frontend import parse
from tokompiler.pipeline import TokompilerPipeline
from tokompiler.util import parallel_map
from tokompiler.vocabulary import Vocabulary, oov_rate

logger = logging.getLogger(__name__)

TOKENIZERS = ("tokompiler", "bpe", "lexical")

BOS = "<s>"

Tokens = Union[TokenStream, Sequence[str]]


def _tokens_of(stream: Tokens) -> Sequence[str]:
    return stream.tokens if isinstance(stream, TokenStream) else stream


@dataclass
class NgramModel:
    """Add-k smoothed n-gram model.

    Every context distributes probability over the training types plus one
    unknown bucket, so each context sums to 1.
    """

    order: int
    k: float
    counts: Dict[Tuple[str, ...], Counter]
    totals: Dict[Tuple[str, ...], int]
    types: frozenset

    @property
    def vocab_size(self) -> int:
        return len(self.types) + 1

    def prob(self, context: Tuple[str, ...], token: str) -> float:
        context = context[len(context) - (self.order - 1):] if self.order > 1 else ()
        seen = self.counts.get(context)
        count = seen.get(token, 0) if seen is not None and token in self.types else 0
        total = self.totals.get(context, 0)
        return (count + self.k) / (total + self.k * self.vocab_size)

    def log_likelihood(self, tokens: Sequence[str]) -> float:
        padded = [BOS] * (self.order - 1) + list(tokens)
        total = 0.0
        for position in range(self.order - 1, len(padded)):
            context = tuple(padded[position - self.order + 1:position])
            total += math.log(self.prob(context, padded[position]))
        return total


def train_ngram(streams: Iterable[Tokens], n: int = 3, k: float = 0.01) -> NgramModel:
    if n < 1:
        raise ValueError(f"n-gram order must be >= 1, got {n}")
    if k <= 0:
        raise ValueError(f"k must be positive, got {k}")
    counts: Dict[Tuple[str, ...], Counter] = defaultdict(Counter)
    types = set()
    for stream in streams:
        tokens = _tokens_of(stream)
        types.update(tokens)
        padded = [BOS] * (n - 1) + list(tokens)
        for position in range(n - 1, len(padded)):
            counts[tuple(padded[position - n + 1:position])][padded[position]] += 1
    if not types:
        raise EmptyCorpus("Cannot train an n-gram model without tokens")
    totals = {context: sum(following.values()) for context, following in counts.items()}
    return NgramModel(order=n, k=k, counts=dict(counts), totals=totals, types=frozenset(types))


def normalized_perplexity(
    model: NgramModel,
    held_out_streams: Iterable[Tokens],
    normalizer: Normalizer = "per_token",
    source_chars: Optional[int] = None,
) -> float:
    """exp(total negative log-likelihood / normalizer count).

    `per_source_char` divides by `source_chars`, the character count of the
    original source the streams were made from.
    """
    nll = 0.0
    token_count = 0
    for stream in held_out_streams:
        tokens = _tokens_of(stream)
        nll -= model.log_likelihood(tokens)
        token_count += len(tokens)

    denominator = token_count if normalizer == "per_token" else source_chars
    if not denominator:
        raise ZeroNormalizer(f"{normalizer} normalizer is zero")
    return math.exp(nll / denominator)


def lexical_tokens(unit: SourceUnit) -> List[str]:
    return parse(unit).lexemes()


@dataclass
class UnitTokens:
    unit: SourceUnit
    tokompiler: List[str]
    bpe: List[str]
    lexical: List[str]

    def of(self, tokenizer: str) -> List[str]:
        return getattr(self, tokenizer)


def tokenize_unit(unit: SourceUnit, pipeline: TokompilerPipeline, bpe_model: BpeModel) -> UnitTokens:
    return UnitTokens(
        unit=unit,
        tokompiler=pipeline.tokenize(unit).stream.tokens,
        bpe=[str(token_id) for token_id in encode_bpe(bpe_model, unit.text)],
        lexical=lexical_tokens(unit),
    )


def tokenize_all(
    units: Iterable[SourceUnit],
    pipeline: TokompilerPipeline,
    bpe_model: BpeModel,
    jobs: int = 1,
) -> List[UnitTokens]:
    """Tokenize every unit three ways; units that fail are logged and left out."""
    worker = partial(_tokenize_or_none, pipeline=pipeline, bpe_model=bpe_model)
    return [item for item in parallel_map(worker, units, jobs=jobs) if item is not None]


def _tokenize_or_none(
    unit: SourceUnit, pipeline: TokompilerPipeline, bpe_model: BpeModel
) -> Optional[UnitTokens]:
    try:
        return tokenize_unit(unit, pipeline, bpe_model)
    except Exception:
        logger.exception("Failed to tokenize %s for comparison", unit.id)
        return None


def summarize(
    tokenized: Sequence[UnitTokens],
    bpe_model: BpeModel,
    vocab: Optional[Vocabulary] = None,
    held_out: Optional[Sequence[UnitTokens]] = None,
) -> ComparisonReport:
    """Per-unit rows and per-tokenizer totals.

    With a vocabulary, the tokompiler OOV rate is measured on `held_out`
    (all units when not given).
    """
    if not tokenized:
        return ComparisonReport()

    rows = [
        ComparisonRow(
            unit_id=item.unit.id,
            language=item.unit.language,
            source_chars=len(item.unit.text),
            tokompiler_count=len(item.tokompiler),
            bpe_count=len(item.bpe),
            lexical_count=len(item.lexical),
        )
        for item in tokenized
    ]

    tokenizers: Dict[str, TokenizerSummary] = {}
    for name in TOKENIZERS:
        counts = np.array([len(item.of(name)) for item in tokenized])
        if name == "bpe":
            vocab_size = len(bpe_model)
        elif name == "tokompiler" and vocab is not None:
            vocab_size = len(vocab)
        else:
            vocab_size = len({token for item in tokenized for token in item.of(name)})
        tokenizers[name] = TokenizerSummary(
            vocab_size=vocab_size,
            total_tokens=int(counts.sum()),
            mean_tokens_per_unit=float(counts.mean()),
        )
    if vocab is not None:
        measured = tokenized if held_out is None else held_out
        streams = [TokenStream(unit_id=item.unit.id, tokens=item.tokompiler) for item in measured]
        if any(stream.tokens for stream in streams):
            tokenizers["tokompiler"].oov_rate = oov_rate(vocab, streams)

    bpe_total = tokenizers["bpe"].total_tokens
    ratio = tokenizers["tokompiler"].total_tokens / bpe_total if bpe_total else None
    return ComparisonReport(tokenizers=tokenizers, rows=rows, reduction_ratio=ratio)


def compare_token_counts(
    units: Iterable[SourceUnit],
    tokompiler_pipeline: TokompilerPipeline,
    bpe_model: BpeModel,
    vocab: Optional[Vocabulary] = None,
    jobs: int = 1,
) -> ComparisonReport:
    report = summarize(tokenize_all(units, tokompiler_pipeline, bpe_model, jobs), bpe_model, vocab)
    if report.reduction_ratio is not None:
        logger.info("Token reduction ratio tokompiler/bpe: %.3f", report.reduction_ratio)
    return report


def split_units(
    units: Sequence,
    heldout_fraction: float = 0.1,
    seed: int = 0,
) -> Tuple[List, List]:
    """Seeded disjoint train/held-out split; both parts keep input order.

    At least one item is held out once there are two or more.
    """
    units = list(units)
    if len(units) < 2:
        return units, []
    size = min(len(units) - 1, max(1, round(len(units) * heldout_fraction)))
    held = set(int(index) for index in make_rng(seed).choice(len(units), size=size, replace=False))
    train = [unit for index, unit in enumerate(units) if index not in held]
    heldout = [unit for index, unit in enumerate(units) if index in held]
    return train, heldout


def perplexity_comparison(
    train: Sequence[UnitTokens],
    heldout: Sequence[UnitTokens],
    config: Optional[NgramConfig] = None,
) -> Dict[str, PerplexityResult]:
    """Train one n-gram model per tokenizer and score the held-out units both ways."""
    config = config or NgramConfig()
    source_chars = sum(len(item.unit.text) for item in heldout)
    results: Dict[str, PerplexityResult] = {}
    for name in TOKENIZERS:
        model = train_ngram((item.of(name) for item in train), n=config.order, k=config.k)
        streams = [item.of(name) for item in heldout]
        results[name] = PerplexityResult(
            per_token=normalized_perplexity(model, streams, "per_token"),
            per_source_char=normalized_perplexity(
                model, streams, "per_source_char", source_chars=source_chars
            ),
        )
        logger.info(
            "%s: held-out perplexity %.4f per token, %.4f per source char",
            name,
            results[name].per_token,
            results[name].per_source_char,
        )
    return results


def render_table(report: ComparisonReport) -> str:
    """Aligned plain-text summary of a report."""
    lines = [
        "┌────────────┬────────────┬──────────────┬──────────────┬──────────┐",
        "│ Tokenizer  │ Vocabulary │ Total tokens │ Mean / unit  │ OOV      │",
        "├────────────┼────────────┼──────────────┼──────────────┼──────────┤",
    ]
    for name, summary in report.tokenizers.items():
        oov = f"{summary.oov_rate:>8.6f}" if summary.oov_rate is not None else f"{'-':>8}"
        lines.append(
            f"│ {name:<10} │ {summary.vocab_size:>10} │ {summary.total_tokens:>12} │"
            f" {summary.mean_tokens_per_unit:>12.2f} │ {oov:<8} │"
        )
    lines.append("└────────────┴────────────┴──────────────┴──────────────┴──────────┘")

    ratio = "n/a" if report.reduction_ratio is None else f"{report.reduction_ratio:.3f}"
    lines.append(f"Units: {len(report.rows)}    tokompiler/bpe ratio: {ratio}")

    if report.normalized_ppl:
        lines.append("")
        lines.append("┌────────────┬──────────────┬──────────────┐")
        lines.append("│ Perplexity │ Per token    │ Per src char │")
        lines.append("├────────────┼──────────────┼──────────────┤")
        for name, result in report.normalized_ppl.items():
            lines.append(
                f"│ {name:<10} │ {result.per_token:>12.4f} │ {result.per_source_char:>12.4f} │"
            )
        lines.append("└────────────┴──────────────┴──────────────┘")
        ranked = report.normalized_ppl
        best = min(ranked, key=lambda name: getattr(ranked[name], report.normalizer))
        lines.append(f"Lowest {report.normalizer} perplexity: {best}")
    return "\n".join(lines) + "\n"
