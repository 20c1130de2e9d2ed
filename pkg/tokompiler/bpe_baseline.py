"""
Byte-level byte-pair encoding, the comparison baseline.

Training greedily merges the most frequent adjacent symbol pair; ties go to
the lexicographically smallest pair (comparing the pair's bytes). Text is
first cut into chunks by character class, GPT-2 style: a word, a digit run or
a punctuation run, each with at most one leading space, and whitespace runs.
Merges never cross chunk borders.

Model file:

    #bpe target_size=50000 seed=42 sample_fraction=0.05
    <left hex> <right hex>        one merge per line, in training order
"""

import heapq
import logging
import re
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Callable, Dict, Iterable, List, Sequence, Set, Tuple, Union

from tokompiler.anonymizer import make_rng
from tokompiler.errors import EmptyCorpus, MalformedModelFile
from tokompiler.models import DEFAULT_SEED
from tokompiler.util import atomic_write_text

logger = logging.getLogger(__name__)

SPECIAL_TOKENS: Tuple[str, ...] = ("<|endoftext|>",)
BASE_SIZE = 256
CHUNK_CACHE_SIZE = 1 << 16

_CHUNK = re.compile(rb" ?[A-Za-z_]+| ?[0-9]+| ?[^\sA-Za-z0-9_]+|\s+(?!\S)|\s+")
_HEADER = re.compile(r"#bpe target_size=(\d+) seed=(\d+) sample_fraction=([0-9.eE+-]+)")

Pair = Tuple[bytes, bytes]


def pre_split(data: bytes) -> List[bytes]:
    return _CHUNK.findall(data)


def _as_bytes(text: Union[str, bytes]) -> bytes:
    return text if isinstance(text, bytes) else text.encode("utf-8")


def _merge_symbols(symbols: Sequence[bytes], left: bytes, right: bytes) -> List[bytes]:
    merged = left + right
    out: List[bytes] = []
    index = 0
    while index < len(symbols):
        if (
            index + 1 < len(symbols)
            and symbols[index] == left
            and symbols[index + 1] == right
        ):
            out.append(merged)
            index += 2
        else:
            out.append(symbols[index])
            index += 1
    return out


@dataclass
class BpeModel:
    merges: List[Pair]
    target_size: int = 50_000
    seed: int = DEFAULT_SEED
    sample_fraction: float = 1.0
    vocab: Dict[bytes, int] = field(init=False, repr=False)
    specials: Dict[str, int] = field(init=False, repr=False)
    ranks: Dict[Pair, int] = field(init=False, repr=False)
    _symbols: List[bytes] = field(init=False, repr=False)
    _encode_cached: Callable[[bytes], Tuple[int, ...]] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        self._symbols = [bytes([value]) for value in range(BASE_SIZE)]
        self.vocab = {symbol: index for index, symbol in enumerate(self._symbols)}
        self.specials = {}
        for special in SPECIAL_TOKENS:
            self.specials[special] = len(self._symbols)
            self._symbols.append(special.encode("utf-8"))
        self.ranks = {}
        for rank, (left, right) in enumerate(self.merges):
            self.ranks.setdefault((left, right), rank)
            merged = left + right
            if merged not in self.vocab:
                self.vocab[merged] = len(self._symbols)
                self._symbols.append(merged)
        self._encode_cached = lru_cache(maxsize=CHUNK_CACHE_SIZE)(self._encode_uncached)

    @property
    def base_alphabet(self) -> List[bytes]:
        return self._symbols[:BASE_SIZE]

    def __len__(self) -> int:
        return len(self._symbols)

    def __getstate__(self):
        state = self.__dict__.copy()
        del state["_encode_cached"]
        return state

    def __setstate__(self, state):
        self.__dict__.update(state)
        self._encode_cached = lru_cache(maxsize=CHUNK_CACHE_SIZE)(self._encode_uncached)

    def encode_chunk(self, chunk: bytes) -> Tuple[int, ...]:
        return self._encode_cached(chunk)

    def _encode_uncached(self, chunk: bytes) -> Tuple[int, ...]:
        symbols = [bytes([value]) for value in chunk]
        while len(symbols) > 1:
            best = min(
                zip(symbols, symbols[1:]),
                key=lambda pair: self.ranks.get(pair, float("inf")),
            )
            if best not in self.ranks:
                break
            symbols = _merge_symbols(symbols, *best)
        return tuple(self.vocab[symbol] for symbol in symbols)

    def token_bytes(self, token_id: int) -> bytes:
        return self._symbols[token_id]

    def save(self, path: Path) -> None:
        lines = [
            f"#bpe target_size={self.target_size} seed={self.seed} "
            f"sample_fraction={self.sample_fraction!r}"
        ]
        lines.extend(f"{left.hex()} {right.hex()}" for left, right in self.merges)
        atomic_write_text(path, "\n".join(lines) + "\n")

    @classmethod
    def load(cls, path: Path) -> "BpeModel":
        text = Path(path).read_text(encoding="utf-8")
        lines = text.split("\n")
        header = _HEADER.fullmatch(lines[0]) if lines else None
        if header is None:
            raise MalformedModelFile(f"{path}: bad or missing '#bpe' header")
        merges: List[Pair] = []
        for number, line in enumerate(lines[1:], start=2):
            if not line:
                continue
            try:
                left, right = line.split(" ")
                merges.append((bytes.fromhex(left), bytes.fromhex(right)))
            except ValueError as e:
                raise MalformedModelFile(f"{path}:{number}: bad merge line '{line}'") from e
        return cls(
            merges=merges,
            target_size=int(header.group(1)),
            seed=int(header.group(2)),
            sample_fraction=float(header.group(3)),
        )


def sample_corpus(texts: List, sample_fraction: float, seed: int) -> List:
    """Seeded subset of `texts`, kept in corpus order."""
    if not 0.0 < sample_fraction <= 1.0:
        raise ValueError(f"sample_fraction must be in (0, 1], got {sample_fraction}")
    if sample_fraction == 1.0:
        return list(texts)
    size = max(1, round(len(texts) * sample_fraction))
    picks = sorted(int(index) for index in make_rng(seed).choice(len(texts), size=size, replace=False))
    return [texts[index] for index in picks]


def train_bpe(
    corpus: Iterable[Union[str, bytes]],
    target_size: int = 50_000,
    sample_fraction: float = 1.0,
    seed: int = DEFAULT_SEED,
) -> BpeModel:
    texts = list(corpus)
    if not texts:
        raise EmptyCorpus("Cannot train BPE on an empty corpus")
    texts = sample_corpus(texts, sample_fraction, seed)

    chunk_freq: Counter = Counter()
    for text in texts:
        chunk_freq.update(pre_split(_as_bytes(text)))

    words: List[List[bytes]] = [[bytes([value]) for value in chunk] for chunk in chunk_freq]
    freqs: List[int] = list(chunk_freq.values())

    pair_counts: Counter = Counter()
    where: Dict[Pair, Set[int]] = defaultdict(set)
    for word_index, symbols in enumerate(words):
        for pair in zip(symbols, symbols[1:]):
            pair_counts[pair] += freqs[word_index]
            where[pair].add(word_index)

    # Max-heap on count, then smallest (left, right); stale entries are skipped.
    heap = [(-count, left, right) for (left, right), count in pair_counts.items()]
    heapq.heapify(heap)

    known = {bytes([value]) for value in range(BASE_SIZE)}
    vocab_size = BASE_SIZE + len(SPECIAL_TOKENS)
    merges: List[Pair] = []
    while vocab_size < target_size and heap:
        negative, left, right = heapq.heappop(heap)
        count = pair_counts.get((left, right), 0)
        if count != -negative:
            continue
        if count < 2:
            break

        merges.append((left, right))
        merged = left + right
        if merged not in known:
            known.add(merged)
            vocab_size += 1

        delta: Counter = Counter()
        for word_index in where.pop((left, right), ()):
            symbols = words[word_index]
            updated = _merge_symbols(symbols, left, right)
            if len(updated) == len(symbols):
                continue
            freq = freqs[word_index]
            for pair in zip(symbols, symbols[1:]):
                delta[pair] -= freq
            for pair in zip(updated, updated[1:]):
                delta[pair] += freq
                where[pair].add(word_index)
            words[word_index] = updated

        for pair, change in delta.items():
            if change == 0:
                continue
            pair_counts[pair] += change
            if pair_counts[pair] <= 0:
                del pair_counts[pair]
            else:
                heapq.heappush(heap, (-pair_counts[pair], pair[0], pair[1]))
        pair_counts.pop((left, right), None)

    logger.info(
        "Trained BPE: %d merges, vocabulary %d (target %d) from %d texts",
        len(merges),
        vocab_size,
        target_size,
        len(texts),
    )
    return BpeModel(
        merges=merges, target_size=target_size, seed=seed, sample_fraction=sample_fraction
    )


def encode_bpe(model: BpeModel, text: Union[str, bytes]) -> List[int]:
    ids: List[int] = []
    for chunk in pre_split(_as_bytes(text)):
        ids.extend(model.encode_chunk(chunk))
    return ids


def decode_bpe(model: BpeModel, ids: Iterable[int]) -> bytes:
    return b"".join(model.token_bytes(token_id) for token_id in ids)
