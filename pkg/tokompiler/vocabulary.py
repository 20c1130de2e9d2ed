"""
The closed token vocabulary: specials, everything observed in the corpus,
the category words and the whole replacement number range.

File format: UTF-8, LF newlines, one token per line, line number - 1 is the
ID, the first three lines are the specials.
"""

import logging
from pathlib import Path
from typing import Dict, Iterable, List, Literal, Optional, Sequence, Tuple

from tokompiler.errors import EmptyCorpus, MalformedVocabFile
from tokompiler.models import CATEGORIES, TokenStream, VocabConfig
from tokompiler.util import atomic_write_text

logger = logging.getLogger(__name__)

UNK = "<unk>"
PAD = "<pad>"
EOS = "<eos>"
SPECIALS: Tuple[str, ...] = (UNK, PAD, EOS)


class Vocabulary:
    def __init__(
        self,
        tokens: Sequence[str] = SPECIALS,
        provenance: Literal["built", "loaded"] = "built",
    ):
        tokens = list(tokens)
        if tuple(tokens[: len(SPECIALS)]) != SPECIALS:
            raise ValueError(f"Vocabulary must start with {SPECIALS}")
        id_of: Dict[str, int] = {}
        for index, token in enumerate(tokens):
            if token in id_of:
                raise ValueError(f"Duplicate vocabulary token '{token}'")
            id_of[token] = index
        self.tokens: List[str] = tokens
        self.id_of = id_of
        self.provenance = provenance

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self.id_of

    def __eq__(self, other) -> bool:
        return isinstance(other, Vocabulary) and self.tokens == other.tokens

    def __repr__(self) -> str:
        return f"Vocabulary(size={len(self)}, provenance={self.provenance})"

    @property
    def unk_id(self) -> int:
        return self.id_of[UNK]

    def get(self, token: str) -> Optional[int]:
        return self.id_of.get(token)

    def token_of(self, token_id: int) -> str:
        return self.tokens[token_id]

    def save(self, path: Path) -> None:
        atomic_write_text(path, "".join(f"{token}\n" for token in self.tokens))

    @classmethod
    def load(cls, path: Path) -> "Vocabulary":
        try:
            text = Path(path).read_bytes().decode("utf-8")
        except UnicodeDecodeError as e:
            raise MalformedVocabFile(f"{path}: not UTF-8: {e}") from e
        if "\r" in text:
            raise MalformedVocabFile(f"{path}: CR characters; expected LF newlines")
        if not text.endswith("\n"):
            raise MalformedVocabFile(f"{path}: missing final newline")
        lines = text[:-1].split("\n")
        if any(not line or line != line.strip() for line in lines):
            raise MalformedVocabFile(f"{path}: empty line or whitespace inside a token")
        try:
            return cls(lines, provenance="loaded")
        except ValueError as e:
            raise MalformedVocabFile(f"{path}: {e}") from e


def build(
    corpus_streams: Iterable[TokenStream],
    config: Optional[VocabConfig] = None,
    number_range: Tuple[int, int] = (1, 1000),
) -> Vocabulary:
    """Specials, then every observed token plus the configured extras, sorted.

    Sorting makes the result independent of stream order.
    """
    config = config or VocabConfig()
    observed = set()
    units = 0
    for stream in corpus_streams:
        observed.update(stream.tokens)
        units += 1
    if not observed:
        raise EmptyCorpus(f"No tokens in {units} streams; nothing to build a vocabulary from")

    if config.include_category_words:
        observed.update(CATEGORIES)
    if config.include_number_range:
        low, high = number_range
        observed.update(str(number) for number in range(low, high + 1))
    observed.difference_update(SPECIALS)

    vocab = Vocabulary([*SPECIALS, *sorted(observed)])
    logger.info("Built vocabulary of %d tokens from %d streams", len(vocab), units)
    return vocab


def oov_counts(vocab: Vocabulary, held_out: Iterable[TokenStream]) -> Tuple[int, int]:
    unknown = 0
    total = 0
    for stream in held_out:
        total += len(stream.tokens)
        unknown += sum(1 for token in stream.tokens if token not in vocab)
    return unknown, total


def oov_rate(vocab: Vocabulary, held_out: Iterable[TokenStream]) -> float:
    """Share of held-out tokens missing from the vocabulary."""
    unknown, total = oov_counts(vocab, held_out)
    if total == 0:
        raise EmptyCorpus("Held-out set has no tokens")
    return unknown / total
