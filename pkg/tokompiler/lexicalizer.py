"""
Anonymized code -> normalized single line -> lexical tokens -> vocabulary IDs.
"""

import logging
from pathlib import Path
from typing import Iterable, Iterator, List, Sequence, Tuple

from tokompiler.anonymizer import REPLACEMENT_PATTERN
from tokompiler.errors import IdOutOfRange
from tokompiler.models import AnonymizedUnit, Language, TokenStream
from tokompiler.parser_frontend import parse_source
from tokompiler.util import read_jsonl, write_jsonl
from tokompiler.vocabulary import Vocabulary

logger = logging.getLogger(__name__)


def normalize_code(text: str, language: Language) -> str:
    """Parse `text` and print its lexemes on one line, one space apart."""
    if not text.strip():
        return ""
    return " ".join(parse_source(text, language).lexemes())


def regenerate(anonymized: AnonymizedUnit) -> str:
    """Comment-free, newline-free rendering of the anonymized unit."""
    return normalize_code(anonymized.text, anonymized.language)


def split_replacement(token: str) -> Tuple[str, ...]:
    """`var_1` -> (`var`, `1`); any other token is returned alone."""
    match = REPLACEMENT_PATTERN.fullmatch(token)
    if match is None:
        return (token,)
    return match.group(1), match.group(2)


def join_replacement(tokens: Sequence[str]) -> List[str]:
    """Undo the split: (`var`, `1`) -> `var_1`."""
    joined: List[str] = []
    index = 0
    while index < len(tokens):
        pair = "_".join(tokens[index : index + 2])
        if index + 1 < len(tokens) and REPLACEMENT_PATTERN.fullmatch(pair):
            joined.append(pair)
            index += 2
        else:
            joined.append(tokens[index])
            index += 1
    return joined


def lexicalize(normalized_text: str, unit_id: str = "") -> TokenStream:
    tokens: List[str] = []
    for token in normalized_text.split():
        tokens.extend(split_replacement(token))
    return TokenStream(unit_id=unit_id, tokens=tokens)


def encode(stream: TokenStream, vocab: Vocabulary) -> TokenStream:
    unk = vocab.unk_id
    ids: List[int] = []
    oov: List[bool] = []
    for token in stream.tokens:
        token_id = vocab.get(token)
        ids.append(unk if token_id is None else token_id)
        oov.append(token_id is None)
    return stream.model_copy(update={"ids": ids, "oov_mask": oov})


def decode(ids: Sequence[int], vocab: Vocabulary) -> List[str]:
    size = len(vocab)
    tokens: List[str] = []
    for position, token_id in enumerate(ids):
        if not 0 <= token_id < size:
            raise IdOutOfRange(f"id {token_id} at position {position} not in [0, {size})")
        tokens.append(vocab.token_of(token_id))
    return tokens


def write_streams(path: Path, streams: Iterable[TokenStream]) -> int:
    """JSONL, one `{unit_id, tokens, ids?}` object per line."""
    return write_jsonl(path, streams)


def read_streams(path: Path) -> Iterator[TokenStream]:
    return read_jsonl(path, TokenStream)
