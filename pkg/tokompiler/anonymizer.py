"""
Semantic-less replacement of names, numbers and strings.

Every distinct lexeme of a unit gets one `<category>_<n>` token; the numbers
are drawn without replacement from a configured range by a seeded PCG64
generator, so they say nothing about order, type or file length. The
ChangeDictionary kept per unit is the key that restores the original text.
"""

import logging
import re
from collections import Counter
from dataclasses import dataclass
from hashlib import sha256
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from tokompiler.errors import EmptyRange, OverlappingSpans, UnknownReplacementToken
from tokompiler.models import (
    CATEGORIES,
    AnonymizedUnit,
    AnonymizerConfig,
    Category,
    ChangeDictionary,
    DictionaryEntry,
    IdentifierOccurrence,
    SourceUnit,
    TokenStream,
)
from tokompiler.parser_frontend import SyntaxTree
from tokompiler.util import atomic_write_text

logger = logging.getLogger(__name__)

REPLACEMENT_PATTERN = re.compile(r"(func|var|arr|num|str)_([0-9]+)")
NUMBER_WORD = re.compile(r"[0-9]+")

_WORD_BYTES = frozenset(b"abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_$")


@dataclass(frozen=True)
class IdAssignment:
    ids: Dict[Category, List[int]]
    low: int
    high: int  # inclusive, after any widening
    warnings: Tuple[str, ...] = ()


def make_rng(seed: int) -> np.random.Generator:
    """The one generator used for every random draw (PCG64, portable)."""
    return np.random.Generator(np.random.PCG64(seed))


def derive_unit_seed(run_seed: int, unit_id: str) -> int:
    """Per-unit 64-bit seed: same run seed and unit id, same seed."""
    digest = sha256(unit_id.encode("utf-8")).digest()
    entropy = [run_seed, int.from_bytes(digest[:8], "little")]
    state = np.random.SeedSequence(entropy).generate_state(1, dtype=np.uint64)
    return int(state[0])


def assign_ids(
    category_counts: Mapping[str, int],
    seed: int,
    low: int = 1,
    high: int = 1000,
) -> IdAssignment:
    """Draw `count` distinct IDs per category from [low, high].

    When a category needs more IDs than the range holds, the range grows by
    a factor of ten (as often as needed) and a warning is recorded.
    """
    if high < low:
        raise EmptyRange(f"Empty ID range [{low}, {high}]")
    if any(count < 0 for count in category_counts.values()):
        raise ValueError(f"Negative category count in {dict(category_counts)}")

    size = high - low + 1
    need = max(category_counts.values(), default=0)
    warnings: List[str] = []
    while need > size:
        size *= 10
        message = (
            f"{need} distinct lexemes exceed the ID range; widening to [{low}, {low + size - 1}]"
        )
        logger.warning(message)
        warnings.append(message)

    rng = make_rng(seed)
    ids: Dict[Category, List[int]] = {}
    for category in CATEGORIES:
        count = category_counts.get(category, 0)
        if count == 0:
            continue
        drawn = rng.choice(size, size=count, replace=False) + low
        ids[category] = [int(value) for value in drawn]
    return IdAssignment(ids=ids, low=low, high=low + size - 1, warnings=tuple(warnings))


def _check_spans(occurrences: Sequence[IdentifierOccurrence]) -> None:
    previous_end = -1
    for occurrence in occurrences:
        if occurrence.start < previous_end:
            raise OverlappingSpans(
                f"Occurrence '{occurrence.lexeme}' at {occurrence.span} overlaps "
                f"the previous one ending at {previous_end}"
            )
        previous_end = occurrence.end


def anonymize(
    unit: SourceUnit,
    tree: SyntaxTree,
    occurrences: Sequence[IdentifierOccurrence],
    seed: int,
    config: Optional[AnonymizerConfig] = None,
) -> AnonymizedUnit:
    config = config or AnonymizerConfig()
    _check_spans(occurrences)

    first_seen: Dict[str, Category] = {}
    for occurrence in occurrences:
        first_seen.setdefault(occurrence.lexeme, occurrence.category)
    counts = Counter(first_seen.values())

    assignment = assign_ids(counts, seed, config.range_lo, config.range_hi)
    pending = {category: iter(ids) for category, ids in assignment.ids.items()}
    replacement_of: Dict[str, str] = {}
    entries: List[DictionaryEntry] = []
    for lexeme, category in first_seen.items():
        replacement = f"{category}_{next(pending[category])}"
        replacement_of[lexeme] = replacement
        entries.append(DictionaryEntry(replacement=replacement, original=lexeme, category=category))

    source = tree.source
    out = bytearray()
    position = 0
    for occurrence in occurrences:
        out += source[position : occurrence.start]
        replacement = replacement_of[occurrence.lexeme].encode("ascii")
        # Keep the replacement a separate token when it touches a word character.
        if out and out[-1] in _WORD_BYTES:
            out += b" "
        out += replacement
        if occurrence.end < len(source) and source[occurrence.end] in _WORD_BYTES:
            out += b" "
        position = occurrence.end
    out += source[position:]

    warnings = list(assignment.warnings)
    replaced = {occurrence.start for occurrence in occurrences}
    for index in tree.token_leaves():
        node = tree.nodes[index]
        if node.start not in replaced and REPLACEMENT_PATTERN.fullmatch(tree.text(index)):
            message = f"{unit.id}: kept token '{tree.text(index)}' looks like a replacement"
            logger.warning(message)
            warnings.append(message)

    return AnonymizedUnit(
        unit_id=unit.id,
        language=unit.language,
        text=out.decode("utf-8", errors="replace"),
        dictionary=ChangeDictionary(unit_id=unit.id, seed=seed, entries=entries),
        category_counts={category: counts.get(category, 0) for category in CATEGORIES},
        warnings=warnings,
    )


def restore_lexemes(tokens: Sequence[str], dictionary: ChangeDictionary) -> List[str]:
    """Swap replacement tokens back to originals.

    Accepts both joined (`var_7`) and split (`var`, `7`) replacements.
    """
    forward = dictionary.forward()
    out: List[str] = []
    index = 0
    while index < len(tokens):
        token = tokens[index]
        if REPLACEMENT_PATTERN.fullmatch(token):
            replacement = token
            index += 1
        elif (
            token in CATEGORIES
            and index + 1 < len(tokens)
            and NUMBER_WORD.fullmatch(tokens[index + 1])
        ):
            replacement = f"{token}_{tokens[index + 1]}"
            index += 2
        else:
            out.append(token)
            index += 1
            continue
        try:
            out.append(forward[replacement])
        except KeyError:
            raise UnknownReplacementToken(replacement) from None
    return out


def restore(tokens_or_text: Union[TokenStream, str], dictionary: ChangeDictionary) -> str:
    if isinstance(tokens_or_text, TokenStream):
        tokens = tokens_or_text.tokens
    else:
        tokens = tokens_or_text.split()
    return " ".join(restore_lexemes(tokens, dictionary))


def save_dictionary(dictionary: ChangeDictionary, path: Path) -> None:
    atomic_write_text(path, dictionary.model_dump_json() + "\n")


def load_dictionary(path: Path) -> ChangeDictionary:
    return ChangeDictionary.model_validate_json(Path(path).read_text(encoding="utf-8"))
