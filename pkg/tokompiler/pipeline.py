"""End-to-end tokenizer for one unit: parse -> anonymize -> regenerate -> lexicalize -> encode."""

import logging
from typing import List, Optional

from tokompiler.anonymizer import anonymize, derive_unit_seed, restore
from tokompiler.lexicalizer import encode, lexicalize, regenerate
from tokompiler.models import (
    DEFAULT_SEED,
    AnonymizerConfig,
    ChangeDictionary,
    SourceUnit,
    TokenizedUnit,
    TokenStream,
)
from tokompiler.parser_frontend import (
    SyntaxTree,
    classify_occurrences,
    extract_functions,
    parse,
    top_level_remainder,
)
from tokompiler.vocabulary import Vocabulary

logger = logging.getLogger(__name__)


class TokompilerPipeline:
    def __init__(
        self,
        config: Optional[AnonymizerConfig] = None,
        seed: int = DEFAULT_SEED,
        vocab: Optional[Vocabulary] = None,
    ):
        self.config = config or AnonymizerConfig()
        self.seed = seed
        self.vocab = vocab

    def units_for(self, unit: SourceUnit) -> List[SourceUnit]:
        """The units that get their own change dictionary under the configured scope.

        Function scope gives one unit per function plus an `::top` unit for the
        code around them, so top-level declarations are tokenized too.
        """
        if self.config.scope == "file" or unit.parent_id is not None:
            return [unit]
        tree = parse(unit)
        parts = extract_functions(tree, unit)
        remainder = top_level_remainder(tree, unit)
        if remainder is not None:
            parts.append(remainder)
        if not parts:
            logger.info("%s: nothing to tokenize under function scope", unit.id)
        return parts

    def tokenize(self, unit: SourceUnit, tree: Optional[SyntaxTree] = None) -> TokenizedUnit:
        tree = tree or parse(unit)
        occurrences = classify_occurrences(tree, unit)
        seed = derive_unit_seed(self.seed, unit.id)
        anonymized = anonymize(unit, tree, occurrences, seed, self.config)
        stream = lexicalize(regenerate(anonymized), unit.id)
        if self.vocab is not None:
            stream = encode(stream, self.vocab)
        return TokenizedUnit(
            stream=stream,
            dictionary=anonymized.dictionary,
            error_count=tree.error_count,
            warnings=anonymized.warnings,
        )

    def tokenize_scoped(self, unit: SourceUnit) -> List[TokenizedUnit]:
        return [self.tokenize(part) for part in self.units_for(unit)]

    def count_tokens(self, unit: SourceUnit, tree: Optional[SyntaxTree] = None) -> int:
        return len(self.tokenize(unit, tree).stream)

    @staticmethod
    def restore(stream: TokenStream, dictionary: ChangeDictionary) -> str:
        return restore(stream, dictionary)
