from pathlib import Path
from typing import Dict, List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, computed_field, model_validator

from tokompiler.errors import ConfigError, UnknownReplacementToken

# Models represent the artifacts we write to disk (dictionaries, token
# streams, reports, configs) for easy jsonification with pydantic.

Language = Literal["c", "cpp", "fortran"]

Category = Literal["func", "var", "arr", "num", "str"]

Scope = Literal["file", "function"]

Normalizer = Literal["per_token", "per_source_char"]

CATEGORIES: Tuple[Category, ...] = ("func", "var", "arr", "num", "str")

LANGUAGE_NAMES: Dict[str, str] = {"c": "C", "cpp": "C++", "fortran": "Fortran"}

DEFAULT_LANGUAGE_MAP: Dict[str, Language] = {
    ".c": "c",
    ".h": "c",
    ".cc": "cpp",
    ".cpp": "cpp",
    ".cxx": "cpp",
    ".c++": "cpp",
    ".hh": "cpp",
    ".hpp": "cpp",
    ".hxx": "cpp",
    ".f": "fortran",
    ".for": "fortran",
    ".f90": "fortran",
    ".f95": "fortran",
    ".f03": "fortran",
    ".f08": "fortran",
}

DEFAULT_SEED = 42


class SourceUnit(BaseModel):
    """One input file or one function extracted from it."""

    model_config = ConfigDict(frozen=True)

    id: str
    language: Language
    origin: str  # path relative to the ingest root
    text: str
    parent_id: Optional[str] = None  # set for extracted functions

    @property
    def repo(self) -> str:
        parts = Path(self.origin).parts
        return parts[0] if len(parts) > 1 else "."

    @property
    def size_bytes(self) -> int:
        return len(self.text.encode("utf-8"))


class IdentifierOccurrence(BaseModel):
    model_config = ConfigDict(frozen=True)

    start: int
    end: int
    lexeme: str
    category: Category
    decl_site: bool = False

    @property
    def span(self) -> Tuple[int, int]:
        return self.start, self.end

    @model_validator(mode="after")
    def validate_span(self) -> "IdentifierOccurrence":
        if self.start > self.end:
            raise ValueError(f"span start {self.start} is after end {self.end}")
        return self


class DictionaryEntry(BaseModel):
    replacement: str
    original: str
    category: Category


class ChangeDictionary(BaseModel):
    """One-to-one mapping between replacement tokens and original lexemes."""

    unit_id: str
    seed: int = Field(ge=0, lt=2**64)
    entries: List[DictionaryEntry] = Field(default_factory=list)

    @model_validator(mode="after")
    def validate_bijective(self) -> "ChangeDictionary":
        replacements = [entry.replacement for entry in self.entries]
        originals = [entry.original for entry in self.entries]
        if len(set(replacements)) != len(replacements):
            raise ValueError(f"{self.unit_id}: two originals share a replacement")
        if len(set(originals)) != len(originals):
            raise ValueError(f"{self.unit_id}: two replacements share an original")
        for entry in self.entries:
            category, _, number = entry.replacement.partition("_")
            if category != entry.category or not number.isdigit():
                raise ValueError(
                    f"{self.unit_id}: malformed replacement token '{entry.replacement}'"
                )
        return self

    def forward(self) -> Dict[str, str]:
        """replacement -> original"""
        return {entry.replacement: entry.original for entry in self.entries}

    def reverse(self) -> Dict[str, str]:
        """original -> replacement"""
        return {entry.original: entry.replacement for entry in self.entries}

    def lookup(self, replacement: str) -> str:
        for entry in self.entries:
            if entry.replacement == replacement:
                return entry.original
        raise UnknownReplacementToken(replacement)


class AnonymizedUnit(BaseModel):
    unit_id: str
    language: Language
    text: str
    dictionary: ChangeDictionary
    category_counts: Dict[Category, int]
    warnings: List[str] = Field(default_factory=list)


class TokenStream(BaseModel):
    unit_id: str
    tokens: List[str] = Field(default_factory=list)
    ids: Optional[List[int]] = None
    oov_mask: Optional[List[bool]] = Field(default=None, exclude=True)

    @model_validator(mode="after")
    def validate_lengths(self) -> "TokenStream":
        if self.ids is not None and len(self.ids) != len(self.tokens):
            raise ValueError(
                f"{self.unit_id}: {len(self.ids)} ids for {len(self.tokens)} tokens"
            )
        if self.oov_mask is not None and len(self.oov_mask) != len(self.tokens):
            raise ValueError(f"{self.unit_id}: oov_mask length differs from tokens")
        return self

    def __len__(self) -> int:
        return len(self.tokens)


class RestoredUnit(BaseModel):
    unit_id: str
    text: str


class TokenizedUnit(BaseModel):
    stream: TokenStream
    dictionary: ChangeDictionary
    error_count: int = 0
    warnings: List[str] = Field(default_factory=list)


class FilterConfig(BaseModel):
    min_tokens: int = Field(default=100, ge=0)
    max_bytes: int = Field(default=1_048_576, gt=0)
    require_parse: bool = True
    dedup: Literal["exact_hash"] = "exact_hash"
    # Which tokenizer counts toward min_tokens; "bpe" needs a trained model.
    token_counter: Literal["tokompiler", "bpe"] = "tokompiler"


class AnonymizerConfig(BaseModel):
    range_lo: int = 1
    range_hi: int = 1000
    scope: Scope = "file"

    @model_validator(mode="after")
    def validate_range(self) -> "AnonymizerConfig":
        if self.range_lo < 0:
            raise ConfigError(f"range_lo must be >= 0, got {self.range_lo}")
        return self


class VocabConfig(BaseModel):
    include_number_range: bool = True
    include_category_words: bool = True


class BpeConfig(BaseModel):
    target_size: int = Field(default=50_000, ge=257)
    sample_fraction: float = Field(default=0.05, gt=0.0, le=1.0)


class NgramConfig(BaseModel):
    order: int = Field(default=3, ge=1)
    k: float = Field(default=0.01, gt=0.0)
    normalizer: Normalizer = "per_source_char"


class TokompilerConfig(BaseModel):
    anonymizer: AnonymizerConfig = Field(default_factory=AnonymizerConfig)
    filter: FilterConfig = Field(default_factory=FilterConfig)
    vocab: VocabConfig = Field(default_factory=VocabConfig)
    bpe: BpeConfig = Field(default_factory=BpeConfig)
    ngram: NgramConfig = Field(default_factory=NgramConfig)
    languages: Dict[str, Language] = Field(
        default_factory=lambda: dict(DEFAULT_LANGUAGE_MAP),
        description="File extension (lower case, with dot) to language",
    )
    heldout_fraction: float = Field(default=0.1, gt=0.0, lt=1.0)


class RunConfig(BaseModel):
    """Fully resolved settings for one CLI invocation."""

    subcommand: str
    languages: List[Language] = Field(default_factory=lambda: ["c", "cpp", "fortran"])
    seed: int = Field(default=DEFAULT_SEED, ge=0, lt=2**64)
    input: Optional[Path] = None
    out: Optional[Path] = None
    vocab_file: Optional[Path] = None
    dict_dir: Optional[Path] = None
    bpe_file: Optional[Path] = None
    strict: bool = False
    jobs: int = Field(default=1, ge=1)
    log_every: int = Field(default=1000, ge=1)
    settings: TokompilerConfig = Field(default_factory=TokompilerConfig)

    def language_map(self) -> Dict[str, Language]:
        return {
            ext: lang
            for ext, lang in self.settings.languages.items()
            if lang in self.languages
        }


class LanguageStats(BaseModel):
    repos: int = 0
    size_bytes: int = 0
    files: int = 0
    functions: int = 0

    @computed_field
    @property
    def size_gb(self) -> float:
        return round(self.size_bytes / 1e9, 6)


class FilterLedger(BaseModel):
    """Where every unit went.

    File stage: units_in == units_kept + sum(dropped.values()).
    Block stage: blocks_in == blocks_kept + sum(blocks_dropped.values()).
    `skipped` counts files that never became units (binary, empty, unreadable).
    """

    units_in: int = 0
    units_kept: int = 0
    dropped: Dict[str, int] = Field(default_factory=dict)
    blocks_in: int = 0
    blocks_kept: int = 0
    blocks_dropped: Dict[str, int] = Field(default_factory=dict)
    skipped: Dict[str, int] = Field(default_factory=dict)

    def drop(self, reason: str) -> None:
        self.dropped[reason] = self.dropped.get(reason, 0) + 1

    def drop_block(self, reason: str) -> None:
        self.blocks_dropped[reason] = self.blocks_dropped.get(reason, 0) + 1

    def skip(self, reason: str) -> None:
        self.skipped[reason] = self.skipped.get(reason, 0) + 1

    @property
    def conserved(self) -> bool:
        return (
            self.units_in == self.units_kept + sum(self.dropped.values())
            and self.blocks_in == self.blocks_kept + sum(self.blocks_dropped.values())
        )


class CorpusStats(BaseModel):
    """Per-language corpus statistics.

    One record per language mirrors a row of the HPCorpus statistics table,
    e.g. Fortran: {"repos": 3683, "size_gb": 0.68, "files": 138552,
    "functions": 359272}.
    """

    languages: Dict[str, LanguageStats] = Field(
        default_factory=lambda: {name: LanguageStats() for name in LANGUAGE_NAMES.values()}
    )
    filter_ledger: FilterLedger = Field(default_factory=FilterLedger)


class TokenizerSummary(BaseModel):
    vocab_size: int
    total_tokens: int
    mean_tokens_per_unit: float
    oov_rate: Optional[float] = None


class ComparisonRow(BaseModel):
    unit_id: str
    language: Language
    source_chars: int
    tokompiler_count: int
    bpe_count: int
    lexical_count: int


class PerplexityResult(BaseModel):
    per_token: float
    per_source_char: float


class ComparisonReport(BaseModel):
    tokenizers: Dict[str, TokenizerSummary] = Field(default_factory=dict)
    rows: List[ComparisonRow] = Field(default_factory=list)
    reduction_ratio: Optional[float] = Field(
        default=None, description="total tokompiler tokens / total BPE tokens"
    )
    normalized_ppl: Optional[Dict[str, PerplexityResult]] = None
    # which perplexity column ranks the tokenizers
    normalizer: Normalizer = "per_source_char"
