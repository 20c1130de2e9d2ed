"""Per-language grammar tables for the tree-sitter front end.

Node kind names follow the tree-sitter-c, tree-sitter-cpp and
tree-sitter-fortran grammars.
"""

import importlib
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, FrozenSet, Mapping, Optional

from tokompiler.errors import UnsupportedLanguage
from tokompiler.models import Language

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class LanguageSpec:
    name: Language
    grammar_module: str
    # Leaves that carry a programmer-chosen name.
    identifier_kinds: FrozenSet[str]
    number_kinds: FrozenSet[str]
    string_kinds: FrozenSet[str]
    # Nodes whose whole span is one lexeme even though the grammar gives
    # them children (string literals with string_content, escapes ...).
    atomic_kinds: FrozenSet[str]
    comment_kinds: FrozenSet[str]
    # Definitions extracted as structured blocks.
    function_kinds: FrozenSet[str]
    # Wrappers whose span replaces the function's when they are its parent.
    function_wrappers: FrozenSet[str] = frozenset()

    @property
    def literal_kinds(self) -> FrozenSet[str]:
        return self.number_kinds | self.string_kinds


_C_STRINGS = frozenset({"string_literal", "char_literal", "concatenated_string"})

C = LanguageSpec(
    name="c",
    grammar_module="tree_sitter_c",
    identifier_kinds=frozenset({"identifier", "field_identifier", "statement_identifier"}),
    number_kinds=frozenset({"number_literal"}),
    string_kinds=_C_STRINGS,
    atomic_kinds=_C_STRINGS | {"system_lib_string"},
    comment_kinds=frozenset({"comment"}),
    function_kinds=frozenset({"function_definition"}),
)

_CPP_STRINGS = _C_STRINGS | {"raw_string_literal"}

CPP = LanguageSpec(
    name="cpp",
    grammar_module="tree_sitter_cpp",
    identifier_kinds=C.identifier_kinds,
    number_kinds=frozenset({"number_literal"}),
    string_kinds=_CPP_STRINGS | {"user_defined_literal"},
    atomic_kinds=_CPP_STRINGS | {"system_lib_string", "user_defined_literal"},
    comment_kinds=frozenset({"comment"}),
    function_kinds=frozenset({"function_definition"}),
    function_wrappers=frozenset({"template_declaration"}),
)

FORTRAN = LanguageSpec(
    name="fortran",
    grammar_module="tree_sitter_fortran",
    identifier_kinds=frozenset(
        {"identifier", "name", "method_name", "module_name", "type_member"}
    ),
    number_kinds=frozenset({"number_literal"}),
    string_kinds=frozenset({"string_literal"}),
    # kind suffixes (1.5_8, 3.0_dp) stay part of the number
    atomic_kinds=frozenset({"string_literal", "number_literal"}),
    comment_kinds=frozenset({"comment"}),
    function_kinds=frozenset({"subroutine", "function"}),
)

LANGUAGES: Dict[str, LanguageSpec] = {spec.name: spec for spec in (C, CPP, FORTRAN)}


def get_spec(language: str) -> LanguageSpec:
    try:
        return LANGUAGES[language]
    except KeyError:
        raise UnsupportedLanguage(f"Unsupported language: {language}") from None


def load_grammar(language: str):
    """Return the tree-sitter Language object for `language`."""
    from tree_sitter import Language as TSLanguage

    spec = get_spec(language)
    try:
        module = importlib.import_module(spec.grammar_module)
    except ImportError as e:
        raise UnsupportedLanguage(
            f"Grammar package {spec.grammar_module} for {language} is not installed"
        ) from e
    return TSLanguage(module.language())


def detect_language(path: Path, language_map: Mapping[str, Language]) -> Optional[Language]:
    """Language for a file by extension, or None when the file is not code."""
    return language_map.get(Path(path).suffix.lower())
