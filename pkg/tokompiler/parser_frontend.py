"""
Tree-sitter front end for C, C++ and Fortran.

Parses a SourceUnit into an immutable node table, classifies the leaves the
anonymizer rewrites (names, numbers, strings) and cuts files into
function-level blocks.
"""

import logging
from collections import Counter
from dataclasses import dataclass
from typing import Dict, Iterator, List, Optional, Tuple

from tokompiler.errors import CatastrophicParseFailure, EmptySourceUnit
from tokompiler.languages import LanguageSpec, get_spec, load_grammar
from tokompiler.models import Category, IdentifierOccurrence, Language, SourceUnit

logger = logging.getLogger(__name__)

# One parser per language per process; tree-sitter parsers are not
# thread-safe, worker processes each build their own.
_PARSERS: Dict[str, object] = {}


def _get_parser(language: str):
    from tree_sitter import Parser

    parser = _PARSERS.get(language)
    if parser is None:
        parser = Parser(load_grammar(language))
        _PARSERS[language] = parser
    return parser


@dataclass(frozen=True)
class SyntaxNode:
    kind: str
    start: int  # byte offsets into SyntaxTree.source
    end: int
    parent: int  # -1 for the root
    field: Optional[str]
    named: bool
    missing: bool
    children: Tuple[int, ...]

    @property
    def is_leaf(self) -> bool:
        return not self.children


@dataclass(frozen=True)
class SyntaxTree:
    """Snapshot of a tree-sitter tree as a flat node table (root at index 0).

    Nodes are stored in pre-order, so walking the table in index order visits
    leaves in source order.
    """

    language: Language
    source: bytes
    nodes: Tuple[SyntaxNode, ...]
    error_count: int

    @property
    def root(self) -> SyntaxNode:
        return self.nodes[0]

    @property
    def spec(self) -> LanguageSpec:
        return get_spec(self.language)

    def text(self, index: int) -> str:
        node = self.nodes[index]
        return self.source[node.start : node.end].decode("utf-8", errors="replace")

    def parent(self, index: int) -> Optional[SyntaxNode]:
        parent = self.nodes[index].parent
        return self.nodes[parent] if parent >= 0 else None

    def leaves(self) -> Iterator[int]:
        for index, node in enumerate(self.nodes):
            if node.is_leaf:
                yield index

    def kind_counts(self) -> Counter:
        return Counter(node.kind for node in self.nodes)

    def error_count_in(self, start: int, end: int) -> int:
        return sum(
            1
            for node in self.nodes
            if (node.kind == "ERROR" or node.missing)
            and start <= node.start
            and node.end <= end
        )

    def token_leaves(self) -> Iterator[int]:
        """Lexical leaves in source order.

        Literal nodes listed as atomic for the language count as one leaf,
        comments and zero-width (MISSING) leaves are dropped.
        """
        spec = self.spec
        stack = [0]
        while stack:
            index = stack.pop()
            node = self.nodes[index]
            if node.kind in spec.comment_kinds:
                continue
            if node.kind in spec.atomic_kinds or node.is_leaf:
                if node.end > node.start:
                    yield index
                continue
            stack.extend(reversed(node.children))

    def lexemes(self) -> List[str]:
        """Comment-free lexeme stream of the unit.

        Whitespace inside a non-literal leaf (e.g. a preprocessor argument)
        separates lexemes; literal text is kept whole.
        """
        atomic = self.spec.atomic_kinds
        out: List[str] = []
        for index in self.token_leaves():
            text = self.text(index)
            if self.nodes[index].kind in atomic:
                out.append(text)
            else:
                out.extend(text.split())
        return out

    def partition(self) -> List[Tuple[int, int, bool]]:
        """(start, end, is_leaf) segments that tile the whole source."""
        segments: List[Tuple[int, int, bool]] = []
        position = 0
        for index in self.leaves():
            node = self.nodes[index]
            if node.end <= node.start or node.start < position:
                continue
            if node.start > position:
                segments.append((position, node.start, False))
            segments.append((node.start, node.end, True))
            position = node.end
        if position < len(self.source):
            segments.append((position, len(self.source), False))
        return segments


def _snapshot(ts_tree, language: Language, source: bytes) -> SyntaxTree:
    kinds: List[Tuple[str, int, int, int, Optional[str], bool, bool]] = []
    children: List[List[int]] = []
    cursor = ts_tree.walk()
    stack = [-1]
    while True:
        node = cursor.node
        index = len(kinds)
        parent = stack[-1]
        kinds.append(
            (
                node.type,
                node.start_byte,
                node.end_byte,
                parent,
                cursor.field_name,
                node.is_named,
                node.is_missing,
            )
        )
        children.append([])
        if parent >= 0:
            children[parent].append(index)
        if cursor.goto_first_child():
            stack.append(index)
            continue
        while not cursor.goto_next_sibling():
            if not cursor.goto_parent():
                nodes = tuple(
                    SyntaxNode(k, s, e, p, f, n, m, tuple(c))
                    for (k, s, e, p, f, n, m), c in zip(kinds, children)
                )
                errors = sum(1 for n in nodes if n.kind == "ERROR" or n.missing)
                return SyntaxTree(
                    language=language, source=source, nodes=nodes, error_count=errors
                )
            stack.pop()


def parse_source(text: str, language: Language) -> SyntaxTree:
    if not text:
        raise EmptySourceUnit("Refusing to parse empty source text")
    get_spec(language)
    source = text.encode("utf-8")
    parser = _get_parser(language)
    try:
        ts_tree = parser.parse(source)
    except Exception as e:
        raise CatastrophicParseFailure(f"{language} parser failed: {e}") from e
    if ts_tree is None or ts_tree.root_node is None:
        raise CatastrophicParseFailure(f"{language} parser returned no tree")
    return _snapshot(ts_tree, language, source)


def parse(unit: SourceUnit) -> SyntaxTree:
    """Parse a unit; recoverable syntax errors show up in error_count."""
    if not unit.text:
        raise EmptySourceUnit(f"{unit.id}: empty source text")
    tree = parse_source(unit.text, unit.language)
    if tree.error_count:
        logger.debug("%s: %d parse error nodes", unit.id, tree.error_count)
    return tree


# Occurrence classification -------------------------------------------------

Site = Tuple[Category, bool]  # (category, is declaration site)

_C_WRAPPERS = frozenset(
    {
        "parenthesized_declarator",
        "pointer_declarator",
        "reference_declarator",
        "attributed_declarator",
        "qualified_identifier",
        "template_function",
    }
)

_C_VAR_DECLARATIONS = frozenset(
    {
        "declaration",
        "init_declarator",
        "parameter_declaration",
        "optional_parameter_declaration",
        "field_declaration",
    }
)

# Use-site tie break when no declaration is seen.
_USE_PRIORITY = {"arr": 2, "func": 1, "var": 0}


def _c_site(tree: SyntaxTree, index: int) -> Optional[Site]:
    nodes = tree.nodes
    parent = nodes[index].parent
    if parent >= 0 and nodes[parent].kind == "destructor_name":
        return None  # a class name, not a value

    child = index
    while parent >= 0 and nodes[parent].kind in _C_WRAPPERS:
        child, parent = parent, nodes[parent].parent
    if parent < 0:
        return "var", False

    kind = nodes[parent].kind
    field = nodes[child].field
    if kind == "function_declarator" and field == "declarator":
        return "func", True
    if kind == "array_declarator" and field == "declarator":
        return "arr", True
    if kind in _C_VAR_DECLARATIONS and field == "declarator":
        return "var", True
    if kind == "enumerator" and field == "name":
        return "var", True
    if kind == "preproc_function_def" and field == "name":
        return "func", True
    if kind in ("preproc_def", "preproc_params", "labeled_statement"):
        return "var", True
    if kind == "call_expression" and field == "function":
        return "func", False
    if kind == "subscript_expression" and field == "argument":
        return "arr", False
    if kind == "field_expression" and field == "field":
        grand = nodes[parent].parent
        if (
            grand >= 0
            and nodes[grand].kind == "call_expression"
            and nodes[parent].field == "function"
        ):
            return "func", False
    return "var", False


_FORTRAN_UNIT_STATEMENTS = frozenset(
    {"subroutine_statement", "function_statement", "program_statement"}
)
_FORTRAN_UNIT_ENDS = frozenset(
    {"end_subroutine_statement", "end_function_statement", "end_program_statement"}
)


def _fortran_has_dimension(tree: SyntaxTree, declaration: int) -> bool:
    for child in tree.nodes[declaration].children:
        if tree.nodes[child].kind == "type_qualifier":
            if tree.text(child).lower().replace(" ", "").startswith("dimension"):
                return True
    return False


def _fortran_site(tree: SyntaxTree, index: int) -> Optional[Site]:
    nodes = tree.nodes
    parent = nodes[index].parent
    if parent < 0:
        return "var", False
    kind = nodes[parent].kind
    if kind in _FORTRAN_UNIT_STATEMENTS:
        return "func", True
    if kind in _FORTRAN_UNIT_ENDS:
        return "func", False
    if kind in ("module_statement", "function_result"):
        return "var", True
    if kind == "sized_declarator":
        return "arr", True

    declaration = -1
    if kind == "variable_declaration":
        declaration = parent
    elif kind == "init_declarator" and nodes[index].field in ("left", None):
        grand = nodes[parent].parent
        if grand >= 0 and nodes[grand].kind == "variable_declaration":
            declaration = grand
    if declaration >= 0:
        return ("arr" if _fortran_has_dimension(tree, declaration) else "var"), True

    if kind == "call_expression" and nodes[parent].children[0] == index:
        if nodes[parent].field == "left":
            return "arr", False  # a(i) = ... only assigns to arrays
        return "func", False
    if kind == "subroutine_call":
        return "func", False
    return "var", False


def _literal_category(tree: SyntaxTree, index: int, spec: LanguageSpec) -> Category:
    node = tree.nodes[index]
    if node.kind in spec.number_kinds:
        return "num"
    if node.kind == "user_defined_literal" and node.children:
        if tree.nodes[node.children[0]].kind in spec.number_kinds:
            return "num"
    return "str"


def classify_occurrences(tree: SyntaxTree, unit: SourceUnit) -> List[IdentifierOccurrence]:
    """Every name, number and string leaf of the unit, in source order.

    A lexeme keeps one category across the unit: its first declaration site
    decides, otherwise the strongest use (arr > func > var).
    """
    spec = tree.spec
    site_of = _fortran_site if spec.name == "fortran" else _c_site

    found: List[Tuple[int, str, Category, bool]] = []
    for index in tree.token_leaves():
        node = tree.nodes[index]
        if node.kind in spec.literal_kinds:
            found.append((index, tree.text(index), _literal_category(tree, index, spec), False))
        elif node.kind in spec.identifier_kinds:
            site = site_of(tree, index)
            if site is not None:
                found.append((index, tree.text(index), site[0], site[1]))

    resolved: Dict[str, Category] = {}
    uses: Dict[str, Category] = {}
    for _, lexeme, category, decl in found:
        if decl:
            resolved.setdefault(lexeme, category)
        elif _USE_PRIORITY.get(category, 0) >= _USE_PRIORITY.get(uses.get(lexeme, "var"), 0):
            uses[lexeme] = category
    for lexeme, category in uses.items():
        resolved.setdefault(lexeme, category)

    occurrences = [
        IdentifierOccurrence(
            start=tree.nodes[index].start,
            end=tree.nodes[index].end,
            lexeme=lexeme,
            category=resolved[lexeme],
            decl_site=decl,
        )
        for index, lexeme, _, decl in found
    ]
    occurrences.sort(key=lambda occurrence: occurrence.start)
    logger.debug("%s: %d occurrences", unit.id, len(occurrences))
    return occurrences


def function_spans(tree: SyntaxTree) -> List[Tuple[int, int]]:
    """Byte spans of the outermost function definitions, in source order."""
    spec = tree.spec
    spans: List[Tuple[int, int]] = []
    stack = [0]
    while stack:
        index = stack.pop()
        node = tree.nodes[index]
        if node.kind not in spec.function_kinds:
            stack.extend(reversed(node.children))
            continue
        start, end = node.start, node.end
        parent = tree.parent(index)
        if parent is not None and parent.kind in spec.function_wrappers:
            start, end = parent.start, parent.end
        spans.append((start, end))
    return spans


def extract_functions(tree: SyntaxTree, unit: SourceUnit) -> List[SourceUnit]:
    """One unit per outermost function definition; nested ones stay inside."""
    blocks: List[SourceUnit] = []
    for start, end in function_spans(tree):
        block_id = f"{unit.id}::{len(blocks)}"
        errors = tree.error_count_in(start, end)
        if errors:
            logger.debug("%s: %d error nodes inside the function", block_id, errors)
        blocks.append(
            SourceUnit(
                id=block_id,
                language=unit.language,
                origin=unit.origin,
                text=tree.source[start:end].decode("utf-8", errors="replace"),
                parent_id=unit.id,
            )
        )
    return blocks


def top_level_remainder(tree: SyntaxTree, unit: SourceUnit) -> Optional[SourceUnit]:
    """Everything outside the functions (includes, globals, prototypes) as one unit.

    None when nothing but whitespace and comments is left.
    """
    pieces: List[bytes] = []
    position = 0
    for start, end in function_spans(tree):
        pieces.append(tree.source[position:start])
        position = end
    pieces.append(tree.source[position:])
    text = "\n".join(piece.decode("utf-8", errors="replace").strip("\n") for piece in pieces if piece.strip())
    if not text.strip():
        return None
    remainder = SourceUnit(
        id=f"{unit.id}::top",
        language=unit.language,
        origin=unit.origin,
        text=text + "\n",
        parent_id=unit.id,
    )
    if not parse(remainder).lexemes():
        return None
    return remainder
