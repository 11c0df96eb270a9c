"""Formula language: AST, parser, canonical printer, copy-relative normalization.

The language covers arithmetic (+ - * / ^), unary minus, one comparison per
expression level (= <> < <= > >=), the functions SUM, AVERAGE, MIN, MAX,
COUNT, ABS, ROUND and IF, A1-style references with $ markers, ranges, and
Sheet! / [book]Sheet! qualified references.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

FUNCTIONS = {"SUM", "AVERAGE", "MIN", "MAX", "COUNT", "ABS", "ROUND", "IF"}
AGGREGATES = {"SUM", "AVERAGE", "MIN", "MAX", "COUNT"}
FIXED_ARITY = {"ABS": 1, "ROUND": 2, "IF": 3}

CMP_OPS = ("<=", ">=", "<>", "=", "<", ">")

# Equivalence levels for clone grouping.
COPY = "COPY"
LOGICAL = "LOGICAL"
STRUCTURAL = "STRUCTURAL"
LEVELS = (COPY, LOGICAL, STRUCTURAL)


class FormulaError(ValueError):
    """Formula syntax or validation problem, with a 1-based column position."""

    def __init__(self, message: str, col: int):
        super().__init__(f"{message} (column {col})")
        self.message = message
        self.col = col


# ---------------------------------------------------------------------------
# Column letter helpers (A=1, Z=26, AA=27, ...)


def col_to_letters(col: int) -> str:
    if col < 1:
        raise ValueError(f"column index must be >= 1, got {col}")
    out = ""
    while col:
        col, rem = divmod(col - 1, 26)
        out = chr(ord("A") + rem) + out
    return out


def letters_to_col(letters: str) -> int:
    col = 0
    for ch in letters.upper():
        col = col * 26 + (ord(ch) - ord("A") + 1)
    return col


def format_a1(col: int, row: int) -> str:
    return f"{col_to_letters(col)}{row}"


# ---------------------------------------------------------------------------
# AST nodes


class Expr:
    """Base class for formula AST nodes."""


@dataclass(frozen=True)
class Number(Expr):
    value: float


@dataclass(frozen=True)
class Text(Expr):
    value: str


@dataclass(frozen=True)
class Boolean(Expr):
    value: bool


@dataclass(frozen=True)
class Ref(Expr):
    """A1-style cell reference; book-qualified refs are external."""

    col: int
    row: int
    col_abs: bool = False
    row_abs: bool = False
    sheet: str | None = None
    book: str | None = None

    @property
    def external(self) -> bool:
        return self.book is not None


@dataclass(frozen=True)
class RcRef(Expr):
    """Copy-relative reference: non-absolute axes hold signed offsets from the host."""

    col: int
    row: int
    col_abs: bool = False
    row_abs: bool = False
    sheet: str | None = None
    book: str | None = None


@dataclass(frozen=True)
class Range(Expr):
    start: Expr
    end: Expr


@dataclass(frozen=True)
class Unary(Expr):
    op: str
    operand: Expr


@dataclass(frozen=True)
class Binary(Expr):
    op: str
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Call(Expr):
    func: str
    args: tuple[Expr, ...]


@dataclass(frozen=True)
class Placeholder(Expr):
    """Stands in for literals ("const") or references ("ref") at coarser levels."""

    kind: str


# ---------------------------------------------------------------------------
# Canonical text


def format_number(value: float) -> str:
    """Shortest round-trip decimal; integral values without the trailing .0; -0 is 0."""
    if value == 0:
        return "0"
    s = repr(float(value))
    return s[:-2] if s.endswith(".0") else s


_ESCAPES = {"\\": "\\\\", '"': '\\"', "\n": "\\n", "\t": "\\t"}
_UNESCAPES = {"\\": "\\", '"': '"', "n": "\n", "t": "\t"}


def quote_text(value: str) -> str:
    return '"' + "".join(_ESCAPES.get(ch, ch) for ch in value) + '"'


def literal_text(value: float | str | bool) -> str:
    """Canonical text of a constant cell value."""
    if isinstance(value, bool):
        return "TRUE" if value else "FALSE"
    if isinstance(value, str):
        return quote_text(value)
    return format_number(value)


def _ref_text(r: Ref) -> str:
    prefix = ""
    if r.book is not None:
        prefix += f"[{r.book}]"
    if r.sheet is not None:
        prefix += f"{r.sheet}!"
    c = "$" if r.col_abs else ""
    w = "$" if r.row_abs else ""
    return f"{prefix}{c}{col_to_letters(r.col)}{w}{r.row}"


def _rc_axis(tag: str, value: int, absolute: bool) -> str:
    if absolute:
        return f"{tag}{value}"
    if value == 0:
        return tag
    return f"{tag}[{value}]"


def _rc_text(r: RcRef) -> str:
    prefix = ""
    if r.book is not None:
        prefix += f"[{r.book}]"
    if r.sheet is not None:
        prefix += f"{r.sheet}!"
    return prefix + _rc_axis("R", r.row, r.row_abs) + _rc_axis("C", r.col, r.col_abs)


def _node_text(node: Expr) -> str:
    if isinstance(node, Number):
        return format_number(node.value)
    if isinstance(node, Text):
        return quote_text(node.value)
    if isinstance(node, Boolean):
        return "TRUE" if node.value else "FALSE"
    if isinstance(node, Ref):
        return _ref_text(node)
    if isinstance(node, RcRef):
        return _rc_text(node)
    if isinstance(node, Range):
        # The shared sheet/book prefix is printed once, on the start ref.
        end = node.end
        if isinstance(end, Ref):
            end = Ref(end.col, end.row, end.col_abs, end.row_abs)
        elif isinstance(end, RcRef):
            end = RcRef(end.col, end.row, end.col_abs, end.row_abs)
        return f"{_node_text(node.start)}:{_node_text(end)}"
    if isinstance(node, Unary):
        return f"({node.op}{_node_text(node.operand)})"
    if isinstance(node, Binary):
        return f"({_node_text(node.left)}{node.op}{_node_text(node.right)})"
    if isinstance(node, Call):
        return f"{node.func}({','.join(_node_text(a) for a in node.args)})"
    if isinstance(node, Placeholder):
        return f"<{node.kind}>"
    raise TypeError(f"unknown AST node {node!r}")


def print_formula_canonical(ast: Expr) -> str:
    """Deterministic text: uppercase functions, no whitespace, full parenthesization."""
    return "=" + _node_text(ast)


# ---------------------------------------------------------------------------
# Parsing

_NUMBER_RE = re.compile(r"(?:[0-9]+(?:\.[0-9]*)?|\.[0-9]+)(?:[eE][+-]?[0-9]+)?")
_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_REF_RE = re.compile(r"(\$?)([A-Za-z]{1,4})(\$?)([1-9][0-9]{0,6})")
_BOOK_RE = re.compile(r"\[([A-Za-z0-9_.-]+)\]")


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def error(self, message: str, pos: int | None = None) -> FormulaError:
        return FormulaError(message, (self.pos if pos is None else pos) + 1)

    def skip_ws(self) -> None:
        while self.pos < len(self.text) and self.text[self.pos] in " \t":
            self.pos += 1

    def peek(self, token: str) -> bool:
        self.skip_ws()
        return self.text.startswith(token, self.pos)

    def take(self, token: str) -> bool:
        if self.peek(token):
            self.pos += len(token)
            return True
        return False

    def expect(self, token: str) -> None:
        if not self.take(token):
            raise self.error(f"expected '{token}'")

    def match(self, regex: re.Pattern[str]) -> re.Match[str] | None:
        self.skip_ws()
        m = regex.match(self.text, self.pos)
        if m:
            self.pos = m.end()
        return m

    # grammar: formula := '=' cmp ; cmp := add (cmpop add)? ; ...
    def parse(self) -> Expr:
        if not self.text.startswith("="):
            raise self.error("formula must start with '='", 0)
        self.pos = 1
        node = self.parse_cmp()
        self.skip_ws()
        if self.pos != len(self.text):
            raise self.error(f"unexpected '{self.text[self.pos:]}'")
        return node

    def parse_cmp(self) -> Expr:
        left = self.parse_add()
        for op in CMP_OPS:
            if self.take(op):
                return Binary(op, left, self.parse_add())
        return left

    def parse_add(self) -> Expr:
        node = self.parse_mul()
        while True:
            if self.take("+"):
                node = Binary("+", node, self.parse_mul())
            elif self.take("-"):
                node = Binary("-", node, self.parse_mul())
            else:
                return node

    def parse_mul(self) -> Expr:
        node = self.parse_pow()
        while True:
            if self.take("*"):
                node = Binary("*", node, self.parse_pow())
            elif self.take("/"):
                node = Binary("/", node, self.parse_pow())
            else:
                return node

    def parse_pow(self) -> Expr:
        node = self.parse_unary()
        while self.take("^"):
            node = Binary("^", node, self.parse_unary())
        return node

    def parse_unary(self) -> Expr:
        if self.take("-"):
            return Unary("-", self.parse_unary())
        return self.parse_atom()

    def parse_atom(self) -> Expr:
        self.skip_ws()
        if self.pos >= len(self.text):
            raise self.error("unexpected end of formula")
        ch = self.text[self.pos]
        if ch == "(":
            self.pos += 1
            node = self.parse_cmp()
            self.expect(")")
            return node
        if ch == '"':
            return self.parse_string()
        if ch.isdigit() or ch == ".":
            return self.parse_number()
        if ch == "[":
            return self.parse_ref_or_range()
        if ch == "$":
            return self.parse_ref_or_range()
        if ch.isalpha() or ch == "_":
            return self.parse_word()
        raise self.error(f"unexpected character '{ch}'")

    def parse_number(self) -> Expr:
        start = self.pos
        m = self.match(_NUMBER_RE)
        if not m:
            raise self.error("malformed number", start)
        value = float(m.group(0))
        if value != value or value in (float("inf"), float("-inf")):
            raise self.error("non-finite number", start)
        return Number(value)

    def parse_string(self) -> Expr:
        start = self.pos
        self.pos += 1
        out: list[str] = []
        while self.pos < len(self.text):
            ch = self.text[self.pos]
            if ch == '"':
                self.pos += 1
                return Text("".join(out))
            if ch == "\\":
                if self.pos + 1 >= len(self.text):
                    break
                esc = self.text[self.pos + 1]
                if esc not in _UNESCAPES:
                    raise self.error(f"unknown escape '\\{esc}'", self.pos)
                out.append(_UNESCAPES[esc])
                self.pos += 2
            else:
                out.append(ch)
                self.pos += 1
        raise self.error("unterminated string", start)

    def parse_word(self) -> Expr:
        start = self.pos
        # An A1 token not followed by '!' is a plain reference.
        m = _REF_RE.match(self.text, self.pos)
        if m and not self.text.startswith("!", m.end()):
            self.pos = m.end()
            ref = self._ref_from_match(m)
            return self.finish_range(ref, start)
        m = _IDENT_RE.match(self.text, self.pos)
        if not m:
            raise self.error("expected reference, function, or constant")
        word = m.group(0)
        after = m.end()
        if self.text.startswith("!", after):
            self.pos = after + 1
            return self.finish_range(self.parse_plain_ref(sheet=word), start)
        if self.text.startswith("(", after):
            self.pos = after + 1
            return self.parse_call(word.upper(), start)
        if word.upper() == "TRUE":
            self.pos = after
            return Boolean(True)
        if word.upper() == "FALSE":
            self.pos = after
            return Boolean(False)
        raise self.error(f"unknown identifier '{word}'", start)

    def _ref_from_match(self, m: re.Match[str], sheet: str | None = None, book: str | None = None) -> Ref:
        return Ref(
            col=letters_to_col(m.group(2)),
            row=int(m.group(4)),
            col_abs=bool(m.group(1)),
            row_abs=bool(m.group(3)),
            sheet=sheet,
            book=book,
        )

    def parse_plain_ref(self, sheet: str | None = None, book: str | None = None) -> Ref:
        m = self.match(_REF_RE)
        if not m:
            raise self.error("expected cell reference")
        return self._ref_from_match(m, sheet=sheet, book=book)

    def parse_ref_or_range(self) -> Expr:
        start = self.pos
        book = None
        if self.text[self.pos] == "[":
            m = self.match(_BOOK_RE)
            if not m:
                raise self.error("malformed book name", start)
            book = m.group(1)
            sheet_m = self.match(_IDENT_RE)
            if not sheet_m or not self.take("!"):
                raise self.error("book reference needs Sheet!", start)
            ref = self.parse_plain_ref(sheet=sheet_m.group(0), book=book)
        else:
            ref = self.parse_plain_ref()
        return self.finish_range(ref, start)

    def finish_range(self, ref: Ref, start: int) -> Expr:
        if not self.take(":"):
            return ref
        end = self.parse_plain_ref(sheet=ref.sheet, book=ref.book)
        if (end.sheet, end.book) != (ref.sheet, ref.book):
            raise self.error("range endpoints must be on the same sheet", start)
        return Range(ref, end)

    def parse_call(self, func: str, start: int) -> Expr:
        if func not in FUNCTIONS:
            raise self.error(f"unknown function '{func}'", start)
        args: list[Expr] = []
        if not self.take(")"):
            args.append(self.parse_cmp())
            while self.take(","):
                args.append(self.parse_cmp())
            self.expect(")")
        want = FIXED_ARITY.get(func)
        if want is not None and len(args) != want:
            raise self.error(f"{func} takes {want} argument(s), got {len(args)}", start)
        if func in AGGREGATES and not args:
            raise self.error(f"{func} needs at least one argument", start)
        return Call(func, tuple(args))


def parse_formula(text: str) -> Expr:
    """Parse '=...' into an AST; raises FormulaError with a column position."""
    return _Parser(text).parse()


# ---------------------------------------------------------------------------
# Copy-relative normalization and level reduction


def normalize_copy_relative(ast: Expr, host: tuple[int, int]) -> Expr:
    """Rewrite references relative to the host (col, row); absolute axes are kept."""
    host_col, host_row = host

    def conv(r: Ref) -> RcRef:
        return RcRef(
            col=r.col if r.col_abs else r.col - host_col,
            row=r.row if r.row_abs else r.row - host_row,
            col_abs=r.col_abs,
            row_abs=r.row_abs,
            sheet=r.sheet,
            book=r.book,
        )

    def walk(node: Expr) -> Expr:
        if isinstance(node, Ref):
            return conv(node)
        if isinstance(node, Range):
            return Range(walk(node.start), walk(node.end))
        if isinstance(node, Unary):
            return Unary(node.op, walk(node.operand))
        if isinstance(node, Binary):
            return Binary(node.op, walk(node.left), walk(node.right))
        if isinstance(node, Call):
            return Call(node.func, tuple(walk(a) for a in node.args))
        return node

    return walk(ast)


def reduce_to_level(ast: Expr, level: str) -> Expr:
    """COPY keeps the tree; LOGICAL blanks literals; STRUCTURAL also blanks references."""
    if level not in LEVELS:
        raise ValueError(f"unknown level {level!r}")
    if level == COPY:
        return ast

    def walk(node: Expr) -> Expr:
        if isinstance(node, (Number, Text, Boolean)):
            return Placeholder("const")
        if isinstance(node, (Ref, RcRef, Range)):
            if level == STRUCTURAL:
                return Placeholder("ref")
            if isinstance(node, Range):
                return Range(walk(node.start), walk(node.end))
            return node
        if isinstance(node, Unary):
            return Unary(node.op, walk(node.operand))
        if isinstance(node, Binary):
            return Binary(node.op, walk(node.left), walk(node.right))
        if isinstance(node, Call):
            return Call(node.func, tuple(walk(a) for a in node.args))
        return node

    return walk(ast)


def normalized_signature(ast: Expr, host: tuple[int, int], level: str = COPY) -> str:
    """Textual form shared by all cells equivalent to this one at the given level."""
    return "=" + _node_text(reduce_to_level(normalize_copy_relative(ast, host), level))


def subtree_contains(big: Expr, small: Expr) -> bool:
    """True when `small` occurs as a subtree of `big` (including big == small)."""
    if big == small:
        return True
    if isinstance(big, Range):
        return subtree_contains(big.start, small) or subtree_contains(big.end, small)
    if isinstance(big, Unary):
        return subtree_contains(big.operand, small)
    if isinstance(big, Binary):
        return subtree_contains(big.left, small) or subtree_contains(big.right, small)
    if isinstance(big, Call):
        return any(subtree_contains(a, small) for a in big.args)
    return False


def walk_refs(ast: Expr):
    """Yield every Ref/Range node in the tree (ranges are not descended into)."""
    if isinstance(ast, (Ref, Range)):
        yield ast
    elif isinstance(ast, Unary):
        yield from walk_refs(ast.operand)
    elif isinstance(ast, Binary):
        yield from walk_refs(ast.left)
        yield from walk_refs(ast.right)
    elif isinstance(ast, Call):
        for a in ast.args:
            yield from walk_refs(a)
