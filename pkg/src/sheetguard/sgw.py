"""SGW plain-text workbook format.

    sgw 1
    sheet Main
    cell B1 - 1000
    cell B3 - =B1*0.2
    cell D9 h =[Ext]S!B2

Flags are `-` (none) or a subset of `h` (hidden), `l` (locked) in that order.
Lines starting with `#` are comments.
"""

from __future__ import annotations

import math
from pathlib import Path

from .formula import (
    Expr,
    FormulaError,
    format_a1,
    letters_to_col,
    literal_text,
    parse_formula,
    print_formula_canonical,
)
from .model import SHEET_NAME_RE, Addr, Cell, Literal, Sheet, Workbook

import re

_CELL_REF_RE = re.compile(r"^([A-Za-z]{1,4})([1-9][0-9]{0,6})$")
_NUMBER_RE = re.compile(r"^-?(?:[0-9]+(?:\.[0-9]*)?|\.[0-9]+)(?:[eE][+-]?[0-9]+)?$")


class SgwError(ValueError):
    """Workbook document problem, with a 1-based line number."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


def _parse_literal(text: str, line: int) -> Literal:
    if text == "TRUE":
        return True
    if text == "FALSE":
        return False
    if text.startswith('"'):
        try:
            node = parse_formula("=" + text)
        except FormulaError as exc:
            raise SgwError(f"bad string literal: {exc.message}", line) from exc
        from .formula import Text

        if not isinstance(node, Text):
            raise SgwError("bad string literal", line)
        return node.value
    if _NUMBER_RE.match(text):
        value = float(text)
        if not math.isfinite(value):
            raise SgwError("non-finite number", line)
        return value
    raise SgwError(f"bad literal {text!r}", line)


def _parse_flags(token: str, line: int) -> tuple[bool, bool]:
    if token == "-":
        return False, False
    if token in ("h", "l", "hl"):
        return "h" in token, "l" in token
    raise SgwError(f"unknown flag token {token!r}", line)


def parse_workbook(text: str, name: str = "book") -> Workbook:
    lines = text.split("\n")
    if not lines or lines[0].strip() != "sgw 1":
        raise SgwError("bad version header (want 'sgw 1')", 1)
    workbook = Workbook(name=name)
    sheet: Sheet | None = None
    for lineno, raw in enumerate(lines[1:], start=2):
        line = raw.rstrip()
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        parts = line.split(None, 1)
        keyword = parts[0]
        rest = parts[1] if len(parts) > 1 else ""
        if keyword == "sheet":
            sheet_name = rest.strip()
            if not SHEET_NAME_RE.match(sheet_name):
                raise SgwError(f"bad sheet name {sheet_name!r}", lineno)
            if workbook.sheet(sheet_name) is not None:
                raise SgwError(f"duplicate sheet {sheet_name}", lineno)
            sheet = Sheet(sheet_name)
            workbook.sheets.append(sheet)
        elif keyword == "cell":
            if sheet is None:
                raise SgwError("cell before any sheet", lineno)
            fields = rest.split(None, 2)
            if len(fields) < 3:
                raise SgwError("cell line needs <A1ref> <flags> <content>", lineno)
            ref_tok, flag_tok, content = fields
            m = _CELL_REF_RE.match(ref_tok)
            if not m:
                raise SgwError(f"bad cell reference {ref_tok!r}", lineno)
            col, row = letters_to_col(m.group(1)), int(m.group(2))
            if (col, row) in sheet.cells:
                raise SgwError(f"duplicate cell {sheet.name}!{format_a1(col, row)}", lineno)
            hidden, locked = _parse_flags(flag_tok, lineno)
            if content.startswith("="):
                try:
                    parsed: Literal | Expr = parse_formula(content)
                except FormulaError as exc:
                    raise SgwError(f"bad formula: {exc.message} (column {exc.col})", lineno) from exc
            else:
                parsed = _parse_literal(content, lineno)
            sheet.set(col, row, Cell(parsed, hidden=hidden, locked=locked))
        else:
            raise SgwError(f"unknown directive {keyword!r}", lineno)
    workbook.validate()
    return workbook


def _flags_token(cell: Cell) -> str:
    token = ("h" if cell.hidden else "") + ("l" if cell.locked else "")
    return token or "-"


def cell_content_text(cell: Cell) -> str:
    if cell.is_formula:
        return print_formula_canonical(cell.content)  # type: ignore[arg-type]
    return literal_text(cell.content)  # type: ignore[arg-type]


def print_workbook(workbook: Workbook) -> str:
    """Deterministic document: sheets in order, cells sorted by (row, col)."""
    out = ["sgw 1"]
    for sheet in workbook.sheets:
        out.append(f"sheet {sheet.name}")
        for (col, row), cell in sheet.sorted_items():
            out.append(f"cell {format_a1(col, row)} {_flags_token(cell)} {cell_content_text(cell)}")
    return "\n".join(out) + "\n"


def load_workbook(path: str | Path) -> Workbook:
    path = Path(path)
    return parse_workbook(path.read_text(encoding="utf-8"), name=path.stem)


def save_workbook(workbook: Workbook, path: str | Path) -> None:
    Path(path).write_text(print_workbook(workbook), encoding="utf-8")
