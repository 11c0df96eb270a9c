"""Small builders shared across the test suite."""

from __future__ import annotations

from sheetguard.formula import parse_formula
from sheetguard.model import Addr, Cell, Sheet, Workbook, parse_addr


def book(cells: dict[str, object], name: str = "book") -> Workbook:
    """Build a workbook from {"Main!B1": 1000, "Main!B3": "=B1*0.2"}.

    String values starting with '=' become formulas, other strings text
    literals.  A (value, flags) tuple sets flags: "h" hidden, "l" locked.
    """
    workbook = Workbook(name=name)
    for text, spec in cells.items():
        addr = parse_addr(text)
        sheet = workbook.sheet(addr.sheet)
        if sheet is None:
            sheet = Sheet(addr.sheet)
            workbook.sheets.append(sheet)
        flags = ""
        value = spec
        if isinstance(spec, tuple):
            value, flags = spec
        if isinstance(value, str) and value.startswith("="):
            content = parse_formula(value)
        elif isinstance(value, bool):
            content = value
        elif isinstance(value, (int, float)):
            content = float(value)
        else:
            content = value
        sheet.set(addr.col, addr.row, Cell(content, hidden="h" in flags, locked="l" in flags))
    workbook.validate()
    return workbook


def addr(text: str) -> Addr:
    return parse_addr(text)


def addrs(*texts: str) -> list[Addr]:
    return [parse_addr(t) for t in texts]
