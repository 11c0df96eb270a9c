"""Workbook data model: cells, sheets, addresses."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Iterator, NamedTuple

from .formula import Expr, format_a1, letters_to_col

SHEET_NAME_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")
_ADDR_RE = re.compile(r"^([A-Za-z_][A-Za-z0-9_]*)!\$?([A-Za-z]{1,4})\$?([1-9][0-9]{0,6})$")

Literal = float | str | bool


class ModelError(ValueError):
    pass


class Addr(NamedTuple):
    """Absolute cell address."""

    sheet: str
    col: int
    row: int

    def a1(self) -> str:
        return format_a1(self.col, self.row)

    def __str__(self) -> str:
        return f"{self.sheet}!{self.a1()}"


def parse_addr(text: str) -> Addr:
    m = _ADDR_RE.match(text.strip())
    if not m:
        raise ModelError(f"bad cell address {text!r} (want Sheet!A1)")
    return Addr(m.group(1), letters_to_col(m.group(2)), int(m.group(3)))


@dataclass(frozen=True)
class Cell:
    """Non-empty cell: a constant literal or a formula AST, plus flags."""

    content: Literal | Expr
    hidden: bool = False
    locked: bool = False

    @property
    def is_formula(self) -> bool:
        return isinstance(self.content, Expr)


@dataclass
class Sheet:
    name: str
    cells: dict[tuple[int, int], Cell] = field(default_factory=dict)

    def cell(self, col: int, row: int) -> Cell | None:
        return self.cells.get((col, row))

    def set(self, col: int, row: int, cell: Cell) -> None:
        if col < 1 or row < 1:
            raise ModelError(f"cell coordinates must be >= 1, got ({col}, {row})")
        self.cells[(col, row)] = cell

    def sorted_items(self) -> list[tuple[tuple[int, int], Cell]]:
        return sorted(self.cells.items(), key=lambda kv: (kv[0][1], kv[0][0]))

    @property
    def max_row(self) -> int:
        return max((row for _, row in self.cells), default=0)

    @property
    def max_col(self) -> int:
        return max((col for col, _ in self.cells), default=0)


@dataclass(eq=False)
class Workbook:
    name: str = "book"
    sheets: list[Sheet] = field(default_factory=list)

    def __eq__(self, other: object) -> bool:
        # Structural equality: the name is presentation, not content.
        if not isinstance(other, Workbook):
            return NotImplemented
        return self.sheets == other.sheets

    def validate(self) -> None:
        seen: set[str] = set()
        for sheet in self.sheets:
            if not SHEET_NAME_RE.match(sheet.name):
                raise ModelError(f"bad sheet name {sheet.name!r}")
            if sheet.name in seen:
                raise ModelError(f"duplicate sheet {sheet.name}")
            seen.add(sheet.name)
            for (col, row), cell in sheet.cells.items():
                if col < 1 or row < 1:
                    raise ModelError(f"bad coordinates ({col}, {row}) on sheet {sheet.name}")
                value = cell.content
                if isinstance(value, float) and not math.isfinite(value):
                    raise ModelError(f"non-finite constant at {Addr(sheet.name, col, row)}")

    def sheet(self, name: str) -> Sheet | None:
        for sheet in self.sheets:
            if sheet.name == name:
                return sheet
        return None

    @property
    def sheet_order(self) -> dict[str, int]:
        return {sheet.name: i for i, sheet in enumerate(self.sheets)}

    def cell(self, addr: Addr) -> Cell | None:
        sheet = self.sheet(addr.sheet)
        return sheet.cell(addr.col, addr.row) if sheet else None

    def iter_cells(self) -> Iterator[tuple[Addr, Cell]]:
        """All non-empty cells in (sheet order, row, col) order."""
        for sheet in self.sheets:
            for (col, row), cell in sheet.sorted_items():
                yield Addr(sheet.name, col, row), cell

    def addr_key(self, addr: Addr) -> tuple[int, int, int]:
        order = self.sheet_order
        return (order.get(addr.sheet, len(self.sheets)), addr.row, addr.col)

    def clone(self) -> "Workbook":
        # Cells are immutable, so sharing them is safe.
        return Workbook(self.name, [Sheet(s.name, dict(s.cells)) for s in self.sheets])
