"""Random workbook corpus and fraud/seal mutators shared by the test suite."""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from sheetguard.formula import (
    Binary,
    Call,
    Expr,
    Number,
    Range,
    Ref,
    Unary,
    col_to_letters,
    parse_formula,
)
from sheetguard.guard import INPUT, LABEL, RoleMap
from sheetguard.intervals import Interval
from sheetguard.model import Addr, Cell, Sheet, Workbook


@dataclass
class Run:
    sheet: str
    col: int
    rows: list[int]
    kind: str  # "scaled" carries a literal, "agg" carries a range


@dataclass
class GenBook:
    workbook: Workbook
    runs: list[Run] = field(default_factory=list)
    inputs: list[Addr] = field(default_factory=list)


def _c(col: int) -> str:
    return col_to_letters(col)


def random_workbook(rng: random.Random, two_sheets: bool | None = None) -> GenBook:
    gen = GenBook(Workbook(name="gen"))
    if two_sheets is None:
        two_sheets = rng.random() < 0.3
    for name in ["Main", "Aux"][: 2 if two_sheets else 1]:
        sheet = Sheet(name)
        gen.workbook.sheets.append(sheet)
        n_rows = rng.randint(6, 12)
        data_cols = rng.randint(2, 3)
        first, last = 2, 2 + n_rows - 1
        for col in range(1, data_cols + 1):
            sheet.set(col, 1, Cell(f"col{col}"))
        for row in range(first, last + 1):
            for col in range(1, data_cols + 1):
                value = round(rng.uniform(-50.0, 100.0), 2)
                sheet.set(col, row, Cell(float(value)))
                gen.inputs.append(Addr(name, col, row))

        rows = list(range(first, last + 1))
        col = data_cols + 2
        scale = rng.choice([2, 3, 0.5, 1.5])
        offset = rng.choice([0, 1, 10])
        for row in rows:
            tail = f"+{offset}" if offset else ""
            sheet.set(col, row, Cell(parse_formula(f"=A{row}*{scale}{tail}")))
        gen.runs.append(Run(name, col, rows, "scaled"))
        scaled_col = col
        col += 1

        for row in rows:
            sheet.set(col, row, Cell(parse_formula(f"=SUM(A{row}:{_c(data_cols)}{row})")))
        gen.runs.append(Run(name, col, rows, "agg"))
        agg_col = col
        col += 1

        if rng.random() < 0.6:
            ref = f"{_c(scaled_col)}"
            for row in rows:
                sheet.set(col, row, Cell(parse_formula(f"=IF({ref}{row}>=0,{ref}{row},-{ref}{row})")))
            gen.runs.append(Run(name, col, rows, "if"))
            col += 1
        if rng.random() < 0.4:
            ref = f"{_c(agg_col)}"
            for row in rows:
                sheet.set(col, row, Cell(parse_formula(f"={ref}{row}^2")))
            gen.runs.append(Run(name, col, rows, "pow"))
            col += 1

        total_row = last + 2
        for run_col in range(data_cols + 2, col):
            sheet.set(
                run_col,
                total_row,
                Cell(parse_formula(f"=SUM({_c(run_col)}{first}:{_c(run_col)}{last})")),
            )
        stats_row = total_row + 1
        sheet.set(1, stats_row, Cell(parse_formula(f"=MIN(A{first}:A{last})")))
        sheet.set(2, stats_row, Cell(parse_formula(f"=MAX(A{first}:A{last})")))
        sheet.set(3, stats_row, Cell(parse_formula(f"=COUNT(A{first}:{_c(data_cols)}{last})")))
        sheet.set(4, stats_row, Cell(parse_formula(f"=AVERAGE(A{first}:A{last})")))
        sheet.set(
            5,
            stats_row,
            Cell(parse_formula(f"=ROUND({_c(data_cols + 2)}{total_row}/{n_rows},2)")),
        )
    if two_sheets:
        aux = gen.workbook.sheet("Aux")
        assert aux is not None
        aux.set(1, aux.max_row + 2, Cell(parse_formula("=Main!A2*0.5+Aux!A2")))
    return gen


# ---------------------------------------------------------------------------
# Fraud planting (mutations strictly inside copy runs, plus new hidden cells)

FRAUD_KINDS = ("const_tweak", "range_shorten", "overwrite_const", "hidden_external")


def _tweak_first_literal(node: Expr, delta: float) -> Expr | None:
    if isinstance(node, Number):
        return Number(node.value + delta)
    if isinstance(node, Unary):
        inner = _tweak_first_literal(node.operand, delta)
        return None if inner is None else Unary(node.op, inner)
    if isinstance(node, Binary):
        left = _tweak_first_literal(node.left, delta)
        if left is not None:
            return Binary(node.op, left, node.right)
        right = _tweak_first_literal(node.right, delta)
        return None if right is None else Binary(node.op, node.left, right)
    if isinstance(node, Call):
        for i, arg in enumerate(node.args):
            changed = _tweak_first_literal(arg, delta)
            if changed is not None:
                args = list(node.args)
                args[i] = changed
                return Call(node.func, tuple(args))
    return None


def _shorten_first_range(node: Expr) -> Expr | None:
    if isinstance(node, Range):
        start, end = node.start, node.end
        assert isinstance(start, Ref) and isinstance(end, Ref)
        if end.col > start.col:
            return Range(start, Ref(end.col - 1, end.row, end.col_abs, end.row_abs, end.sheet, end.book))
        if end.row > start.row:
            return Range(start, Ref(end.col, end.row - 1, end.col_abs, end.row_abs, end.sheet, end.book))
        return None
    if isinstance(node, Unary):
        inner = _shorten_first_range(node.operand)
        return None if inner is None else Unary(node.op, inner)
    if isinstance(node, Binary):
        left = _shorten_first_range(node.left)
        if left is not None:
            return Binary(node.op, left, node.right)
        right = _shorten_first_range(node.right)
        return None if right is None else Binary(node.op, node.left, right)
    if isinstance(node, Call):
        for i, arg in enumerate(node.args):
            changed = _shorten_first_range(arg)
            if changed is not None:
                args = list(node.args)
                args[i] = changed
                return Call(node.func, tuple(args))
    return None


def plant_fraud(rng: random.Random, gen: GenBook, kind: str) -> tuple[Workbook, Addr]:
    """Return a mutated copy and the cell where the fraud was planted."""
    workbook = gen.workbook.clone()
    if kind == "hidden_external":
        sheet = workbook.sheets[0]
        col = sheet.max_col + 2
        row = rng.randint(1, max(sheet.max_row, 1))
        sheet.set(col, row, Cell(parse_formula("=[Ext]X!A1"), hidden=True))
        return workbook, Addr(sheet.name, col, row)

    wanted = {"const_tweak": ("scaled", "pow"), "range_shorten": ("agg",), "overwrite_const": ("scaled", "agg", "if", "pow")}
    run = rng.choice([r for r in gen.runs if r.kind in wanted[kind]])
    row = rng.choice(run.rows[1:-1])  # strictly interior
    target = Addr(run.sheet, run.col, row)
    sheet = workbook.sheet(run.sheet)
    assert sheet is not None
    cell = sheet.cell(run.col, row)
    assert cell is not None and cell.is_formula

    if kind == "const_tweak":
        mutated = _tweak_first_literal(cell.content, delta=rng.uniform(1.0, 5.0))  # type: ignore[arg-type]
        assert mutated is not None
        sheet.set(run.col, row, Cell(mutated, cell.hidden, cell.locked))
    elif kind == "range_shorten":
        mutated = _shorten_first_range(cell.content)  # type: ignore[arg-type]
        assert mutated is not None
        sheet.set(run.col, row, Cell(mutated, cell.hidden, cell.locked))
    else:  # overwrite_const
        sheet.set(run.col, row, Cell(7.25, cell.hidden, cell.locked))
    return workbook, target


# ---------------------------------------------------------------------------
# Seal mutation corpus

SEAL_MUTATIONS = ("flag_toggle", "label_edit", "formula_edit", "overwrite", "delete", "add")


def mutate_sealed(rng: random.Random, workbook: Workbook, roles: RoleMap) -> tuple[Workbook, str]:
    """One random mutation of sealed content or flags (never an input value)."""
    mutated = workbook.clone()
    cells = list(workbook.iter_cells())
    kind = rng.choice(SEAL_MUTATIONS)

    if kind == "flag_toggle":
        addr, cell = rng.choice(cells)
        sheet = mutated.sheet(addr.sheet)
        assert sheet is not None
        if rng.random() < 0.5:
            sheet.set(addr.col, addr.row, Cell(cell.content, not cell.hidden, cell.locked))
        else:
            sheet.set(addr.col, addr.row, Cell(cell.content, cell.hidden, not cell.locked))
        return mutated, f"flag toggle at {addr}"
    if kind == "label_edit":
        labels = [a for a, _ in cells if roles.of(a) == LABEL]
        if not labels:
            return mutate_sealed(rng, workbook, roles)
        addr = rng.choice(labels)
        sheet = mutated.sheet(addr.sheet)
        assert sheet is not None
        old = sheet.cell(addr.col, addr.row)
        assert old is not None
        sheet.set(addr.col, addr.row, Cell("tampered", old.hidden, old.locked))
        return mutated, f"label edit at {addr}"
    if kind in ("formula_edit", "overwrite"):
        formulas = [(a, c) for a, c in cells if c.is_formula]
        addr, cell = rng.choice(formulas)
        sheet = mutated.sheet(addr.sheet)
        assert sheet is not None
        if kind == "formula_edit":
            changed = _tweak_first_literal(cell.content, delta=1.5)  # type: ignore[arg-type]
            if changed is None:
                changed = Binary("*", cell.content, Number(2.0))  # type: ignore[arg-type]
            sheet.set(addr.col, addr.row, Cell(changed, cell.hidden, cell.locked))
            return mutated, f"formula edit at {addr}"
        sheet.set(addr.col, addr.row, Cell(3.5, cell.hidden, cell.locked))
        return mutated, f"formula overwritten at {addr}"
    if kind == "delete":
        addr, _ = rng.choice(cells)
        sheet = mutated.sheet(addr.sheet)
        assert sheet is not None
        del sheet.cells[(addr.col, addr.row)]
        return mutated, f"deleted {addr}"
    sheet = mutated.sheets[rng.randrange(len(mutated.sheets))]
    col = sheet.max_col + 1 + rng.randint(0, 2)
    row = rng.randint(1, sheet.max_row + 2)
    content = 1.25 if rng.random() < 0.5 else parse_formula("=A1*4")
    sheet.set(col, row, Cell(content, hidden=rng.random() < 0.3))
    return mutated, f"added cell at {sheet.name}!{_c(col)}{row}"


def mutate_input_value(rng: random.Random, workbook: Workbook, roles: RoleMap) -> Workbook:
    """Change one input cell's numeric value; the seal must not notice."""
    inputs = [a for a in roles.cells_with(INPUT)]
    addr = rng.choice(inputs)
    mutated = workbook.clone()
    sheet = mutated.sheet(addr.sheet)
    assert sheet is not None
    old = sheet.cell(addr.col, addr.row)
    assert old is not None and not old.is_formula
    value = old.content
    new_value = (float(value) if isinstance(value, (int, float)) and not isinstance(value, bool) else 0.0) + rng.uniform(0.5, 100.0)
    sheet.set(addr.col, addr.row, Cell(new_value, old.hidden, old.locked))
    return mutated


# ---------------------------------------------------------------------------
# Interval assertions over generated inputs


def random_assertions(rng: random.Random, gen: GenBook, fraction: float = 0.6) -> dict[Addr, Interval]:
    assertions: dict[Addr, Interval] = {}
    for addr in gen.inputs:
        if rng.random() > fraction:
            continue
        cell = gen.workbook.cell(addr)
        assert cell is not None
        value = float(cell.content)  # type: ignore[arg-type]
        lo = value - abs(rng.gauss(0, 5)) - rng.random()
        hi = value + abs(rng.gauss(0, 5)) + rng.random()
        assertions[addr] = Interval(lo, hi)
    return assertions
