"""Logical areas: copy-equivalence partitions, irregularity scan, repeating blocks.

Formula cells are grouped by their copy-relative normalized form at three
levels (COPY, LOGICAL, STRUCTURAL); each level coarsens the previous one, so
the partitions form a refinement chain.  The anomaly scan walks the per-sheet
grid of area labels and flags interrupted runs, near clones, hidden formulas,
external references, and visible cells fed by hidden ones.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .formula import (
    COPY,
    LEVELS,
    LOGICAL,
    Expr,
    normalize_copy_relative,
    normalized_signature,
    reduce_to_level,
    subtree_contains,
)
from .flow import FlowGraph
from .model import Addr, Workbook

ROW_BREAK = "ROW_BREAK"
COL_BREAK = "COL_BREAK"
NEAR_CLONE = "NEAR_CLONE"
HIDDEN_FORMULA = "HIDDEN_FORMULA"
EXTERNAL_REF = "EXTERNAL_REF"
REF_TO_HIDDEN = "REF_TO_HIDDEN"

INFO = "INFO"
WARN = "WARN"
ALERT = "ALERT"


@dataclass(frozen=True)
class LogicalArea:
    id: int
    level: str
    signature: str
    members: frozenset[Addr]


@dataclass(frozen=True)
class Anomaly:
    kind: str
    cell: Addr
    severity: str
    context: str
    # Attachment hints for audit plans: the area whose regularity is broken,
    # and run cells usable as anchors when the focus cell itself has no area.
    area_hint: int | None = None
    anchor_cells: tuple[Addr, ...] = ()


@dataclass(frozen=True)
class SemanticClass:
    sheet: str
    block_height: int
    occurrences: tuple[int, ...]
    column_span: tuple[int, int]
    row_fingerprints: tuple[tuple[object, ...], ...]


def partition(workbook: Workbook, level: str = COPY) -> list[LogicalArea]:
    """Disjoint cover of all formula cells by their normalized form."""
    if level not in LEVELS:
        raise ValueError(f"unknown level {level!r}")
    groups: dict[str, list[Addr]] = {}
    for addr, cell in workbook.iter_cells():
        if not cell.is_formula:
            continue
        sig = normalized_signature(cell.content, (addr.col, addr.row), level)  # type: ignore[arg-type]
        groups.setdefault(sig, []).append(addr)
    key = workbook.addr_key
    ordered = sorted(groups.items(), key=lambda kv: key(min(kv[1], key=key)))
    return [
        LogicalArea(id=i, level=level, signature=sig, members=frozenset(members))
        for i, (sig, members) in enumerate(ordered, start=1)
    ]


def area_of(areas: list[LogicalArea]) -> dict[Addr, LogicalArea]:
    lookup: dict[Addr, LogicalArea] = {}
    for area in areas:
        for addr in area.members:
            lookup[addr] = area
    return lookup


_CONST = "CONST"
_EMPTY = "EMPTY"


def _label_grid(workbook: Workbook, sheet_name: str, lookup: dict[Addr, LogicalArea]):
    """Label of each grid position: an area id, CONST, or EMPTY."""
    sheet = workbook.sheet(sheet_name)
    assert sheet is not None
    max_col, max_row = sheet.max_col, sheet.max_row

    def label(col: int, row: int):
        cell = sheet.cell(col, row)
        if cell is None:
            return _EMPTY
        if not cell.is_formula:
            return _CONST
        return lookup[Addr(sheet_name, col, row)].id

    return label, max_col, max_row


def _scan_line(labels: list, positions: list[Addr], kind: str, areas_by_id: dict[int, LogicalArea], out: list[Anomaly]) -> None:
    """Flag interior cells that interrupt an otherwise uniform run of one area."""
    n = len(labels)
    for i in range(1, n - 1):
        before, here, after = labels[i - 1], labels[i], labels[i + 1]
        if before != after or before == here or not isinstance(before, int):
            continue
        run_len = 1  # the interrupted position itself
        j = i - 1
        anchors: list[Addr] = []
        while j >= 0 and labels[j] == before:
            anchors.append(positions[j])
            run_len += 1
            j -= 1
        j = i + 1
        while j < n and labels[j] == before:
            anchors.append(positions[j])
            run_len += 1
            j += 1
        if run_len < 3:
            continue
        area = areas_by_id[before]
        first, last = min(anchors), max(anchors)
        deviation = "constant" if here == _CONST else "empty" if here == _EMPTY else "a different formula"
        out.append(
            Anomaly(
                kind=kind,
                cell=positions[i],
                severity=ALERT,
                context=f"{positions[i]} is {deviation} inside the {first.a1()}..{last.a1()} run of {area.signature}",
                area_hint=area.id,
                anchor_cells=tuple(sorted(anchors)),
            )
        )


def detect_anomalies(workbook: Workbook, areas: list[LogicalArea], graph: FlowGraph) -> list[Anomaly]:
    if any(a.level != COPY for a in areas):
        raise ValueError("anomaly detection needs COPY-level areas")
    lookup = area_of(areas)
    areas_by_id = {a.id: a for a in areas}
    out: list[Anomaly] = []

    for sheet in workbook.sheets:
        label, max_col, max_row = _label_grid(workbook, sheet.name, lookup)
        for col in range(1, max_col + 1):
            labels = [label(col, row) for row in range(1, max_row + 1)]
            positions = [Addr(sheet.name, col, row) for row in range(1, max_row + 1)]
            _scan_line(labels, positions, COL_BREAK, areas_by_id, out)
        for row in range(1, max_row + 1):
            labels = [label(col, row) for col in range(1, max_col + 1)]
            positions = [Addr(sheet.name, col, row) for col in range(1, max_col + 1)]
            _scan_line(labels, positions, ROW_BREAK, areas_by_id, out)

    out.extend(_near_clones(workbook, areas, lookup))

    for addr, cell in workbook.iter_cells():
        if cell.is_formula and cell.hidden:
            out.append(
                Anomaly(HIDDEN_FORMULA, addr, WARN, f"{addr} holds a hidden formula", area_hint=lookup[addr].id)
            )
        books = graph.external_books.get(addr)
        if books:
            out.append(
                Anomaly(
                    EXTERNAL_REF,
                    addr,
                    ALERT,
                    f"{addr} references external book(s) {', '.join(sorted(books))}",
                    area_hint=lookup[addr].id if addr in lookup else None,
                )
            )
        if cell.is_formula and not cell.hidden:
            hidden_feeds = [
                p for p in graph.precedents_of.get(addr, [])
                if (pc := workbook.cell(p)) is not None and pc.hidden
            ]
            if hidden_feeds:
                names = ", ".join(str(p) for p in hidden_feeds)
                out.append(
                    Anomaly(REF_TO_HIDDEN, addr, WARN, f"{addr} depends on hidden cell(s) {names}", area_hint=lookup[addr].id)
                )

    key = workbook.addr_key
    out.sort(key=lambda a: (key(a.cell), a.kind))
    return out


def _near_clones(workbook: Workbook, areas: list[LogicalArea], lookup: dict[Addr, LogicalArea]) -> list[Anomaly]:
    """Singleton areas that almost match a neighbouring area of size >= 3.

    "Almost" means equal after blanking literals, or one logical form embedded
    in the other (a copied formula with an extra term tacked on).
    """
    out: list[Anomaly] = []
    logical_form: dict[int, Expr] = {}

    def form_for(area: LogicalArea) -> Expr:
        if area.id not in logical_form:
            addr = min(area.members)
            cell = workbook.cell(addr)
            assert cell is not None and cell.is_formula
            ast = normalize_copy_relative(cell.content, (addr.col, addr.row))  # type: ignore[arg-type]
            logical_form[area.id] = reduce_to_level(ast, LOGICAL)
        return logical_form[area.id]

    for area in areas:
        if len(area.members) != 1:
            continue
        addr = next(iter(area.members))
        own = form_for(area)
        neighbours = [
            Addr(addr.sheet, addr.col + dc, addr.row + dr)
            for dc, dr in ((0, -1), (0, 1), (-1, 0), (1, 0))
        ]
        seen: set[int] = set()
        for n_addr in neighbours:
            other = lookup.get(n_addr)
            if other is None or other.id == area.id or other.id in seen:
                continue
            seen.add(other.id)
            if len(other.members) < 3:
                continue
            theirs = form_for(other)
            if subtree_contains(own, theirs) or subtree_contains(theirs, own):
                out.append(
                    Anomaly(
                        NEAR_CLONE,
                        addr,
                        WARN,
                        f"{addr} is a lone variant of the {len(other.members)}-cell area {other.signature}",
                        area_hint=area.id,
                        anchor_cells=tuple(sorted(other.members)),
                    )
                )
                break
    return out


def detect_semantic_classes(workbook: Workbook, areas: list[LogicalArea]) -> list[SemanticClass]:
    """Repeated row-block patterns of area labels, per sheet.

    Candidate blocks with a periodic fingerprint are dropped (their shorter
    period is the real pattern); candidates whose rows are already explained
    by a stronger reported class are suppressed.
    """
    if any(a.level != COPY for a in areas):
        raise ValueError("semantic classes need COPY-level areas")
    lookup = area_of(areas)
    out: list[SemanticClass] = []

    for sheet in workbook.sheets:
        label, max_col, max_row = _label_grid(workbook, sheet.name, lookup)
        if max_row < 2:
            continue
        span = (1, max_col)
        rows = {
            r: tuple(label(c, r) for c in range(1, max_col + 1))
            for r in range(1, max_row + 1)
        }
        empty_row = tuple([_EMPTY] * max_col)

        candidates = []
        for height in range(1, max_row // 2 + 1):
            groups: dict[tuple, list[int]] = {}
            for start in range(1, max_row - height + 2):
                block = tuple(rows[r] for r in range(start, start + height))
                if all(fp == empty_row for fp in block):
                    continue
                if _is_periodic(block):
                    continue
                groups.setdefault(block, []).append(start)
            for block, starts in groups.items():
                chosen: list[int] = []
                for start in starts:  # earliest-first greedy maximizes the count
                    if not chosen or start >= chosen[-1] + height:
                        chosen.append(start)
                if len(chosen) >= 2:
                    candidates.append((height, tuple(chosen), block))

        candidates.sort(key=lambda c: (-c[0] * len(c[1]), -c[0], c[1]))
        covered: set[int] = set()
        kept = []
        for height, starts, block in candidates:
            rows_covered = {r for s in starts for r in range(s, s + height)}
            if rows_covered <= covered:
                continue
            covered |= rows_covered
            kept.append(SemanticClass(sheet.name, height, starts, span, block))
        kept.sort(key=lambda c: (-c.block_height, c.occurrences[0]))
        out.extend(kept)
    return out


def _is_periodic(block: tuple) -> bool:
    height = len(block)
    for period in range(1, height):
        if height % period == 0 and block == block[:period] * (height // period):
            return True
    return False
