"""Code/data separation and tamper-evident sealing.

The sealed "program portion" is everything except input values: formulas,
labels, flags, and the positions of input cells.  Its canonical serialization
is hashed with SHA-256; input values may vary without breaking the seal.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

from . import flow
from .flow import CellError, FlowGraph, Value
from .formula import Expr, parse_formula, print_formula_canonical, literal_text
from .model import Addr, Cell, ModelError, Sheet, Workbook

INPUT = "INPUT"
CODE = "CODE"
OUTPUT = "OUTPUT"
LABEL = "LABEL"
ROLES = (INPUT, CODE, OUTPUT, LABEL)

FRONT_SHEET = "Front"
TOOL_VERSION = "sheetguard 0.1.0"

MATCH = "MATCH"
MISMATCH = "MISMATCH"


class GuardError(ValueError):
    pass


@dataclass
class RoleMap:
    roles: dict[Addr, str] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)

    def of(self, addr: Addr) -> str | None:
        return self.roles.get(addr)

    def cells_with(self, role: str) -> list[Addr]:
        return [a for a, r in self.roles.items() if r == role]


def infer_roles(workbook: Workbook, graph: FlowGraph, overrides: dict[Addr, str] | None = None) -> RoleMap:
    """Referenced constants are inputs, terminal formulas are outputs."""
    result = RoleMap()
    for addr, cell in workbook.iter_cells():
        has_dependents = bool(graph.dependents_of.get(addr))
        if cell.is_formula:
            result.roles[addr] = CODE if has_dependents else OUTPUT
        else:
            result.roles[addr] = INPUT if has_dependents else LABEL
    for addr, role in (overrides or {}).items():
        cell = workbook.cell(addr)
        if cell is None:
            raise GuardError(f"role override on nonexistent cell {addr}")
        if role not in ROLES:
            raise GuardError(f"unknown role {role!r} for {addr}")
        if cell.is_formula and role in (INPUT, LABEL):
            raise GuardError(f"{addr} is a formula; role {role} needs a constant")
        if not cell.is_formula and role in (CODE, OUTPUT):
            raise GuardError(f"{addr} is a constant; role {role} needs a formula")
        result.roles[addr] = role
    if result.roles and not any(r == OUTPUT for r in result.roles.values()):
        result.warnings.append("workbook has no OUTPUT cell")
    return result


# ---------------------------------------------------------------------------
# Front-sheet separation


@dataclass
class SeparationReport:
    input_mapping: dict[Addr, Addr] = field(default_factory=dict)
    output_mapping: dict[Addr, Addr] = field(default_factory=dict)
    preserved: bool = True
    value_diffs: list[tuple[Addr, Value, Value]] = field(default_factory=list)


def _adjacent_label(workbook: Workbook, roles: RoleMap, addr: Addr) -> float | str | bool:
    """Left neighbour first, then the one above; fall back to the address text."""
    for neighbour in (Addr(addr.sheet, addr.col - 1, addr.row), Addr(addr.sheet, addr.col, addr.row - 1)):
        if neighbour.col < 1 or neighbour.row < 1:
            continue
        if roles.of(neighbour) == LABEL:
            cell = workbook.cell(neighbour)
            assert cell is not None and not cell.is_formula
            return cell.content  # type: ignore[return-value]
    return str(addr)


def bit_equal(a: Value, b: Value) -> bool:
    if isinstance(a, float) and isinstance(b, float) and not isinstance(a, bool) and not isinstance(b, bool):
        return struct.pack("<d", a) == struct.pack("<d", b)
    return type(a) is type(b) and a == b


def separate(workbook: Workbook, roles: RoleMap) -> tuple[Workbook, SeparationReport]:
    """Move input values to a generated front sheet; outputs get mirror references."""
    if workbook.sheet(FRONT_SHEET) is not None:
        raise GuardError(f"workbook already has a sheet named {FRONT_SHEET}")
    key = workbook.addr_key
    inputs = sorted(roles.cells_with(INPUT), key=key)
    outputs = sorted(roles.cells_with(OUTPUT), key=key)

    report = SeparationReport()
    front = Sheet(FRONT_SHEET)
    new_workbook = Workbook(workbook.name, [front] + [Sheet(s.name, dict(s.cells)) for s in workbook.sheets])

    row = 0
    for addr in inputs:
        row += 1
        cell = workbook.cell(addr)
        assert cell is not None
        front.set(1, row, Cell(_adjacent_label(workbook, roles, addr), locked=True))
        front.set(2, row, Cell(cell.content, locked=False))
        report.input_mapping[addr] = Addr(FRONT_SHEET, 2, row)
    row += 1  # blank separator row
    for addr in outputs:
        row += 1
        front.set(1, row, Cell(_adjacent_label(workbook, roles, addr), locked=True))
        front.set(2, row, Cell(parse_formula(f"={addr.sheet}!{addr.a1()}"), locked=True))
        report.output_mapping[addr] = Addr(FRONT_SHEET, 2, row)

    for sheet in new_workbook.sheets[1:]:
        for (col, row_i), cell in list(sheet.cells.items()):
            addr = Addr(sheet.name, col, row_i)
            if addr in report.input_mapping:
                front_addr = report.input_mapping[addr]
                content: Expr = parse_formula(f"={FRONT_SHEET}!{front_addr.a1()}")
                sheet.cells[(col, row_i)] = Cell(content, hidden=cell.hidden, locked=True)
            else:
                sheet.cells[(col, row_i)] = Cell(cell.content, hidden=cell.hidden, locked=True)

    before = flow.evaluate(workbook, flow.build_flow_graph(workbook))
    after = flow.evaluate(new_workbook, flow.build_flow_graph(new_workbook))
    for addr in outputs:
        old, new = before[addr], after[addr]
        if not bit_equal(old, new):
            report.preserved = False
            report.value_diffs.append((addr, old, new))
    return new_workbook, report


# ---------------------------------------------------------------------------
# Canonical serialization and sealing


def canonical_serialize_program(workbook: Workbook, roles: RoleMap) -> bytes:
    """Byte-exact program portion; input values are excluded, their positions kept."""
    lines = ["sgwseal 1"]
    sealed: list[tuple[str, int, int, Addr, Cell]] = []
    inputs: list[tuple[str, int, int, Addr, Cell]] = []
    for addr, cell in workbook.iter_cells():
        entry = (addr.sheet, addr.row, addr.col, addr, cell)
        if roles.of(addr) == INPUT:
            inputs.append(entry)
        else:
            sealed.append(entry)
    for _, _, _, addr, cell in sorted(sealed, key=lambda e: e[:3]):
        if cell.is_formula:
            kind, content = "F", print_formula_canonical(cell.content)  # type: ignore[arg-type]
        else:
            kind, content = "C", literal_text(cell.content)  # type: ignore[arg-type]
        lines.append(f"{addr}\t{kind}\t{content}\t{_flag_pair(cell)}")
    for _, _, _, addr, cell in sorted(inputs, key=lambda e: e[:3]):
        lines.append(f"{addr}\tI\t-\t{_flag_pair(cell)}")
    return ("\n".join(lines) + "\n").encode("utf-8")


def _flag_pair(cell: Cell) -> str:
    return ("h" if cell.hidden else ".") + ("l" if cell.locked else ".")


def serialize_roles(roles: RoleMap) -> bytes:
    lines = [f"{addr}\t{role}" for addr, role in sorted(roles.roles.items(), key=lambda kv: (kv[0].sheet, kv[0].row, kv[0].col))]
    return ("\n".join(lines) + "\n").encode("utf-8")


@dataclass(frozen=True)
class SealManifest:
    digest: str
    role_digest: str
    policy_digest: str
    created_at: str
    tool_version: str
    prev: str

    def to_json(self) -> dict[str, str]:
        return {
            "digest": self.digest,
            "role_digest": self.role_digest,
            "policy_digest": self.policy_digest,
            "created_at": self.created_at,
            "tool_version": self.tool_version,
            "prev": self.prev,
        }

    @staticmethod
    def from_json(data: dict) -> "SealManifest":
        try:
            return SealManifest(
                digest=data["digest"],
                role_digest=data["role_digest"],
                policy_digest=data["policy_digest"],
                created_at=data["created_at"],
                tool_version=data["tool_version"],
                prev=data["prev"],
            )
        except (KeyError, TypeError) as exc:
            raise GuardError(f"malformed seal manifest: {exc}") from exc


def seal(
    workbook: Workbook,
    roles: RoleMap,
    policy_digest: str = "-",
    prev: str = "-",
    created_at: str = "-",
) -> SealManifest:
    program = canonical_serialize_program(workbook, roles)
    return SealManifest(
        digest=hashlib.sha256(program).hexdigest(),
        role_digest=hashlib.sha256(serialize_roles(roles)).hexdigest(),
        policy_digest=policy_digest,
        created_at=created_at,
        tool_version=TOOL_VERSION,
        prev=prev,
    )


@dataclass
class VerifyResult:
    status: str
    expected_digest: str
    actual_digest: str
    diff: list[str] = field(default_factory=list)

    @property
    def matched(self) -> bool:
        return self.status == MATCH


def _line_key(line: str) -> str:
    return line.split("\t", 1)[0]


def diff_serializations(old: bytes, new: bytes) -> list[str]:
    """Cell-level diff between two canonical serializations."""
    old_lines = {_line_key(l): l for l in old.decode("utf-8").splitlines()[1:]}
    new_lines = {_line_key(l): l for l in new.decode("utf-8").splitlines()[1:]}
    out = []
    for cell in sorted(old_lines.keys() | new_lines.keys()):
        before, after = old_lines.get(cell), new_lines.get(cell)
        if before == after:
            continue
        if before is None:
            out.append(f"added {cell}")
        elif after is None:
            out.append(f"removed {cell}")
        else:
            out.append(f"changed {cell}")
    return out


def verify_seal(
    workbook: Workbook,
    roles: RoleMap,
    manifest: SealManifest,
    original_program: bytes | None = None,
) -> VerifyResult:
    program = canonical_serialize_program(workbook, roles)
    actual = hashlib.sha256(program).hexdigest()
    if actual == manifest.digest:
        return VerifyResult(MATCH, manifest.digest, actual)
    diff = diff_serializations(original_program, program) if original_program is not None else []
    return VerifyResult(MISMATCH, manifest.digest, actual, diff)


def program_digest(workbook: Workbook, overrides: dict[Addr, str] | None = None) -> str:
    """SHA-256 of the program portion under inferred (optionally overridden) roles."""
    graph = flow.build_flow_graph(workbook)
    roles = infer_roles(workbook, graph, overrides)
    return hashlib.sha256(canonical_serialize_program(workbook, roles)).hexdigest()


# ---------------------------------------------------------------------------
# Seal chain: newline-delimited manifest file


def append_seal_chain(path: str | Path, manifest: SealManifest) -> None:
    with open(path, "a", encoding="utf-8") as fh:
        fh.write(json.dumps(manifest.to_json(), sort_keys=True) + "\n")


def load_seal_chain(path: str | Path) -> list[SealManifest]:
    path = Path(path)
    if not path.exists():
        return []
    manifests = []
    for line in path.read_text(encoding="utf-8").splitlines():
        if line.strip():
            manifests.append(SealManifest.from_json(json.loads(line)))
    return manifests


def verify_chain(manifests: list[SealManifest]) -> bool:
    """Walking prev links from the newest visits manifests in reverse creation order."""
    expected = "-"
    for manifest in manifests:
        if manifest.prev != expected:
            return False
        expected = manifest.digest
    return True
