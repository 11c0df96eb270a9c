"""Cell dataflow graph: construction, cycle detection, evaluation, traversals.

Evaluation semantics kept deliberately small:
  - empty cells referenced in arithmetic or aggregation contribute 0
  - text or booleans in arithmetic produce Error(VALUE)
  - any error operand wins (cycle taint first, then leftmost operand)
  - non-finite results normalize to Error(DIV0); the value domain stays closed
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

from .formula import (
    AGGREGATES,
    Binary,
    Boolean,
    Call,
    Expr,
    Number,
    Range,
    Ref,
    Text,
    Unary,
    walk_refs,
)
from .model import Addr, Cell, Workbook

DIV0 = "DIV0"
CYCLE = "CYCLE"
VALUE = "VALUE"
EXT = "EXT"
REF = "REF"


@dataclass(frozen=True)
class CellError:
    code: str

    def __str__(self) -> str:
        return f"#{self.code}"


Value = float | str | bool | CellError

_DIV0 = CellError(DIV0)
_CYCLE = CellError(CYCLE)
_VALUE = CellError(VALUE)
_EXT = CellError(EXT)
_REF = CellError(REF)


@dataclass
class FlowGraph:
    nodes: set[Addr] = field(default_factory=set)
    edges: set[tuple[Addr, Addr]] = field(default_factory=set)
    precedents_of: dict[Addr, list[Addr]] = field(default_factory=dict)
    dependents_of: dict[Addr, list[Addr]] = field(default_factory=dict)
    topo_order: list[Addr] = field(default_factory=list)
    cycles: list[frozenset[Addr]] = field(default_factory=list)
    cyclic: frozenset[Addr] = frozenset()
    external_books: dict[Addr, list[str]] = field(default_factory=dict)
    ref_errors: set[Addr] = field(default_factory=set)
    order_index: dict[Addr, int] = field(default_factory=dict)


def resolve_ref(ref: Ref, host: Addr) -> Addr:
    return Addr(ref.sheet or host.sheet, ref.col, ref.row)


def range_addrs(rng: Range, host: Addr) -> list[Addr]:
    """Covered cells, rows ascending then columns (evaluation order matters)."""
    start, end = rng.start, rng.end
    assert isinstance(start, Ref) and isinstance(end, Ref)
    sheet = start.sheet or host.sheet
    lo_col, hi_col = sorted((start.col, end.col))
    lo_row, hi_row = sorted((start.row, end.row))
    return [
        Addr(sheet, col, row)
        for row in range(lo_row, hi_row + 1)
        for col in range(lo_col, hi_col + 1)
    ]


def build_flow_graph(workbook: Workbook) -> FlowGraph:
    graph = FlowGraph()
    sheet_names = {sheet.name for sheet in workbook.sheets}
    key = workbook.addr_key

    for addr, cell in workbook.iter_cells():
        graph.nodes.add(addr)

    for addr, cell in workbook.iter_cells():
        if not cell.is_formula:
            continue
        for node in walk_refs(cell.content):  # type: ignore[arg-type]
            first = node.start if isinstance(node, Range) else node
            assert isinstance(first, Ref)
            if first.book is not None:
                graph.external_books.setdefault(addr, [])
                if first.book not in graph.external_books[addr]:
                    graph.external_books[addr].append(first.book)
                continue
            sheet = first.sheet or addr.sheet
            if sheet not in sheet_names:
                graph.ref_errors.add(addr)
                continue
            targets = range_addrs(node, addr) if isinstance(node, Range) else [resolve_ref(node, addr)]
            for target in targets:
                graph.nodes.add(target)
                graph.edges.add((target, addr))

    preds: dict[Addr, set[Addr]] = {n: set() for n in graph.nodes}
    deps: dict[Addr, set[Addr]] = {n: set() for n in graph.nodes}
    for p, d in graph.edges:
        preds[d].add(p)
        deps[p].add(d)
    graph.precedents_of = {n: sorted(ps, key=key) for n, ps in preds.items()}
    graph.dependents_of = {n: sorted(ds, key=key) for n, ds in deps.items()}

    graph.cycles = _strongly_connected(graph, key)
    graph.cyclic = frozenset().union(*graph.cycles) if graph.cycles else frozenset()
    graph.topo_order = _topo_sort(graph, key)
    graph.order_index = {addr: i for i, addr in enumerate(graph.topo_order)}
    for addr in sorted(graph.cyclic, key=key):
        graph.order_index[addr] = len(graph.order_index)
    return graph


def _strongly_connected(graph: FlowGraph, key) -> list[frozenset[Addr]]:
    """Iterative Tarjan; keeps components of size >= 2 and self-loops."""
    index: dict[Addr, int] = {}
    low: dict[Addr, int] = {}
    on_stack: set[Addr] = set()
    stack: list[Addr] = []
    out: list[frozenset[Addr]] = []
    counter = 0

    for root in sorted(graph.nodes, key=key):
        if root in index:
            continue
        work: list[tuple[Addr, int]] = [(root, 0)]
        while work:
            node, child_i = work.pop()
            if child_i == 0:
                index[node] = low[node] = counter
                counter += 1
                stack.append(node)
                on_stack.add(node)
            children = graph.dependents_of.get(node, [])
            advanced = False
            for i in range(child_i, len(children)):
                child = children[i]
                if child not in index:
                    work.append((node, i + 1))
                    work.append((child, 0))
                    advanced = True
                    break
                if child in on_stack:
                    low[node] = min(low[node], index[child])
            if advanced:
                continue
            if low[node] == index[node]:
                component = []
                while True:
                    member = stack.pop()
                    on_stack.discard(member)
                    component.append(member)
                    if member == node:
                        break
                if len(component) > 1 or (node, node) in graph.edges:
                    out.append(frozenset(component))
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[node])
    out.sort(key=lambda comp: min(key(a) for a in comp))
    return out


def _topo_sort(graph: FlowGraph, key) -> list[Addr]:
    """Kahn over the acyclic part, smallest address first for determinism."""
    acyclic = graph.nodes - graph.cyclic
    indegree = {
        n: sum(1 for p in graph.precedents_of.get(n, []) if p in acyclic) for n in acyclic
    }
    ready = [key(n) + (n,) for n, deg in indegree.items() if deg == 0]
    heapq.heapify(ready)
    order: list[Addr] = []
    while ready:
        node = heapq.heappop(ready)[-1]
        order.append(node)
        for dep in graph.dependents_of.get(node, []):
            if dep not in acyclic:
                continue
            indegree[dep] -= 1
            if indegree[dep] == 0:
                heapq.heappush(ready, key(dep) + (dep,))
    return order


# ---------------------------------------------------------------------------
# Numeric kernels (shared with the interval evaluator so both round identically)


def round_half_away(x: float, digits: float) -> float:
    n = int(digits)  # truncate toward zero
    p = 10.0 ** n
    scaled = x * p
    r = math.copysign(math.floor(abs(scaled) + 0.5), scaled)
    return r / p


def power(base: float, exponent: float) -> float:
    """Integral exponents in [0, 1024] use repeated multiplication; see intervals."""
    if float(exponent).is_integer() and 0 <= exponent <= 1024:
        acc = 1.0
        for _ in range(int(exponent)):
            acc *= base
        return acc
    result = base ** exponent
    if isinstance(result, complex):
        return float("nan")
    return result


# ---------------------------------------------------------------------------
# Evaluation


def _finite(x: float) -> Value:
    return x if math.isfinite(x) else _DIV0


def _is_number(v: Value) -> bool:
    return isinstance(v, float) and not isinstance(v, bool)


def _compare(op: str, left: Value, right: Value) -> Value:
    if _is_number(left) and _is_number(right):
        pass
    elif op in ("=", "<>"):
        if type(left) is not type(right):
            return op == "<>"
    else:
        return _VALUE
    if op == "=":
        return left == right
    if op == "<>":
        return left != right
    if op == "<":
        return left < right
    if op == "<=":
        return left <= right
    if op == ">":
        return left > right
    if op == ">=":
        return left >= right
    raise ValueError(f"unknown comparison {op!r}")


class _Evaluator:
    def __init__(self, workbook: Workbook, graph: FlowGraph):
        self.workbook = workbook
        self.graph = graph
        self.values: dict[Addr, Value] = {}

    def run(self) -> dict[Addr, Value]:
        for addr in self._cycle_tainted():
            self.values[addr] = _CYCLE
        for addr in self.graph.topo_order:
            if addr in self.values:
                continue
            cell = self.workbook.cell(addr)
            if cell is None:
                self.values[addr] = 0.0
            elif cell.is_formula:
                self.values[addr] = self.eval_expr(cell.content, addr)  # type: ignore[arg-type]
            else:
                value = cell.content
                self.values[addr] = float(value) if isinstance(value, (int, float)) and not isinstance(value, bool) else value
        return self.values

    def _cycle_tainted(self) -> set[Addr]:
        # Error(CYCLE) reaches exactly the cells on or downstream of a cycle.
        tainted = set(self.graph.cyclic)
        frontier = list(tainted)
        while frontier:
            node = frontier.pop()
            for dep in self.graph.dependents_of.get(node, []):
                if dep not in tainted:
                    tainted.add(dep)
                    frontier.append(dep)
        return tainted

    def _ref_value(self, ref: Ref, host: Addr) -> Value:
        if ref.book is not None:
            return _EXT
        sheet = ref.sheet or host.sheet
        if self.workbook.sheet(sheet) is None:
            return _REF
        return self.values.get(Addr(sheet, ref.col, ref.row), 0.0)

    def eval_expr(self, node: Expr, host: Addr) -> Value:
        if isinstance(node, Number):
            return node.value
        if isinstance(node, Text):
            return node.value
        if isinstance(node, Boolean):
            return node.value
        if isinstance(node, Ref):
            return self._ref_value(node, host)
        if isinstance(node, Range):
            return _VALUE  # a bare range is not a scalar
        if isinstance(node, Unary):
            operand = self.eval_expr(node.operand, host)
            if isinstance(operand, CellError):
                return operand
            if not _is_number(operand):
                return _VALUE
            return _finite(-operand)
        if isinstance(node, Binary):
            return self._eval_binary(node, host)
        if isinstance(node, Call):
            return self._eval_call(node, host)
        raise TypeError(f"cannot evaluate {node!r}")

    def _eval_binary(self, node: Binary, host: Addr) -> Value:
        left = self.eval_expr(node.left, host)
        right = self.eval_expr(node.right, host)
        if isinstance(left, CellError):
            return left
        if isinstance(right, CellError):
            return right
        if node.op in ("+", "-", "*", "/", "^"):
            if not (_is_number(left) and _is_number(right)):
                return _VALUE
            if node.op == "+":
                return _finite(left + right)
            if node.op == "-":
                return _finite(left - right)
            if node.op == "*":
                return _finite(left * right)
            if node.op == "/":
                if right == 0:
                    return _DIV0
                return _finite(left / right)
            try:
                return _finite(power(left, right))
            except (OverflowError, ValueError):
                return _DIV0
        return _compare(node.op, left, right)

    def _agg_items(self, args: tuple[Expr, ...], host: Addr) -> list[tuple[Value, bool]]:
        """(value, cell_is_empty) pairs in argument order; ranges row-major."""
        items: list[tuple[Value, bool]] = []
        for arg in args:
            if isinstance(arg, Range):
                first = arg.start
                assert isinstance(first, Ref)
                if first.book is not None:
                    items.append((_EXT, False))
                    continue
                sheet = first.sheet or host.sheet
                if self.workbook.sheet(sheet) is None:
                    items.append((_REF, False))
                    continue
                for addr in range_addrs(arg, host):
                    empty = self.workbook.cell(addr) is None
                    items.append((self.values.get(addr, 0.0), empty))
            else:
                items.append((self.eval_expr(arg, host), False))
        return items

    def _eval_call(self, node: Call, host: Addr) -> Value:
        if node.func in AGGREGATES:
            items = self._agg_items(node.args, host)
            for value, _ in items:
                if isinstance(value, CellError):
                    return value
            if node.func == "COUNT":
                return float(sum(1 for value, empty in items if not empty and _is_number(value)))
            numbers: list[float] = []
            for value, empty in items:
                if empty:
                    numbers.append(0.0)
                elif _is_number(value):
                    numbers.append(value)
                else:
                    return _VALUE
            if node.func == "MIN":
                return _finite(min(numbers))
            if node.func == "MAX":
                return _finite(max(numbers))
            total = 0.0
            for x in numbers:
                total += x
                if not math.isfinite(total):
                    return _DIV0
            if node.func == "SUM":
                return _finite(total)
            return _finite(total / len(numbers))  # AVERAGE
        args = [self.eval_expr(a, host) for a in node.args]
        for value in args:
            if isinstance(value, CellError):
                return value
        if node.func == "ABS":
            if not _is_number(args[0]):
                return _VALUE
            return _finite(abs(args[0]))
        if node.func == "ROUND":
            if not (_is_number(args[0]) and _is_number(args[1])):
                return _VALUE
            if abs(args[1]) > 308:
                return _DIV0
            return _finite(round_half_away(args[0], args[1]))
        if node.func == "IF":
            if not isinstance(args[0], bool):
                return _VALUE
            return args[1] if args[0] else args[2]
        raise ValueError(f"unknown function {node.func!r}")


def evaluate(workbook: Workbook, graph: FlowGraph) -> dict[Addr, Value]:
    """Value of every graph node; pure in the workbook, deterministic."""
    return _Evaluator(workbook, graph).run()


# ---------------------------------------------------------------------------
# Traversal queries


def _reachable(graph: FlowGraph, start: Addr, adjacency: dict[Addr, list[Addr]]) -> set[Addr]:
    seen: set[Addr] = set()
    frontier = list(adjacency.get(start, []))
    while frontier:
        node = frontier.pop()
        if node in seen:
            continue
        seen.add(node)
        frontier.extend(adjacency.get(node, []))
    return seen


def precedents(graph: FlowGraph, cell: Addr, transitive: bool = False) -> list[Addr]:
    """Cells feeding `cell`, ordered against the flow (reverse-topologically)."""
    if cell not in graph.nodes:
        raise ValueError(f"unknown cell {cell}")
    found = _reachable(graph, cell, graph.precedents_of) if transitive else set(graph.precedents_of.get(cell, []))
    return sorted(found, key=lambda a: -graph.order_index[a])


def dependents(graph: FlowGraph, cell: Addr, transitive: bool = False) -> list[Addr]:
    """Cells fed by `cell`, ordered along the flow (topologically)."""
    if cell not in graph.nodes:
        raise ValueError(f"unknown cell {cell}")
    found = _reachable(graph, cell, graph.dependents_of) if transitive else set(graph.dependents_of.get(cell, []))
    return sorted(found, key=lambda a: graph.order_index[a])
