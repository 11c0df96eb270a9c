"""Interval assertion layer: expected ranges, forward propagation, verdicts.

Propagation mirrors the concrete evaluator operation for operation, applying
each numeric kernel to interval endpoints.  Because IEEE round-to-nearest
arithmetic is monotone in each operand, endpoint results bound every value
the concrete evaluator can produce from operands inside the intervals; no
extra outward rounding is needed, and point inputs stay points.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

from . import flow
from .flow import CellError, FlowGraph, Value, range_addrs
from .formula import (
    Binary,
    Boolean,
    Call,
    Expr,
    Number,
    Range,
    Ref,
    Text,
    Unary,
)
from .model import Addr, ModelError, Workbook, parse_addr

SAFE = "SAFE"
BORDERLINE = "BORDERLINE"
RANGE_VIOLATION = "RANGE_VIOLATION"
ACTUAL_OUT = "ACTUAL_OUT"
INDETERMINATE = "INDETERMINATE"

_INF = float("inf")


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float

    @property
    def is_top(self) -> bool:
        return not (math.isfinite(self.lo) and math.isfinite(self.hi))

    def __str__(self) -> str:
        return "TOP" if self.is_top else f"[{self.lo}, {self.hi}]"


TOP = Interval(-_INF, _INF)


def make(lo: float, hi: float) -> Interval:
    if not (math.isfinite(lo) and math.isfinite(hi)):
        return TOP
    if lo > hi:
        raise ValueError(f"empty interval [{lo}, {hi}]")
    return Interval(lo, hi)


def point(value: float) -> Interval:
    return make(value, value)


def hull(a: Interval, b: Interval) -> Interval:
    if a.is_top or b.is_top:
        return TOP
    return make(min(a.lo, b.lo), max(a.hi, b.hi))


def contains(outer: Interval, value: float) -> bool:
    return outer.lo <= value <= outer.hi


# ---------------------------------------------------------------------------
# Endpoint arithmetic (TOP absorbs; non-finite endpoints promote to TOP)


def _binop(a: Interval, b: Interval, candidates) -> Interval:
    if a.is_top or b.is_top:
        return TOP
    values = candidates(a, b)
    lo, hi = min(values), max(values)
    if not (math.isfinite(lo) and math.isfinite(hi)):
        return TOP
    return Interval(lo, hi)


def i_add(a: Interval, b: Interval) -> Interval:
    return _binop(a, b, lambda a, b: (a.lo + b.lo, a.hi + b.hi))


def i_sub(a: Interval, b: Interval) -> Interval:
    return _binop(a, b, lambda a, b: (a.lo - b.hi, a.hi - b.lo))


def i_neg(a: Interval) -> Interval:
    if a.is_top:
        return TOP
    return Interval(-a.hi, -a.lo)


def i_mul(a: Interval, b: Interval) -> Interval:
    return _binop(a, b, lambda a, b: (a.lo * b.lo, a.lo * b.hi, a.hi * b.lo, a.hi * b.hi))


def i_div(a: Interval, b: Interval) -> Interval:
    if a.is_top or b.is_top or (b.lo <= 0 <= b.hi):
        return TOP
    return _binop(a, b, lambda a, b: (a.lo / b.lo, a.lo / b.hi, a.hi / b.lo, a.hi / b.hi))


def i_abs(a: Interval) -> Interval:
    if a.is_top:
        return TOP
    if a.lo <= 0 <= a.hi:
        return Interval(0.0, max(abs(a.lo), abs(a.hi)))
    lo, hi = abs(a.lo), abs(a.hi)
    return Interval(min(lo, hi), max(lo, hi))


def i_pow(base: Interval, exponent: float) -> Interval:
    """Non-negative integral literal exponents only; mirrors flow.power."""
    if base.is_top or not float(exponent).is_integer() or not (0 <= exponent <= 1024):
        return TOP
    k = int(exponent)
    lo_k, hi_k = flow.power(base.lo, k), flow.power(base.hi, k)
    if k % 2 == 1 or base.lo >= 0:
        lo, hi = lo_k, hi_k
    elif base.hi <= 0:
        lo, hi = hi_k, lo_k
    else:
        lo, hi = 0.0, max(lo_k, hi_k)
    if not (math.isfinite(lo) and math.isfinite(hi)):
        return TOP
    return Interval(lo, hi)


def i_round(a: Interval, digits: Interval) -> Interval:
    if a.is_top or digits.is_top or digits.lo != digits.hi:
        return TOP
    n = digits.lo
    if abs(n) > 308:
        return TOP
    lo = flow.round_half_away(a.lo, n)
    hi = flow.round_half_away(a.hi, n)
    if not (math.isfinite(lo) and math.isfinite(hi)):
        return TOP
    return Interval(lo, hi)


def i_sum(items: list[Interval]) -> Interval:
    lo = hi = 0.0
    for item in items:  # same accumulation order as the concrete SUM
        if item.is_top:
            return TOP
        lo += item.lo
        hi += item.hi
        if not (math.isfinite(lo) and math.isfinite(hi)):
            return TOP
    return Interval(lo, hi)


def i_min(items: list[Interval]) -> Interval:
    if any(item.is_top for item in items):
        return TOP
    return Interval(min(i.lo for i in items), min(i.hi for i in items))


def i_max(items: list[Interval]) -> Interval:
    if any(item.is_top for item in items):
        return TOP
    return Interval(max(i.lo for i in items), max(i.hi for i in items))


# ---------------------------------------------------------------------------
# Policy files: `assert Sheet!A1 in [lo, hi]` and `role Sheet!A1 input`


class PolicyError(ValueError):
    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


_ASSERT_RE = re.compile(r"^assert\s+(\S+)\s+in\s+\[([^,\]]+),([^\]]+)\]$")
_ROLE_RE = re.compile(r"^role\s+(\S+)\s+(input|code|output|label)$")


def parse_policy(text: str) -> tuple[dict[Addr, Interval], dict[Addr, str]]:
    assertions: dict[Addr, Interval] = {}
    overrides: dict[Addr, str] = {}
    for lineno, raw in enumerate(text.split("\n"), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if m := _ASSERT_RE.match(line):
            try:
                addr = parse_addr(m.group(1))
                lo, hi = float(m.group(2)), float(m.group(3))
            except (ModelError, ValueError) as exc:
                raise PolicyError(str(exc), lineno) from exc
            if not (math.isfinite(lo) and math.isfinite(hi)):
                raise PolicyError("interval bounds must be finite", lineno)
            if lo > hi:
                raise PolicyError(f"empty interval [{lo}, {hi}]", lineno)
            assertions[addr] = Interval(lo, hi)  # later lines override earlier
        elif m := _ROLE_RE.match(line):
            try:
                addr = parse_addr(m.group(1))
            except ModelError as exc:
                raise PolicyError(str(exc), lineno) from exc
            overrides[addr] = m.group(2).upper()
        else:
            raise PolicyError(f"unrecognized policy line {line!r}", lineno)
    return assertions, overrides


def load_policy(path) -> tuple[dict[Addr, Interval], dict[Addr, str]]:
    from pathlib import Path

    return parse_policy(Path(path).read_text(encoding="utf-8"))


# ---------------------------------------------------------------------------
# Propagation


@dataclass
class IntervalAnalysis:
    by_cell: dict[Addr, Interval] = field(default_factory=dict)
    unasserted_inputs: list[Addr] = field(default_factory=list)


class _IntervalEvaluator:
    def __init__(self, workbook: Workbook, graph: FlowGraph, assertions: dict[Addr, Interval]):
        self.workbook = workbook
        self.graph = graph
        self.assertions = assertions
        self.by_cell: dict[Addr, Interval] = {}

    def run(self) -> IntervalAnalysis:
        unasserted: list[Addr] = []
        for addr in self.graph.cyclic:
            self.by_cell[addr] = TOP
        for addr in self.graph.topo_order:
            cell = self.workbook.cell(addr)
            if cell is None:
                self.by_cell[addr] = point(0.0)
            elif cell.is_formula:
                self.by_cell[addr] = self.eval_expr(cell.content, addr)  # type: ignore[arg-type]
            else:
                value = cell.content
                if isinstance(value, bool) or not isinstance(value, (int, float)):
                    self.by_cell[addr] = TOP
                elif addr in self.assertions:
                    self.by_cell[addr] = self.assertions[addr]
                else:
                    self.by_cell[addr] = point(float(value))
                    unasserted.append(addr)
        key = self.workbook.addr_key
        return IntervalAnalysis(self.by_cell, sorted(unasserted, key=key))

    def _ref_interval(self, ref: Ref, host: Addr) -> Interval:
        if ref.book is not None:
            return TOP
        sheet = ref.sheet or host.sheet
        if self.workbook.sheet(sheet) is None:
            return TOP
        return self.by_cell.get(Addr(sheet, ref.col, ref.row), point(0.0))

    def eval_expr(self, node: Expr, host: Addr) -> Interval:
        if isinstance(node, Number):
            return point(node.value)
        if isinstance(node, (Text, Boolean)):
            return TOP
        if isinstance(node, Ref):
            return self._ref_interval(node, host)
        if isinstance(node, Range):
            return TOP
        if isinstance(node, Unary):
            return i_neg(self.eval_expr(node.operand, host))
        if isinstance(node, Binary):
            if node.op == "+":
                return i_add(self.eval_expr(node.left, host), self.eval_expr(node.right, host))
            if node.op == "-":
                return i_sub(self.eval_expr(node.left, host), self.eval_expr(node.right, host))
            if node.op == "*":
                return i_mul(self.eval_expr(node.left, host), self.eval_expr(node.right, host))
            if node.op == "/":
                return i_div(self.eval_expr(node.left, host), self.eval_expr(node.right, host))
            if node.op == "^":
                if isinstance(node.right, Number):
                    return i_pow(self.eval_expr(node.left, host), node.right.value)
                return TOP
            return TOP  # comparisons are not numeric
        if isinstance(node, Call):
            return self._eval_call(node, host)
        raise TypeError(f"cannot evaluate {node!r}")

    def _agg_items(self, args: tuple[Expr, ...], host: Addr) -> list[tuple[Interval, str]]:
        """(interval, kind) pairs in the concrete evaluator's order.

        kind: "empty", "number" (certainly numeric), "nonnum" (certainly not
        counted by COUNT), or "unknown".
        """
        items: list[tuple[Interval, str]] = []
        for arg in args:
            if isinstance(arg, Range):
                first = arg.start
                assert isinstance(first, Ref)
                sheet = first.sheet or host.sheet
                if first.book is not None or self.workbook.sheet(sheet) is None:
                    items.append((TOP, "unknown"))
                    continue
                for addr in range_addrs(arg, host):
                    cell = self.workbook.cell(addr)
                    if cell is None:
                        items.append((point(0.0), "empty"))
                        continue
                    interval = self.by_cell.get(addr, TOP)
                    if not interval.is_top:
                        items.append((interval, "number"))
                    elif not cell.is_formula:
                        # a text/boolean constant can never become numeric
                        items.append((TOP, "nonnum"))
                    else:
                        items.append((TOP, "unknown"))
            elif isinstance(arg, (Text, Boolean)):
                items.append((TOP, "nonnum"))
            else:
                interval = self.eval_expr(arg, host)
                items.append((interval, "unknown" if interval.is_top else "number"))
        return items

    def _eval_call(self, node: Call, host: Addr) -> Interval:
        if node.func == "COUNT":
            certain = 0
            uncertain = 0
            for _, kind in self._agg_items(node.args, host):
                if kind == "number":
                    certain += 1
                elif kind == "unknown":
                    uncertain += 1
            return make(float(certain), float(certain + uncertain))
        if node.func in ("SUM", "AVERAGE", "MIN", "MAX"):
            items = self._agg_items(node.args, host)
            intervals = [point(0.0) if kind == "empty" else interval for interval, kind in items]
            if node.func == "MIN":
                return i_min(intervals)
            if node.func == "MAX":
                return i_max(intervals)
            total = i_sum(intervals)
            if node.func == "SUM":
                return total
            return i_div_exact(total, float(len(intervals)))
        if node.func == "ABS":
            return i_abs(self.eval_expr(node.args[0], host))
        if node.func == "ROUND":
            return i_round(self.eval_expr(node.args[0], host), self.eval_expr(node.args[1], host))
        if node.func == "IF":
            return self._eval_if(node, host)
        raise ValueError(f"unknown function {node.func!r}")

    def _eval_if(self, node: Call, host: Addr) -> Interval:
        cond, then_arm, else_arm = node.args
        then_i = self.eval_expr(then_arm, host)
        else_i = self.eval_expr(else_arm, host)
        decision = None
        if isinstance(cond, Boolean):
            decision = cond.value
        elif isinstance(cond, Binary) and cond.op in ("<", "<=", ">", ">=", "=", "<>"):
            decision = _decide(cond.op, self.eval_expr(cond.left, host), self.eval_expr(cond.right, host))
        if decision is True:
            return then_i
        if decision is False:
            return else_i
        return hull(then_i, else_i)


def i_div_exact(a: Interval, n: float) -> Interval:
    """Division by an exactly known positive count (AVERAGE denominator)."""
    if a.is_top:
        return TOP
    return make(a.lo / n, a.hi / n)


def _decide(op: str, left: Interval, right: Interval) -> bool | None:
    """Tri-state comparison: True/False when every value pair agrees, else None."""
    if left.is_top or right.is_top:
        return None
    if op == "<":
        if left.hi < right.lo:
            return True
        if left.lo >= right.hi:
            return False
    elif op == "<=":
        if left.hi <= right.lo:
            return True
        if left.lo > right.hi:
            return False
    elif op == ">":
        return _decide("<", right, left)
    elif op == ">=":
        return _decide("<=", right, left)
    elif op == "=":
        if left.lo == left.hi == right.lo == right.hi:
            return True
        if left.hi < right.lo or right.hi < left.lo:
            return False
    elif op == "<>":
        decided = _decide("=", left, right)
        return None if decided is None else not decided
    return None


def eval_intervals(workbook: Workbook, graph: FlowGraph, assertions: dict[Addr, Interval]) -> IntervalAnalysis:
    """Interval of every graph node; sources take asserted ranges, else their point value."""
    return _IntervalEvaluator(workbook, graph, assertions).run()


# ---------------------------------------------------------------------------
# Verdicts


@dataclass(frozen=True)
class Verdict:
    cell: Addr
    computed: Interval
    expected: Interval
    actual: Value
    status: str


@dataclass
class AssertionReport:
    verdicts: list[Verdict] = field(default_factory=list)
    policy_errors: list[str] = field(default_factory=list)
    unasserted_inputs: list[Addr] = field(default_factory=list)


def _status(computed: Interval, expected: Interval, actual: Value) -> str:
    if computed.is_top or isinstance(actual, CellError):
        return INDETERMINATE
    if computed.hi < expected.lo or expected.hi < computed.lo:
        return RANGE_VIOLATION
    if isinstance(actual, float) and not contains(expected, actual):
        return ACTUAL_OUT
    if expected.lo <= computed.lo and computed.hi <= expected.hi:
        return SAFE
    return BORDERLINE


def check_assertions(
    workbook: Workbook, graph: FlowGraph, assertions: dict[Addr, Interval]
) -> AssertionReport:
    report = AssertionReport()
    key = workbook.addr_key
    valid: dict[Addr, Interval] = {}
    for addr in sorted(assertions, key=key):
        if workbook.cell(addr) is None:
            report.policy_errors.append(f"assertion on nonexistent cell {addr}")
        else:
            valid[addr] = assertions[addr]
    analysis = eval_intervals(workbook, graph, valid)
    values = flow.evaluate(workbook, graph)
    for addr in sorted(valid, key=key):
        computed = analysis.by_cell.get(addr, TOP)
        actual = values.get(addr)
        assert actual is not None
        report.verdicts.append(
            Verdict(addr, computed, valid[addr], actual, _status(computed, valid[addr], actual))
        )
    feeding: set[Addr] = set()
    for addr in valid:
        feeding.update(flow.precedents(graph, addr, transitive=True))
    report.unasserted_inputs = [a for a in analysis.unasserted_inputs if a in feeding]
    return report
