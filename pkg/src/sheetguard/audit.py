"""Reading strategies and reviewer sessions.

SCAN visits every non-empty cell row-major (hidden cells included), FLOW
walks backward from result cells grouped by dataflow depth, AREAS visits one
item per copy-equivalence area with flagged areas first.  Sessions track
marks, findings, coverage, and a soft time budget; elapsed time only ever
comes from caller-supplied clock readings.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import guard
from .areas import Anomaly, LogicalArea
from .flow import FlowGraph
from .model import Addr, Workbook, parse_addr

SCAN = "SCAN"
FLOW = "FLOW"
AREAS = "AREAS"
STRATEGIES = (SCAN, FLOW, AREAS)

UNSEEN = "UNSEEN"
CHECKED = "CHECKED"
SUSPECT = "SUSPECT"

SESSION_OK = "ok"
SESSION_OVER_BUDGET = "over budget"
SESSION_INVALIDATED = "invalidated"


class AuditError(ValueError):
    pass


class TransitionError(AuditError):
    """Illegal item state transition."""


@dataclass
class AuditItem:
    id: int
    subject: str  # "cell:Main!B3" or "area:4"
    covered_cells: frozenset[Addr]
    flags: tuple[Anomaly, ...] = ()
    state: str = UNSEEN
    note: str = ""
    depth: int | None = None


@dataclass
class AuditPlan:
    strategy: str
    items: list[AuditItem] = field(default_factory=list)

    @property
    def universe(self) -> frozenset[Addr]:
        out: set[Addr] = set()
        for item in self.items:
            out |= item.covered_cells
        return frozenset(out)


def plan_audit(
    workbook: Workbook,
    graph: FlowGraph,
    areas_result: list[LogicalArea] | None,
    anomalies: list[Anomaly] | None,
    strategy: str,
    flow_forward: bool = False,
) -> AuditPlan:
    """Build the ordered item list; FLOW walks against the flow unless flow_forward."""
    if strategy not in STRATEGIES:
        raise AuditError(f"unknown strategy {strategy!r}")
    anomalies = anomalies or []
    key = workbook.addr_key

    if strategy == SCAN:
        cells = [addr for addr, _ in workbook.iter_cells()]
        items = [
            AuditItem(0, f"cell:{addr}", frozenset([addr]))
            for addr in cells
        ]
    elif strategy == FLOW:
        if flow_forward:
            starts = [a for a in graph.nodes if not graph.precedents_of.get(a)]
            step = graph.dependents_of
        else:
            starts = [
                addr for addr, cell in workbook.iter_cells()
                if cell.is_formula and not graph.dependents_of.get(addr)
            ]
            step = graph.precedents_of
        depth: dict[Addr, int] = {addr: 0 for addr in starts}
        frontier = list(starts)
        while frontier:
            next_frontier: list[Addr] = []
            for addr in frontier:
                for neighbour in step.get(addr, []):
                    if neighbour not in depth:
                        depth[neighbour] = depth[addr] + 1
                        next_frontier.append(neighbour)
            frontier = next_frontier
        ordered = sorted(depth, key=lambda a: (depth[a], key(a)))
        items = [
            AuditItem(0, f"cell:{addr}", frozenset([addr]), depth=depth[addr])
            for addr in ordered
        ]
        # Flagged cells the dataflow never reaches still demand eyes on them.
        extra = sorted(
            {a.cell for a in anomalies if a.cell not in depth and workbook.cell(a.cell) is not None},
            key=key,
        )
        items += [AuditItem(0, f"cell:{addr}", frozenset([addr])) for addr in extra]
    else:
        if areas_result is None:
            raise AuditError("AREAS strategy needs the area analysis")
        flagged_ids = {a.area_hint for a in anomalies if a.area_hint is not None}
        for anomaly in anomalies:
            for area in areas_result:
                if anomaly.cell in area.members:
                    flagged_ids.add(area.id)

        def area_order(area: LogicalArea):
            group = 0 if area.id in flagged_ids else 1 if len(area.members) == 1 else 2
            return (group, len(area.members), key(min(area.members, key=key)))

        items = [
            AuditItem(0, f"area:{area.id}", area.members)
            for area in sorted(areas_result, key=area_order)
        ]

    for i, item in enumerate(items, start=1):
        item.id = i
    _attach_anomalies(items, anomalies)
    return AuditPlan(strategy, items)


def _attach_anomalies(items: list[AuditItem], anomalies: list[Anomaly]) -> None:
    def find_home(anomaly: Anomaly) -> AuditItem | None:
        for item in items:
            if anomaly.cell in item.covered_cells:
                return item
        for anchor in anomaly.anchor_cells:
            for item in items:
                if anchor in item.covered_cells:
                    return item
        return None

    for anomaly in anomalies:
        home = find_home(anomaly)
        if home is not None:
            home.flags = home.flags + (anomaly,)


# ---------------------------------------------------------------------------
# Sessions


@dataclass
class Finding:
    subject: str
    severity: str
    text: str


@dataclass
class AuditSession:
    id: str
    plan: AuditPlan
    budget_minutes: float
    workbook_digest: str
    elapsed_minutes: float = 0.0
    findings: list[Finding] = field(default_factory=list)
    created_at: str = "-"
    invalidated: bool = False

    @property
    def status(self) -> str:
        if self.invalidated:
            return SESSION_INVALIDATED
        if self.budget_minutes and self.elapsed_minutes > self.budget_minutes:
            return SESSION_OVER_BUDGET
        return SESSION_OK

    def coverage(self) -> float:
        universe = self.plan.universe
        if not universe:
            return 1.0
        seen: set[Addr] = set()
        for item in self.plan.items:
            if item.state in (CHECKED, SUSPECT):
                seen |= item.covered_cells
        return len(seen & universe) / len(universe)

    def item(self, item_id: int) -> AuditItem:
        for item in self.plan.items:
            if item.id == item_id:
                return item
        raise AuditError(f"unknown item {item_id}")

    def next_item(self) -> AuditItem | None:
        self._check_valid()
        for item in self.plan.items:
            if item.state == UNSEEN:
                return item
        return None

    def mark(self, item_id: int, state: str, note: str = "", elapsed_minutes: float | None = None) -> AuditItem:
        self._check_valid()
        item = self.item(item_id)
        if state not in (CHECKED, SUSPECT):
            raise TransitionError(f"cannot mark an item {state!r}")
        if item.state == CHECKED:
            raise TransitionError(f"item {item_id} is already CHECKED")
        if item.state == SUSPECT and state == SUSPECT:
            raise TransitionError(f"item {item_id} is already SUSPECT")
        if item.state == SUSPECT and state == CHECKED and not note.strip():
            raise TransitionError("clearing a SUSPECT item needs a resolving note")
        if state == SUSPECT:
            if not note.strip():
                raise TransitionError("marking SUSPECT needs a note")
            self.findings.append(Finding(item.subject, "WARN", note.strip()))
        item.state = state
        if note:
            item.note = note
        if elapsed_minutes is not None:
            self.elapsed_minutes = max(self.elapsed_minutes, float(elapsed_minutes))
        return item

    def _check_valid(self) -> None:
        if self.invalidated:
            raise AuditError("session is invalidated (workbook digest changed)")


def new_session(
    plan: AuditPlan,
    budget_minutes: float,
    workbook_digest: str,
    session_id: str,
    created_at: str = "-",
) -> AuditSession:
    return AuditSession(
        id=session_id,
        plan=plan,
        budget_minutes=budget_minutes,
        workbook_digest=workbook_digest,
        created_at=created_at,
    )


# ---------------------------------------------------------------------------
# Persistence


def _anomaly_to_doc(anomaly: Anomaly) -> dict:
    return {
        "kind": anomaly.kind,
        "cell": str(anomaly.cell),
        "severity": anomaly.severity,
        "context": anomaly.context,
    }


def _anomaly_from_doc(doc: dict) -> Anomaly:
    return Anomaly(doc["kind"], parse_addr(doc["cell"]), doc["severity"], doc["context"])


def save_session(session: AuditSession) -> dict:
    return {
        "id": session.id,
        "strategy": session.plan.strategy,
        "budget_minutes": session.budget_minutes,
        "elapsed_minutes": session.elapsed_minutes,
        "created_at": session.created_at,
        "workbook_digest": session.workbook_digest,
        "status": session.status,
        "coverage": session.coverage(),
        "findings": [
            {"subject": f.subject, "severity": f.severity, "text": f.text}
            for f in session.findings
        ],
        "items": [
            {
                "id": item.id,
                "subject": item.subject,
                "covered": sorted(str(a) for a in item.covered_cells),
                "flags": [_anomaly_to_doc(a) for a in item.flags],
                "state": item.state,
                "note": item.note,
                "depth": item.depth,
            }
            for item in session.plan.items
        ],
    }


def load_session(document: dict, workbook: Workbook, overrides: dict[Addr, str] | None = None) -> AuditSession:
    """Rebuild a session; a digest mismatch marks it INVALIDATED, never silent."""
    try:
        plan = AuditPlan(
            strategy=document["strategy"],
            items=[
                AuditItem(
                    id=doc["id"],
                    subject=doc["subject"],
                    covered_cells=frozenset(parse_addr(a) for a in doc["covered"]),
                    flags=tuple(_anomaly_from_doc(f) for f in doc["flags"]),
                    state=doc["state"],
                    note=doc["note"],
                    depth=doc.get("depth"),
                )
                for doc in document["items"]
            ],
        )
        session = AuditSession(
            id=document["id"],
            plan=plan,
            budget_minutes=document["budget_minutes"],
            workbook_digest=document["workbook_digest"],
            elapsed_minutes=document["elapsed_minutes"],
            findings=[Finding(f["subject"], f["severity"], f["text"]) for f in document["findings"]],
            created_at=document["created_at"],
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise AuditError(f"malformed session document: {exc}") from exc
    if guard.program_digest(workbook, overrides) != session.workbook_digest:
        session.invalidated = True
    return session


# ---------------------------------------------------------------------------
# Reports


def report_payload(
    session: AuditSession,
    verdict_summary: dict[str, int] | None = None,
    seal_status: str = "-",
) -> dict:
    anomaly_summary: dict[str, int] = {}
    for item in session.plan.items:
        for anomaly in item.flags:
            anomaly_summary[anomaly.kind] = anomaly_summary.get(anomaly.kind, 0) + 1
    return {
        "session": session.id,
        "strategy": session.plan.strategy,
        "status": session.status,
        "coverage": session.coverage(),
        "items_total": len(session.plan.items),
        "items_done": sum(1 for i in session.plan.items if i.state != UNSEEN),
        "findings": [
            {"subject": f.subject, "severity": f.severity, "text": f.text}
            for f in session.findings
        ],
        "anomaly_summary": anomaly_summary,
        "verdict_summary": verdict_summary or {},
        "seal_status": seal_status,
        "budget": {
            "budget_minutes": session.budget_minutes,
            "elapsed_minutes": session.elapsed_minutes,
            "over_budget": session.status == SESSION_OVER_BUDGET,
        },
    }


def report_text(payload: dict) -> str:
    lines = [
        f"session {payload['session']} ({payload['strategy']})",
        f"status: {payload['status']}",
        f"coverage: {payload['coverage'] * 100:.1f}% ({payload['items_done']}/{payload['items_total']} items)",
        f"budget: {payload['budget']['elapsed_minutes']} of {payload['budget']['budget_minutes']} minutes"
        + (" (over budget)" if payload["budget"]["over_budget"] else ""),
        f"seal: {payload['seal_status']}",
    ]
    if payload["anomaly_summary"]:
        pairs = ", ".join(f"{k}={v}" for k, v in sorted(payload["anomaly_summary"].items()))
        lines.append(f"anomalies: {pairs}")
    if payload["verdict_summary"]:
        pairs = ", ".join(f"{k}={v}" for k, v in sorted(payload["verdict_summary"].items()))
        lines.append(f"verdicts: {pairs}")
    if payload["findings"]:
        lines.append("findings:")
        for finding in payload["findings"]:
            lines.append(f"  [{finding['severity']}] {finding['subject']}: {finding['text']}")
    else:
        lines.append("findings: none")
    return "\n".join(lines) + "\n"
