"""HTTP service exposing analyses and audit sessions to the console UI.

The workbook and its analyses are computed once and served read-only; the
only mutable state is the session store, guarded by one lock so concurrent
marks on a session apply in a total order.  What-if evaluation substitutes
input values into a throwaway copy and never persists anything.
"""

from __future__ import annotations

import hashlib
import json
import threading
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import parse_qs, urlparse

from . import areas as areas_mod
from . import audit as audit_mod
from . import flow as flow_mod
from . import guard as guard_mod
from . import intervals as intervals_mod
from . import payloads
from .areas import Anomaly, LogicalArea, SemanticClass
from .formula import LEVELS
from .guard import RoleMap, SealManifest, VerifyResult
from .model import Addr, ModelError, Workbook, parse_addr


@dataclass
class ServerState:
    workbook: Workbook
    graph: flow_mod.FlowGraph
    values: dict
    roles: RoleMap
    areas_by_level: dict[str, list[LogicalArea]]
    anomalies: list[Anomaly]
    classes: list[SemanticClass]
    assertions: dict[Addr, intervals_mod.Interval]
    overrides: dict[Addr, str]
    assertion_report: intervals_mod.AssertionReport
    digest: str
    manifest: SealManifest | None = None
    verify_result: VerifyResult | None = None
    static_dir: Path | None = None
    sessions: dict[str, audit_mod.AuditSession] = field(default_factory=dict)
    session_seq: int = 0
    lock: threading.Lock = field(default_factory=threading.Lock)


def build_state(
    workbook: Workbook,
    policy_path: str | None = None,
    manifest_path: str | None = None,
    program_path: str | None = None,
    static_dir: str | None = None,
) -> ServerState:
    graph = flow_mod.build_flow_graph(workbook)
    assertions: dict[Addr, intervals_mod.Interval] = {}
    overrides: dict[Addr, str] = {}
    if policy_path:
        assertions, overrides = intervals_mod.load_policy(policy_path)
    roles = guard_mod.infer_roles(workbook, graph, overrides)
    copy_areas = areas_mod.partition(workbook)
    state = ServerState(
        workbook=workbook,
        graph=graph,
        values=flow_mod.evaluate(workbook, graph),
        roles=roles,
        areas_by_level={level: areas_mod.partition(workbook, level) for level in LEVELS},
        anomalies=areas_mod.detect_anomalies(workbook, copy_areas, graph),
        classes=areas_mod.detect_semantic_classes(workbook, copy_areas),
        assertions=assertions,
        overrides=overrides,
        assertion_report=intervals_mod.check_assertions(workbook, graph, assertions),
        digest=hashlib.sha256(guard_mod.canonical_serialize_program(workbook, roles)).hexdigest(),
        static_dir=Path(static_dir) if static_dir else None,
    )
    if manifest_path:
        state.manifest = SealManifest.from_json(json.loads(Path(manifest_path).read_text(encoding="utf-8")))
        program = Path(program_path).read_bytes() if program_path else None
        state.verify_result = guard_mod.verify_seal(workbook, roles, state.manifest, program)
    return state


class ApiError(Exception):
    def __init__(self, status: int, message: str):
        super().__init__(message)
        self.status = status
        self.message = message


_CONTENT_TYPES = {
    ".html": "text/html; charset=utf-8",
    ".js": "text/javascript; charset=utf-8",
    ".css": "text/css; charset=utf-8",
    ".json": "application/json; charset=utf-8",
    ".svg": "image/svg+xml",
    ".map": "application/json; charset=utf-8",
}


class _Handler(BaseHTTPRequestHandler):
    state: ServerState  # set by make_server

    def log_message(self, *args) -> None:  # keep test output quiet
        pass

    def _send(self, status: int, body: bytes, content_type: str = "application/json; charset=utf-8") -> None:
        self.send_response(status)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _send_json(self, payload, status: int = 200) -> None:
        self._send(status, payloads.to_json(payload).encode("utf-8"))

    def _read_body(self) -> dict:
        length = int(self.headers.get("Content-Length") or 0)
        raw = self.rfile.read(length) if length else b"{}"
        try:
            body = json.loads(raw.decode("utf-8"))
        except (json.JSONDecodeError, UnicodeDecodeError) as exc:
            raise ApiError(400, f"bad JSON body: {exc}")
        if not isinstance(body, dict):
            raise ApiError(400, "JSON body must be an object")
        return body

    def do_GET(self) -> None:
        try:
            url = urlparse(self.path)
            query = {k: v[-1] for k, v in parse_qs(url.query).items()}
            self._route_get(url.path, query)
        except ApiError as exc:
            self._send_json({"error": exc.message}, exc.status)
        except Exception as exc:  # pragma: no cover - defensive
            self._send_json({"error": str(exc)}, 500)

    def do_POST(self) -> None:
        try:
            url = urlparse(self.path)
            self._route_post(url.path, self._read_body())
        except ApiError as exc:
            self._send_json({"error": exc.message}, exc.status)
        except Exception as exc:  # pragma: no cover - defensive
            self._send_json({"error": str(exc)}, 500)

    # -- GET routes --------------------------------------------------------

    def _route_get(self, path: str, query: dict[str, str]) -> None:
        state = self.state
        if path == "/api/workbook":
            return self._send_json(payloads.workbook_payload(state.workbook))
        if path == "/api/values":
            return self._send_json(payloads.values_payload(state.workbook, state.values))
        if path == "/api/areas":
            level = query.get("level", "copy").upper()
            if level not in state.areas_by_level:
                raise ApiError(400, f"unknown level {level}")
            return self._send_json(payloads.areas_payload(state.areas_by_level[level]))
        if path == "/api/anomalies":
            return self._send_json(payloads.anomalies_payload(state.anomalies))
        if path == "/api/classes":
            return self._send_json(payloads.classes_payload(state.classes))
        if path == "/api/flow":
            return self._get_flow(query)
        if path == "/api/intervals":
            return self._send_json(payloads.intervals_payload(state.assertion_report))
        if path == "/api/roles":
            return self._send_json(payloads.roles_payload(state.roles, state.workbook))
        if path == "/api/seal":
            return self._send_json(
                payloads.seal_status_payload(state.digest, state.manifest, state.verify_result)
            )
        if path.startswith("/api/sessions/"):
            return self._get_session(path)
        if path.startswith("/api/"):
            raise ApiError(404, f"no such endpoint {path}")
        return self._serve_static(path)

    def _get_flow(self, query: dict[str, str]) -> None:
        try:
            cell = parse_addr(query.get("cell", ""))
        except ModelError as exc:
            raise ApiError(400, str(exc))
        direction = query.get("dir", "prec")
        transitive = query.get("transitive", "0") in ("1", "true", "yes")
        fn = flow_mod.precedents if direction.startswith("prec") else flow_mod.dependents
        name = "precedents" if direction.startswith("prec") else "dependents"
        try:
            cells = fn(self.state.graph, cell, transitive=transitive)
        except ValueError as exc:
            raise ApiError(404, str(exc))
        self._send_json(payloads.flow_payload(cell, name, transitive, cells))

    def _get_session(self, path: str) -> None:
        parts = path.strip("/").split("/")
        session = self._session(parts[2])
        if len(parts) == 3:
            return self._send_json(audit_mod.save_session(session))
        if len(parts) == 4 and parts[3] == "next":
            with self.state.lock:
                item = session.next_item()
            if item is None:
                return self._send_json({"next": None, "coverage": session.coverage()})
            doc = audit_mod.save_session(session)
            match = next(i for i in doc["items"] if i["id"] == item.id)
            return self._send_json({"next": match, "coverage": session.coverage()})
        raise ApiError(404, f"no such endpoint {path}")

    def _session(self, session_id: str) -> audit_mod.AuditSession:
        session = self.state.sessions.get(session_id)
        if session is None:
            raise ApiError(404, f"unknown session {session_id}")
        return session

    # -- POST routes -------------------------------------------------------

    def _route_post(self, path: str, body: dict) -> None:
        if path == "/api/sessions":
            return self._post_session(body)
        parts = path.strip("/").split("/")
        if len(parts) == 6 and parts[:2] == ["api", "sessions"] and parts[3] == "items" and parts[5] == "mark":
            return self._post_mark(parts[2], parts[4], body)
        if path == "/api/whatif":
            return self._post_whatif(body)
        raise ApiError(404, f"no such endpoint {path}")

    def _post_session(self, body: dict) -> None:
        state = self.state
        strategy = str(body.get("strategy", "AREAS")).upper()
        if strategy not in audit_mod.STRATEGIES:
            raise ApiError(400, f"unknown strategy {strategy}")
        try:
            budget = float(body.get("budget_minutes", 30))
        except (TypeError, ValueError):
            raise ApiError(400, "budget_minutes must be a number")
        plan = audit_mod.plan_audit(
            state.workbook,
            state.graph,
            state.areas_by_level["COPY"],
            state.anomalies,
            strategy,
            flow_forward=bool(body.get("flow_forward", False)),
        )
        with state.lock:
            state.session_seq += 1
            session_id = f"s{state.session_seq}"
            session = audit_mod.new_session(plan, budget, state.digest, session_id)
            state.sessions[session_id] = session
        self._send_json(audit_mod.save_session(session), status=201)

    def _post_mark(self, session_id: str, item_id: str, body: dict) -> None:
        session = self._session(session_id)
        try:
            item_no = int(item_id)
        except ValueError:
            raise ApiError(400, f"bad item id {item_id}")
        state = str(body.get("state", "")).upper()
        note = str(body.get("note", ""))
        elapsed = body.get("elapsed_minutes")
        with self.state.lock:
            try:
                session.mark(item_no, state, note=note, elapsed_minutes=elapsed)
            except audit_mod.TransitionError as exc:
                raise ApiError(409, str(exc))
            except audit_mod.AuditError as exc:
                raise ApiError(404, str(exc))
            doc = audit_mod.save_session(session)
        self._send_json(doc)

    def _post_whatif(self, body: dict) -> None:
        state = self.state
        inputs = body.get("inputs")
        if not isinstance(inputs, dict) or not inputs:
            raise ApiError(400, "whatif needs an 'inputs' object")
        substitutions: dict[Addr, float | str | bool] = {}
        for text, value in inputs.items():
            try:
                addr = parse_addr(text)
            except ModelError as exc:
                raise ApiError(400, str(exc))
            if state.roles.of(addr) != guard_mod.INPUT:
                raise ApiError(400, f"{addr} is not an input cell")
            if isinstance(value, bool) or isinstance(value, str):
                substitutions[addr] = value
            elif isinstance(value, (int, float)):
                substitutions[addr] = float(value)
            else:
                raise ApiError(400, f"unsupported value for {addr}")
        probe = state.workbook.clone()
        for addr, value in substitutions.items():
            sheet = probe.sheet(addr.sheet)
            assert sheet is not None
            old = sheet.cell(addr.col, addr.row)
            assert old is not None
            sheet.set(addr.col, addr.row, type(old)(value, hidden=old.hidden, locked=old.locked))
        graph = flow_mod.build_flow_graph(probe)
        values = flow_mod.evaluate(probe, graph)
        report = intervals_mod.check_assertions(probe, graph, state.assertions)
        self._send_json(
            {
                "values": payloads.values_payload(probe, values)["values"],
                "verdicts": payloads.intervals_payload(report)["verdicts"],
            }
        )

    # -- static ------------------------------------------------------------

    def _serve_static(self, path: str) -> None:
        root = self.state.static_dir
        if root is None:
            raise ApiError(404, "no static files configured")
        name = path.lstrip("/") or "index.html"
        target = (root / name).resolve()
        if not str(target).startswith(str(root.resolve())) or not target.is_file():
            raise ApiError(404, f"not found: {path}")
        content_type = _CONTENT_TYPES.get(target.suffix, "application/octet-stream")
        self._send(200, target.read_bytes(), content_type)


def make_server(state: ServerState, port: int = 8765) -> ThreadingHTTPServer:
    handler = type("BoundHandler", (_Handler,), {"state": state})
    return ThreadingHTTPServer(("127.0.0.1", port), handler)
