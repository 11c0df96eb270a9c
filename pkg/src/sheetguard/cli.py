"""Command-line interface.

Exit codes: 0 success, 1 findings of severity ALERT / seal MISMATCH /
interval violations, 2 usage or parse errors.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

from . import areas as areas_mod
from . import audit as audit_mod
from . import flow as flow_mod
from . import guard as guard_mod
from . import intervals as intervals_mod
from . import payloads
from .areas import ALERT
from .formula import FormulaError, literal_text
from .guard import GuardError, SealManifest
from .intervals import PolicyError
from .model import Addr, ModelError, Workbook, parse_addr
from .sgw import SgwError, load_workbook, save_workbook


class CliError(Exception):
    def __init__(self, message: str, code: int = 2):
        super().__init__(message)
        self.code = code


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sheetguard", description="Spreadsheet fraud-audit toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name: str, help_text: str, book: bool = True) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_text)
        if book:
            p.add_argument("book", help="SGW workbook file")
        p.add_argument("--json", action="store_true", help="emit JSON")
        return p

    add("parse", "parse and validate a workbook")
    add("eval", "evaluate every cell")

    p = add("areas", "logical areas at an equivalence level")
    p.add_argument("--level", choices=["copy", "logical", "structural"], default="copy")

    add("classes", "repeating row-block patterns")
    add("anomalies", "structure irregularity scan")

    p = add("flow", "precedents/dependents of a cell")
    p.add_argument("--cell", required=True, help="cell address, e.g. Main!B3")
    p.add_argument("--dir", choices=["prec", "precedents", "dep", "dependents"], default="prec")
    p.add_argument("--transitive", action="store_true")

    p = add("intervals", "check interval assertions")
    p.add_argument("--policy", required=True, help="policy file")

    p = add("roles", "input/code/output/label classification")
    p.add_argument("--policy", help="policy file with role overrides")

    p = add("separate", "front-sheet separation transform")
    p.add_argument("--policy", help="policy file with role overrides")
    p.add_argument("--out", help="write the transformed workbook here")

    p = add("seal", "seal the program portion")
    p.add_argument("--policy", help="policy file (its digest is sealed)")
    p.add_argument("--manifest", help="write the manifest JSON here")
    p.add_argument("--chain", help="append the manifest to this seal-chain file")
    p.add_argument("--program-out", help="retain the canonical serialization here")
    p.add_argument("--timestamp", default="-", help="created_at text recorded in the manifest")

    p = add("verify", "verify a workbook against a seal manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--policy", help="policy file used when the seal was made")
    p.add_argument("--program", help="retained serialization, enables a cell-level diff")

    p = add("audit", "create or continue an audit session")
    p.add_argument("--strategy", choices=["scan", "flow", "areas"], default="areas")
    p.add_argument("--flow-forward", action="store_true", help="FLOW strategy walks along the flow")
    p.add_argument("--session", help="session file to load/save")
    p.add_argument("--budget", type=float, default=30.0, help="budget in minutes")
    p.add_argument("--policy", help="policy file")
    p.add_argument("--manifest", help="seal manifest for the report's seal status")
    p.add_argument("--next", action="store_true", help="print the next unseen item")
    p.add_argument("--mark", nargs=2, metavar=("ITEM", "STATE"), help="mark an item CHECKED or SUSPECT")
    p.add_argument("--note", default="", help="note attached to --mark")
    p.add_argument("--elapsed", type=float, help="clock reading in minutes")

    p = add("serve", "HTTP service for the audit console")
    p.add_argument("--port", type=int, default=8765)
    p.add_argument("--policy", help="policy file")
    p.add_argument("--manifest", help="seal manifest to verify against")
    p.add_argument("--program", help="retained serialization for seal diffs")
    p.add_argument("--static", help="directory of static UI files")
    return parser


def _load_book(path: str) -> Workbook:
    if not Path(path).exists():
        raise CliError(f"no such file: {path}")
    return load_workbook(path)


def _load_policy(path: str | None):
    if path is None:
        return {}, {}
    if not Path(path).exists():
        raise CliError(f"no such file: {path}")
    return intervals_mod.load_policy(path)


def _emit(args, payload: dict, text: str) -> None:
    sys.stdout.write(payloads.to_json(payload) if args.json else text)


def _render_value(value) -> str:
    if isinstance(value, flow_mod.CellError):
        return str(value)
    return literal_text(value)


def _cmd_parse(args) -> int:
    workbook = _load_book(args.book)
    lines = [f"workbook {workbook.name}: {len(workbook.sheets)} sheet(s)"]
    for sheet in workbook.sheets:
        lines.append(f"  sheet {sheet.name}: {len(sheet.cells)} cell(s)")
    _emit(args, payloads.workbook_payload(workbook), "\n".join(lines) + "\n")
    return 0


def _cmd_eval(args) -> int:
    workbook = _load_book(args.book)
    graph = flow_mod.build_flow_graph(workbook)
    values = flow_mod.evaluate(workbook, graph)
    lines = [f"{addr} = {_render_value(values[addr])}" for addr, _ in workbook.iter_cells()]
    _emit(args, payloads.values_payload(workbook, values), "\n".join(lines) + "\n")
    return 0


def _cmd_areas(args) -> int:
    workbook = _load_book(args.book)
    result = areas_mod.partition(workbook, args.level.upper())
    lines = [
        f"area {a.id} [{a.level}] {len(a.members)} cell(s): {a.signature}: "
        + " ".join(sorted(str(m) for m in a.members))
        for a in result
    ]
    _emit(args, payloads.areas_payload(result), "\n".join(lines) + ("\n" if lines else ""))
    return 0


def _cmd_classes(args) -> int:
    workbook = _load_book(args.book)
    result = areas_mod.partition(workbook)
    classes = areas_mod.detect_semantic_classes(workbook, result)
    lines = [
        f"{c.sheet}: height {c.block_height} x{len(c.occurrences)} at rows "
        + ",".join(str(r) for r in c.occurrences)
        for c in classes
    ]
    _emit(args, payloads.classes_payload(classes), "\n".join(lines) + ("\n" if lines else ""))
    return 0


def _cmd_anomalies(args) -> int:
    workbook = _load_book(args.book)
    graph = flow_mod.build_flow_graph(workbook)
    result = areas_mod.partition(workbook)
    anomalies = areas_mod.detect_anomalies(workbook, result, graph)
    lines = [f"[{a.severity}] {a.kind} {a.cell}: {a.context}" for a in anomalies]
    _emit(args, payloads.anomalies_payload(anomalies), "\n".join(lines) + ("\n" if lines else ""))
    return 1 if any(a.severity == ALERT for a in anomalies) else 0


def _cmd_flow(args) -> int:
    workbook = _load_book(args.book)
    graph = flow_mod.build_flow_graph(workbook)
    try:
        cell = parse_addr(args.cell)
    except ModelError as exc:
        raise CliError(str(exc))
    direction = "precedents" if args.dir.startswith("prec") else "dependents"
    fn = flow_mod.precedents if direction == "precedents" else flow_mod.dependents
    try:
        cells = fn(graph, cell, transitive=args.transitive)
    except ValueError as exc:
        raise CliError(str(exc))
    text = "\n".join(str(a) for a in cells) + ("\n" if cells else "")
    _emit(args, payloads.flow_payload(cell, direction, args.transitive, cells), text)
    return 0


def _cmd_intervals(args) -> int:
    workbook = _load_book(args.book)
    graph = flow_mod.build_flow_graph(workbook)
    assertions, _ = _load_policy(args.policy)
    report = intervals_mod.check_assertions(workbook, graph, assertions)
    lines = [
        f"{v.status} {v.cell}: computed {v.computed} expected {v.expected} actual {_render_value(v.actual)}"
        for v in report.verdicts
    ]
    lines += [f"policy error: {e}" for e in report.policy_errors]
    lines += [f"unasserted input: {a}" for a in report.unasserted_inputs]
    _emit(args, payloads.intervals_payload(report), "\n".join(lines) + ("\n" if lines else ""))
    bad = {intervals_mod.RANGE_VIOLATION, intervals_mod.ACTUAL_OUT}
    return 1 if any(v.status in bad for v in report.verdicts) else 0


def _roles_for(workbook: Workbook, policy_path: str | None) -> guard_mod.RoleMap:
    graph = flow_mod.build_flow_graph(workbook)
    _, overrides = _load_policy(policy_path)
    return guard_mod.infer_roles(workbook, graph, overrides)


def _cmd_roles(args) -> int:
    workbook = _load_book(args.book)
    roles = _roles_for(workbook, args.policy)
    key = workbook.addr_key
    lines = [f"{addr} {roles.roles[addr]}" for addr in sorted(roles.roles, key=key)]
    lines += [f"warning: {w}" for w in roles.warnings]
    _emit(args, payloads.roles_payload(roles, workbook), "\n".join(lines) + ("\n" if lines else ""))
    return 0


def _cmd_separate(args) -> int:
    workbook = _load_book(args.book)
    roles = _roles_for(workbook, args.policy)
    separated, report = guard_mod.separate(workbook, roles)
    if args.out:
        save_workbook(separated, args.out)
    payload = {
        "inputs": {str(a): str(b) for a, b in report.input_mapping.items()},
        "outputs": {str(a): str(b) for a, b in report.output_mapping.items()},
        "preserved": report.preserved,
        "value_diffs": [
            {"cell": str(a), "before": payloads.value_json(x), "after": payloads.value_json(y)}
            for a, x, y in report.value_diffs
        ],
    }
    text = (
        f"front sheet created: {len(report.input_mapping)} input(s), "
        f"{len(report.output_mapping)} output(s); outputs preserved: "
        f"{'true' if report.preserved else 'false'}\n"
    )
    _emit(args, payload, text)
    return 0 if report.preserved else 1


def _policy_digest(path: str | None) -> str:
    if path is None:
        return "-"
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _cmd_seal(args) -> int:
    workbook = _load_book(args.book)
    roles = _roles_for(workbook, args.policy)
    prev = "-"
    if args.chain:
        chain = guard_mod.load_seal_chain(args.chain)
        if chain:
            prev = chain[-1].digest
    manifest = guard_mod.seal(
        workbook, roles, policy_digest=_policy_digest(args.policy), prev=prev, created_at=args.timestamp
    )
    if args.manifest:
        Path(args.manifest).write_text(payloads.to_json(manifest.to_json()), encoding="utf-8")
    if args.chain:
        guard_mod.append_seal_chain(args.chain, manifest)
    if args.program_out:
        Path(args.program_out).write_bytes(guard_mod.canonical_serialize_program(workbook, roles))
    _emit(args, manifest.to_json(), f"sealed {manifest.digest}\n")
    return 0


def _read_manifest(path: str) -> SealManifest:
    if not Path(path).exists():
        raise CliError(f"no such file: {path}")
    try:
        return SealManifest.from_json(json.loads(Path(path).read_text(encoding="utf-8")))
    except (json.JSONDecodeError, GuardError) as exc:
        raise CliError(f"malformed manifest {path}: {exc}")


def _cmd_verify(args) -> int:
    workbook = _load_book(args.book)
    roles = _roles_for(workbook, args.policy)
    manifest = _read_manifest(args.manifest)
    program = Path(args.program).read_bytes() if args.program else None
    result = guard_mod.verify_seal(workbook, roles, manifest, program)
    payload = payloads.seal_status_payload(result.actual_digest, manifest, result)
    lines = [result.status]
    lines += [f"  {entry}" for entry in result.diff]
    _emit(args, payload, "\n".join(lines) + "\n")
    return 0 if result.matched else 1


def _cmd_audit(args) -> int:
    workbook = _load_book(args.book)
    graph = flow_mod.build_flow_graph(workbook)
    assertions, overrides = _load_policy(args.policy)
    digest = guard_mod.program_digest(workbook, overrides)
    session_path = Path(args.session) if args.session else None

    if session_path and session_path.exists():
        document = json.loads(session_path.read_text(encoding="utf-8"))
        session = audit_mod.load_session(document, workbook, overrides)
        if session.invalidated:
            sys.stderr.write("session INVALIDATED: workbook digest changed since the session was created\n")
            return 1
    else:
        strategy = args.strategy.upper()
        area_result = areas_mod.partition(workbook)
        anomalies = areas_mod.detect_anomalies(workbook, area_result, graph)
        plan = audit_mod.plan_audit(
            workbook, graph, area_result, anomalies, strategy, flow_forward=args.flow_forward
        )
        session_id = hashlib.sha256(f"{digest}:{strategy}:{args.budget}".encode()).hexdigest()[:12]
        session = audit_mod.new_session(plan, args.budget, digest, session_id)

    if args.mark:
        item_id, state = args.mark
        try:
            session.mark(int(item_id), state.upper(), note=args.note, elapsed_minutes=args.elapsed)
        except (audit_mod.AuditError, ValueError) as exc:
            raise CliError(str(exc))
    if session_path:
        session_path.write_text(payloads.to_json(audit_mod.save_session(session)), encoding="utf-8")
    if getattr(args, "next"):
        item = session.next_item()
        if args.json:
            doc = audit_mod.save_session(session)
            match = next((i for i in doc["items"] if item and i["id"] == item.id), None)
            sys.stdout.write(payloads.to_json({"next": match}))
        else:
            sys.stdout.write("done\n" if item is None else f"item {item.id}: {item.subject}\n")
        return 0

    summary = None
    if args.policy:
        summary = payloads.verdict_summary(intervals_mod.check_assertions(workbook, graph, assertions))
    seal_status = "-"
    if args.manifest:
        manifest = _read_manifest(args.manifest)
        roles = _roles_for(workbook, args.policy)
        seal_status = guard_mod.verify_seal(workbook, roles, manifest).status
    payload = audit_mod.report_payload(session, summary, seal_status)
    _emit(args, payload, audit_mod.report_text(payload))
    return 0


def _cmd_serve(args) -> int:
    from . import server

    workbook = _load_book(args.book)
    state = server.build_state(
        workbook,
        policy_path=args.policy,
        manifest_path=args.manifest,
        program_path=args.program,
        static_dir=args.static,
    )
    httpd = server.make_server(state, port=args.port)
    sys.stderr.write(f"serving {args.book} on http://127.0.0.1:{httpd.server_address[1]}/\n")
    try:
        httpd.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        httpd.server_close()
    return 0


_COMMANDS = {
    "parse": _cmd_parse,
    "eval": _cmd_eval,
    "areas": _cmd_areas,
    "classes": _cmd_classes,
    "anomalies": _cmd_anomalies,
    "flow": _cmd_flow,
    "intervals": _cmd_intervals,
    "roles": _cmd_roles,
    "separate": _cmd_separate,
    "seal": _cmd_seal,
    "verify": _cmd_verify,
    "audit": _cmd_audit,
    "serve": _cmd_serve,
}


def run_cli(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except CliError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return exc.code
    except (SgwError, FormulaError, PolicyError, GuardError, ModelError, audit_mod.AuditError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2
    except OSError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2


def main() -> None:
    sys.exit(run_cli(sys.argv[1:]))
