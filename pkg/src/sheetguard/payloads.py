"""JSON payload builders shared by the CLI and the HTTP service.

Both surfaces must emit byte-identical documents for the same workbook state,
so every JSON document is produced here and rendered with `to_json`.
"""

from __future__ import annotations

import json

from .areas import Anomaly, LogicalArea, SemanticClass
from .flow import CellError, FlowGraph, Value
from .guard import RoleMap, SealManifest, VerifyResult
from .intervals import AssertionReport, Interval
from .model import Addr, Workbook
from .sgw import cell_content_text


def to_json(payload) -> str:
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def value_json(value: Value):
    if isinstance(value, CellError):
        return {"error": value.code}
    return value


def interval_json(interval: Interval):
    return "TOP" if interval.is_top else [interval.lo, interval.hi]


def workbook_payload(workbook: Workbook) -> dict:
    sheets = []
    for sheet in workbook.sheets:
        cells = []
        for (col, row), cell in sheet.sorted_items():
            addr = Addr(sheet.name, col, row)
            cells.append(
                {
                    "addr": str(addr),
                    "col": col,
                    "row": row,
                    "kind": "formula" if cell.is_formula else "constant",
                    "content": cell_content_text(cell),
                    "value": None if cell.is_formula else value_json(cell.content),  # type: ignore[arg-type]
                    "hidden": cell.hidden,
                    "locked": cell.locked,
                }
            )
        sheets.append(
            {
                "name": sheet.name,
                "rows": sheet.max_row,
                "cols": sheet.max_col,
                "cells": cells,
            }
        )
    return {"name": workbook.name, "sheets": sheets}


def values_payload(workbook: Workbook, values: dict[Addr, Value]) -> dict:
    out = {}
    for addr, _ in workbook.iter_cells():
        out[str(addr)] = value_json(values[addr])
    return {"values": out}


def areas_payload(areas: list[LogicalArea]) -> dict:
    return {
        "areas": [
            {
                "id": area.id,
                "level": area.level,
                "signature": area.signature,
                "members": sorted(str(a) for a in area.members),
            }
            for area in areas
        ]
    }


def anomalies_payload(anomalies: list[Anomaly]) -> dict:
    return {
        "anomalies": [
            {
                "kind": a.kind,
                "cell": str(a.cell),
                "severity": a.severity,
                "context": a.context,
            }
            for a in anomalies
        ]
    }


def classes_payload(classes: list[SemanticClass]) -> dict:
    return {
        "classes": [
            {
                "sheet": c.sheet,
                "height": c.block_height,
                "occurrences": list(c.occurrences),
            }
            for c in classes
        ]
    }


def flow_payload(cell: Addr, direction: str, transitive: bool, cells: list[Addr]) -> dict:
    return {
        "cell": str(cell),
        "direction": direction,
        "transitive": transitive,
        "cells": [str(a) for a in cells],
    }


def intervals_payload(report: AssertionReport) -> dict:
    return {
        "verdicts": [
            {
                "cell": str(v.cell),
                "computed": interval_json(v.computed),
                "expected": interval_json(v.expected),
                "actual": value_json(v.actual),
                "status": v.status,
            }
            for v in report.verdicts
        ],
        "policy_errors": list(report.policy_errors),
        "unasserted_inputs": [str(a) for a in report.unasserted_inputs],
    }


def roles_payload(roles: RoleMap, workbook: Workbook) -> dict:
    key = workbook.addr_key
    return {
        "roles": {str(a): roles.roles[a] for a in sorted(roles.roles, key=key)},
        "warnings": list(roles.warnings),
    }


def seal_status_payload(digest: str, manifest: SealManifest | None, result: VerifyResult | None) -> dict:
    return {
        "digest": digest,
        "manifest": manifest.to_json() if manifest else None,
        "status": result.status if result else "UNVERIFIED",
        "diff": list(result.diff) if result else [],
    }


def verdict_summary(report: AssertionReport | None) -> dict[str, int]:
    if report is None:
        return {}
    out: dict[str, int] = {}
    for verdict in report.verdicts:
        out[verdict.status] = out.get(verdict.status, 0) + 1
    return out
