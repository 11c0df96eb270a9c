"""sheetguard: spreadsheet fraud-audit toolkit."""

from .model import Addr, Cell, Sheet, Workbook, parse_addr
from .sgw import load_workbook, parse_workbook, print_workbook, save_workbook
from .formula import parse_formula, print_formula_canonical, normalize_copy_relative
from .flow import build_flow_graph, dependents, evaluate, precedents
from .areas import detect_anomalies, detect_semantic_classes, partition
from .intervals import check_assertions, eval_intervals, parse_policy
from .guard import canonical_serialize_program, infer_roles, seal, separate, verify_seal
from .audit import load_session, plan_audit, save_session

__version__ = "0.1.0"

__all__ = [
    "Addr",
    "Cell",
    "Sheet",
    "Workbook",
    "parse_addr",
    "load_workbook",
    "parse_workbook",
    "print_workbook",
    "save_workbook",
    "parse_formula",
    "print_formula_canonical",
    "normalize_copy_relative",
    "build_flow_graph",
    "evaluate",
    "precedents",
    "dependents",
    "partition",
    "detect_anomalies",
    "detect_semantic_classes",
    "parse_policy",
    "eval_intervals",
    "check_assertions",
    "infer_roles",
    "separate",
    "canonical_serialize_program",
    "seal",
    "verify_seal",
    "plan_audit",
    "save_session",
    "load_session",
    "__version__",
]
