/** JSON contracts of the sheetguard HTTP API. */

export type CellValue = number | string | boolean | { error: string };

export interface WorkbookCell {
  addr: string;
  col: number;
  row: number;
  kind: "constant" | "formula";
  content: string;
  value: CellValue | null;
  hidden: boolean;
  locked: boolean;
}

export interface WorkbookSheet {
  name: string;
  rows: number;
  cols: number;
  cells: WorkbookCell[];
}

export interface WorkbookDoc {
  name: string;
  sheets: WorkbookSheet[];
}

export interface ValuesDoc {
  values: Record<string, CellValue>;
}

export interface AreaDoc {
  id: number;
  level: string;
  signature: string;
  members: string[];
}

export interface AnomalyDoc {
  kind: string;
  cell: string;
  severity: "INFO" | "WARN" | "ALERT";
  context: string;
}

export interface SemanticClassDoc {
  sheet: string;
  height: number;
  occurrences: number[];
}

export type IntervalDoc = [number, number] | "TOP";

export interface VerdictDoc {
  cell: string;
  computed: IntervalDoc;
  expected: IntervalDoc;
  actual: CellValue;
  status: "SAFE" | "BORDERLINE" | "RANGE_VIOLATION" | "ACTUAL_OUT" | "INDETERMINATE";
}

export interface IntervalsDoc {
  verdicts: VerdictDoc[];
  policy_errors: string[];
  unasserted_inputs: string[];
}

export interface RolesDoc {
  roles: Record<string, "INPUT" | "CODE" | "OUTPUT" | "LABEL">;
  warnings: string[];
}

export interface SealDoc {
  digest: string;
  manifest: Record<string, string> | null;
  status: "MATCH" | "MISMATCH" | "UNVERIFIED";
  diff: string[];
}

export interface SessionItemDoc {
  id: number;
  subject: string;
  covered: string[];
  flags: AnomalyDoc[];
  state: "UNSEEN" | "CHECKED" | "SUSPECT";
  note: string;
  depth: number | null;
}

export interface SessionDoc {
  id: string;
  strategy: string;
  budget_minutes: number;
  elapsed_minutes: number;
  created_at: string;
  workbook_digest: string;
  status: string;
  coverage: number;
  findings: { subject: string; severity: string; text: string }[];
  items: SessionItemDoc[];
}

export interface NextItemDoc {
  next: SessionItemDoc | null;
  coverage: number;
}

export interface WhatIfDoc {
  values: Record<string, CellValue>;
  verdicts: VerdictDoc[];
}
