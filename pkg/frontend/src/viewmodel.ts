/** Pure grid view model: every render field derives from service responses.
 *
 * No analysis happens client-side; this module only reshapes documents the
 * service produced.  Hidden cells are always present (rendered dimmed).
 */

import { areaColorKeys } from "./colors.js";
import type {
  AnomalyDoc,
  AreaDoc,
  CellValue,
  IntervalsDoc,
  RolesDoc,
  SealDoc,
  ValuesDoc,
  VerdictDoc,
  WorkbookDoc,
} from "./types.js";

export interface CellView {
  addr: string;
  col: number;
  row: number;
  kind: "constant" | "formula" | "empty";
  display: string;
  tooltip: string;
  areaId: number | null;
  colorKey: string | null;
  badges: AnomalyDoc[];
  hidden: boolean;
  locked: boolean;
  role: string | null;
  verdict: VerdictDoc | null;
}

export interface SheetView {
  name: string;
  rows: number;
  cols: number;
  // sparse: only non-empty cells have entries; the renderer fills the rest
  cells: Map<string, CellView>;
}

export interface SealBanner {
  state: "ok" | "tampered" | "unverified";
  text: string;
  diffCells: string[];
}

export interface GridViewModel {
  workbookName: string;
  sheets: SheetView[];
  banner: SealBanner;
  inputCells: string[];
  warnings: string[];
}

export function formatValue(value: CellValue | null | undefined): string {
  if (value === null || value === undefined) return "";
  if (typeof value === "object") return `#${value.error}`;
  if (typeof value === "boolean") return value ? "TRUE" : "FALSE";
  if (typeof value === "number") {
    return Number.isInteger(value) ? String(value) : String(Math.round(value * 1e6) / 1e6);
  }
  return value;
}

export function sealBanner(seal: SealDoc): SealBanner {
  if (seal.status === "MATCH") {
    return { state: "ok", text: `seal MATCH (${seal.digest.slice(0, 12)}…)`, diffCells: [] };
  }
  if (seal.status === "MISMATCH") {
    const cells = seal.diff.map((entry) => entry.split(" ").pop() ?? entry);
    const suffix = cells.length ? `: ${cells.join(", ")}` : "";
    return { state: "tampered", text: `seal MISMATCH${suffix}`, diffCells: cells };
  }
  return { state: "unverified", text: `unsealed (digest ${seal.digest.slice(0, 12)}…)`, diffCells: [] };
}

export function buildGridViewModel(
  workbook: WorkbookDoc,
  values: ValuesDoc,
  areas: AreaDoc[],
  anomalies: AnomalyDoc[],
  roles: RolesDoc,
  intervals: IntervalsDoc,
  seal: SealDoc,
): GridViewModel {
  const areaOf = new Map<string, number>();
  for (const area of areas) {
    for (const member of area.members) areaOf.set(member, area.id);
  }
  const colors = areaColorKeys(areas);
  const badges = new Map<string, AnomalyDoc[]>();
  for (const anomaly of anomalies) {
    const list = badges.get(anomaly.cell) ?? [];
    list.push(anomaly);
    badges.set(anomaly.cell, list);
  }
  const verdicts = new Map<string, VerdictDoc>();
  for (const verdict of intervals.verdicts) verdicts.set(verdict.cell, verdict);

  const sheets: SheetView[] = workbook.sheets.map((sheet) => {
    const cells = new Map<string, CellView>();
    for (const cell of sheet.cells) {
      const areaId = areaOf.get(cell.addr) ?? null;
      const value = values.values[cell.addr];
      cells.set(cell.addr, {
        addr: cell.addr,
        col: cell.col,
        row: cell.row,
        kind: cell.kind,
        display: formatValue(value),
        tooltip: cell.kind === "formula" ? cell.content : formatValue(value),
        areaId,
        colorKey: areaId !== null ? colors.get(areaId) ?? null : null,
        badges: badges.get(cell.addr) ?? [],
        hidden: cell.hidden,
        locked: cell.locked,
        role: roles.roles[cell.addr] ?? null,
        verdict: verdicts.get(cell.addr) ?? null,
      });
    }
    return { name: sheet.name, rows: sheet.rows, cols: sheet.cols, cells };
  });

  const inputCells = Object.entries(roles.roles)
    .filter(([, role]) => role === "INPUT")
    .map(([addr]) => addr)
    .sort();

  return {
    workbookName: workbook.name,
    sheets,
    banner: sealBanner(seal),
    inputCells,
    warnings: [...roles.warnings, ...intervals.policy_errors],
  };
}

/** Re-skin the model with what-if results; purely presentation, nothing persists. */
export function applyWhatIf(
  model: GridViewModel,
  probe: { values: Record<string, CellValue>; verdicts: VerdictDoc[] },
): GridViewModel {
  const verdicts = new Map(probe.verdicts.map((v) => [v.cell, v]));
  const sheets = model.sheets.map((sheet) => {
    const cells = new Map<string, CellView>();
    for (const [addr, cell] of sheet.cells) {
      cells.set(addr, {
        ...cell,
        display: addr in probe.values ? formatValue(probe.values[addr]) : cell.display,
        verdict: verdicts.get(addr) ?? null,
      });
    }
    return { ...sheet, cells };
  });
  return { ...model, sheets };
}

export function columnLabel(col: number): string {
  let out = "";
  let c = col;
  while (c > 0) {
    const rem = (c - 1) % 26;
    out = String.fromCharCode(65 + rem) + out;
    c = Math.floor((c - 1) / 26);
  }
  return out;
}
