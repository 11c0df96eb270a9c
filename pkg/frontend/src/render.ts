/** DOM rendering for the audit console. */

import type { GridViewModel, SheetView, CellView } from "./viewmodel.js";
import { columnLabel } from "./viewmodel.js";
import type { SessionItemDoc } from "./types.js";

const VERDICT_CLASS: Record<string, string> = {
  SAFE: "verdict-safe",
  BORDERLINE: "verdict-borderline",
  RANGE_VIOLATION: "verdict-violation",
  ACTUAL_OUT: "verdict-violation",
  INDETERMINATE: "verdict-indeterminate",
};


export function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export function renderBanner(container: HTMLElement, model: GridViewModel): void {
  container.innerHTML = "";
  const banner = el("div", `banner banner-${model.banner.state}`, model.banner.text);
  container.appendChild(banner);
  for (const warning of model.warnings) {
    container.appendChild(el("div", "banner banner-warn", warning));
  }
}

export function renderErrorBanner(container: HTMLElement, message: string): void {
  container.innerHTML = "";
  container.appendChild(el("div", "banner banner-tampered", message));
}

export interface GridCallbacks {
  onSelect(cell: CellView): void;
}

export function renderTabs(
  container: HTMLElement,
  model: GridViewModel,
  active: string,
  onPick: (name: string) => void,
): void {
  container.innerHTML = "";
  for (const sheet of model.sheets) {
    const tab = el("button", sheet.name === active ? "tab tab-active" : "tab", sheet.name);
    tab.addEventListener("click", () => onPick(sheet.name));
    container.appendChild(tab);
  }
}

export function renderGrid(
  container: HTMLElement,
  sheet: SheetView,
  focus: Set<string>,
  callbacks: GridCallbacks,
): void {
  container.innerHTML = "";
  const table = el("table", "grid");
  const header = el("tr");
  header.appendChild(el("th"));
  for (let col = 1; col <= sheet.cols; col++) {
    header.appendChild(el("th", undefined, columnLabel(col)));
  }
  table.appendChild(header);
  for (let row = 1; row <= sheet.rows; row++) {
    const tr = el("tr");
    tr.appendChild(el("th", undefined, String(row)));
    for (let col = 1; col <= sheet.cols; col++) {
      const addr = `${sheet.name}!${columnLabel(col)}${row}`;
      const cell = sheet.cells.get(addr);
      const td = el("td", "cell");
      td.dataset.addr = addr;
      if (cell) {
        td.textContent = cell.display;
        td.title = `${addr}\n${cell.tooltip}` + (cell.role ? `\nrole: ${cell.role}` : "");
        if (cell.colorKey) td.style.backgroundColor = cell.colorKey;
        if (cell.hidden) td.classList.add("cell-hidden");
        if (cell.locked) td.classList.add("cell-locked");
        if (cell.verdict) td.classList.add(VERDICT_CLASS[cell.verdict.status]);
        if (cell.role === "INPUT") td.classList.add("cell-input");
        if (cell.badges.length) {
          const badge = el("span", "badge", cell.badges.length > 1 ? `!${cell.badges.length}` : "!");
          badge.title = cell.badges.map((b) => `[${b.severity}] ${b.kind}: ${b.context}`).join("\n");
          td.appendChild(badge);
        }
        td.addEventListener("click", () => callbacks.onSelect(cell));
      }
      if (focus.has(addr)) td.classList.add("cell-focus");
      tr.appendChild(td);
    }
    table.appendChild(tr);
  }
  container.appendChild(table);
}

export function renderCoverage(bar: HTMLElement, label: HTMLElement, coverage: number): void {
  const percent = Math.round(coverage * 1000) / 10;
  bar.style.width = `${percent}%`;
  label.textContent = `${percent}%`;
}

export function describeItem(item: SessionItemDoc | null, done: boolean): string {
  if (done) return "done - every item reviewed";
  if (!item) return "no active item";
  const flags = item.flags.length ? ` | ${item.flags.map((f) => f.kind).join(", ")}` : "";
  return `#${item.id} ${item.subject} (${item.covered.length} cell${item.covered.length === 1 ? "" : "s"})${flags}`;
}
