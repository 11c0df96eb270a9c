/** Console bootstrap: load analyses, render, wire session and what-if panels. */

import { ApiClient } from "./api.js";
import { SessionFlow, canSubmitMark } from "./session.js";
import {
  applyWhatIf,
  buildGridViewModel,
  formatValue,
  type GridViewModel,
} from "./viewmodel.js";
import {
  describeItem,
  el,
  renderBanner,
  renderCoverage,
  renderErrorBanner,
  renderGrid,
  renderTabs,
} from "./render.js";

const api = new ApiClient("");
const flow = new SessionFlow(api);

let baseModel: GridViewModel | null = null;
let shownModel: GridViewModel | null = null;
let activeSheet = "";
let areaLevel = "copy";
let focus = new Set<string>();

function byId<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

async function loadModel(): Promise<GridViewModel> {
  const [workbook, values, areas, anomalies, roles, intervals, seal] = await Promise.all([
    api.workbook(),
    api.values(),
    api.areas(areaLevel),
    api.anomalies(),
    api.roles(),
    api.intervals(),
    api.seal(),
  ]);
  return buildGridViewModel(workbook, values, areas.areas, anomalies.anomalies, roles, intervals, seal);
}

function redraw(): void {
  if (!shownModel) return;
  renderBanner(byId("banners"), shownModel);
  renderTabs(byId("tabs"), shownModel, activeSheet, (name) => {
    activeSheet = name;
    redraw();
  });
  const sheet = shownModel.sheets.find((s) => s.name === activeSheet) ?? shownModel.sheets[0];
  if (!sheet) return;
  activeSheet = sheet.name;
  renderGrid(byId("grid"), sheet, focus, { onSelect: onCellSelect });
  renderSessionPanel();
  renderWhatIfPanel();
}

function onCellSelect(cell: { addr: string; role: string | null }): void {
  if (cell.role === "INPUT") {
    (byId("whatif-cell") as HTMLSelectElement).value = cell.addr;
    refreshWhatIfEligibility();
  }
}

// -- session panel ----------------------------------------------------------

function renderSessionPanel(): void {
  const session = flow.state.session;
  byId("session-error").textContent = flow.state.error ?? "";
  byId("item-label").textContent = session ? describeItem(flow.state.current, flow.state.done) : "no session";
  renderCoverage(byId("coverage-fill"), byId("coverage-label"), flow.coverage);
  const budgetLabel = byId("budget-label");
  if (session) {
    const elapsed = Math.round(flow.elapsedMinutes() * 10) / 10;
    budgetLabel.textContent = `${elapsed} / ${session.budget_minutes} min`;
    budgetLabel.className = flow.overBudget ? "budget budget-over" : "budget";
  } else {
    budgetLabel.textContent = "";
  }
  const note = (byId("note") as HTMLInputElement).value;
  (byId("mark-suspect") as HTMLButtonElement).disabled =
    !flow.state.current || !canSubmitMark("SUSPECT", note);
  (byId("mark-checked") as HTMLButtonElement).disabled = !flow.state.current;
  const findings = byId("findings");
  findings.innerHTML = "";
  for (const finding of session?.findings ?? []) {
    findings.appendChild(el("li", undefined, `[${finding.severity}] ${finding.subject}: ${finding.text}`));
  }
}

function focusCurrent(): void {
  const item = flow.state.current;
  focus = new Set(item?.covered ?? []);
  if (item && item.covered.length) {
    const sheetName = item.covered[0].split("!")[0];
    if (shownModel?.sheets.some((s) => s.name === sheetName)) activeSheet = sheetName;
  }
  redraw();
  const first = item?.covered[0];
  if (first) {
    document.querySelector(`td[data-addr="${CSS.escape(first)}"]`)?.scrollIntoView({
      block: "center",
      inline: "center",
    });
  }
}

async function startSession(): Promise<void> {
  const strategy = (byId("strategy") as HTMLSelectElement).value;
  const budget = Number((byId("budget") as HTMLInputElement).value) || 30;
  await flow.start(strategy, budget);
  await flow.next();
  focusCurrent();
}

async function markCurrent(state: "CHECKED" | "SUSPECT"): Promise<void> {
  const note = (byId("note") as HTMLInputElement).value;
  if (await flow.mark(state, note)) {
    (byId("note") as HTMLInputElement).value = "";
  }
  focusCurrent();
}

// -- what-if panel -----------------------------------------------------------

function refreshWhatIfEligibility(): void {
  const select = byId("whatif-cell") as HTMLSelectElement;
  const apply = byId("whatif-apply") as HTMLButtonElement;
  apply.disabled = !select.value;
}

function renderWhatIfPanel(): void {
  const select = byId("whatif-cell") as HTMLSelectElement;
  const current = select.value;
  select.innerHTML = "";
  for (const addr of baseModel?.inputCells ?? []) {
    const option = el("option", undefined, addr) as HTMLOptionElement;
    option.value = addr;
    select.appendChild(option);
  }
  if (current) select.value = current;
  refreshWhatIfEligibility();
}

async function applyProbe(): Promise<void> {
  if (!baseModel) return;
  const addr = (byId("whatif-cell") as HTMLSelectElement).value;
  const raw = (byId("whatif-value") as HTMLInputElement).value;
  const value = raw.trim() === "" || Number.isNaN(Number(raw)) ? raw : Number(raw);
  const status = byId("whatif-status");
  try {
    const probe = await api.whatIf({ [addr]: value });
    shownModel = applyWhatIf(baseModel, probe);
    status.textContent = `probing ${addr} = ${formatValue(value)} (not persisted)`;
    status.className = "whatif-active";
  } catch (err) {
    status.textContent = err instanceof Error ? err.message : String(err);
    status.className = "whatif-error";
  }
  redraw();
}

function resetProbe(): void {
  shownModel = baseModel;
  const status = byId("whatif-status");
  status.textContent = "";
  status.className = "";
  redraw();
}

// -- bootstrap ---------------------------------------------------------------

async function boot(): Promise<void> {
  try {
    baseModel = await loadModel();
  } catch (err) {
    renderErrorBanner(byId("banners"), `service unreachable: ${err instanceof Error ? err.message : err}`);
    return;
  }
  shownModel = baseModel;
  activeSheet = baseModel.sheets[0]?.name ?? "";
  byId("title").textContent = `sheetguard console - ${baseModel.workbookName}`;
  byId("start-session").addEventListener("click", () => void startSession());
  byId("next-item").addEventListener("click", async () => {
    await flow.next();
    focusCurrent();
  });
  byId("mark-checked").addEventListener("click", () => void markCurrent("CHECKED"));
  byId("mark-suspect").addEventListener("click", () => void markCurrent("SUSPECT"));
  byId("note").addEventListener("input", renderSessionPanel);
  byId("whatif-apply").addEventListener("click", () => void applyProbe());
  byId("whatif-reset").addEventListener("click", resetProbe);
  (byId("level") as HTMLSelectElement).addEventListener("change", async (event) => {
    areaLevel = (event.target as HTMLSelectElement).value;
    baseModel = await loadModel();
    shownModel = baseModel;
    redraw();
  });
  redraw();
}

void boot();
