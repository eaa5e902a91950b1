/** DOM wiring for the single-page tuning UI.
 *
 * State lives in a RunFormState plus a TradeoffView; all numbers shown come
 * from service responses (the client never recomputes noise or anonymity).
 */

import { ApiClient, ApiError, pollRun } from "./api.js";
import { histogramChartModel, renderHistogramSVG, renderTradeoffSVG, tradeoffChartModel } from "./charts.js";
import { buildPipelineConfig, buildQueryJson, defaultForm, type ColumnForm, type RunFormState } from "./form.js";
import { kReportView } from "./kreport.js";
import { TradeoffView, readoutText } from "./tradeoff.js";
import type { RunReport, RunStatus } from "./types.js";
import { validateRunForm } from "./validation.js";

const form: RunFormState = defaultForm();
const tradeoff = new TradeoffView();
const api = new ApiClient("");

function $(id: string): HTMLElement {
  const el = document.getElementById(id);
  if (!el) {
    throw new Error(`missing element #${id}`);
  }
  return el;
}

function setBanner(message: string | null): void {
  const banner = $("banner");
  banner.textContent = message ?? "";
  banner.classList.toggle("visible", message !== null);
}

// --- schema editor ------------------------------------------------------------

function renderColumns(): void {
  const tbody = $("columns-body");
  tbody.innerHTML = "";
  form.columns.forEach((column, index) => {
    const row = document.createElement("tr");
    row.innerHTML = `
      <td><input data-field="name" value="${column.name}" placeholder="column"/></td>
      <td><select data-field="role">
        ${["direct", "quasi", "sensitive", "insensitive"]
          .map((r) => `<option value="${r}" ${r === column.role ? "selected" : ""}>${r}</option>`)
          .join("")}
      </select></td>
      <td><select data-field="kind">
        ${["categorical", "numeric"]
          .map((k) => `<option value="${k}" ${k === column.kind ? "selected" : ""}>${k}</option>`)
          .join("")}
      </select></td>
      <td><input type="checkbox" data-field="userId" ${column.userId ? "checked" : ""}/></td>
      <td><input type="checkbox" data-field="suppress" ${form.suppress.includes(column.name) ? "checked" : ""}/></td>
      <td><input type="checkbox" data-field="pseudonymize" ${form.pseudonymize.includes(column.name) ? "checked" : ""}/></td>
      <td><button data-field="remove">✕</button></td>`;
    row.querySelectorAll("input,select,button").forEach((el) => {
      el.addEventListener(el.tagName === "BUTTON" ? "click" : "change", (event) => {
        onColumnEdit(index, (event.currentTarget as HTMLElement).dataset.field!, event);
      });
    });
    tbody.appendChild(row);
  });
  refreshValidation();
}

function onColumnEdit(index: number, field: string, event: Event): void {
  const column = form.columns[index];
  const target = event.currentTarget as HTMLInputElement;
  if (field === "remove") {
    form.columns.splice(index, 1);
  } else if (field === "suppress" || field === "pseudonymize") {
    const list = form[field];
    const position = list.indexOf(column.name);
    if (target.checked && position === -1) {
      list.push(column.name);
    } else if (!target.checked && position !== -1) {
      list.splice(position, 1);
    }
  } else if (field === "userId") {
    column.userId = target.checked;
  } else {
    (column as unknown as Record<string, string>)[field] = target.value;
  }
  renderColumns();
}

// --- release path + query builder ------------------------------------------------

function readReleaseInputs(): void {
  form.kanonEnabled = ($("kanon-enabled") as HTMLInputElement).checked;
  form.dpEnabled = ($("dp-enabled") as HTMLInputElement).checked;
  form.k = Number(($("k-input") as HTMLInputElement).value);
  form.suppressionLimit = Number(($("suppression-input") as HTMLInputElement).value);
  const query = form.query;
  query.kind = ($("query-kind") as HTMLSelectElement).value as typeof query.kind;
  query.epsilon = Number(($("epsilon-input") as HTMLInputElement).value);
  query.valueColumn = ($("value-column") as HTMLInputElement).value || null;
  const lo = ($("clamp-lo") as HTMLInputElement).value;
  const hi = ($("clamp-hi") as HTMLInputElement).value;
  query.clampLo = lo === "" ? null : Number(lo);
  query.clampHi = hi === "" ? null : Number(hi);
  query.predicateColumn = ($("predicate-column") as HTMLInputElement).value || null;
  query.predicateValue = ($("predicate-value") as HTMLInputElement).value || null;
  query.groupBy = ($("group-by") as HTMLInputElement).value || null;
  query.userLevel = ($("user-level") as HTMLInputElement).checked;
  query.userColumn = ($("user-column") as HTMLInputElement).value || null;
  const cap = ($("contribution-cap") as HTMLInputElement).value;
  query.contributionCap = cap === "" ? null : Number(cap);
  const batch = ($("batch-size") as HTMLInputElement).value;
  form.batchSize = batch === "" ? null : Number(batch);
  const seed = ($("seed-input") as HTMLInputElement).value;
  form.seed = seed === "" ? null : Number(seed);
  form.providerPublicKeyB64 = ($("provider-key") as HTMLInputElement).value.trim();
  refreshValidation();
}

function refreshValidation(): void {
  const errors = validateRunForm(form);
  $("validation-list").innerHTML = errors.map((e) => `<li>${e}</li>`).join("");
  ($("submit-run") as HTMLButtonElement).disabled = errors.length > 0;
}

// --- file inputs -------------------------------------------------------------------

async function fileToBase64(file: File): Promise<string> {
  const buffer = new Uint8Array(await file.arrayBuffer());
  let binary = "";
  buffer.forEach((byte) => {
    binary += String.fromCharCode(byte);
  });
  return btoa(binary);
}

function wireFileInputs(): void {
  ($("input-envelope") as HTMLInputElement).addEventListener("change", async (event) => {
    const file = (event.currentTarget as HTMLInputElement).files?.[0];
    form.inputB64 = file ? await fileToBase64(file) : "";
    refreshValidation();
  });
  ($("hierarchy-file") as HTMLInputElement).addEventListener("change", async (event) => {
    const input = event.currentTarget as HTMLInputElement;
    for (const file of input.files ?? []) {
      form.hierarchies[file.name.replace(/\.csv$/, "")] = await file.text();
    }
    $("hierarchy-names").textContent = Object.keys(form.hierarchies).join(", ");
    refreshValidation();
  });
}

// --- run submission + reports --------------------------------------------------------

async function submitRun(): Promise<void> {
  setBanner(null);
  try {
    const config = buildPipelineConfig(form);
    const { run_id } = await api.submitRun(config, form.inputB64);
    $("run-status").textContent = `run ${run_id}: submitted`;
    const status = await pollRun(api, run_id, {
      onUpdate: (s: RunStatus) => {
        $("run-status").textContent = `run ${run_id}: ${s.status}`;
      },
    });
    if (status.status === "failed") {
      setBanner(`run failed: ${status.error?.message ?? "unknown error"}`);
      return;
    }
    renderReport(status.report!);
  } catch (error) {
    setBanner(error instanceof ApiError
      ? `${error.message}${error.detail ? ` — ${JSON.stringify(error.detail)}` : ""}`
      : String(error));
  }
}

function renderReport(report: RunReport): void {
  if (report.path === "kanon" && report.k_report) {
    const view = kReportView(report.k_report);
    $("k-histogram").innerHTML = renderHistogramSVG(histogramChartModel(view), view);
    $("k-badges").innerHTML = [
      view.satisfied ? "satisfied" : "NOT satisfied",
      `min class size ${view.minClassSize}`,
      view.suppressedBadge,
      view.chosenNode ? `chosen levels [${view.chosenNode.join(", ")}]` : null,
    ]
      .filter((text) => text !== null)
      .map((text) => `<span class="badge">${text}</span>`)
      .join("");
  } else if (report.dp_results) {
    $("dp-results").innerHTML = report.dp_results
      .map((r) => `<li><code>${r.kind}</code>: ${JSON.stringify(r.noisy)} (ε=${r.epsilon_spent})</li>`)
      .join("");
  }
}

// --- tradeoff panel --------------------------------------------------------------------

async function fetchTradeoff(): Promise<void> {
  setBanner(null);
  const epsilons = ($("eps-grid") as HTMLInputElement).value
    .split(",")
    .map((s) => Number(s.trim()))
    .filter((x) => x > 0);
  const csvFile = ($("tuning-csv") as HTMLInputElement).files?.[0];
  if (!csvFile || epsilons.length === 0) {
    setBanner("tradeoff needs a plaintext CSV and a positive epsilon grid");
    return;
  }
  try {
    const { points } = await api.tradeoff({
      schema: buildPipelineConfig(form).schema,
      query: buildQueryJson(form.query),
      epsilons,
      trials: Number(($("trials-input") as HTMLInputElement).value) || 1000,
      seed: form.seed ?? undefined,
      csv_b64: await fileToBase64(csvFile),
    });
    tradeoff.setPoints(points);
    renderTradeoff();
  } catch (error) {
    setBanner(error instanceof ApiError ? error.message : String(error));
  }
}

function renderTradeoff(): void {
  if (!tradeoff.hasPoints) {
    return;
  }
  const selected = tradeoff.selected;
  $("tradeoff-chart").innerHTML = renderTradeoffSVG(
    tradeoffChartModel(tradeoff.points), selected.epsilon,
  );
  const slider = $("eps-slider") as HTMLInputElement;
  slider.value = String(tradeoff.positionFor(selected.epsilon));
  $("eps-readout").textContent = readoutText(selected);
}

function onSliderInput(): void {
  const slider = $("eps-slider") as HTMLInputElement;
  const point = tradeoff.selectNearest(tradeoff.epsilonAt(Number(slider.value)));
  renderTradeoff();
  // The chosen epsilon feeds back into the query form for the next run.
  ($("epsilon-input") as HTMLInputElement).value = String(point.epsilon);
  form.query.epsilon = point.epsilon;
  refreshValidation();
}

// --- attestation demo ---------------------------------------------------------------------

async function runAttestation(): Promise<void> {
  try {
    const tamper = ($("tamper-select") as HTMLSelectElement).value;
    const transcript = await api.attestSession(tamper || undefined);
    const outcome = transcript.outcome.status === "success"
      ? "success — 11/11 steps"
      : `rejected at step ${transcript.outcome.step} (${transcript.outcome.reason})`;
    $("attest-outcome").textContent = outcome;
    $("attest-steps").innerHTML = transcript.steps
      .map((s) => `<li>${s.step}. ${s.from} → ${s.to} <code>${s.type}</code></li>`)
      .join("");
  } catch (error) {
    setBanner(error instanceof ApiError ? error.message : String(error));
  }
}

// --- boot ------------------------------------------------------------------------------------

export function boot(): void {
  $("add-column").addEventListener("click", () => {
    const column: ColumnForm = { name: "", role: "insensitive", kind: "categorical", userId: false };
    form.columns.push(column);
    renderColumns();
  });
  for (const id of [
    "kanon-enabled", "dp-enabled", "k-input", "suppression-input", "query-kind",
    "epsilon-input", "value-column", "clamp-lo", "clamp-hi", "predicate-column",
    "predicate-value", "group-by", "user-level", "user-column", "contribution-cap",
    "batch-size", "seed-input", "provider-key",
  ]) {
    $(id).addEventListener("change", readReleaseInputs);
    $(id).addEventListener("input", readReleaseInputs);
  }
  $("submit-run").addEventListener("click", submitRun);
  $("fetch-tradeoff").addEventListener("click", fetchTradeoff);
  $("eps-slider").addEventListener("input", onSliderInput);
  $("run-attest").addEventListener("click", runAttestation);
  wireFileInputs();
  renderColumns();
  readReleaseInputs();
}

if (typeof document !== "undefined") {
  document.addEventListener("DOMContentLoaded", boot);
}
