/** DOM wiring for the elicitation page.
 *
 * The page renders exclusively from server payloads; every statistic shown
 * comes from the service.  Keyboard-only entry works: inputs and buttons
 * are ordinary focusable elements in source order.
 */

import { Api, ApiError } from "./api.js";
import {
  DEFAULT_BOX,
  bandPath,
  formatNumber,
  formatPercent,
  gaugeArc,
  linePath,
  survivalScales,
  timeTicks,
} from "./chart.js";
import {
  PreviewGate,
  clearPin,
  dominantViolations,
  emptyState,
  isComplete,
  pinCurrent,
  type SessionState,
} from "./state.js";
import {
  FAMILIES,
  QUANTITY_NAMES,
  type FamilyName,
  type Preview,
  type QuantityName,
  type Quartiles,
} from "./types.js";
import { DEFAULT_KINDS, parseQuartileInput, validateQuartiles } from "./validate.js";

const api = new Api("..");  // the UI is mounted under /ui/
const gate = new PreviewGate();
let state: SessionState = emptyState();

const $ = <T extends HTMLElement>(sel: string): T => {
  const el = document.querySelector<T>(sel);
  if (!el) throw new Error(`missing element ${sel}`);
  return el;
};

const QUANTITY_LABELS: Record<QuantityName, string> = {
  S1_t0: "S1(t0): control-arm survival at t0",
  delta11: "d11: S1(t0) - S1(t1)",
  delta21: "d21: S2(t0) - S1(t0)",
  delta22: "d22: S2(t0) - S2(t1)",
};

function banner(message: string | null): void {
  const el = $("#banner");
  el.textContent = message ?? "";
  el.classList.toggle("visible", message !== null);
}

function buildQuantityRows(): void {
  const tbody = $("#quantities");
  for (const name of QUANTITY_NAMES) {
    const row = document.createElement("tr");
    row.dataset.name = name;
    row.innerHTML = `
      <th scope="row"><label for="${name}-q25">${QUANTITY_LABELS[name]}</label></th>
      ${["q25", "q50", "q75"]
        .map(
          (q) =>
            `<td><input id="${name}-${q}" data-q="${q}" type="number"
              step="0.01" inputmode="decimal" aria-label="${name} ${q}"></td>`,
        )
        .join("")}
      <td class="fit" id="${name}-fit">&ndash;</td>
      <td class="residual" id="${name}-residual"></td>
    `;
    const error = document.createElement("tr");
    error.className = "row-error";
    error.innerHTML = `<td colspan="6" id="${name}-error"></td>`;
    tbody.append(row, error);
    for (const input of row.querySelectorAll("input")) {
      input.addEventListener("change", () => void submitQuantity(name));
    }
  }
}

function readQuartiles(name: QuantityName): Quartiles {
  return {
    q25: parseQuartileInput($<HTMLInputElement>(`#${name}-q25`).value),
    q50: parseQuartileInput($<HTMLInputElement>(`#${name}-q50`).value),
    q75: parseQuartileInput($<HTMLInputElement>(`#${name}-q75`).value),
  };
}

function showRowError(name: QuantityName, message: string | null): void {
  $(`#${name}-error`).textContent = message ?? "";
}

async function submitQuantity(name: QuantityName): Promise<void> {
  const quartiles = readQuartiles(name);
  if ([quartiles.q25, quartiles.q50, quartiles.q75].every(Number.isNaN)) {
    return; // untouched row
  }
  const problem = validateQuartiles(name, quartiles);
  if (problem) {
    showRowError(name, problem); // invalid: no request is sent
    return;
  }
  showRowError(name, null);
  try {
    const fit = await api.putQuantity(state.id!, name, quartiles, DEFAULT_KINDS[name]);
    state.fits[name] = fit;
    $(`#${name}-fit`).textContent = fit.distribution;
    $(`#${name}-residual`).textContent = `resid ${fit.fit_residual.toExponential(2)}`;
    banner(null);
    if (isComplete(state)) void refreshPreview();
  } catch (err) {
    if (err instanceof ApiError && err.status === 422) {
      showRowError(name, err.message);
    } else {
      banner(`server error: ${(err as Error).message}`);
    }
  }
}

function renderPreviewInto(svgId: string, preview: Preview, ghost: Preview | null): void {
  const svg = $(svgId);
  const grid = preview.grid_years;
  const scales = survivalScales(grid);
  const box = DEFAULT_BOX;
  const parts: string[] = [];
  parts.push(
    `<rect x="${box.padLeft}" y="${box.padTop}"
       width="${box.width - box.padLeft - box.padRight}"
       height="${box.height - box.padTop - box.padBottom}" class="plot-bg"/>`,
  );
  for (const tick of timeTicks(grid)) {
    const x = scales.x(tick);
    parts.push(
      `<line x1="${x}" y1="${box.padTop}" x2="${x}" y2="${box.height - box.padBottom}" class="grid"/>`,
      `<text x="${x}" y="${box.height - 8}" class="tick">${tick}</text>`,
    );
  }
  for (const frac of [0, 0.25, 0.5, 0.75, 1]) {
    const y = scales.y(frac);
    parts.push(
      `<line x1="${box.padLeft}" y1="${y}" x2="${box.width - box.padRight}" y2="${y}" class="grid"/>`,
      `<text x="${box.padLeft - 6}" y="${y + 3}" class="tick y">${frac}</text>`,
    );
  }
  const layers: Array<{ p: Preview; cls: string }> = [];
  if (ghost) layers.push({ p: ghost, cls: "ghost" });
  layers.push({ p: preview, cls: "live" });
  for (const { p, cls } of layers) {
    for (const arm of ["1", "2"] as const) {
      const a = p.arms[arm];
      parts.push(
        `<path d="${bandPath(p.grid_years, a.lo, a.hi, scales)}" class="band arm${arm} ${cls}"/>`,
        `<path d="${linePath(p.grid_years, a.median, scales)}" class="median arm${arm} ${cls}"/>`,
      );
    }
  }
  svg.innerHTML = parts.join("\n");
}

function renderPreview(preview: Preview): void {
  state.preview = preview;
  renderPreviewInto("#chart", preview, state.pinned);

  const gaugePath = $("#gauge-fill");
  gaugePath.setAttribute("d", gaugeArc(preview.acceptance_rate));
  $("#gauge-label").textContent = formatPercent(preview.acceptance_rate);

  for (const arm of ["1", "2"] as const) {
    const [q25, q50, q75] = preview.arms[arm].mean_quartiles;
    $(`#mean-arm${arm}`).textContent =
      `${formatNumber(q25, 2)} / ${formatNumber(q50, 2)} / ${formatNumber(q75, 2)} years`;
  }

  const list = $("#violations");
  list.innerHTML = "";
  const entries = dominantViolations(preview.violations);
  if (entries.length === 0) {
    list.innerHTML = "<li>no constraint rejections</li>";
  }
  for (const { name, count } of entries) {
    const li = document.createElement("li");
    li.textContent = `${name}: ${count} of ${preview.n_proposed} proposals`;
    list.append(li);
  }
  $("#preview-meta").textContent =
    `${preview.family}, ${preview.n_preview} draws, seed ${preview.seed}`;
}

async function refreshPreview(): Promise<void> {
  if (!state.id || !isComplete(state)) return;
  const family = $<HTMLSelectElement>("#family").value as FamilyName;
  const seed = Number($<HTMLInputElement>("#seed").value) || 0;
  const { token, signal } = gate.begin();
  $("#preview-meta").textContent = "computing preview...";
  try {
    const preview = await api.getPreview(state.id, family, seed, 20_000, signal);
    if (!gate.accepts(token)) return; // a newer request superseded this one
    banner(null);
    renderPreview(preview);
  } catch (err) {
    if (!gate.accepts(token) || (err as Error).name === "AbortError") return;
    if (err instanceof ApiError && err.status === 409) {
      banner(`infeasible beliefs: ${err.message}`);
      $("#preview-meta").textContent = "preview unavailable";
    } else if (err instanceof ApiError && err.status === 422) {
      $("#preview-meta").textContent = err.message;
    } else {
      banner(`server error: ${(err as Error).message}`);
    }
  }
}

async function exportConfig(): Promise<void> {
  if (!state.id) return;
  try {
    const cfg = await api.exportConfig(state.id);
    const blob = new Blob([JSON.stringify(cfg, null, 2) + "\n"], {
      type: "application/json",
    });
    const url = URL.createObjectURL(blob);
    const a = document.createElement("a");
    a.href = url;
    a.download = "elicited_config.json";
    a.click();
    URL.revokeObjectURL(url);
  } catch (err) {
    banner(`export failed: ${(err as Error).message}`);
  }
}

async function init(): Promise<void> {
  buildQuantityRows();
  const familySelect = $<HTMLSelectElement>("#family");
  for (const family of FAMILIES) {
    const opt = document.createElement("option");
    opt.value = family;
    opt.textContent = family;
    familySelect.append(opt);
  }
  familySelect.addEventListener("change", () => void refreshPreview());
  $("#seed").addEventListener("change", () => void refreshPreview());
  $("#pin").addEventListener("click", () => {
    state = pinCurrent(state);
    if (state.preview) renderPreviewInto("#chart", state.preview, state.pinned);
  });
  $("#unpin").addEventListener("click", () => {
    state = clearPin(state);
    if (state.preview) renderPreviewInto("#chart", state.preview, state.pinned);
  });
  $("#export").addEventListener("click", () => void exportConfig());

  try {
    const session = await api.createSession();
    state.id = session.id;
    $("#session-meta").textContent =
      `session ${session.id} (t0=${session.t0}y, t1=${session.t1}y)`;
  } catch (err) {
    banner(`could not reach the elicitation service: ${(err as Error).message}`);
  }
}

void init();
