// HTML string rendering, kept DOM-free so it unit-tests in node.

import { PredictionResult } from "./schema.js";
import { QueryHistoryEntry, SessionState } from "./state.js";

function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

function percent(p: number): string {
  return `${(p * 100).toFixed(1)}%`;
}

/** Result card with the formatted quantity front and center. */
export function renderResultCard(result: PredictionResult): string {
  const exponent =
    result.exponent_confidence === null
      ? ""
      : `<li>exponent bin: ${percent(result.exponent_confidence)}</li>`;
  return [
    `<div class="result-card">`,
    `  <p class="quantity">${escapeHtml(result.formatted)}</p>`,
    `  <p class="normalized">${result.quantity_base.toFixed(3)} ${
      result.mtype === "volume" ? "ml" : "g"
    } normalized</p>`,
    `  <ul class="confidences">`,
    `    <li>type ${escapeHtml(result.mtype)}: ${percent(result.type_confidence)}</li>`,
    `    <li>unit ${escapeHtml(result.unit)}: ${percent(result.unit_confidence)}</li>`,
    exponent ? `    ${exponent}` : "",
    `  </ul>`,
    `  <button data-action="accept">Add to recipe</button>`,
    `</div>`,
  ]
    .filter(Boolean)
    .join("\n");
}

/** History list, newest first, each entry with a re-run action. */
export function renderHistory(entries: QueryHistoryEntry[]): string {
  if (entries.length === 0) {
    return `<p class="history-empty">No queries yet.</p>`;
  }
  const items = [...entries]
    .reverse()
    .map(
      (entry, i) =>
        `<li>` +
        `<span class="target">${escapeHtml(entry.request.target_name)}</span>` +
        ` &rarr; <span class="formatted">${escapeHtml(entry.result.formatted)}</span>` +
        ` <button data-action="rerun" data-index="${entries.length - 1 - i}">Re-run</button>` +
        `</li>`,
    )
    .join("\n");
  return `<ol class="history">\n${items}\n</ol>`;
}

export function renderError(state: SessionState): string {
  return state.error ? `<div class="banner error">${escapeHtml(state.error)}</div>` : "";
}

export function renderDraftIngredients(state: SessionState): string {
  if (state.draft.ingredients.length === 0) {
    return `<p class="ingredients-empty">No ingredients yet.</p>`;
  }
  const items = state.draft.ingredients
    .map((line) => `<li>${escapeHtml(line)}</li>`)
    .join("\n");
  return `<ul class="ingredients">\n${items}\n</ul>`;
}
