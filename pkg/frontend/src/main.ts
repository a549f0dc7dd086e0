// Browser wiring: form inputs -> session state -> rendered panels.

import { createClient } from "./api.js";
import {
  acceptPrediction,
  canSubmit,
  createSession,
  rerunEntry,
  SessionState,
  submitPrediction,
} from "./state.js";
import { renderDraftIngredients, renderError, renderHistory, renderResultCard } from "./render.js";

const client = createClient("");
let state: SessionState = createSession();

function input(id: string): HTMLInputElement {
  return document.getElementById(id) as HTMLInputElement;
}

function readDraftFields(): void {
  state = {
    ...state,
    draft: {
      ...state.draft,
      title: input("title").value,
      tags: input("tags").value.split(",").map((t) => t.trim()).filter(Boolean),
      servings: Number(input("servings").value) || 4,
      target: input("target").value,
    },
  };
}

function paint(): void {
  document.getElementById("result")!.innerHTML = state.lastResult
    ? renderResultCard(state.lastResult)
    : "";
  document.getElementById("history")!.innerHTML = renderHistory(state.history);
  document.getElementById("banner")!.innerHTML = renderError(state);
  document.getElementById("ingredients")!.innerHTML = renderDraftIngredients(state);
  (document.getElementById("submit") as HTMLButtonElement).disabled = !canSubmit(state);
}

async function onSubmit(): Promise<void> {
  readDraftFields();
  paint();
  state = await submitPrediction(state, client);
  paint();
}

document.addEventListener("DOMContentLoaded", () => {
  document.getElementById("submit")!.addEventListener("click", () => void onSubmit());
  input("target").addEventListener("input", () => {
    readDraftFields();
    paint();
  });
  document.body.addEventListener("click", async (event) => {
    const el = event.target as HTMLElement;
    if (el.dataset.action === "accept") {
      state = acceptPrediction(state);
      paint();
    } else if (el.dataset.action === "rerun") {
      const entry = state.history[Number(el.dataset.index)];
      if (entry) {
        state = await rerunEntry(state, client, entry);
        paint();
      }
    }
  });
  paint();
});
