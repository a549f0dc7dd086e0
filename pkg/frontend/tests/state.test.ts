// Session-state transitions: submit, accept, history, re-run.

import { describe, expect, it, vi } from "vitest";

import { ApiClient } from "../src/api.js";
import { PredictionResult } from "../src/schema.js";
import {
  acceptPrediction,
  canSubmit,
  createSession,
  rerunEntry,
  SessionState,
  submitPrediction,
} from "../src/state.js";

const RESULT: PredictionResult = {
  mtype: "volume",
  unit: "teaspoon",
  quantity_base: 4.929,
  formatted: "1 teaspoon",
  type_confidence: 0.97,
  unit_confidence: 0.81,
  exponent_confidence: 0.88,
};

function stubClient(result: PredictionResult = RESULT): ApiClient & { calls: unknown[] } {
  const calls: unknown[] = [];
  return {
    calls,
    async predict(body) {
      calls.push(body);
      return result;
    },
    async health() {
      return { status: "ok" };
    },
  };
}

function draftState(): SessionState {
  const state = createSession();
  return {
    ...state,
    draft: {
      title: "Worked Out Prawns",
      tags: ["main-dish"],
      ingredients: ["onion", "red pepper"],
      servings: 4,
      target: "cumin",
    },
  };
}

describe("submit", () => {
  it("is disabled for an empty target", () => {
    expect(canSubmit(createSession())).toBe(false);
    expect(canSubmit(draftState())).toBe(true);
  });

  it("is disabled while a prediction is in flight", () => {
    expect(canSubmit({ ...draftState(), pending: true })).toBe(false);
  });

  it("stores the result and appends one history entry", async () => {
    const client = stubClient();
    const next = await submitPrediction(draftState(), client, () => 1234);
    expect(next.lastResult?.formatted).toBe("1 teaspoon");
    expect(next.history).toHaveLength(1);
    expect(next.history[0].timestamp).toBe(1234);
    expect(next.pending).toBe(false);
  });

  it("history is append-only across submissions", async () => {
    const client = stubClient();
    let state = await submitPrediction(draftState(), client, () => 1);
    const firstEntry = state.history[0];
    state = await submitPrediction(state, client, () => 2);
    expect(state.history).toHaveLength(2);
    expect(state.history[0]).toBe(firstEntry);
  });

  it("keeps the draft untouched on failure", async () => {
    const failing: ApiClient = {
      predict: vi.fn(async () => {
        throw new TypeError("fetch failed");
      }),
      health: async () => ({ status: "ok" }),
    };
    const before = draftState();
    const next = await submitPrediction(before, failing);
    expect(next.error).toMatch(/could not reach/);
    expect(next.draft).toEqual(before.draft);
    expect(next.history).toHaveLength(0);
  });
});

describe("accept", () => {
  it("appends exactly one ingredient and mutates nothing else", async () => {
    const client = stubClient();
    const submitted = await submitPrediction(draftState(), client);
    const accepted = acceptPrediction(submitted);
    expect(accepted.draft.ingredients).toEqual([
      "onion",
      "red pepper",
      "cumin (1 teaspoon)",
    ]);
    expect(accepted.draft.title).toBe(submitted.draft.title);
    expect(accepted.draft.tags).toEqual(submitted.draft.tags);
    expect(accepted.draft.servings).toBe(submitted.draft.servings);
    expect(accepted.draft.target).toBe(submitted.draft.target);
    expect(accepted.history).toEqual(submitted.history);
  });

  it("is a no-op without a pending result", () => {
    const state = draftState();
    expect(acceptPrediction(state)).toBe(state);
  });

  it("enables the next what-if query with the accepted ingredient in context", async () => {
    const client = stubClient();
    let state = await submitPrediction(draftState(), client);
    state = acceptPrediction(state);
    state = { ...state, draft: { ...state.draft, target: "salt" } };
    await submitPrediction(state, client);
    const secondBody = client.calls[1] as { other_ingredients: string[] };
    expect(secondBody.other_ingredients).toContain("cumin (1 teaspoon)");
  });
});

describe("re-run", () => {
  it("issues an identical request body", async () => {
    const client = stubClient();
    let state = await submitPrediction(draftState(), client);
    const entry = state.history[0];
    state = { ...state, draft: { ...state.draft, target: "salt", title: "Changed" } };
    await rerunEntry(state, client, entry);
    expect(client.calls).toHaveLength(2);
    expect(client.calls[1]).toEqual(client.calls[0]);
  });
});
