// Session state for the what-if flow: a recipe draft under construction,
// the prediction history, and the single-in-flight submit guard.

import { ApiClient, ValidationFailure, ServiceUnavailable } from "./api.js";
import { PredictionResult, PredictRequestBody } from "./schema.js";

export interface RecipeDraft {
  title: string;
  tags: string[];
  ingredients: string[];
  servings: number;
  target: string;
}

export interface QueryHistoryEntry {
  request: PredictRequestBody;
  result: PredictionResult;
  timestamp: number;
}

export interface SessionState {
  draft: RecipeDraft;
  history: QueryHistoryEntry[];
  pending: boolean;
  lastResult: PredictionResult | null;
  error: string | null;
}

export function createSession(): SessionState {
  return {
    draft: { title: "", tags: [], ingredients: [], servings: 4, target: "" },
    history: [],
    pending: false,
    lastResult: null,
    error: null,
  };
}

export function toRequestBody(draft: RecipeDraft): PredictRequestBody {
  return {
    target_name: draft.target,
    title: draft.title,
    tags: [...draft.tags],
    other_ingredients: [...draft.ingredients],
    servings: draft.servings,
  };
}

export function canSubmit(state: SessionState): boolean {
  return state.draft.target.trim().length > 0 && !state.pending;
}

async function run(
  state: SessionState,
  client: ApiClient,
  request: PredictRequestBody,
  now: () => number,
): Promise<SessionState> {
  const pendingState = { ...state, pending: true, error: null };
  try {
    const result = await client.predict(request);
    return {
      ...pendingState,
      pending: false,
      lastResult: result,
      history: [...state.history, { request, result, timestamp: now() }],
    };
  } catch (err) {
    const message =
      err instanceof ValidationFailure
        ? err.message
        : err instanceof ServiceUnavailable
          ? "service is still loading models"
          : "could not reach the prediction service";
    return { ...pendingState, pending: false, lastResult: null, error: message };
  }
}

/** Submit the current draft; no-op while a prediction is in flight. */
export async function submitPrediction(
  state: SessionState,
  client: ApiClient,
  now: () => number = Date.now,
): Promise<SessionState> {
  if (!canSubmit(state)) {
    return state;
  }
  return run(state, client, toRequestBody(state.draft), now);
}

/** Replay a past request with its identical body. */
export async function rerunEntry(
  state: SessionState,
  client: ApiClient,
  entry: QueryHistoryEntry,
  now: () => number = Date.now,
): Promise<SessionState> {
  if (state.pending) {
    return state;
  }
  return run(state, client, entry.request, now);
}

/** Accept the last prediction: appends exactly one ingredient line and
 * touches nothing else on the draft. */
export function acceptPrediction(state: SessionState): SessionState {
  if (!state.lastResult) {
    return state;
  }
  const line = `${state.draft.target} (${state.lastResult.formatted})`;
  return {
    ...state,
    draft: { ...state.draft, ingredients: [...state.draft.ingredients, line] },
    lastResult: null,
  };
}
