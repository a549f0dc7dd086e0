// Thin client for the prediction service: POST /predict and GET /health.

import {
  PredictionResult,
  PredictRequestBody,
  parsePredictionResult,
  serializeRequest,
} from "./schema.js";

export type FetchLike = typeof fetch;

export class ValidationFailure extends Error {
  constructor(public readonly fields: { field: string; message: string }[]) {
    super(fields.map((f) => `${f.field}: ${f.message}`).join("; "));
  }
}

export class ServiceUnavailable extends Error {}

export interface ApiClient {
  predict(body: PredictRequestBody): Promise<PredictionResult>;
  health(): Promise<{ status: string }>;
}

export function createClient(baseUrl = "", fetchImpl: FetchLike = fetch): ApiClient {
  return {
    async predict(body: PredictRequestBody): Promise<PredictionResult> {
      const response = await fetchImpl(`${baseUrl}/predict`, {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: serializeRequest(body),
      });
      if (response.status === 400) {
        const payload = await response.json();
        throw new ValidationFailure(payload.detail ?? []);
      }
      if (response.status === 503) {
        throw new ServiceUnavailable("models not loaded yet");
      }
      if (!response.ok) {
        throw new Error(`prediction failed with status ${response.status}`);
      }
      return parsePredictionResult(await response.json());
    },

    async health(): Promise<{ status: string }> {
      const response = await fetchImpl(`${baseUrl}/health`);
      if (!response.ok) {
        throw new ServiceUnavailable(`health returned ${response.status}`);
      }
      return (await response.json()) as { status: string };
    },
  };
}
