// API client behavior against a mocked fetch.

import { describe, expect, it, vi } from "vitest";

import { createClient, ServiceUnavailable, ValidationFailure } from "../src/api.js";

const RESULT = {
  mtype: "volume",
  unit: "teaspoon",
  quantity_base: 4.929,
  formatted: "1 teaspoon",
  type_confidence: 0.97,
  unit_confidence: 0.81,
  exponent_confidence: 0.88,
};

const BODY = {
  target_name: "cumin",
  title: "Worked Out Prawns",
  tags: ["main-dish"],
  other_ingredients: ["onion", "red pepper"],
  servings: 4,
};

function jsonResponse(status: number, payload: unknown): Response {
  return new Response(JSON.stringify(payload), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}

describe("predict", () => {
  it("posts the serialized body to /predict", async () => {
    const fetchMock = vi.fn(async () => jsonResponse(200, RESULT));
    const client = createClient("http://svc", fetchMock as unknown as typeof fetch);
    const result = await client.predict(BODY);
    expect(result.formatted).toBe("1 teaspoon");
    expect(fetchMock).toHaveBeenCalledOnce();
    const [url, init] = fetchMock.mock.calls[0] as unknown as [string, RequestInit];
    expect(url).toBe("http://svc/predict");
    expect(init.method).toBe("POST");
    expect(init.body).toBe(
      '{"target_name":"cumin","title":"Worked Out Prawns","tags":["main-dish"],' +
        '"other_ingredients":["onion","red pepper"],"servings":4}',
    );
  });

  it("maps 400 to a field-level validation failure", async () => {
    const fetchMock = vi.fn(async () =>
      jsonResponse(400, { detail: [{ field: "target_name", message: "Field required" }] }),
    );
    const client = createClient("", fetchMock as unknown as typeof fetch);
    await expect(client.predict({ ...BODY, target_name: "" })).rejects.toThrow(ValidationFailure);
    await expect(client.predict({ ...BODY, target_name: "" })).rejects.toThrow(/target_name/);
  });

  it("maps 503 to service-unavailable", async () => {
    const fetchMock = vi.fn(async () => jsonResponse(503, { detail: "loading" }));
    const client = createClient("", fetchMock as unknown as typeof fetch);
    await expect(client.predict(BODY)).rejects.toThrow(ServiceUnavailable);
  });

  it("propagates network failures", async () => {
    const fetchMock = vi.fn(async () => {
      throw new TypeError("fetch failed");
    });
    const client = createClient("", fetchMock as unknown as typeof fetch);
    await expect(client.predict(BODY)).rejects.toThrow("fetch failed");
  });
});

describe("health", () => {
  it("returns the payload when ok", async () => {
    const fetchMock = vi.fn(async () => jsonResponse(200, { status: "ok" }));
    const client = createClient("", fetchMock as unknown as typeof fetch);
    expect((await client.health()).status).toBe("ok");
  });

  it("throws while the service is loading", async () => {
    const fetchMock = vi.fn(async () => jsonResponse(503, { status: "loading" }));
    const client = createClient("", fetchMock as unknown as typeof fetch);
    await expect(client.health()).rejects.toThrow(ServiceUnavailable);
  });
});
