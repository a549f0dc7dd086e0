// Wire schema shared with the prediction service. Field names and the
// request key order are part of the contract; see fixtures/.

export interface PredictRequestBody {
  target_name: string;
  title: string;
  tags: string[];
  other_ingredients: string[];
  servings: number;
}

export interface PredictionResult {
  mtype: string;
  unit: string;
  quantity_base: number;
  formatted: string;
  type_confidence: number;
  unit_confidence: number;
  exponent_confidence: number | null;
}

/** Serialize with the documented key order so bodies are byte-stable. */
export function serializeRequest(body: PredictRequestBody): string {
  return JSON.stringify({
    target_name: body.target_name,
    title: body.title,
    tags: body.tags,
    other_ingredients: body.other_ingredients,
    servings: body.servings,
  });
}

export class SchemaViolation extends Error {}

function expectType(obj: Record<string, unknown>, field: string, kind: "string" | "number"): void {
  if (typeof obj[field] !== kind) {
    throw new SchemaViolation(`field ${field} must be a ${kind}`);
  }
}

/** Validate a service response; throws SchemaViolation on a bad shape. */
export function parsePredictionResult(payload: unknown): PredictionResult {
  if (typeof payload !== "object" || payload === null) {
    throw new SchemaViolation("response body must be an object");
  }
  const obj = payload as Record<string, unknown>;
  expectType(obj, "mtype", "string");
  expectType(obj, "unit", "string");
  expectType(obj, "quantity_base", "number");
  expectType(obj, "formatted", "string");
  expectType(obj, "type_confidence", "number");
  expectType(obj, "unit_confidence", "number");
  if (obj.exponent_confidence !== null && typeof obj.exponent_confidence !== "number") {
    throw new SchemaViolation("field exponent_confidence must be a number or null");
  }
  if ((obj.quantity_base as number) <= 0) {
    throw new SchemaViolation("quantity_base must be positive");
  }
  return obj as unknown as PredictionResult;
}
