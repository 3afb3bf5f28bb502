/**
 * Wire protocol: UTF-8 JSON lines over stdin/stdout.
 *
 * Request:   {"id": string, "path": string}
 * Response:  {"id": string, "scores": number[], "prob": boolean}
 *            {"id": string, "error": string}
 *
 * An empty input line asks the process to shut down cleanly.
 */

export interface PredictRequest {
  id: string;
  path: string;
}

export interface ScoreResponse {
  id: string;
  scores: number[];
  prob: boolean;
}

export interface ErrorResponse {
  id: string;
  error: string;
}

export type PredictResponse = ScoreResponse | ErrorResponse;

export class ProtocolError extends Error {}

export function parseRequestLine(line: string): PredictRequest {
  let obj: unknown;
  try {
    obj = JSON.parse(line);
  } catch (err) {
    throw new ProtocolError(`malformed request JSON: ${String(err)}`);
  }
  if (typeof obj !== "object" || obj === null) {
    throw new ProtocolError("request is not an object");
  }
  const req = obj as Record<string, unknown>;
  if (typeof req.id !== "string" || req.id.length === 0) {
    throw new ProtocolError("request missing string 'id'");
  }
  if (typeof req.path !== "string" || req.path.length === 0) {
    throw new ProtocolError(`request ${req.id} missing string 'path'`);
  }
  return { id: req.id, path: req.path };
}

export function serializeResponse(res: PredictResponse): string {
  return JSON.stringify(res) + "\n";
}

/**
 * Validate one response line against the grammar; returns the parsed
 * response or throws with the reason. Used to check recorded transcripts.
 */
export function validateResponseLine(line: string): PredictResponse {
  let obj: unknown;
  try {
    obj = JSON.parse(line);
  } catch (err) {
    throw new ProtocolError(`malformed response JSON: ${String(err)}`);
  }
  if (typeof obj !== "object" || obj === null || Array.isArray(obj)) {
    throw new ProtocolError("response is not an object");
  }
  const res = obj as Record<string, unknown>;
  if (typeof res.id !== "string" || res.id.length === 0) {
    throw new ProtocolError("response missing string 'id'");
  }
  if ("error" in res) {
    if (typeof res.error !== "string" || res.error.length === 0) {
      throw new ProtocolError(`response ${res.id}: 'error' must be a non-empty string`);
    }
    const extras = Object.keys(res).filter((k) => k !== "id" && k !== "error");
    if (extras.length > 0) {
      throw new ProtocolError(`response ${res.id}: unexpected keys ${extras.join(", ")}`);
    }
    return { id: res.id, error: res.error };
  }
  if (!Array.isArray(res.scores) || res.scores.length === 0) {
    throw new ProtocolError(`response ${res.id}: 'scores' must be a non-empty array`);
  }
  for (const value of res.scores) {
    if (typeof value !== "number" || !Number.isFinite(value)) {
      throw new ProtocolError(`response ${res.id}: non-finite score`);
    }
  }
  if (typeof res.prob !== "boolean") {
    throw new ProtocolError(`response ${res.id}: 'prob' must be a boolean`);
  }
  if (res.prob) {
    const scores = res.scores as number[];
    if (scores.some((v) => v < 0 || v > 1)) {
      throw new ProtocolError(`response ${res.id}: probabilities outside [0, 1]`);
    }
  }
  const extras = Object.keys(res).filter((k) => !["id", "scores", "prob"].includes(k));
  if (extras.length > 0) {
    throw new ProtocolError(`response ${res.id}: unexpected keys ${extras.join(", ")}`);
  }
  return { id: res.id, scores: res.scores as number[], prob: res.prob };
}

/** Validate a whole recorded transcript (one response per line). */
export function validateTranscript(text: string): PredictResponse[] {
  const out: PredictResponse[] = [];
  const lines = text.split("\n");
  lines.forEach((line, index) => {
    if (line.trim() === "") return;
    try {
      out.push(validateResponseLine(line));
    } catch (err) {
      throw new ProtocolError(`line ${index + 1}: ${(err as Error).message}`);
    }
  });
  return out;
}
