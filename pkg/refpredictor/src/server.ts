/** Single-threaded request loop: one JSON request per stdin line, one JSON
 * response per stdout line; an empty line ends the loop cleanly. Per-id
 * failures become {"id", "error"} objects and the loop continues. */

import * as readline from "node:readline";

import { PredictRequest, PredictResponse, parseRequestLine, serializeResponse } from "./protocol.js";

export type Handler = (request: PredictRequest) => Promise<PredictResponse> | PredictResponse;

export async function serveLoop(handler: Handler): Promise<void> {
  const rl = readline.createInterface({ input: process.stdin, terminal: false });
  for await (const line of rl) {
    if (line.trim() === "") {
      break;
    }
    let request: PredictRequest;
    try {
      request = parseRequestLine(line);
    } catch (err) {
      process.stderr.write(`refpredictor: ignoring bad request line: ${(err as Error).message}\n`);
      continue;
    }
    let response: PredictResponse;
    try {
      response = await handler(request);
    } catch (err) {
      response = { id: request.id, error: (err as Error).message || String(err) };
    }
    process.stdout.write(serializeResponse(response));
  }
  rl.close();
}
