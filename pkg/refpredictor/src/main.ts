#!/usr/bin/env node
/** Entry point: `refpredictor --model DIR` serves a local tfjs classifier,
 * `refpredictor --stub-schedule FILE` serves the scripted-accuracy stub. */

import { parseArgs } from "node:util";

import { loadStubConfig, StubPredictor } from "./stub.js";
import { serveLoop } from "./server.js";

async function main(): Promise<number> {
  const { values } = parseArgs({
    options: {
      model: { type: "string" },
      "stub-schedule": { type: "string" },
    },
  });
  const model = values.model;
  const schedule = values["stub-schedule"];
  if ((model === undefined) === (schedule === undefined)) {
    process.stderr.write("usage: refpredictor (--model DIR | --stub-schedule FILE)\n");
    return 2;
  }
  if (schedule !== undefined) {
    const stub = new StubPredictor(loadStubConfig(schedule));
    await serveLoop((req) => stub.predict(req));
    return 0;
  }
  // tfjs is heavy; only pull it in for real model serving.
  const { Classifier } = await import("./classify.js");
  const classifier = await Classifier.load(model!);
  await serveLoop((req) => classifier.predict(req));
  return 0;
}

main().then(
  (code) => process.exit(code),
  (err) => {
    process.stderr.write(`refpredictor: ${(err as Error).message ?? String(err)}\n`);
    process.exit(1);
  },
);
