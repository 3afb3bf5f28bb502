/**
 * Scripted-accuracy stub: answers with the true label at a scheduled rate
 * so evaluation harnesses can be tested without any ML dependency.
 *
 * Schedule file:
 * {
 *   "class_count": 10,
 *   "seed": 7,
 *   "labels_path": "manifest.jsonl",      // JSONL with {"id", "label"}, or
 *   "labels": {"img_000": 3, ...},        // an inline map
 *   "default_accuracy": 0.9,
 *   "rules": [{"match": "s6", "accuracy": 0.45}]
 * }
 *
 * The first rule whose "match" substring occurs in the request path wins;
 * otherwise default_accuracy applies (baseline requests reference the
 * untransformed corpus, so they take the default). Correct answers follow
 * a quota per rule: after n requests exactly round-down(accuracy * n) were
 * correct, so realized accuracy equals the schedule whenever
 * accuracy * n is integral. The seeded generator picks which wrong class
 * is emitted.
 */

import { readFileSync } from "node:fs";

import { PredictRequest, PredictResponse } from "./protocol.js";
import { Rng, fnv1a32 } from "./rng.js";

export interface ScheduleRule {
  match: string;
  accuracy: number;
}

export interface StubConfig {
  classCount: number;
  seed: number;
  labels: Map<string, number>;
  defaultAccuracy: number;
  rules: ScheduleRule[];
}

export function loadStubConfig(path: string): StubConfig {
  const raw = JSON.parse(readFileSync(path, "utf-8")) as Record<string, unknown>;
  const classCount = Number(raw.class_count);
  if (!Number.isInteger(classCount) || classCount < 2) {
    throw new Error(`schedule: class_count must be an integer >= 2, got ${raw.class_count}`);
  }
  const labels = new Map<string, number>();
  if (typeof raw.labels_path === "string") {
    const text = readFileSync(raw.labels_path, "utf-8");
    for (const line of text.split("\n")) {
      if (line.trim() === "") continue;
      const entry = JSON.parse(line) as { id?: string; label?: number };
      if (typeof entry.id === "string" && typeof entry.label === "number") {
        labels.set(entry.id, entry.label);
      }
    }
  } else if (typeof raw.labels === "object" && raw.labels !== null) {
    for (const [id, label] of Object.entries(raw.labels as Record<string, number>)) {
      labels.set(id, Number(label));
    }
  }
  if (labels.size === 0) {
    throw new Error("schedule: needs 'labels' or 'labels_path' with at least one entry");
  }
  const rules: ScheduleRule[] = [];
  if (Array.isArray(raw.rules)) {
    for (const rule of raw.rules as Array<Record<string, unknown>>) {
      const accuracy = Number(rule.accuracy);
      if (typeof rule.match !== "string" || !(accuracy >= 0 && accuracy <= 1)) {
        throw new Error(`schedule: bad rule ${JSON.stringify(rule)}`);
      }
      rules.push({ match: rule.match, accuracy });
    }
  }
  const defaultAccuracy = raw.default_accuracy === undefined ? 1.0 : Number(raw.default_accuracy);
  if (!(defaultAccuracy >= 0 && defaultAccuracy <= 1)) {
    throw new Error(`schedule: default_accuracy out of range: ${raw.default_accuracy}`);
  }
  const seed = raw.seed === undefined ? 0 : Number(raw.seed);
  return { classCount, seed, labels, defaultAccuracy, rules };
}

class QuotaCounter {
  private seen = 0;
  private correct = 0;

  constructor(private accuracy: number) {}

  /** True when this request must be answered correctly to keep the
   * realized rate at round-down(accuracy * seen). */
  take(): boolean {
    this.seen += 1;
    const target = Math.floor(this.accuracy * this.seen + 1e-9);
    if (this.correct < target) {
      this.correct += 1;
      return true;
    }
    return false;
  }
}

export class StubPredictor {
  private quotas = new Map<string, QuotaCounter>();
  private rng: Rng;

  constructor(private config: StubConfig) {
    this.rng = new Rng(config.seed >>> 0);
  }

  private ruleFor(path: string): { key: string; accuracy: number } {
    for (let i = 0; i < this.config.rules.length; i++) {
      const rule = this.config.rules[i];
      if (path.includes(rule.match)) {
        return { key: `rule_${i}`, accuracy: rule.accuracy };
      }
    }
    return { key: "default", accuracy: this.config.defaultAccuracy };
  }

  predict(request: PredictRequest): PredictResponse {
    const label = this.config.labels.get(request.id);
    if (label === undefined) {
      return { id: request.id, error: `no label for id '${request.id}' in schedule` };
    }
    const { key, accuracy } = this.ruleFor(request.path);
    let quota = this.quotas.get(key);
    if (quota === undefined) {
      quota = new QuotaCounter(accuracy);
      this.quotas.set(key, quota);
    }
    const c = this.config.classCount;
    // Mix the id into the stream so wrong-label draws differ per image.
    this.rng = new Rng((this.config.seed ^ fnv1a32(request.id)) >>> 0);
    const predicted = quota.take()
      ? label
      : (label + 1 + this.rng.nextInt(c - 1)) % c;
    const rest = 0.1 / (c - 1);
    const scores = new Array<number>(c).fill(rest);
    scores[predicted] = 0.9;
    return { id: request.id, scores, prob: true };
  }
}
