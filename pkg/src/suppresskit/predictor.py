"""Boundary to external models: prediction file ingestion and a streaming
subprocess protocol.

Wire format (UTF-8, newline-delimited JSON, no BOM):

  request   {"id": str, "path": str}
  response  {"id": str, "scores": [numbers], "prob": bool}
            {"id": str, "error": str}          (per-id failure)

Requests are pipelined up to a window; responses may arrive in any order
and are keyed by id with at-most-once accounting. A final empty input line
asks the child to shut down. Ingestion is total: every requested id ends
with exactly one record or the run fails loudly.
"""

from __future__ import annotations

import json
import os
import queue
import subprocess
import threading
import time
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

DEFAULT_TIMEOUT_MS = 60000
TIMEOUT_ENV_VAR = "SUPPRESSKIT_PREDICTOR_TIMEOUT_MS"
DEFAULT_PIPELINE_WINDOW = 32
_PROB_SUM_TOL = 1e-4


class PredictorError(Exception):
    """Protocol violation, timeout, or incomplete prediction coverage."""


@dataclass(frozen=True)
class PredictionRecord:
    image_id: str
    scores: np.ndarray
    is_probability: bool

    def __post_init__(self):
        scores = np.asarray(self.scores, dtype=np.float64)
        scores.flags.writeable = False
        object.__setattr__(self, "scores", scores)


@dataclass(frozen=True)
class PredictorHandle:
    """mode 'file': location is a predictions file (or a directory of them,
    one per sweep step). mode 'subprocess': location is a command line."""

    mode: str
    location: str
    class_count: int

    def __post_init__(self):
        if self.mode not in ("file", "subprocess"):
            raise ValueError(f"predictor mode must be 'file' or 'subprocess', got {self.mode!r}")
        if self.class_count < 2:
            raise ValueError(f"class_count must be >= 2, got {self.class_count}")


def softmax(logits: np.ndarray) -> np.ndarray:
    """Shift-invariant softmax (max-subtracted for overflow safety)."""
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max()
    e = np.exp(z)
    return e / e.sum()


def _validate_record(image_id: str, scores: np.ndarray, is_probability: bool,
                     class_count: int | None, multi_label: bool, where: str) -> PredictionRecord:
    if scores.ndim != 1 or scores.size == 0:
        raise PredictorError(f"{where}: scores for {image_id!r} must be a non-empty vector")
    if not np.isfinite(scores).all():
        raise PredictorError(f"{where}: non-finite score for {image_id!r}")
    if class_count is not None and scores.size != class_count:
        raise PredictorError(
            f"{where}: {image_id!r} has {scores.size} scores, expected {class_count}"
        )
    if is_probability:
        if scores.min() < 0.0 or scores.max() > 1.0:
            raise PredictorError(f"{where}: probabilities for {image_id!r} outside [0, 1]")
        if not multi_label and scores.sum() > 1.0 + _PROB_SUM_TOL:
            raise PredictorError(
                f"{where}: probabilities for {image_id!r} sum to {scores.sum():.6f} > 1"
            )
        probs = scores
    else:
        probs = softmax(scores)
    return PredictionRecord(image_id=image_id, scores=probs, is_probability=True)


def _parse_response_line(line: str, line_no: int, where: str) -> dict:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise PredictorError(f"{where}: malformed JSON on line {line_no}: {exc}") from exc
    if not isinstance(obj, dict) or not isinstance(obj.get("id"), str):
        raise PredictorError(f"{where}: line {line_no} is not an object with a string 'id'")
    return obj


def load_predictions(path, class_count: int | None = None,
                     multi_label: bool = False) -> list[PredictionRecord]:
    """Read a JSON-lines prediction file; logits (prob=false) are converted
    to probabilities. Multi-label heads are independent probabilities, so
    the per-vector sum constraint applies only to single-label scores."""
    records: dict[str, PredictionRecord] = {}
    size: int | None = class_count
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            obj = _parse_response_line(line, line_no, str(path))
            image_id = obj["id"]
            if image_id in records:
                raise PredictorError(f"{path}: duplicate prediction for id {image_id!r}")
            if "scores" not in obj:
                raise PredictorError(f"{path}: line {line_no} missing 'scores'")
            scores = np.asarray(obj["scores"], dtype=np.float64)
            record = _validate_record(image_id, scores, bool(obj.get("prob", False)),
                                      size, multi_label, str(path))
            if size is None:
                size = record.scores.size
            records[image_id] = record
    return list(records.values())


def _timeout_seconds() -> float:
    raw = os.environ.get(TIMEOUT_ENV_VAR)
    if raw is None:
        return DEFAULT_TIMEOUT_MS / 1000.0
    try:
        return max(1, int(raw)) / 1000.0
    except ValueError:
        raise PredictorError(f"{TIMEOUT_ENV_VAR} must be an integer, got {raw!r}") from None


def _reader(stream, lines: "queue.Queue[str | None]") -> None:
    for line in stream:
        lines.put(line)
    lines.put(None)


def run_subprocess_predictor(handle: PredictorHandle,
                             requests: Sequence[tuple[str, str]],
                             window: int = DEFAULT_PIPELINE_WINDOW,
                             multi_label: bool = False) -> list[PredictionRecord]:
    """Stream (id, path) requests through the child and collect one record
    per id. Raises on timeout, malformed lines, premature exit, duplicate
    ids, or missing ids at end of stream."""
    if handle.mode != "subprocess":
        raise ValueError("run_subprocess_predictor requires a subprocess handle")
    ids = [image_id for image_id, _ in requests]
    if len(set(ids)) != len(ids):
        raise PredictorError("duplicate image ids in predictor request batch")
    timeout = _timeout_seconds()
    where = f"predictor {handle.location!r}"

    proc = subprocess.Popen(
        handle.location, shell=True, text=True, encoding="utf-8",
        stdin=subprocess.PIPE, stdout=subprocess.PIPE,
    )
    lines: "queue.Queue[str | None]" = queue.Queue()
    reader = threading.Thread(target=_reader, args=(proc.stdout, lines), daemon=True)
    reader.start()

    records: dict[str, PredictionRecord] = {}
    errors: dict[str, str] = {}
    pending: set[str] = set()
    line_no = 0
    next_request = 0
    try:
        while len(records) + len(errors) < len(requests):
            while next_request < len(requests) and len(pending) < window:
                image_id, path = requests[next_request]
                try:
                    proc.stdin.write(json.dumps({"id": image_id, "path": path}) + "\n")
                    proc.stdin.flush()
                except (BrokenPipeError, OSError) as exc:
                    raise PredictorError(f"{where}: child closed its input: {exc}") from exc
                pending.add(image_id)
                next_request += 1

            deadline = time.monotonic() + timeout
            try:
                line = lines.get(timeout=max(0.0, deadline - time.monotonic()))
            except queue.Empty:
                raise PredictorError(
                    f"{where}: timeout after {timeout:.1f}s waiting for "
                    f"{sorted(pending)[:5]}"
                ) from None
            if line is None:
                missing = sorted(set(ids) - set(records) - set(errors))
                raise PredictorError(
                    f"{where}: child exited before answering {len(missing)} "
                    f"request(s): {missing[:5]}"
                )
            line_no += 1
            if not line.strip():
                continue
            obj = _parse_response_line(line, line_no, where)
            image_id = obj["id"]
            if image_id in records or image_id in errors:
                raise PredictorError(f"{where}: duplicate response for id {image_id!r}")
            if image_id not in pending:
                raise PredictorError(f"{where}: response for unknown id {image_id!r}")
            pending.discard(image_id)
            if "error" in obj:
                errors[image_id] = str(obj["error"])
                continue
            if "scores" not in obj:
                raise PredictorError(f"{where}: line {line_no} missing 'scores'")
            scores = np.asarray(obj["scores"], dtype=np.float64)
            records[image_id] = _validate_record(
                image_id, scores, bool(obj.get("prob", False)),
                handle.class_count, multi_label, where,
            )

        try:
            proc.stdin.write("\n")
            proc.stdin.flush()
            proc.stdin.close()
        except (BrokenPipeError, OSError):
            pass
        proc.wait(timeout=timeout)
    finally:
        if proc.poll() is None:
            proc.kill()
            proc.wait()

    if errors:
        listing = "; ".join(f"{k}: {v}" for k, v in sorted(errors.items())[:5])
        raise PredictorError(f"{where}: {len(errors)} per-id failure(s): {listing}")
    missing = sorted(set(ids) - set(records))
    if missing:
        raise PredictorError(f"missing predictions: {missing}")
    return [records[image_id] for image_id in ids]


def coverage_check(records: Iterable[PredictionRecord], expected_ids: Iterable[str],
                   where: str = "predictions") -> dict[str, PredictionRecord]:
    """Exactly-once check of records against an id set; returns id -> record."""
    by_id: dict[str, PredictionRecord] = {}
    for rec in records:
        if rec.image_id in by_id:
            raise PredictorError(f"{where}: duplicate prediction for id {rec.image_id!r}")
        by_id[rec.image_id] = rec
    expected = set(expected_ids)
    missing = sorted(expected - set(by_id))
    if missing:
        raise PredictorError(f"{where}: missing predictions: {missing}")
    extra = sorted(set(by_id) - expected)
    if extra:
        raise PredictorError(f"{where}: predictions for unknown ids: {extra}")
    return by_id
