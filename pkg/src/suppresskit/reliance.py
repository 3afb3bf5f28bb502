"""Reliance evaluation: chance levels, decision rules, relative-accuracy
normalization, suppression sweeps, and domain aggregation.

Two normalizations are first-class: "ratio" (suppressed accuracy divided by
baseline accuracy) and "chance_rescaled" (chance maps to 0, baseline maps
to 1). Abstentions under the thresholded rule count as incorrect, and all
tie-breaks go to the lowest class index so outputs are deterministic.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .image import load_image, save_image
from .manifest import ManifestEntry
from .predictor import (
    PredictionRecord,
    PredictorError,
    PredictorHandle,
    coverage_check,
    load_predictions,
    run_subprocess_predictor,
)
from .transforms import TransformSpec, apply

log = logging.getLogger(__name__)

RATIO = "ratio"
CHANCE_RESCALED = "chance_rescaled"
NORMALIZATIONS = (RATIO, CHANCE_RESCALED)

THRESHOLD_RULE = "summed_softmax_threshold"
ARGMAX_RULE = "argmax"

BASELINE_TAG = "baseline"

# Slack above 1 that suppressed relative accuracy may reach through noise
# before we warn about it.
_CURVE_SLACK = 0.05

_IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg")

_DEFAULT_STRENGTH_PARAM = {
    "patch_shuffle": "grid",
    "patch_rotation": "grid",
    "grid_overlay": "grid",
    "bilateral": "d",
    "gaussian_blur": "sigma",
    "box_blur": "k",
    "median_filter": "k",
    "nlmeans": "h",
}


class EvaluationError(ValueError):
    pass


@dataclass(frozen=True)
class CategoryMapping:
    """Fine class index -> entry-level category index."""

    fine_to_entry: Mapping[int, int]
    num_entry: int
    entry_names: tuple[str, ...] | None = None
    num_fine: int | None = None

    def __post_init__(self):
        mapping = {int(k): int(v) for k, v in self.fine_to_entry.items()}
        if not mapping:
            raise EvaluationError("empty category mapping")
        if min(mapping) < 0:
            raise EvaluationError("fine class indices must be non-negative")
        if any(not 0 <= e < self.num_entry for e in mapping.values()):
            raise EvaluationError(f"entry indices must be in [0, {self.num_entry})")
        if self.num_fine is not None and max(mapping) >= self.num_fine:
            raise EvaluationError("fine index exceeds declared num_fine")
        if self.entry_names is not None and len(self.entry_names) != self.num_entry:
            raise EvaluationError("entry_names length must equal num_entry")
        object.__setattr__(self, "fine_to_entry", mapping)

    @classmethod
    def from_json_dict(cls, obj: Mapping) -> "CategoryMapping":
        names = tuple(obj["entry_names"]) if "entry_names" in obj else None
        fine_to_entry = {int(k): int(v) for k, v in obj["fine_to_entry"].items()}
        num_entry = len(names) if names else max(fine_to_entry.values()) + 1
        return cls(fine_to_entry=fine_to_entry, num_entry=num_entry,
                   entry_names=names, num_fine=obj.get("num_fine"))


def load_mapping(path) -> CategoryMapping:
    with open(path, "r", encoding="utf-8") as fh:
        return CategoryMapping.from_json_dict(json.load(fh))


@dataclass(frozen=True)
class EvalConfig:
    decision_rule: str = THRESHOLD_RULE
    threshold: float = 0.5
    task: str = "single_label"

    def __post_init__(self):
        if self.decision_rule not in (THRESHOLD_RULE, ARGMAX_RULE):
            raise EvaluationError(f"unknown decision rule {self.decision_rule!r}")
        if not 0.0 < self.threshold < 1.0:
            raise EvaluationError(f"threshold must be in (0, 1), got {self.threshold}")
        if self.task not in ("single_label", "multi_label"):
            raise EvaluationError(f"unknown task {self.task!r}")


def chance_accuracy(class_count: int) -> float:
    if class_count < 2:
        raise EvaluationError(f"need at least 2 classes, got {class_count}")
    return 1.0 / class_count


def average_precision(labels: np.ndarray, scores: np.ndarray) -> float:
    """AP over the descending-score ranking, ties broken by sample index."""
    labels = np.asarray(labels, dtype=bool)
    scores = np.asarray(scores, dtype=np.float64)
    if labels.shape != scores.shape or labels.ndim != 1:
        raise EvaluationError("labels and scores must be equal-length vectors")
    positives = int(labels.sum())
    if positives == 0:
        raise EvaluationError("average precision undefined without positives")
    order = np.argsort(-scores, kind="stable")
    hits = labels[order]
    cum = np.cumsum(hits)
    precision_at = cum / np.arange(1, hits.size + 1)
    return float(precision_at[hits].sum() / positives)


def macro_map(label_matrix: np.ndarray, score_matrix: np.ndarray) -> tuple[float, list[int]]:
    """Macro mean average precision; classes without positives are excluded
    and returned alongside the value."""
    labels = np.asarray(label_matrix, dtype=bool)
    scores = np.asarray(score_matrix, dtype=np.float64)
    if labels.shape != scores.shape or labels.ndim != 2:
        raise EvaluationError("label and score matrices must be equal (N, C) shapes")
    values = []
    excluded = []
    for c in range(labels.shape[1]):
        if labels[:, c].any():
            values.append(average_precision(labels[:, c], scores[:, c]))
        else:
            excluded.append(c)
    if not values:
        raise EvaluationError("no class has positive labels")
    return float(np.mean(values)), excluded


@dataclass(frozen=True)
class ChanceEstimate:
    value: float
    stderr: float
    trials: int
    excluded_classes: tuple[int, ...] = ()

    def __float__(self) -> float:
        return self.value


def chance_map_multilabel(label_matrix: np.ndarray, trials: int = 1000,
                          seed: int = 0) -> ChanceEstimate:
    """Expected macro mAP of uniform random scores, by simulation."""
    if trials < 1:
        raise EvaluationError(f"need at least 1 trial, got {trials}")
    labels = np.asarray(label_matrix, dtype=bool)
    if labels.ndim != 2:
        raise EvaluationError("label matrix must be (N, C)")
    keep = [c for c in range(labels.shape[1]) if labels[:, c].any()]
    excluded = tuple(c for c in range(labels.shape[1]) if c not in keep)
    if not keep:
        raise EvaluationError("no class has positive labels")
    if excluded:
        log.warning("chance mAP: excluding classes without positives: %s", excluded)
    rng = np.random.Generator(np.random.PCG64(seed))
    per_trial = np.empty(trials)
    for t in range(trials):
        scores = rng.random(labels.shape)
        per_trial[t] = np.mean([average_precision(labels[:, c], scores[:, c]) for c in keep])
    stderr = float(per_trial.std(ddof=1) / np.sqrt(trials)) if trials > 1 else float("nan")
    return ChanceEstimate(value=float(per_trial.mean()), stderr=stderr,
                          trials=trials, excluded_classes=excluded)


def entry_masses(probs: np.ndarray, mapping: CategoryMapping) -> np.ndarray:
    probs = np.asarray(probs, dtype=np.float64)
    if probs.ndim != 1:
        raise EvaluationError("probability vector must be 1-D")
    if mapping.num_fine is not None and probs.size != mapping.num_fine:
        raise EvaluationError(f"expected {mapping.num_fine} fine-class scores, got {probs.size}")
    if probs.size <= max(mapping.fine_to_entry):
        raise EvaluationError(
            f"score vector of length {probs.size} shorter than mapped fine indices"
        )
    if probs.sum() > 1.0 + 1e-6:
        raise EvaluationError(f"probabilities sum to {probs.sum():.8f} > 1")
    fine = np.fromiter(mapping.fine_to_entry.keys(), dtype=np.intp)
    entry = np.fromiter(mapping.fine_to_entry.values(), dtype=np.intp)
    return np.bincount(entry, weights=probs[fine], minlength=mapping.num_entry)


def entry_level_decide(probs: np.ndarray, mapping: CategoryMapping,
                       config: EvalConfig) -> int | None:
    """Summed per-entry mass, then the configured decision rule. Ties break
    to the lowest entry index; None means abstain (counted incorrect)."""
    masses = entry_masses(probs, mapping)
    top = int(np.argmax(masses))
    if config.decision_rule == ARGMAX_RULE:
        return top
    return top if masses[top] > config.threshold else None


def raw_decide(probs: np.ndarray, config: EvalConfig) -> int | None:
    """Decision rule applied directly to the class scores (no mapping)."""
    probs = np.asarray(probs, dtype=np.float64)
    top = int(np.argmax(probs))
    if config.decision_rule == ARGMAX_RULE:
        return top
    return top if probs[top] > config.threshold else None


def decide(record: PredictionRecord, config: EvalConfig,
           mapping: CategoryMapping | None) -> int | None:
    if mapping is not None:
        return entry_level_decide(record.scores, mapping, config)
    return raw_decide(record.scores, config)


def accuracy(records: Sequence[PredictionRecord],
             truth: Mapping[str, int | tuple[int, ...]],
             config: EvalConfig,
             mapping: CategoryMapping | None = None) -> float:
    """Fraction correct (single-label) or macro mAP (multi-label). Records
    must cover the truth ids exactly once."""
    if not truth:
        raise EvaluationError("empty truth set")
    by_id = coverage_check(records, truth.keys(), where="accuracy")
    ordered_ids = sorted(truth)
    if config.task == "single_label":
        correct = 0
        for image_id in ordered_ids:
            label = truth[image_id]
            if not isinstance(label, (int, np.integer)):
                raise EvaluationError(f"single-label truth for {image_id!r} must be an int")
            if decide(by_id[image_id], config, mapping) == label:
                correct += 1
        return correct / len(ordered_ids)

    class_count = by_id[ordered_ids[0]].scores.size
    labels = np.zeros((len(ordered_ids), class_count), dtype=bool)
    scores = np.empty((len(ordered_ids), class_count))
    for i, image_id in enumerate(ordered_ids):
        label = truth[image_id]
        if isinstance(label, (int, np.integer)):
            label = (int(label),)
        labels[i, list(label)] = True
        scores[i] = by_id[image_id].scores
    value, excluded = macro_map(labels, scores)
    if excluded:
        log.warning("accuracy: classes without positives excluded from mAP: %s", excluded)
    return value


def relative_accuracy(a_sup: float, a_orig: float, a_chance: float,
                      normalization: str = CHANCE_RESCALED) -> float:
    """a_sup / a_orig, or rescaled so chance -> 0 and baseline -> 1; may be
    negative below chance and is reported as-is."""
    if normalization == RATIO:
        if a_orig <= 0.0:
            raise EvaluationError(f"ratio normalization needs baseline > 0, got {a_orig}")
        return a_sup / a_orig
    if normalization == CHANCE_RESCALED:
        if a_orig <= a_chance:
            raise EvaluationError(
                f"chance rescaling needs baseline > chance, got {a_orig} <= {a_chance}"
            )
        return (a_sup - a_chance) / (a_orig - a_chance)
    raise EvaluationError(f"unknown normalization {normalization!r}")


@dataclass(frozen=True)
class RelianceCurve:
    transform: str
    points: tuple[tuple[float, float], ...]
    normalization: str
    accuracies: tuple[tuple[float, float], ...] = ()
    baseline: float | None = None
    chance: float | None = None
    name: str = ""

    def __post_init__(self):
        strengths = [s for s, _ in self.points]
        if strengths != sorted(strengths):
            raise EvaluationError("curve points must be sorted by strength")
        if self.normalization not in NORMALIZATIONS:
            raise EvaluationError(f"unknown normalization {self.normalization!r}")
        high = [r for _, r in self.points if r > 1.0 + _CURVE_SLACK]
        if high:
            log.warning("curve %s/%s exceeds baseline by more than noise slack: %s",
                        self.name, self.transform, high)

    def strengths(self) -> tuple[float, ...]:
        return tuple(s for s, _ in self.points)

    def values(self) -> tuple[float, ...]:
        return tuple(r for _, r in self.points)


@dataclass(frozen=True)
class DomainSummary:
    strengths: tuple[float, ...]
    mean: tuple[float, ...]
    stddev: tuple[float, ...]
    curve_count: int


def aggregate_domain(curves: Sequence[RelianceCurve]) -> DomainSummary:
    """Pointwise mean and population standard deviation across curves that
    share the strength grid."""
    if not curves:
        raise EvaluationError("no curves to aggregate")
    grid = curves[0].strengths()
    for c in curves[1:]:
        if c.strengths() != grid:
            raise EvaluationError(
                f"strength grids differ: {grid} vs {c.strengths()} ({c.name or c.transform})"
            )
    # Sorting per point makes the reduction independent of curve order.
    values = np.sort(np.array([c.values() for c in curves]), axis=0)
    return DomainSummary(
        strengths=grid,
        mean=tuple(float(v) for v in values.mean(axis=0)),
        stddev=tuple(float(v) for v in values.std(axis=0, ddof=0)),
        curve_count=len(curves),
    )


@dataclass(frozen=True)
class SweepStep:
    spec: TransformSpec
    strength: float
    tag: str


def default_strength(spec: TransformSpec) -> float:
    if spec.kind == "identity":
        return 0.0
    param = _DEFAULT_STRENGTH_PARAM.get(spec.kind)
    return float(spec.params[param]) if param else 0.0


def step_tag(spec: TransformSpec, strength: float, index: int) -> str:
    if spec.kind == "identity":
        return BASELINE_TAG
    text = format(strength, "g").replace(".", "p").replace("-", "m")
    return f"{index:02d}_{spec.kind}_{text}"


def load_sweep(path) -> list[SweepStep]:
    """Sweep config: a JSON array of transform specs, each optionally
    carrying "strength" and "tag" keys."""
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    if isinstance(data, dict):
        data = [data]
    steps = []
    for i, obj in enumerate(data):
        spec = TransformSpec.from_json_dict(obj)
        strength = float(obj.get("strength", default_strength(spec)))
        tag = str(obj.get("tag", step_tag(spec, strength, i)))
        steps.append(SweepStep(spec=spec, strength=strength, tag=tag))
    if not steps:
        raise EvaluationError(f"{path}: empty sweep config")
    tags = [s.tag for s in steps]
    if len(set(tags)) != len(tags):
        raise EvaluationError(f"{path}: duplicate step tags: {tags}")
    return steps


@dataclass
class SweepResult:
    curve: RelianceCurve
    baseline_accuracy: float
    chance: float
    step_accuracies: dict[str, float]
    per_class: dict[int, RelianceCurve] | None = None
    excluded_classes: tuple[int, ...] = ()


def _output_rel_path(image_id: str) -> Path:
    p = Path(image_id)
    if p.suffix.lower() in _IMAGE_SUFFIXES:
        return p.with_suffix(".png")
    return Path(image_id + ".png")


def materialize_step(entries: Sequence[ManifestEntry], spec: TransformSpec,
                     out_dir: Path, global_seed: int) -> list[tuple[str, str]]:
    """Transform every corpus image into out_dir; returns (id, path) requests."""
    rels = {}
    for e in entries:
        rel = _output_rel_path(e.image_id)
        if rel in rels.values():
            raise EvaluationError(f"output collision for image id {e.image_id!r}")
        rels[e.image_id] = rel
    requests = []
    for e in entries:
        out_path = out_dir / rels[e.image_id]
        out_path.parent.mkdir(parents=True, exist_ok=True)
        save_image(apply(spec, load_image(e.path), e.image_id, global_seed), out_path)
        requests.append((e.image_id, str(out_path)))
    return requests


def _step_predictions(handle: PredictorHandle, tag: str,
                      requests: list[tuple[str, str]],
                      multi_label: bool) -> list[PredictionRecord]:
    if handle.mode == "file":
        root = Path(handle.location)
        path = root / f"{tag}.jsonl" if root.is_dir() else root
        if not path.exists():
            raise PredictorError(f"prediction file not found for step {tag!r}: {path}")
        return load_predictions(path, class_count=handle.class_count, multi_label=multi_label)
    return run_subprocess_predictor(handle, requests, multi_label=multi_label)


def sweep(entries: Sequence[ManifestEntry],
          handle: PredictorHandle,
          steps: Sequence[SweepStep],
          config: EvalConfig = EvalConfig(),
          mapping: CategoryMapping | None = None,
          normalization: str = CHANCE_RESCALED,
          global_seed: int = 0,
          workdir: str | Path | None = None,
          chance: float | None = None,
          transform_name: str = "",
          name: str = "",
          per_class: bool = False) -> SweepResult:
    """Evaluate baseline plus every step, returning the reliance curve and
    the raw accuracies. Predictor failures abort with the step identified."""
    truth = {e.image_id: e.label for e in entries}
    missing = [i for i, lab in truth.items() if lab is None]
    if missing:
        raise EvaluationError(f"manifest entries without labels: {missing[:5]}")
    multi_label = config.task == "multi_label"

    if chance is None:
        if multi_label:
            n_classes = handle.class_count
            matrix = np.zeros((len(entries), n_classes), dtype=bool)
            for i, e in enumerate(sorted(entries, key=lambda e: e.image_id)):
                label = e.label if isinstance(e.label, tuple) else (e.label,)
                matrix[i, list(label)] = True
            chance = chance_map_multilabel(matrix, seed=global_seed).value
        else:
            chance = chance_accuracy(mapping.num_entry if mapping else handle.class_count)

    workroot = Path(workdir) if workdir is not None else None
    original_requests = [(e.image_id, str(e.path)) for e in entries]

    def evaluate(tag: str, spec: TransformSpec | None) -> tuple[float, list[PredictionRecord]]:
        if spec is None or spec.kind == "identity" or handle.mode == "file":
            # File-mode predictions are precomputed; nothing to materialize.
            requests = original_requests
        else:
            if workroot is None:
                raise EvaluationError("sweep with transforms needs a workdir")
            requests = materialize_step(entries, spec, workroot / tag, global_seed)
        try:
            records = _step_predictions(handle, tag, requests, multi_label)
            return accuracy(records, truth, config, mapping), records
        except PredictorError as exc:
            raise PredictorError(f"step {tag!r}: {exc}") from exc

    baseline_acc, baseline_records = evaluate(BASELINE_TAG, None)

    points = []
    accuracies: dict[str, float] = {BASELINE_TAG: baseline_acc}
    step_records: list[tuple[float, list[PredictionRecord]]] = []
    for step in sorted(steps, key=lambda s: s.strength):
        if step.spec.kind == "identity":
            acc, records = baseline_acc, baseline_records
        else:
            acc, records = evaluate(step.tag, step.spec)
        accuracies[step.tag] = acc
        points.append((step.strength, relative_accuracy(acc, baseline_acc, chance, normalization)))
        step_records.append((step.strength, records))

    curve = RelianceCurve(
        transform=transform_name or _dominant_kind(steps),
        points=tuple(points),
        normalization=normalization,
        accuracies=tuple((s.strength, accuracies[s.tag]) for s in sorted(steps, key=lambda s: s.strength)),
        baseline=baseline_acc,
        chance=chance,
        name=name,
    )
    result = SweepResult(curve=curve, baseline_accuracy=baseline_acc, chance=chance,
                         step_accuracies=accuracies)
    if per_class:
        if multi_label:
            raise EvaluationError("per-class curves require a single-label task")
        curves, excluded = per_class_curves(
            baseline_records, step_records, truth, config, mapping, chance,
            normalization=normalization, transform_name=curve.transform,
        )
        result.per_class = curves
        result.excluded_classes = excluded
    return result


def _dominant_kind(steps: Sequence[SweepStep]) -> str:
    kinds = [s.spec.kind for s in steps if s.spec.kind != "identity"]
    return kinds[0] if kinds else "identity"


def _per_class_accuracy(records: Sequence[PredictionRecord],
                        truth: Mapping[str, int],
                        config: EvalConfig,
                        mapping: CategoryMapping | None) -> dict[int, float]:
    by_id = coverage_check(records, truth.keys(), where="per-class accuracy")
    totals: dict[int, int] = {}
    hits: dict[int, int] = {}
    for image_id in sorted(truth):
        label = int(truth[image_id])
        totals[label] = totals.get(label, 0) + 1
        if decide(by_id[image_id], config, mapping) == label:
            hits[label] = hits.get(label, 0) + 1
    return {c: hits.get(c, 0) / n for c, n in totals.items()}


def per_class_curves(baseline_records: Sequence[PredictionRecord],
                     step_records: Sequence[tuple[float, Sequence[PredictionRecord]]],
                     truth: Mapping[str, int],
                     config: EvalConfig,
                     mapping: CategoryMapping | None,
                     chance: float,
                     normalization: str = CHANCE_RESCALED,
                     transform_name: str = "") -> tuple[dict[int, RelianceCurve], tuple[int, ...]]:
    """Relative accuracy per class; classes whose baseline does not beat
    chance are flagged and excluded rather than clamped."""
    base = _per_class_accuracy(baseline_records, truth, config, mapping)
    step_acc = [(s, _per_class_accuracy(records, truth, config, mapping))
                for s, records in sorted(step_records, key=lambda p: p[0])]
    excluded = tuple(sorted(c for c, a in base.items() if a <= chance))
    if excluded:
        log.warning("per-class curves: baseline <= chance, excluding classes %s", excluded)
    curves = {}
    for c in sorted(base):
        if c in excluded:
            continue
        points = tuple((s, relative_accuracy(acc[c], base[c], chance, normalization))
                       for s, acc in step_acc)
        curves[c] = RelianceCurve(
            transform=transform_name, points=points, normalization=normalization,
            accuracies=tuple((s, acc[c]) for s, acc in step_acc),
            baseline=base[c], chance=chance, name=f"class_{c}",
        )
    return curves, excluded


def fraction_more_reliant(curves_a: Mapping[int, RelianceCurve],
                          curves_b: Mapping[int, RelianceCurve]) -> float:
    """Fraction of shared classes where the first transform family degrades
    accuracy more (lower mean relative accuracy = higher reliance)."""
    shared = sorted(set(curves_a) & set(curves_b))
    if not shared:
        raise EvaluationError("no classes shared between the two curve sets")
    more = sum(
        1 for c in shared
        if np.mean(curves_a[c].values()) < np.mean(curves_b[c].values())
    )
    return more / len(shared)


def overlay_comparison(entries: Sequence[ManifestEntry],
                       handle: PredictorHandle,
                       grids: Sequence[int],
                       config: EvalConfig = EvalConfig(),
                       mapping: CategoryMapping | None = None,
                       global_seed: int = 0,
                       workdir: str | Path | None = None,
                       seed_param: int | None = None) -> list[dict]:
    """Accuracy of the seam-band overlay versus the full patch shuffle at
    each grid size; the overlay uses the same seed so its bands carry
    exactly the shuffle's pixels."""
    truth = {e.image_id: e.label for e in entries}
    multi_label = config.task == "multi_label"
    workroot = Path(workdir) if workdir is not None else None
    rows = []
    for grid in grids:
        row = {"grid": int(grid)}
        for kind, column in (("grid_overlay", "overlay"), ("patch_shuffle", "patch_shuffle")):
            spec = TransformSpec(kind=kind, params={"grid": int(grid)}, seed=seed_param)
            tag = f"{column}_g{grid}"
            if handle.mode == "file":
                requests = [(e.image_id, str(e.path)) for e in entries]
            elif workroot is None:
                raise EvaluationError("overlay comparison needs a workdir")
            else:
                requests = materialize_step(entries, spec, workroot / tag, global_seed)
            try:
                records = _step_predictions(handle, tag, requests, multi_label)
            except PredictorError as exc:
                raise PredictorError(f"step {tag!r}: {exc}") from exc
            row[column] = accuracy(records, truth, config, mapping)
        rows.append(row)
    return rows


def curve_to_json_dict(curve: RelianceCurve) -> dict:
    return {
        "transform": curve.transform,
        "name": curve.name,
        "normalization": curve.normalization,
        "baseline_accuracy": curve.baseline,
        "chance": curve.chance,
        "points": [
            {"strength": s, "accuracy": a, "relative_accuracy": r}
            for (s, r), (_, a) in zip(curve.points, curve.accuracies)
        ],
    }


def write_curve_csv(curve: RelianceCurve, fh) -> None:
    fh.write("strength,accuracy,relative_accuracy\n")
    for (s, r), (_, a) in zip(curve.points, curve.accuracies):
        fh.write(f"{format(s, 'g')},{format(a, '.12g')},{format(r, '.12g')}\n")
