"""Command-line interface.

Subcommands: transform, validate, sweep, overlay-control, stats, report.
Global flags: --seed, --jobs, --format {csv,json}, --quiet, --config.
Flag precedence is flags > config file > defaults; the resolved
configuration is printed at startup and written into a run manifest next
to every command's outputs. Outputs are deterministic for a fixed seed
regardless of --jobs.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import __version__
from .image import load_image, resize, save_image
from .manifest import ManifestEntry, load_manifest, scan_directory, write_manifest
from .metrics import (
    CorpusMetrics,
    MetricParams,
    MetricReport,
    aggregate_reports,
    metric_rows,
    report as metric_report,
    write_metric_rows_csv,
    write_metric_rows_json,
)
from .predictor import PredictorError, PredictorHandle
from .reliance import (
    CHANCE_RESCALED,
    RATIO,
    ARGMAX_RULE,
    THRESHOLD_RULE,
    EvalConfig,
    EvaluationError,
    RelianceCurve,
    aggregate_domain,
    curve_to_json_dict,
    load_mapping,
    load_sweep,
    overlay_comparison,
    sweep,
    write_curve_csv,
)
from .stats import DegenerateSampleError, PairedSample, cohens_d_paired, mean_ci95, paired_t_test
from .svgplot import Series, line_plot
from .transforms import TransformSpec, apply, load_specs

log = logging.getLogger("suppresskit")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="suppresskit",
        description="Feature-suppression transforms, validation metrics, and reliance curves",
    )
    parser.add_argument("--version", action="version", version=f"suppresskit {__version__}")
    parser.add_argument("--config", help="JSON file supplying defaults for flags")
    parser.add_argument("--seed", type=int, default=None, help="global seed (default 0)")
    parser.add_argument("--jobs", type=int, default=None, help="worker processes (default 1)")
    parser.add_argument("--format", choices=("csv", "json"), default=None,
                        help="tabular output format (default csv)")
    parser.add_argument("--quiet", action="store_true", help="suppress progress output")

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("transform", help="apply one transform spec to a corpus")
    p.add_argument("--input", required=True, help="input image directory")
    p.add_argument("--manifest", help="JSONL manifest (default: scan --input)")
    p.add_argument("--output", required=True, help="output directory for PNGs")
    p.add_argument("--spec", required=True, help="transform spec JSON file")
    p.add_argument("--resize", help="resize inputs first, e.g. 224x224")

    p = sub.add_parser("validate", help="suppression metrics for each spec over a corpus")
    p.add_argument("--input", required=True, help="input image directory")
    p.add_argument("--manifest", help="JSONL manifest (default: scan --input)")
    p.add_argument("--specs", required=True, help="JSON array of transform specs")
    p.add_argument("--out", required=True, help="output table path")
    p.add_argument("--window", type=int, default=None, help="variance window (default 11)")
    p.add_argument("--radius", type=int, default=None, help="frequency radius (default 11)")
    p.add_argument("--sobel", type=int, default=None, help="Sobel kernel size (default 11)")
    p.add_argument("--aggregate", choices=("arithmetic", "harmonic"), default="arithmetic",
                   help="pair mean for the texture/shape scores")

    p = sub.add_parser("sweep", help="reliance curve from a strength sweep")
    _add_eval_arguments(p)
    p.add_argument("--sweep", required=True, help="JSON array of sweep steps")
    p.add_argument("--normalization", choices=(RATIO, CHANCE_RESCALED), default=None,
                   help=f"relative-accuracy form (default {CHANCE_RESCALED})")
    p.add_argument("--name", default="", help="dataset label for plots")
    p.add_argument("--per-class", action="store_true", help="also emit per-class curves")
    p.add_argument("--svg", action="store_true", help="write an SVG plot of the curve")

    p = sub.add_parser("overlay-control", help="seam-band overlay vs full patch shuffle")
    _add_eval_arguments(p)
    p.add_argument("--grids", default="2,4,8", help="comma-separated grid sizes")

    p = sub.add_parser("stats", help="paired t-test, effect size, and confidence intervals")
    p.add_argument("--csv-a", required=True, help="first accuracy column (CSV)")
    p.add_argument("--csv-b", required=True, help="second accuracy column (CSV)")
    p.add_argument("--out", help="optional JSON result path")

    p = sub.add_parser("report", help="summarize curve files; aggregate shared grids")
    p.add_argument("--curves", nargs="+", required=True, help="curve JSON files from sweep")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--svg", action="store_true", help="write an overview SVG")

    return parser


def _add_eval_arguments(p: argparse.ArgumentParser) -> None:
    p.add_argument("--manifest", required=True, help="JSONL manifest with labels")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--predictor", help="subprocess predictor command line")
    p.add_argument("--predictions", help="directory of per-step prediction files")
    p.add_argument("--class-count", type=int, required=True, help="predictor score width")
    p.add_argument("--mapping", help="fine-to-entry category mapping JSON")
    p.add_argument("--rule", choices=("threshold", "argmax"), default=None,
                   help="decision rule (default threshold)")
    p.add_argument("--theta", type=float, default=None, help="decision threshold (default 0.5)")
    p.add_argument("--task", choices=("single_label", "multi_label"), default="single_label")
    p.add_argument("--workdir", help="directory for transformed corpora (default OUT/work)")


class _Config:
    """Flags > config file > defaults, with the resolution recorded."""

    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.file_values: dict = {}
        if args.config:
            with open(args.config, "r", encoding="utf-8") as fh:
                self.file_values = json.load(fh)
        self.resolved: dict = {}

    def get(self, name: str, default):
        flag = getattr(self.args, name.replace("-", "_"), None)
        if flag is not None:
            value = flag
        elif name in self.file_values:
            value = self.file_values[name]
        else:
            value = default
        self.resolved[name] = value
        return value


def _entries(cfg: _Config) -> list[ManifestEntry]:
    if getattr(cfg.args, "manifest", None):
        return load_manifest(cfg.args.manifest)
    return scan_directory(cfg.args.input)


def _write_run_manifest(out_dir: Path, cfg: _Config, extra: dict) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    payload = {
        "tool": f"suppresskit {__version__}",
        "command": cfg.args.command,
        "resolved_config": cfg.resolved,
        **extra,
    }
    with open(out_dir / "run_manifest.json", "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _announce(cfg: _Config) -> None:
    if not cfg.args.quiet:
        printable = json.dumps(cfg.resolved, sort_keys=True)
        print(f"suppresskit {cfg.args.command}: config {printable}", file=sys.stderr)


def _map_jobs(fn, tasks: list, jobs: int) -> list:
    if jobs <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, tasks, chunksize=max(1, len(tasks) // (jobs * 4))))


def _parse_resize(text: str | None) -> tuple[int, int] | None:
    if not text:
        return None
    try:
        w, h = text.lower().split("x")
        return int(w), int(h)
    except ValueError:
        raise SystemExit(f"--resize expects WxH, got {text!r}")


def _output_rel(image_id: str) -> Path:
    p = Path(image_id)
    if p.suffix.lower() in (".png", ".jpg", ".jpeg"):
        return p.with_suffix(".png")
    return Path(image_id + ".png")


def _transform_task(task: tuple) -> tuple[str, str | None]:
    image_id, in_path, out_path, spec_dict, seed, resize_to = task
    try:
        img = load_image(in_path)
        if resize_to is not None:
            img = resize(img, resize_to[0], resize_to[1])
        out = apply(TransformSpec.from_json_dict(spec_dict), img, image_id, seed)
        Path(out_path).parent.mkdir(parents=True, exist_ok=True)
        save_image(out, out_path)
        return image_id, None
    except Exception as exc:
        return image_id, str(exc)


def cmd_transform(cfg: _Config) -> int:
    seed = cfg.get("seed", 0)
    jobs = cfg.get("jobs", 1)
    resize_to = _parse_resize(cfg.args.resize)
    specs = load_specs(cfg.args.spec)
    if len(specs) != 1:
        raise SystemExit("transform takes exactly one spec; use sweep for several")
    spec = specs[0]
    entries = _entries(cfg)
    out_dir = Path(cfg.args.output)
    _announce(cfg)

    rels = {e.image_id: _output_rel(e.image_id) for e in entries}
    if len(set(rels.values())) != len(rels):
        raise SystemExit("image ids collide after .png suffixing")
    tasks = [
        (e.image_id, str(e.path), str(out_dir / rels[e.image_id]),
         spec.to_json_dict(), seed, resize_to)
        for e in entries
    ]
    results = _map_jobs(_transform_task, tasks, jobs)
    failures = sorted((i, err) for i, err in results if err is not None)
    for image_id, err in failures:
        log.error("transform failed for %s: %s", image_id, err)

    write_manifest(
        [ManifestEntry(e.image_id, out_dir / rels[e.image_id], e.label) for e in entries
         if all(i != e.image_id for i, _ in failures)],
        out_dir / "manifest.jsonl",
    )
    _write_run_manifest(out_dir, cfg, {
        "spec": spec.to_json_dict(),
        "input": str(cfg.args.input),
        "output": str(out_dir),
        "resize": list(resize_to) if resize_to else None,
        "images": len(entries),
        "failures": [{"id": i, "error": e} for i, e in failures],
    })
    if not cfg.args.quiet:
        print(f"transformed {len(entries) - len(failures)}/{len(entries)} images "
              f"-> {out_dir}", file=sys.stderr)
    return 1 if failures else 0


def _validate_task(task: tuple) -> tuple[str, str, dict | None, str | None]:
    image_id, in_path, param_id, spec_dict, params_tuple, seed, aggregate = task
    try:
        img = load_image(in_path)
        spec = TransformSpec.from_json_dict(spec_dict)
        out = apply(spec, img, image_id, seed)
        if (out.height, out.width) != (img.height, img.width):
            from .image import ImageBuffer
            y0 = (img.height - out.height) // 2
            x0 = (img.width - out.width) // 2
            img = ImageBuffer(img.pixels[y0:y0 + out.height, x0:x0 + out.width])
        rep = metric_report(img, out, MetricParams(*params_tuple), aggregate)
        return param_id, image_id, rep.as_dict(), None
    except Exception as exc:
        return param_id, image_id, None, str(exc)


def cmd_validate(cfg: _Config) -> int:
    seed = cfg.get("seed", 0)
    jobs = cfg.get("jobs", 1)
    fmt = cfg.get("format", "csv")
    params = MetricParams(
        w=cfg.get("window", 11), r=cfg.get("radius", 11), k=cfg.get("sobel", 11)
    )
    specs = load_specs(cfg.args.specs)
    entries = _entries(cfg)
    _announce(cfg)

    by_param: dict[str, TransformSpec] = {}
    for i, spec in enumerate(specs):
        by_param[f"{i:02d}_{spec.kind}"] = spec

    tasks = [
        (e.image_id, str(e.path), param_id, spec.to_json_dict(),
         (params.w, params.r, params.k), seed, cfg.args.aggregate)
        for param_id, spec in by_param.items()
        for e in entries
    ]
    raw = _map_jobs(_validate_task, tasks, jobs)

    results: dict[str, CorpusMetrics] = {}
    failures: list[tuple[str, str, str]] = []
    for param_id in by_param:
        per_image: dict[str, MetricReport] = {}
        for pid, image_id, rep, err in raw:
            if pid != param_id:
                continue
            if err is not None:
                failures.append((param_id, image_id, err))
            else:
                per_image[image_id] = MetricReport(**rep)
        if not per_image:
            raise SystemExit(f"all images failed for spec {param_id}")
        results[param_id] = CorpusMetrics(
            per_image=per_image,
            aggregate=aggregate_reports(per_image, cfg.args.aggregate),
            failures=[(i, e) for p, i, e in failures if p == param_id],
        )
    rows = metric_rows(results, by_param)

    out_path = Path(cfg.args.out)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with open(out_path, "w", encoding="utf-8") as fh:
        if fmt == "csv":
            write_metric_rows_csv(rows, fh)
        else:
            write_metric_rows_json(rows, fh)
    for param_id, image_id, err in failures:
        log.error("metrics failed for %s under %s: %s", image_id, param_id, err)
    _write_run_manifest(out_path.parent, cfg, {
        "specs": {p: s.to_json_dict() for p, s in by_param.items()},
        "out": str(out_path),
        "images": len(entries),
        "failures": [{"param_id": p, "id": i, "error": e} for p, i, e in failures],
    })
    if not cfg.args.quiet:
        print(f"validated {len(by_param)} spec(s) on {len(entries)} images -> {out_path}",
              file=sys.stderr)
    return 1 if failures else 0


def _eval_pieces(cfg: _Config):
    entries = load_manifest(cfg.args.manifest)
    mapping = load_mapping(cfg.args.mapping) if cfg.args.mapping else None
    rule = {"threshold": THRESHOLD_RULE, "argmax": ARGMAX_RULE}[cfg.get("rule", "threshold")]
    config = EvalConfig(decision_rule=rule, threshold=cfg.get("theta", 0.5),
                        task=cfg.args.task)
    if bool(cfg.args.predictor) == bool(cfg.args.predictions):
        raise SystemExit("exactly one of --predictor or --predictions is required")
    if cfg.args.predictor:
        handle = PredictorHandle("subprocess", cfg.args.predictor, cfg.args.class_count)
    else:
        handle = PredictorHandle("file", cfg.args.predictions, cfg.args.class_count)
    out_dir = Path(cfg.args.out)
    workdir = Path(cfg.args.workdir) if cfg.args.workdir else out_dir / "work"
    return entries, mapping, config, handle, out_dir, workdir


def cmd_sweep(cfg: _Config) -> int:
    seed = cfg.get("seed", 0)
    normalization = cfg.get("normalization", CHANCE_RESCALED)
    entries, mapping, config, handle, out_dir, workdir = _eval_pieces(cfg)
    steps = load_sweep(cfg.args.sweep)
    _announce(cfg)

    result = sweep(entries, handle, steps, config=config, mapping=mapping,
                   normalization=normalization, global_seed=seed, workdir=workdir,
                   name=cfg.args.name, per_class=cfg.args.per_class)

    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "curve.csv", "w", encoding="utf-8") as fh:
        write_curve_csv(result.curve, fh)
    with open(out_dir / "curve.json", "w", encoding="utf-8") as fh:
        json.dump(curve_to_json_dict(result.curve), fh, indent=2)
        fh.write("\n")
    if result.per_class is not None:
        with open(out_dir / "per_class.csv", "w", encoding="utf-8") as fh:
            fh.write("class,strength,accuracy,relative_accuracy\n")
            for cls in sorted(result.per_class):
                curve = result.per_class[cls]
                for (s, r), (_, a) in zip(curve.points, curve.accuracies):
                    fh.write(f"{cls},{format(s, 'g')},{format(a, '.12g')},{format(r, '.12g')}\n")
    if cfg.args.svg:
        label = cfg.args.name or result.curve.transform
        svg = line_plot([Series(label=label, points=list(result.curve.points))],
                        title=f"{result.curve.transform} ({normalization})")
        (out_dir / "curve.svg").write_text(svg, encoding="utf-8")

    _write_run_manifest(out_dir, cfg, {
        "sweep": [
            {"tag": s.tag, "strength": s.strength, **s.spec.to_json_dict()} for s in steps
        ],
        "manifest": str(cfg.args.manifest),
        "predictor": {"mode": handle.mode, "location": handle.location,
                      "class_count": handle.class_count},
        "baseline_accuracy": result.baseline_accuracy,
        "chance": result.chance,
        "accuracies": result.step_accuracies,
        "excluded_classes": list(result.excluded_classes),
    })
    if not cfg.args.quiet:
        for (s, r) in result.curve.points:
            print(f"strength {s:g}: relative accuracy {r:.4f}", file=sys.stderr)
    return 0


def cmd_overlay_control(cfg: _Config) -> int:
    seed = cfg.get("seed", 0)
    entries, mapping, config, handle, out_dir, workdir = _eval_pieces(cfg)
    grids = [int(g) for g in cfg.args.grids.split(",") if g]
    _announce(cfg)

    rows = overlay_comparison(entries, handle, grids, config=config, mapping=mapping,
                              global_seed=seed, workdir=workdir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "overlay_control.csv", "w", encoding="utf-8") as fh:
        fh.write("grid,overlay,patch_shuffle\n")
        for row in rows:
            fh.write(f"{row['grid']},{format(row['overlay'], '.12g')},"
                     f"{format(row['patch_shuffle'], '.12g')}\n")
    _write_run_manifest(out_dir, cfg, {
        "grids": grids,
        "manifest": str(cfg.args.manifest),
        "rows": rows,
    })
    if not cfg.args.quiet:
        print("grid  overlay  patch_shuffle", file=sys.stderr)
        for row in rows:
            print(f"{row['grid']:>4}  {row['overlay']:.4f}   {row['patch_shuffle']:.4f}",
                  file=sys.stderr)
    return 0


def _read_column(path: str) -> list[float]:
    values = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        for row in csv.reader(fh):
            if not row:
                continue
            try:
                values.append(float(row[0]))
            except ValueError:
                if values:
                    raise SystemExit(f"{path}: non-numeric value {row[0]!r}")
                # header row
    if not values:
        raise SystemExit(f"{path}: no numeric values found")
    return values


def cmd_stats(cfg: _Config) -> int:
    _announce(cfg)
    a = _read_column(cfg.args.csv_a)
    b = _read_column(cfg.args.csv_b)
    try:
        sample = PairedSample(a, b)
        t, p, df = paired_t_test(sample)
        d = cohens_d_paired(sample)
    except DegenerateSampleError as exc:
        raise SystemExit(
            f"{exc}\nhint: identical (or uniformly shifted) columns carry no paired "
            f"signal; check that the two files hold different conditions"
        )
    mean_a, ci_a = mean_ci95(sample.a)
    mean_b, ci_b = mean_ci95(sample.b)
    mean_d, ci_d = mean_ci95(sample.differences())
    result = {
        "n": sample.n, "df": df, "t": t, "p": p, "cohens_d": d,
        "mean_a": mean_a, "ci95_a": ci_a,
        "mean_b": mean_b, "ci95_b": ci_b,
        "mean_diff": mean_d, "ci95_diff": ci_d,
    }
    print(f"n = {sample.n}, df = {df}")
    print(f"t = {t:.6g}, p = {p:.6g}, Cohen's d = {d:.6g}")
    print(f"mean A = {mean_a:.6g} (±{ci_a:.6g}), mean B = {mean_b:.6g} (±{ci_b:.6g})")
    print(f"mean difference = {mean_d:.6g} (±{ci_d:.6g})")
    if cfg.args.out:
        out = Path(cfg.args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        with open(out, "w", encoding="utf-8") as fh:
            json.dump(result, fh, indent=2)
            fh.write("\n")
    return 0


def cmd_report(cfg: _Config) -> int:
    _announce(cfg)
    curves = []
    for path in cfg.args.curves:
        with open(path, "r", encoding="utf-8") as fh:
            obj = json.load(fh)
        curves.append(RelianceCurve(
            transform=obj["transform"],
            points=tuple((p["strength"], p["relative_accuracy"]) for p in obj["points"]),
            normalization=obj["normalization"],
            accuracies=tuple((p["strength"], p["accuracy"]) for p in obj["points"]),
            baseline=obj.get("baseline_accuracy"),
            chance=obj.get("chance"),
            name=obj.get("name", Path(path).stem),
        ))
    out_dir = Path(cfg.args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    lines = ["# Reliance curve summary", ""]
    lines.append("| curve | transform | normalization | baseline | chance | final rel. acc |")
    lines.append("|---|---|---|---|---|---|")
    for c in sorted(curves, key=lambda c: (c.name, c.transform)):
        final = c.values()[-1] if c.points else float("nan")
        lines.append(
            f"| {c.name or '-'} | {c.transform} | {c.normalization} "
            f"| {c.baseline:.4f} | {c.chance:.4f} | {final:.4f} |"
        )
    grids = {c.strengths() for c in curves}
    norms = {c.normalization for c in curves}
    if len(curves) > 1 and len(grids) == 1 and len(norms) == 1:
        summary = aggregate_domain(curves)
        lines += ["", "## Aggregate over curves (mean ± 1 sigma)", ""]
        lines.append("| strength | mean | stddev |")
        lines.append("|---|---|---|")
        for s, m, sd in zip(summary.strengths, summary.mean, summary.stddev):
            lines.append(f"| {s:g} | {m:.4f} | {sd:.4f} |")
        with open(out_dir / "domain_summary.csv", "w", encoding="utf-8") as fh:
            fh.write("strength,mean,stddev\n")
            for s, m, sd in zip(summary.strengths, summary.mean, summary.stddev):
                fh.write(f"{s:g},{format(m, '.12g')},{format(sd, '.12g')}\n")
    (out_dir / "summary.md").write_text("\n".join(lines) + "\n", encoding="utf-8")
    if cfg.args.svg:
        series = [Series(label=c.name or c.transform, points=list(c.points))
                  for c in curves]
        (out_dir / "overview.svg").write_text(line_plot(series, title="reliance curves"),
                                              encoding="utf-8")
    _write_run_manifest(out_dir, cfg, {"curves": list(cfg.args.curves)})
    return 0


_COMMANDS = {
    "transform": cmd_transform,
    "validate": cmd_validate,
    "sweep": cmd_sweep,
    "overlay-control": cmd_overlay_control,
    "stats": cmd_stats,
    "report": cmd_report,
}


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    cfg = _Config(args)
    try:
        return _COMMANDS[args.command](cfg)
    except (EvaluationError, PredictorError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
