"""Command-line entry point: simulate, calibrate, evaluate, assess.

All randomness flows from the single config seed (`--seed` overrides), fanned
out to named sub-seeds inside the components, so reruns with the same config
and seed produce byte-identical artifacts. Exit codes: 0 success, 1 config
error, 2 runtime/data error.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

from .calibration import SearchSpec
from .classifiers import (
    KNearestNeighbors,
    LinearSvm,
    NearestCentroid,
    load_external_scores,
)
from .conformal import (
    CrossConformalEvaluator,
    InductiveEvaluator,
    PValueRecord,
    TransductiveEvaluator,
    alpha_assessment,
    load_evaluator_state,
)
from .data import (
    drift_config_from_dict,
    generate_drift_stream,
    load_dense_csv,
    load_sparse,
    save_dense_csv,
    temporal_split,
)
from .errors import ConfigurationError, DriftguardError, ParseError, exit_code_for
from .metrics import evaluate_stream, report_rows, report_to_dict
from .ncm import EnsembleDisagreementNcm, KnnDisagreementNcm, make_ncm


def _load_config(path) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"config {path} is not valid JSON: {exc}") from exc


def _require(config: dict, field: str):
    if field not in config:
        raise ConfigurationError(f"config is missing required field {field!r}")
    return config[field]


def _resolve_seed(config: dict, override) -> int:
    if override is not None:
        return int(override)
    seed = _require(config, "seed")
    if not isinstance(seed, int):
        raise ConfigurationError(f"field 'seed' must be an integer, got {seed!r}")
    return seed


def _out_dir(config: dict, override) -> str:
    out = override if override is not None else config.get("out_dir")
    if out is None:
        raise ConfigurationError("no output directory: pass --out or set 'out_dir'")
    os.makedirs(out, exist_ok=True)
    return out


def _load_dataset(config: dict):
    ds_cfg = _require(config, "dataset")
    path = _require(ds_cfg, "path")
    fmt = ds_cfg.get("format", "dense-csv")
    if fmt == "dense-csv":
        return load_dense_csv(path)
    if fmt == "sparse":
        return load_sparse(path)
    raise ConfigurationError(f"field 'dataset.format' unknown: {fmt!r}")


def _load_votes(path) -> dict:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty votes file") from None
        if not header or header[0] != "id":
            raise ParseError(f"{path}: line 1: votes header must start with 'id'")
        votes = {}
        for lineno, row in enumerate(reader, start=2):
            if len(row) < 2:
                raise ParseError(f"{path}: line {lineno}: need an id and at least one vote")
            votes[row[0]] = tuple(row[1:])
    return votes


def _build_classifier(config: dict, seed: int):
    cfg = _require(config, "classifier")
    name = _require(cfg, "name")
    if name == "nearest-centroid":
        return NearestCentroid()
    if name == "knn":
        return KNearestNeighbors(k=int(_require(cfg, "k")))
    if name == "linear-svm":
        return LinearSvm(
            lam=float(cfg.get("lam", 1e-4)),
            epochs=int(cfg.get("epochs", 10)),
            seed=int(cfg.get("seed", seed)),
            positive_label=cfg.get("positive_label"),
        )
    if name == "external-scores":
        return load_external_scores(_require(cfg, "scores_path"))
    raise ConfigurationError(f"field 'classifier.name' unknown: {name!r}")


def _build_ncm(config: dict):
    cfg = _require(config, "ncm")
    name = _require(cfg, "name")
    if name == "knn-disagreement":
        return KnnDisagreementNcm(k=int(_require(cfg, "k")))
    if name == "ensemble-disagreement":
        return EnsembleDisagreementNcm(_load_votes(_require(cfg, "votes_path")))
    try:
        return make_ncm(name)
    except ConfigurationError:
        raise ConfigurationError(f"field 'ncm.name' unknown: {name!r}") from None


def _build_search(config: dict) -> SearchSpec:
    cfg = _require(config, "search")
    preset = cfg.get("preset")
    positive = cfg.get("positive_label")
    if preset == "default":
        spec = SearchSpec.default(positive)
    elif preset == "min-rejection":
        spec = SearchSpec.min_rejection(positive)
    elif preset is None:
        spec = SearchSpec(
            objective=cfg.get("objective", "f1-kept"),
            constraint=cfg.get("constraint", "kept-rate"),
            bound=float(cfg.get("bound", 0.85)),
            max_iterations=int(cfg.get("max_iterations", 100_000)),
            no_update_stop=int(cfg.get("no_update_stop", 3_000)),
            seed=cfg.get("seed"),
            use_confidence=bool(cfg.get("use_confidence", False)),
            quality_metric=cfg.get("quality_metric", "credibility"),
            positive_label=positive,
        )
    else:
        raise ConfigurationError(f"field 'search.preset' unknown: {preset!r}")
    return spec.validate()


def _build_evaluator(config: dict, seed: int):
    cfg = _require(config, "evaluator")
    kind = _require(cfg, "kind")
    classifier = _build_classifier(config, seed)
    ncm = _build_ncm(config)
    search = _build_search(config)
    if kind in ("tce", "approx-tce"):
        return TransductiveEvaluator(classifier, ncm, k=cfg.get("k"), search=search, seed=seed)
    if kind == "ice":
        return InductiveEvaluator(
            classifier, ncm,
            calibration_fraction=float(cfg.get("calibration_fraction", 0.33)),
            search=search, seed=seed,
        )
    if kind == "cce":
        return CrossConformalEvaluator(
            classifier, ncm, k=int(cfg.get("k", 10)),
            quorum=cfg.get("quorum"), search=search, seed=seed,
        )
    raise ConfigurationError(f"field 'evaluator.kind' unknown: {kind!r}")


def _train_dataset(config: dict):
    dataset = _load_dataset(config)
    split_cfg = config.get("split")
    if split_cfg is None:
        return dataset, None
    split = temporal_split(
        dataset,
        train_end=int(_require(split_cfg, "train_end")),
        period_length=int(_require(split_cfg, "period_seconds")),
    )
    return split.train, split


def _dump_json(payload, path) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_records_csv(records, labels, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        header = ["id", "ground_truth", "predicted", "credibility", "confidence"]
        header += [f"p:{lab}" for lab in labels]
        header += [f"raw:{lab}" for lab in labels]
        writer.writerow(header)
        for r in records:
            row = [
                r.example_id,
                r.ground_truth if r.ground_truth is not None else "",
                r.predicted,
                repr(r.credibility),
                repr(r.confidence),
            ]
            row += [repr(r.pvals[lab]) for lab in labels]
            row += [repr(r.raw_scores[lab]) if r.raw_scores else "" for lab in labels]
            writer.writerow(row)


def _read_records_csv(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty records file") from None
        expected = ["id", "ground_truth", "predicted", "credibility", "confidence"]
        if header[: len(expected)] != expected:
            raise ParseError(f"{path}: line 1: unexpected records header")
        plabels = [col[2:] for col in header if col.startswith("p:")]
        rlabels = [col[4:] for col in header if col.startswith("raw:")]
        records = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise ParseError(f"{path}: line {lineno}: wrong column count")
            cells = dict(zip(header, row))
            try:
                pvals = {lab: float(cells[f"p:{lab}"]) for lab in plabels}
                raw = {
                    lab: float(cells[f"raw:{lab}"])
                    for lab in rlabels
                    if cells[f"raw:{lab}"] != ""
                }
                records.append(
                    PValueRecord(
                        example_id=cells["id"],
                        predicted=cells["predicted"],
                        ground_truth=cells["ground_truth"] or None,
                        pvals=pvals,
                        credibility=float(cells["credibility"]),
                        confidence=float(cells["confidence"]),
                        raw_scores=raw or None,
                    )
                )
            except ValueError:
                raise ParseError(f"{path}: line {lineno}: non-numeric value") from None
    return records


def _write_assessment_csv(assessment, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["label", "group", "count", "q1", "median", "q3"])
        for row in assessment.rows:
            writer.writerow(
                [
                    row.label,
                    row.group,
                    len(row.values),
                    "" if row.q1 is None else repr(row.q1),
                    "" if row.median is None else repr(row.median),
                    "" if row.q3 is None else repr(row.q3),
                ]
            )


def cmd_simulate(config: dict, out: str, seed: int) -> int:
    cfg = drift_config_from_dict(_require(config, "generator"))
    stream = generate_drift_stream(cfg, seed)
    save_dense_csv(stream, os.path.join(out, "stream.csv"))
    print(f"wrote {len(stream)} examples to {os.path.join(out, 'stream.csv')}")
    return 0


def cmd_calibrate(config: dict, out: str, seed: int) -> int:
    train, _ = _train_dataset(config)
    evaluator = _build_evaluator(config, seed)
    evaluator.fit(train)
    evaluator.save_state(os.path.join(out, "evaluator_state.json"))
    if isinstance(evaluator, CrossConformalEvaluator):
        thresholds = {
            "per_fold": [fold.thresholds.to_dict() for fold in evaluator.folds_],
            "quorum": evaluator.quorum_,
        }
        search_summary = [r.to_dict() if r else None for r in evaluator.search_results_]
    else:
        thresholds = evaluator.thresholds_.to_dict()
        search_summary = (
            evaluator.search_result_.to_dict() if evaluator.search_result_ else None
        )
    _dump_json(thresholds, os.path.join(out, "thresholds.json"))
    records = evaluator.calibration_records_
    labels = list(evaluator.label_space_)
    _write_records_csv(records, labels, os.path.join(out, "calibration_records.csv"))
    _write_assessment_csv(
        alpha_assessment(records), os.path.join(out, "alpha_assessment.csv")
    )
    _dump_json(
        {
            "kind": evaluator.kind,
            "seed": seed,
            "n_calibration_records": len(records),
            "search": search_summary,
        },
        os.path.join(out, "calibration_summary.json"),
    )
    print(f"calibrated {evaluator.kind} on {len(train)} examples -> {out}")
    return 0


def cmd_evaluate(config: dict, state_path: str, out: str) -> int:
    evaluator = load_evaluator_state(state_path)
    dataset = _load_dataset(config)
    split_cfg = _require(config, "split")
    split = temporal_split(
        dataset,
        train_end=int(_require(split_cfg, "train_end")),
        period_length=int(_require(split_cfg, "period_seconds")),
    )
    decisions_path = os.path.join(out, "decisions.csv")
    labeled = True
    with open(decisions_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "predicted", "credibility", "confidence", "kept", "s"])
        for period in split.test_periods:
            for ex in period.examples:
                d = evaluator.decide(ex)
                if ex.label is None:
                    labeled = False
                writer.writerow(
                    [
                        d.example_id,
                        d.predicted,
                        repr(d.credibility),
                        repr(d.confidence),
                        int(d.kept),
                        "" if d.fold_accepts is None else d.fold_accepts,
                    ]
                )
    if not labeled:
        print(
            "warning: test examples lack labels; decisions written, metrics skipped",
            file=sys.stderr,
        )
        return 0
    report = evaluate_stream(evaluator, split)
    _dump_json(report_to_dict(report), os.path.join(out, "report.json"))
    with open(os.path.join(out, "report.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["period", "partition", "metric", "value", "degenerate"])
        for row in report_rows(report):
            writer.writerow([row[0], row[1], row[2], repr(row[3]), int(row[4])])
    print(f"evaluated {len(split.test_periods)} periods -> {out}")
    return 0


def cmd_assess(records_path: str, out: str, label_conditional: bool) -> int:
    records = _read_records_csv(records_path)
    if any(r.ground_truth is None for r in records):
        raise ConfigurationError(
            f"records file {records_path} has rows without ground truth; "
            "alpha assessment needs labeled records"
        )
    assessment = alpha_assessment(records, label_conditional=label_conditional)
    _write_assessment_csv(assessment, os.path.join(out, "alpha_assessment.csv"))
    print(f"assessed {len(records)} records -> {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="driftguard",
        description="Conformal evaluation with rejection for drifting classifiers",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config=True):
        if config:
            p.add_argument("--config", required=True, help="JSON run configuration")
        p.add_argument("--out", help="output directory (overrides config out_dir)")
        p.add_argument("--seed", type=int, help="seed override")

    p = sub.add_parser("simulate", help="generate a synthetic drift stream")
    common(p)
    p = sub.add_parser("calibrate", help="calibrate an evaluator on the training window")
    common(p)
    p = sub.add_parser("evaluate", help="score test periods with a calibrated evaluator")
    common(p)
    p.add_argument("--state", required=True, help="evaluator state JSON from calibrate")
    p = sub.add_parser("assess", help="alpha assessment of a records CSV")
    p.add_argument("--records", required=True, help="calibration_records.csv path")
    p.add_argument("--out", help="output directory")
    p.add_argument(
        "--non-label-conditional",
        action="store_true",
        help="assess p-values of every record against every class",
    )
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "assess":
            out = args.out if args.out is not None else "."
            os.makedirs(out, exist_ok=True)
            return cmd_assess(args.records, out, not args.non_label_conditional)
        config = _load_config(args.config)
        seed = _resolve_seed(config, args.seed)
        out = _out_dir(config, args.out)
        if args.command == "simulate":
            return cmd_simulate(config, out, seed)
        if args.command == "calibrate":
            return cmd_calibrate(config, out, seed)
        if args.command == "evaluate":
            return cmd_evaluate(config, args.state, out)
        raise ConfigurationError(f"unknown command {args.command!r}")
    except DriftguardError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exit_code_for(exc)


if __name__ == "__main__":
    sys.exit(main())
