"""Command-line interface orchestrating the measurement pipeline.

Exit codes: 0 success, 1 card validation failure, 2 usage error (bad flags,
missing inputs). No environment variables are read; every knob is an
explicit flag or config entry, for reproducibility.
"""

from __future__ import annotations

import json
import os
import sys

import click
import numpy as np

from . import __version__, pipeline
from .card import assemble_card, validate_card
from .dataset import RunStamp, QualityReport, compute_quality, load_csv, windowed_drift_scan, write_csv
from .drift import kde_overlay, scenario_divergence
from .errors import IarcError
from .metrics import UqReport, load_predictions_csv, uq_report, write_predictions_csv
from .odd import OddModel, coverage_fraction, fit_odd
from .reference import fit_ridge, predict_with_intervals
from .robustness import RobustnessSummary, ScenarioOutcome, build_summary, compare_versions
from .scenarios import apply_scenario, load_catalog
from .splits import SplitAssignment, SplitConfig, make_split, validate_splits


def _fail(message: str, code: int = 2):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _load_dataset(path, timestamp_column, batch_column):
    try:
        return load_csv(path, timestamp_column=timestamp_column, batch_column=batch_column)
    except IarcError as exc:
        _fail(str(exc))


def _read_json(path):
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def _write_json(payload, path):
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, ensure_ascii=False)
        fh.write("\n")


def _parse_fractions(text: str) -> dict[str, float]:
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 4:
        _fail("fractions must be four comma-separated numbers: train,validation,calibration,test")
    values = [float(p) for p in parts]
    return dict(zip(("train", "validation", "calibration", "test"), values))


@click.group()
@click.version_option(version=__version__, prog_name="iarc-kit")
def main():
    """Measurement protocol and robustness card for industrial time series."""


# ---------------------------------------------------------------------------
# ingest
# ---------------------------------------------------------------------------


@main.command()
@click.option("--dataset", "dataset_path", required=True, type=click.Path(exists=True))
@click.option("--timestamp-column", required=True)
@click.option("--batch-column", default=None)
@click.option("--preprocessed", "preprocessed_path", default=None, type=click.Path(exists=True))
@click.option("--windows", default=4, show_default=True, help="Windows for the drift scan.")
@click.option("--out", "out_dir", required=True, type=click.Path())
def ingest(dataset_path, timestamp_column, batch_column, preprocessed_path, windows, out_dir):
    """Quality reports (raw and optionally preprocessed) plus a windowed drift scan."""
    try:
        raw = load_csv(dataset_path, timestamp_column, batch_column)
        quality_raw = compute_quality(raw, "raw")
        os.makedirs(out_dir, exist_ok=True)
        _write_json(quality_raw.to_dict(), os.path.join(out_dir, "quality_raw.json"))
        scan_target = raw
        if preprocessed_path:
            pre = load_csv(preprocessed_path, timestamp_column, batch_column)
            _write_json(
                compute_quality(pre, "preprocessed").to_dict(),
                os.path.join(out_dir, "quality_preprocessed.json"),
            )
            scan_target = pre
        scan = windowed_drift_scan(scan_target, windows)
        _write_json(
            {"window_count": windows, "ks_by_feature": scan},
            os.path.join(out_dir, "drift_scan.json"),
        )
    except IarcError as exc:
        _fail(str(exc))
    click.echo(f"quality reports written to {out_dir}")


# ---------------------------------------------------------------------------
# split
# ---------------------------------------------------------------------------


@main.command()
@click.option("--dataset", "dataset_path", required=True, type=click.Path(exists=True))
@click.option("--timestamp-column", required=True)
@click.option("--batch-column", default=None)
@click.option("--mode", type=click.Choice(["chronological", "group"]), default="chronological",
              show_default=True)
@click.option("--fractions", default="0.5,0.15,0.15,0.2", show_default=True,
              help="train,validation,calibration,test")
@click.option("--purge-gap", default=0, show_default=True)
@click.option("--seed", default=42, show_default=True)
@click.option("--out", "out_dir", required=True, type=click.Path())
def split(dataset_path, timestamp_column, batch_column, mode, fractions, purge_gap, seed, out_dir):
    """Leakage-safe split; writes splits.json with the index lists."""
    ds = _load_dataset(dataset_path, timestamp_column, batch_column)
    try:
        cfg = SplitConfig(
            fractions=_parse_fractions(fractions), purge_gap=purge_gap, mode=mode, seed=seed
        )
        assignment = make_split(ds, cfg)
    except IarcError as exc:
        _fail(str(exc))
    check = validate_splits(ds, assignment, cfg)
    if not check.ok:
        _fail("constructed split failed validation: " + "; ".join(check.violations), code=1)
    _write_json(
        {"config": cfg.to_dict(), "assignment": assignment.to_dict(),
         "dataset_version": ds.dataset_version},
        os.path.join(out_dir, "splits.json"),
    )
    sizes = {name: len(assignment.split(name)) for name in ("train", "validation", "calibration", "test")}
    click.echo(f"split sizes {sizes}, purged {len(assignment.purged)}")


def _load_assignment(path) -> tuple[SplitConfig, SplitAssignment]:
    payload = _read_json(path)
    cfg = SplitConfig(**payload["config"])
    return cfg, SplitAssignment.from_dict(payload["assignment"])


# ---------------------------------------------------------------------------
# odd
# ---------------------------------------------------------------------------


@main.group()
def odd():
    """Operational design domain commands."""


@odd.command("fit")
@click.option("--dataset", "dataset_path", required=True, type=click.Path(exists=True))
@click.option("--timestamp-column", required=True)
@click.option("--batch-column", default=None)
@click.option("--splits", "splits_path", default=None, type=click.Path(exists=True),
              help="Fit on the train split instead of the full dataset.")
@click.option("--features", default=None, help="Comma-separated feature subset.")
@click.option("--q-odd", default=0.01, show_default=True)
@click.option("--manual-ranges", "ranges_path", default=None, type=click.Path(exists=True),
              help='JSON file {"feature": [lo, hi], ...}')
@click.option("--subsample-seed", default=0, show_default=True)
@click.option("--out", "out_dir", required=True, type=click.Path())
def odd_fit(dataset_path, timestamp_column, batch_column, splits_path, features, q_odd,
            ranges_path, subsample_seed, out_dir):
    """Fit admissible ranges and density thresholds on the training data."""
    ds = _load_dataset(dataset_path, timestamp_column, batch_column)
    try:
        if splits_path:
            _, assignment = _load_assignment(splits_path)
            ds = ds.select_rows(assignment.train, name="train")
        if features:
            ds = ds.select_features([f.strip() for f in features.split(",")])
        manual = None
        if ranges_path:
            manual = {k: tuple(v) for k, v in _read_json(ranges_path).items()}
        model = fit_odd(ds, q_odd=q_odd, manual_ranges=manual, subsample_seed=subsample_seed)
        _write_json(model.to_dict(), os.path.join(out_dir, "odd.json"))
    except IarcError as exc:
        _fail(str(exc))
    click.echo(
        f"ODD fitted on {len(model.features)} features"
        + (f" (excluded: {list(model.excluded_features)})" if model.excluded_features else "")
    )


# ---------------------------------------------------------------------------
# scenarios
# ---------------------------------------------------------------------------


@main.group()
def scenarios():
    """Stress-test scenario commands."""


@scenarios.command("build")
@click.option("--dataset", "dataset_path", required=True, type=click.Path(exists=True))
@click.option("--timestamp-column", required=True)
@click.option("--batch-column", default=None)
@click.option("--catalog", "catalog_path", required=True, type=click.Path(exists=True))
@click.option("--splits", "splits_path", default=None, type=click.Path(exists=True),
              help="Perturb the catalog's base split; scales come from the train split.")
@click.option("--out", "out_dir", required=True, type=click.Path())
def scenarios_build(dataset_path, timestamp_column, batch_column, catalog_path, splits_path, out_dir):
    """Write one perturbed dataset CSV per catalog scenario."""
    ds = _load_dataset(dataset_path, timestamp_column, batch_column)
    try:
        catalog = load_catalog(catalog_path)
        base = ds
        scales = None
        if splits_path:
            _, assignment = _load_assignment(splits_path)
            base = ds.select_rows(assignment.split(catalog.base_split), name=catalog.base_split)
            train = ds.select_rows(assignment.train, name="train")
            scales = {
                feat: float(np.nanstd(train.column(feat))) for feat in train.feature_names
            }
        scen_dir = os.path.join(out_dir, "scenarios")
        os.makedirs(scen_dir, exist_ok=True)
        for spec in catalog.scenarios:
            perturbed = apply_scenario(base, spec, scales)
            write_csv(perturbed, os.path.join(scen_dir, f"{spec.name}.csv"))
        _write_json(catalog.to_dict(), os.path.join(out_dir, "catalog.normalized.json"))
    except IarcError as exc:
        _fail(str(exc))
    click.echo(f"{len(catalog.scenarios)} scenario datasets written to {scen_dir}")


# ---------------------------------------------------------------------------
# drift
# ---------------------------------------------------------------------------


@main.command()
@click.option("--dataset", "dataset_path", required=True, type=click.Path(exists=True))
@click.option("--timestamp-column", required=True)
@click.option("--batch-column", default=None)
@click.option("--splits", "splits_path", required=True, type=click.Path(exists=True))
@click.option("--scenarios-dir", required=True, type=click.Path(exists=True))
@click.option("--key-features", default=4, show_default=True)
@click.option("--odd", "odd_path", default=None, type=click.Path(exists=True),
              help="odd.json for range shading in overlays.")
@click.option("--out", "out_dir", required=True, type=click.Path())
def drift(dataset_path, timestamp_column, batch_column, splits_path, scenarios_dir,
          key_features, odd_path, out_dir):
    """Divergence statistics of every scenario against the training slice."""
    ds = _load_dataset(dataset_path, timestamp_column, batch_column)
    try:
        _, assignment = _load_assignment(splits_path)
        train = ds.select_rows(assignment.train, name="train")
        odd_model = OddModel.from_dict(_read_json(odd_path)) if odd_path else None
        reports = []
        scenario_data = {}
        for entry in sorted(os.listdir(scenarios_dir)):
            if not entry.endswith(".csv"):
                continue
            name = entry[:-4]
            scen = load_csv(
                os.path.join(scenarios_dir, entry),
                timestamp_column="timestamp",
                batch_column="batch_id" if ds.batch_ids is not None else None,
            )
            scenario_data[name] = scen
            reports.append(scenario_divergence(train, scen, scenario_name=name))

        shift: dict[str, list[float]] = {}
        for report in reports:
            for feat, stats in report.per_feature.items():
                shift.setdefault(feat, []).append(stats.normalized_wasserstein)
        top = sorted(shift, key=lambda f: (-float(np.mean(shift[f])), f))[:key_features]
        overlays = []
        for feat in top:
            worst = max(
                reports,
                key=lambda r: r.per_feature[feat].normalized_wasserstein
                if feat in r.per_feature else -1.0,
            )
            overlay = kde_overlay(train.column(feat), scenario_data[worst.scenario].column(feat))
            spec = odd_model.features.get(feat) if odd_model else None
            overlays.append(
                {
                    "feature": feat,
                    "scenario": worst.scenario,
                    "odd_range": [spec.range_lo, spec.range_hi] if spec else None,
                    **overlay.to_dict(),
                }
            )
        _write_json(
            {
                "reports": [r.to_dict() for r in reports],
                "overlays": overlays,
                "key_features": top,
            },
            os.path.join(out_dir, "divergence.json"),
        )
    except IarcError as exc:
        _fail(str(exc))
    click.echo(f"divergence report for {len(reports)} scenarios written to {out_dir}")


# ---------------------------------------------------------------------------
# evaluate
# ---------------------------------------------------------------------------


@main.command()
@click.option("--predictions-dir", default=None, type=click.Path(exists=True),
              help="CSVs named <model_version>__<slice>.csv; the model boundary.")
@click.option("--reference-model", is_flag=True,
              help="Train the built-in ridge soft sensor and predict every slice.")
@click.option("--dataset", "dataset_path", default=None, type=click.Path(exists=True))
@click.option("--timestamp-column", default=None)
@click.option("--batch-column", default=None)
@click.option("--target", default=None, help="Target column for the reference model.")
@click.option("--splits", "splits_path", default=None, type=click.Path(exists=True))
@click.option("--scenarios-dir", default=None, type=click.Path(exists=True))
@click.option("--catalog", "catalog_path", default=None, type=click.Path(exists=True),
              help="Needed for robustness aggregation (severities, fault kinds).")
@click.option("--model-version", default="reference", show_default=True)
@click.option("--lam", default=1.0, show_default=True, help="Ridge regularization.")
@click.option("--primary-metric", default="mae", show_default=True)
@click.option("--out", "out_dir", required=True, type=click.Path())
def evaluate(predictions_dir, reference_model, dataset_path, timestamp_column, batch_column,
             target, splits_path, scenarios_dir, catalog_path, model_version, lam,
             primary_metric, out_dir):
    """Score prediction files (or the built-in reference model) per slice."""
    try:
        reports: list[UqReport] = []
        if predictions_dir:
            for entry in sorted(os.listdir(predictions_dir)):
                if not entry.endswith(".csv") or "__" not in entry:
                    continue
                version, slice_name = entry[:-4].split("__", 1)
                pred = load_predictions_csv(
                    os.path.join(predictions_dir, entry), version, slice_name
                )
                reports.append(uq_report(pred))
        elif reference_model:
            if not (dataset_path and timestamp_column and target and splits_path):
                _fail("--reference-model needs --dataset, --timestamp-column, --target and --splits")
            ds = load_csv(dataset_path, timestamp_column, batch_column)
            _, assignment = _load_assignment(splits_path)
            train = ds.select_rows(assignment.train, name="train")
            cal = ds.select_rows(assignment.calibration, name="calibration")
            test = ds.select_rows(assignment.test, name="test")
            model = fit_ridge(train, target, lam)
            slices = {"baseline": test}
            if scenarios_dir:
                for entry in sorted(os.listdir(scenarios_dir)):
                    if entry.endswith(".csv"):
                        slices[entry[:-4]] = load_csv(
                            os.path.join(scenarios_dir, entry),
                            timestamp_column="timestamp",
                            batch_column="batch_id" if ds.batch_ids is not None else None,
                        )
            predictions_out = os.path.join(out_dir, "predictions")
            os.makedirs(predictions_out, exist_ok=True)
            for slice_name, slice_ds in slices.items():
                pred = predict_with_intervals(
                    model, slice_ds, cal,
                    slice_name=slice_name, model_version=model_version,
                )
                write_predictions_csv(
                    pred, os.path.join(predictions_out, f"{model_version}__{slice_name}.csv")
                )
                reports.append(uq_report(pred))
        else:
            _fail("either --predictions-dir or --reference-model is required")
        if not reports:
            _fail("no prediction files found")

        payload: dict = {"uq": [r.to_dict() for r in reports]}
        if catalog_path:
            catalog = load_catalog(catalog_path)
            versions = sorted({r.model_version for r in reports})
            summaries: dict[str, RobustnessSummary] = {}
            for version in versions:
                baseline = next(
                    (r.metrics for r in reports
                     if r.model_version == version and r.slice_name == "baseline"),
                    None,
                )
                if baseline is None:
                    continue
                outcomes = []
                for spec in catalog.scenarios:
                    rep = next(
                        (r for r in reports
                         if r.model_version == version and r.slice_name == spec.name),
                        None,
                    )
                    if rep is not None:
                        outcomes.append(ScenarioOutcome.from_spec(spec, rep.metrics))
                if outcomes:
                    summaries[version] = build_summary(
                        outcomes, baseline, primary_metric, version
                    )
            if summaries:
                payload["robustness"] = {
                    "summaries": {v: s.to_dict() for v, s in summaries.items()},
                    "radar": compare_versions(summaries).to_dict(),
                }
        _write_json(payload, os.path.join(out_dir, "evaluation.json"))
    except IarcError as exc:
        _fail(str(exc))
    click.echo(f"evaluated {len(reports)} (version, slice) pairs")


# ---------------------------------------------------------------------------
# card
# ---------------------------------------------------------------------------


@main.group()
def card():
    """Card assembly and rendering."""


@card.command("build")
@click.option("--artifacts", "artifacts_dir", required=True, type=click.Path(exists=True),
              help="Directory with the JSON artifacts of previous commands.")
@click.option("--metadata", "metadata_path", required=True, type=click.Path(),
              help="User metadata JSON (general information, intended use, ...).")
@click.option("--seed", default=42, show_default=True)
@click.option("--code-version", default="unversioned", show_default=True)
@click.option("--thresholds", "thresholds_path", default=None, type=click.Path(exists=True),
              help='JSON list [{"metric": ..., "threshold": ...}, ...]')
@click.option("--collapsible", is_flag=True, help="Add the expand/collapse-all script.")
@click.option("--out", "out_dir", required=True, type=click.Path())
def card_build(artifacts_dir, metadata_path, seed, code_version, thresholds_path,
               collapsible, out_dir):
    """Assemble, validate, and render the card from stored artifacts."""
    if not os.path.exists(metadata_path):
        _fail(f"metadata file not found: {metadata_path}")

    def optional(name):
        path = os.path.join(artifacts_dir, name)
        return _read_json(path) if os.path.exists(path) else None

    quality_raw_payload = optional("quality_raw.json")
    if quality_raw_payload is None:
        _fail(f"missing required artifact {os.path.join(artifacts_dir, 'quality_raw.json')} "
              "(run `iarc-kit ingest` first)")
    evaluation_payload = optional("evaluation.json")
    if evaluation_payload is None:
        _fail(f"missing required artifact {os.path.join(artifacts_dir, 'evaluation.json')} "
              "(run `iarc-kit evaluate` first)")

    try:
        metadata = _read_json(metadata_path)
        quality_raw = QualityReport.from_dict(quality_raw_payload)
        quality_pre_payload = optional("quality_preprocessed.json")
        quality_pre = (
            QualityReport.from_dict(quality_pre_payload) if quality_pre_payload else None
        )
        odd_payload = optional("odd.json")
        odd_model = OddModel.from_dict(odd_payload) if odd_payload else None
        catalog_payload = optional("catalog.normalized.json")
        catalog = None
        if catalog_payload:
            from .scenarios import build_catalog

            catalog = build_catalog(catalog_payload)
        divergence_payload = optional("divergence.json") or {}
        from .drift import DivergenceReport

        divergence_reports = [
            DivergenceReport.from_dict(r) for r in divergence_payload.get("reports", [])
        ]
        uq_reports = [UqReport.from_dict(r) for r in evaluation_payload.get("uq", [])]
        robustness_payload = evaluation_payload.get("robustness") or {}
        summaries = {
            v: RobustnessSummary.from_dict(s)
            for v, s in robustness_payload.get("summaries", {}).items()
        }
        radar = None
        if robustness_payload.get("radar"):
            from .robustness import RadarTable

            radar = RadarTable.from_dict(robustness_payload["radar"])
        thresholds = _read_json(thresholds_path) if thresholds_path else []
        date = metadata.get("date", "")
        run_stamp = RunStamp(
            seed=seed,
            code_version=code_version,
            tool_version=__version__,
            created_at=metadata.get("created_at") or (f"{date}T00:00:00Z" if date else ""),
        )
        doc = assemble_card(
            metadata=metadata,
            run_stamp=run_stamp,
            quality_raw=quality_raw,
            quality_preprocessed=quality_pre,
            drift_scan=optional("drift_scan.json"),
            odd_model=odd_model,
            odd_coverage=(odd_payload or {}).get("coverage_fractions", {}),
            catalog=catalog,
            divergence_reports=divergence_reports,
            overlays=divergence_payload.get("overlays", []),
            key_features=divergence_payload.get("key_features", []),
            uq_reports=uq_reports,
            thresholds=thresholds,
            robustness_summaries=summaries,
            radar=radar,
        )
    except IarcError as exc:
        _fail(str(exc))
    result = validate_card(doc)
    if not result.ok:
        for violation in result.violations:
            click.echo(f"violation: {violation}", err=True)
        sys.exit(1)
    paths = pipeline.write_card_outputs(doc, out_dir, collapsible=collapsible)
    click.echo(f"card written: {paths['card_json']}, {paths['card_html']}")


# ---------------------------------------------------------------------------
# demo and validate
# ---------------------------------------------------------------------------


@main.command()
@click.option("--seed", default=42, show_default=True)
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--batches", default=20, show_default=True)
@click.option("--steps", default=200, show_default=True)
@click.option("--collapsible", is_flag=True)
def demo(seed, out_dir, batches, steps, collapsible):
    """Full pipeline on the synthetic surrogate; writes the complete artifact tree."""
    try:
        outputs = pipeline.run_demo(
            out_dir,
            master_seed=seed,
            batch_count=batches,
            steps_per_batch=steps,
            collapsible=collapsible,
        )
    except IarcError as exc:
        _fail(str(exc))
    result = outputs["validation"]
    if not result.ok:
        for violation in result.violations:
            click.echo(f"violation: {violation}", err=True)
        sys.exit(1)
    click.echo(f"demo card written to {outputs['paths']['card_json']}")


@main.command()
@click.argument("card_json", type=click.Path(exists=True))
def validate(card_json):
    """Validate a card JSON file against the schema and its invariants."""
    with open(card_json, "r", encoding="utf-8") as fh:
        text = fh.read()
    result = validate_card(text)
    if result.ok:
        click.echo("card is valid")
        sys.exit(0)
    for violation in result.violations:
        click.echo(f"violation: {violation}", err=True)
    sys.exit(1)


if __name__ == "__main__":
    main()
