"""End-to-end orchestration: the demo pipeline and shared artifact IO.

Every stochastic component derives its seed from (master seed, component
name), so a fixed master seed reproduces the whole run byte for byte. The
demo generates a synthetic fed-batch campaign, walks the complete protocol
(quality, splits, ODD, scenarios, drift, two model versions, robustness),
and writes the card JSON/HTML together with figure files and CSV tables.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os

import numpy as np

from . import __version__
from .card import IarcDocument, assemble_card, serialize_json, validate_card
from .dataset import (
    QualityReport,
    RunStamp,
    TimeSeriesDataset,
    compute_quality,
    windowed_drift_scan,
    write_csv,
)
from .drift import kde_overlay, scenario_divergence
from .metrics import PredictionSet, UqReport, uq_report, write_predictions_csv
from .odd import coverage_fraction, fit_odd
from .reference import (
    SURROGATE_FEATURES,
    TARGET_NAME,
    SyntheticProcessConfig,
    fit_ridge,
    generate_surrogate,
    predict_with_intervals,
)
from .report import render_html
from .robustness import (
    RadarTable,
    RobustnessSummary,
    ScenarioOutcome,
    build_summary,
    compare_versions,
)
from .scenarios import ScenarioCatalog, apply_scenario, build_catalog
from .splits import SplitConfig, make_split, validate_splits
from . import plots


def derive_seed(master_seed: int, component: str) -> int:
    """Stable fan-out of the master seed to one named component."""
    digest = hashlib.sha256(f"{master_seed}:{component}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


DEMO_LEVELS = (0.05, 0.5, 0.95)
DEMO_FRACTIONS = {"train": 0.5, "validation": 0.15, "calibration": 0.15, "test": 0.2}
DEMO_PURGE_GAP = 5
DEMO_Q_ODD = 0.01
DEMO_KEY_FEATURES = 4
DEMO_LAMBDA_GRID = (0.01, 0.1, 1.0, 10.0)
DEMO_DATE = "2026-08-10"


def demo_metadata() -> dict:
    return {
        "model_name": "penicillin-soft-sensor",
        "model_version": "1.0.0",
        "dataset_name": "synthetic-fedbatch-campaign",
        "date": DEMO_DATE,
        "provider": "iarc-kit demo",
        "deployment_context": (
            "Soft sensor estimating product concentration from online process "
            "signals in a fed-batch fermentation; advisory use only."
        ),
        "intended_use": {
            "description": (
                "Estimate the penicillin concentration of a running fed-batch "
                "fermentation from feed rate, temperature, pH and dissolved "
                "oxygen, so lab assays can be scheduled less frequently."
            ),
            "out_of_scope_uses": [
                "Batch release or any decision directly affecting product quality",
                "Operation outside the documented operational design domain",
                "Processes other than the fermentation the model was trained on",
            ],
        },
        "data": {
            "overview": (
                "Synthetic fed-batch campaign: one row per minute per batch with "
                "feed rate, temperature, pH, dissolved oxygen and the product "
                "concentration target."
            ),
            "provenance": (
                "Generated by the built-in process surrogate (seeded); no plant "
                "data is included."
            ),
            "preprocessing_notes": (
                "Missing sensor cells are imputed last-observation-carried-forward "
                "within each batch; leading gaps take the training mean."
            ),
        },
        "limitations": [
            "All evidence is computed on a synthetic process surrogate; results "
            "do not transfer to plant data without re-running the protocol.",
        ],
    }


DEMO_AUTO_WARNINGS = [
    "ODD membership uses marginal per-feature densities; joint-feature "
    "effects are not modeled.",
    "Synthetic faults perturb input features only; the target channel is "
    "left untouched.",
]


def inject_missingness(
    ds: TimeSeriesDataset, features: tuple[str, ...], rate: float, seed: int
) -> TimeSeriesDataset:
    """Blank a random fraction of cells (demo stand-in for a raw export)."""
    rng = np.random.default_rng(np.random.SeedSequence([seed]))
    values = np.array(ds.values)
    for feat in features:
        j = ds.feature_index(feat)
        drops = rng.random(ds.n_rows) < rate
        values[drops, j] = np.nan
    return ds.with_values(values, name=f"{ds.name}-raw")


def demo_catalog_config(seed_base: int, slice_batch: str) -> dict:
    features = list(SURROGATE_FEATURES)
    return {
        "base_split": "test",
        "scenarios": [
            {
                "name": "sensor_noise",
                "fault": "gaussian_noise",
                "severities": [0.2, 0.5, 1.0],
                "features": features,
                "seed": derive_seed(seed_base, "scenario:sensor_noise"),
            },
            {
                "name": "temperature_drift",
                "fault": "drift_ramp",
                "severities": [0.2, 0.5, 1.0],
                "features": ["temperature"],
                "seed": derive_seed(seed_base, "scenario:temperature_drift"),
            },
            {
                "name": "do_spikes",
                "fault": "spike",
                "severities": [0.5, 1.0],
                "features": ["dissolved_oxygen"],
                "seed": derive_seed(seed_base, "scenario:do_spikes"),
            },
            {
                "name": "ph_dropout",
                "fault": "dropout",
                "severities": [0.5, 1.0],
                "features": ["pH"],
                "seed": derive_seed(seed_base, "scenario:ph_dropout"),
            },
            {
                "name": "temperature_stuck",
                "fault": "stuck_at",
                "severity": 1.0,
                "features": ["temperature"],
                "seed": derive_seed(seed_base, "scenario:temperature_stuck"),
            },
            {
                "name": "last_batch",
                "kind": "real_slice",
                "batch_id": slice_batch,
                "seed": derive_seed(seed_base, "scenario:last_batch"),
            },
        ],
    }


def evaluate_version(
    model_version: str,
    model,
    slices: dict[str, TimeSeriesDataset],
    cal_ds: TimeSeriesDataset,
    levels: tuple[float, ...] = DEMO_LEVELS,
) -> tuple[list[UqReport], dict[str, PredictionSet]]:
    """Predict with intervals and score every slice for one model version."""
    reports: list[UqReport] = []
    predictions: dict[str, PredictionSet] = {}
    for slice_name, ds in slices.items():
        pred = predict_with_intervals(
            model, ds, cal_ds, levels=levels,
            slice_name=slice_name, model_version=model_version,
        )
        predictions[slice_name] = pred
        reports.append(uq_report(pred))
    return reports, predictions


def robustness_from_reports(
    reports: list[UqReport],
    catalog: ScenarioCatalog,
    model_version: str,
    primary_metric: str = "mae",
) -> RobustnessSummary:
    baseline = next(
        r.metrics
        for r in reports
        if r.slice_name == "baseline" and r.model_version == model_version
    )
    outcomes = []
    for spec in catalog.scenarios:
        report = next(
            (
                r
                for r in reports
                if r.slice_name == spec.name and r.model_version == model_version
            ),
            None,
        )
        if report is None:
            continue
        outcomes.append(ScenarioOutcome.from_spec(spec, report.metrics))
    return build_summary(outcomes, baseline, primary_metric, model_version)


def _write_json(payload, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, ensure_ascii=False)
        fh.write("\n")


def _write_table(path: str, headers: list[str], rows: list[list]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(headers)
        writer.writerows(rows)


def write_card_outputs(doc: IarcDocument, out_dir: str, collapsible: bool = False) -> dict:
    """card.json + card.html plus figure files and CSV mirror tables."""
    os.makedirs(out_dir, exist_ok=True)
    figures_dir = os.path.join(out_dir, "figures")
    tables_dir = os.path.join(out_dir, "tables")
    os.makedirs(figures_dir, exist_ok=True)
    os.makedirs(tables_dir, exist_ok=True)

    card_json = os.path.join(out_dir, "card.json")
    with open(card_json, "w", encoding="utf-8") as fh:
        fh.write(serialize_json(doc))
    card_html = os.path.join(out_dir, "card.html")
    with open(card_html, "w", encoding="utf-8") as fh:
        fh.write(render_html(doc, collapsible=collapsible))

    diagnostics = doc.data.get("distributional_diagnostics", {})
    for overlay in diagnostics.get("overlays", []):
        path = os.path.join(figures_dir, f"overlay_{overlay['feature']}.svg")
        plots.save_svg(plots.kde_overlay_figure, path, overlay)

    robustness = doc.evaluation.get("robustness") or {}
    radar = robustness.get("radar")
    if radar and radar.get("scenarios"):
        plots.save_svg(plots.radar_figure, os.path.join(figures_dir, "radar.svg"), radar)
    curves = []
    for summary in robustness.get("summaries", {}).values():
        curves.extend(summary.get("severity_curves", []))
    if curves:
        plots.save_svg(
            plots.severity_curves_figure,
            os.path.join(figures_dir, "severity_curves.svg"),
            curves,
        )

    uq = doc.evaluation.get("uq", [])
    metric_names: list[str] = []
    for entry in uq:
        for m in entry.get("metrics", {}):
            if m not in metric_names:
                metric_names.append(m)
    _write_table(
        os.path.join(tables_dir, "metrics.csv"),
        ["model_version", "slice_name"] + metric_names,
        [
            [entry["model_version"], entry["slice_name"]]
            + [entry["metrics"].get(m) for m in metric_names]
            for entry in uq
        ],
    )
    if robustness.get("summaries"):
        rows = []
        for version, summary in robustness["summaries"].items():
            for scenario, value in summary.get("retentions", {}).items():
                rows.append([version, scenario, value])
        _write_table(
            os.path.join(tables_dir, "retention.csv"),
            ["model_version", "scenario", "retention"],
            rows,
        )
    reports = diagnostics.get("reports", [])
    if reports:
        rows = []
        for rep in reports:
            for feat, stats in rep.get("per_feature", {}).items():
                rows.append(
                    [
                        rep["scenario"],
                        feat,
                        stats["ks_statistic"],
                        stats["wasserstein1"],
                        stats["normalized_wasserstein"],
                    ]
                )
        _write_table(
            os.path.join(tables_dir, "divergence.csv"),
            ["scenario", "feature", "ks_statistic", "wasserstein1", "normalized_wasserstein"],
            rows,
        )
    return {"card_json": card_json, "card_html": card_html, "figures": figures_dir}


def run_demo(
    out_dir: str,
    master_seed: int = 42,
    batch_count: int = 20,
    steps_per_batch: int = 200,
    collapsible: bool = False,
    write_outputs: bool = True,
) -> dict:
    """The full measurement protocol on the synthetic surrogate.

    Returns a dict with the document, the validation result and the key
    in-memory artifacts; when ``write_outputs`` is set the complete artifact
    tree is written under ``out_dir``.
    """
    metadata = demo_metadata()

    cfg = SyntheticProcessConfig(
        batch_count=batch_count,
        steps_per_batch=steps_per_batch,
        noise_std=0.25,
        seed=derive_seed(master_seed, "surrogate"),
    )
    preprocessed = generate_surrogate(cfg)
    raw = inject_missingness(
        preprocessed,
        SURROGATE_FEATURES,
        rate=0.015,
        seed=derive_seed(master_seed, "raw-missingness"),
    )

    quality_raw = compute_quality(raw, "raw")
    quality_pre = compute_quality(preprocessed, "preprocessed")
    drift_scan = windowed_drift_scan(preprocessed, window_count=4)

    split_cfg = SplitConfig(
        fractions=dict(DEMO_FRACTIONS),
        purge_gap=DEMO_PURGE_GAP,
        mode="chronological",
        seed=derive_seed(master_seed, "split") % (2**32),
    )
    assignment = make_split(preprocessed, split_cfg)
    check = validate_splits(preprocessed, assignment, split_cfg)
    if not check.ok:
        raise RuntimeError(f"demo split failed validation: {check.violations}")

    train_ds = preprocessed.select_rows(assignment.train, name="train")
    val_ds = preprocessed.select_rows(assignment.validation, name="validation")
    cal_ds = preprocessed.select_rows(assignment.calibration, name="calibration")
    test_ds = preprocessed.select_rows(assignment.test, name="test")

    inputs_train = train_ds.select_features(list(SURROGATE_FEATURES))
    odd_model = fit_odd(
        inputs_train,
        q_odd=DEMO_Q_ODD,
        subsample_seed=derive_seed(master_seed, "odd-subsample") % (2**32),
    )

    slice_batch = test_ds.batch_ids[-1]
    catalog = build_catalog(demo_catalog_config(master_seed, slice_batch))

    train_scales = {
        feat: float(np.nanstd(train_ds.column(feat))) for feat in SURROGATE_FEATURES
    }
    scenario_datasets: dict[str, TimeSeriesDataset] = {}
    for spec in catalog.scenarios:
        scenario_datasets[spec.name] = apply_scenario(test_ds, spec, train_scales)

    odd_coverage = {
        "train": coverage_fraction(odd_model, inputs_train),
        "test": coverage_fraction(
            odd_model, test_ds.select_features(list(SURROGATE_FEATURES))
        ),
    }
    for name, ds in scenario_datasets.items():
        odd_coverage[name] = coverage_fraction(
            odd_model, ds.select_features(list(SURROGATE_FEATURES))
        )

    inputs_only = list(SURROGATE_FEATURES)
    divergence_reports = [
        scenario_divergence(
            train_ds.select_features(inputs_only),
            ds.select_features(inputs_only),
            scenario_name=name,
        )
        for name, ds in scenario_datasets.items()
    ]

    mean_shift: dict[str, list[float]] = {}
    for report in divergence_reports:
        for feat, stats in report.per_feature.items():
            mean_shift.setdefault(feat, []).append(stats.normalized_wasserstein)
    key_features = sorted(
        mean_shift,
        key=lambda f: (-float(np.mean(mean_shift[f])), f),
    )[:DEMO_KEY_FEATURES]
    overlays = []
    for feat in key_features:
        worst = max(
            divergence_reports,
            key=lambda r: r.per_feature[feat].normalized_wasserstein
            if feat in r.per_feature
            else -1.0,
        )
        overlay = kde_overlay(
            train_ds.column(feat), scenario_datasets[worst.scenario].column(feat)
        )
        spec = odd_model.features.get(feat)
        overlays.append(
            {
                "feature": feat,
                "scenario": worst.scenario,
                "odd_range": [spec.range_lo, spec.range_hi] if spec else None,
                **overlay.to_dict(),
            }
        )

    # Model versions: the shipped 1.0.0 picks lambda on the validation slice;
    # 0.9.0 is an over-regularized predecessor kept for the radar comparison.
    best_lam, best_mae = None, None
    for lam in DEMO_LAMBDA_GRID:
        model = fit_ridge(train_ds, TARGET_NAME, lam, features=SURROGATE_FEATURES)
        pred = predict_with_intervals(
            model, val_ds, cal_ds, levels=DEMO_LEVELS,
            slice_name="validation", model_version="grid",
        )
        mae = float(np.mean(np.abs(pred.y_point - pred.y_true)))
        if best_mae is None or mae < best_mae:
            best_lam, best_mae = lam, mae
    current = fit_ridge(train_ds, TARGET_NAME, best_lam, features=SURROGATE_FEATURES)
    previous = fit_ridge(train_ds, TARGET_NAME, 200.0, features=SURROGATE_FEATURES)

    slices = {"baseline": test_ds, **scenario_datasets}
    versions = {"1.0.0": current, "0.9.0": previous}
    version_dates = {"1.0.0": metadata["date"], "0.9.0": "2026-05-01"}

    uq_reports: list[UqReport] = []
    all_predictions: dict[tuple[str, str], PredictionSet] = {}
    for version, model in versions.items():
        reports, predictions = evaluate_version(version, model, slices, cal_ds)
        uq_reports.extend(reports)
        for slice_name, pred in predictions.items():
            all_predictions[(version, slice_name)] = pred

    summaries = {
        version: robustness_from_reports(uq_reports, catalog, version)
        for version in versions
    }
    radar = compare_versions(summaries, version_dates)

    target_std = float(np.std(train_ds.column(TARGET_NAME)))
    thresholds = [
        {"metric": "mae", "threshold": 0.12 * target_std},
        {"metric": "coverage_0.05_0.95", "threshold": 0.85},
    ]

    run_stamp = RunStamp(
        seed=master_seed,
        code_version="demo",
        tool_version=__version__,
        created_at=f"{metadata['date']}T00:00:00Z",
    )

    doc = assemble_card(
        metadata=metadata,
        run_stamp=run_stamp,
        quality_raw=quality_raw,
        quality_preprocessed=quality_pre,
        drift_scan={"window_count": 4, "ks_by_feature": drift_scan},
        odd_model=odd_model,
        odd_coverage=odd_coverage,
        catalog=catalog,
        divergence_reports=divergence_reports,
        overlays=overlays,
        key_features=key_features,
        uq_reports=uq_reports,
        thresholds=thresholds,
        robustness_summaries=summaries,
        radar=radar,
        auto_warnings=DEMO_AUTO_WARNINGS,
        methodology_notes=[
            f"Ridge regularization chosen on the validation slice from the grid "
            f"{list(DEMO_LAMBDA_GRID)} (selected {best_lam}).",
            "Intervals are split-conformal calibrated on the calibration slice.",
        ],
    )
    result = validate_card(doc)

    outputs: dict = {
        "document": doc,
        "validation": result,
        "assignment": assignment,
        "odd_model": odd_model,
        "catalog": catalog,
        "predictions": all_predictions,
        "summaries": summaries,
    }
    if not write_outputs:
        return outputs

    os.makedirs(out_dir, exist_ok=True)
    _write_json(quality_raw.to_dict(), os.path.join(out_dir, "quality_raw.json"))
    _write_json(quality_pre.to_dict(), os.path.join(out_dir, "quality_preprocessed.json"))
    _write_json(
        {"window_count": 4, "ks_by_feature": drift_scan},
        os.path.join(out_dir, "drift_scan.json"),
    )
    _write_json(
        {"config": split_cfg.to_dict(), "assignment": assignment.to_dict()},
        os.path.join(out_dir, "splits.json"),
    )
    _write_json(odd_model.to_dict(), os.path.join(out_dir, "odd.json"))
    _write_json(catalog.to_dict(), os.path.join(out_dir, "catalog.normalized.json"))
    _write_json(
        {
            "reports": [r.to_dict() for r in divergence_reports],
            "overlays": overlays,
            "key_features": key_features,
        },
        os.path.join(out_dir, "divergence.json"),
    )
    _write_json(
        {
            "uq": [r.to_dict() for r in uq_reports],
            "robustness": {
                "summaries": {v: s.to_dict() for v, s in summaries.items()},
                "radar": radar.to_dict(),
            },
            "version_dates": version_dates,
        },
        os.path.join(out_dir, "evaluation.json"),
    )

    scenarios_dir = os.path.join(out_dir, "scenarios")
    os.makedirs(scenarios_dir, exist_ok=True)
    for name, ds in scenario_datasets.items():
        write_csv(ds, os.path.join(scenarios_dir, f"{name}.csv"))
    predictions_dir = os.path.join(out_dir, "predictions")
    os.makedirs(predictions_dir, exist_ok=True)
    for (version, slice_name), pred in all_predictions.items():
        write_predictions_csv(
            pred, os.path.join(predictions_dir, f"{version}__{slice_name}.csv")
        )

    outputs["paths"] = write_card_outputs(doc, out_dir, collapsible=collapsible)
    return outputs
