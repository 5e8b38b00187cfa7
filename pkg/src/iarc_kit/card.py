"""Card document: assembly, canonical JSON serialization, and validation.

The card has five sections (general information, intended use, data,
evaluation, limitations). Assembly is deterministic: the same inputs
produce byte-identical canonical JSON. Validation combines a shipped
JSON-Schema with consistency checks the schema cannot express (threshold
results recomputed from their values, robustness aggregation, warnings
propagated into the limitations section).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources
from typing import Any

import numpy as np

from .dataset import QualityReport, RunStamp
from .drift import DivergenceReport
from .errors import SpecValidationError
from .metrics import HIGHER_BETTER, LOWER_BETTER, UqReport, orientation_for
from .odd import OddModel
from .robustness import RadarTable, RobustnessSummary
from .scenarios import ScenarioCatalog

SCHEMA_VERSION = "1.0"

REGULATION_REFERENCES = {
    "general_information": "EU AI Act Art. 11, 13 (3), Annex IV",
    "intended_use": "EU AI Act Art. 13",
    "data": "EU AI Act Art. 10 (2/3/4), 11, Annex IV (2.a)",
    "evaluation": "EU AI Act Art. 9 (6-8), 13 (3.b), 15 (1-4)",
    "limitations": "EU AI Act Art. 13 (b), Annex IX",
}

_GENERAL_FIELDS = (
    "model_name",
    "model_version",
    "dataset_name",
    "dataset_version",
    "date",
    "provider",
    "deployment_context",
)


def jsonsafe(obj: Any) -> Any:
    """Convert numpy containers/scalars to plain JSON values; non-finite
    numbers become null."""
    if isinstance(obj, dict):
        return {str(k): jsonsafe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonsafe(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [jsonsafe(v) for v in obj.tolist()]
    if isinstance(obj, (np.integer, int)) and not isinstance(obj, bool):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        value = float(obj)
        return value if math.isfinite(value) else None
    return obj


@dataclass(frozen=True)
class IarcDocument:
    """The complete card; every field is a plain JSON-compatible value."""

    schema_version: str
    general_information: dict
    intended_use: dict
    data: dict
    evaluation: dict
    limitations: list
    regulation_references: dict = field(
        default_factory=lambda: dict(REGULATION_REFERENCES)
    )

    def to_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "general_information": self.general_information,
            "intended_use": self.intended_use,
            "data": self.data,
            "evaluation": self.evaluation,
            "limitations": self.limitations,
            "regulation_references": self.regulation_references,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "IarcDocument":
        try:
            return cls(
                schema_version=payload["schema_version"],
                general_information=payload["general_information"],
                intended_use=payload["intended_use"],
                data=payload["data"],
                evaluation=payload["evaluation"],
                limitations=payload["limitations"],
                regulation_references=payload.get(
                    "regulation_references", dict(REGULATION_REFERENCES)
                ),
            )
        except KeyError as exc:
            raise SpecValidationError(f"card JSON misses section {exc}") from None


def _require(metadata: dict, key: str, pointer: str) -> str:
    value = metadata.get(key)
    if value is None or (isinstance(value, str) and not value.strip()):
        raise SpecValidationError(f"missing mandatory metadata field at {pointer}")
    return value


def evaluate_threshold(metric: str, value: float, threshold: float, orientation: str) -> bool:
    if orientation == LOWER_BETTER:
        return bool(value <= threshold)
    if orientation == HIGHER_BETTER:
        return bool(value >= threshold)
    raise SpecValidationError(f"unknown orientation {orientation!r} for {metric!r}")


def assemble_card(
    metadata: dict,
    run_stamp: RunStamp,
    quality_raw: QualityReport,
    uq_reports: list[UqReport],
    quality_preprocessed: QualityReport | None = None,
    drift_scan: dict | None = None,
    odd_model: OddModel | None = None,
    odd_coverage: dict[str, float] | None = None,
    catalog: ScenarioCatalog | None = None,
    divergence_reports: list[DivergenceReport] = (),
    overlays: list[dict] = (),
    key_features: list[str] = (),
    thresholds: list[dict] = (),
    robustness_summaries: dict[str, RobustnessSummary] | None = None,
    radar: RadarTable | None = None,
    auto_warnings: list[str] = (),
    methodology_notes: list[str] = (),
) -> IarcDocument:
    """Assemble the five card sections from module outputs and user metadata.

    Mandatory inputs are the general-information metadata and at least one
    evaluated slice. Warnings collected along the pipeline (excluded ODD
    features, skipped metrics, surrogate usage) are funneled into the
    limitations section.
    """
    for key in _GENERAL_FIELDS:
        if key == "dataset_version":
            continue
        _require(metadata, key, f"/general_information/{key}")
    if not uq_reports:
        raise SpecValidationError("card assembly needs at least one evaluated slice")
    stamp_problems = run_stamp.validate()
    if stamp_problems:
        raise SpecValidationError("; ".join(stamp_problems))

    dataset_version = metadata.get("dataset_version") or (
        quality_preprocessed.dataset_version
        if quality_preprocessed is not None
        else quality_raw.dataset_version
    )

    general = {
        "model_name": metadata["model_name"],
        "model_version": metadata["model_version"],
        "dataset_name": metadata["dataset_name"],
        "dataset_version": dataset_version,
        "date": metadata["date"],
        "provider": metadata["provider"],
        "deployment_context": metadata["deployment_context"],
        "run_stamp": run_stamp.to_dict(),
    }

    intended = metadata.get("intended_use") or {}
    description = intended.get("description", "")
    if not description.strip():
        raise SpecValidationError(
            "missing mandatory metadata field at /intended_use/description"
        )
    intended_use = {
        "description": description,
        "out_of_scope_uses": list(intended.get("out_of_scope_uses", [])),
    }

    warnings: list[str] = []
    if odd_model is not None:
        for feat in odd_model.excluded_features:
            warnings.append(
                f"ODD excludes entirely-missing feature {feat!r}; "
                "its operating range is undocumented"
            )
    for report in divergence_reports:
        warnings.extend(f"[{report.scenario}] {w}" for w in report.warnings)
    for summary in (robustness_summaries or {}).values():
        warnings.extend(f"[{summary.model_version}] {w}" for w in summary.warnings)
    warnings.extend(auto_warnings)

    data_meta = metadata.get("data") or {}
    quality_block: dict = {"raw": quality_raw.to_dict()}
    if quality_preprocessed is not None:
        quality_block["preprocessed"] = quality_preprocessed.to_dict()
    odd_block = None
    if odd_model is not None:
        odd_block = {
            "q_odd": odd_model.q_odd,
            "fitted_on": odd_model.fitted_on,
            "subsample_seed": odd_model.subsample_seed,
            "excluded_features": list(odd_model.excluded_features),
            "manual_ranges": list(odd_model.manual_ranges),
            "features": {
                name: {
                    "range": [f.range_lo, f.range_hi],
                    "bandwidth": f.kde.bandwidth,
                    "log_density_threshold": f.log_density_threshold,
                }
                for name, f in odd_model.features.items()
            },
            "coverage_fractions": dict(odd_coverage or {}),
        }
    data_section = {
        "overview": data_meta.get("overview", ""),
        "provenance": data_meta.get("provenance", ""),
        "preprocessing_notes": data_meta.get("preprocessing_notes", ""),
        "quality": quality_block,
        "odd": odd_block,
        "scenario_catalog": catalog.to_dict() if catalog is not None else None,
        "distributional_diagnostics": {
            "reports": [r.to_dict() for r in divergence_reports],
            "overlays": list(overlays),
            "key_features": list(key_features),
        },
    }
    if drift_scan is not None:
        data_section["windowed_drift_scan"] = drift_scan

    baseline_metrics: dict[str, float] = {}
    current_version = metadata["model_version"]
    for report in uq_reports:
        if report.slice_name == "baseline" and report.model_version == current_version:
            baseline_metrics = report.metrics
            break

    kpis = []
    for entry in thresholds:
        metric = entry["metric"]
        orientation = entry.get("orientation") or orientation_for(metric)
        if metric not in baseline_metrics:
            warnings.append(
                f"acceptance threshold for {metric!r} skipped: "
                "metric absent from the baseline slice"
            )
            continue
        value = float(baseline_metrics[metric])
        threshold = float(entry["threshold"])
        kpis.append(
            {
                "metric": metric,
                "value": value,
                "threshold": threshold,
                "orientation": orientation,
                "passed": evaluate_threshold(metric, value, threshold, orientation),
                "slice_name": "baseline",
                "model_version": current_version,
            }
        )

    robustness_block = None
    if robustness_summaries:
        robustness_block = {
            "summaries": {
                version: summary.to_dict()
                for version, summary in sorted(robustness_summaries.items())
            },
            "radar": radar.to_dict() if radar is not None else None,
        }

    notes = list(methodology_notes) + [
        "Retention = clamp(baseline/scenario, 0, 1) for lower-better metrics "
        "(scenario/baseline for higher-better); aggregated robustness is the "
        "unweighted mean retention over the scenario catalog.",
        "Log-loss probabilities are floored at 1e-12.",
        "Quantile rows are sorted after conformal adjustment so intervals never cross.",
    ]
    evaluation_section = {
        "kpis": kpis,
        "uq": [r.to_dict() for r in uq_reports],
        "robustness": robustness_block,
        "methodology_notes": notes,
    }

    seen = set()
    limitations: list[str] = []
    for item in list(metadata.get("limitations", [])) + warnings:
        if item not in seen:
            limitations.append(item)
            seen.add(item)

    return IarcDocument(
        schema_version=SCHEMA_VERSION,
        general_information=jsonsafe(general),
        intended_use=jsonsafe(intended_use),
        data=jsonsafe(data_section),
        evaluation=jsonsafe(evaluation_section),
        limitations=jsonsafe(limitations),
    )


def serialize_json(doc: IarcDocument) -> str:
    """Canonical JSON: sorted keys, two-space indent, shortest round-trip
    numbers, UTF-8 text, trailing newline."""
    return (
        json.dumps(
            doc.to_dict(),
            sort_keys=True,
            indent=2,
            ensure_ascii=False,
            allow_nan=False,
        )
        + "\n"
    )


def parse_json(text: str) -> IarcDocument:
    return IarcDocument.from_dict(json.loads(text))


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CardValidationResult:
    ok: bool
    violations: list[str] = field(default_factory=list)


def _load_schema() -> dict:
    with resources.files("iarc_kit.schema").joinpath("iarc_card.schema.json").open(
        "r", encoding="utf-8"
    ) as fh:
        return json.load(fh)


def validate_card(doc: "IarcDocument | dict | str") -> CardValidationResult:
    """Check JSON-Schema conformance plus the cross-field invariants."""
    import jsonschema

    if isinstance(doc, str):
        try:
            payload = json.loads(doc)
        except json.JSONDecodeError as exc:
            return CardValidationResult(False, [f"invalid JSON: {exc}"])
    elif isinstance(doc, IarcDocument):
        payload = doc.to_dict()
    else:
        payload = doc

    violations: list[str] = []
    validator = jsonschema.Draft202012Validator(_load_schema())
    for error in sorted(validator.iter_errors(payload), key=lambda e: list(e.absolute_path)):
        path = "/" + "/".join(str(p) for p in error.absolute_path)
        violations.append(f"schema: {path}: {error.message}")
    if violations:
        return CardValidationResult(False, violations)

    limitations = payload.get("limitations", [])

    for i, entry in enumerate(payload["evaluation"].get("kpis", [])):
        expected = evaluate_threshold(
            entry["metric"], entry["value"], entry["threshold"], entry["orientation"]
        )
        if bool(entry["passed"]) != expected:
            violations.append(
                f"/evaluation/kpis/{i}: recorded result {entry['passed']} is "
                f"inconsistent with value {entry['value']} vs threshold "
                f"{entry['threshold']} ({entry['orientation']})"
            )

    for i, entry in enumerate(payload["evaluation"].get("uq", [])):
        metrics = entry.get("metrics", {})
        orientations = entry.get("orientations", {})
        missing = set(metrics) - set(orientations)
        if missing:
            violations.append(
                f"/evaluation/uq/{i}: metrics without declared orientation: "
                f"{sorted(missing)}"
            )

    robustness = payload["evaluation"].get("robustness")
    if robustness:
        for version, summary in robustness.get("summaries", {}).items():
            retentions = summary.get("retentions", {})
            if retentions:
                mean_r = sum(retentions.values()) / len(retentions)
                if abs(summary.get("aggregated_robustness", 0.0) - mean_r) > 1e-9:
                    violations.append(
                        f"/evaluation/robustness/summaries/{version}: "
                        "aggregated_robustness is not the mean scenario retention"
                    )
            weakest = summary.get("weakest_scenarios", [])
            expected_order = sorted(retentions, key=lambda n: (retentions[n], n))
            if list(weakest) != expected_order:
                violations.append(
                    f"/evaluation/robustness/summaries/{version}: "
                    "weakest_scenarios not ordered by ascending retention"
                )
        radar = robustness.get("radar")
        if radar:
            n_rows = len(radar.get("scenarios", []))
            n_cols = len(radar.get("versions", []))
            matrix = radar.get("matrix", [])
            if len(matrix) != n_rows or any(len(row) != n_cols for row in matrix):
                violations.append("/evaluation/robustness/radar: matrix shape mismatch")

    odd = payload["data"].get("odd")
    if odd:
        for feat in odd.get("excluded_features", []):
            if not any(repr(feat) in line or feat in line for line in limitations):
                violations.append(
                    f"/limitations: excluded ODD feature {feat!r} not mentioned"
                )

    return CardValidationResult(ok=not violations, violations=violations)
