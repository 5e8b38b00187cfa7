"""Baseline-vs-scenario aggregation: retention, severity curves, comparisons.

Retention is the clamped performance ratio between baseline and scenario
(1.0 means no degradation, 0.0 total loss); the aggregated robustness score
is the unweighted mean retention over the scenario catalog. The exact
formula is printed in the card methodology notes since different published
scores aggregate differently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ComparisonError, ConfigError
from .metrics import HIGHER_BETTER, LOWER_BETTER

RETENTION_EPS = 1e-12


def retention(
    baseline_metric: float, scenario_metric: float, orientation: str
) -> tuple[float, bool]:
    """Clamped performance ratio in [0, 1]; the flag marks a non-finite
    scenario metric (retention forced to 0)."""
    if not math.isfinite(baseline_metric):
        raise ConfigError("baseline metric must be finite")
    if not math.isfinite(scenario_metric):
        return 0.0, True
    if orientation == LOWER_BETTER:
        r = baseline_metric / max(scenario_metric, RETENTION_EPS)
    elif orientation == HIGHER_BETTER:
        r = scenario_metric / max(baseline_metric, RETENTION_EPS)
    else:
        raise ConfigError(f"unknown orientation {orientation!r}")
    return float(min(max(r, 0.0), 1.0)), False


@dataclass(frozen=True)
class ScenarioOutcome:
    """One evaluated scenario: its metric bundle plus grouping attributes."""

    name: str
    metrics: dict[str, float]
    fault: str | None = None          # None for real slices
    severity: float | None = None
    feature_key: str = ""             # sorted target features, comma-joined

    @classmethod
    def from_spec(cls, spec, metrics: dict[str, float]) -> "ScenarioOutcome":
        return cls(
            name=spec.name,
            metrics=metrics,
            fault=spec.fault if spec.kind == "synthetic_fault" else None,
            severity=spec.severity,
            feature_key=",".join(sorted(spec.target_features)),
        )

    def family(self) -> str:
        return self.fault if self.fault is not None else "real_slice"


@dataclass(frozen=True)
class SeverityCurve:
    family: str              # "<fault>[<features>]"
    fault: str
    metric: str
    model_version: str
    points: tuple[tuple[float, float], ...]  # (severity, metric value), increasing

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "fault": self.fault,
            "metric": self.metric,
            "model_version": self.model_version,
            "points": [[s, v] for s, v in self.points],
        }


@dataclass(frozen=True)
class RobustnessSummary:
    model_version: str
    primary_metric: str
    baseline_value: float
    retentions: dict[str, float]
    family_retention: dict[str, float]
    aggregated_robustness: float
    weakest_scenarios: tuple[str, ...]
    curves: tuple[SeverityCurve, ...]
    warnings: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "model_version": self.model_version,
            "primary_metric": self.primary_metric,
            "baseline_value": self.baseline_value,
            "retentions": dict(self.retentions),
            "family_retention": dict(self.family_retention),
            "aggregated_robustness": self.aggregated_robustness,
            "weakest_scenarios": list(self.weakest_scenarios),
            "severity_curves": [c.to_dict() for c in self.curves],
            "warnings": list(self.warnings),
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "RobustnessSummary":
        return cls(
            model_version=payload["model_version"],
            primary_metric=payload["primary_metric"],
            baseline_value=float(payload["baseline_value"]),
            retentions=dict(payload["retentions"]),
            family_retention=dict(payload.get("family_retention", {})),
            aggregated_robustness=float(payload["aggregated_robustness"]),
            weakest_scenarios=tuple(payload.get("weakest_scenarios", ())),
            curves=tuple(
                SeverityCurve(
                    family=c["family"],
                    fault=c["fault"],
                    metric=c["metric"],
                    model_version=c["model_version"],
                    points=tuple((float(s), float(v)) for s, v in c["points"]),
                )
                for c in payload.get("severity_curves", ())
            ),
            warnings=tuple(payload.get("warnings", ())),
        )


def build_summary(
    outcomes: list[ScenarioOutcome],
    baseline: dict[str, float],
    primary_metric: str,
    model_version: str,
    orientation: str | None = None,
) -> RobustnessSummary:
    """Aggregate scenario metric bundles against the baseline bundle.

    Retentions use the declared primary metric; scenarios missing it are
    excluded with a warning. Severity curves group synthetic faults by
    (fault kind, target feature set) and need at least two severities.
    """
    if not outcomes:
        raise ConfigError("build_summary needs at least one scenario outcome")
    if primary_metric not in baseline:
        raise ConfigError(f"baseline bundle lacks the primary metric {primary_metric!r}")
    from .metrics import orientation_for

    orientation = orientation or orientation_for(primary_metric)
    base_value = float(baseline[primary_metric])

    warnings: list[str] = []
    retentions: dict[str, float] = {}
    by_family: dict[str, list[float]] = {}
    for outcome in outcomes:
        if primary_metric not in outcome.metrics:
            warnings.append(
                f"scenario {outcome.name!r} lacks {primary_metric!r}; excluded"
            )
            continue
        r, flagged = retention(base_value, outcome.metrics[primary_metric], orientation)
        if flagged:
            warnings.append(
                f"scenario {outcome.name!r} produced a non-finite metric; retention 0"
            )
        retentions[outcome.name] = r
        by_family.setdefault(outcome.family(), []).append(r)

    if not retentions:
        raise ConfigError("no scenario carried the primary metric")

    curves: list[SeverityCurve] = []
    groups: dict[tuple[str, str], list[ScenarioOutcome]] = {}
    for outcome in outcomes:
        if outcome.fault is None or outcome.severity is None:
            continue
        if primary_metric not in outcome.metrics:
            continue
        groups.setdefault((outcome.fault, outcome.feature_key), []).append(outcome)
    for (fault, feature_key), members in sorted(groups.items()):
        points = sorted((m.severity, m.metrics[primary_metric]) for m in members)
        severities = [s for s, _ in points]
        if len(points) < 2 or any(
            b - a <= 0 for a, b in zip(severities, severities[1:])
        ):
            continue
        curves.append(
            SeverityCurve(
                family=f"{fault}[{feature_key}]",
                fault=fault,
                metric=primary_metric,
                model_version=model_version,
                points=tuple((float(s), float(v)) for s, v in points),
            )
        )

    return RobustnessSummary(
        model_version=model_version,
        primary_metric=primary_metric,
        baseline_value=base_value,
        retentions=retentions,
        family_retention={
            fam: float(np.mean(vals)) for fam, vals in sorted(by_family.items())
        },
        aggregated_robustness=float(np.mean(list(retentions.values()))),
        weakest_scenarios=tuple(
            sorted(retentions, key=lambda name: (retentions[name], name))
        ),
        curves=tuple(curves),
        warnings=tuple(warnings),
    )


@dataclass(frozen=True)
class RadarTable:
    """Scenario x version retention matrix for the radar plot and table."""

    scenarios: tuple[str, ...]
    versions: tuple[str, ...]
    matrix: tuple[tuple[float, ...], ...]  # rows = scenarios, columns = versions

    def to_dict(self) -> dict:
        return {
            "scenarios": list(self.scenarios),
            "versions": list(self.versions),
            "matrix": [list(row) for row in self.matrix],
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "RadarTable":
        return cls(
            scenarios=tuple(payload["scenarios"]),
            versions=tuple(payload["versions"]),
            matrix=tuple(tuple(float(v) for v in row) for row in payload["matrix"]),
        )


def compare_versions(
    summaries: dict[str, RobustnessSummary],
    version_dates: dict[str, str] | None = None,
) -> RadarTable:
    """Retention matrix over the scenarios common to every model version.

    Versions are ordered by their declared date when given (ties and
    missing dates fall back to the version string).
    """
    if not summaries:
        raise ComparisonError("no model versions to compare")
    common: set[str] | None = None
    for summary in summaries.values():
        names = set(summary.retentions)
        common = names if common is None else (common & names)
    if not common:
        raise ComparisonError("model versions share no scenarios")
    dates = version_dates or {}
    versions = tuple(sorted(summaries, key=lambda v: (dates.get(v, ""), v)))
    scenarios = tuple(sorted(common))
    matrix = tuple(
        tuple(float(summaries[v].retentions[s]) for v in versions) for s in scenarios
    )
    return RadarTable(scenarios=scenarios, versions=versions, matrix=matrix)
