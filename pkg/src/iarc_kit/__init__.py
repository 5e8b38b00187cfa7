"""iarc-kit: measurement protocol and robustness card for industrial time-series models."""

__version__ = "0.1.0"

from .dataset import (
    QualityReport,
    RunStamp,
    TimeSeriesDataset,
    compute_quality,
    load_csv,
    windowed_drift_scan,
    write_csv,
)
from .splits import SplitAssignment, SplitConfig, chronological_split, group_split, validate_splits
from .odd import OddModel, coverage_fraction, fit_odd, membership
from .scenarios import (
    ScenarioCatalog,
    ScenarioSpec,
    apply_fault,
    build_catalog,
    load_catalog,
    slice_scenario,
)
from .drift import kde_overlay, ks_statistic, scenario_divergence, wasserstein1
from .metrics import (
    PredictionSet,
    UqReport,
    classification_scores,
    conformal_calibrate,
    interval_metrics,
    load_predictions_csv,
    regression_kpis,
    temperature_scale,
    uq_report,
    wis,
    write_predictions_csv,
)
from .robustness import (
    RadarTable,
    RobustnessSummary,
    ScenarioOutcome,
    build_summary,
    compare_versions,
    retention,
)
from .reference import (
    RidgeModel,
    SyntheticProcessConfig,
    fit_ridge,
    generate_surrogate,
    predict_with_intervals,
)
from .card import IarcDocument, assemble_card, parse_json, serialize_json, validate_card
from .report import render_html
from .pipeline import derive_seed, run_demo

__all__ = [
    "__version__",
    "TimeSeriesDataset",
    "QualityReport",
    "RunStamp",
    "load_csv",
    "write_csv",
    "compute_quality",
    "windowed_drift_scan",
    "SplitConfig",
    "SplitAssignment",
    "chronological_split",
    "group_split",
    "validate_splits",
    "OddModel",
    "fit_odd",
    "membership",
    "coverage_fraction",
    "ScenarioSpec",
    "ScenarioCatalog",
    "apply_fault",
    "slice_scenario",
    "build_catalog",
    "load_catalog",
    "ks_statistic",
    "wasserstein1",
    "scenario_divergence",
    "kde_overlay",
    "PredictionSet",
    "UqReport",
    "regression_kpis",
    "interval_metrics",
    "wis",
    "classification_scores",
    "conformal_calibrate",
    "temperature_scale",
    "uq_report",
    "load_predictions_csv",
    "write_predictions_csv",
    "retention",
    "ScenarioOutcome",
    "RobustnessSummary",
    "RadarTable",
    "build_summary",
    "compare_versions",
    "RidgeModel",
    "SyntheticProcessConfig",
    "generate_surrogate",
    "fit_ridge",
    "predict_with_intervals",
    "IarcDocument",
    "assemble_card",
    "serialize_json",
    "parse_json",
    "validate_card",
    "render_html",
    "run_demo",
    "derive_seed",
]
