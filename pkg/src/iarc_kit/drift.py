"""Distributional deviation between training data and each scenario.

Per feature we report the two-sample Kolmogorov-Smirnov statistic and the
1-Wasserstein (earth mover's) distance, plus a unit-free Wasserstein
normalized by the training standard deviation. KS p-values are deliberately
not reported: at industrial autocorrelated sample sizes they mislead, so the
statistic itself is the monitoring quantity and thresholds live in config.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from .dataset import TimeSeriesDataset
from .density import GaussianKde1d
from .errors import ConfigError, UndefinedStatisticError


def _clean_pair(a, b) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    a = a[~np.isnan(a)]
    b = b[~np.isnan(b)]
    if len(a) == 0 or len(b) == 0:
        raise UndefinedStatisticError("empty sample after dropping missing values")
    return a, b


def ks_statistic(a, b) -> float:
    """sup_x |ECDF_a(x) - ECDF_b(x)| over the pooled sample points.

    Only the statistic is computed; no p-value (see module docstring).
    """
    a, b = _clean_pair(a, b)
    a = np.sort(a)
    b = np.sort(b)
    pooled = np.concatenate([a, b])
    cdf_a = np.searchsorted(a, pooled, side="right") / len(a)
    cdf_b = np.searchsorted(b, pooled, side="right") / len(b)
    return float(np.max(np.abs(cdf_a - cdf_b)))


def wasserstein1(a, b) -> float:
    """First Wasserstein distance, the exact integral of |ECDF_a - ECDF_b|."""
    a, b = _clean_pair(a, b)
    return float(stats.wasserstein_distance(a, b))


@dataclass(frozen=True)
class FeatureDivergence:
    ks_statistic: float
    wasserstein1: float
    normalized_wasserstein: float

    def to_dict(self) -> dict:
        return {
            "ks_statistic": self.ks_statistic,
            "wasserstein1": self.wasserstein1,
            "normalized_wasserstein": self.normalized_wasserstein,
        }


@dataclass(frozen=True)
class DivergenceReport:
    scenario: str
    per_feature: dict[str, FeatureDivergence]
    ranking: tuple[str, ...]
    score: float  # mean normalized Wasserstein over evaluated features
    warnings: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "per_feature": {f: d.to_dict() for f, d in self.per_feature.items()},
            "ranking": list(self.ranking),
            "score": self.score,
            "warnings": list(self.warnings),
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "DivergenceReport":
        return cls(
            scenario=payload["scenario"],
            per_feature={
                f: FeatureDivergence(**d) for f, d in payload["per_feature"].items()
            },
            ranking=tuple(payload["ranking"]),
            score=float(payload["score"]),
            warnings=tuple(payload.get("warnings", ())),
        )


def scenario_divergence(
    train: TimeSeriesDataset,
    scenario_ds: TimeSeriesDataset,
    scenario_name: str | None = None,
) -> DivergenceReport:
    """Per-feature KS and Wasserstein statistics of a scenario against training.

    Features are ranked by normalized Wasserstein descending, ties broken by
    feature name. Features absent from the scenario (or with no usable
    values on either side) are skipped and recorded as warnings.
    """
    shared = [f for f in train.feature_names if f in scenario_ds.feature_names]
    if not shared:
        raise ConfigError("train and scenario datasets share no features")
    warnings = [
        f"feature {f!r} missing from scenario; skipped"
        for f in train.feature_names
        if f not in scenario_ds.feature_names
    ]
    per_feature: dict[str, FeatureDivergence] = {}
    for feat in shared:
        ref = train.column(feat)
        cur = scenario_ds.column(feat)
        try:
            ks = ks_statistic(ref, cur)
            w1 = wasserstein1(ref, cur)
        except UndefinedStatisticError:
            warnings.append(f"feature {feat!r} has no usable values; skipped")
            continue
        ref_clean = ref[~np.isnan(ref)]
        sigma = float(np.std(ref_clean))
        per_feature[feat] = FeatureDivergence(
            ks_statistic=ks,
            wasserstein1=w1,
            normalized_wasserstein=w1 / max(sigma, 1e-12),
        )
    ranking = tuple(
        sorted(per_feature, key=lambda f: (-per_feature[f].normalized_wasserstein, f))
    )
    score = (
        float(np.mean([d.normalized_wasserstein for d in per_feature.values()]))
        if per_feature
        else 0.0
    )
    return DivergenceReport(
        scenario=scenario_name or scenario_ds.name,
        per_feature=per_feature,
        ranking=ranking,
        score=score,
        warnings=tuple(warnings),
    )


@dataclass(frozen=True)
class KdeOverlay:
    """Two densities on a common grid, ready for plotting and serialization."""

    grid: np.ndarray
    base_density: np.ndarray
    scenario_density: np.ndarray

    def to_dict(self) -> dict:
        return {
            "grid": [float(x) for x in self.grid],
            "base_density": [float(x) for x in self.base_density],
            "scenario_density": [float(x) for x in self.scenario_density],
        }


def kde_overlay(base_sample, scenario_sample, grid_points: int = 256) -> KdeOverlay:
    """Evaluate both KDEs on one uniform grid spanning the union range
    plus three bandwidths on each side."""
    a, b = _clean_pair(base_sample, scenario_sample)
    kde_a = GaussianKde1d.fit(a)
    kde_b = GaussianKde1d.fit(b)
    pad = 3.0 * max(kde_a.bandwidth, kde_b.bandwidth)
    lo = min(float(np.min(a)), float(np.min(b))) - pad
    hi = max(float(np.max(a)), float(np.max(b))) + pad
    grid = np.linspace(lo, hi, grid_points)
    return KdeOverlay(
        grid=grid,
        base_density=kde_a.density(grid),
        scenario_density=kde_b.density(grid),
    )
