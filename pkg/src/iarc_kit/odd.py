"""Operational design domain: admissible ranges plus per-feature density edges.

A row is inside the ODD only when every feature lies within its admissible
range AND its kernel density is no lower than the density seen at the
``q_odd`` quantile of the training data itself. Range and density checks are
combined conjunctively: the stricter reading keeps out both hard range
violations and in-range density valleys.
"""

from __future__ import annotations

import warnings as _warnings
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .dataset import TimeSeriesDataset
from .density import GaussianKde1d
from .errors import ConfigError
from .errors import EmptyDatasetError

DEFAULT_Q_ODD = 0.01
MAX_RETAINED_SAMPLE = 5000


@dataclass(frozen=True)
class FeatureOdd:
    """Admissible range and density edge for a single feature."""

    range_lo: float
    range_hi: float
    kde: GaussianKde1d
    log_density_threshold: float

    def to_dict(self) -> dict:
        return {
            "range": [self.range_lo, self.range_hi],
            "bandwidth": self.kde.bandwidth,
            "log_density_threshold": self.log_density_threshold,
            "training_sample": [float(v) for v in self.kde.sample],
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "FeatureOdd":
        return cls(
            range_lo=float(payload["range"][0]),
            range_hi=float(payload["range"][1]),
            kde=GaussianKde1d.fit(payload["training_sample"], payload["bandwidth"]),
            log_density_threshold=float(payload["log_density_threshold"]),
        )


@dataclass(frozen=True)
class OddModel:
    features: dict[str, FeatureOdd]
    q_odd: float
    fitted_on: str
    subsample_seed: int
    excluded_features: tuple[str, ...] = ()
    manual_ranges: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "q_odd": self.q_odd,
            "fitted_on": self.fitted_on,
            "subsample_seed": self.subsample_seed,
            "excluded_features": list(self.excluded_features),
            "manual_ranges": list(self.manual_ranges),
            "features": {name: f.to_dict() for name, f in self.features.items()},
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "OddModel":
        return cls(
            features={
                name: FeatureOdd.from_dict(f) for name, f in payload["features"].items()
            },
            q_odd=float(payload["q_odd"]),
            fitted_on=str(payload["fitted_on"]),
            subsample_seed=int(payload["subsample_seed"]),
            excluded_features=tuple(payload.get("excluded_features", ())),
            manual_ranges=tuple(payload.get("manual_ranges", ())),
        )


def fit_odd(
    train: TimeSeriesDataset,
    q_odd: float = DEFAULT_Q_ODD,
    manual_ranges: Mapping[str, tuple[float, float]] | None = None,
    max_sample: int = MAX_RETAINED_SAMPLE,
    subsample_seed: int = 0,
) -> OddModel:
    """Fit per-feature ranges and KDE density thresholds on training data.

    Ranges default to the observed [min, max] and may be overridden per
    feature via ``manual_ranges``. The density threshold is the ``q_odd``
    quantile of the training points' own log-densities, so close to a
    ``1 - q_odd`` fraction of training rows stays inside per feature.
    Entirely-missing features are excluded with a recorded warning.
    """
    if train.n_rows == 0:
        raise EmptyDatasetError("cannot fit an ODD on an empty dataset")
    if not 0.0 < q_odd < 1.0:
        raise ConfigError("q_odd must lie strictly between 0 and 1")
    manual_ranges = dict(manual_ranges or {})
    for feat in manual_ranges:
        if feat not in train.feature_names:
            raise ConfigError(f"manual range for unknown feature {feat!r}")

    rng = np.random.default_rng(subsample_seed)
    features: dict[str, FeatureOdd] = {}
    excluded: list[str] = []
    for j, feat in enumerate(train.feature_names):
        col = train.values[:, j]
        present = col[~np.isnan(col)]
        if len(present) == 0:
            excluded.append(feat)
            continue
        if len(present) > max_sample:
            keep = rng.choice(len(present), size=max_sample, replace=False)
            retained = np.sort(present[keep])
        else:
            retained = np.sort(present)
        kde = GaussianKde1d.fit(retained)
        log_dens = kde.log_density(retained)
        threshold = float(np.quantile(log_dens, q_odd))
        if feat in manual_ranges:
            lo, hi = manual_ranges[feat]
        else:
            lo, hi = float(np.min(present)), float(np.max(present))
        features[feat] = FeatureOdd(
            range_lo=float(lo),
            range_hi=float(hi),
            kde=kde,
            log_density_threshold=threshold,
        )
    return OddModel(
        features=features,
        q_odd=q_odd,
        fitted_on=train.dataset_version,
        subsample_seed=subsample_seed,
        excluded_features=tuple(excluded),
        manual_ranges=tuple(sorted(manual_ranges)),
    )


@dataclass(frozen=True)
class MembershipResult:
    inside: bool
    violations: list[tuple[str, str]] = field(default_factory=list)  # (feature, kind)


def membership(model: OddModel, row: Mapping[str, float | None]) -> MembershipResult:
    """Classify one feature vector; kinds are 'range', 'density' or 'missing'."""
    violations: list[tuple[str, str]] = []
    for feat, spec in model.features.items():
        value = row.get(feat)
        if value is None or (isinstance(value, float) and np.isnan(value)):
            violations.append((feat, "missing"))
            continue
        value = float(value)
        if not spec.range_lo <= value <= spec.range_hi:
            violations.append((feat, "range"))
            continue
        if float(spec.kde.log_density(value)[0]) < spec.log_density_threshold:
            violations.append((feat, "density"))
    return MembershipResult(inside=not violations, violations=violations)


def membership_mask(model: OddModel, ds: TimeSeriesDataset) -> np.ndarray:
    """Vectorized row classifier over the shared features of ``ds``.

    Returns a boolean mask of in-ODD rows. Rows with a missing value on a
    shared ODD feature are outside. Only features present in both the model
    and the dataset are checked; an empty overlap yields an all-False mask
    with a runtime warning.
    """
    shared = [f for f in model.features if f in ds.feature_names]
    if not shared:
        _warnings.warn(
            "dataset shares no features with the ODD model; coverage is 0",
            stacklevel=2,
        )
        return np.zeros(ds.n_rows, dtype=bool)
    mask = np.ones(ds.n_rows, dtype=bool)
    for feat in shared:
        spec = model.features[feat]
        col = ds.column(feat)
        ok = ~np.isnan(col)
        ok &= (col >= spec.range_lo) & (col <= spec.range_hi)
        candidate = np.where(ok)[0]
        if len(candidate):
            log_dens = spec.kde.log_density(col[candidate])
            ok[candidate] = log_dens >= spec.log_density_threshold
        mask &= ok
    return mask


def coverage_fraction(model: OddModel, ds: TimeSeriesDataset) -> float:
    """Fraction of dataset rows classified inside the ODD."""
    return float(np.mean(membership_mask(model, ds)))
