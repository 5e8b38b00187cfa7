"""Built-in ridge soft sensor and a synthetic fed-batch process surrogate.

The surrogate stands in for an industrial fermentation dataset so the whole
pipeline runs end to end without external data: feed rate is piecewise
constant per batch, the control channels mean-revert around per-batch
setpoints, and the product concentration follows a saturating response to
cumulative feed modulated by a smooth temperature sensitivity bump. All
constants are tool defaults chosen for a well-behaved desk-scale demo.

The ridge model is deliberately the simplest auditable choice: the
measurement protocol is model-agnostic, and a closed-form fit keeps every
downstream number reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .dataset import TimeSeriesDataset
from .errors import (
    ConfigError,
    InsufficientCalibrationError,
    SingularSystemError,
    SpecValidationError,
)
from .metrics import PredictionSet, conformal_calibrate, symmetric_level_pairs

SURROGATE_FEATURES = ("feed_rate", "temperature", "pH", "dissolved_oxygen")
TARGET_NAME = "penicillin"

# Process response constants (tool defaults, not measured values).
PMAX = 25.0               # plateau concentration
FEED_YIELD = 1.2          # saturation rate per unit cumulative feed
TEMP_OPT = 305.0          # optimum of the sensitivity bump
TEMP_WIDTH = 12.0         # bump width; operating range sits on the rising flank
TEMP_BASE = 298.0
TEMP_SETPOINT_STD = 0.5   # batch-to-batch setpoint spread
TEMP_OU_THETA = 0.10
TEMP_OU_STD = 0.70
PH_BASE = 6.5
PH_SETPOINT_STD = 0.08
PH_OU_THETA = 0.15
PH_OU_STD = 0.04
DO_BASE = 30.0
DO_SETPOINT_STD = 1.5
DO_OU_THETA = 0.15
DO_OU_STD = 0.9
FEED_LO, FEED_HI = 0.5, 2.5


@dataclass(frozen=True)
class SyntheticProcessConfig:
    batch_count: int
    steps_per_batch: int
    noise_std: float = 0.4
    seed: int = 0

    def __post_init__(self):
        if self.batch_count < 1:
            raise ConfigError("batch_count must be >= 1")
        if self.steps_per_batch < 10:
            raise ConfigError("steps_per_batch must be >= 10")
        if self.noise_std < 0:
            raise ConfigError("noise_std must be >= 0")


def target_response(cumulative_feed, temperature) -> np.ndarray:
    """Deterministic product concentration before measurement noise."""
    cumulative_feed = np.asarray(cumulative_feed, dtype=np.float64)
    temperature = np.asarray(temperature, dtype=np.float64)
    saturation = 1.0 - np.exp(-FEED_YIELD * cumulative_feed)
    sensitivity = np.exp(-(((temperature - TEMP_OPT) / TEMP_WIDTH) ** 2))
    return PMAX * saturation * sensitivity


def generate_surrogate(cfg: SyntheticProcessConfig) -> TimeSeriesDataset:
    """Deterministic synthetic fed-batch dataset with a target column.

    Batch i occupies timestamps [i * steps, (i + 1) * steps), so the global
    row order is simultaneously chronological and batch-contiguous.
    """
    rng = np.random.default_rng(np.random.SeedSequence([int(cfg.seed)]))
    n_b, steps = cfg.batch_count, cfg.steps_per_batch

    temp_setpoints = TEMP_BASE + rng.normal(0.0, TEMP_SETPOINT_STD, size=n_b)
    ph_setpoints = PH_BASE + rng.normal(0.0, PH_SETPOINT_STD, size=n_b)
    do_setpoints = DO_BASE + rng.normal(0.0, DO_SETPOINT_STD, size=n_b)

    feed = np.empty((n_b, steps))
    for i in range(n_b):
        n_regimes = int(rng.integers(2, 5))
        cuts = np.sort(rng.choice(np.arange(1, steps), size=n_regimes - 1, replace=False))
        levels = rng.uniform(FEED_LO, FEED_HI, size=n_regimes)
        bounds = np.concatenate(([0], cuts, [steps]))
        for r in range(n_regimes):
            feed[i, bounds[r]:bounds[r + 1]] = levels[r]

    def mean_reverting(setpoints, theta, sigma):
        x = np.empty((n_b, steps))
        x[:, 0] = setpoints + rng.normal(0.0, sigma, size=n_b)
        for t in range(1, steps):
            x[:, t] = (
                x[:, t - 1]
                + theta * (setpoints - x[:, t - 1])
                + rng.normal(0.0, sigma, size=n_b)
            )
        return x

    temperature = mean_reverting(temp_setpoints, TEMP_OU_THETA, TEMP_OU_STD)
    ph = mean_reverting(ph_setpoints, PH_OU_THETA, PH_OU_STD)
    do = mean_reverting(do_setpoints, DO_OU_THETA, DO_OU_STD)

    cumulative_feed = np.cumsum(feed, axis=1)
    target = target_response(cumulative_feed, temperature)
    if cfg.noise_std > 0:
        target = target + rng.normal(0.0, cfg.noise_std, size=(n_b, steps))
    target = np.clip(target, 0.0, None)

    timestamps = np.concatenate([i * steps + np.arange(steps, dtype=float) for i in range(n_b)])
    batch_ids = [f"B{i:03d}" for i in range(n_b) for _ in range(steps)]
    values = np.column_stack(
        [feed.ravel(), temperature.ravel(), ph.ravel(), do.ravel(), target.ravel()]
    )
    return TimeSeriesDataset.from_arrays(
        name=f"surrogate-fedbatch-seed{cfg.seed}",
        feature_names=list(SURROGATE_FEATURES) + [TARGET_NAME],
        timestamps=timestamps,
        values=values,
        batch_ids=batch_ids,
        provenance={
            "generator": "synthetic fed-batch surrogate",
            "batch_count": n_b,
            "steps_per_batch": steps,
            "noise_std": cfg.noise_std,
            "seed": int(cfg.seed),
        },
        sort=False,
    )


# ---------------------------------------------------------------------------
# Ridge regression
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RidgeModel:
    feature_names: tuple[str, ...]
    weights: np.ndarray
    intercept: float
    lam: float
    means: np.ndarray          # standardization means (post-imputation)
    stds: np.ndarray           # standardization stds, floored above 0
    fallback_means: np.ndarray  # per-feature imputation fallback
    trained_on: str
    target_name: str

    def to_dict(self) -> dict:
        return {
            "feature_names": list(self.feature_names),
            "weights": [float(w) for w in self.weights],
            "intercept": self.intercept,
            "lambda": self.lam,
            "standardization_means": [float(v) for v in self.means],
            "standardization_stds": [float(v) for v in self.stds],
            "fallback_means": [float(v) for v in self.fallback_means],
            "trained_on": self.trained_on,
            "target_name": self.target_name,
        }

    def predict_matrix(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        z = (x - self.means) / self.stds
        return z @ self.weights + self.intercept


def ridge_solve(
    x: np.ndarray, y: np.ndarray, lam: float
) -> tuple[np.ndarray, float, np.ndarray, np.ndarray]:
    """Solve standardized ridge normal equations with a dense direct method.

    Returns (weights, intercept, means, stds). The intercept is left
    unpenalized by centering the target. At lam = 0 a consistent singular
    system falls back to the minimum-norm solution; an underdetermined fit
    (fewer rows than features) is refused outright.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n, p = x.shape
    if lam < 0:
        raise ConfigError("regularization strength must be >= 0")
    if lam == 0 and n < p:
        raise SingularSystemError(
            f"{n} rows cannot determine {p} features at lambda=0; use lambda > 0"
        )
    means = x.mean(axis=0)
    stds = x.std(axis=0)
    stds = np.where(stds > 1e-12, stds, 1.0)
    z = (x - means) / stds
    y_mean = float(y.mean())
    yc = y - y_mean

    gram = z.T @ z + lam * np.eye(p)
    rhs = z.T @ yc
    if lam > 0:
        try:
            weights = np.linalg.solve(gram, rhs)
        except np.linalg.LinAlgError:
            raise SingularSystemError("ridge system is singular; increase lambda") from None
    else:
        weights, *_ = np.linalg.lstsq(gram, rhs, rcond=None)
    return weights, y_mean, means, stds


def impute_locf(
    ds: TimeSeriesDataset,
    features: tuple[str, ...],
    fallback: np.ndarray,
) -> tuple[np.ndarray, int]:
    """Last-observation-carried-forward within each batch; leading missing
    cells take the per-feature fallback. Returns (matrix, imputed count)."""
    cols = [ds.feature_index(f) for f in features]
    x = np.array(ds.values[:, cols], dtype=np.float64)
    imputed = int(np.isnan(x).sum())
    if imputed == 0:
        return x, 0
    if ds.batch_ids is None:
        groups = [np.arange(ds.n_rows)]
    else:
        arr = np.asarray(ds.batch_ids)
        groups = [np.where(arr == b)[0] for b in dict.fromkeys(ds.batch_ids)]
    for idx in groups:
        block = x[idx]
        for j in range(block.shape[1]):
            col = block[:, j]
            missing = np.isnan(col)
            if not missing.any():
                continue
            # carry the last seen value forward
            last = np.where(missing, -1, np.arange(len(col)))
            np.maximum.accumulate(last, out=last)
            has_prior = last >= 0
            col[missing & has_prior] = col[last[missing & has_prior]]
            col[np.isnan(col)] = fallback[j]
            block[:, j] = col
        x[idx] = block
    return x, imputed


def fit_ridge(
    ds: TimeSeriesDataset,
    target: str,
    lam: float,
    features: tuple[str, ...] | None = None,
) -> RidgeModel:
    """Fit the ridge soft sensor on a dataset holding the target column.

    Rows with a missing target are dropped; missing feature cells are
    imputed last-observation-carried-forward within their batch.
    """
    if features is None:
        features = tuple(f for f in ds.feature_names if f != target)
    if target not in ds.feature_names:
        raise ConfigError(f"target column {target!r} not in dataset")
    if not features:
        raise ConfigError("ridge fit needs at least one feature")
    y_all = ds.column(target)
    keep = ~np.isnan(y_all)
    if not keep.any():
        raise SpecValidationError("target column is entirely missing")
    sub = ds.select_rows(np.where(keep)[0]) if not keep.all() else ds
    cols = [sub.feature_index(f) for f in features]
    raw = sub.values[:, cols]
    fallback = np.array(
        [
            float(np.nanmean(raw[:, j])) if not np.all(np.isnan(raw[:, j])) else 0.0
            for j in range(raw.shape[1])
        ]
    )
    x, _ = impute_locf(sub, features, fallback)
    y = sub.column(target)
    weights, intercept, means, stds = ridge_solve(x, y, lam)
    weights = np.array(weights)
    weights.setflags(write=False)
    return RidgeModel(
        feature_names=tuple(features),
        weights=weights,
        intercept=intercept,
        lam=float(lam),
        means=means,
        stds=stds,
        fallback_means=fallback,
        trained_on=ds.dataset_version,
        target_name=target,
    )


def predict_points(model: RidgeModel, ds: TimeSeriesDataset) -> tuple[np.ndarray, int]:
    """Point predictions with LOCF imputation; returns (values, imputed cells)."""
    x, imputed = impute_locf(ds, model.feature_names, model.fallback_means)
    return model.predict_matrix(x), imputed


def predict_with_intervals(
    model: RidgeModel,
    ds: TimeSeriesDataset,
    cal: TimeSeriesDataset,
    levels: tuple[float, ...] = (0.05, 0.5, 0.95),
    slice_name: str = "baseline",
    model_version: str = "reference",
) -> PredictionSet:
    """Point plus conformally calibrated quantile predictions on ``ds``.

    Initial intervals are Gaussian (point +- z * residual std from the
    calibration slice); every symmetric level pair is then adjusted by
    split-conformal offsets fitted on the same calibration slice.
    """
    if cal.n_rows == 0:
        raise InsufficientCalibrationError("empty calibration set")
    levels = tuple(sorted(float(l) for l in levels))
    if not any(abs(l - 0.5) <= 1e-9 for l in levels):
        raise ConfigError("levels must include the median 0.5")

    cal_points, _ = predict_points(model, cal)
    y_cal = cal.column(model.target_name)
    usable = ~np.isnan(y_cal)
    if usable.sum() < 10:
        raise InsufficientCalibrationError(
            f"calibration slice has {int(usable.sum())} usable rows; need >= 10"
        )
    residual_std = float(np.std(y_cal[usable] - cal_points[usable], ddof=1))
    residual_std = max(residual_std, 1e-12)

    def initial_set(data, points, name) -> PredictionSet:
        q = np.empty((len(points), len(levels)))
        for i, level in enumerate(levels):
            if abs(level - 0.5) <= 1e-9:
                q[:, i] = points
            else:
                q[:, i] = points + norm.ppf(level) * residual_std
        return PredictionSet.regression(
            y_true=data.column(model.target_name),
            y_point=points,
            quantile_levels=levels,
            quantiles=q,
            model_version=model_version,
            slice_name=name,
        )

    cal_kept = cal if usable.all() else cal.select_rows(np.where(usable)[0])
    p_cal = initial_set(cal_kept, cal_points[usable], "calibration")

    points, imputed = predict_points(model, ds)
    result = initial_set(ds, points, slice_name)
    for pair in symmetric_level_pairs(levels):
        result = conformal_calibrate(p_cal, result, pair)
    if imputed:
        result = PredictionSet(
            task=result.task,
            y_true=result.y_true,
            model_version=result.model_version,
            slice_name=result.slice_name,
            y_point=result.y_point,
            quantile_levels=result.quantile_levels,
            quantiles=result.quantiles,
            notes={"imputed_cells": imputed},
        )
    return result
