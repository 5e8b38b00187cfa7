"""KPIs, uncertainty-quantification scores, and post-hoc calibration.

Regression sets carry point predictions and an optional quantile matrix;
classification sets carry a probability matrix and optionally the raw
logits. Interval quality is scored with empirical coverage, mean interval
width, and the weighted interval score in the decomposition of Bracher et
al. (2021). Post-hoc calibration offers split-conformal interval adjustment
and temperature scaling.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ConfigError,
    InsufficientCalibrationError,
    SpecValidationError,
)

PROB_FLOOR = 1e-12  # keeps log-loss finite; recorded in the card methodology notes
LEVEL_TOL = 1e-9

LOWER_BETTER = "lower_better"
HIGHER_BETTER = "higher_better"

_ORIENTATIONS = {
    "mae": LOWER_BETTER,
    "rmse": LOWER_BETTER,
    "mape": LOWER_BETTER,
    "wis": LOWER_BETTER,
    "nll": LOWER_BETTER,
    "brier": LOWER_BETTER,
    "ece": LOWER_BETTER,
    "accuracy": HIGHER_BETTER,
    "macro_f1": HIGHER_BETTER,
}


def orientation_for(metric: str) -> str:
    """Declared orientation of a metric name, including interval metrics."""
    if metric.startswith("coverage"):
        return HIGHER_BETTER
    if metric.startswith("mpiw"):
        return LOWER_BETTER
    try:
        return _ORIENTATIONS[metric]
    except KeyError:
        raise ConfigError(f"no declared orientation for metric {metric!r}") from None


@dataclass(frozen=True)
class PredictionSet:
    """Ground truth plus predictions of one model version on one data slice."""

    task: str
    y_true: np.ndarray
    model_version: str
    slice_name: str
    y_point: np.ndarray | None = None
    quantile_levels: tuple[float, ...] = ()
    quantiles: np.ndarray | None = None
    probabilities: np.ndarray | None = None
    logits: np.ndarray | None = None
    notes: dict = field(default_factory=dict)

    @classmethod
    def regression(
        cls,
        y_true,
        y_point,
        model_version: str,
        slice_name: str,
        quantile_levels=(),
        quantiles=None,
    ) -> "PredictionSet":
        y_true = np.asarray(y_true, dtype=np.float64)
        y_point = np.asarray(y_point, dtype=np.float64)
        if y_true.shape != y_point.shape or y_true.ndim != 1:
            raise SpecValidationError("y_true and y_point must be equal-length vectors")
        levels = tuple(float(l) for l in quantile_levels)
        if levels:
            if any(not 0.0 < l < 1.0 for l in levels):
                raise SpecValidationError("quantile levels must lie in (0, 1)")
            if any(b - a <= 0 for a, b in zip(levels, levels[1:])):
                raise SpecValidationError("quantile levels must be strictly increasing")
            quantiles = np.asarray(quantiles, dtype=np.float64)
            if quantiles.shape != (len(y_true), len(levels)):
                raise SpecValidationError(
                    f"quantile matrix must be {len(y_true)}x{len(levels)}"
                )
        elif quantiles is not None:
            raise SpecValidationError("quantile matrix given without levels")
        return cls(
            task="regression",
            y_true=y_true,
            y_point=y_point,
            quantile_levels=levels,
            quantiles=quantiles,
            model_version=model_version,
            slice_name=slice_name,
        )

    @classmethod
    def classification(
        cls,
        y_true,
        probabilities,
        model_version: str,
        slice_name: str,
        logits=None,
    ) -> "PredictionSet":
        y_true = np.asarray(y_true, dtype=np.int64)
        probs = np.asarray(probabilities, dtype=np.float64)
        if probs.ndim != 2 or len(probs) != len(y_true):
            raise SpecValidationError("probability matrix must be n x C, aligned with y_true")
        sums = probs.sum(axis=1)
        bad = np.where(np.abs(sums - 1.0) > 1e-6)[0]
        if len(bad):
            raise SpecValidationError(
                f"probability rows do not sum to 1 within 1e-6 (first: row {bad[0]})"
            )
        if np.any((y_true < 0) | (y_true >= probs.shape[1])):
            raise SpecValidationError("labels outside the probability matrix classes")
        if logits is not None:
            logits = np.asarray(logits, dtype=np.float64)
            if logits.shape != probs.shape:
                raise SpecValidationError("logit matrix must match the probability matrix")
        return cls(
            task="classification",
            y_true=y_true,
            probabilities=probs,
            logits=logits,
            model_version=model_version,
            slice_name=slice_name,
        )

    def __len__(self) -> int:
        return len(self.y_true)

    def level_column(self, level: float) -> np.ndarray:
        for i, l in enumerate(self.quantile_levels):
            if abs(l - level) <= LEVEL_TOL:
                return self.quantiles[:, i]
        raise ConfigError(f"quantile level {level} not present in prediction set")

    def has_level(self, level: float) -> bool:
        return any(abs(l - level) <= LEVEL_TOL for l in self.quantile_levels)


# ---------------------------------------------------------------------------
# Regression KPIs and interval metrics
# ---------------------------------------------------------------------------


def regression_kpis(p: PredictionSet) -> dict:
    """mae, rmse and mape; mape skips targets with |y| < 1e-12 and reports
    the skip count under ``mape_skipped``."""
    if p.task != "regression" or p.y_point is None:
        raise ConfigError("regression_kpis needs a regression set with point predictions")
    err = p.y_point - p.y_true
    usable = np.abs(p.y_true) >= 1e-12
    mape = (
        float(np.mean(np.abs(err[usable]) / np.abs(p.y_true[usable])))
        if usable.any()
        else None
    )
    return {
        "mae": float(np.mean(np.abs(err))),
        "rmse": float(math.sqrt(np.mean(err * err))),
        "mape": mape,
        "mape_skipped": int(np.sum(~usable)),
    }


def interval_metrics(p: PredictionSet, level_pair: tuple[float, float]) -> dict:
    """Empirical coverage (closed interval) and mean width for one level pair."""
    lo, hi = level_pair
    q_lo = p.level_column(lo)
    q_hi = p.level_column(hi)
    covered = (p.y_true >= q_lo) & (p.y_true <= q_hi)
    return {
        "coverage": float(np.mean(covered)),
        "mpiw": float(np.mean(q_hi - q_lo)),
    }


def symmetric_level_pairs(levels) -> list[tuple[float, float]]:
    """(lo, hi) pairs mirrored around the median, ordered by width descending."""
    pairs = []
    for l in levels:
        if l < 0.5 - LEVEL_TOL:
            partner = 1.0 - l
            if any(abs(other - partner) <= LEVEL_TOL for other in levels):
                pairs.append((l, partner))
    return pairs


def wis(p: PredictionSet) -> float:
    """Mean weighted interval score against the quantile matrix.

    Per row with median m and K central intervals (l_k, u_k) at miscoverage
    alpha_k:

        IS_a(l, u, y) = (u - l) + (2/a)(l - y) 1{y < l} + (2/a)(y - u) 1{y > u}
        WIS = (0.5 |y - m| + sum_k (a_k / 2) IS_{a_k}) / (K + 1/2)

    With K = 0 this collapses to the absolute error against the median.
    """
    if p.task != "regression":
        raise ConfigError("wis is defined for regression prediction sets")
    if not p.has_level(0.5):
        raise ConfigError("wis requires a median (0.5) quantile column")
    median = p.level_column(0.5)
    y = p.y_true
    total = 0.5 * np.abs(y - median)
    pairs = symmetric_level_pairs(p.quantile_levels)
    for lo_level, hi_level in pairs:
        alpha = 2.0 * lo_level
        lo = p.level_column(lo_level)
        hi = p.level_column(hi_level)
        interval_score = (
            (hi - lo)
            + (2.0 / alpha) * np.clip(lo - y, 0.0, None)
            + (2.0 / alpha) * np.clip(y - hi, 0.0, None)
        )
        total = total + (alpha / 2.0) * interval_score
    rows = total / (len(pairs) + 0.5)
    return float(np.mean(rows))


# ---------------------------------------------------------------------------
# Classification scores
# ---------------------------------------------------------------------------


def _predicted_classes(probs: np.ndarray) -> np.ndarray:
    # argmax takes the first maximum: ties break to the lowest class index
    return np.argmax(probs, axis=1)


def classification_scores(p: PredictionSet, bins: int = 10) -> dict:
    """Accuracy, macro F1, NLL, Brier, ECE and the reliability-diagram bins.

    ECE bins the max-probability confidence into ``bins`` equal-width bins
    on [0, 1]; empty bins contribute zero. Probabilities are floored at
    1e-12 inside the log-loss.
    """
    if p.task != "classification" or p.probabilities is None:
        raise ConfigError("classification_scores needs a classification set")
    if bins < 1:
        raise ConfigError("bins must be >= 1")
    probs = p.probabilities
    y = p.y_true
    n, n_classes = probs.shape

    predicted = _predicted_classes(probs)
    correct = predicted == y
    accuracy = float(np.mean(correct))

    f1_per_class = []
    for c in range(n_classes):
        tp = np.sum((predicted == c) & (y == c))
        fp = np.sum((predicted == c) & (y != c))
        fn = np.sum((predicted != c) & (y == c))
        denominator = 2 * tp + fp + fn
        f1_per_class.append(2 * tp / denominator if denominator > 0 else 0.0)
    macro_f1 = float(np.mean(f1_per_class))

    p_true = np.clip(probs[np.arange(n), y], PROB_FLOOR, None)
    nll = float(-np.mean(np.log(p_true)))

    onehot = np.zeros_like(probs)
    onehot[np.arange(n), y] = 1.0
    brier = float(np.mean(np.sum((probs - onehot) ** 2, axis=1)))

    confidence = probs[np.arange(n), predicted]
    bin_index = np.clip((confidence * bins).astype(int), 0, bins - 1)
    reliability = []
    ece = 0.0
    for b in range(bins):
        members = bin_index == b
        count = int(np.sum(members))
        entry = {
            "lo": b / bins,
            "hi": (b + 1) / bins,
            "count": count,
            "mean_confidence": None,
            "accuracy": None,
        }
        if count:
            conf_b = float(np.mean(confidence[members]))
            acc_b = float(np.mean(correct[members]))
            entry["mean_confidence"] = conf_b
            entry["accuracy"] = acc_b
            ece += (count / n) * abs(acc_b - conf_b)
        reliability.append(entry)

    return {
        "accuracy": accuracy,
        "macro_f1": macro_f1,
        "nll": nll,
        "brier": brier,
        "ece": float(ece),
        "reliability_bins": reliability,
    }


# ---------------------------------------------------------------------------
# Post-hoc calibration
# ---------------------------------------------------------------------------


def conformal_calibrate(
    p_cal: PredictionSet,
    p_apply: PredictionSet,
    level_pair: tuple[float, float],
) -> PredictionSet:
    """Split-conformal interval adjustment fitted on the calibration slice.

    Nonconformity score per calibration row is max(q_lo - y, y - q_hi); the
    offset is the ceil((n+1)(1-alpha))/n empirical quantile of the scores,
    with alpha the nominal miscoverage 1 - (hi - lo). Output intervals are
    [q_lo - offset, q_hi + offset], re-sorted per row so quantiles never
    cross.
    """
    lo, hi = level_pair
    n = len(p_cal)
    if n < 10:
        raise InsufficientCalibrationError(
            f"conformal calibration needs at least 10 rows, got {n}"
        )
    cal_lo = p_cal.level_column(lo)
    cal_hi = p_cal.level_column(hi)
    scores = np.maximum(cal_lo - p_cal.y_true, p_cal.y_true - cal_hi)
    alpha = 1.0 - (hi - lo)
    rank = min(math.ceil((n + 1) * (1.0 - alpha)), n)
    offset = float(np.sort(scores)[rank - 1])

    new_q = np.array(p_apply.quantiles, dtype=np.float64)
    idx_lo = [i for i, l in enumerate(p_apply.quantile_levels) if abs(l - lo) <= LEVEL_TOL]
    idx_hi = [i for i, l in enumerate(p_apply.quantile_levels) if abs(l - hi) <= LEVEL_TOL]
    if not idx_lo or not idx_hi:
        raise ConfigError(f"level pair {level_pair} not present in the apply set")
    new_q[:, idx_lo[0]] -= offset
    new_q[:, idx_hi[0]] += offset
    new_q = np.sort(new_q, axis=1)
    return PredictionSet.regression(
        y_true=p_apply.y_true,
        y_point=p_apply.y_point,
        quantile_levels=p_apply.quantile_levels,
        quantiles=new_q,
        model_version=p_apply.model_version,
        slice_name=p_apply.slice_name,
    )


def _softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _nll_at_temperature(logits: np.ndarray, y: np.ndarray, t: float) -> float:
    probs = _softmax(logits / t)
    p_true = np.clip(probs[np.arange(len(y)), y], PROB_FLOOR, None)
    return float(-np.mean(np.log(p_true)))


def temperature_scale(
    p_cal: PredictionSet,
    p_apply: PredictionSet,
    t_bounds: tuple[float, float] = (0.05, 20.0),
    tol: float = 1e-4,
) -> tuple[PredictionSet, float]:
    """Fit a softmax temperature on the calibration logits, apply it.

    Golden-section search minimizes the calibration NLL over the bounded
    interval down to a bracket width below ``tol``. T = 1 is kept as an
    explicit candidate so scaling can never be worse than doing nothing.
    """
    for name, ps in (("calibration", p_cal), ("apply", p_apply)):
        if ps.logits is None:
            raise ConfigError(f"temperature scaling needs raw logits on the {name} set")
    if len(p_cal) < 10:
        raise InsufficientCalibrationError(
            f"temperature scaling needs at least 10 rows, got {len(p_cal)}"
        )
    logits = p_cal.logits
    y = p_cal.y_true

    inv_phi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = t_bounds
    c = b - inv_phi * (b - a)
    d = a + inv_phi * (b - a)
    f_c = _nll_at_temperature(logits, y, c)
    f_d = _nll_at_temperature(logits, y, d)
    while b - a > tol:
        if f_c < f_d:
            b, d, f_d = d, c, f_c
            c = b - inv_phi * (b - a)
            f_c = _nll_at_temperature(logits, y, c)
        else:
            a, c, f_c = c, d, f_d
            d = a + inv_phi * (b - a)
            f_d = _nll_at_temperature(logits, y, d)
    fitted = (a + b) / 2.0
    if _nll_at_temperature(logits, y, 1.0) <= _nll_at_temperature(logits, y, fitted):
        fitted = 1.0

    calibrated = PredictionSet.classification(
        y_true=p_apply.y_true,
        probabilities=_softmax(p_apply.logits / fitted),
        logits=p_apply.logits,
        model_version=p_apply.model_version,
        slice_name=p_apply.slice_name,
    )
    return calibrated, float(fitted)


# ---------------------------------------------------------------------------
# Full per-slice report
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class UqReport:
    task: str
    model_version: str
    slice_name: str
    metrics: dict[str, float]
    reliability_bins: list[dict] | None = None
    notes: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        payload = {
            "task": self.task,
            "model_version": self.model_version,
            "slice_name": self.slice_name,
            "metrics": dict(self.metrics),
            "orientations": {m: orientation_for(m) for m in self.metrics},
        }
        if self.reliability_bins is not None:
            payload["reliability_bins"] = self.reliability_bins
        if self.notes:
            payload["notes"] = dict(self.notes)
        return payload

    @classmethod
    def from_dict(cls, payload: dict) -> "UqReport":
        return cls(
            task=payload["task"],
            model_version=payload["model_version"],
            slice_name=payload["slice_name"],
            metrics=dict(payload["metrics"]),
            reliability_bins=payload.get("reliability_bins"),
            notes=dict(payload.get("notes", {})),
        )


def uq_report(p: PredictionSet, bins: int = 10) -> UqReport:
    """Compute the full task-appropriate metric bundle for one slice."""
    if p.task == "regression":
        kpis = regression_kpis(p)
        metrics = {"mae": kpis["mae"], "rmse": kpis["rmse"]}
        notes = {"mape_skipped": kpis["mape_skipped"]}
        if kpis["mape"] is not None:
            metrics["mape"] = kpis["mape"]
        for lo, hi in symmetric_level_pairs(p.quantile_levels):
            im = interval_metrics(p, (lo, hi))
            suffix = f"_{repr(float(lo))}_{repr(float(hi))}"
            metrics[f"coverage{suffix}"] = im["coverage"]
            metrics[f"mpiw{suffix}"] = im["mpiw"]
        if p.has_level(0.5):
            metrics["wis"] = wis(p)
        return UqReport(
            task=p.task,
            model_version=p.model_version,
            slice_name=p.slice_name,
            metrics=metrics,
            notes=notes,
        )
    scores = classification_scores(p, bins=bins)
    reliability = scores.pop("reliability_bins")
    return UqReport(
        task=p.task,
        model_version=p.model_version,
        slice_name=p.slice_name,
        metrics=scores,
        reliability_bins=reliability,
    )


# ---------------------------------------------------------------------------
# Prediction file interface
# ---------------------------------------------------------------------------


def write_predictions_csv(p: PredictionSet, path: str) -> None:
    """Write the model-boundary CSV (regression: y_true, y_pred, q_<level>...;
    classification: y_true, p_0.., optional logit_0..)."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        if p.task == "regression":
            header = ["y_true", "y_pred"] + [f"q_{repr(l)}" for l in p.quantile_levels]
            writer.writerow(header)
            for i in range(len(p)):
                row = [repr(float(p.y_true[i])), repr(float(p.y_point[i]))]
                if p.quantiles is not None:
                    row.extend(repr(float(v)) for v in p.quantiles[i])
                writer.writerow(row)
        else:
            n_classes = p.probabilities.shape[1]
            header = ["y_true"] + [f"p_{c}" for c in range(n_classes)]
            if p.logits is not None:
                header += [f"logit_{c}" for c in range(n_classes)]
            writer.writerow(header)
            for i in range(len(p)):
                row = [str(int(p.y_true[i]))]
                row.extend(repr(float(v)) for v in p.probabilities[i])
                if p.logits is not None:
                    row.extend(repr(float(v)) for v in p.logits[i])
                writer.writerow(row)


def load_predictions_csv(
    path: str, model_version: str, slice_name: str
) -> PredictionSet:
    """Parse a predictions CSV; the task is inferred from the header."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ConfigError(f"{path}: predictions file is empty") from None
        rows = [r for r in reader if r and any(c.strip() for c in r)]
    if "y_true" not in header:
        raise ConfigError(f"{path}: missing y_true column")
    if not rows:
        raise ConfigError(f"{path}: no prediction rows")
    columns = {name: i for i, name in enumerate(header)}

    def pull(name: str, dtype=float) -> np.ndarray:
        i = columns[name]
        return np.asarray([dtype(r[i]) for r in rows])

    if "y_pred" in columns:
        level_cols = sorted(
            ((float(h[2:]), h) for h in header if h.startswith("q_")),
            key=lambda t: t[0],
        )
        levels = tuple(l for l, _ in level_cols)
        quantiles = (
            np.column_stack([pull(col) for _, col in level_cols]) if level_cols else None
        )
        return PredictionSet.regression(
            y_true=pull("y_true"),
            y_point=pull("y_pred"),
            quantile_levels=levels,
            quantiles=quantiles,
            model_version=model_version,
            slice_name=slice_name,
        )

    prob_cols = sorted(
        ((int(h[2:]), h) for h in header if h.startswith("p_")), key=lambda t: t[0]
    )
    if not prob_cols:
        raise ConfigError(f"{path}: neither y_pred nor p_<class> columns found")
    logit_cols = sorted(
        ((int(h[6:]), h) for h in header if h.startswith("logit_")), key=lambda t: t[0]
    )
    probs = np.column_stack([pull(col) for _, col in prob_cols])
    logits = (
        np.column_stack([pull(col) for _, col in logit_cols]) if logit_cols else None
    )
    return PredictionSet.classification(
        y_true=pull("y_true", dtype=lambda v: int(float(v))),
        probabilities=probs,
        logits=logits,
        model_version=model_version,
        slice_name=slice_name,
    )
