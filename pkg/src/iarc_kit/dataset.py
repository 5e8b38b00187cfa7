"""Time-series dataset container, CSV ingestion, quality characterization.

Datasets are immutable after construction and carry a content-hash version
identifier so every downstream artifact (splits, scenarios, models, card)
can be traced back to the exact data it was computed on.
"""

from __future__ import annotations

import csv
import hashlib
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import ConfigError, EmptyDatasetError, ParseError, SpecValidationError

QUALITY_STAGES = ("raw", "preprocessed")


def _repr_number(x: float) -> str:
    """Shortest round-trip decimal rendering used by the canonical serialization."""
    return repr(float(x))


def _canonical_payload(
    feature_names: Sequence[str],
    timestamps: np.ndarray,
    values: np.ndarray,
    batch_ids: Sequence[str] | None,
) -> bytes:
    lines = [",".join(feature_names)]
    for i in range(len(timestamps)):
        cells = [
            "" if math.isnan(v) else _repr_number(v) for v in values[i]
        ]
        batch = "" if batch_ids is None else batch_ids[i]
        lines.append(f"{batch};{_repr_number(timestamps[i])};" + ",".join(cells))
    return "\n".join(lines).encode("utf-8")


def content_hash(
    feature_names: Sequence[str],
    timestamps: np.ndarray,
    values: np.ndarray,
    batch_ids: Sequence[str] | None,
) -> str:
    """SHA-256 of the canonical serialization: equal content, equal hash."""
    payload = _canonical_payload(feature_names, timestamps, values, batch_ids)
    return hashlib.sha256(payload).hexdigest()


@dataclass(frozen=True)
class TimeSeriesDataset:
    """Versioned matrix of sensor channels with timestamps and optional batch groups.

    ``values`` is row-major float64 with NaN marking missing cells. Rows are
    kept sorted by (batch_id, timestamp); the arrays are made read-only so a
    dataset can be shared across parallel workers.
    """

    name: str
    feature_names: tuple[str, ...]
    timestamps: np.ndarray
    values: np.ndarray
    batch_ids: tuple[str, ...] | None
    dataset_version: str
    provenance: dict | None = None

    @classmethod
    def from_arrays(
        cls,
        name: str,
        feature_names: Sequence[str],
        timestamps: Iterable[float],
        values: Iterable[Iterable[float]],
        batch_ids: Sequence[str] | None = None,
        provenance: dict | None = None,
        sort: bool = True,
    ) -> "TimeSeriesDataset":
        feature_names = tuple(str(f) for f in feature_names)
        ts = np.asarray(list(timestamps), dtype=np.float64)
        vals = np.asarray(values, dtype=np.float64)
        if vals.ndim != 2:
            vals = vals.reshape(len(ts), -1)
        n = len(ts)
        if n == 0:
            raise EmptyDatasetError(f"dataset {name!r} has zero data rows")
        if vals.shape != (n, len(feature_names)):
            raise SpecValidationError(
                f"value matrix shape {vals.shape} does not match "
                f"{n} rows x {len(feature_names)} features"
            )
        batches = None if batch_ids is None else tuple(str(b) for b in batch_ids)
        if batches is not None and len(batches) != n:
            raise SpecValidationError("batch_ids length does not match row count")

        if sort:
            # Stable sort by (batch_id, timestamp); equal keys keep file order.
            if batches is None:
                order = np.argsort(ts, kind="stable")
            else:
                order = np.lexsort((np.arange(n), ts, np.asarray(batches)))
            ts = ts[order]
            vals = vals[order]
            if batches is not None:
                batches = tuple(batches[i] for i in order)
        _check_time_order(ts, batches)

        ts.setflags(write=False)
        vals.setflags(write=False)
        version = content_hash(feature_names, ts, vals, batches)
        return cls(
            name=name,
            feature_names=feature_names,
            timestamps=ts,
            values=vals,
            batch_ids=batches,
            dataset_version=version,
            provenance=provenance,
        )

    @property
    def n_rows(self) -> int:
        return len(self.timestamps)

    def feature_index(self, feature: str) -> int:
        try:
            return self.feature_names.index(feature)
        except ValueError:
            raise ConfigError(f"unknown feature {feature!r}") from None

    def column(self, feature: str) -> np.ndarray:
        return self.values[:, self.feature_index(feature)]

    def select_rows(
        self, indices: Sequence[int], name: str | None = None, provenance: dict | None = None
    ) -> "TimeSeriesDataset":
        idx = np.asarray(indices, dtype=np.intp)
        if idx.size == 0:
            raise EmptyDatasetError(f"row selection from {self.name!r} is empty")
        batches = None
        if self.batch_ids is not None:
            batches = tuple(self.batch_ids[i] for i in idx)
        return TimeSeriesDataset.from_arrays(
            name=name or self.name,
            feature_names=self.feature_names,
            timestamps=self.timestamps[idx],
            values=self.values[idx],
            batch_ids=batches,
            provenance=provenance if provenance is not None else self.provenance,
            sort=False,
        )

    def select_features(self, features: Sequence[str], name: str | None = None) -> "TimeSeriesDataset":
        cols = [self.feature_index(f) for f in features]
        return TimeSeriesDataset.from_arrays(
            name=name or self.name,
            feature_names=features,
            timestamps=self.timestamps,
            values=self.values[:, cols],
            batch_ids=self.batch_ids,
            provenance=self.provenance,
            sort=False,
        )

    def with_values(
        self, values: np.ndarray, name: str | None = None, provenance: dict | None = None
    ) -> "TimeSeriesDataset":
        """New dataset with the same axes but replaced cell values."""
        return TimeSeriesDataset.from_arrays(
            name=name or self.name,
            feature_names=self.feature_names,
            timestamps=self.timestamps,
            values=values,
            batch_ids=self.batch_ids,
            provenance=provenance,
            sort=False,
        )


def _check_time_order(ts: np.ndarray, batches: tuple[str, ...] | None) -> None:
    if batches is None:
        ok = bool(np.all(np.diff(ts) >= 0)) if len(ts) > 1 else True
        if not ok:
            raise SpecValidationError("timestamps are not non-decreasing")
        return
    arr = np.asarray(batches)
    for b in dict.fromkeys(batches):
        group = ts[arr == b]
        if len(group) > 1 and not np.all(np.diff(group) >= 0):
            raise SpecValidationError(f"timestamps not non-decreasing within batch {b!r}")


def _parse_timestamp(cell: str, row: int, column: str) -> float:
    text = cell.strip()
    try:
        value = float(text)
        if math.isnan(value) or math.isinf(value):
            raise ValueError
        return value
    except ValueError:
        pass
    try:
        dt = datetime.fromisoformat(text)
    except ValueError:
        raise ParseError(
            f"row {row}, column {column!r}: cannot parse timestamp {cell!r}"
        ) from None
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.timestamp()


def _parse_cell(cell: str, row: int, column: str) -> float:
    text = cell.strip()
    if text == "":
        return math.nan
    try:
        value = float(text)
    except ValueError:
        raise ParseError(
            f"row {row}, column {column!r}: malformed numeric cell {cell!r}"
        ) from None
    if math.isinf(value):
        raise ParseError(f"row {row}, column {column!r}: non-finite cell {cell!r}")
    return value  # float("NaN") parses and canonicalizes to missing


def load_csv(
    path: str,
    timestamp_column: str,
    batch_column: str | None = None,
    name: str | None = None,
) -> TimeSeriesDataset:
    """Load a UTF-8 comma-separated file into a :class:`TimeSeriesDataset`.

    The first row must be a header. ``timestamp_column`` holds float seconds
    or ISO-8601 stamps (converted to epoch seconds, naive values taken as
    UTC). Empty cells and "NaN" denote missing values. Rows are sorted by
    (batch, timestamp) with a stable sort.

    Raises:
        ConfigError: designated timestamp/batch column absent from the header.
        ParseError: malformed numeric cell, naming its row and column.
        EmptyDatasetError: the file holds no data rows.
    """
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyDatasetError(f"{path}: file is empty") from None
        header = [h.strip() for h in header]
        if timestamp_column not in header:
            raise ConfigError(f"{path}: timestamp column {timestamp_column!r} not in header")
        if batch_column is not None and batch_column not in header:
            raise ConfigError(f"{path}: batch column {batch_column!r} not in header")
        ts_idx = header.index(timestamp_column)
        batch_idx = header.index(batch_column) if batch_column is not None else None
        feature_cols = [
            (i, h) for i, h in enumerate(header) if i != ts_idx and i != batch_idx
        ]

        timestamps: list[float] = []
        batches: list[str] = []
        rows: list[list[float]] = []
        for row_no, record in enumerate(reader, start=1):
            if not record or all(cell.strip() == "" for cell in record):
                continue
            if len(record) != len(header):
                raise ParseError(f"row {row_no}: expected {len(header)} cells, got {len(record)}")
            timestamps.append(_parse_timestamp(record[ts_idx], row_no, timestamp_column))
            if batch_idx is not None:
                batches.append(record[batch_idx].strip())
            rows.append([_parse_cell(record[i], row_no, col) for i, col in feature_cols])

    if not rows:
        raise EmptyDatasetError(f"{path}: zero data rows")
    import os

    return TimeSeriesDataset.from_arrays(
        name=name or os.path.splitext(os.path.basename(path))[0],
        feature_names=[col for _, col in feature_cols],
        timestamps=timestamps,
        values=rows,
        batch_ids=batches if batch_idx is not None else None,
    )


def write_csv(ds: TimeSeriesDataset, path: str) -> None:
    """Inverse of :func:`load_csv`: reloading reproduces the same dataset_version."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        header = ["timestamp"]
        if ds.batch_ids is not None:
            header.append("batch_id")
        header.extend(ds.feature_names)
        writer.writerow(header)
        for i in range(ds.n_rows):
            row = [_repr_number(ds.timestamps[i])]
            if ds.batch_ids is not None:
                row.append(ds.batch_ids[i])
            row.extend("" if math.isnan(v) else _repr_number(v) for v in ds.values[i])
            writer.writerow(row)


# ---------------------------------------------------------------------------
# Quality characterization
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FeatureStats:
    """Summary statistics over the non-missing cells of one feature.

    ``defined`` is False for an entirely-missing feature; its numeric fields
    are then None instead of numbers.
    """

    missingness_rate: float
    count: int
    mean: float | None
    std: float | None
    min: float | None
    p25: float | None
    p50: float | None
    p75: float | None
    max: float | None
    defined: bool = True

    def to_dict(self) -> dict:
        return {
            "missingness_rate": self.missingness_rate,
            "count": self.count,
            "mean": self.mean,
            "std": self.std,
            "min": self.min,
            "p25": self.p25,
            "p50": self.p50,
            "p75": self.p75,
            "max": self.max,
            "defined": self.defined,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "FeatureStats":
        return cls(**payload)


@dataclass(frozen=True)
class QualityReport:
    stage: str
    row_count: int
    feature_count: int
    duplicate_timestamp_count: int
    dataset_version: str
    features: dict[str, FeatureStats] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "stage": self.stage,
            "row_count": self.row_count,
            "feature_count": self.feature_count,
            "duplicate_timestamp_count": self.duplicate_timestamp_count,
            "dataset_version": self.dataset_version,
            "features": {name: st.to_dict() for name, st in self.features.items()},
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "QualityReport":
        return cls(
            stage=payload["stage"],
            row_count=payload["row_count"],
            feature_count=payload["feature_count"],
            duplicate_timestamp_count=payload["duplicate_timestamp_count"],
            dataset_version=payload.get("dataset_version", ""),
            features={
                name: FeatureStats.from_dict(st)
                for name, st in payload.get("features", {}).items()
            },
        )


def _duplicate_timestamps(ds: TimeSeriesDataset) -> int:
    if ds.batch_ids is None:
        return ds.n_rows - len(np.unique(ds.timestamps))
    total = 0
    arr = np.asarray(ds.batch_ids)
    for b in dict.fromkeys(ds.batch_ids):
        group = ds.timestamps[arr == b]
        total += len(group) - len(np.unique(group))
    return total


def compute_quality(ds: TimeSeriesDataset, stage: str) -> QualityReport:
    """Per-feature missingness and summary statistics plus global counts.

    Pure function of the dataset: statistics use non-missing cells only,
    quantiles follow the linear-interpolation convention. Degenerate
    (entirely missing) features are flagged, not rejected.
    """
    if stage not in QUALITY_STAGES:
        raise ConfigError(f"stage must be one of {QUALITY_STAGES}, got {stage!r}")
    stats: dict[str, FeatureStats] = {}
    for j, feat in enumerate(ds.feature_names):
        col = ds.values[:, j]
        present = col[~np.isnan(col)]
        missing_rate = float((len(col) - len(present)) / len(col))
        if len(present) == 0:
            stats[feat] = FeatureStats(
                missingness_rate=missing_rate, count=0, mean=None, std=None,
                min=None, p25=None, p50=None, p75=None, max=None, defined=False,
            )
            continue
        q25, q50, q75 = (float(q) for q in np.quantile(present, [0.25, 0.5, 0.75]))
        stats[feat] = FeatureStats(
            missingness_rate=missing_rate,
            count=int(len(present)),
            mean=float(np.mean(present)),
            std=float(np.std(present)),
            min=float(np.min(present)),
            p25=q25,
            p50=q50,
            p75=q75,
            max=float(np.max(present)),
        )
    return QualityReport(
        stage=stage,
        row_count=ds.n_rows,
        feature_count=len(ds.feature_names),
        duplicate_timestamp_count=_duplicate_timestamps(ds),
        dataset_version=ds.dataset_version,
        features=stats,
    )


def windowed_drift_scan(
    ds: TimeSeriesDataset, window_count: int
) -> dict[str, list[float | None]]:
    """KS statistic per feature between each pair of adjacent time windows.

    Rows are ordered by timestamp and partitioned into ``window_count``
    equal-count windows. Entries are None where a window holds no
    non-missing cells for the feature.
    """
    if window_count < 2:
        raise ConfigError("window_count must be at least 2")
    if window_count > ds.n_rows:
        raise ConfigError(
            f"window_count {window_count} exceeds row count {ds.n_rows}"
        )
    from .drift import ks_statistic  # local import: drift depends on this module

    order = np.argsort(ds.timestamps, kind="stable")
    windows = np.array_split(order, window_count)
    result: dict[str, list[float | None]] = {}
    for j, feat in enumerate(ds.feature_names):
        col = ds.values[:, j]
        pairs: list[float | None] = []
        for a_idx, b_idx in zip(windows, windows[1:]):
            a = col[a_idx]
            b = col[b_idx]
            a = a[~np.isnan(a)]
            b = b[~np.isnan(b)]
            if len(a) == 0 or len(b) == 0:
                pairs.append(None)
            else:
                pairs.append(ks_statistic(a, b))
        result[feat] = pairs
    return result


# ---------------------------------------------------------------------------
# Reproducibility stamp
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RunStamp:
    """Identifiers stored with every card so evaluations can be reproduced."""

    seed: int
    code_version: str
    tool_version: str
    created_at: str

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "code_version": self.code_version,
            "tool_version": self.tool_version,
            "created_at": self.created_at,
        }

    def validate(self) -> list[str]:
        problems = []
        if self.seed is None or int(self.seed) < 0:
            problems.append("run_stamp.seed must be a non-negative integer")
        for fieldname in ("code_version", "tool_version", "created_at"):
            if not getattr(self, fieldname):
                problems.append(f"run_stamp.{fieldname} must be non-empty")
        return problems
