"""Stress-test scenario catalog: real data slices and synthetic sensor faults.

Synthetic faults are severity-parameterized and deterministic: each target
feature gets its own generator derived from (scenario seed, feature name),
so faults are independent across features and stable under feature
reordering. Severities span mild (s close to 0) to clearly out-of-domain
(s = 1); magnitudes are anchored to a per-feature scale sigma_f.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .dataset import TimeSeriesDataset
from .errors import EmptyScenarioError, SpecValidationError

FAULT_KINDS = ("gaussian_noise", "drift_ramp", "stuck_at", "spike", "dropout")

# Tool-default magnitude anchors, exposed so catalogs can reason about them:
# additive faults reach 3 sigma at s=1, spikes jump 6 sigma with rate 2% * s,
# dropout blanks 30% * s of cells, stuck intervals cover half the window.
NOISE_SIGMA_FACTOR = 3.0
RAMP_SIGMA_FACTOR = 3.0
SPIKE_SIGMA_FACTOR = 6.0
SPIKE_RATE = 0.02
DROPOUT_RATE = 0.3


@dataclass(frozen=True)
class ScenarioSpec:
    name: str
    kind: str  # "real_slice" | "synthetic_fault"
    fault: str | None = None
    severity: float | None = None
    target_features: tuple[str, ...] = ()
    seed: int = 0
    batch_id: str | None = None
    time_range: tuple[float, float] | None = None

    def __post_init__(self):
        if not self.name:
            raise SpecValidationError("scenario name must be non-empty")
        if self.kind == "synthetic_fault":
            if self.fault not in FAULT_KINDS:
                raise SpecValidationError(
                    f"scenario {self.name!r}: unknown fault {self.fault!r}"
                )
            if self.severity is None or not 0.0 < self.severity <= 1.0:
                raise SpecValidationError(
                    f"scenario {self.name!r}: severity must lie in (0, 1]"
                )
            if not self.target_features:
                raise SpecValidationError(
                    f"scenario {self.name!r}: synthetic faults need target features"
                )
        elif self.kind == "real_slice":
            if self.batch_id is None and self.time_range is None:
                raise SpecValidationError(
                    f"scenario {self.name!r}: real slices need batch_id or time_range"
                )
        else:
            raise SpecValidationError(f"scenario {self.name!r}: unknown kind {self.kind!r}")

    def to_dict(self) -> dict:
        payload: dict = {"name": self.name, "kind": self.kind, "seed": self.seed}
        if self.kind == "synthetic_fault":
            payload["fault"] = self.fault
            payload["severity"] = self.severity
            payload["features"] = list(self.target_features)
        else:
            if self.batch_id is not None:
                payload["batch_id"] = self.batch_id
            if self.time_range is not None:
                payload["time_range"] = list(self.time_range)
        return payload


@dataclass(frozen=True)
class ScenarioCatalog:
    scenarios: tuple[ScenarioSpec, ...]
    base_split: str = "test"

    def __post_init__(self):
        if not self.scenarios:
            raise SpecValidationError("scenario catalog must not be empty")
        seen = set()
        for spec in self.scenarios:
            if spec.name in seen:
                raise SpecValidationError(f"duplicate scenario name {spec.name!r}")
            seen.add(spec.name)

    def to_dict(self) -> dict:
        return {
            "base_split": self.base_split,
            "scenarios": [s.to_dict() for s in self.scenarios],
        }

    def get(self, name: str) -> ScenarioSpec:
        for spec in self.scenarios:
            if spec.name == name:
                return spec
        raise SpecValidationError(f"no scenario named {name!r}")


def _feature_rng(seed: int, feature: str) -> np.random.Generator:
    digest = hashlib.sha256(feature.encode("utf-8")).digest()
    feature_key = int.from_bytes(digest[:8], "big")
    return np.random.default_rng(np.random.SeedSequence([int(seed), feature_key]))


def apply_fault(
    ds: TimeSeriesDataset,
    spec: ScenarioSpec,
    feature_scales: Mapping[str, float] | None = None,
) -> TimeSeriesDataset:
    """Inject a synthetic sensor fault into the target features of ``ds``.

    ``feature_scales`` supplies the per-feature scale sigma_f (normally the
    training standard deviation); without it the scale is estimated from the
    perturbed dataset itself. Non-target features are bit-identical in the
    output; the result carries a fresh dataset_version and records the
    scenario spec as provenance.
    """
    if spec.kind != "synthetic_fault":
        raise SpecValidationError(f"scenario {spec.name!r} is not a synthetic fault")
    for feat in spec.target_features:
        if feat not in ds.feature_names:
            raise SpecValidationError(
                f"scenario {spec.name!r}: unknown feature {feat!r}"
            )

    values = np.array(ds.values, dtype=np.float64)
    n = ds.n_rows
    s = float(spec.severity)
    for feat in spec.target_features:
        j = ds.feature_index(feat)
        col = values[:, j]
        present = ~np.isnan(col)
        if feature_scales is not None and feat in feature_scales:
            sigma = float(feature_scales[feat])
        else:
            sigma = float(np.std(col[present])) if present.any() else 0.0
        rng = _feature_rng(spec.seed, feat)

        if spec.fault == "gaussian_noise":
            noise = rng.normal(0.0, NOISE_SIGMA_FACTOR * s * sigma, size=n)
            col[present] += noise[present]
        elif spec.fault == "drift_ramp":
            ramp = np.linspace(0.0, RAMP_SIGMA_FACTOR * s * sigma, num=n)
            col[present] += ramp[present]
        elif spec.fault == "stuck_at":
            length = math.ceil(s * n / 2)
            start = int(rng.integers(0, n - length + 1)) if length < n else 0
            col[start:start + length] = col[start]
        elif spec.fault == "spike":
            hits = rng.random(n) < SPIKE_RATE * s
            signs = np.where(rng.random(n) < 0.5, -1.0, 1.0)
            hits &= present
            col[hits] += signs[hits] * SPIKE_SIGMA_FACTOR * sigma
        elif spec.fault == "dropout":
            drops = rng.random(n) < DROPOUT_RATE * s
            col[drops] = np.nan
        values[:, j] = col

    return ds.with_values(
        values,
        name=f"{ds.name}#{spec.name}",
        provenance={
            "scenario": spec.to_dict(),
            "source_dataset_version": ds.dataset_version,
        },
    )


def slice_scenario(ds: TimeSeriesDataset, spec: ScenarioSpec) -> TimeSeriesDataset:
    """Select the real slice named by the spec, preserving row order."""
    if spec.kind != "real_slice":
        raise SpecValidationError(f"scenario {spec.name!r} is not a real slice")
    mask = np.ones(ds.n_rows, dtype=bool)
    if spec.batch_id is not None:
        if ds.batch_ids is None:
            raise SpecValidationError(
                f"scenario {spec.name!r}: dataset has no batch_ids"
            )
        mask &= np.asarray(ds.batch_ids) == spec.batch_id
    if spec.time_range is not None:
        lo, hi = spec.time_range
        mask &= (ds.timestamps >= lo) & (ds.timestamps <= hi)
    idx = np.where(mask)[0]
    if len(idx) == 0:
        raise EmptyScenarioError(f"scenario {spec.name!r} selects no rows")
    return ds.select_rows(
        idx,
        name=f"{ds.name}#{spec.name}",
        provenance={
            "scenario": spec.to_dict(),
            "source_dataset_version": ds.dataset_version,
        },
    )


def apply_scenario(
    ds: TimeSeriesDataset,
    spec: ScenarioSpec,
    feature_scales: Mapping[str, float] | None = None,
) -> TimeSeriesDataset:
    if spec.kind == "real_slice":
        return slice_scenario(ds, spec)
    return apply_fault(ds, spec, feature_scales)


def _expand_entry(entry: dict) -> list[ScenarioSpec]:
    entry = dict(entry)
    name = entry.get("name")
    if not name:
        raise SpecValidationError("catalog entry without a name")
    kind = entry.get("kind", "synthetic_fault" if "fault" in entry else "real_slice")
    seed = int(entry.get("seed", 0))
    if kind == "real_slice":
        time_range = entry.get("time_range")
        return [
            ScenarioSpec(
                name=name,
                kind="real_slice",
                seed=seed,
                batch_id=entry.get("batch_id"),
                time_range=tuple(time_range) if time_range is not None else None,
            )
        ]
    features = tuple(entry.get("features", ()))
    fault = entry.get("fault")
    expanded = "severities" in entry
    if expanded:
        severities = entry["severities"]
    elif "severity" in entry:
        severities = [entry["severity"]]
    else:
        severities = [None]
    specs = []
    for sev in severities:
        suffix = f"@{repr(float(sev))}" if expanded else ""
        specs.append(
            ScenarioSpec(
                name=f"{name}{suffix}",
                kind="synthetic_fault",
                fault=fault,
                severity=None if sev is None else float(sev),
                target_features=features,
                seed=seed,
            )
        )
    return specs


def build_catalog(config: dict) -> ScenarioCatalog:
    """Build a catalog from its JSON structure; severity lists expand to
    one scenario per value with an ``@severity`` name suffix."""
    if not isinstance(config, dict):
        raise SpecValidationError("catalog config must be a JSON object")
    entries = config.get("scenarios", [])
    if not entries:
        raise SpecValidationError("catalog config lists no scenarios")
    specs: list[ScenarioSpec] = []
    for entry in entries:
        specs.extend(_expand_entry(entry))
    return ScenarioCatalog(
        scenarios=tuple(specs),
        base_split=str(config.get("base_split", "test")),
    )


def load_catalog(path: str) -> ScenarioCatalog:
    with open(path, "r", encoding="utf-8") as fh:
        return build_catalog(json.load(fh))
