import json
import math

import numpy as np
import pytest

from iarc_kit.dataset import TimeSeriesDataset
from iarc_kit.errors import EmptyScenarioError, SpecValidationError
from iarc_kit.odd import coverage_fraction, fit_odd
from iarc_kit.scenarios import (
    ScenarioSpec,
    apply_fault,
    build_catalog,
    load_catalog,
    slice_scenario,
)


def noise_spec(severity, features=("a",), seed=7, fault="gaussian_noise"):
    return ScenarioSpec(
        name=f"{fault}@{severity}",
        kind="synthetic_fault",
        fault=fault,
        severity=severity,
        target_features=tuple(features),
        seed=seed,
    )


@pytest.fixture
def dataset() -> TimeSeriesDataset:
    rng = np.random.default_rng(3)
    n = 200
    return TimeSeriesDataset.from_arrays(
        "base",
        ["a", "b"],
        np.arange(float(n)),
        np.column_stack([rng.normal(0, 1, n), rng.normal(10, 2, n)]),
    )


class TestSpecValidation:
    def test_severity_bounds(self):
        for bad in (0.0, -0.5, 1.5):
            with pytest.raises(SpecValidationError):
                noise_spec(bad)

    def test_missing_target_features(self):
        with pytest.raises(SpecValidationError):
            ScenarioSpec(
                name="n", kind="synthetic_fault", fault="gaussian_noise",
                severity=0.5, target_features=(),
            )

    def test_unknown_fault(self):
        with pytest.raises(SpecValidationError):
            noise_spec(0.5, fault="emp_burst")

    def test_unknown_feature_rejected(self, dataset):
        with pytest.raises(SpecValidationError):
            apply_fault(dataset, noise_spec(0.5, features=("nope",)))


class TestFaults:
    def test_near_zero_severity_is_near_identity(self, dataset):
        sigma = float(np.std(dataset.column("a")))
        out = apply_fault(dataset, noise_spec(1e-9))
        delta = np.abs(out.column("a") - dataset.column("a"))
        assert float(delta.max()) < 1e-6 * sigma

    def test_stuck_at_full_severity_run_length(self):
        values = np.arange(10.0).reshape(-1, 1)
        ds = TimeSeriesDataset.from_arrays("d", ["a"], np.arange(10.0), values)
        spec = ScenarioSpec(
            name="stuck", kind="synthetic_fault", fault="stuck_at",
            severity=1.0, target_features=("a",), seed=5,
        )
        out = apply_fault(ds, spec)
        col = out.column("a")
        # ceil(1.0 * 10 / 2) = 5 consecutive equal values
        runs = max(
            len(list(g))
            for g in _runs(col)
        )
        assert runs >= 5

    def test_seeded_determinism(self, dataset):
        spec = noise_spec(0.7)
        out1 = apply_fault(dataset, spec)
        out2 = apply_fault(dataset, spec)
        assert out1.dataset_version == out2.dataset_version
        assert np.array_equal(out1.values, out2.values)

    def test_untargeted_features_bit_identical(self, dataset):
        out = apply_fault(dataset, noise_spec(1.0, features=("a",)))
        assert np.array_equal(out.column("b"), dataset.column("b"))
        assert out.dataset_version != dataset.dataset_version

    def test_noise_energy_increases_with_severity(self, dataset):
        energies = []
        for s in (0.2, 0.5, 1.0):
            out = apply_fault(dataset, noise_spec(s, seed=11))
            energies.append(float(np.mean((out.column("a") - dataset.column("a")) ** 2)))
        assert energies[0] < energies[1] < energies[2]

    def test_ramp_energy_scales_exactly(self, dataset):
        outs = {
            s: apply_fault(dataset, noise_spec(s, seed=2, fault="drift_ramp"))
            for s in (0.5, 1.0)
        }
        delta_half = outs[0.5].column("a") - dataset.column("a")
        delta_full = outs[1.0].column("a") - dataset.column("a")
        assert np.allclose(2.0 * delta_half, delta_full, rtol=0, atol=1e-12)

    def test_dropout_produces_missing(self, dataset):
        out = apply_fault(dataset, noise_spec(1.0, seed=13, fault="dropout"))
        rate = float(np.mean(np.isnan(out.column("a"))))
        assert 0.2 < rate < 0.4  # nominal 0.3 at s=1

    def test_spike_magnitude(self, dataset):
        scales = {"a": 1.0}
        out = apply_fault(dataset, noise_spec(1.0, seed=17, fault="spike"), scales)
        delta = out.column("a") - dataset.column("a")
        hit = np.abs(delta) > 1e-12
        assert hit.any()
        assert np.allclose(np.abs(delta[hit]), 6.0)

    def test_feature_scales_override(self, dataset):
        spec = noise_spec(1.0, seed=23)
        wide = apply_fault(dataset, spec, {"a": 100.0})
        narrow = apply_fault(dataset, spec, {"a": 1.0})
        d_wide = np.std(wide.column("a") - dataset.column("a"))
        d_narrow = np.std(narrow.column("a") - dataset.column("a"))
        assert d_wide == pytest.approx(100.0 * d_narrow, rel=1e-9)

    def test_provenance_recorded(self, dataset):
        out = apply_fault(dataset, noise_spec(0.4))
        assert out.provenance["scenario"]["fault"] == "gaussian_noise"
        assert out.provenance["source_dataset_version"] == dataset.dataset_version

    def test_full_noise_lowers_odd_coverage(self, dataset):
        model = fit_odd(dataset, q_odd=0.01)
        clean = coverage_fraction(model, dataset)
        noisy = apply_fault(dataset, noise_spec(1.0, features=("a", "b"), seed=31))
        assert coverage_fraction(model, noisy) < clean


def _runs(col):
    run = [col[0]]
    for v in col[1:]:
        if v == run[-1]:
            run.append(v)
        else:
            yield run
            run = [v]
    yield run


class TestSlices:
    def test_slice_only_batch_is_identity(self):
        ds = TimeSeriesDataset.from_arrays(
            "d", ["x"], [0.0, 1, 2], [[1], [2], [3]], batch_ids=["B0", "B0", "B0"]
        )
        spec = ScenarioSpec(name="s", kind="real_slice", batch_id="B0")
        out = slice_scenario(ds, spec)
        assert np.array_equal(out.values, ds.values)

    def test_time_range_slice(self):
        ds = TimeSeriesDataset.from_arrays(
            "d", ["x"], np.arange(10.0), np.arange(10.0).reshape(-1, 1)
        )
        spec = ScenarioSpec(name="s", kind="real_slice", time_range=(2.0, 4.0))
        out = slice_scenario(ds, spec)
        assert out.n_rows == 3

    def test_empty_selection(self):
        ds = TimeSeriesDataset.from_arrays(
            "d", ["x"], [0.0], [[1]], batch_ids=["B0"]
        )
        spec = ScenarioSpec(name="s", kind="real_slice", batch_id="B9")
        with pytest.raises(EmptyScenarioError):
            slice_scenario(ds, spec)


class TestCatalog:
    def test_severity_expansion_cross_product(self):
        config = {
            "scenarios": [
                {"name": "noise", "fault": "gaussian_noise",
                 "severities": [0.2, 0.5, 1.0], "features": ["a"], "seed": 1},
                {"name": "ramp", "fault": "drift_ramp",
                 "severities": [0.2, 0.5, 1.0], "features": ["a"], "seed": 2},
            ]
        }
        catalog = build_catalog(config)
        assert len(catalog.scenarios) == 6
        assert catalog.scenarios[0].name == "noise@0.2"
        assert catalog.scenarios[5].name == "ramp@1.0"

    def test_empty_config_rejected(self):
        with pytest.raises(SpecValidationError):
            build_catalog({"scenarios": []})

    def test_duplicate_names_rejected(self):
        config = {
            "scenarios": [
                {"name": "n", "fault": "gaussian_noise", "severity": 0.5, "features": ["a"]},
                {"name": "n", "fault": "dropout", "severity": 0.5, "features": ["a"]},
            ]
        }
        with pytest.raises(SpecValidationError, match="'n'"):
            build_catalog(config)

    def test_round_trip(self, tmp_path):
        config = {
            "base_split": "test",
            "scenarios": [
                {"name": "noise", "fault": "gaussian_noise",
                 "severities": [0.5, 1.0], "features": ["a"], "seed": 4},
                {"name": "slice", "kind": "real_slice", "batch_id": "B1", "seed": 0},
            ],
        }
        catalog = build_catalog(config)
        path = tmp_path / "catalog.json"
        path.write_text(json.dumps(catalog.to_dict()), encoding="utf-8")
        assert load_catalog(str(path)) == catalog
