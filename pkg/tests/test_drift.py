import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from iarc_kit.dataset import TimeSeriesDataset
from iarc_kit.drift import (
    DivergenceReport,
    kde_overlay,
    ks_statistic,
    scenario_divergence,
    wasserstein1,
)
from iarc_kit.errors import ConfigError, UndefinedStatisticError

from oracles import ks_bruteforce, trapezoid_integral, wasserstein_bruteforce

samples = st.lists(
    st.floats(min_value=-1e6, max_value=1e6, allow_nan=False, allow_infinity=False),
    min_size=1,
    max_size=40,
)


class TestKs:
    def test_identical_samples(self):
        assert ks_statistic([1, 2, 3], [1, 2, 3]) == 0.0

    def test_disjoint_supports(self):
        assert ks_statistic([0, 0], [1, 1]) == 1.0

    def test_quarter_shift(self):
        # pooled-grid ECDF difference peaks at 0.25 for these samples
        assert ks_statistic([1, 2, 3, 4], [2, 3, 4, 5]) == pytest.approx(0.25, abs=1e-15)

    def test_missing_dropped_then_empty_errors(self):
        assert ks_statistic([1.0, np.nan], [1.0]) == 0.0
        with pytest.raises(UndefinedStatisticError):
            ks_statistic([np.nan], [1.0])

    @given(samples, samples)
    @settings(max_examples=80, deadline=None)
    def test_matches_bruteforce(self, a, b):
        assert ks_statistic(a, b) == pytest.approx(ks_bruteforce(a, b), abs=1e-12)

    @given(samples, samples)
    @settings(max_examples=40, deadline=None)
    def test_symmetry_and_range(self, a, b):
        d = ks_statistic(a, b)
        assert d == ks_statistic(b, a)
        assert 0.0 <= d <= 1.0


class TestWasserstein:
    def test_identical_samples(self):
        assert wasserstein1([4, 5, 6], [4, 5, 6]) == 0.0

    def test_unit_translation(self):
        assert wasserstein1([0, 0], [1, 1]) == pytest.approx(1.0, abs=1e-15)

    def test_translation_property(self):
        rng = np.random.default_rng(0)
        a = rng.normal(0, 1, 31)
        assert wasserstein1(a, a + 2.5) == pytest.approx(2.5, abs=1e-9)

    @given(samples, samples)
    @settings(max_examples=80, deadline=None)
    def test_matches_bruteforce(self, a, b):
        assert wasserstein1(a, b) == pytest.approx(
            wasserstein_bruteforce(a, b), rel=1e-9, abs=1e-9
        )

    @given(samples, samples, samples)
    @settings(max_examples=40, deadline=None)
    def test_triangle_inequality(self, a, b, c):
        assert wasserstein1(a, c) <= wasserstein1(a, b) + wasserstein1(b, c) + 1e-9

    @given(samples, samples, st.floats(min_value=-100, max_value=100))
    @settings(max_examples=40, deadline=None)
    def test_scale_property(self, a, b, k):
        a = np.asarray(a)
        b = np.asarray(b)
        assert wasserstein1(k * a, k * b) == pytest.approx(
            abs(k) * wasserstein1(a, b), rel=1e-9, abs=1e-9
        )


def two_feature_dataset(x, y, name="ds"):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return TimeSeriesDataset.from_arrays(
        name, ["f1", "f2"], np.arange(float(len(x))), np.column_stack([x, y])
    )


class TestScenarioDivergence:
    def test_identical_datasets_all_zero(self):
        rng = np.random.default_rng(1)
        ds = two_feature_dataset(rng.normal(0, 1, 50), rng.normal(0, 1, 50))
        report = scenario_divergence(ds, ds, scenario_name="same")
        assert all(d.ks_statistic == 0.0 for d in report.per_feature.values())
        assert report.ranking == ("f1", "f2")  # ties broken by name
        assert report.score == 0.0

    def test_shifted_feature_ranked_first(self):
        rng = np.random.default_rng(2)
        x = rng.normal(0, 1, 300)
        y = rng.normal(0, 1, 300)
        train = two_feature_dataset(x, y)
        scenario = two_feature_dataset(x, y + 2.0 * np.std(y), name="shifted")
        report = scenario_divergence(train, scenario)
        assert report.ranking[0] == "f2"
        assert report.per_feature["f2"].normalized_wasserstein > 1.0

    def test_missing_feature_skipped_with_warning(self):
        rng = np.random.default_rng(3)
        train = two_feature_dataset(rng.normal(0, 1, 30), rng.normal(0, 1, 30))
        scenario = TimeSeriesDataset.from_arrays(
            "s", ["f1"], np.arange(30.0), rng.normal(0, 1, 30).reshape(-1, 1)
        )
        report = scenario_divergence(train, scenario)
        assert "f2" not in report.per_feature
        assert any("f2" in w for w in report.warnings)

    def test_no_shared_features(self):
        a = TimeSeriesDataset.from_arrays("a", ["x"], [0.0], [[1]])
        b = TimeSeriesDataset.from_arrays("b", ["y"], [0.0], [[1]])
        with pytest.raises(ConfigError):
            scenario_divergence(a, b)

    def test_round_trip(self):
        rng = np.random.default_rng(4)
        train = two_feature_dataset(rng.normal(0, 1, 40), rng.normal(0, 1, 40))
        scenario = two_feature_dataset(rng.normal(1, 1, 40), rng.normal(0, 1, 40))
        report = scenario_divergence(train, scenario)
        assert DivergenceReport.from_dict(report.to_dict()) == report


class TestKdeOverlay:
    def test_identical_samples_identical_curves(self):
        rng = np.random.default_rng(5)
        sample = rng.normal(0, 1, 100)
        overlay = kde_overlay(sample, sample.copy())
        assert np.array_equal(overlay.base_density, overlay.scenario_density)

    def test_curves_are_densities(self):
        rng = np.random.default_rng(6)
        overlay = kde_overlay(rng.normal(0, 1, 200), rng.normal(3, 2, 150), grid_points=800)
        assert np.all(overlay.base_density >= 0)
        for curve in (overlay.base_density, overlay.scenario_density):
            assert trapezoid_integral(overlay.grid, curve) == pytest.approx(1.0, abs=0.01)

    def test_disjoint_samples_disjoint_modes(self):
        rng = np.random.default_rng(7)
        overlay = kde_overlay(rng.normal(0, 0.5, 100), rng.normal(1000, 0.5, 100))
        product = overlay.base_density * overlay.scenario_density
        assert float(product.max()) < 1e-8
