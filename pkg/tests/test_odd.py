import numpy as np
import pytest

from iarc_kit.dataset import TimeSeriesDataset
from iarc_kit.density import GaussianKde1d
from iarc_kit.errors import ConfigError
from iarc_kit.odd import OddModel, coverage_fraction, fit_odd, membership

from oracles import trapezoid_integral


def feature_dataset(values, name="x") -> TimeSeriesDataset:
    values = np.asarray(values, dtype=float)
    return TimeSeriesDataset.from_arrays(
        "odd", [name], np.arange(float(len(values))), values.reshape(-1, 1)
    )


@pytest.fixture(scope="module")
def normal_model():
    rng = np.random.default_rng(1234)
    values = rng.normal(0.0, 1.0, 1000)
    ds = feature_dataset(values)
    return fit_odd(ds, q_odd=0.01), ds, values


class TestFit:
    def test_constant_feature_floored_bandwidth(self):
        model = fit_odd(feature_dataset([0.0, 0.0, 0.0]), q_odd=0.1)
        spec = model.features["x"]
        assert spec.kde.bandwidth > 0
        assert membership(model, {"x": 0.0}).inside

    def test_training_self_coverage(self, normal_model):
        model, ds, _ = normal_model
        # quantile discreteness slack: (1 - q_odd) - 2/n
        assert coverage_fraction(model, ds) >= (1 - 0.01) - 2 / 1000

    def test_manual_range_override(self):
        ds = feature_dataset([6.0, 6.5, 7.0, 7.5], name="pH")
        model = fit_odd(ds, q_odd=0.1, manual_ranges={"pH": (5.0, 7.0)})
        assert model.features["pH"].range_lo == 5.0
        assert model.features["pH"].range_hi == 7.0
        res = membership(model, {"pH": 7.4})
        assert not res.inside and res.violations[0][1] == "range"

    def test_manual_range_for_unknown_feature(self):
        ds = feature_dataset([6.0, 6.5, 7.0, 7.5])
        with pytest.raises(ConfigError):
            fit_odd(ds, q_odd=0.1, manual_ranges={"pH": (5.0, 7.0)})

    def test_entirely_missing_feature_excluded(self):
        ds = TimeSeriesDataset.from_arrays(
            "odd", ["x", "y"], [0.0, 1, 2], [[np.nan, 1], [np.nan, 2], [np.nan, 3]]
        )
        model = fit_odd(ds, q_odd=0.1)
        assert model.excluded_features == ("x",)
        assert "x" not in model.features

    def test_q_odd_bounds(self):
        ds = feature_dataset([1.0, 2.0, 3.0])
        for bad in (0.0, 1.0, -0.1):
            with pytest.raises(ConfigError):
                fit_odd(ds, q_odd=bad)

    def test_subsample_cap(self):
        rng = np.random.default_rng(0)
        ds = feature_dataset(rng.normal(0, 1, 800))
        model = fit_odd(ds, q_odd=0.05, max_sample=300, subsample_seed=9)
        assert len(model.features["x"].kde.sample) == 300


class TestMembership:
    def test_sample_mode_is_member(self, normal_model):
        model, _, values = normal_model
        mode = float(values[np.argmax(model.features["x"].kde.log_density(values))])
        assert membership(model, {"x": mode}).inside

    def test_far_point_fails_range(self, normal_model):
        model, _, _ = normal_model
        res = membership(model, {"x": 50.0})
        assert not res.inside
        assert res.violations == [("x", "range")]

    def test_density_valley_fails_density(self):
        rng = np.random.default_rng(5)
        values = np.concatenate([rng.normal(-5, 0.3, 400), rng.normal(5, 0.3, 400)])
        model = fit_odd(feature_dataset(values), q_odd=0.01)
        res = membership(model, {"x": 0.0})
        assert not res.inside
        assert res.violations == [("x", "density")]

    def test_missing_value_counts_as_violation(self, normal_model):
        model, _, _ = normal_model
        res = membership(model, {"x": float("nan")})
        assert not res.inside
        assert res.violations == [("x", "missing")]

    def test_deterministic(self, normal_model):
        model, _, _ = normal_model
        a = membership(model, {"x": 0.37})
        b = membership(model, {"x": 0.37})
        assert a == b


class TestCoverage:
    def test_shifted_dataset_scores_zero(self, normal_model):
        model, ds, values = normal_model
        shifted = feature_dataset(values + 100.0 * np.std(values))
        assert coverage_fraction(model, shifted) == 0.0

    def test_no_shared_features_is_zero_with_warning(self, normal_model):
        model, _, _ = normal_model
        other = TimeSeriesDataset.from_arrays("o", ["z"], [0.0], [[1.0]])
        with pytest.warns(UserWarning):
            assert coverage_fraction(model, other) == 0.0


class TestDensityEstimate:
    @pytest.mark.parametrize("seed,n", [(0, 20), (1, 200), (2, 1000)])
    def test_kde_integrates_to_one(self, seed, n):
        rng = np.random.default_rng(seed)
        sample = rng.normal(3.0, 2.0, n)
        kde = GaussianKde1d.fit(sample)
        lo = sample.min() - 5 * kde.bandwidth
        hi = sample.max() + 5 * kde.bandwidth
        grid = np.linspace(lo, hi, 10_000)
        mass = trapezoid_integral(grid, kde.density(grid))
        assert 0.99 <= mass <= 1.01

    def test_log_density_monotone_beyond_range(self, normal_model):
        model, _, values = normal_model
        kde = model.features["x"].kde
        grid = np.linspace(values.max(), values.max() + 6.0, 60)
        assert np.all(np.diff(kde.log_density(grid)) < 0)


class TestSerialization:
    def test_round_trip_preserves_membership(self, normal_model):
        model, ds, _ = normal_model
        clone = OddModel.from_dict(model.to_dict())
        probe = {"x": 1.234}
        assert membership(clone, probe) == membership(model, probe)
        assert coverage_fraction(clone, ds) == coverage_fraction(model, ds)
