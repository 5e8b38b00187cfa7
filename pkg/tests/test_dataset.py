import json
import math

import numpy as np
import pytest

from iarc_kit.dataset import (
    TimeSeriesDataset,
    compute_quality,
    load_csv,
    windowed_drift_scan,
    write_csv,
)
from iarc_kit.errors import ConfigError, EmptyDatasetError, ParseError

from conftest import write_lines
from oracles import ks_bruteforce


class TestLoadCsv:
    def test_complete_file(self, tmp_path):
        path = write_lines(
            tmp_path / "d.csv",
            ["t,pH,temp", "0,7.0,20", "1,7.1,21", "2,7.2,22"],
        )
        ds = load_csv(path, timestamp_column="t")
        assert ds.n_rows == 3
        assert ds.feature_names == ("pH", "temp")
        report = compute_quality(ds, "raw")
        assert all(st.missingness_rate == 0.0 for st in report.features.values())

    def test_deterministic_version(self, tmp_path):
        path = write_lines(tmp_path / "d.csv", ["t,x", "0,1.5", "1,2.5"])
        assert load_csv(path, "t").dataset_version == load_csv(path, "t").dataset_version

    def test_missing_cell_counts(self, tmp_path):
        path = write_lines(
            tmp_path / "d.csv",
            ["t,pH", "0,7.0", "1,", "2,7.2", "3,7.3"],
        )
        report = compute_quality(load_csv(path, "t"), "raw")
        assert report.features["pH"].missingness_rate == 0.25

    def test_nan_token_is_missing(self, tmp_path):
        path = write_lines(tmp_path / "d.csv", ["t,x", "0,NaN", "1,2"])
        ds = load_csv(path, "t")
        assert math.isnan(ds.values[0, 0])

    def test_malformed_cell_names_row_and_column(self, tmp_path):
        path = write_lines(tmp_path / "d.csv", ["t,x", "0,1", "1,oops"])
        with pytest.raises(ParseError, match=r"row 2.*'x'"):
            load_csv(path, "t")

    def test_missing_timestamp_column(self, tmp_path):
        path = write_lines(tmp_path / "d.csv", ["a,b", "1,2"])
        with pytest.raises(ConfigError, match="timestamp"):
            load_csv(path, "time")

    def test_zero_rows(self, tmp_path):
        path = write_lines(tmp_path / "d.csv", ["t,x"])
        with pytest.raises(EmptyDatasetError):
            load_csv(path, "t")

    def test_iso_timestamps(self, tmp_path):
        path = write_lines(
            tmp_path / "d.csv",
            ["t,x", "2024-01-01T00:00:00,1", "2024-01-01T00:01:00,2"],
        )
        ds = load_csv(path, "t")
        assert ds.timestamps[1] - ds.timestamps[0] == 60.0

    def test_stable_sort_by_batch_then_time(self, tmp_path):
        path = write_lines(
            tmp_path / "d.csv",
            ["t,batch,x", "5,B2,1", "0,B1,2", "3,B1,3", "1,B2,4"],
        )
        ds = load_csv(path, "t", batch_column="batch")
        assert ds.batch_ids == ("B1", "B1", "B2", "B2")
        assert list(ds.timestamps) == [0.0, 3.0, 1.0, 5.0]

    def test_write_read_round_trip_preserves_version(self, tmp_path, batched_dataset):
        out = tmp_path / "round.csv"
        write_csv(batched_dataset, str(out))
        reloaded = load_csv(str(out), "timestamp", batch_column="batch_id")
        assert reloaded.dataset_version == batched_dataset.dataset_version

    def test_column_order_changes_version(self):
        ts = [0.0, 1.0]
        ds_ab = TimeSeriesDataset.from_arrays("d", ["a", "b"], ts, [[1, 2], [3, 4]])
        ds_ba = TimeSeriesDataset.from_arrays("d", ["b", "a"], ts, [[2, 1], [4, 3]])
        assert ds_ab.dataset_version != ds_ba.dataset_version


class TestQuality:
    def test_constant_column(self):
        ds = TimeSeriesDataset.from_arrays("d", ["x"], [0.0, 1, 2], [[5], [5], [5]])
        st = compute_quality(ds, "raw").features["x"]
        assert st.std == 0.0 and st.min == 5.0 and st.max == 5.0

    def test_half_missing(self):
        ds = TimeSeriesDataset.from_arrays("d", ["x"], [0.0, 1], [[1], [np.nan]])
        st = compute_quality(ds, "raw").features["x"]
        assert st.missingness_rate == 0.5
        assert st.count == 1

    def test_median_linear_interpolation(self):
        # frozen: np.quantile([1,2,3,4], 0.5) under the linear rule is 2.5
        ds = TimeSeriesDataset.from_arrays(
            "d", ["x"], [0.0, 1, 2, 3], [[1], [2], [3], [4]]
        )
        assert compute_quality(ds, "raw").features["x"].p50 == 2.5

    def test_entirely_missing_feature_flagged(self):
        ds = TimeSeriesDataset.from_arrays(
            "d", ["x", "y"], [0.0, 1], [[np.nan, 1], [np.nan, 2]]
        )
        report = compute_quality(ds, "raw")
        assert report.features["x"].defined is False
        assert report.features["x"].mean is None
        assert report.features["y"].defined is True

    def test_quantile_ordering(self, simple_dataset):
        st = compute_quality(simple_dataset, "raw").features["a"]
        assert st.min <= st.p25 <= st.p50 <= st.p75 <= st.max

    def test_pure_function(self, simple_dataset):
        r1 = json.dumps(compute_quality(simple_dataset, "raw").to_dict(), sort_keys=True)
        r2 = json.dumps(compute_quality(simple_dataset, "raw").to_dict(), sort_keys=True)
        assert r1 == r2

    def test_duplicate_timestamps_counted(self):
        ds = TimeSeriesDataset.from_arrays("d", ["x"], [0.0, 0.0, 1.0], [[1], [2], [3]])
        assert compute_quality(ds, "raw").duplicate_timestamp_count == 1

    def test_stage_validated(self, simple_dataset):
        with pytest.raises(ConfigError):
            compute_quality(simple_dataset, "final")


class TestWindowedDriftScan:
    def test_constant_series_all_zero(self):
        ds = TimeSeriesDataset.from_arrays(
            "d", ["x"], np.arange(12.0), [[3.0]] * 12
        )
        for stats in windowed_drift_scan(ds, 4).values():
            assert stats == [0.0, 0.0, 0.0]

    def test_step_series_is_one(self):
        ds = TimeSeriesDataset.from_arrays(
            "d", ["x"], np.arange(8.0), [[0], [0], [0], [0], [1], [1], [1], [1]]
        )
        assert windowed_drift_scan(ds, 2)["x"] == [1.0]

    def test_linear_ramp_matches_bruteforce(self):
        values = np.arange(1.0, 101.0)
        ds = TimeSeriesDataset.from_arrays(
            "d", ["x"], np.arange(100.0), values.reshape(-1, 1)
        )
        got = windowed_drift_scan(ds, 2)["x"][0]
        expected = ks_bruteforce(values[:50], values[50:])
        assert expected == 1.0
        assert got == pytest.approx(expected, abs=1e-12)

    def test_bounds_and_errors(self, simple_dataset):
        stats = windowed_drift_scan(simple_dataset, 5)
        for per_feature in stats.values():
            assert len(per_feature) == 4
            assert all(0.0 <= s <= 1.0 for s in per_feature)
        with pytest.raises(ConfigError):
            windowed_drift_scan(simple_dataset, 1)
        with pytest.raises(ConfigError):
            windowed_drift_scan(simple_dataset, simple_dataset.n_rows + 1)
