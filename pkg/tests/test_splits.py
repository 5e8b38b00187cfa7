import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from iarc_kit.dataset import TimeSeriesDataset
from iarc_kit.errors import InfeasibleSplitError
from iarc_kit.splits import (
    SplitAssignment,
    SplitConfig,
    chronological_split,
    group_split,
    validate_splits,
)


def fractions(train, validation, calibration, test):
    return {
        "train": train,
        "validation": validation,
        "calibration": calibration,
        "test": test,
    }


def row_dataset(n: int) -> TimeSeriesDataset:
    return TimeSeriesDataset.from_arrays(
        "rows", ["x"], np.arange(float(n)), np.arange(float(n)).reshape(-1, 1)
    )


def batch_dataset(batch_sizes: list[int]) -> TimeSeriesDataset:
    timestamps, batches, values = [], [], []
    t = 0.0
    for i, size in enumerate(batch_sizes):
        for _ in range(size):
            timestamps.append(t)
            batches.append(f"B{i}")
            values.append([t])
            t += 1.0
    return TimeSeriesDataset.from_arrays("batches", ["x"], timestamps, values, batches)


class TestChronological:
    def test_floor_boundaries(self):
        cfg = SplitConfig(fractions=fractions(0.5, 0.2, 0.0, 0.3))
        sa = chronological_split(row_dataset(10), cfg)
        assert sa.train == (0, 1, 2, 3, 4)
        assert sa.validation == (5, 6)
        assert sa.calibration == ()
        assert sa.test == (7, 8, 9)
        assert sa.purged == ()

    def test_purge_from_later_split_head(self):
        cfg = SplitConfig(fractions=fractions(0.5, 0.2, 0.0, 0.3), purge_gap=1)
        sa = chronological_split(row_dataset(10), cfg)
        assert sa.train == (0, 1, 2, 3, 4)
        assert sa.validation == (6,)
        assert sa.test == (8, 9)
        assert sa.purged == (5, 7)

    def test_degenerate_all_train(self):
        cfg = SplitConfig(fractions=fractions(1.0, 0.0, 0.0, 0.0))
        sa = chronological_split(row_dataset(4), cfg)
        assert sa.train == (0, 1, 2, 3)
        assert sa.validation == sa.calibration == sa.test == ()

    def test_purge_emptying_split_is_infeasible(self):
        cfg = SplitConfig(fractions=fractions(0.5, 0.1, 0.0, 0.4), purge_gap=2)
        with pytest.raises(InfeasibleSplitError):
            chronological_split(row_dataset(10), cfg)

    def test_train_precedes_test_in_time(self):
        cfg = SplitConfig(fractions=fractions(0.6, 0.0, 0.0, 0.4), purge_gap=2)
        ds = row_dataset(30)
        sa = chronological_split(ds, cfg)
        assert max(ds.timestamps[list(sa.train)]) < min(ds.timestamps[list(sa.test)])


class TestGroup:
    def test_single_batch_all_train(self):
        ds = batch_dataset([6])
        cfg = SplitConfig(fractions=fractions(1.0, 0.0, 0.0, 0.0), mode="group", seed=3)
        sa = group_split(ds, cfg)
        assert len(sa.train) == 6
        assert sa.purged == ()

    def test_deterministic_for_seed(self):
        ds = batch_dataset([5, 5, 5, 5, 5])
        cfg = SplitConfig(
            fractions=fractions(0.4, 0.2, 0.2, 0.2), mode="group", seed=123
        )
        assert group_split(ds, cfg) == group_split(ds, cfg)

    def test_equal_batches_greedy_counts(self):
        # four equal batches at {0.5, 0.25, 0, 0.25}: the greedy rule fills
        # train with two batches, validation and test with one each
        ds = batch_dataset([10, 10, 10, 10])
        cfg = SplitConfig(
            fractions=fractions(0.5, 0.25, 0.0, 0.25), mode="group", seed=99
        )
        sa = group_split(ds, cfg)
        sizes = (len(sa.train), len(sa.validation), len(sa.calibration), len(sa.test))
        assert sizes == (20, 10, 0, 10)

    def test_too_few_batches(self):
        ds = batch_dataset([4, 4])
        cfg = SplitConfig(
            fractions=fractions(0.4, 0.3, 0.0, 0.3), mode="group", seed=1
        )
        with pytest.raises(InfeasibleSplitError):
            group_split(ds, cfg)


class TestValidateSplits:
    def test_constructed_chronological_passes(self):
        cfg = SplitConfig(fractions=fractions(0.5, 0.2, 0.1, 0.2), purge_gap=2)
        ds = row_dataset(40)
        sa = chronological_split(ds, cfg)
        assert validate_splits(ds, sa, cfg).ok

    def test_overlap_detected(self):
        ds = row_dataset(6)
        sa = SplitAssignment(train=(0, 1, 2, 3), validation=(), calibration=(), test=(3, 4, 5))
        cfg = SplitConfig(fractions=fractions(0.7, 0.0, 0.0, 0.3))
        check = validate_splits(ds, sa, cfg)
        assert not check.ok
        assert any("overlap" in v for v in check.violations)

    def test_purge_violation_detected(self):
        ds = row_dataset(10)
        sa = SplitAssignment(
            train=(0, 1, 2, 3, 4), validation=(5, 6), calibration=(), test=(7, 8, 9)
        )
        cfg = SplitConfig(fractions=fractions(0.5, 0.2, 0.0, 0.3), purge_gap=2)
        check = validate_splits(ds, sa, cfg)
        assert not check.ok
        assert any("purge" in v or "between" in v for v in check.violations)

    def test_group_batch_leak_detected(self):
        ds = batch_dataset([3, 3])
        sa = SplitAssignment(train=(0, 1, 2, 3), validation=(), calibration=(), test=(4, 5))
        cfg = SplitConfig(fractions=fractions(0.5, 0.0, 0.0, 0.5), mode="group", seed=0)
        check = validate_splits(ds, sa, cfg)
        assert not check.ok
        assert any("batch" in v for v in check.violations)


@st.composite
def split_setups(draw):
    n = draw(st.integers(min_value=8, max_value=150))
    weights = [draw(st.integers(min_value=0, max_value=10)) for _ in range(4)]
    if sum(weights) == 0:
        weights[0] = 1
    total = sum(weights)
    fracs = [w / total for w in weights]
    fracs[3] = 1.0 - sum(fracs[:3])  # keep the exact-sum invariant
    purge = draw(st.integers(min_value=0, max_value=3))
    return n, fracs, purge


class TestProperties:
    @given(split_setups())
    @settings(max_examples=120, deadline=None)
    def test_chronological_round_trip(self, setup):
        n, fracs, purge = setup
        cfg = SplitConfig(fractions=fractions(*fracs), purge_gap=purge)
        ds = row_dataset(n)
        try:
            sa = chronological_split(ds, cfg)
        except InfeasibleSplitError:
            return
        check = validate_splits(ds, sa, cfg)
        assert check.ok, check.violations

    @given(
        st.integers(min_value=0, max_value=2**32 - 1),
        st.lists(st.integers(min_value=1, max_value=12), min_size=4, max_size=10),
    )
    @settings(max_examples=60, deadline=None)
    def test_group_batches_disjoint_for_all_seeds(self, seed, sizes):
        ds = batch_dataset(sizes)
        cfg = SplitConfig(
            fractions=fractions(0.4, 0.2, 0.2, 0.2), mode="group", seed=seed
        )
        try:
            sa = group_split(ds, cfg)
        except InfeasibleSplitError:
            return
        seen: dict[str, str] = {}
        for name in ("train", "validation", "calibration", "test"):
            for idx in sa.split(name):
                batch = ds.batch_ids[idx]
                assert seen.setdefault(batch, name) == name
        check = validate_splits(ds, sa, cfg)
        assert check.ok, check.violations
