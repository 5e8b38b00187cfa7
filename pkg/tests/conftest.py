import numpy as np
import pytest

from iarc_kit.dataset import TimeSeriesDataset


@pytest.fixture
def simple_dataset() -> TimeSeriesDataset:
    rng = np.random.default_rng(7)
    n = 40
    return TimeSeriesDataset.from_arrays(
        name="simple",
        feature_names=["a", "b"],
        timestamps=np.arange(n, dtype=float),
        values=np.column_stack([rng.normal(0, 1, n), rng.normal(5, 2, n)]),
    )


@pytest.fixture
def batched_dataset() -> TimeSeriesDataset:
    rng = np.random.default_rng(11)
    rows, batches = [], []
    timestamps = []
    for b in range(4):
        for t in range(10):
            rows.append([rng.normal(0, 1), rng.normal(5, 2)])
            batches.append(f"B{b}")
            timestamps.append(float(t))
    return TimeSeriesDataset.from_arrays(
        name="batched",
        feature_names=["a", "b"],
        timestamps=timestamps,
        values=rows,
        batch_ids=batches,
    )


def write_lines(path, lines):
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return str(path)
