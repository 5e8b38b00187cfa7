"""Leakage-safe train/validation/calibration/test partitioning.

Chronological splits place boundaries at floor(cumulative fraction * n) and
remove ``purge_gap`` rows from the head of each later split, so temporal
autocorrelation cannot leak across an edge. Group splits keep whole batches
together and never share a batch between splits.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dataset import TimeSeriesDataset
from .errors import ConfigError, InfeasibleSplitError, SpecValidationError

SPLIT_NAMES = ("train", "validation", "calibration", "test")


@dataclass(frozen=True)
class SplitConfig:
    fractions: dict[str, float]
    purge_gap: int = 0
    mode: str = "chronological"
    seed: int = 0

    def __post_init__(self):
        if self.mode not in ("chronological", "group"):
            raise ConfigError(f"unknown split mode {self.mode!r}")
        if set(self.fractions) != set(SPLIT_NAMES):
            raise ConfigError(f"fractions must map exactly {SPLIT_NAMES}")
        if any(f < 0 for f in self.fractions.values()):
            raise ConfigError("fractions must be non-negative")
        if abs(sum(self.fractions.values()) - 1.0) > 1e-9:
            raise ConfigError("fractions must sum to 1 within 1e-9")
        if self.purge_gap < 0:
            raise ConfigError("purge_gap must be non-negative")

    def ordered_fractions(self) -> list[float]:
        return [self.fractions[name] for name in SPLIT_NAMES]

    def to_dict(self) -> dict:
        return {
            "fractions": dict(self.fractions),
            "purge_gap": self.purge_gap,
            "mode": self.mode,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class SplitAssignment:
    """Disjoint row-index lists; union with the purged list covers all rows."""

    train: tuple[int, ...]
    validation: tuple[int, ...]
    calibration: tuple[int, ...]
    test: tuple[int, ...]
    purged: tuple[int, ...] = ()

    def split(self, name: str) -> tuple[int, ...]:
        if name not in SPLIT_NAMES:
            raise ConfigError(f"unknown split {name!r}")
        return getattr(self, name)

    def to_dict(self) -> dict:
        return {
            "train": list(self.train),
            "validation": list(self.validation),
            "calibration": list(self.calibration),
            "test": list(self.test),
            "purged": list(self.purged),
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "SplitAssignment":
        return cls(
            train=tuple(payload["train"]),
            validation=tuple(payload["validation"]),
            calibration=tuple(payload["calibration"]),
            test=tuple(payload["test"]),
            purged=tuple(payload.get("purged", ())),
        )


def chronological_split(ds: TimeSeriesDataset, cfg: SplitConfig) -> SplitAssignment:
    """Split time-ordered rows at floor(cumulative fraction * n) boundaries.

    Purge rows are taken from the start of each later split; the earlier
    split keeps its horizon intact. Raises InfeasibleSplitError when purging
    would empty a split that received rows.
    """
    if cfg.mode != "chronological":
        raise ConfigError("chronological_split requires mode='chronological'")
    if ds.n_rows > 1 and not np.all(np.diff(ds.timestamps) >= 0):
        raise ConfigError("rows are not globally time-ordered; use group mode")
    n = ds.n_rows
    fracs = cfg.ordered_fractions()
    bounds = [0]
    cumulative = 0.0
    for f in fracs:
        cumulative += f
        bounds.append(int(np.floor(cumulative * n + 1e-12)))
    bounds[-1] = n

    raw = [list(range(bounds[i], bounds[i + 1])) for i in range(4)]
    purged: list[int] = []
    seen_nonempty = False
    for k in range(4):
        if not raw[k]:
            continue
        if seen_nonempty and cfg.purge_gap > 0:
            cut = raw[k][: cfg.purge_gap]
            raw[k] = raw[k][cfg.purge_gap:]
            purged.extend(cut)
            if not raw[k] and fracs[k] > 0:
                raise InfeasibleSplitError(
                    f"purge_gap={cfg.purge_gap} empties the {SPLIT_NAMES[k]} split"
                )
        if raw[k]:
            seen_nonempty = True
    return SplitAssignment(
        train=tuple(raw[0]),
        validation=tuple(raw[1]),
        calibration=tuple(raw[2]),
        test=tuple(raw[3]),
        purged=tuple(purged),
    )


def group_split(ds: TimeSeriesDataset, cfg: SplitConfig) -> SplitAssignment:
    """Assign whole batches to splits; no batch appears in more than one split.

    Batches are shuffled with the configured seed, then ordered by
    descending size (shuffle order breaking ties) and assigned greedily to
    each split in turn until its row-count target is reached or exceeded.
    Remaining batches land in the last split with a positive fraction.
    """
    if cfg.mode != "group":
        raise ConfigError("group_split requires mode='group'")
    if ds.batch_ids is None:
        raise ConfigError("group split requires a dataset with batch_ids")
    n = ds.n_rows
    batch_arr = np.asarray(ds.batch_ids)
    unique_batches = sorted(set(ds.batch_ids))
    rng = np.random.default_rng(cfg.seed)
    shuffled = [unique_batches[i] for i in rng.permutation(len(unique_batches))]
    sizes = {b: int(np.sum(batch_arr == b)) for b in unique_batches}
    ordered = sorted(shuffled, key=lambda b: -sizes[b])  # stable: ties keep shuffle order

    eligible = [k for k in range(4) if cfg.ordered_fractions()[k] > 0]
    if len(ordered) < len(eligible):
        raise InfeasibleSplitError(
            f"{len(ordered)} batches cannot fill {len(eligible)} non-empty splits"
        )
    targets = {k: cfg.ordered_fractions()[k] * n for k in eligible}
    assigned: dict[int, list[str]] = {k: [] for k in range(4)}
    counts = {k: 0 for k in eligible}
    pointer = 0
    for b in ordered:
        while (
            pointer < len(eligible) - 1
            and counts[eligible[pointer]] >= targets[eligible[pointer]]
        ):
            pointer += 1
        k = eligible[pointer]
        assigned[k].append(b)
        counts[k] += sizes[b]

    index_lists: list[tuple[int, ...]] = []
    for k in range(4):
        members = set(assigned[k])
        idx = [i for i in range(n) if ds.batch_ids[i] in members]
        index_lists.append(tuple(idx))
    return SplitAssignment(
        train=index_lists[0],
        validation=index_lists[1],
        calibration=index_lists[2],
        test=index_lists[3],
    )


def make_split(ds: TimeSeriesDataset, cfg: SplitConfig) -> SplitAssignment:
    if cfg.mode == "group":
        return group_split(ds, cfg)
    return chronological_split(ds, cfg)


@dataclass(frozen=True)
class SplitCheck:
    ok: bool
    violations: list[str] = field(default_factory=list)


def _preview(indices) -> str:
    listed = list(indices)[:10]
    suffix = ", ..." if len(indices) > 10 else ""
    return "[" + ", ".join(str(i) for i in listed) + suffix + "]"


def validate_splits(
    ds: TimeSeriesDataset, sa: SplitAssignment, cfg: SplitConfig
) -> SplitCheck:
    """Check every split invariant; failures list each violation with indices."""
    violations: list[str] = []
    parts = {name: set(sa.split(name)) for name in SPLIT_NAMES}
    parts["purged"] = set(sa.purged)

    names = list(parts)
    for i, a in enumerate(names):
        for b in names[i + 1:]:
            overlap = parts[a] & parts[b]
            if overlap:
                violations.append(
                    f"overlap between {a} and {b}: {_preview(sorted(overlap))}"
                )
    union = set().union(*parts.values())
    expected = set(range(ds.n_rows))
    if union != expected:
        missing = sorted(expected - union)
        extra = sorted(union - expected)
        if missing:
            violations.append(f"rows not assigned to any split: {_preview(missing)}")
        if extra:
            violations.append(f"indices outside the dataset: {_preview(extra)}")

    if cfg.mode == "chronological":
        ordered_nonempty = [name for name in SPLIT_NAMES if parts[name]]
        for earlier, later in zip(ordered_nonempty, ordered_nonempty[1:]):
            hi = max(parts[earlier])
            lo = min(parts[later])
            if hi >= lo:
                violations.append(
                    f"{earlier} (max index {hi}) does not precede {later} (min index {lo})"
                )
                continue
            between = set(range(hi + 1, lo))
            if len(between) < cfg.purge_gap:
                violations.append(
                    f"only {len(between)} rows between {earlier} and {later}, "
                    f"purge_gap={cfg.purge_gap}"
                )
            not_purged = between - parts["purged"]
            if not_purged:
                violations.append(
                    f"rows between {earlier} and {later} not purged: "
                    f"{_preview(sorted(not_purged))}"
                )
    elif cfg.mode == "group":
        if ds.batch_ids is None:
            violations.append("group assignment on a dataset without batch_ids")
        else:
            owner: dict[str, str] = {}
            for name in SPLIT_NAMES:
                for i in parts[name]:
                    b = ds.batch_ids[i]
                    if b in owner and owner[b] != name:
                        violations.append(
                            f"batch {b!r} appears in both {owner[b]} and {name}"
                        )
                        break
                    owner[b] = name
        if parts["purged"]:
            violations.append("group mode must not purge rows")

    return SplitCheck(ok=not violations, violations=violations)
