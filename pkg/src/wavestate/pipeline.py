"""Record preprocessing, tensor layouts and the trial-index train/test split."""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from .synthwave import LOADS_KN, PATHS, StateVector, TimeSeriesRecord, path_index

LAYOUTS = {1: "TypeI", 2: "TypeII", 3: "TypeIII"}


class DegenerateRecordError(ValueError):
    pass


class MissingPathError(KeyError):
    pass


def downsample(record, factor: int):
    """Keep every ``factor``-th sample. Works on arrays and on records."""
    if factor < 1:
        raise ValueError("factor must be a positive integer")
    if isinstance(record, TimeSeriesRecord):
        return TimeSeriesRecord(downsample(record.samples, factor), record.state, record.path, record.trial)
    y = np.asarray(record, dtype=np.float64)
    if y.shape[-1] % factor:
        raise ValueError(f"record length {y.shape[-1]} not divisible by {factor}")
    return y[..., ::factor].copy()


def standardize(record):
    """Zero mean, unit (population) std using the record's own statistics."""
    if isinstance(record, TimeSeriesRecord):
        return TimeSeriesRecord(standardize(record.samples), record.state, record.path, record.trial)
    y = np.asarray(record, dtype=np.float64)
    mu = y.mean()
    sigma = y.std()
    if not sigma > 0 or not np.isfinite(sigma):
        raise DegenerateRecordError("record has zero variance; cannot standardize")
    out = (y - mu) / sigma
    # second pass mops up rounding so repeated standardization is a fixed point
    return (out - out.mean()) / out.std()


def preprocess(records: list[TimeSeriesRecord], factor: int = 10) -> list[TimeSeriesRecord]:
    return [standardize(downsample(r, factor)) for r in records]


@dataclass
class InputTensor:
    layout: str
    data: np.ndarray = field(repr=False)
    labels: np.ndarray  # (B, 2) level/load, or (B, 3) with path for TypeI
    trials: np.ndarray  # (B,)

    def __len__(self) -> int:
        return self.data.shape[0]

    @property
    def model_type(self) -> int:
        return {v: k for k, v in LAYOUTS.items()}[self.layout]

    def states(self) -> list[tuple[int, int]]:
        return [(int(a), int(b)) for a, b in self.labels[:, :2]]

    def select(self, mask: np.ndarray) -> "InputTensor":
        return InputTensor(self.layout, self.data[mask], self.labels[mask], self.trials[mask])


def _layout_name(layout) -> str:
    if isinstance(layout, int):
        return LAYOUTS[layout]
    if layout not in LAYOUTS.values():
        raise ValueError(f"unknown layout {layout!r}")
    return layout


def build_tensor(records: list[TimeSeriesRecord], layout) -> InputTensor:
    """Stack preprocessed records into one of the three input layouts.

    TypeI: one row per record, ``(B, N)``, labels carry the path index.
    TypeII: one row per (state, trial), paths side by side, ``(B, N, 9)``.
    TypeIII: same rows folded to ``(B, N, 3, 3)`` as (actuator, receiver).
    """
    layout = _layout_name(layout)
    if layout == "TypeI":
        data = np.stack([r.samples for r in records]) if records else np.zeros((0, 0))
        labels = np.array([[r.state.k1, r.state.k2, path_index(r.path)] for r in records], dtype=np.float64)
        trials = np.array([r.trial for r in records], dtype=np.int64)
        return InputTensor(layout, data, labels.reshape(-1, 3), trials)

    groups: dict[tuple[int, int, int], dict[int, np.ndarray]] = defaultdict(dict)
    for r in records:
        groups[(r.state.k1, r.state.k2, r.trial)][path_index(r.path)] = r.samples
    rows, labels, trials = [], [], []
    for (k1, k2, trial) in sorted(groups):
        by_path = groups[(k1, k2, trial)]
        for p in range(1, 10):
            if p not in by_path:
                a, rcv = PATHS[p - 1]
                raise MissingPathError(f"state ({k1}, {k2} kN) trial {trial} has no record for path {a}-{rcv}")
        row = np.stack([by_path[p] for p in range(1, 10)], axis=-1)
        if layout == "TypeIII":
            row = row.reshape(row.shape[0], 3, 3)
        rows.append(row)
        labels.append((k1, k2))
        trials.append(trial)
    if not rows:
        return InputTensor(layout, np.zeros((0, 0, 9)), np.zeros((0, 2)), np.zeros(0, dtype=np.int64))
    return InputTensor(layout, np.stack(rows), np.array(labels, dtype=np.float64), np.array(trials, dtype=np.int64))


@dataclass(frozen=True)
class SplitSpec:
    train_trials: int = 8
    test_trials: int = 12
    per_load: tuple[tuple[int, int, int], ...] = ((20, 1, 1),)  # (load kN, train, test)
    exclude_train_loads: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        if self.train_trials < 1 or self.test_trials < 1:
            raise ValueError("train and test trial counts must both be >= 1")
        for load, tr, te in self.per_load:
            if tr < 1 or te < 1:
                raise ValueError(f"load {load} kN: counts must be >= 1")
        for load in self.exclude_train_loads:
            if load not in LOADS_KN:
                raise ValueError(f"excluded load {load} kN is not on the load grid")

    def counts(self, load_kn: int) -> tuple[int, int]:
        for load, tr, te in self.per_load:
            if load == load_kn:
                return tr, te
        return self.train_trials, self.test_trials

    @classmethod
    def scaled(cls, multiplier: float = 1.0, exclude_train_loads=()) -> "SplitSpec":
        """The 8/12 (and 1/1 at 20 kN) split, scaled with the dataset's trial multiplier."""
        from .synthwave import n_trials

        n = n_trials(0, multiplier)
        train = max(1, min(n - 1, int(math.floor(8 * n / 20 + 0.5))))
        n20 = n_trials(20, multiplier)
        train20 = max(1, n20 // 2)
        return cls(train, n - train, ((20, train20, n20 - train20),), tuple(exclude_train_loads))

    def with_excluded(self, *loads: int) -> "SplitSpec":
        return SplitSpec(self.train_trials, self.test_trials, self.per_load, tuple(loads))


def split(records: list[TimeSeriesRecord], spec: SplitSpec) -> tuple[list[TimeSeriesRecord], list[TimeSeriesRecord]]:
    """Lowest trial indices go to training, the next ones to testing."""
    trials_by_key: dict[tuple[int, int, int], list[int]] = defaultdict(list)
    for r in records:
        trials_by_key[(r.state.k1, r.state.k2, path_index(r.path))].append(r.trial)
    assign: dict[tuple[int, int, int], tuple[set[int], set[int]]] = {}
    for key, trials in trials_by_key.items():
        trials = sorted(set(trials))
        n_train, n_test = spec.counts(key[1])
        if n_train + n_test > len(trials):
            raise ValueError(
                f"split needs {n_train}+{n_test} trials but state ({key[0]}, {key[1]} kN) path {key[2]} has {len(trials)}"
            )
        assign[key] = (set(trials[:n_train]), set(trials[n_train : n_train + n_test]))
    train, test = [], []
    for r in records:
        tr, te = assign[(r.state.k1, r.state.k2, path_index(r.path))]
        if r.trial in tr:
            if r.state.k2 not in spec.exclude_train_loads:
                train.append(r)
        elif r.trial in te:
            test.append(r)
    return train, test


def prepare(records, spec: SplitSpec, layout, factor: int = 10) -> tuple[InputTensor, InputTensor]:
    """downsample -> standardize -> split -> tensorize."""
    train, test = split(preprocess(records, factor), spec)
    return build_tensor(train, layout), build_tensor(test, layout)


def state_of(label: np.ndarray) -> StateVector:
    path = int(label[2]) if len(label) > 2 else None
    return StateVector(int(label[0]), int(label[1]), path)
