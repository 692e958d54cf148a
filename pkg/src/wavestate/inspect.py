"""Testing-phase branches (signal -> state, state -> signal) and their metrics."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .models import Cae, Ffnn
from .synthwave import DAMAGE_LEVELS, LOADS_KN, StateVector
from .trainer import rmse  # noqa: F401  (re-exported metric)

LEVEL_GRID = np.array(DAMAGE_LEVELS, dtype=np.float64)
LOAD_STEP = 5.0


def round_level(x):
    """Nearest damage level in 0..4; halves go up."""
    return np.clip(np.floor(np.asarray(x, dtype=np.float64) + 0.5), 0, 4).astype(int)


def round_load(x):
    """Nearest point of the 0, 5, ..., 20 kN grid; halves (e.g. 12.5) go up."""
    x = np.asarray(x, dtype=np.float64)
    return (np.clip(np.floor(x / LOAD_STEP + 0.5), 0, 4) * LOAD_STEP).astype(int)


def round_path(x):
    return np.clip(np.floor(np.asarray(x, dtype=np.float64) + 0.5), 1, 9).astype(int)


def round_state(raw: np.ndarray) -> np.ndarray:
    raw = np.atleast_2d(np.asarray(raw, dtype=np.float64))
    cols = [round_level(raw[:, 0]), round_load(raw[:, 1])]
    if raw.shape[1] > 2:
        cols.append(round_path(raw[:, 2]))
    return np.stack(cols, axis=1)


@dataclass
class StateEstimate:
    raw: np.ndarray  # (B, 2|3) real-valued predictions
    rounded: np.ndarray = field(init=False)  # (B, 2|3) grid values

    def __post_init__(self) -> None:
        self.raw = np.atleast_2d(np.asarray(self.raw, dtype=np.float64))
        self.rounded = round_state(self.raw)

    def __len__(self) -> int:
        return len(self.raw)

    def states(self) -> list[StateVector]:
        return [StateVector(int(r[0]), int(r[1]), int(r[2]) if len(r) > 2 else None) for r in self.rounded]


def latent_features(cae: Cae, rows: np.ndarray) -> np.ndarray:
    z = cae.encode(rows)
    single = z.shape == cae.spec.latent_shape
    z = z[None] if single else z
    return z.reshape(len(z), -1)


def estimate_state(cae: Cae, ffnn1: Ffnn, rows: np.ndarray) -> StateEstimate:
    """Encoder then the estimation FFNN; one row or a batch."""
    return StateEstimate(ffnn1(latent_features(cae, rows)))


def _state_input(state, model_type: int) -> np.ndarray:
    if isinstance(state, StateVector):
        if model_type == 1 and state.path is None:
            raise ValueError("Type I generation needs a path index")
        vec = state.as_array() if model_type == 1 else np.array([state.k1, state.k2], dtype=np.float64)
        return vec
    vec = np.asarray(state, dtype=np.float64)
    sv = StateVector(int(vec[0]), int(vec[1]), int(vec[2]) if len(vec) > 2 else None)  # validates the grid
    if np.any(vec != np.round(vec)):
        raise ValueError(f"state {vec} is off the grid")
    return _state_input(sv, model_type)


def reconstruct_signal(ffnn2: Ffnn, cae: Cae, state) -> np.ndarray:
    """Generate a row in the model's layout for a grid state (path needed for Type I)."""
    if isinstance(state, (list, tuple)) and state and isinstance(state[0], (StateVector, np.ndarray, list, tuple)):
        return np.stack([reconstruct_signal(ffnn2, cae, s) for s in state])
    vec = _state_input(state, cae.spec.model_type)
    z = ffnn2(vec).reshape(cae.spec.latent_shape)
    return cae.decode(z)[..., 0]


def rss_sss(original, reconstructed) -> float:
    """Residual over signal sum of squares, in percent."""
    y = np.asarray(original, dtype=np.float64).ravel()
    yh = np.asarray(reconstructed, dtype=np.float64).ravel()
    if y.shape != yh.shape:
        raise ValueError(f"length mismatch {y.size} vs {yh.size}")
    energy = float(np.sum(y * y))
    if energy <= 0:
        raise ValueError("original signal has zero energy")
    return 100.0 * float(np.sum((y - yh) ** 2)) / energy


def rss_sss_batch(original: np.ndarray, reconstructed: np.ndarray, axis: int = -1) -> np.ndarray:
    y = np.asarray(original, dtype=np.float64)
    yh = np.asarray(reconstructed, dtype=np.float64)
    energy = np.sum(y * y, axis=axis)
    if np.any(energy <= 0):
        raise ValueError("original signal has zero energy")
    return 100.0 * np.sum((y - yh) ** 2, axis=axis) / energy


# ---------------------------------------------------------------- summaries


@dataclass
class StateSummary:
    level_mean: dict[int, float]
    level_std: dict[int, float]
    load_mean: dict[int, float]
    load_std: dict[int, float]
    accuracy_by_state: dict[tuple[int, int], float]
    accuracy: float
    n: int

    def table_rows(self) -> list[list]:
        """Level block then load block, each with mean and STD rows."""
        rows = [["Level"] + list(DAMAGE_LEVELS)]
        rows.append(["mean"] + [self.level_mean.get(k, float("nan")) for k in DAMAGE_LEVELS])
        rows.append(["STD"] + [self.level_std.get(k, float("nan")) for k in DAMAGE_LEVELS])
        rows.append(["Load(kN)"] + list(LOADS_KN))
        rows.append(["mean"] + [self.load_mean.get(k, float("nan")) for k in LOADS_KN])
        rows.append(["STD"] + [self.load_std.get(k, float("nan")) for k in LOADS_KN])
        return rows

    def to_dict(self) -> dict:
        return {
            "level_mean": {str(k): v for k, v in self.level_mean.items()},
            "level_std": {str(k): v for k, v in self.level_std.items()},
            "load_mean": {str(k): v for k, v in self.load_mean.items()},
            "load_std": {str(k): v for k, v in self.load_std.items()},
            "accuracy_by_state": {f"{a},{b}": v for (a, b), v in self.accuracy_by_state.items()},
            "accuracy": self.accuracy,
            "n": self.n,
        }


def summarize(estimates: StateEstimate, truth: np.ndarray) -> StateSummary:
    """Per-level and per-load mean/std of raw predictions plus exact-match accuracy.

    Level statistics pool every row whose true level is ``k`` (all loads), and
    likewise for loads. Accuracy counts a row as correct when both rounded
    level and rounded load match.
    """
    truth = np.atleast_2d(np.asarray(truth, dtype=np.float64))
    if len(truth) == 0:
        raise ValueError("cannot summarize an empty test set")
    if len(truth) != len(estimates):
        raise ValueError("estimates and ground truth differ in length")
    raw = estimates.raw
    hit = np.all(estimates.rounded[:, :2] == truth[:, :2].astype(int), axis=1)
    lm, ls, dm, ds = {}, {}, {}, {}
    for k in DAMAGE_LEVELS:
        sel = truth[:, 0] == k
        if sel.any():
            lm[k] = float(raw[sel, 0].mean())
            ls[k] = float(raw[sel, 0].std())
    for k in LOADS_KN:
        sel = truth[:, 1] == k
        if sel.any():
            dm[k] = float(raw[sel, 1].mean())
            ds[k] = float(raw[sel, 1].std())
    by_state = {}
    for k1 in DAMAGE_LEVELS:
        for k2 in LOADS_KN:
            sel = (truth[:, 0] == k1) & (truth[:, 1] == k2)
            if sel.any():
                by_state[(k1, k2)] = float(hit[sel].mean())
    return StateSummary(lm, ls, dm, ds, by_state, float(hit.mean()), len(truth))


@dataclass
class ReconstructionReport:
    rows: list[dict]  # one per path signal: level, load, path, trial, rss_sss, rmse

    @property
    def values(self) -> np.ndarray:
        return np.array([r["rss_sss"] for r in self.rows])

    @property
    def mean(self) -> float:
        return float(self.values.mean())

    def aggregate(self, by: str) -> dict[tuple[int, int], dict]:
        """Mean/std/count of RSS/SSS% keyed by (level, path) or (load, path)."""
        key = {"level": "level", "load": "load"}[by]
        groups: dict[tuple[int, int], list[float]] = {}
        for r in self.rows:
            groups.setdefault((r[key], r["path"]), []).append(r["rss_sss"])
        return {
            k: {"mean": float(np.mean(v)), "std": float(np.std(v)), "count": len(v)}
            for k, v in sorted(groups.items())
        }


def reconstruction_report(original: np.ndarray, reconstructed: np.ndarray, labels: np.ndarray, trials) -> ReconstructionReport:
    """Split every row into its individual path signals and score each one."""
    original = np.asarray(original, dtype=np.float64)
    reconstructed = np.asarray(reconstructed, dtype=np.float64).reshape(original.shape)
    labels = np.asarray(labels)
    rows = []
    if original.ndim == 2:  # Type I rows are single path signals
        errs = rss_sss_batch(original, reconstructed, axis=1)
        dev = np.sqrt(np.mean((original - reconstructed) ** 2, axis=1))
        for i in range(len(original)):
            rows.append(
                {"level": int(labels[i, 0]), "load": int(labels[i, 1]), "path": int(labels[i, 2]),
                 "trial": int(trials[i]), "rss_sss": float(errs[i]), "rmse": float(dev[i])}
            )
        return ReconstructionReport(rows)
    o = original.reshape(len(original), original.shape[1], -1)
    r = reconstructed.reshape(o.shape)
    errs = rss_sss_batch(o, r, axis=1)
    dev = np.sqrt(np.mean((o - r) ** 2, axis=1))
    for i in range(len(o)):
        for p in range(o.shape[2]):
            rows.append(
                {"level": int(labels[i, 0]), "load": int(labels[i, 1]), "path": p + 1,
                 "trial": int(trials[i]), "rss_sss": float(errs[i, p]), "rmse": float(dev[i, p])}
            )
    return ReconstructionReport(rows)
