"""Latent-space exploration and the reduced-data robustness experiment."""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field

import numpy as np

from . import pipeline
from .inspect import ReconstructionReport, estimate_state, reconstruction_report, round_load
from .models import Cae
from .synthwave import LOADS_KN
from .trainer import CAE_DEFAULTS, FFNN_DEFAULTS, Framework, TrainConfig, train_framework

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SpectrogramSpec:
    segment_length: int = 256
    overlap: int = 243  # round(0.95 * 256)
    sample_rate: float = 2.4e6

    def __post_init__(self) -> None:
        if self.segment_length < 1:
            raise ValueError("segment_length must be positive")
        if not 0 <= self.overlap < self.segment_length:
            raise ValueError("overlap must lie in [0, segment_length)")

    @property
    def hop(self) -> int:
        return self.segment_length - self.overlap

    def n_frames(self, n: int) -> int:
        return (n - self.segment_length) // self.hop + 1

    def frequencies(self) -> np.ndarray:
        return np.fft.rfftfreq(self.segment_length, 1.0 / self.sample_rate)


def spectrogram(signal: np.ndarray, spec: SpectrogramSpec = SpectrogramSpec()) -> np.ndarray:
    """STFT magnitude with a periodic Hann window.

    A 1-D signal gives ``(frames, bins)``; an ``N x D`` latent signal gives
    ``(D, frames, bins)``, one spectrogram per latent variable.
    """
    x = np.asarray(signal, dtype=np.float64)
    if x.ndim == 2:
        return np.stack([spectrogram(x[:, d], spec) for d in range(x.shape[1])])
    n = x.shape[0]
    if n < spec.segment_length:
        raise ValueError(f"signal of length {n} is shorter than one segment ({spec.segment_length})")
    k = np.arange(spec.segment_length)
    window = 0.5 - 0.5 * np.cos(2 * np.pi * k / spec.segment_length)
    starts = np.arange(spec.n_frames(n)) * spec.hop
    frames = x[starts[:, None] + k[None, :]] * window
    return np.abs(np.fft.rfft(frames, axis=1))


def to_db(mag: np.ndarray, floor: float = 1e-12) -> np.ndarray:
    return 20.0 * np.log10(np.maximum(mag, floor))


def spectrogram_diff(latent: np.ndarray, baseline: np.ndarray, spec: SpectrogramSpec = SpectrogramSpec()):
    """``S(latent) - S(baseline)`` and its largest absolute entry."""
    latent = np.asarray(latent, dtype=np.float64)
    baseline = np.asarray(baseline, dtype=np.float64)
    if latent.shape != baseline.shape:
        raise ValueError(f"shape mismatch {latent.shape} vs {baseline.shape}")
    diff = spectrogram(latent, spec) - spectrogram(baseline, spec)
    return diff, float(np.max(np.abs(diff)))


# ---------------------------------------------------------------- latent exports


@dataclass
class LatentScatterExport:
    i: int
    j: int
    rows: list[dict]

    def by_state(self) -> dict[tuple[int, int], list[tuple[float, float]]]:
        out: dict[tuple[int, int], list[tuple[float, float]]] = {}
        for r in self.rows:
            out.setdefault((r["level"], r["load"]), []).append((r[f"z{self.i}"], r[f"z{self.j}"]))
        return out


def latent_pairs(width: int) -> list[tuple[int, int]]:
    """Every unordered pair of 1-based latent indices."""
    return list(itertools.combinations(range(1, width + 1), 2))


def export_latent_pairs(cae: Cae, test: pipeline.InputTensor, i: int, j: int) -> LatentScatterExport:
    """One row per test record with latent variables ``z_i`` and ``z_j`` (1-based)."""
    if cae.spec.model_type == 3:
        raise ValueError("Type III latents are time-varying; use the spectrogram exports instead")
    d = cae.spec.latent_width
    if i == j or not (1 <= i <= d and 1 <= j <= d):
        raise ValueError(f"need two distinct latent indices in 1..{d}, got {i}, {j}")
    z = cae.encode(test.data)
    rows = []
    for n in range(len(test)):
        row = {"level": int(test.labels[n, 0]), "load": int(test.labels[n, 1]), "trial": int(test.trials[n])}
        if test.labels.shape[1] > 2:
            row["path"] = int(test.labels[n, 2])
        row[f"z{i}"] = float(z[n, i - 1])
        row[f"z{j}"] = float(z[n, j - 1])
        rows.append(row)
    rows.sort(key=lambda r: (r["level"], r["load"], r.get("path", 0), r["trial"]))
    return LatentScatterExport(i, j, rows)


def latent_trajectory(cae: Cae, test: pipeline.InputTensor, vary: str, fixed: int, path: int | None = None):
    """Per-state mean latent while one state variable sweeps and the other is held.

    ``vary="level"`` holds the load at ``fixed`` kN; ``vary="load"`` holds the
    damage level at ``fixed``. Returns ``[(swept value, mean latent), ...]``.
    """
    col, other = (0, 1) if vary == "level" else (1, 0)
    z = cae.encode(test.data).reshape(len(test), -1)
    sel = test.labels[:, other] == fixed
    if path is not None:
        sel &= test.labels[:, 2] == path
    out = []
    for v in np.unique(test.labels[sel, col]):
        m = sel & (test.labels[:, col] == v)
        out.append((int(v), z[m].mean(axis=0)))
    return out


def cluster_distances(latents: np.ndarray, labels: np.ndarray) -> tuple[float, float]:
    """Mean pairwise latent distance within a state and between different states."""
    z = np.asarray(latents, dtype=np.float64).reshape(len(latents), -1)
    keys = [tuple(r) for r in np.asarray(labels)]
    d = np.sqrt(((z[:, None] - z[None]) ** 2).sum(-1))
    same = np.array([[a == b for b in keys] for a in keys])
    off = ~np.eye(len(z), dtype=bool)
    intra = d[same & off]
    inter = d[~same]
    return float(intra.mean()) if intra.size else 0.0, float(inter.mean()) if inter.size else 0.0


def state_latent_signal(cae: Cae, test: pipeline.InputTensor, level: int, load: int, trial: int | None = None):
    """Type III latent signal (N x D) at a state: one trial, or the mean over test trials."""
    if cae.spec.model_type != 3:
        raise ValueError("latent signals only exist for Type III models")
    sel = (test.labels[:, 0] == level) & (test.labels[:, 1] == load)
    if trial is not None:
        sel &= test.trials == trial
    if not sel.any():
        raise KeyError(f"no test rows at ({level}, {load} kN)" + (f" trial {trial}" if trial is not None else ""))
    return cae.encode(test.data[sel]).mean(axis=0)


def damage_ordering(cae: Cae, test: pipeline.InputTensor, load: int = 0, spec: SpectrogramSpec = SpectrogramSpec()):
    """Max-abs spectrogram difference of each damage level against level 0 at ``load``."""
    base = state_latent_signal(cae, test, 0, load)
    out = {0: 0.0}
    for level in range(1, 5):
        _, s = spectrogram_diff(state_latent_signal(cae, test, level, load), base, spec)
        out[level] = s
    return out


# ---------------------------------------------------------------- robustness


def load_box(values: np.ndarray) -> dict:
    """Mean, central 95 % interval (2.5th-97.5th percentile) and range of raw predictions."""
    v = np.asarray(values, dtype=np.float64)
    lo, hi = np.percentile(v, [2.5, 97.5])
    return {
        "mean": float(v.mean()),
        "lo": float(lo),
        "hi": float(hi),
        "width": float(hi - lo),
        "min": float(v.min()),
        "max": float(v.max()),
        "n": int(v.size),
    }


@dataclass
class ModelEvaluation:
    raw: np.ndarray = field(repr=False)
    load_boxes: dict[int, dict]
    load_accuracy: dict[int, float]
    state_accuracy: float
    reconstruction: ReconstructionReport = field(repr=False)


def evaluate_loads(fw: Framework, test: pipeline.InputTensor) -> ModelEvaluation:
    est = estimate_state(fw.cae, fw.ffnn1, test.data)
    truth = test.labels
    boxes, acc = {}, {}
    for load in LOADS_KN:
        sel = truth[:, 1] == load
        if sel.any():
            boxes[load] = load_box(est.raw[sel, 1])
            acc[load] = float(np.mean(round_load(est.raw[sel, 1]) == load))
    hit = np.all(est.rounded[:, :2] == truth[:, :2].astype(int), axis=1)
    recon = reconstruction_report(test.data, fw.cae.reconstruct(test.data), test.labels, test.trials)
    return ModelEvaluation(est.raw, boxes, acc, float(hit.mean()), recon)


@dataclass
class RobustnessReport:
    excluded_load: int
    full: ModelEvaluation
    reduced: ModelEvaluation
    test_trials: np.ndarray = field(repr=False)
    reduced_train_loads: tuple[int, ...] = ()

    def summary(self) -> dict:
        return {
            "excluded_load": self.excluded_load,
            "reduced_train_loads": list(self.reduced_train_loads),
            "full": {"load_boxes": self.full.load_boxes, "load_accuracy": self.full.load_accuracy,
                     "state_accuracy": self.full.state_accuracy, "mean_rss_sss": self.full.reconstruction.mean},
            "reduced": {"load_boxes": self.reduced.load_boxes, "load_accuracy": self.reduced.load_accuracy,
                        "state_accuracy": self.reduced.state_accuracy, "mean_rss_sss": self.reduced.reconstruction.mean},
        }


def robustness_experiment(
    model_type: int,
    records,
    excluded_load: int = 10,
    split_spec: pipeline.SplitSpec | None = None,
    cae_config: TrainConfig = CAE_DEFAULTS,
    ffnn_config: TrainConfig = FFNN_DEFAULTS,
    full_model: Framework | None = None,
    factor: int = 10,
) -> RobustnessReport:
    """Retrain without one load level and compare against the full-data model.

    Both models are scored on the same, complete test set. A previously
    trained full-data framework can be passed in to avoid retraining it.
    """
    if excluded_load not in LOADS_KN:
        raise ValueError(f"excluded load {excluded_load} kN is not on the grid")
    split_spec = split_spec or pipeline.SplitSpec()
    processed = pipeline.preprocess(records, factor)
    train_recs, test_recs = pipeline.split(processed, split_spec)
    reduced_spec = split_spec.with_excluded(*(set(split_spec.exclude_train_loads) | {excluded_load}))
    reduced_train_recs, _ = pipeline.split(processed, reduced_spec)
    test = pipeline.build_tensor(test_recs, model_type)
    if full_model is None:
        full_model = train_framework(pipeline.build_tensor(train_recs, model_type), None, cae_config, ffnn_config)
    reduced_train = pipeline.build_tensor(reduced_train_recs, model_type)
    log.info("robustness: reduced training set has %d rows", len(reduced_train))
    reduced_model = train_framework(reduced_train, full_model.cae.spec, cae_config, ffnn_config)
    return RobustnessReport(
        excluded_load,
        evaluate_loads(full_model, test),
        evaluate_loads(reduced_model, test),
        test.trials,
        tuple(sorted({int(v) for v in reduced_train.labels[:, 1]})),
    )
