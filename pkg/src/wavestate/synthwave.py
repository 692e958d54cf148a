"""Synthetic guided-wave records over the damage-level x load grid.

Not a wave solver: each record is a sum of delayed Hann-windowed tone bursts
(direct arrival, plate-edge echoes from an image-source lattice, and a packet
scattered from a damage site at the plate centre) plus white noise. Damage
and load both slow the wave down; damage additionally scales the scattered
packet. That is enough structure for the autoencoders to have something real
to compress.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

DAMAGE_LEVELS = (0, 1, 2, 3, 4)
LOADS_KN = (0, 5, 10, 15, 20)
ACTUATORS = (1, 2, 3)
RECEIVERS = (4, 5, 6)
PATHS = tuple((a, r) for a in ACTUATORS for r in RECEIVERS)

PLATE_MM = (152.4, 304.8)  # width (x), length (y)
DEFAULT_ACTUATORS_MM = ((38.1, 75.0), (76.2, 75.0), (114.3, 75.0))
DEFAULT_RECEIVERS_MM = ((38.1, 225.0), (76.2, 225.0), (114.3, 225.0))


def path_index(path: tuple[int, int]) -> int:
    """1..9, actuator-major: (1,4)->1, (1,5)->2, ..., (3,6)->9."""
    a, r = path
    if a not in ACTUATORS or r not in RECEIVERS:
        raise ValueError(f"invalid path {path}")
    return (a - 1) * 3 + (r - 4) + 1


def path_from_index(index: int) -> tuple[int, int]:
    if not 1 <= index <= 9:
        raise ValueError(f"path index must be 1..9, got {index}")
    return PATHS[index - 1]


@dataclass(frozen=True)
class SynthConfig:
    sample_rate: float = 24e6
    record_length: int = 8000
    center_frequency: float = 250e3
    n_peaks: int = 5
    actuators_mm: tuple = DEFAULT_ACTUATORS_MM
    receivers_mm: tuple = DEFAULT_RECEIVERS_MM
    plate_mm: tuple = PLATE_MM
    base_speed: float = 5000.0
    damage_speed_coeff: float = 0.0005  # per damage level
    load_speed_coeff: float = 0.001  # per 5 kN
    damage_scatter_gain: float = 0.5  # per damage level
    n_reflections: int = 10
    reflection_decay: float = 0.7
    noise_std: float = 0.02  # relative to the clean record's std
    seed: int = 2024
    trial_multiplier: float = 1.0

    def __post_init__(self) -> None:
        for name in ("sample_rate", "record_length", "center_frequency", "base_speed"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        for name in ("damage_speed_coeff", "load_speed_coeff"):
            v = getattr(self, name)
            if not 0 <= v < 0.2:
                raise ValueError(f"{name} must lie in [0, 0.2), got {v}")
        if self.damage_scatter_gain < 0:
            raise ValueError("damage_scatter_gain must be >= 0")
        if not 0 <= self.reflection_decay < 1:
            raise ValueError("reflection_decay must lie in [0, 1)")
        if self.noise_std < 0:
            raise ValueError("noise_std must be >= 0")
        if self.n_peaks < 1 or self.n_reflections < 0:
            raise ValueError("n_peaks >= 1 and n_reflections >= 0 required")
        if self.trial_multiplier <= 0:
            raise ValueError("trial_multiplier must be positive")
        object.__setattr__(self, "actuators_mm", tuple(tuple(map(float, p)) for p in self.actuators_mm))
        object.__setattr__(self, "receivers_mm", tuple(tuple(map(float, p)) for p in self.receivers_mm))
        object.__setattr__(self, "plate_mm", tuple(map(float, self.plate_mm)))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["actuators_mm"] = [list(p) for p in self.actuators_mm]
        d["receivers_mm"] = [list(p) for p in self.receivers_mm]
        d["plate_mm"] = list(self.plate_mm)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SynthConfig":
        d = dict(d)
        for k in ("actuators_mm", "receivers_mm"):
            if k in d:
                d[k] = tuple(tuple(p) for p in d[k])
        if "plate_mm" in d:
            d["plate_mm"] = tuple(d["plate_mm"])
        return cls(**d)


@dataclass(frozen=True)
class StateVector:
    k1: int  # damage level 0..4
    k2: int  # load in kN, one of 0, 5, 10, 15, 20
    path: int | None = None  # 1..9, only for Type I mappings

    def __post_init__(self) -> None:
        if self.k1 not in DAMAGE_LEVELS:
            raise ValueError(f"damage level {self.k1} not in {DAMAGE_LEVELS}")
        if self.k2 not in LOADS_KN:
            raise ValueError(f"load {self.k2} kN not in {LOADS_KN}")
        if self.path is not None and not 1 <= self.path <= 9:
            raise ValueError(f"path index {self.path} not in 1..9")

    def as_array(self) -> np.ndarray:
        vals = [self.k1, self.k2] + ([self.path] if self.path is not None else [])
        return np.array(vals, dtype=np.float64)


@dataclass
class TimeSeriesRecord:
    samples: np.ndarray = field(repr=False)
    state: StateVector
    path: tuple[int, int]
    trial: int

    @property
    def key(self) -> tuple[int, int, int, int]:
        return (self.state.k1, self.state.k2, path_index(self.path), self.trial)


def n_trials(load_kn: int, multiplier: float = 1.0) -> int:
    """Trials per (state, path): 2 at 20 kN, 20 otherwise, scaled and floored at 2."""
    base = 2 if load_kn == 20 else 20
    return max(2, int(math.floor(base * multiplier + 0.5)))


def census(config: SynthConfig) -> int:
    per_path = sum(n_trials(k2, config.trial_multiplier) for _ in DAMAGE_LEVELS for k2 in LOADS_KN)
    return len(PATHS) * per_path


def burst_duration_samples(config: SynthConfig) -> float:
    return config.n_peaks / config.center_frequency * config.sample_rate


def _burst(t: np.ndarray, fc: float, n_peaks: int) -> np.ndarray:
    span = n_peaks / fc
    inside = (t >= 0) & (t <= span)
    tt = np.where(inside, t, 0.0)
    return np.where(inside, 0.5 * (1 - np.cos(2 * np.pi * fc * tt / n_peaks)) * np.sin(2 * np.pi * fc * tt), 0.0)


def tone_burst(config: SynthConfig) -> np.ndarray:
    """Excitation sampled on ``[0, n_peaks/f_c]`` inclusive (both ends are zero)."""
    n = int(round(burst_duration_samples(config)))
    t = np.arange(n + 1) / config.sample_rate
    out = _burst(t, config.center_frequency, config.n_peaks)
    out[-1] = 0.0  # exact zero despite rounding of the last sine sample
    return out


def wave_speed(config: SynthConfig, state: StateVector) -> float:
    return config.base_speed * (
        1 - config.damage_speed_coeff * state.k1 - config.load_speed_coeff * state.k2 / 5.0
    )


def arrival_index(distance_m: float, speed: float, sample_rate: float) -> float:
    return distance_m / speed * sample_rate


def _image_sources(src, plate, order_max: int = 3):
    """Mirror images of ``src`` in the rectangular plate, with reflection counts."""
    w, l = plate
    x, y = src
    xs, ys = [], []
    for i in range(-order_max, order_max + 1):
        xs.append((2 * i * w + x, 2 * abs(i)))
        xs.append((2 * i * w - x, abs(2 * i - 1)))
        ys.append((2 * i * l + y, 2 * abs(i)))
        ys.append((2 * i * l - y, abs(2 * i - 1)))
    return [((xi, yi), ox + oy) for xi, ox in xs for yi, oy in ys if 0 < ox + oy <= order_max]


def arrivals(state: StateVector, path: tuple[int, int], config: SynthConfig) -> list[tuple[float, float]]:
    """``(delay_seconds, amplitude)`` for every packet in the record."""
    a, r = path
    src = np.array(config.actuators_mm[a - 1]) / 1000
    rec = np.array(config.receivers_mm[r - 4]) / 1000
    plate = tuple(p / 1000 for p in config.plate_mm)
    v = wave_speed(config, state)
    d0 = float(np.linalg.norm(rec - src))
    out = [(d0 / v, 1.0)]
    echoes = []
    for img, order in _image_sources(tuple(src), plate):
        d = float(np.linalg.norm(rec - np.array(img)))
        echoes.append((d, order))
    echoes.sort()
    for d, order in echoes[: config.n_reflections]:
        out.append((d / v, config.reflection_decay**order * math.sqrt(d0 / d)))
    centre = np.array(plate) / 2
    ds = float(np.linalg.norm(centre - src) + np.linalg.norm(rec - centre))
    out.append((ds / v, config.damage_scatter_gain * state.k1))
    return out


def _noise_seed(config: SynthConfig, state: StateVector, path, trial: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([config.seed & 0xFFFFFFFFFFFFFFFF, state.k1, state.k2, path[0], path[1], trial])


def clean_record(state: StateVector, path: tuple[int, int], config: SynthConfig) -> np.ndarray:
    t = np.arange(config.record_length) / config.sample_rate
    y = np.zeros(config.record_length)
    for delay, amp in arrivals(state, path, config):
        if amp != 0.0:
            y += amp * _burst(t - delay, config.center_frequency, config.n_peaks)
    return y


def synth_record(state: StateVector, path: tuple[int, int], trial: int, config: SynthConfig) -> TimeSeriesRecord:
    if state.path is not None:
        state = StateVector(state.k1, state.k2)
    path_index(path)  # validates
    if trial < 0:
        raise ValueError("trial index must be >= 0")
    y = clean_record(state, path, config)
    if config.noise_std > 0:
        rng = np.random.default_rng(_noise_seed(config, state, path, trial))
        y = y + rng.normal(0.0, config.noise_std * float(np.std(y)), size=y.shape)
    return TimeSeriesRecord(y, state, path, trial)


def synth_dataset(config: SynthConfig | None = None) -> list[TimeSeriesRecord]:
    """All records, ordered by (level, load, path, trial)."""
    config = config or SynthConfig()
    records = []
    for k1 in DAMAGE_LEVELS:
        for k2 in LOADS_KN:
            state = StateVector(k1, k2)
            for path in PATHS:
                clean = clean_record(state, path, config)
                sd = float(np.std(clean))
                for trial in range(n_trials(k2, config.trial_multiplier)):
                    y = clean
                    if config.noise_std > 0:
                        rng = np.random.default_rng(_noise_seed(config, state, path, trial))
                        y = clean + rng.normal(0.0, config.noise_std * sd, size=clean.shape)
                    else:
                        y = clean.copy()
                    records.append(TimeSeriesRecord(y, state, path, trial))
    return records
