"""Plain-text ``key = value`` run configuration.

Keys are ``section.field`` (``synth.noise_std``, ``cae.latent_width``,
``cae_train.epochs``, ...) plus the top-level ``out`` and ``seed``. Lines
starting with ``#`` are comments. Unknown keys are errors.
"""

from __future__ import annotations

import ast
import dataclasses
from dataclasses import dataclass, field, replace
from pathlib import Path

from .analysis import SpectrogramSpec
from .pipeline import SplitSpec
from .synthwave import SynthConfig
from .trainer import CAE_DEFAULTS, FFNN_DEFAULTS, TrainConfig


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass(frozen=True)
class CaeOptions:
    latent_width: int = 7
    first_filters: int = 64


@dataclass(frozen=True)
class FfnnOptions:
    hidden_width: int = 64
    hidden_depth: int = 5


@dataclass(frozen=True)
class Thresholds:
    """Pass marks checked by ``report``."""

    min_accuracy: float = 0.95
    max_rss_sss: float = 5.0


@dataclass(frozen=True)
class RunConfig:
    synth: SynthConfig = field(default_factory=SynthConfig)
    cae: CaeOptions = field(default_factory=CaeOptions)
    ffnn: FfnnOptions = field(default_factory=FfnnOptions)
    cae_train: TrainConfig = CAE_DEFAULTS
    ffnn_train: TrainConfig = FFNN_DEFAULTS
    split: SplitSpec | None = None  # None: derived from synth.trial_multiplier
    spectrogram: SpectrogramSpec = field(default_factory=SpectrogramSpec)
    thresholds: Thresholds = field(default_factory=Thresholds)
    out: str = "runs"
    seed: int = 0

    def split_spec(self) -> SplitSpec:
        return self.split or SplitSpec.scaled(self.synth.trial_multiplier)

    def with_seed(self, seed: int) -> "RunConfig":
        return replace(
            self,
            seed=seed,
            cae_train=replace(self.cae_train, seed=seed),
            ffnn_train=replace(self.ffnn_train, seed=seed),
        )

    def to_text(self) -> str:
        """Fully resolved config in the same format :func:`parse` reads."""
        lines = [f"out = {self.out!r}", f"seed = {self.seed}"]
        for name in SECTIONS:
            obj = getattr(self, name) if name != "split" else self.split_spec()
            for f in dataclasses.fields(obj):
                value = getattr(obj, f.name)
                if isinstance(value, tuple):
                    value = _plain(value)
                lines.append(f"{name}.{f.name} = {value!r}")
        return "\n".join(lines) + "\n"


SECTIONS = {
    "synth": SynthConfig,
    "cae": CaeOptions,
    "ffnn": FfnnOptions,
    "cae_train": TrainConfig,
    "ffnn_train": TrainConfig,
    "split": SplitSpec,
    "spectrogram": SpectrogramSpec,
    "thresholds": Thresholds,
}


def _plain(v):
    if isinstance(v, tuple):
        return [_plain(x) for x in v]
    return v


def _tupled(v):
    if isinstance(v, list):
        return tuple(_tupled(x) for x in v)
    return v


def _value(text: str, line: int):
    try:
        return ast.literal_eval(text)
    except (ValueError, SyntaxError):
        if text and all(c.isalnum() or c in "_-./" for c in text):
            return text  # bare word, e.g. a path
        raise ConfigError(f"cannot parse value {text!r}", line) from None


def parse(text: str, base: RunConfig | None = None) -> RunConfig:
    base = base or RunConfig()
    top: dict = {}
    sections: dict[str, dict] = {name: {} for name in SECTIONS}
    lines: dict[str, int] = {}
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected key = value, got {raw.strip()!r}", n)
        key, val = (s.strip() for s in line.split("=", 1))
        value = _value(val, n)
        if key in ("out", "seed"):
            top[key] = value
            continue
        sect, _, fname = key.partition(".")
        if sect not in SECTIONS or fname not in {f.name for f in dataclasses.fields(SECTIONS[sect])}:
            raise ConfigError(f"unknown key {key!r}", n)
        sections[sect][fname] = _tupled(value)
        lines[sect] = n
    kwargs = {}
    for name, cls in SECTIONS.items():
        if not sections[name]:
            continue
        current = getattr(base, name) if name != "split" else base.split_spec()
        try:
            kwargs[name] = replace(current, **sections[name])
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid {name} settings: {exc}", lines[name]) from None
    cfg = replace(base, **kwargs)
    if "out" in top:
        cfg = replace(cfg, out=str(top["out"]))
    if "seed" in top:
        if not isinstance(top["seed"], int):
            raise ConfigError("seed must be an integer")
        cfg = cfg.with_seed(top["seed"])
    return cfg


def load(path) -> RunConfig:
    return parse(Path(path).read_text(encoding="utf-8"))
