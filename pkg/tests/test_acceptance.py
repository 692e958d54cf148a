"""Acceptance suite: one PASS/FAIL line per criterion, at its stated tolerance.

Runs the desk-scale experiments (trial multiplier 0.25) once per session and
shares the trained models between criteria. Run on its own with

    pytest tests/test_acceptance.py -s
"""

from __future__ import annotations

import hashlib
import math
import time
from dataclasses import replace

import numpy as np
import pytest

import conftest
from gradcheck import check, random_network
from tables import TABLES, TOTALS
from wavestate import analysis, cli, inspect, nn, pipeline, synthwave, trainer
from wavestate.models import CaeSpec, count_parameters, layer_table

MULTIPLIER = 0.25
CAE_CONFIG = trainer.CAE_DEFAULTS
FFNN_CONFIG = trainer.FFNN_DEFAULTS
# Type I rows are single paths; keep the same number of path signals per step as Type II/III
TYPE_I_CAE_CONFIG = replace(CAE_CONFIG, batch_size=CAE_CONFIG.batch_size * 9)
TIMINGS: dict[str, float] = {}


def report(criterion: int, ok: bool, detail: str) -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {criterion}: {detail}"
    conftest.ACCEPTANCE_LINES.append(line)
    print(line, flush=True)


@pytest.fixture(scope="module")
def records():
    t = time.perf_counter()
    recs = synthwave.synth_dataset(synthwave.SynthConfig(trial_multiplier=MULTIPLIER))
    TIMINGS["synth"] = time.perf_counter() - t
    return recs


@pytest.fixture(scope="module")
def split_spec():
    return pipeline.SplitSpec.scaled(MULTIPLIER)


@pytest.fixture(scope="module")
def tensors(records, split_spec):
    processed = pipeline.preprocess(records)
    train, test = pipeline.split(processed, split_spec)
    return {mt: (pipeline.build_tensor(train, mt), pipeline.build_tensor(test, mt)) for mt in (1, 2, 3)}


def _train(name, train, config):
    t = time.perf_counter()
    fw = trainer.train_framework(train, None, config, FFNN_CONFIG)
    TIMINGS[name] = time.perf_counter() - t
    return fw


@pytest.fixture(scope="module")
def type2(tensors):
    return _train("type2", tensors[2][0], CAE_CONFIG)


@pytest.fixture(scope="module")
def type1(tensors):
    return _train("type1", tensors[1][0], TYPE_I_CAE_CONFIG)


@pytest.fixture(scope="module")
def type3(tensors):
    return _train("type3", tensors[3][0], CAE_CONFIG)


def _mean_rss(fw, test):
    return inspect.reconstruction_report(test.data, fw.cae.reconstruct(test.data), test.labels, test.trials).mean


# ---------------------------------------------------------------- 1


def test_architecture_oracle():
    t = time.perf_counter()
    totals_ok = all(
        (count_parameters(CaeSpec(mt), "encoder"), count_parameters(CaeSpec(mt), "decoder")) == TOTALS[mt]
        for mt in (1, 2, 3)
    )
    rows_ok = all(layer_table(CaeSpec(mt)) == TABLES[mt] for mt in (1, 2, 3))
    elapsed = time.perf_counter() - t
    ok = totals_ok and rows_ok and elapsed < 1.0
    report(1, ok, f"six totals exact={totals_ok}, every layer row exact={rows_ok}, {elapsed:.3f}s (< 1 s)")
    assert ok


# ---------------------------------------------------------------- 2


def test_gradient_suite():
    rng = np.random.default_rng(20240601)
    t = time.perf_counter()
    worst = 0.0
    sizes = []
    for _ in range(50):
        net, _ = random_network(rng)
        sizes.append(len(net.layers))
        params = nn.init_params(net, rng)
        worst = max(worst, check(net, params, rng.standard_normal((2,) + net.input_shape), rng))
    elapsed = time.perf_counter() - t
    ok = worst < 1e-4 and elapsed < 30 and max(sizes) <= 3
    report(2, ok, f"50 random networks, max relative error {worst:.2e} (< 1e-4), {elapsed:.1f}s (< 30 s)")
    assert ok


# ---------------------------------------------------------------- 3


def test_metric_units(records):
    y = np.array([1.0, 2.0])
    rss_ok = (
        inspect.rss_sss(y, y) == 0.0
        and inspect.rss_sss(y, np.zeros(2)) == 100.0
        and inspect.rss_sss(y, np.array([0.0, 2.0])) == 20.0
    )
    rmse_ok = inspect.rmse([1.0, 2.0], [1.0, 2.0]) == 0.0 and inspect.rmse([0.0, 0.0], [3.0, 4.0]) == math.sqrt(12.5)
    std = [pipeline.standardize(pipeline.downsample(r, 10)).samples for r in records]
    worst_mean = max(abs(s.mean()) for s in std)
    worst_std = max(abs(s.std() - 1) for s in std)
    ok = rss_ok and rmse_ok and worst_mean < 1e-9 and worst_std < 1e-9
    report(3, ok, f"rss_sss={rss_ok} rmse={rmse_ok} standardized |mean|<={worst_mean:.1e} |std-1|<={worst_std:.1e} over {len(std)} records")
    assert ok


# ---------------------------------------------------------------- 4


def test_state_estimation(type2, tensors):
    _, test = tensors[2]
    t = time.perf_counter()
    est = inspect.estimate_state(type2.cae, type2.ffnn1, test.data)
    summary = inspect.summarize(est, test.labels)
    runtime = TIMINGS["synth"] + TIMINGS["type2"] + time.perf_counter() - t
    ok = summary.accuracy >= 0.95 and runtime <= 600
    report(4, ok, f"Type II rounded accuracy {summary.accuracy:.4f} on {summary.n} test rows (>= 0.95), end-to-end {runtime:.0f}s (<= 600 s)")
    assert ok


# ---------------------------------------------------------------- 5


def test_reconstruction_quality(type1, type2, type3, tensors):
    errs = {mt: _mean_rss(fw, tensors[mt][1]) for mt, fw in ((1, type1), (2, type2), (3, type3))}
    ordered = errs[2] <= errs[1]
    ok = errs[2] < 5.0 and all(np.isfinite(v) for v in errs.values())
    note = "Type II <= Type I" if ordered else "ordering deviation: Type II > Type I (logged)"
    report(5, ok, f"mean test RSS/SSS% I={errs[1]:.3f} II={errs[2]:.3f} III={errs[3]:.3f} (II < 5); {note}")
    assert ok


# ---------------------------------------------------------------- 6


def test_robustness(type2, records, split_spec):
    t = time.perf_counter()
    rep = analysis.robustness_experiment(2, records, 10, split_spec, CAE_CONFIG, FFNN_CONFIG, full_model=type2)
    runtime = time.perf_counter() - t
    others = {k: rep.reduced.load_accuracy[k] for k in (0, 5, 15, 20)}
    full_box, red_box = rep.full.load_boxes[10], rep.reduced.load_boxes[10]
    ok = (
        10 not in rep.reduced_train_loads
        and all(v >= 0.95 for v in others.values())
        and all(rep.full.load_accuracy[k] >= 0.95 for k in (0, 5, 15, 20))
        and red_box["width"] > full_box["width"]
        and 7.5 < red_box["lo"]
        and red_box["hi"] < 12.5
        and runtime <= 600
    )
    report(
        6,
        ok,
        "reduced-model accuracy at 0/5/15/20 kN "
        + "/".join(f"{v:.2f}" for v in others.values())
        + f"; 10 kN 95% interval full [{full_box['lo']:.2f}, {full_box['hi']:.2f}] width {full_box['width']:.2f}"
        + f" vs reduced [{red_box['lo']:.2f}, {red_box['hi']:.2f}] width {red_box['width']:.2f} (wider, inside (7.5, 12.5));"
        + f" retrain {runtime:.0f}s (<= 600 s)",
    )
    assert ok


# ---------------------------------------------------------------- 7


def test_latent_properties(type2, type3, tensors):
    test2 = tensors[2][1]
    z = inspect.latent_features(type2.cae, test2.data)
    intra, inter = analysis.cluster_distances(z, test2.labels)
    spec = analysis.SpectrogramSpec()
    defaults_ok = (spec.segment_length, spec.overlap, spec.n_frames(800)) == (256, 243, 42)
    order = analysis.damage_ordering(type3.cae, tensors[3][1], load=0, spec=spec)
    steps = [order[k + 1] >= order[k] for k in range(4)]
    violations = steps.count(False)
    ok = intra < inter and violations <= 1 and defaults_ok
    report(
        7,
        ok,
        f"Type II latent intra {intra:.3f} < inter {inter:.3f}; Type III spectrogram-diff max-abs by level "
        + ", ".join(f"{order[k]:.3f}" for k in range(5))
        + f" ({4 - violations}/4 nondecreasing steps); segment/overlap/frames defaults {defaults_ok}",
    )
    assert ok


# ---------------------------------------------------------------- 8

DETERMINISM_CONFIG = """\
synth.trial_multiplier = 0.1
cae.first_filters = 8
cae_train.epochs = 2
ffnn_train.epochs = 5
seed = 7
"""


def test_determinism(tmp_path):
    (tmp_path / "run.cfg").write_text(DETERMINISM_CONFIG)
    digests = []
    for run in ("a", "b"):
        d = tmp_path / run
        d.mkdir()
        assert cli.main(["synth", "--config", str(tmp_path / "run.cfg"), "--out", str(d / "ds.wsds")]) == 0
        assert cli.main(["train", "--config", str(tmp_path / "run.cfg"), "--dataset", str(d / "ds.wsds"),
                         "--model-type", "2", "--out", str(d / "m")]) == 0
        files = sorted(p for p in d.rglob("*") if p.is_file())
        digests.append({p.relative_to(d).as_posix(): hashlib.sha256(p.read_bytes()).hexdigest() for p in files})
    ok = digests[0] == digests[1] and len(digests[0]) >= 6
    report(8, ok, f"{len(digests[0])} artifacts from synth+train byte-identical across two runs: {digests[0] == digests[1]}")
    assert ok


# ---------------------------------------------------------------- 9


def test_whole_suite_budget():
    elapsed = time.perf_counter() - conftest.START
    ok = elapsed <= 1800
    parts = ", ".join(f"{k} {v:.0f}s" for k, v in TIMINGS.items())
    report(9, ok, f"suite wall time so far {elapsed:.0f}s (<= 1800 s); {parts}")
    assert ok
