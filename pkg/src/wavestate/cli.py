"""``wavestate`` command line: synth, train, estimate, reconstruct, sweep, analyze, report.

Exit codes: 0 ok, 1 usage, 2 I/O or file format, 3 training divergence,
4 acceptance threshold not met.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import analysis, config as cfgmod, formats, inspect, pipeline, synthwave, trainer
from .models import CaeSpec

log = logging.getLogger("wavestate")

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_DIVERGED, EXIT_THRESHOLD = 0, 1, 2, 3, 4
CKPT_NAMES = {"cae": "cae.wsck", "ffnn1": "ffnn1.wsck", "ffnn2": "ffnn2.wsck"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit with 2, which we reserve for I/O
        raise UsageError(f"{self.prog}: {message}")


# ---------------------------------------------------------------- helpers


def _csv(rows: list[dict] | list[list], header: list[str] | None = None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if header is not None:
        w.writerow(header)
        for r in rows:
            w.writerow([r[h] for h in header] if isinstance(r, dict) else r)
    else:
        w.writerows(rows)
    return buf.getvalue()


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _outdir(path) -> Path:
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _run_config(args) -> cfgmod.RunConfig:
    cfg = cfgmod.load(args.config) if getattr(args, "config", None) else cfgmod.RunConfig()
    if getattr(args, "seed", None) is not None:
        cfg = cfg.with_seed(args.seed)
    if getattr(args, "trial_multiplier", None) is not None:
        cfg = replace(cfg, synth=replace(cfg.synth, trial_multiplier=args.trial_multiplier))
    if getattr(args, "epochs", None) is not None:
        cfg = replace(cfg, cae_train=replace(cfg.cae_train, epochs=args.epochs))
    if getattr(args, "latent_width", None) is not None:
        cfg = replace(cfg, cae=replace(cfg.cae, latent_width=args.latent_width))
    if getattr(args, "filters", None) is not None:
        cfg = replace(cfg, cae=replace(cfg.cae, first_filters=args.filters))
    return cfg


def _dataset(args, cfg: cfgmod.RunConfig):
    records, synth = formats.decode_dataset(formats.read_bytes(args.dataset))
    split = cfg.split or pipeline.SplitSpec.scaled(synth.trial_multiplier)
    return records, synth, split


def _tensors(records, split: pipeline.SplitSpec, model_type: int):
    return pipeline.prepare(records, split, model_type)


def _load_models(models_dir, model_type: int | None = None):
    d = Path(models_dir)
    cae, meta = formats.load_cae(formats.read_bytes(d / CKPT_NAMES["cae"]), model_type)
    mt = cae.spec.model_type
    f1, _ = formats.load_ffnn(formats.read_bytes(d / CKPT_NAMES["ffnn1"]), "ffnn1", mt)
    f2, _ = formats.load_ffnn(formats.read_bytes(d / CKPT_NAMES["ffnn2"]), "ffnn2", mt)
    return trainer.Framework(cae, f1, f2), meta


def _split_meta(meta: dict) -> pipeline.SplitSpec | None:
    s = meta.get("split")
    if not s:
        return None
    return pipeline.SplitSpec(s["train_trials"], s["test_trials"], tuple(tuple(x) for x in s["per_load"]), ())


def _eval_tensor(args, cfg, fw, meta, which: str) -> pipeline.InputTensor:
    records, _, split = _dataset(args, cfg)
    split = _split_meta(meta) or split
    train, test = _tensors(records, split, fw.model_type)
    if which == "train":
        return train
    if which == "test":
        return test
    return pipeline.build_tensor(pipeline.preprocess(records), fw.model_type)


# ---------------------------------------------------------------- commands


def cmd_synth(args) -> int:
    cfg = _run_config(args)
    synth = cfg.synth if args.seed is None else replace(cfg.synth, seed=args.seed)
    records = synthwave.synth_dataset(synth)
    out = Path(args.out)
    if out.parent != Path(""):
        out.parent.mkdir(parents=True, exist_ok=True)
    formats.atomic_write(out, formats.encode_dataset(records, synth))
    formats.atomic_write(out.with_name(out.name + ".config"), replace(cfg, synth=synth).to_text())
    log.info("wrote %d records to %s", len(records), out)
    print(f"{len(records)} records -> {out}")
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = _run_config(args)
    records, synth, split = _dataset(args, cfg)
    if args.exclude_load is not None:
        split = split.with_excluded(args.exclude_load)
    train, _ = _tensors(records, split, args.model_type)
    if len(train) == 0:
        raise UsageError("the training split is empty")
    spec = CaeSpec(args.model_type, cfg.cae.latent_width, cfg.cae.first_filters, train.data.shape[1])
    fw = trainer.train_framework(train, spec, cfg.cae_train, cfg.ffnn_train, cfg.ffnn.hidden_width, cfg.ffnn.hidden_depth)
    out = _outdir(args.out)
    split_meta = {
        "train_trials": split.train_trials,
        "test_trials": split.test_trials,
        "per_load": [list(x) for x in split.per_load],
        "exclude_train_loads": list(split.exclude_train_loads),
    }
    common = {"seed": cfg.seed, "split": split_meta, "train_loads": sorted({int(v) for v in train.labels[:, 1]})}
    formats.atomic_write(
        out / CKPT_NAMES["cae"], formats.cae_checkpoint(fw.cae, {**common, "epochs": cfg.cae_train.epochs})
    )
    for role in ("ffnn1", "ffnn2"):
        formats.atomic_write(
            out / CKPT_NAMES[role],
            formats.ffnn_checkpoint(getattr(fw, role), role, args.model_type, {**common, "epochs": cfg.ffnn_train.epochs}),
        )
    rows = []
    for net, hist in (("cae", fw.cae_history), ("ffnn1", fw.ffnn1_history), ("ffnn2", fw.ffnn2_history)):
        rows += [[net, e, repr(float(v))] for e, v in enumerate(hist)]
    formats.atomic_write(out / "losses.csv", _csv(rows, ["network", "epoch", "loss"]))
    formats.atomic_write(out / "config.txt", cfg.to_text())
    print(f"Type {args.model_type}: {len(train)} training rows, final CAE mse {fw.cae_history[-1]:.4g} -> {out}")
    return EXIT_OK


def cmd_estimate(args) -> int:
    cfg = _run_config(args)
    fw, meta = _load_models(args.models, args.model_type)
    tensor = _eval_tensor(args, cfg, fw, meta, args.split)
    est = inspect.estimate_state(fw.cae, fw.ffnn1, tensor.data)
    summary = inspect.summarize(est, tensor.labels)
    out = _outdir(args.out)
    rows = []
    for i in range(len(tensor)):
        row = {"level": int(tensor.labels[i, 0]), "load_kn": int(tensor.labels[i, 1]), "trial": int(tensor.trials[i]),
               "raw_level": repr(float(est.raw[i, 0])), "raw_load_kn": repr(float(est.raw[i, 1])),
               "est_level": int(est.rounded[i, 0]), "est_load_kn": int(est.rounded[i, 1])}
        rows.append(row)
    formats.atomic_write(out / "estimates.csv", _csv(rows, list(rows[0])))
    formats.atomic_write(out / "summary.csv", _csv([[repr(v) if isinstance(v, float) else v for v in r] for r in summary.table_rows()]))
    formats.atomic_write(out / "summary.json", _json(summary.to_dict()))
    print(f"accuracy {summary.accuracy:.4f} over {summary.n} rows")
    return EXIT_OK


def _parse_state(text: str) -> synthwave.StateVector:
    try:
        parts = [int(p) for p in text.split(",")]
    except ValueError:
        raise UsageError(f"--state expects level,load[,path], got {text!r}") from None
    if len(parts) not in (2, 3):
        raise UsageError(f"--state expects level,load[,path], got {text!r}")
    try:
        return synthwave.StateVector(*parts)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def cmd_reconstruct(args) -> int:
    cfg = _run_config(args)
    fw, meta = _load_models(args.models, args.model_type)
    out = _outdir(args.out)
    if args.state:
        state = _parse_state(args.state)
        try:
            sig = inspect.reconstruct_signal(fw.ffnn2, fw.cae, state)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        cols = sig.reshape(sig.shape[0], -1)
        paths = [state.path] if fw.model_type == 1 else list(range(1, cols.shape[1] + 1))
        header = ["sample"] + [f"path{p}" for p in paths]
        rows = [[n] + [repr(float(v)) for v in cols[n]] for n in range(cols.shape[0])]
        formats.atomic_write(out / "signals.csv", _csv(rows, header))
        print(f"{len(paths)} signals for state ({state.k1}, {state.k2} kN) -> {out / 'signals.csv'}")
        return EXIT_OK
    if not args.dataset:
        raise UsageError("reconstruct needs --state or --dataset")
    tensor = _eval_tensor(args, cfg, fw, meta, args.split)
    report = inspect.reconstruction_report(tensor.data, fw.cae.reconstruct(tensor.data), tensor.labels, tensor.trials)
    rows = [{**r, "rss_sss": repr(r["rss_sss"]), "rmse": repr(r["rmse"])} for r in report.rows]
    formats.atomic_write(out / "reconstruction.csv", _csv(rows, ["level", "load", "path", "trial", "rss_sss", "rmse"]))
    for by in ("level", "load"):
        agg = report.aggregate(by)
        agg_rows = [[k[0], k[1], repr(v["mean"]), repr(v["std"]), v["count"]] for k, v in agg.items()]
        formats.atomic_write(out / f"reconstruction_by_{by}.csv", _csv(agg_rows, [by, "path", "mean", "std", "count"]))
    print(f"mean RSS/SSS {report.mean:.4f}% over {len(report.rows)} signals")
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _run_config(args)
    records, _, split = _dataset(args, cfg)
    train, test = _tensors(records, split, args.model_type)
    out = _outdir(args.out)
    if args.axis == "cae":
        results = trainer.sweep_cae(args.model_type, train, test, config=cfg.cae_train)
    else:
        fw, _ = _load_models(args.models, args.model_type)
        ztr = inspect.latent_features(fw.cae, train.data)
        zte = inspect.latent_features(fw.cae, test.data)
        results = trainer.sweep_ffnn((ztr, train.labels), (zte, test.labels), config=cfg.ffnn_train)
    rows = [{k: repr(v) if isinstance(v, float) else v for k, v in r.row().items()} for r in results]
    formats.atomic_write(out / f"sweep_{args.axis}.csv", _csv(rows, ["axis", "value", "mean", "ci95", "n"]))
    for r in results:
        log.info("%s=%s %.2fs/epoch", r.axis, r.value, r.seconds_per_epoch)
    print(f"{len(results)} sweep points -> {out}")
    return EXIT_OK


def cmd_analyze(args) -> int:
    cfg = _run_config(args)
    fw, meta = _load_models(args.models, args.model_type)
    test = _eval_tensor(args, cfg, fw, meta, "test")
    out = _outdir(args.out)
    z = inspect.latent_features(fw.cae, test.data)
    intra, inter = analysis.cluster_distances(z, test.labels[:, :2])
    result = {"intra_state_distance": intra, "inter_state_distance": inter}
    if fw.model_type == 3:
        order = analysis.damage_ordering(fw.cae, test, 0, cfg.spectrogram)
        result["spectrogram_diff_vs_level0_at_0kN"] = {str(k): v for k, v in order.items()}
        base = analysis.state_latent_signal(fw.cae, test, 0, 0)
        header = ["latent", "frame"] + [f"{f:.0f}Hz" for f in cfg.spectrogram.frequencies()]
        for level in range(1, 5):
            sig = analysis.state_latent_signal(fw.cae, test, level, 0)
            diff, _ = analysis.spectrogram_diff(sig, base, cfg.spectrogram)
            rows = [[d + 1, f] + [repr(float(v)) for v in diff[d, f]]
                    for d in range(diff.shape[0]) for f in range(diff.shape[1])]
            formats.atomic_write(out / f"spectrogram_diff_level{level}.csv", _csv(rows, header))
    else:
        for i, j in analysis.latent_pairs(fw.cae.spec.latent_width):
            exp = analysis.export_latent_pairs(fw.cae, test, i, j)
            header = list(exp.rows[0])
            formats.atomic_write(out / f"latent_z{i}_z{j}.csv", _csv(exp.rows, header))
        for vary, fixed in (("level", 0), ("load", 0)):
            traj = analysis.latent_trajectory(fw.cae, test, vary, fixed)
            rows = [[v] + [repr(float(x)) for x in m] for v, m in traj]
            header = [vary] + [f"z{k + 1}" for k in range(len(traj[0][1]))]
            formats.atomic_write(out / f"trajectory_{vary}.csv", _csv(rows, header))
    formats.atomic_write(out / "analysis.json", _json(result))
    print(_json(result), end="")
    return EXIT_OK


def cmd_report(args) -> int:
    cfg = _run_config(args)
    fw, meta = _load_models(args.models, args.model_type)
    test = _eval_tensor(args, cfg, fw, meta, "test")
    est = inspect.estimate_state(fw.cae, fw.ffnn1, test.data)
    summary = inspect.summarize(est, test.labels)
    recon = inspect.reconstruction_report(test.data, fw.cae.reconstruct(test.data), test.labels, test.trials)
    z = inspect.latent_features(fw.cae, test.data)
    intra, inter = analysis.cluster_distances(z, test.labels[:, :2])
    t = cfg.thresholds
    checks = {
        "accuracy": summary.accuracy >= t.min_accuracy,
        "rss_sss": recon.mean < t.max_rss_sss,
    }
    bundle = {
        "model_type": fw.model_type,
        "n_test_rows": len(test),
        "state": summary.to_dict(),
        "mean_rss_sss": recon.mean,
        "rss_sss_by_level": {f"{k[0]},{k[1]}": v for k, v in recon.aggregate("level").items()},
        "rss_sss_by_load": {f"{k[0]},{k[1]}": v for k, v in recon.aggregate("load").items()},
        "cluster": {"intra": intra, "inter": inter},
        "thresholds": {"min_accuracy": t.min_accuracy, "max_rss_sss": t.max_rss_sss},
        "checks": checks,
        "passed": all(checks.values()),
    }
    out = _outdir(args.out)
    formats.atomic_write(out / "report.json", _json(bundle))
    print(f"accuracy {summary.accuracy:.4f}  mean RSS/SSS {recon.mean:.4f}%  passed={bundle['passed']}")
    return EXIT_OK if bundle["passed"] else EXIT_THRESHOLD


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="wavestate", description="Guided-wave CAE/FFNN state estimation toolkit.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, dataset=True, model_type_required=False, models=False):
        sp.add_argument("--config", help="key=value run configuration file")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out", required=True)
        if dataset:
            sp.add_argument("--dataset", required=dataset == "required")
        if models:
            sp.add_argument("--models", required=True, help="directory holding the three checkpoints")
        sp.add_argument("--model-type", type=int, choices=(1, 2, 3), required=model_type_required)

    sp = sub.add_parser("synth", help="generate a synthetic dataset")
    sp.add_argument("--config")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--out", required=True)
    sp.add_argument("--trial-multiplier", type=float)
    sp.set_defaults(func=cmd_synth)

    sp = sub.add_parser("train", help="train the CAE and both FFNNs")
    common(sp, "required", model_type_required=True)
    sp.add_argument("--exclude-load", type=int, choices=synthwave.LOADS_KN)
    sp.add_argument("--epochs", type=int, help="CAE epochs")
    sp.add_argument("--latent-width", type=int)
    sp.add_argument("--filters", type=int)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("estimate", help="signal -> state on a dataset split")
    common(sp, "required", models=True)
    sp.add_argument("--split", choices=("train", "test", "all"), default="test")
    sp.set_defaults(func=cmd_estimate)

    sp = sub.add_parser("reconstruct", help="state -> signal, or CAE reconstruction error on a dataset")
    common(sp, True, models=True)
    sp.add_argument("--state", help="level,load_kn[,path]")
    sp.add_argument("--split", choices=("train", "test", "all"), default="test")
    sp.set_defaults(func=cmd_reconstruct)

    sp = sub.add_parser("sweep", help="latent width / filter (cae) or FFNN width / depth (ffnn) sweeps")
    common(sp, "required", model_type_required=True)
    sp.add_argument("--axis", choices=("cae", "ffnn"), default="cae")
    sp.add_argument("--models", help="trained models (needed for --axis ffnn)")
    sp.add_argument("--epochs", type=int)
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("analyze", help="latent scatter, trajectory and spectrogram exports")
    common(sp, "required", models=True)
    sp.set_defaults(func=cmd_analyze)

    sp = sub.add_parser("report", help="single JSON with all metrics; exit 4 if thresholds fail")
    common(sp, "required", models=True)
    sp.set_defaults(func=cmd_report)
    return p


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if not exc.code else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    if args.command == "sweep" and args.axis == "ffnn" and not args.models:
        print("sweep --axis ffnn needs --models", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except cfgmod.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except trainer.DivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (OSError, formats.FormatError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
