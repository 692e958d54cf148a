"""Train Types I, II and III on a synthetic dataset and print the summary tables.

    python3 scripts/reproduce.py --multiplier 0.25 --out runs/reproduce
"""

import argparse
import json
import logging
import time
from dataclasses import replace
from pathlib import Path

from wavestate import analysis, inspect, pipeline, synthwave, trainer


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--multiplier", type=float, default=0.25)
    ap.add_argument("--types", default="1,2,3")
    ap.add_argument("--cae-epochs", type=int, default=trainer.CAE_DEFAULTS.epochs)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="runs/reproduce")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    records = synthwave.synth_dataset(synthwave.SynthConfig(trial_multiplier=args.multiplier))
    split = pipeline.SplitSpec.scaled(args.multiplier)
    processed = pipeline.preprocess(records)
    train_recs, test_recs = pipeline.split(processed, split)
    cae_cfg = replace(trainer.CAE_DEFAULTS, epochs=args.cae_epochs, seed=args.seed)
    ffnn_cfg = replace(trainer.FFNN_DEFAULTS, seed=args.seed)

    results = {}
    for mt in (int(t) for t in args.types.split(",")):
        train = pipeline.build_tensor(train_recs, mt)
        test = pipeline.build_tensor(test_recs, mt)
        cfg = replace(cae_cfg, batch_size=cae_cfg.batch_size * 9) if mt == 1 else cae_cfg
        t = time.perf_counter()
        fw = trainer.train_framework(train, None, cfg, ffnn_cfg)
        est = inspect.estimate_state(fw.cae, fw.ffnn1, test.data)
        summary = inspect.summarize(est, test.labels)
        recon = inspect.reconstruction_report(test.data, fw.cae.reconstruct(test.data), test.labels, test.trials)
        results[mt] = {"accuracy": summary.accuracy, "mean_rss_sss": recon.mean, "seconds": time.perf_counter() - t,
                       "summary": summary.to_dict()}
        if mt == 3:
            results[mt]["spectrogram_diff_by_level"] = analysis.damage_ordering(fw.cae, test)
        print(f"\nType {mt}: accuracy {summary.accuracy:.4f}, mean RSS/SSS {recon.mean:.3f}%")
        for row in summary.table_rows():
            print("  " + "  ".join(f"{v:>8.4f}" if isinstance(v, float) else f"{v!s:>8}" for v in row))
    (out / "reproduce.json").write_text(json.dumps(results, indent=2, sort_keys=True, default=str) + "\n")


if __name__ == "__main__":
    main()
