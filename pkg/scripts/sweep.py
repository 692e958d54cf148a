"""Latent-width / filter sweeps of the CAE and width / depth sweeps of the estimation FFNN.

    python3 scripts/sweep.py --model-type 2 --cae-epochs 20 --out runs/sweep
"""

import argparse
import csv
import logging
from dataclasses import replace
from pathlib import Path

from wavestate import inspect, pipeline, synthwave, trainer


def write(path, results):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["axis", "value", "mean", "ci95", "n", "seconds_per_epoch"])
        for r in results:
            w.writerow([r.axis, r.value, r.mean, r.ci95, r.n, f"{r.seconds_per_epoch:.2f}"])


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--model-type", type=int, choices=(1, 2, 3), default=2)
    ap.add_argument("--multiplier", type=float, default=0.25)
    ap.add_argument("--cae-epochs", type=int, default=20)
    ap.add_argument("--skip-cae", action="store_true")
    ap.add_argument("--out", default="runs/sweep")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    records = synthwave.synth_dataset(synthwave.SynthConfig(trial_multiplier=args.multiplier))
    train, test = pipeline.prepare(records, pipeline.SplitSpec.scaled(args.multiplier), args.model_type)
    cae_cfg = replace(trainer.CAE_DEFAULTS, epochs=args.cae_epochs)
    if not args.skip_cae:
        write(out / "sweep_cae.csv", trainer.sweep_cae(args.model_type, train, test, config=cae_cfg))

    # FFNN sweep runs on the latents of a default-sized CAE
    fw = trainer.train_framework(train, None, cae_cfg, trainer.FFNN_DEFAULTS)
    ztr = inspect.latent_features(fw.cae, train.data)
    zte = inspect.latent_features(fw.cae, test.data)
    write(out / "sweep_ffnn.csv", trainer.sweep_ffnn((ztr, train.labels), (zte, test.labels)))
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
