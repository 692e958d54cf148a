"""Train Type II with and without one load level and compare load predictions.

    python3 scripts/robustness.py --exclude-load 10 --out runs/robustness
"""

import argparse
import json
import logging
from pathlib import Path

from wavestate import analysis, pipeline, synthwave, trainer


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--model-type", type=int, choices=(1, 2, 3), default=2)
    ap.add_argument("--multiplier", type=float, default=0.25)
    ap.add_argument("--exclude-load", type=int, default=10)
    ap.add_argument("--out", default="runs/robustness")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")

    records = synthwave.synth_dataset(synthwave.SynthConfig(trial_multiplier=args.multiplier))
    rep = analysis.robustness_experiment(
        args.model_type, records, args.exclude_load, pipeline.SplitSpec.scaled(args.multiplier),
        trainer.CAE_DEFAULTS, trainer.FFNN_DEFAULTS,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "robustness.json").write_text(json.dumps(rep.summary(), indent=2, sort_keys=True) + "\n")
    for name, ev in (("full", rep.full), ("reduced", rep.reduced)):
        print(name)
        for load, box in ev.load_boxes.items():
            print(f"  {load:>2} kN  mean {box['mean']:6.2f}  95% [{box['lo']:6.2f}, {box['hi']:6.2f}]  acc {ev.load_accuracy[load]:.2f}")


if __name__ == "__main__":
    main()
