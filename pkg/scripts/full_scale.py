"""Full-settings run: one model per held-out class, ten classes, 100 epochs.

Needs the dataset files under $OAAE_DATA_DIR (or --data-dir); nothing is downloaded.
Expect many CPU hours per dataset.

    python3 scripts/full_scale.py --dataset mnist --out results/mnist
"""
import argparse
from pathlib import Path

from oaae import experiments


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--dataset", choices=("mnist", "fashion-mnist", "cifar10"), default="mnist")
    parser.add_argument("--data-dir", default=None)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", default=None, help="output prefix (default results/<dataset>)")
    args = parser.parse_args()

    out = Path(args.out or f"results/{args.dataset}")
    out.parent.mkdir(parents=True, exist_ok=True)
    report = experiments.full_scale(args.dataset, args.seed, args.data_dir,
                                     checkpoint_dir=out.parent / f"{out.name}_checkpoints")
    report.write_csv(out.with_suffix(".csv"))
    report.write_json(out.with_suffix(".json"))
    print(report.table())


if __name__ == "__main__":
    main()
