"""Per-epoch selection AUC for the margin and small-loss criteria.

Trains DPC once and, after every epoch, scores the training set with both
the margin of the supervised head and its negative per-example EDL loss.
"""

import argparse
from pathlib import Path

from dpc.config import load_spec
from dpc.experiment import prepare_data
from dpc.selection import margin, selection_auc
from dpc.training import RandomStreams, fit, per_example_loss

ROOT = Path(__file__).resolve().parents[1]


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--config", default=ROOT / "configs" / "symm50.toml")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epochs", type=int, default=30)
    args = p.parse_args(argv)

    spec = load_spec(args.config, [f"train.seed={args.seed}", f"train.epochs={args.epochs}"])
    streams = RandomStreams(args.seed)
    train, test = prepare_data(spec, streams)
    flags = train.corrupted
    print("epoch phase   margin_auc  loss_auc  test_acc")

    def score(record, part):
        if part is None:
            return
        print(
            f"{record.epoch:>5} {record.phase:<7} {selection_auc(part.margins, flags):>10.4f} "
            f"{selection_auc(-part.losses, flags):>9.4f} {record.test_acc:>9.4f}"
        )

    result = fit(train, spec.train, "dpc", test=test, streams=streams, on_epoch=score)
    final = result.model
    m = margin(final.forward(train.X, "sup"), train.y_noisy)
    loss = per_example_loss(final, train, spec.train, "edl")
    print(f"final   margin_auc={selection_auc(m, flags):.4f} loss_auc={selection_auc(-loss, flags):.4f}")


if __name__ == "__main__":
    main()
