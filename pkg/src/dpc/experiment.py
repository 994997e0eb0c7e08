"""Run directories: data preparation, training, and CSV/checkpoint emission."""

import csv
import logging
from pathlib import Path

import numpy as np

from .calibration import calibrated_softmax, softmax
from .data import GENERATORS, read_csv, write_csv
from .metrics import ece
from .nn import MLP
from .noise import inject
from .selection import margin, selection_auc
from .training import METRIC_COLUMNS, RandomStreams, fit

log = logging.getLogger(__name__)


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_table(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def prepare_data(spec, streams):
    """Training set (with injected noise) and optional clean test set."""
    if spec.train_csv:
        train = read_csv(spec.train_csv)
        test = read_csv(spec.test_csv, train.n_classes) if spec.test_csv else None
    else:
        gen = GENERATORS[spec.generator]
        data_seed = streams.int_seed("data")
        if spec.generator == "blobs":
            out = gen(spec.n_train, spec.n_classes, spec.dim, spec.separation, seed=data_seed, n_test=spec.n_test)
        else:
            out = gen(spec.n_train, spec.dim, spec.ring_noise, seed=data_seed, n_test=spec.n_test)
        train, test = out if spec.n_test else (out, None)
    if spec.noise_type != "none" and spec.noise_rate > 0:
        if spec.train_csv and train.has_truth:
            log.warning("%s already carries noisy labels; re-injecting from ground truth", spec.train_csv)
        train = inject(train, spec.noise_type, spec.noise_rate, seed=streams.int_seed("noise"))
    return train, test


def partition_rows(part, corrupted=None):
    for i in range(len(part.assigned_clean)):
        row = [i, part.margins[i], part.losses[i], part.clean_posterior[i], part.assigned_clean[i]]
        if corrupted is not None:
            row.append(corrupted[i])
        yield row


def run_experiment(spec):
    """Train per ``spec`` and populate ``spec.output_dir``; returns the run path.

    Besides metrics, partitions and the checkpoint, the exact training data
    (with noisy labels) and test data are saved for later ``diagnose`` runs.
    """
    spec.validate()
    out = Path(spec.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.snapshot").write_text(spec.dumps())
    streams = RandomStreams(spec.train.seed)
    train, test = prepare_data(spec, streams)
    write_csv(train, out / "train.csv", with_noise=True)
    if test is not None:
        write_csv(test, out / "test.csv", with_noise=False)
    corrupted = train.corrupted if train.has_truth else None
    part_header = ["index", "margin", "loss", "clean_posterior", "assigned_clean"]
    if corrupted is not None:
        part_header.append("is_corrupted")

    def on_epoch(record, part):
        if part is not None:
            write_table(out / f"partition_epoch{record.epoch}.csv", part_header, partition_rows(part, corrupted))
        log.info("epoch %d %s test_acc=%s", record.epoch, record.phase, record.test_acc)

    result = fit(train, spec.train, spec.method, test=test, streams=streams, on_epoch=on_epoch)
    write_table(
        out / "metrics.csv",
        METRIC_COLUMNS,
        ([getattr(r, c) for c in METRIC_COLUMNS] for r in result.history),
    )
    result.model.save(
        out / "checkpoint.npz",
        method=spec.method,
        gamma=spec.train.gamma(train.n_classes),
        eval_head=spec.train.eval_head,
        ece_bins=spec.train.ece_bins,
    )
    return out


def _histogram_rows(values, bins, value_range=None):
    counts, edges = np.histogram(values, bins=bins, range=value_range)
    return [(edges[i], edges[i + 1], int(counts[i])) for i in range(len(counts))]


def diagnose(checkpoint, dataset_csv, out_dir, n_bins=None, hist_bins=30):
    """Histograms, reliability data and a summary for a checkpoint on a dataset.

    Writes ``confidence_hist.csv``, ``given_logit_hist.csv``,
    ``margin_hist.csv``, ``reliability.csv`` and ``summary.csv``; the summary
    has a ``selection_auc`` column only when the dataset carries corruption
    flags. Returns the summary as a dict.
    """
    model = MLP.load(checkpoint)
    ds = read_csv(dataset_csv, model.n_classes)
    if ds.dim != model.d_in:
        raise ValueError(f"dataset has {ds.dim} features, checkpoint expects {model.d_in}")
    if ds.n_classes > model.n_classes:
        raise ValueError(f"dataset has {ds.n_classes} classes, checkpoint has {model.n_classes}")
    meta = model.meta
    method = meta.get("method", "dpc")
    n_bins = n_bins or meta.get("ece_bins", 15)
    o = model.forward(ds.X, meta.get("eval_head", "sup") if method == "dpc" else "sup")
    probs = calibrated_softmax(o, meta["gamma"]) if method == "dpc" else softmax(o)
    conf, pred = probs.max(1), probs.argmax(1)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_table(out / "confidence_hist.csv", ["bin_low", "bin_high", "count"], _histogram_rows(conf, hist_bins, (0.0, 1.0)))
    o_sup = model.forward(ds.X, "sup")
    given_logit = o_sup[np.arange(len(ds)), ds.y_noisy]
    write_table(out / "given_logit_hist.csv", ["bin_low", "bin_high", "count"], _histogram_rows(given_logit, hist_bins))
    margins = margin(o_sup, ds.y_noisy)
    write_table(out / "margin_hist.csv", ["bin_low", "bin_high", "count"], _histogram_rows(margins, hist_bins))
    report = ece(conf, pred, ds.y_true, n_bins)
    write_table(out / "reliability.csv", ["bin_low", "bin_high", "mean_conf", "acc", "count"], report.rows())
    summary = {"n": len(ds), "accuracy": float(np.mean(pred == ds.y_true)), "ece": report.ece}
    corrupted = ds.corrupted
    if ds.has_truth and 0 < corrupted.sum() < len(ds):
        summary["selection_auc"] = selection_auc(margins, corrupted)
    write_table(out / "summary.csv", list(summary), [list(summary.values())])
    return summary
