"""Labeled datasets, synthetic generators and CSV round-tripping."""

import csv
from dataclasses import dataclass, replace

import numpy as np


@dataclass(frozen=True)
class LabeledDataset:
    """Features with given (possibly noisy) labels and hidden ground truth.

    ``has_truth`` is False for data read from a CSV that carries only a
    ``label`` column; then ``y_true`` just mirrors the given labels and the
    corruption flags carry no information.
    """

    X: np.ndarray
    y_true: np.ndarray
    y_noisy: np.ndarray
    n_classes: int
    has_truth: bool = True

    def __post_init__(self):
        if self.n_classes < 2:
            raise ValueError("need at least two classes")
        if not (len(self.X) == len(self.y_true) == len(self.y_noisy)):
            raise ValueError("X, y_true and y_noisy must have equal length")

    def __len__(self):
        return len(self.X)

    @property
    def dim(self):
        return self.X.shape[1]

    @property
    def corrupted(self):
        return self.y_noisy != self.y_true

    @property
    def y_noisy_onehot(self):
        return np.eye(self.n_classes)[self.y_noisy]

    def noise_rate(self):
        return float(self.corrupted.mean())

    def with_noisy(self, y_noisy):
        """Copy with new given labels measured against ``y_true``."""
        return replace(self, y_noisy=np.asarray(y_noisy, dtype=np.int64), has_truth=True)

    def subset(self, idx):
        return replace(self, X=self.X[idx], y_true=self.y_true[idx], y_noisy=self.y_noisy[idx])


def clean_dataset(X, y, n_classes=None):
    y = np.asarray(y, dtype=np.int64)
    n_classes = int(n_classes if n_classes is not None else y.max() + 1)
    return LabeledDataset(np.asarray(X, dtype=np.float64), y, y.copy(), n_classes)


def _balanced_labels(n, n_classes, rng):
    y = np.arange(n) % n_classes
    rng.shuffle(y)
    return y


def make_blobs(n, n_classes=4, dim=20, separation=3.0, seed=0, n_test=0):
    """Isotropic unit-variance Gaussian classes with pairwise center distance ``separation``.

    Centers are ``separation / sqrt(2)`` times orthonormal directions drawn at
    random, so every pair of classes is equally hard. Returns ``(train, test)``
    when ``n_test > 0``; both sets share the same centers.
    """
    if n_classes > dim:
        raise ValueError("blobs need dim >= n_classes")
    rng = np.random.default_rng(seed)
    basis, _ = np.linalg.qr(rng.normal(size=(dim, n_classes)))
    centers = basis.T * (separation / np.sqrt(2.0))

    def sample(m):
        y = _balanced_labels(m, n_classes, rng)
        return clean_dataset(centers[y] + rng.normal(size=(m, dim)), y, n_classes)

    train = sample(n)
    return (train, sample(n_test)) if n_test else train


def make_rings(n, dim=2, noise=0.15, seed=0, n_test=0):
    """Two concentric rings (radius 1 and 2) in the first two coordinates.

    Extra coordinates beyond the first two are pure N(0, noise^2) clutter.
    """
    if dim < 2:
        raise ValueError("rings need dim >= 2")
    rng = np.random.default_rng(seed)

    def sample(m):
        y = _balanced_labels(m, 2, rng)
        theta = rng.uniform(0.0, 2.0 * np.pi, size=m)
        radius = 1.0 + y + rng.normal(scale=noise, size=m)
        X = rng.normal(scale=noise, size=(m, dim))
        X[:, 0] = radius * np.cos(theta)
        X[:, 1] = radius * np.sin(theta)
        return clean_dataset(X, y, 2)

    train = sample(n)
    return (train, sample(n_test)) if n_test else train


GENERATORS = {"blobs": make_blobs, "rings": make_rings}


def read_csv(path, n_classes=None):
    """Read ``f0..f{d-1}, label[, noisy_label, is_corrupted]``.

    With a ``noisy_label`` column, ``label`` is the ground truth; without
    one, ``label`` is the given label and ground truth is unknown.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ValueError(f"{path}: empty file")
        rows = [r for r in reader if r]
    if not rows:
        raise ValueError(f"{path}: no data rows")
    feats = [i for i, h in enumerate(header) if h.startswith("f") and h[1:].isdigit()]
    feats.sort(key=lambda i: int(header[i][1:]))
    if not feats or "label" not in header:
        raise ValueError(f"{path}: need f0.. feature columns and a label column")
    col = {h: i for i, h in enumerate(header)}
    X = np.array([[float(r[i]) for i in feats] for r in rows], dtype=np.float64)
    y = np.array([int(r[col["label"]]) for r in rows], dtype=np.int64)
    has_truth = "noisy_label" in col
    y_noisy = np.array([int(r[col["noisy_label"]]) for r in rows], dtype=np.int64) if has_truth else y.copy()
    if n_classes is None:
        n_classes = int(max(y.max(), y_noisy.max()) + 1)
    return LabeledDataset(X, y, y_noisy, int(n_classes), has_truth)


def write_csv(ds, path, with_noise=True):
    """Write a dataset; ``with_noise`` adds ``noisy_label`` and ``is_corrupted``."""
    header = [f"f{j}" for j in range(ds.dim)] + ["label"]
    if with_noise:
        header += ["noisy_label", "is_corrupted"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for i in range(len(ds)):
            row = [repr(float(v)) for v in ds.X[i]] + [int(ds.y_true[i])]
            if with_noise:
                row += [int(ds.y_noisy[i]), int(ds.corrupted[i])]
            w.writerow(row)
