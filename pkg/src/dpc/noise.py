"""Synthetic label corruption.

Both injectors start from the ground-truth labels, so re-injecting into an
already corrupted dataset replaces the old noise rather than stacking on it.
"""

import numpy as np


def inject_symmetric(ds, rate, seed=0):
    """Flip exactly ``round(rate * N)`` labels, each to a uniformly chosen *other* class.

    Flipped labels never keep their true class, so ``rate`` is the realized
    fraction of wrong labels.
    """
    if not 0 <= rate < 1:
        raise ValueError("rate must be in [0, 1)")
    rng = np.random.default_rng(seed)
    n = len(ds)
    k = int(round(rate * n))
    idx = rng.choice(n, size=k, replace=False)
    y = ds.y_true.copy()
    y[idx] = (y[idx] + rng.integers(1, ds.n_classes, size=k)) % ds.n_classes
    return ds.with_noisy(y)


def cyclic_map(n_classes):
    return np.roll(np.arange(n_classes), -1)


def inject_asymmetric(ds, rate, class_map=None, seed=0):
    """Flip ``round(rate * n_c)`` examples of every class c to ``class_map[c]``."""
    if not 0 <= rate < 1:
        raise ValueError("rate must be in [0, 1)")
    cmap = cyclic_map(ds.n_classes) if class_map is None else np.asarray(class_map, dtype=np.int64)
    if cmap.shape != (ds.n_classes,):
        raise ValueError("class_map needs one target per class")
    if np.any(cmap == np.arange(ds.n_classes)):
        raise ValueError("class_map must not map a class to itself")
    rng = np.random.default_rng(seed)
    y = ds.y_true.copy()
    for c in range(ds.n_classes):
        members = np.flatnonzero(ds.y_true == c)
        k = int(round(rate * len(members)))
        y[rng.choice(members, size=k, replace=False)] = cmap[c]
    return ds.with_noisy(y)


def inject(ds, kind, rate, seed=0, class_map=None):
    if kind == "symmetric":
        return inject_symmetric(ds, rate, seed)
    if kind == "asymmetric":
        return inject_asymmetric(ds, rate, class_map, seed)
    if kind == "none":
        return ds.with_noisy(ds.y_true.copy())
    raise ValueError(f"unknown noise type {kind!r}")
