"""Clean/mislabeled partitioning from per-example scores.

The large-margin criterion fits a two-component 1-D GMM to
``o_given - max_{j != given} o_j`` and keeps the larger-mean component as
clean; the small-loss baseline fits the same mixture to per-example losses
and keeps the smaller-mean component.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp
from scipy.stats import rankdata

LOG_2PI = np.log(2.0 * np.pi)


class DegenerateInputError(ValueError):
    """Raised when a two-component fit is meaningless (all values equal)."""


def _label_index(o, y):
    y = np.asarray(y)
    if y.shape == o.shape:
        return np.argmax(y, axis=-1)
    return y.astype(np.int64)


def margin(o, y):
    """Given-label logit minus the largest complementary logit.

    ``y`` may be one-hot (same shape as ``o``) or class indices.
    """
    o = np.asarray(o, dtype=np.float64)
    if o.shape[-1] < 2:
        raise ValueError("need at least two classes")
    c = _label_index(o, y)
    given = np.take_along_axis(o, np.expand_dims(c, -1), axis=-1)[..., 0]
    others = o.copy()
    np.put_along_axis(others, np.expand_dims(c, -1), -np.inf, axis=-1)
    out = given - others.max(axis=-1)
    return float(out) if out.ndim == 0 else out


@dataclass
class GMM1D:
    means: np.ndarray
    variances: np.ndarray
    weights: np.ndarray
    var_floor: float
    n_iter: int = 0
    log_likelihood: float = -np.inf
    history: list = field(default_factory=list)

    def log_joint(self, x):
        """log(weight_k * N(x | mean_k, var_k)), shape ``(N, 2)``."""
        x = np.asarray(x, dtype=np.float64)[:, None]
        return (
            np.log(self.weights)
            - 0.5 * (LOG_2PI + np.log(self.variances))
            - 0.5 * (x - self.means) ** 2 / self.variances
        )

    def posterior(self, x):
        lj = self.log_joint(x)
        return np.exp(lj - logsumexp(lj, axis=1, keepdims=True))

    def separation(self):
        """Ashman's D; values above 2 indicate cleanly separated modes."""
        return float(np.sqrt(2.0) * abs(self.means[1] - self.means[0]) / np.sqrt(self.variances.sum()))

    @property
    def well_separated(self):
        return self.separation() > 2.0


def fit_gmm(values, tol=1e-6, max_iter=200, seed=None):
    """Fit a two-component 1-D Gaussian mixture by EM.

    Initialization splits the sorted values at the median (weights 0.5/0.5),
    so the fit is deterministic; ``seed`` is accepted for interface symmetry
    with the other randomized stages and is not consumed. Stops when the
    relative log-likelihood gain drops below ``tol``. Component 0 always has
    the smaller mean.
    """
    x = np.asarray(values, dtype=np.float64).ravel()
    if x.size < 10:
        raise ValueError("fit_gmm needs at least 10 values")
    span = x.max() - x.min()
    if not span > 0:
        raise DegenerateInputError("all values are equal; fall back to a threshold-at-median partition")
    floor = 1e-6 * span**2
    xs = np.sort(x)
    halves = (xs[: x.size // 2], xs[x.size // 2 :])
    gmm = GMM1D(
        means=np.array([h.mean() for h in halves]),
        variances=np.maximum([h.var() for h in halves], floor),
        weights=np.array([0.5, 0.5]),
        var_floor=floor,
    )
    prev = None
    for it in range(1, max_iter + 1):
        lj = gmm.log_joint(x)
        norm = logsumexp(lj, axis=1, keepdims=True)
        ll = float(norm.sum())
        gmm.history.append(ll)
        if prev is not None and abs(ll - prev) < tol * abs(prev):
            break
        prev = ll
        resp = np.exp(lj - norm)
        nk = resp.sum(axis=0)
        # a component that lost all mass keeps its old parameters
        nk_safe = np.maximum(nk, np.finfo(float).tiny)
        means = (resp * x[:, None]).sum(axis=0) / nk_safe
        variances = (resp * (x[:, None] - means) ** 2).sum(axis=0) / nk_safe
        alive = nk > 0
        gmm.means = np.where(alive, means, gmm.means)
        gmm.variances = np.where(alive, np.maximum(variances, floor), gmm.variances)
        gmm.weights = np.clip(nk / x.size, 1e-12, None)
        gmm.weights /= gmm.weights.sum()
        gmm.n_iter = it
    gmm.log_likelihood = gmm.history[-1]
    order = np.argsort(gmm.means, kind="stable")
    gmm.means, gmm.variances, gmm.weights = gmm.means[order], gmm.variances[order], gmm.weights[order]
    return gmm


@dataclass
class PartitionResult:
    scores: np.ndarray  # the per-example values the mixture was fit on (margin or loss)
    clean_posterior: np.ndarray
    assigned_clean: np.ndarray
    threshold: float
    gmm: GMM1D = None
    criterion: str = "margin"
    margins: np.ndarray = None  # filled in by the training loop for partition dumps
    losses: np.ndarray = None

    @property
    def clean_idx(self):
        return np.flatnonzero(self.assigned_clean)

    @property
    def noisy_idx(self):
        return np.flatnonzero(~self.assigned_clean)


def partition(margins, gmm, threshold=0.5, clean="larger"):
    """Assign clean where the posterior of the clean component exceeds ``threshold``.

    ``margins`` must be on the scale ``gmm`` was fit on.
    """
    post = gmm.posterior(margins)[:, 1 if clean == "larger" else 0]
    return PartitionResult(np.asarray(margins, dtype=np.float64), post, post > threshold, threshold, gmm)


def minmax(values):
    v = np.asarray(values, dtype=np.float64)
    span = v.max() - v.min()
    return (v - v.min()) / span if span > 0 else np.zeros_like(v)


def median_partition(values, larger_is_clean=True):
    """Fallback when a mixture fit is degenerate: split at the median."""
    v = np.asarray(values, dtype=np.float64)
    med = np.median(v)
    clean = v > med if larger_is_clean else v < med
    return PartitionResult(v, clean.astype(np.float64), clean, 0.5, None)


def _select(values, clean, tol, max_iter, threshold, seed, normalize, criterion):
    raw = np.asarray(values, dtype=np.float64)
    fit_on = minmax(raw) if normalize else raw
    gmm = fit_gmm(fit_on, tol=tol, max_iter=max_iter, seed=seed)
    res = partition(fit_on, gmm, threshold, clean=clean)
    res.scores = raw
    res.criterion = criterion
    return res


def large_margin_partition(margins, tol=1e-6, max_iter=200, threshold=0.5, seed=None, normalize=True):
    """Fit the mixture to (min-max normalized) margins; the larger-mean component is clean."""
    return _select(margins, "larger", tol, max_iter, threshold, seed, normalize, "margin")


def small_loss_partition(losses, tol=1e-6, max_iter=200, threshold=0.5, seed=None, normalize=True):
    """Fit the mixture to (min-max normalized) losses; the smaller-mean component is clean."""
    return _select(losses, "smaller", tol, max_iter, threshold, seed, normalize, "small_loss")


def selection_auc(scores, corrupted):
    """ROC AUC of ``scores`` (higher = cleaner) for separating clean from corrupted.

    Mann-Whitney rank-sum with average ranks for ties.
    """
    s = np.asarray(scores, dtype=np.float64)
    clean = ~np.asarray(corrupted, dtype=bool)
    n_pos, n_neg = int(clean.sum()), int((~clean).sum())
    if n_pos == 0 or n_neg == 0:
        raise ValueError("selection_auc needs both clean and corrupted examples")
    ranks = rankdata(s)
    return float((ranks[clean].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))
