"""Warm-up, per-epoch partitioning and the mixed semi-supervised epoch.

After warm-up on all noisy labels, every epoch partitions the training set
with the current supervised head, then trains on mixed pairs:

* clean-anchored pairs feed the supervised loss, which is the
  ``lambda'``-weighted EDL loss of the two *original* examples (never of the
  mixed input);
* mislabeled-anchored pairs feed the L2 loss between the mixed pseudo-target
  and the calibrated output of the second head on the mixed input.

The ``small_loss_baseline`` method swaps in a single-head, softmax,
small-loss-selection recipe in the style of DivideMix.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from .calibration import calibrated_softmax, softmax
from .config import TrainConfig
from .losses import EDLLossConfig, cross_entropy, edl_loss, l2_prob_loss
from .metrics import accuracy, ece, partition_quality
from .nn import MLP, SGD
from .selection import (
    DegenerateInputError,
    large_margin_partition,
    margin,
    median_partition,
    selection_auc,
    small_loss_partition,
)

log = logging.getLogger(__name__)

STREAMS = ("init", "noise", "mixup", "shuffle", "gmm", "data")


class RandomStreams:
    """Named, independent generators split from one root seed."""

    def __init__(self, seed):
        children = np.random.SeedSequence(seed).spawn(len(STREAMS))
        for name, child in zip(STREAMS, children):
            setattr(self, name, np.random.default_rng(child))

    def int_seed(self, name):
        return int(getattr(self, name).integers(2**31 - 1))


@dataclass
class MixedPair:
    """Mixed inputs/targets; works for one pair or a batch (``lam`` shape ``(N,)``).

    ``lam`` is already ``max(lambda, 1 - lambda)``.
    """

    x: np.ndarray
    target: np.ndarray
    lam: np.ndarray
    x1: np.ndarray
    x2: np.ndarray
    t1: np.ndarray
    t2: np.ndarray


def mix_pair(a, b, alpha, rng):
    """Mix ``a = (x1, t1)`` with ``b = (x2, t2)`` using ``lambda ~ Beta(alpha, alpha)``."""
    (x1, t1), (x2, t2) = a, b
    x1 = np.asarray(x1, dtype=np.float64)
    batch = x1.ndim == 2
    lam = rng.beta(alpha, alpha, size=len(x1) if batch else None)
    return mix_with(x1, t1, x2, t2, lam)


def mix_with(x1, t1, x2, t2, lam):
    x1, x2 = np.asarray(x1, dtype=np.float64), np.asarray(x2, dtype=np.float64)
    t1, t2 = np.asarray(t1, dtype=np.float64), np.asarray(t2, dtype=np.float64)
    lam = np.maximum(lam, 1.0 - np.asarray(lam, dtype=np.float64))
    w = lam[:, None] if np.ndim(lam) else lam
    return MixedPair(w * x1 + (1 - w) * x2, w * t1 + (1 - w) * t2, lam, x1, x2, t1, t2)


def pseudo_targets(model, x, gamma=None, head="sup", sharpen_t=0.0):
    """Detached predicted probabilities; calibrated when ``gamma`` is given."""
    o = model.forward(x, head)
    p = softmax(o) if gamma is None else calibrated_softmax(o, gamma)
    if sharpen_t > 0:
        p = p ** (1.0 / sharpen_t)
        p /= p.sum(axis=-1, keepdims=True)
    return p


def supervised_loss(pair, model, loss_cfg):
    """``lam * L_edl(x1, y1) + (1 - lam) * L_edl(x2, y2)`` averaged over the batch.

    Both terms are evaluated on the original inputs through the supervised
    head. Returns ``(value, parameter_gradients)``.
    """
    x1, x2 = np.atleast_2d(pair.x1), np.atleast_2d(pair.x2)
    lam = np.atleast_1d(pair.lam)
    n = len(x1)
    logits = model.forward_train(np.vstack([x1, x2]), "sup")
    targets = np.vstack([np.atleast_2d(pair.t1), np.atleast_2d(pair.t2)])
    loss = edl_loss(logits, targets, loss_cfg)
    weights = np.concatenate([lam, 1.0 - lam]) / n
    value = float(weights @ loss.value)
    return value, model.backward(loss.grad_logits * weights[:, None])


def unsupervised_loss(pair, model, gamma=None, head="uns"):
    """Mean squared L2 gap between the mixed target and the head's probabilities on the mixed input."""
    logits = model.forward_train(np.atleast_2d(pair.x), head)
    loss = l2_prob_loss(logits, np.atleast_2d(pair.target), gamma).mean()
    return float(loss.value), model.backward(loss.grad_logits)


def mixed_ce_loss(pair, model):
    """Cross-entropy of the mixed input against the mixed label (baseline recipe)."""
    logits = model.forward_train(np.atleast_2d(pair.x), "sup")
    loss = cross_entropy(logits, np.atleast_2d(pair.target)).mean()
    return float(loss.value), model.backward(loss.grad_logits)


def _batches(n, batch_size, rng):
    order = rng.permutation(n)
    return [order[i : i + batch_size] for i in range(0, n, batch_size)]


def supervised_epoch(model, opt, ds, cfg, rng, loss="edl", idx=None):
    """One pass of plain supervised training on the given labels (warm-up / CE baseline)."""
    idx = np.arange(len(ds)) if idx is None else np.asarray(idx)
    onehot = ds.y_noisy_onehot
    loss_cfg = EDLLossConfig(cfg.beta, cfg.gamma(ds.n_classes))
    total = 0.0
    for b in _batches(len(idx), cfg.batch_size, rng):
        rows = idx[b]
        logits = model.forward_train(ds.X[rows], "sup")
        lv = (edl_loss(logits, onehot[rows], loss_cfg) if loss == "edl" else cross_entropy(logits, onehot[rows])).mean()
        opt.step(model, model.backward(lv.grad_logits))
        total += float(lv.value) * len(rows)
    return total / len(idx)


def warmup_epoch(model, opt, ds, cfg, rng):
    return supervised_epoch(model, opt, ds, cfg, rng, loss=cfg.warmup_loss)


def per_example_loss(model, ds, cfg, kind):
    o = model.forward(ds.X, "sup")
    if kind == "edl":
        return edl_loss(o, ds.y_noisy_onehot, EDLLossConfig(cfg.beta, cfg.gamma(ds.n_classes))).value
    return cross_entropy(o, ds.y_noisy_onehot).value


def compute_partition(model, ds, cfg, criterion="margin", loss_kind="edl", seed=None):
    """Partition the training set with the current supervised head."""
    margins = margin(model.forward(ds.X, "sup"), ds.y_noisy)
    losses = per_example_loss(model, ds, cfg, loss_kind)
    if criterion == "margin":
        values, select, larger_clean = margins, large_margin_partition, True
    else:
        values, select, larger_clean = losses, small_loss_partition, False
    try:
        res = select(values, cfg.gmm_tol, cfg.gmm_max_iter, cfg.threshold, seed, cfg.normalize_scores)
        if res.gmm.separation() < cfg.min_separation:
            log.info("GMM separation %.2f below %.2f; keeping every example", res.gmm.separation(), cfg.min_separation)
            res.clean_posterior = np.ones(len(values))
            res.assigned_clean = np.ones(len(values), dtype=bool)
    except DegenerateInputError:
        log.warning("degenerate %s distribution; splitting at the median", criterion)
        res = median_partition(values, larger_is_clean=larger_clean)
        res.criterion = criterion
    res.margins, res.losses = margins, losses
    return res


@dataclass
class Recipe:
    """Method-dependent pieces of the semi-supervised epoch."""

    sup: str = "edl"  # "edl": decomposed EDL loss; "ce_mixed": CE on mixed input
    uns_head: str = "uns"
    calibrated: bool = True
    criterion: str = "margin"
    warmup_loss: str = "edl"

    @classmethod
    def for_method(cls, method, cfg):
        if method == "dpc":
            return cls("edl", "uns" if cfg.two_heads else "sup", True, cfg.criterion, cfg.warmup_loss)
        if method == "small_loss_baseline":
            return cls("ce_mixed", "sup", False, "small_loss", "ce")
        if method == "ce_baseline":
            return cls("ce", "sup", False, "small_loss", "ce")
        raise ValueError(f"unknown method {method!r}")


def lambda_uns_at(cfg, epoch, step, n_steps):
    if cfg.rampup_epochs == 0:
        return cfg.lambda_uns
    progress = (epoch - cfg.warmup_epochs + (step + 1) / n_steps) / cfg.rampup_epochs
    return cfg.lambda_uns * float(np.clip(progress, 0.0, 1.0))


def train_epoch(model, opt, part, ds, cfg, streams, epoch=None, recipe=None):
    """One semi-supervised epoch over the clean set; returns a stats dict.

    Clean anchors are paired with partners from the clean set (both need
    given labels); mislabeled anchors are paired with partners from the
    whole training set. Falls back to a warm-up epoch if nothing is clean.
    """
    recipe = recipe or Recipe()
    epoch = cfg.warmup_epochs if epoch is None else epoch
    gamma = cfg.gamma(ds.n_classes) if recipe.calibrated else None
    loss_cfg = EDLLossConfig(cfg.beta, cfg.gamma(ds.n_classes))
    clean, noisy = part.clean_idx, part.noisy_idx
    if len(clean) == 0:
        log.warning("epoch %s: empty clean set, running a warm-up epoch instead", epoch)
        value = supervised_epoch(model, opt, ds, cfg, streams.shuffle, loss=recipe.warmup_loss)
        return {"loss_sup": value, "loss_uns": 0.0, "loss_total": value, "lambda_uns": 0.0}
    onehot = ds.y_noisy_onehot
    batches = _batches(len(clean), cfg.batch_size, streams.shuffle)
    n_steps = len(batches)
    use_uns = len(noisy) > 0 and cfg.lambda_uns > 0
    # no draws for the unlabeled side when it is switched off
    noisy_order = streams.shuffle.permutation(noisy) if use_uns else noisy
    pseudo_head = cfg.pseudo_head if recipe.sup == "edl" else "sup"
    cursor = 0
    sums = {"loss_sup": 0.0, "loss_uns": 0.0, "loss_total": 0.0}
    lam_uns = 0.0
    for step, b in enumerate(batches):
        a = clean[b]
        partner = clean[streams.shuffle.integers(len(clean), size=len(a))]
        lam = streams.mixup.beta(cfg.mixup_alpha, cfg.mixup_alpha, size=len(a))
        pair = mix_with(ds.X[a], onehot[a], ds.X[partner], onehot[partner], lam)
        if recipe.sup == "edl":
            sup_val, grads = supervised_loss(pair, model, loss_cfg)
        else:
            sup_val, grads = mixed_ce_loss(pair, model)
        uns_val = 0.0
        lam_uns = lambda_uns_at(cfg, epoch, step, n_steps)
        if use_uns and lam_uns > 0:
            take = np.take(noisy_order, np.arange(cursor, cursor + len(a)), mode="wrap")
            cursor = (cursor + len(a)) % len(noisy_order)
            u_partner = streams.shuffle.integers(len(ds), size=len(take))
            lam_u = streams.mixup.beta(cfg.mixup_alpha, cfg.mixup_alpha, size=len(take))
            rho1 = pseudo_targets(model, ds.X[take], gamma, pseudo_head, cfg.sharpen_t)
            rho2 = pseudo_targets(model, ds.X[u_partner], gamma, pseudo_head, cfg.sharpen_t)
            upair = mix_with(ds.X[take], rho1, ds.X[u_partner], rho2, lam_u)
            uns_val, ugrads = unsupervised_loss(upair, model, gamma, recipe.uns_head)
            grads = {k: grads[k] + lam_uns * ugrads[k] for k in grads}
        opt.step(model, grads)
        sums["loss_sup"] += sup_val
        sums["loss_uns"] += uns_val
        sums["loss_total"] += sup_val + lam_uns * uns_val
    stats = {k: v / n_steps for k, v in sums.items()}
    stats["lambda_uns"] = lam_uns
    return stats


@dataclass
class EpochRecord:
    epoch: int
    phase: str
    lr: float
    train_acc: float
    test_acc: float = None
    ece: float = None
    selection_auc: float = None
    clean_precision: float = None
    clean_recall: float = None
    n_clean: int = None
    loss_sup: float = None
    loss_uns: float = None
    loss_total: float = None
    lambda_uns: float = None


METRIC_COLUMNS = [f for f in EpochRecord.__dataclass_fields__]


@dataclass
class TrainResult:
    model: MLP
    history: list
    partitions: dict = field(default_factory=dict)
    method: str = "dpc"
    gamma: float = None


def predictive_probs(model, x, method, cfg, n_classes):
    """Each model is scored under its own predictive distribution."""
    o = model.forward(x, cfg.eval_head if method == "dpc" else "sup")
    return calibrated_softmax(o, cfg.gamma(n_classes)) if method == "dpc" else softmax(o)


def selection_scores(model, ds, method, cfg):
    """Clean-score used for AUC: margin for DPC, negative loss for the baselines."""
    if method == "dpc" and cfg.criterion == "margin":
        return margin(model.forward(ds.X, "sup"), ds.y_noisy)
    kind = "edl" if method == "dpc" else "ce"
    return -per_example_loss(model, ds, cfg, kind)


def evaluate(model, train, test, method, cfg, part=None):
    out = {}
    p_train = predictive_probs(model, train.X, method, cfg, train.n_classes)
    out["train_acc"] = accuracy(p_train.argmax(1), train.y_noisy)
    if test is not None and len(test):
        p = predictive_probs(model, test.X, method, cfg, test.n_classes)
        pred = p.argmax(1)
        out["test_acc"] = accuracy(pred, test.y_true)
        out["ece"] = ece(p.max(1), pred, test.y_true, cfg.ece_bins).ece
    corrupted = train.corrupted
    if train.has_truth and 0 < corrupted.sum() < len(train):
        out["selection_auc"] = selection_auc(selection_scores(model, train, method, cfg), corrupted)
    if part is not None and train.has_truth:
        prec, rec, _ = partition_quality(part.assigned_clean, corrupted)
        out["clean_precision"], out["clean_recall"] = prec, rec
        out["n_clean"] = int(part.assigned_clean.sum())
    return out


def fit(train, cfg: TrainConfig, method="dpc", test=None, streams=None, on_epoch=None):
    """Train from scratch; returns the model, per-epoch records and partitions.

    ``on_epoch(record, partition)`` is called after every epoch.
    """
    cfg.validate()
    streams = streams or RandomStreams(cfg.seed)
    recipe = Recipe.for_method(method, cfg)
    model = MLP(train.dim, cfg.hidden, train.n_classes, seed=streams.int_seed("init"))
    opt = SGD(cfg.lr, cfg.momentum, cfg.weight_decay)
    history, partitions = [], {}
    gmm_seed = streams.int_seed("gmm")
    for epoch in range(cfg.epochs):
        opt.lr = cfg.lr_at(epoch)
        part = None
        if method == "ce_baseline":
            value = supervised_epoch(model, opt, train, cfg, streams.shuffle, loss="ce")
            phase, stats = "ce", {"loss_sup": value, "loss_total": value}
        elif epoch < cfg.warmup_epochs:
            value = supervised_epoch(model, opt, train, cfg, streams.shuffle, loss=recipe.warmup_loss)
            phase, stats = "warmup", {"loss_sup": value, "loss_total": value}
        else:
            loss_kind = "edl" if recipe.sup == "edl" else "ce"
            part = compute_partition(model, train, cfg, recipe.criterion, loss_kind, gmm_seed)
            partitions[epoch] = part
            stats = train_epoch(model, opt, part, train, cfg, streams, epoch, recipe)
            phase = "ssl"
        record = EpochRecord(epoch=epoch, phase=phase, lr=opt.lr, train_acc=0.0, **stats)
        for k, v in evaluate(model, train, test, method, cfg, part).items():
            setattr(record, k, v)
        history.append(record)
        if on_epoch is not None:
            on_epoch(record, part)
    gamma = cfg.gamma(train.n_classes) if method == "dpc" else None
    return TrainResult(model, history, partitions, method, gamma)
