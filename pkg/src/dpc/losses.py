"""Per-example losses with analytic gradients w.r.t. the logits.

Every loss returns a :class:`LossValue` holding per-example values ``(N,)``
and per-example logit gradients ``(N, C)`` (or a scalar and ``(C,)`` for a
single example). Reductions over a batch are left to the caller, which
keeps the mixing weights of the supervised loss explicit.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .calibration import DirichletParams, calibrated_log_terms, logits_to_dirichlet, softmax
from .special import digamma, log_gamma, trigamma


@dataclass(frozen=True)
class EDLLossConfig:
    beta: float = 0.5
    gamma: float = 2.5

    def __post_init__(self):
        if self.beta < 0:
            raise ValueError("beta must be >= 0")
        if not self.gamma > 0:
            raise ValueError("gamma must be > 0")


@dataclass
class LossValue:
    value: np.ndarray
    grad_logits: np.ndarray

    def __add__(self, other):
        return LossValue(self.value + other.value, self.grad_logits + other.grad_logits)

    def scaled(self, weight):
        w = np.asarray(weight, dtype=np.float64)
        return LossValue(self.value * w, self.grad_logits * w[..., None])

    def mean(self):
        """Batch mean and the gradient of that mean."""
        n = np.shape(self.value)[0] if np.ndim(self.value) else 1
        return LossValue(np.mean(self.value), self.grad_logits / n)


def _wrap(loss, single):
    if single:
        return LossValue(float(loss.value[0]), loss.grad_logits[0])
    return loss


def _batch(x):
    x = np.asarray(x, dtype=np.float64)
    return (x[None, :], True) if x.ndim == 1 else (x, False)


def nll_loss(params: DirichletParams, y):
    """Negative log marginal likelihood ``ln(sum_j alpha_j) - ln(alpha_c)``."""
    alpha, single = _batch(params.alpha)
    y, _ = _batch(y)
    total = alpha.sum(axis=1)
    given = (y * alpha).sum(axis=1)
    # ln(S / alpha_c) = log1p(sum_{j != c} alpha_j / alpha_c) stays accurate as alpha_c grows
    value = np.log1p(((1.0 - y) * alpha).sum(axis=1) / given)
    dalpha = 1.0 / total[:, None] - y / alpha
    grad = dalpha * (alpha - 1.0)
    return _wrap(LossValue(value, grad), single)


def kl_loss(params: DirichletParams, y):
    """KL(Dir(alpha_tilde) || Dir(1)) / C with the given-label entry of alpha replaced by 1."""
    alpha, single = _batch(params.alpha)
    y, _ = _batch(y)
    n_cls = alpha.shape[1]
    # alpha >= 1 for finite logits; the clamp only guards underflow
    alpha_c = np.maximum(alpha, 1.0)
    alpha_t = y + (1.0 - y) * alpha_c
    total = alpha_t.sum(axis=1)
    excess = alpha_t - 1.0
    value = (
        log_gamma(total)
        - log_gamma(float(n_cls))
        - log_gamma(alpha_t).sum(axis=1)
        + (excess * (digamma(alpha_t) - digamma(total)[:, None])).sum(axis=1)
    ) / n_cls
    dalpha_t = (excess * trigamma(alpha_t) - (trigamma(total) * (total - n_cls))[:, None]) / n_cls
    grad = dalpha_t * (1.0 - y) * (alpha - 1.0) * (alpha >= 1.0)
    return _wrap(LossValue(value, grad), single)


def edl_loss(o, y, cfg: EDLLossConfig):
    params = logits_to_dirichlet(o, cfg.gamma)
    loss = nll_loss(params, y)
    if cfg.beta == 0:
        return loss
    return loss + kl_loss(params, y).scaled(cfg.beta)


def cross_entropy(o, y):
    """Softmax cross-entropy against (possibly soft) targets."""
    o, single = _batch(o)
    y, _ = _batch(y)
    log_p = o - logsumexp(o, axis=1, keepdims=True)
    value = -(y * log_p).sum(axis=1)
    grad = softmax(o) * y.sum(axis=1, keepdims=True) - y
    return _wrap(LossValue(value, grad), single)


def calibrated_cross_entropy(o, y, gamma):
    """Cross-entropy under the calibrated softmax."""
    o, single = _batch(o)
    y, _ = _batch(y)
    terms, norm = calibrated_log_terms(o, gamma)
    value = -(y * (terms - norm)).sum(axis=1)
    # d ln(e^o + gamma)/do = e^o / (e^o + gamma); d norm/do = e^o / sum(e^o + gamma)
    d_terms = np.exp(o - terms)
    d_norm = np.exp(o - norm)
    grad = d_norm * y.sum(axis=1, keepdims=True) - y * d_terms
    return _wrap(LossValue(value, grad), single)


def l2_prob_loss(o, target, gamma=None):
    """Squared L2 distance between ``target`` and the predicted probabilities.

    ``gamma=None`` scores the plain softmax output, otherwise the calibrated one.
    """
    o, single = _batch(o)
    target, _ = _batch(target)
    if gamma is None:
        p = softmax(o)
        scale = p
    else:
        terms, norm = calibrated_log_terms(o, gamma)
        p = np.exp(terms - norm)
        # dp_c/do_k = (e^{o_k} / A) (delta_ck - p_c), A = sum_j (e^{o_j} + gamma)
        scale = np.exp(o - norm)
    diff = p - target
    value = (diff * diff).sum(axis=1)
    g = 2.0 * diff
    grad = scale * (g - (g * p).sum(axis=1, keepdims=True))
    return _wrap(LossValue(value, grad), single)
