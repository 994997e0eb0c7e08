"""Softmax, the additive-constant calibrated softmax and the logit -> Dirichlet map.

All functions work on a single logit vector ``(C,)`` or a batch ``(N, C)``;
classes are always the last axis.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .special import log_exp_plus_const


def _logits(o):
    o = np.asarray(o, dtype=np.float64)
    if o.ndim == 0 or o.shape[-1] < 2:
        raise ValueError("need at least two classes")
    return o


def softmax(o):
    o = _logits(o)
    z = o - o.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def calibrated_log_terms(o, gamma):
    """Per-class ln(e^o + gamma) and its log-normalizer over classes."""
    o = _logits(o)
    terms = log_exp_plus_const(o, gamma)
    return terms, logsumexp(terms, axis=-1, keepdims=True)


def calibrated_softmax(o, gamma):
    """(e^{o_c} + gamma) / sum_j (e^{o_j} + gamma), evaluated in log space.

    Unlike ``softmax`` this is not invariant to shifting all logits by a
    constant: lowering every logit pulls the output toward uniform.
    """
    terms, norm = calibrated_log_terms(o, gamma)
    return np.exp(terms - norm)


@dataclass(frozen=True)
class DirichletParams:
    """Dirichlet concentration ``alpha = exp(o)/gamma + 1`` for each example."""

    alpha: np.ndarray
    gamma: float

    @property
    def evidence(self):
        return self.gamma * (self.alpha - 1.0)

    @property
    def strength(self):
        return self.alpha.sum(axis=-1)

    def mean(self):
        return self.alpha / self.alpha.sum(axis=-1, keepdims=True)


def logits_to_dirichlet(o, gamma):
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    o = _logits(o)
    return DirichletParams(alpha=np.exp(o) / gamma + 1.0, gamma=float(gamma))


def gradient_shrinkage(o, y, c, gamma):
    """Gap between the softmax-CE and calibrated-CE gradients at a complementary class.

    Returns ``gamma*C*e^{o_c} / (sum_j e^{o_j} * sum_j (e^{o_j} + gamma))``,
    which is strictly positive: calibration always weakens the push-down on
    complementary logits.
    """
    o = _logits(o)
    y = np.asarray(y)
    if o.ndim != 1:
        raise ValueError("expects a single logit vector")
    if y[c] != 0:
        raise ValueError("c must be a complementary class (y_c == 0)")
    n_cls = o.shape[-1]
    log_total = logsumexp(o)
    log_calib_total = np.logaddexp(log_total, np.log(n_cls * gamma))
    return float(np.exp(np.log(gamma * n_cls) + o[c] - log_total - log_calib_total))
