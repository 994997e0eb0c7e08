"""Central-difference checks of every analytic gradient in the package."""

from dataclasses import dataclass

import numpy as np

from .calibration import gradient_shrinkage, logits_to_dirichlet
from .losses import (
    EDLLossConfig,
    calibrated_cross_entropy,
    cross_entropy,
    edl_loss,
    kl_loss,
    l2_prob_loss,
    nll_loss,
)
from .nn import MLP

RTOL = 1e-4
ATOL = 1e-7


@dataclass
class CheckResult:
    name: str
    instances: int
    worst: float  # max of |analytic - numeric| / (atol + rtol * |numeric|); pass iff <= 1
    passed: bool

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        return f"{status} {self.name:<22} instances={self.instances:<5} worst_ratio={self.worst:.3g}"


def numeric_grad(f, x, h=1e-5):
    """Central differences of scalar ``f`` at every entry of ``x``."""
    x = np.array(x, dtype=np.float64)
    g = np.zeros_like(x)
    flat, gflat = x.reshape(-1), g.reshape(-1)
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + h
        up = f(x)
        flat[i] = old - h
        down = f(x)
        flat[i] = old
        gflat[i] = (up - down) / (2 * h)
    return g


def violation(analytic, numeric, rtol=RTOL, atol=ATOL):
    return float(np.max(np.abs(analytic - numeric) / (atol + rtol * np.abs(numeric))))


def _random_case(rng, sizes):
    n_cls = int(rng.choice(sizes))
    o = rng.normal(scale=2.0, size=n_cls)
    y = np.eye(n_cls)[rng.integers(n_cls)]
    return o, y


def _logit_suite(name, loss_fn, n, sizes, rng, rtol, atol):
    worst = 0.0
    for _ in range(n):
        o, y = _random_case(rng, sizes)
        gamma = 10.0 / len(o)
        analytic = loss_fn(o, y, gamma).grad_logits
        numeric = numeric_grad(lambda z: float(loss_fn(z, y, gamma).value), o)
        worst = max(worst, violation(analytic, numeric, rtol, atol))
    return CheckResult(name, n, worst, worst <= 1.0)


def _target(rng, n_cls):
    return rng.dirichlet(np.ones(n_cls))


def loss_suites(n=1000, sizes=(2, 5, 10), seed=0, rtol=RTOL, atol=ATOL):
    rng = np.random.default_rng(seed)
    cfg = lambda g: EDLLossConfig(0.5, g)  # noqa: E731
    suites = {
        "nll": lambda o, y, g: nll_loss(logits_to_dirichlet(o, g), y),
        "kl": lambda o, y, g: kl_loss(logits_to_dirichlet(o, g), y),
        "edl": lambda o, y, g: edl_loss(o, y, cfg(g)),
        "ce": lambda o, y, g: cross_entropy(o, y),
        "calibrated_ce": lambda o, y, g: calibrated_cross_entropy(o, y, g),
    }
    out = [_logit_suite(name, fn, n, sizes, rng, rtol, atol) for name, fn in suites.items()]
    # the unsupervised loss takes a soft target; draw a fresh one per instance
    worst = 0.0
    for _ in range(n):
        o, _ = _random_case(rng, sizes)
        t = _target(rng, len(o))
        gamma = 10.0 / len(o)
        analytic = l2_prob_loss(o, t, gamma).grad_logits
        numeric = numeric_grad(lambda z: float(l2_prob_loss(z, t, gamma).value), o)
        worst = max(worst, violation(analytic, numeric, rtol, atol))
    out.append(CheckResult("uns_l2", n, worst, worst <= 1.0))
    return out


def network_suite(n_nets=5, d_in=6, hidden=(16, 16), n_classes=4, batch=8, seed=0, h=1e-4, rtol=RTOL, atol=ATOL):
    """Every parameter of a random two-head net: mean EDL loss on the sup head
    plus the mean L2 loss on the uns head."""
    rng = np.random.default_rng(seed)
    cfg = EDLLossConfig(0.5, 10.0 / n_classes)
    worst = 0.0
    for k in range(n_nets):
        model = MLP(d_in, hidden, n_classes, seed=int(rng.integers(2**31 - 1)))
        for key in model.params:
            if key.endswith(".b"):
                model.params[key] = rng.normal(scale=0.1, size=model.params[key].shape)
        x = rng.normal(size=(batch, d_in))
        y = np.eye(n_classes)[rng.integers(n_classes, size=batch)]
        t = rng.dirichlet(np.ones(n_classes), size=batch)

        def total(m):
            sup = edl_loss(m.forward(x, "sup"), y, cfg).value.mean()
            uns = l2_prob_loss(m.forward(x, "uns"), t, cfg.gamma).value.mean()
            return sup + uns

        lv = edl_loss(model.forward_train(x, "sup"), y, cfg).mean()
        g_sup = model.backward(lv.grad_logits)
        uv = l2_prob_loss(model.forward_train(x, "uns"), t, cfg.gamma).mean()
        g_uns = model.backward(uv.grad_logits)
        for key, p in model.params.items():
            analytic = g_sup[key] + g_uns[key]

            def f(v, key=key):
                saved = model.params[key]
                model.params[key] = v
                try:
                    return total(model)
                finally:
                    model.params[key] = saved

            numeric = numeric_grad(f, p, h)
            worst = max(worst, violation(analytic, numeric, rtol, atol))
    return CheckResult("network_backprop", n_nets, worst, worst <= 1.0)


def shrinkage_suite(n=1000, sizes=(2, 5, 10), seed=0, atol=1e-6):
    """Closed-form gradient gap vs the difference of two finite-difference gradients.

    Also requires the gap to be strictly positive.
    """
    rng = np.random.default_rng(seed)
    worst, positive = 0.0, True
    for _ in range(n):
        o, y = _random_case(rng, sizes)
        comp = np.flatnonzero(y == 0)
        c = int(rng.choice(comp))
        gamma = 10.0 / len(o)
        closed = gradient_shrinkage(o, y, c, gamma)
        positive &= closed > 0
        e = np.zeros_like(o)
        e[c] = 1e-5
        d_soft = (float(cross_entropy(o + e, y).value) - float(cross_entropy(o - e, y).value)) / 2e-5
        d_cal = (
            float(calibrated_cross_entropy(o + e, y, gamma).value)
            - float(calibrated_cross_entropy(o - e, y, gamma).value)
        ) / 2e-5
        worst = max(worst, abs(closed - (d_soft - d_cal)) / atol)
    return CheckResult("gradient_shrinkage", n, worst, bool(worst <= 1.0 and positive))


def run_all(seed=0, sizes=(2, 5, 10), n=1000):
    return loss_suites(n, sizes, seed) + [network_suite(seed=seed), shrinkage_suite(n, sizes, seed)]
