"""Dense ReLU network with a shared trunk and two linear heads.

The supervised head ("sup") carries the EDL loss and is used for prediction,
margins and pseudo-targets; the unsupervised head ("uns") only sees the L2
consistency loss. Backpropagation is written out by hand.
"""

import json
from dataclasses import dataclass, field

import numpy as np

HEADS = ("sup", "uns")
CHECKPOINT_VERSION = 1


@dataclass
class Trace:
    """Activations cached by :meth:`MLP.forward_train` for one backward pass."""

    head: str
    inputs: list  # input to each trunk layer, then to the head
    pre: list  # trunk pre-activations


class MLP:
    def __init__(self, d_in, hidden, n_classes, seed=0):
        if n_classes < 2:
            raise ValueError("need at least two classes")
        self.d_in = int(d_in)
        self.hidden = tuple(int(h) for h in hidden)
        self.n_classes = int(n_classes)
        self.seed = int(seed)
        self.params = {}
        rng = np.random.default_rng(seed)
        widths = (self.d_in,) + self.hidden
        for i in range(len(self.hidden)):
            self.params[f"trunk.{i}.W"] = _he_uniform(rng, widths[i], widths[i + 1])
            self.params[f"trunk.{i}.b"] = np.zeros(widths[i + 1])
        for head in HEADS:
            self.params[f"head_{head}.W"] = _he_uniform(rng, widths[-1], self.n_classes)
            self.params[f"head_{head}.b"] = np.zeros(self.n_classes)
        self.meta = {}
        self._trace = None

    @property
    def n_layers(self):
        return len(self.hidden)

    def parameter_count(self):
        return sum(p.size for p in self.params.values())

    def _check(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.d_in:
            raise ValueError(f"expected {self.d_in} features, got {x.shape[-1]}")
        return x

    def features(self, x):
        h = self._check(x)
        for i in range(self.n_layers):
            h = np.maximum(h @ self.params[f"trunk.{i}.W"] + self.params[f"trunk.{i}.b"], 0.0)
        return h

    def forward(self, x, head="sup"):
        """Logits of ``head`` for a feature vector ``(d,)`` or batch ``(N, d)``."""
        if head not in HEADS:
            raise ValueError(f"unknown head {head!r}")
        h = self.features(x)
        return h @ self.params[f"head_{head}.W"] + self.params[f"head_{head}.b"]

    def forward_train(self, x, head="sup"):
        """Batch forward pass that keeps the activations needed by ``backward``."""
        if head not in HEADS:
            raise ValueError(f"unknown head {head!r}")
        h = np.atleast_2d(self._check(x))
        inputs, pre = [], []
        for i in range(self.n_layers):
            inputs.append(h)
            z = h @ self.params[f"trunk.{i}.W"] + self.params[f"trunk.{i}.b"]
            pre.append(z)
            h = np.maximum(z, 0.0)
        inputs.append(h)
        self._trace = Trace(head, inputs, pre)
        return h @ self.params[f"head_{head}.W"] + self.params[f"head_{head}.b"]

    def backward(self, grad_logits, trace=None):
        """Parameter gradients for a scalar loss given d loss / d logits.

        Uses the most recent ``forward_train`` trace unless one is passed.
        Parameters the pass did not touch (the other head) get zero gradients.
        """
        trace = trace or self._trace
        if trace is None:
            raise RuntimeError("backward called without a cached forward pass")
        g = np.atleast_2d(np.asarray(grad_logits, dtype=np.float64))
        grads = {k: np.zeros_like(v) for k, v in self.params.items()}
        hk = f"head_{trace.head}"
        h = trace.inputs[-1]
        grads[f"{hk}.W"] = h.T @ g
        grads[f"{hk}.b"] = g.sum(axis=0)
        g = g @ self.params[f"{hk}.W"].T
        for i in reversed(range(self.n_layers)):
            g = g * (trace.pre[i] > 0)
            grads[f"trunk.{i}.W"] = trace.inputs[i].T @ g
            grads[f"trunk.{i}.b"] = g.sum(axis=0)
            g = g @ self.params[f"trunk.{i}.W"].T
        return grads

    def copy(self):
        other = MLP.__new__(MLP)
        other.__dict__.update(self.__dict__)
        other.params = {k: v.copy() for k, v in self.params.items()}
        other._trace = None
        return other

    def save(self, path, **meta):
        """Write an ``.npz`` checkpoint; extra ``meta`` is stored as JSON-able scalars."""
        header = {
            "format_version": CHECKPOINT_VERSION,
            "d_in": self.d_in,
            "hidden": list(self.hidden),
            "n_classes": self.n_classes,
            "seed": self.seed,
            "meta": meta,
        }
        with open(path, "wb") as fh:
            np.savez(fh, __header__=np.array(json.dumps(header, sort_keys=True)), **self.params)

    @classmethod
    def load(cls, path):
        with np.load(path, allow_pickle=False) as data:
            header = json.loads(str(data["__header__"]))
            if header.get("format_version") != CHECKPOINT_VERSION:
                raise ValueError(f"unsupported checkpoint version {header.get('format_version')}")
            model = cls(header["d_in"], header["hidden"], header["n_classes"], header["seed"])
            for k in model.params:
                model.params[k] = data[k].astype(np.float64)
        model.meta = header["meta"]
        return model


def _he_uniform(rng, fan_in, fan_out):
    bound = np.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, size=(fan_in, fan_out))


def add_grads(a, b):
    return {k: a[k] + b[k] for k in a}


@dataclass
class SGD:
    """SGD with momentum and coupled weight decay.

    ``v <- momentum * v + g + weight_decay * theta``; ``theta <- theta - lr * v``.
    """

    lr: float = 0.02
    momentum: float = 0.9
    weight_decay: float = 5e-4
    velocity: dict = field(default_factory=dict)

    def step(self, model, grads):
        for k, p in model.params.items():
            g = grads[k]
            if g.shape != p.shape:
                raise ValueError(f"gradient shape mismatch for {k}")
            v = self.velocity.get(k)
            if v is None:
                v = np.zeros_like(p)
            v = self.momentum * v + g + self.weight_decay * p
            self.velocity[k] = v
            p -= self.lr * v
        return model
