"""Experiment configuration: dataclasses, TOML loading and validation."""

from dataclasses import asdict, dataclass, field, fields, replace

import tomli
import tomli_w

METHODS = ("dpc", "ce_baseline", "small_loss_baseline")


class ConfigError(ValueError):
    """Invalid configuration; ``field`` names the offending key."""

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field


@dataclass
class TrainConfig:
    epochs: int = 60
    warmup_epochs: int = 10
    lr: float = 0.02
    lr_decay: float = 0.1
    lr_decay_epoch: int = 40
    momentum: float = 0.9
    weight_decay: float = 5e-4
    batch_size: int = 128
    hidden: tuple = (128, 128)
    beta: float = 0.5
    gamma_times_c: float = 10.0
    mixup_alpha: float = 4.0
    lambda_uns: float = 1.0
    rampup_epochs: int = 16
    threshold: float = 0.5
    # fits with Ashman's D below this mark everything clean; 0 keeps the plain GMM rule
    min_separation: float = 0.0
    normalize_scores: bool = True
    gmm_tol: float = 1e-6
    gmm_max_iter: int = 200
    # ablation switches; defaults are the full method
    warmup_loss: str = "edl"
    criterion: str = "margin"
    two_heads: bool = True
    sharpen_t: float = 0.0  # 0 disables sharpening of pseudo-targets
    pseudo_head: str = "sup"
    eval_head: str = "sup"
    ece_bins: int = 15
    seed: int = 0

    def gamma(self, n_classes):
        return self.gamma_times_c / n_classes

    def lr_at(self, epoch):
        return self.lr * (self.lr_decay if epoch >= self.lr_decay_epoch else 1.0)

    def validate(self):
        pos_int = ("epochs", "batch_size", "gmm_max_iter", "ece_bins")
        for name in pos_int:
            if int(getattr(self, name)) <= 0:
                raise ConfigError(f"train.{name}", "must be a positive integer")
        if not 0 <= self.warmup_epochs < self.epochs:
            raise ConfigError("train.warmup_epochs", "must satisfy 0 <= warmup_epochs < epochs")
        for name in ("lr", "gamma_times_c", "mixup_alpha", "gmm_tol"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"train.{name}", "must be positive")
        for name in ("beta", "lambda_uns", "weight_decay", "momentum", "rampup_epochs", "sharpen_t", "min_separation"):
            if getattr(self, name) < 0:
                raise ConfigError(f"train.{name}", "must be non-negative")
        if not 0 < self.threshold < 1:
            raise ConfigError("train.threshold", "must lie in (0, 1)")
        if any(int(h) <= 0 for h in self.hidden):
            raise ConfigError("train.hidden", "widths must be positive")
        choices = {
            "warmup_loss": ("edl", "ce"),
            "criterion": ("margin", "small_loss"),
            "pseudo_head": ("sup", "uns"),
            "eval_head": ("sup", "uns"),
        }
        for name, allowed in choices.items():
            if getattr(self, name) not in allowed:
                raise ConfigError(f"train.{name}", f"must be one of {allowed}")
        return self


@dataclass
class ExperimentSpec:
    method: str = "dpc"
    output_dir: str = "runs/default"
    # dataset: a builtin generator or a CSV path
    generator: str = "blobs"
    n_train: int = 8000
    n_test: int = 2000
    n_classes: int = 4
    dim: int = 20
    separation: float = 3.0
    ring_noise: float = 0.15
    train_csv: str = ""
    test_csv: str = ""
    # noise
    noise_type: str = "symmetric"
    noise_rate: float = 0.5
    train: TrainConfig = field(default_factory=TrainConfig)

    def validate(self):
        if self.method not in METHODS:
            raise ConfigError("method", f"must be one of {METHODS}")
        if self.train_csv == "" and self.generator not in ("blobs", "rings"):
            raise ConfigError("data.generator", "must be 'blobs' or 'rings' (or set data.train_csv)")
        if self.train_csv == "":
            if self.n_train < 10:
                raise ConfigError("data.n_train", "must be at least 10")
            if self.n_test < 0:
                raise ConfigError("data.n_test", "must be non-negative")
            if self.generator == "blobs" and not 2 <= self.n_classes <= self.dim:
                raise ConfigError("data.n_classes", "blobs need 2 <= n_classes <= dim")
        if self.noise_type not in ("symmetric", "asymmetric", "none"):
            raise ConfigError("noise.type", "must be symmetric, asymmetric or none")
        if not 0 <= self.noise_rate < 1:
            raise ConfigError("noise.rate", "must lie in [0, 1)")
        self.train.validate()
        return self

    def to_dict(self):
        """Nested mapping in the same layout the TOML loader reads."""
        t = asdict(self.train)
        t["hidden"] = list(t["hidden"])
        return {
            "method": self.method,
            "output_dir": self.output_dir,
            "data": {
                "generator": self.generator,
                "n_train": self.n_train,
                "n_test": self.n_test,
                "n_classes": self.n_classes,
                "dim": self.dim,
                "separation": self.separation,
                "ring_noise": self.ring_noise,
                "train_csv": self.train_csv,
                "test_csv": self.test_csv,
            },
            "noise": {"type": self.noise_type, "rate": self.noise_rate},
            "train": t,
        }

    def dumps(self):
        return tomli_w.dumps(self.to_dict())


_DATA_KEYS = {
    "generator", "n_train", "n_test", "n_classes", "dim", "separation",
    "ring_noise", "train_csv", "test_csv",
}


def _coerce(name, value, default):
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(name, "expected true/false")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(name, "expected an integer")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(name, "expected a number")
        return float(value)
    if isinstance(default, tuple):
        if not isinstance(value, list) or not all(isinstance(v, int) for v in value):
            raise ConfigError(name, "expected a list of integers")
        return tuple(value)
    if not isinstance(value, str):
        raise ConfigError(name, "expected a string")
    return value


def spec_from_dict(raw):
    unknown = set(raw) - {"method", "output_dir", "data", "noise", "train"}
    if unknown:
        raise ConfigError(sorted(unknown)[0], "unknown key")
    base = ExperimentSpec()
    top = {}
    for key in ("method", "output_dir"):
        if key in raw:
            top[key] = _coerce(key, raw[key], getattr(base, key))
    for key, value in raw.get("data", {}).items():
        if key not in _DATA_KEYS:
            raise ConfigError(f"data.{key}", "unknown key")
        top[key] = _coerce(f"data.{key}", value, getattr(base, key))
    for key, value in raw.get("noise", {}).items():
        if key not in ("type", "rate"):
            raise ConfigError(f"noise.{key}", "unknown key")
        attr = "noise_type" if key == "type" else "noise_rate"
        top[attr] = _coerce(f"noise.{key}", value, getattr(base, attr))
    train_defaults = TrainConfig()
    names = {f.name for f in fields(TrainConfig)}
    tvals = {}
    for key, value in raw.get("train", {}).items():
        if key not in names:
            raise ConfigError(f"train.{key}", "unknown key")
        tvals[key] = _coerce(f"train.{key}", value, getattr(train_defaults, key))
    return replace(base, train=replace(train_defaults, **tvals), **top).validate()


def load_spec(path, overrides=()):
    """Load a TOML experiment file, applying ``section.key=value`` overrides."""
    try:
        with open(path, "rb") as fh:
            raw = tomli.load(fh)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(str(path), f"not valid TOML ({exc})") from exc
    for item in overrides:
        apply_override(raw, item)
    return spec_from_dict(raw)


def apply_override(raw, item):
    if "=" not in item:
        raise ConfigError(item, "override must look like section.key=value")
    key, text = item.split("=", 1)
    try:
        value = tomli.loads(f"v = {text}")["v"]
    except tomli.TOMLDecodeError:
        value = text
    parts = key.strip().split(".")
    node = raw
    for p in parts[:-1]:
        node = node.setdefault(p, {})
    node[parts[-1]] = value
