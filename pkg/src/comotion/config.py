"""Run configuration: one flat record for model, loss, and optimizer settings.

Every constant the architecture leaves open gets an explicit default here so
each run pins and reports the values it used. JSON configs may set any
subset of the fields; ``--set key=value`` overrides win over the file.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigError

VARIANTS = ("full", "no_sca", "no_skel_attn", "no_joint_attn")
TRAVERSALS = ("id", "traveling", "surrounding", "traveling_fixed")
LOSSES = ("gram", "mse")
H0_MODES = ("encoder", "zeros")
GRAM_NORMS = ("pred_len", "obs_len")
SYNTH_KINDS = ("sinusoid", "walk_like")

DEFAULT_HORIZONS_MS = (80, 160, 320, 400, 560, 640, 720, 1000)


@dataclass
class TrainConfig:
    # problem size
    joint_count: int = 4
    obs_len: int = 20  # T: observed frames per window
    pred_len: int = 10  # T': predicted frames per window
    frame_interval_ms: float = 40.0
    joint_selection: tuple[int, ...] | None = None

    # architecture
    tau1: float = 1.0  # skeleton-attention softmax temperature
    tau2: float = 1.0  # joint-attention softmax temperature
    rho: float = 1.0  # confidence gate bandwidth
    attn_width: int | None = None  # attention hidden width a; None means 3K
    hidden_size: int | None = None  # recurrent width n; None means 3K
    traversal: str = "id"
    variant: str = "full"
    h0_mode: str = "encoder"

    # loss
    loss: str = "gram"
    rbf_tau: float | str = "median"  # positive float, or "median" heuristic
    gram_norm: str = "pred_len"  # divide summed step losses by T' (or by T)

    # optimizer / training loop
    learning_rate: float = 0.5e-3
    decay_rate: float = 0.95
    momentum: float = 0.9
    batch_size: int = 32
    epochs: int = 100
    grad_clip: float = 5.0
    window_stride: int = 1
    seed: int = 0
    threads: int = 1
    deterministic: bool = True

    # evaluation / reporting
    horizons_ms: tuple[int, ...] = DEFAULT_HORIZONS_MS

    # synthetic data generation (cmd synth)
    synth_kind: str = "walk_like"
    synth_count: int = 8
    synth_frames: int | None = None  # None means obs_len + pred_len

    def __post_init__(self):
        self.validate()

    # -- derived sizes --------------------------------------------------

    @property
    def dim(self) -> int:
        return 3 * self.joint_count

    @property
    def attn_width_value(self) -> int:
        return self.attn_width if self.attn_width is not None else self.dim

    @property
    def hidden_size_value(self) -> int:
        return self.hidden_size if self.hidden_size is not None else self.dim

    @property
    def window_len(self) -> int:
        return self.obs_len + self.pred_len

    def validate(self) -> None:
        def positive(name, value):
            if value <= 0:
                raise ConfigError(f"{name} must be positive, got {value}")

        positive("joint_count", self.joint_count - 1)  # K >= 2
        positive("obs_len", self.obs_len)
        positive("pred_len", self.pred_len)
        positive("frame_interval_ms", self.frame_interval_ms)
        positive("tau1", self.tau1)
        positive("tau2", self.tau2)
        positive("rho", self.rho)
        if self.learning_rate < 0:
            raise ConfigError(f"learning_rate must be >= 0, got {self.learning_rate}")
        positive("batch_size", self.batch_size)
        positive("window_stride", self.window_stride)
        positive("threads", self.threads)
        if self.attn_width is not None:
            positive("attn_width", self.attn_width)
        if self.hidden_size is not None:
            positive("hidden_size", self.hidden_size)
        if self.epochs < 0:
            raise ConfigError(f"epochs must be >= 0, got {self.epochs}")
        if not 0 < self.decay_rate <= 1:
            raise ConfigError(f"decay_rate must be in (0, 1], got {self.decay_rate}")
        if not 0 <= self.momentum < 1:
            raise ConfigError(f"momentum must be in [0, 1), got {self.momentum}")
        if self.grad_clip <= 0:
            raise ConfigError(f"grad_clip must be positive, got {self.grad_clip}")
        if self.variant not in VARIANTS:
            raise ConfigError(
                f"unknown variant {self.variant!r}; valid: {', '.join(VARIANTS)}"
            )
        if self.traversal not in TRAVERSALS:
            raise ConfigError(
                f"unknown traversal {self.traversal!r}; valid: {', '.join(TRAVERSALS)}"
            )
        if self.loss not in LOSSES:
            raise ConfigError(f"unknown loss {self.loss!r}; valid: {', '.join(LOSSES)}")
        if self.h0_mode not in H0_MODES:
            raise ConfigError(f"unknown h0_mode {self.h0_mode!r}; valid: {', '.join(H0_MODES)}")
        if self.gram_norm not in GRAM_NORMS:
            raise ConfigError(
                f"unknown gram_norm {self.gram_norm!r}; valid: {', '.join(GRAM_NORMS)}"
            )
        if self.synth_kind not in SYNTH_KINDS:
            raise ConfigError(
                f"unknown synth_kind {self.synth_kind!r}; valid: {', '.join(SYNTH_KINDS)}"
            )
        if isinstance(self.rbf_tau, str):
            if self.rbf_tau != "median":
                raise ConfigError(f'rbf_tau must be a positive number or "median", got {self.rbf_tau!r}')
        elif self.rbf_tau <= 0:
            raise ConfigError(f"rbf_tau must be positive, got {self.rbf_tau}")

    # -- io ----------------------------------------------------------------

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        for key, value in d.items():
            if isinstance(value, tuple):
                d[key] = list(value)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


_FIELDS = {f.name: f for f in dataclasses.fields(TrainConfig)}
_TUPLE_FIELDS = {"horizons_ms", "joint_selection"}


def _coerce(name: str, value):
    if name not in _FIELDS:
        raise ConfigError(
            f"unknown config key {name!r}; valid keys: {', '.join(sorted(_FIELDS))}"
        )
    if value is None:
        return None
    if name in _TUPLE_FIELDS:
        if isinstance(value, str):
            value = [v for v in value.replace(",", " ").split() if v]
        return tuple(int(v) for v in value)
    default = _FIELDS[name].default
    if name == "rbf_tau":
        if isinstance(value, str) and value != "median":
            return float(value)
        return value if isinstance(value, str) else float(value)
    if isinstance(default, bool):
        if isinstance(value, str):
            if value.lower() in ("1", "true", "yes", "on"):
                return True
            if value.lower() in ("0", "false", "no", "off"):
                return False
            raise ConfigError(f"cannot read {value!r} as a boolean for {name}")
        return bool(value)
    if name in ("attn_width", "hidden_size", "synth_frames"):
        return int(value)
    if isinstance(default, int):
        return int(value)
    if isinstance(default, float):
        return float(value)
    return str(value)


def config_from_dict(raw: dict) -> TrainConfig:
    """Build a config from a plain dict, rejecting unknown keys."""
    kwargs = {}
    for key, value in raw.items():
        kwargs[key] = _coerce(key, value)
    try:
        return TrainConfig(**kwargs)
    except TypeError as exc:  # pragma: no cover - guarded by _coerce
        raise ConfigError(str(exc)) from None


def load_config(path=None, overrides: list[str] | None = None) -> TrainConfig:
    """Read a JSON config file (optional) and apply key=value overrides."""
    raw: dict = {}
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        try:
            raw = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from None
        if not isinstance(raw, dict):
            raise ConfigError(f"{path}: config must be a JSON object")
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        key, value = item.split("=", 1)
        raw[key.strip()] = value.strip()
    return config_from_dict(raw)
