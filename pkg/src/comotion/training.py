"""Optimizer, training loop, finite-difference gradient checking, ablations.

Training is deterministic for a fixed config and seed: window shuffling is
seeded, batch gradients are averaged in batch-index order (also when worker
threads are used), and the learning rate schedule is recomputed per epoch
rather than accumulated.
"""

from __future__ import annotations

import dataclasses
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .autodiff import Tape
from .cells import rollout, rollout_on_tape
from .config import VARIANTS, TrainConfig
from .data import SkeletonSequence, synth_generate
from .errors import ConfigError, DataError, NumericError
from .losses import mean_angle_error_batch, window_loss_on_tape
from .params import ParameterSet, bind, init_parameters


@dataclass
class OptimizerState:
    """Momentum SGD with multiplicative learning-rate decay per epoch."""

    base_learning_rate: float
    decay_rate: float
    momentum: float
    learning_rate: float = 0.0
    velocity: dict[str, np.ndarray] = field(default_factory=dict)
    step_count: int = 0

    def __post_init__(self):
        # Zero is allowed: it makes a run a pure no-op, which is useful for
        # bookkeeping tests.
        if self.base_learning_rate < 0:
            raise ConfigError(f"learning rate must be >= 0, got {self.base_learning_rate}")
        if not 0 < self.decay_rate <= 1:
            raise ConfigError(f"decay rate must be in (0, 1], got {self.decay_rate}")
        if not 0 <= self.momentum < 1:
            raise ConfigError(f"momentum must be in [0, 1), got {self.momentum}")
        if self.learning_rate == 0.0:
            self.learning_rate = self.base_learning_rate

    def set_epoch(self, epoch: int) -> None:
        self.learning_rate = self.base_learning_rate * self.decay_rate ** epoch


def sgd_momentum_step(params: ParameterSet, grads: dict[str, np.ndarray], state: OptimizerState) -> None:
    """v <- momentum * v - lr * g; p <- p + v. Updates arrays in place."""
    for name, p in params.flat().items():
        g = grads[name]
        if g.shape != p.shape:
            raise NumericError(f"gradient shape {g.shape} != parameter shape {p.shape} for {name}")
        v = state.velocity.get(name)
        if v is None:
            v = np.zeros_like(p)
            state.velocity[name] = v
        v *= state.momentum
        v -= state.learning_rate * g
        p += v
    state.step_count += 1


def clip_gradients(grads: dict[str, np.ndarray], max_norm: float) -> float:
    """Scale all gradients so their global L2 norm is at most max_norm."""
    total = math.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
    if total > max_norm and total > 0:
        factor = max_norm / total
        for g in grads.values():
            g *= factor
    return total


# -- windows -----------------------------------------------------------------


def sequence_windows(seq: SkeletonSequence, config: TrainConfig):
    """(observed columns d x T, future frames T' x d) pairs, sliding by
    window_stride."""
    T, H = config.obs_len, config.pred_len
    out = []
    start = 0
    while start + T + H <= len(seq):
        obs = seq.frames[start: start + T].T
        fut = seq.frames[start + T: start + T + H]
        out.append((obs, fut))
        start += config.window_stride
    return out


def dataset_windows(dataset, config: TrainConfig):
    windows = []
    for i, seq in enumerate(dataset):
        if len(seq) < config.window_len:
            raise DataError(
                f"sequence {i} has {len(seq)} frames; need at least "
                f"{config.window_len} (obs_len + pred_len)"
            )
        windows.extend(sequence_windows(seq, config))
    return windows


def window_gradients(params: ParameterSet, config: TrainConfig, obs_cols, fut_rows):
    """Loss and flat gradient dict for one window (full backward pass)."""
    tape = Tape()
    bound = bind(tape, params)
    preds, _ = rollout_on_tape(tape, obs_cols, bound, config, config.pred_len)
    loss = window_loss_on_tape(tape, preds, fut_rows, config)
    grads_all = tape.backward(loss)
    flat_nodes = bound.flat()
    grads = {name: grads_all[node] for name, node in flat_nodes.items()}
    return float(loss.value[0, 0]), grads


def window_loss_value(params: ParameterSet, config: TrainConfig, obs_cols, fut_rows) -> float:
    """Forward-only loss for one window (used by finite differences)."""
    tape = Tape()
    bound = bind(tape, params)
    preds, _ = rollout_on_tape(tape, obs_cols, bound, config, config.pred_len)
    return float(window_loss_on_tape(tape, preds, fut_rows, config).value[0, 0])


# -- training loop -------------------------------------------------------------


@dataclass
class TrainResult:
    params: ParameterSet
    history: list[tuple[int, int, float]]  # (epoch, step, batch loss)

    def history_csv(self) -> str:
        lines = ["epoch,step,loss"]
        for epoch, step, loss in self.history:
            lines.append(f"{epoch},{step},{loss:.17g}")
        return "\n".join(lines) + "\n"


def train(dataset, config: TrainConfig, initial: ParameterSet | None = None) -> TrainResult:
    """Minimize the configured loss over sliding windows of the dataset.

    Returns the trained parameters and the per-step loss history. For a
    fixed config and seed the run is bitwise reproducible.
    """
    windows = dataset_windows(dataset, config)
    if len(windows) < config.batch_size:
        raise ConfigError(
            f"batch_size {config.batch_size} exceeds the {len(windows)} available windows"
        )
    params = initial.copy() if initial is not None else init_parameters(config)
    opt = OptimizerState(config.learning_rate, config.decay_rate, config.momentum)
    rng = np.random.default_rng(config.seed)
    history: list[tuple[int, int, float]] = []
    pool = ThreadPoolExecutor(max_workers=config.threads) if config.threads > 1 else None
    try:
        for epoch in range(config.epochs):
            opt.set_epoch(epoch)
            order = rng.permutation(len(windows))
            steps = len(windows) // config.batch_size
            for step in range(steps):
                chosen = order[step * config.batch_size: (step + 1) * config.batch_size]
                batch = [windows[i] for i in chosen]
                try:
                    if pool is not None:
                        results = list(pool.map(
                            lambda w: window_gradients(params, config, w[0], w[1]), batch
                        ))
                    else:
                        results = [window_gradients(params, config, obs, fut)
                                   for obs, fut in batch]
                except NumericError as exc:
                    raise NumericError(
                        f"non-finite values at epoch {epoch}, step {step}: {exc}"
                    ) from None
                # Average in batch-index order; keeps reduction deterministic.
                batch_loss = 0.0
                mean_grads: dict[str, np.ndarray] = {}
                for loss_value, grads in results:
                    batch_loss += loss_value
                    for name, g in grads.items():
                        if name in mean_grads:
                            mean_grads[name] += g
                        else:
                            mean_grads[name] = g.copy()
                batch_loss /= len(batch)
                for g in mean_grads.values():
                    g /= len(batch)
                if not math.isfinite(batch_loss):
                    raise NumericError(
                        f"loss became non-finite at epoch {epoch}, step {step}"
                    )
                clip_gradients(mean_grads, config.grad_clip)
                sgd_momentum_step(params, mean_grads, opt)
                history.append((epoch, step, batch_loss))
    finally:
        if pool is not None:
            pool.shutdown()
    return TrainResult(params, history)


# -- evaluation ----------------------------------------------------------------


def split_obs_future(seq: SkeletonSequence, config: TrainConfig):
    """First T frames as the observation, next T' frames as the target."""
    if len(seq) < config.window_len:
        raise DataError(
            f"sequence has {len(seq)} frames; need {config.window_len}"
        )
    obs = SkeletonSequence(
        seq.frames[: config.obs_len], seq.joint_count, seq.frame_interval_ms
    )
    fut = SkeletonSequence(
        seq.frames[config.obs_len: config.window_len], seq.joint_count, seq.frame_interval_ms
    )
    return obs, fut


def evaluate_mae(params: ParameterSet, config: TrainConfig, sequences, horizon_frames) -> dict[int, float]:
    """Average angle error of model rollouts over held-out sequences."""
    pairs = []
    for seq in sequences:
        obs, fut = split_obs_future(seq, config)
        pred = rollout(obs, config.pred_len, params, config)
        pairs.append((pred, fut))
    return mean_angle_error_batch(pairs, horizon_frames)


def zero_velocity_mae(config: TrainConfig, sequences, horizon_frames) -> dict[int, float]:
    """Baseline that repeats the last observed frame for every horizon."""
    pairs = []
    for seq in sequences:
        obs, fut = split_obs_future(seq, config)
        frozen = np.tile(obs.frames[-1], (config.pred_len, 1))
        pred = SkeletonSequence(frozen, seq.joint_count, seq.frame_interval_ms)
        pairs.append((pred, fut))
    return mean_angle_error_batch(pairs, horizon_frames)


# -- gradient checking ----------------------------------------------------------


@dataclass
class GradCheckReport:
    per_group: dict[str, float]
    entries_checked: int
    threshold: float
    step_size: float

    @property
    def max_rel_error(self) -> float:
        return max(self.per_group.values()) if self.per_group else 0.0

    @property
    def passed(self) -> bool:
        return self.max_rel_error < self.threshold

    def as_text(self) -> str:
        lines = [f"entries checked: {self.entries_checked} (step {self.step_size:g})"]
        for group, err in self.per_group.items():
            lines.append(f"  {group:12s} max relative error {err:.3e}")
        verdict = "PASS" if self.passed else "FAIL"
        lines.append(
            f"max relative error {self.max_rel_error:.3e} "
            f"({verdict} at threshold {self.threshold:g})"
        )
        return "\n".join(lines)


def _default_model(config: TrainConfig, instance_seed: int):
    seq = synth_generate("sinusoid", config.joint_count, config.window_len, instance_seed)
    obs = seq.frames[: config.obs_len].T
    fut = seq.frames[config.obs_len:]

    def model(tape: Tape, bound: ParameterSet):
        preds, _ = rollout_on_tape(tape, obs, bound, config, config.pred_len)
        return window_loss_on_tape(tape, preds, fut, config)

    return model


def grad_check(
    config: TrainConfig,
    instance_seed: int = 0,
    sample_size: int | None = None,
    threshold: float = 1e-4,
    step_size: float = 1e-5,
    model_fn=None,
    _corrupt_param: str | None = None,
) -> GradCheckReport:
    """Compare tape gradients of the full pipeline loss against central
    finite differences, entry by entry.

    ``sample_size`` limits the number of entries per parameter group (all
    entries when None). Errors are normalized per group by the largest
    gradient magnitude in that group, so near-zero entries do not inflate
    the ratio. ``model_fn(tape, bound_params) -> loss node`` replaces the
    default rollout loss; ``_corrupt_param`` is a test hook that perturbs
    one analytic gradient on purpose.
    """
    model = model_fn if model_fn is not None else _default_model(config, instance_seed)
    params = init_parameters(config, seed=config.seed)

    def loss_value(ps: ParameterSet) -> float:
        tape = Tape()
        bound = bind(tape, ps)
        return float(model(tape, bound).value[0, 0])

    tape = Tape()
    bound = bind(tape, params)
    grads_all = tape.backward(model(tape, bound))
    analytic = {name: grads_all[node].copy() for name, node in bound.flat().items()}
    if _corrupt_param is not None:
        analytic[_corrupt_param] = analytic[_corrupt_param] + 1.0

    rng = np.random.default_rng(instance_seed + 12345)
    flat = params.flat()
    groups: dict[str, list[str]] = {}
    for name in flat:
        groups.setdefault(name.split(".")[0], []).append(name)

    per_group: dict[str, float] = {}
    checked = 0
    work = params.copy()
    work_flat = work.flat()
    for group, names in groups.items():
        entries = [
            (name, idx)
            for name in names
            for idx in np.ndindex(flat[name].shape)
        ]
        if sample_size is not None and len(entries) > sample_size:
            pick = rng.choice(len(entries), size=sample_size, replace=False)
            entries = [entries[i] for i in sorted(pick)]
        max_abs_gap = 0.0
        max_abs_grad = 0.0
        for name, idx in entries:
            arr = work_flat[name]
            original = arr[idx]
            arr[idx] = original + step_size
            plus = loss_value(work)
            arr[idx] = original - step_size
            minus = loss_value(work)
            arr[idx] = original
            fd = (plus - minus) / (2.0 * step_size)
            a = analytic[name][idx]
            max_abs_gap = max(max_abs_gap, abs(a - fd))
            max_abs_grad = max(max_abs_grad, abs(a), abs(fd))
            checked += 1
        per_group[group] = max_abs_gap / max(max_abs_grad, 1e-12)
    return GradCheckReport(per_group, checked, threshold, step_size)


# -- ablation driver -------------------------------------------------------------


@dataclass
class AblationResult:
    rows: dict[str, dict[int, float]]  # variant -> {horizon_ms: MAE}
    horizons_ms: tuple[int, ...]
    params: dict[str, ParameterSet]

    def markdown(self) -> str:
        from .losses import mae_markdown_table

        return mae_markdown_table(self.rows, self.horizons_ms)


def run_ablation(dataset, config: TrainConfig, val_dataset=None) -> AblationResult:
    """Train every variant with identical seeds and data; tabulate MAE per
    horizon on the validation set (training set when none is given).
    """
    from .losses import horizons_to_frames

    eval_set = list(val_dataset) if val_dataset is not None else list(dataset)
    horizons = [
        ms for ms in config.horizons_ms
        if round(ms / config.frame_interval_ms) <= config.pred_len
    ]
    if not horizons:
        horizons = [int(config.pred_len * config.frame_interval_ms)]
    frames = horizons_to_frames(horizons, config.frame_interval_ms, config.pred_len)
    rows: dict[str, dict[int, float]] = {}
    trained: dict[str, ParameterSet] = {}
    for variant in VARIANTS:
        vconfig = dataclasses.replace(config, variant=variant)
        if vconfig.epochs > 0:
            result = train(dataset, vconfig)
            params = result.params
        else:
            params = init_parameters(vconfig)
        per_frame = evaluate_mae(params, vconfig, eval_set, frames)
        rows[variant] = {ms: per_frame[f] for ms, f in zip(horizons, frames)}
        trained[variant] = params
    return AblationResult(rows, tuple(horizons), trained)
