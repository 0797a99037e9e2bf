"""Training losses and the angle-error evaluation metric.

The main loss compares gram matrices of coefficient-weighted prediction
prefixes against the same construction on the ground truth. Coefficients
come from an RBF kernel over ground-truth pairwise distances and are
treated as constants: no gradient flows into them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import Node, Tape
from .config import TrainConfig
from .data import SkeletonSequence
from .errors import ConfigError, DataError, ShapeError


@dataclass(frozen=True)
class CoefficientMatrix:
    """Symmetric RBF weights between time steps; diagonal is exactly 1."""

    matrix: np.ndarray  # (T', T')
    tau: float


def _as_rows(xs) -> np.ndarray:
    a = np.asarray(xs, dtype=np.float64)
    if a.ndim == 3 and a.shape[2] == 1:  # list of column vectors
        a = a[:, :, 0]
    if a.ndim != 2:
        raise ShapeError(f"expected a sequence of vectors, got shape {a.shape}")
    return a


def median_pairwise_distance(truth) -> float:
    """Median over distinct-pair Euclidean distances; 1.0 when degenerate."""
    rows = _as_rows(truth)
    n = rows.shape[0]
    if n < 2:
        return 1.0
    dists = [
        float(np.linalg.norm(rows[i] - rows[j]))
        for i in range(n)
        for j in range(i + 1, n)
    ]
    med = float(np.median(dists))
    return med if med > 0 else 1.0


def resolve_rbf_tau(truth, tau) -> float:
    if isinstance(tau, str):
        if tau != "median":
            raise ConfigError(f'rbf_tau must be a positive number or "median", got {tau!r}')
        return median_pairwise_distance(truth)
    if tau <= 0:
        raise ConfigError(f"rbf_tau must be positive, got {tau}")
    return float(tau)


def coefficient_matrix(truth, tau) -> CoefficientMatrix:
    """RBF correlation weights from ground truth: exp(-|x_i - x_j|^2 / tau^2)."""
    rows = _as_rows(truth)
    tau_value = resolve_rbf_tau(rows, tau)
    diff = rows[:, None, :] - rows[None, :, :]
    sq = np.sum(diff * diff, axis=2)
    return CoefficientMatrix(np.exp(-sq / (tau_value * tau_value)), tau_value)


def weighted_gram(x_seq, coeffs: CoefficientMatrix) -> np.ndarray:
    """Gram matrix of the length-t' prefix with rows weighted by the
    coefficient column of the current step; the current row is unweighted.
    """
    rows = _as_rows(x_seq)
    t = rows.shape[0]
    if t > coeffs.matrix.shape[0]:
        raise ShapeError(
            f"prefix length {t} exceeds coefficient matrix size {coeffs.matrix.shape[0]}"
        )
    v = rows.copy()
    v[: t - 1] *= coeffs.matrix[: t - 1, t - 1][:, None]
    return v @ v.T


def gram_loss(pred, truth, tau="median", norm: int | None = None) -> float:
    """Mean squared Frobenius gap between weighted gram matrices of
    prediction prefixes and ground-truth prefixes.

    Both sides use the one coefficient matrix computed from ground truth.
    ``norm`` divides the summed per-step terms; default is the sequence
    length.
    """
    p = _as_rows(pred)
    g = _as_rows(truth)
    if p.shape != g.shape:
        raise ShapeError(f"prediction shape {p.shape} != truth shape {g.shape}")
    coeffs = coefficient_matrix(g, tau)
    horizon = p.shape[0]
    total = 0.0
    for t in range(1, horizon + 1):
        gap = weighted_gram(p[:t], coeffs) - weighted_gram(g[:t], coeffs)
        total += float(np.sum(gap * gap))
    return total / (norm if norm is not None else horizon)


def mse_loss(pred, truth) -> float:
    """Mean over all entries of squared differences."""
    p = _as_rows(pred)
    g = _as_rows(truth)
    if p.shape != g.shape:
        raise ShapeError(f"prediction shape {p.shape} != truth shape {g.shape}")
    diff = p - g
    return float(np.mean(diff * diff))


# -- tape versions (differentiable with respect to predictions) -------------


def gram_loss_on_tape(
    tape: Tape,
    pred_nodes: list[Node],
    truth: np.ndarray,
    tau="median",
    norm: int | None = None,
) -> Node:
    truth = _as_rows(truth)
    horizon = len(pred_nodes)
    if truth.shape[0] != horizon:
        raise ShapeError(f"{horizon} predictions vs {truth.shape[0]} truth frames")
    coeffs = coefficient_matrix(truth, tau)
    pred_rows = [tape.transpose(x) for x in pred_nodes]
    total = None
    for t in range(1, horizon + 1):
        rows = [
            tape.scale(pred_rows[i], coeffs.matrix[i, t - 1]) for i in range(t - 1)
        ]
        rows.append(pred_rows[t - 1])
        v = tape.vstack(rows) if len(rows) > 1 else rows[0]
        gram = tape.matmul(v, tape.transpose(v))
        target = tape.constant(weighted_gram(truth[:t], coeffs))
        term = tape.sum(tape.square(gram - target))
        total = term if total is None else total + term
    return tape.scale(total, 1.0 / (norm if norm is not None else horizon))


def mse_loss_on_tape(tape: Tape, pred_nodes: list[Node], truth: np.ndarray) -> Node:
    truth = _as_rows(truth)
    horizon = len(pred_nodes)
    if truth.shape[0] != horizon:
        raise ShapeError(f"{horizon} predictions vs {truth.shape[0]} truth frames")
    dim = pred_nodes[0].value.shape[0]
    total = None
    for t, x in enumerate(pred_nodes):
        term = tape.sum(tape.square(x - tape.constant(truth[t].reshape(-1, 1))))
        total = term if total is None else total + term
    return tape.scale(total, 1.0 / (horizon * dim))


def window_loss_on_tape(
    tape: Tape, pred_nodes: list[Node], truth: np.ndarray, config: TrainConfig
) -> Node:
    """The configured loss for one (prediction, truth) window."""
    if config.loss == "mse":
        return mse_loss_on_tape(tape, pred_nodes, truth)
    norm = config.pred_len if config.gram_norm == "pred_len" else config.obs_len
    return gram_loss_on_tape(tape, pred_nodes, truth, config.rbf_tau, norm)


# -- evaluation metric -------------------------------------------------------


def mean_angle_error(
    pred: SkeletonSequence, truth: SkeletonSequence, horizon_frames
) -> dict[int, float]:
    """Euclidean distance between predicted and true skeleton vectors at each
    requested horizon frame (1-based into the predicted range).
    """
    frames = [int(h) for h in (
        horizon_frames if np.iterable(horizon_frames) else [horizon_frames]
    )]
    for h in frames:
        if not 1 <= h <= min(len(pred), len(truth)):
            raise DataError(
                f"horizon frame {h} beyond covered range 1..{min(len(pred), len(truth))}"
            )
    return {
        h: float(np.linalg.norm(pred.frames[h - 1] - truth.frames[h - 1]))
        for h in frames
    }


def mean_angle_error_batch(pairs, horizon_frames) -> dict[int, float]:
    """Average the per-horizon error over (pred, truth) sequence pairs."""
    pairs = list(pairs)
    if not pairs:
        raise DataError("no sequence pairs to evaluate")
    sums: dict[int, float] = {}
    for pred, truth in pairs:
        for h, err in mean_angle_error(pred, truth, horizon_frames).items():
            sums[h] = sums.get(h, 0.0) + err
    return {h: s / len(pairs) for h, s in sums.items()}


def horizons_to_frames(horizons_ms, frame_interval_ms: float, max_frames: int | None = None):
    """Map millisecond horizons onto 1-based frame indices (rounded)."""
    frames = []
    for ms in horizons_ms:
        f = max(1, int(round(ms / frame_interval_ms)))
        if max_frames is not None and f > max_frames:
            raise DataError(
                f"horizon {ms} ms needs frame {f}, only {max_frames} predicted"
            )
        frames.append(f)
    return frames


def mae_markdown_table(rows: dict[str, dict[int, float]], horizons_ms) -> str:
    """Rows: tag -> {horizon_ms: error}. One column per horizon."""
    header = "| tag | " + " | ".join(f"{ms}ms" for ms in horizons_ms) + " |"
    sep = "|" + "---|" * (len(list(horizons_ms)) + 1)
    lines = [header, sep]
    for tag, values in rows.items():
        cells = " | ".join(f"{values[ms]:.4f}" for ms in horizons_ms)
        lines.append(f"| {tag} | {cells} |")
    return "\n".join(lines) + "\n"


def mae_csv_table(rows: dict[str, dict[int, float]], horizons_ms) -> str:
    lines = ["tag," + ",".join(f"{ms}ms" for ms in horizons_ms)]
    for tag, values in rows.items():
        lines.append(tag + "," + ",".join(f"{values[ms]:.17g}" for ms in horizons_ms))
    return "\n".join(lines) + "\n"
