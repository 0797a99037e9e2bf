"""Skeleton sequences, feature maps, joint traversal orders, CSV io, synthetic data.

A skeleton frame is a 3K-vector of angle-axis coordinates laid out joint-major
(k1x k1y k1z k2x ...). Joint ids are 1-based everywhere in the public API.
Values are stored raw in radians; no wrap-around normalization is applied.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError, ShapeError

# Traversal orders over a 17-joint skeleton. Both visit every joint at least
# once and have length 33. The traveling order is kept verbatim, including
# the doubled "15, 15" (almost certainly a misprint of "15, 16"); the
# corrected variant is available as "traveling_fixed".
TRAVELING_ORDER = (
    9, 8, 1, 2, 3, 4, 3, 2, 1, 5, 6, 7, 6, 5, 1, 8, 9,
    10, 11, 10, 9, 15, 15, 17, 16, 15, 9, 12, 13, 14, 13, 12, 9,
)
SURROUNDING_ORDER = (
    9, 15, 16, 17, 16, 15, 9, 8, 1, 2, 3, 4, 3, 2, 1, 5, 6,
    7, 6, 5, 1, 8, 9, 12, 13, 14, 13, 12, 9, 10, 11, 10, 9,
)
TRAVELING_FIXED_ORDER = tuple(
    16 if i == 22 else j for i, j in enumerate(TRAVELING_ORDER)
)

APPENDED_COLUMN_LABEL = "t'"


@dataclass(frozen=True)
class SkeletonSequence:
    """Ordered frames of K joints x 3 angle-axis coordinates."""

    frames: np.ndarray  # (n_frames, 3K)
    joint_count: int
    frame_interval_ms: float = 40.0

    def __post_init__(self):
        frames = np.asarray(self.frames, dtype=np.float64)
        # The model itself needs K >= 2 (joint attention is over the other
        # joints); the container allows K = 1 so io tools stay composable.
        if self.joint_count < 1:
            raise DataError(f"need at least 1 joint, got {self.joint_count}")
        if frames.ndim != 2 or frames.shape[0] < 1:
            raise ShapeError(f"frames must be a non-empty 2-D array, got shape {frames.shape}")
        if frames.shape[1] != 3 * self.joint_count:
            raise ShapeError(
                f"frame width {frames.shape[1]} != 3 x {self.joint_count} joints"
            )
        if not np.isfinite(frames).all():
            raise DataError("frames contain non-finite values")
        if self.frame_interval_ms <= 0:
            raise DataError(f"frame interval must be positive, got {self.frame_interval_ms}")
        frames = frames.copy()
        frames.flags.writeable = False
        object.__setattr__(self, "frames", frames)

    def __len__(self) -> int:
        return self.frames.shape[0]

    @property
    def dim(self) -> int:
        return 3 * self.joint_count

    def frame(self, t: int) -> np.ndarray:
        """Frame at 1-based time index t."""
        if not 1 <= t <= len(self):
            raise DataError(f"frame index {t} out of range 1..{len(self)}")
        return self.frames[t - 1]


@dataclass(frozen=True)
class JointTraversal:
    """Visit order over joints; repeats allowed, every joint covered."""

    name: str
    order: tuple[int, ...]
    joint_count: int

    def __post_init__(self):
        object.__setattr__(self, "order", tuple(int(j) for j in self.order))
        if not self.order:
            raise DataError("traversal order is empty")
        bad = [j for j in self.order if not 1 <= j <= self.joint_count]
        if bad:
            raise DataError(
                f"traversal contains joint ids {bad} outside 1..{self.joint_count}"
            )
        missing = set(range(1, self.joint_count + 1)) - set(self.order)
        if missing:
            raise DataError(f"traversal never visits joints {sorted(missing)}")


@dataclass(frozen=True)
class FeatureMap:
    """d x n matrix; column j is the skeleton at the j-th covered time step.

    Row r (1-based) belongs to joint k = (r-1)//3 + 1, coordinate (r-1)%3 + 1.
    """

    matrix: np.ndarray
    column_times: tuple

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.float64)
        if m.ndim != 2:
            raise ShapeError(f"feature map must be 2-D, got shape {m.shape}")
        if m.shape[0] % 3 != 0:
            raise ShapeError(f"feature map rows {m.shape[0]} not a multiple of 3")
        if len(self.column_times) != m.shape[1]:
            raise ShapeError(
                f"{len(self.column_times)} column labels for {m.shape[1]} columns"
            )
        m = m.copy()
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "column_times", tuple(self.column_times))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def joint_count(self) -> int:
        return self.matrix.shape[0] // 3


def build_feature_map(seq: SkeletonSequence, window: tuple[int, int] | None = None) -> FeatureMap:
    """Feature map whose column j is frame j of the chosen window.

    ``window`` is a 1-based inclusive (first, last) frame range; default is
    the whole sequence.
    """
    if window is None:
        window = (1, len(seq))
    first, last = window
    if not (1 <= first <= last <= len(seq)):
        raise DataError(f"window {window} empty or outside 1..{len(seq)}")
    cols = seq.frames[first - 1: last].T
    return FeatureMap(cols, tuple(range(first, last + 1)))


def append_state(f: FeatureMap, h: np.ndarray) -> FeatureMap:
    """Append a state vector as one extra column labeled t'."""
    h = np.asarray(h, dtype=np.float64).reshape(-1)
    if h.shape[0] != f.dim:
        raise ShapeError(f"state length {h.shape[0]} != feature map height {f.dim}")
    return FeatureMap(
        np.hstack([f.matrix, h.reshape(-1, 1)]),
        f.column_times + (APPENDED_COLUMN_LABEL,),
    )


def joint_rows(f: FeatureMap, k: int) -> np.ndarray:
    """The three coordinate rows of joint k (1-based), shape (3, cols)."""
    if not 1 <= k <= f.joint_count:
        raise DataError(f"joint {k} out of range 1..{f.joint_count}")
    return f.matrix[3 * (k - 1): 3 * k, :]


def builtin_traversal(name: str, joint_count: int = 17) -> JointTraversal:
    """Named traversal orders: id (any K), traveling / surrounding /
    traveling_fixed (17 joints only).
    """
    if name == "id":
        return JointTraversal("id", tuple(range(1, joint_count + 1)), joint_count)
    orders = {
        "traveling": ("traveling", TRAVELING_ORDER),
        "surrounding": ("surrounding", SURROUNDING_ORDER),
        "traveling_fixed": ("custom", TRAVELING_FIXED_ORDER),
    }
    if name not in orders:
        raise ConfigError(
            f"unknown traversal {name!r}; valid: id, traveling, surrounding, traveling_fixed"
        )
    if joint_count != 17:
        raise ConfigError(f"traversal {name!r} is defined for 17 joints, got {joint_count}")
    label, order = orders[name]
    return JointTraversal(label, order, joint_count)


# -- CSV io -----------------------------------------------------------------


def load_csv(
    path,
    joint_selection: list[int] | None = None,
    frame_interval_ms: float = 40.0,
) -> SkeletonSequence:
    """Load a sequence from CSV: one frame per line, 3K numeric columns.

    ``joint_selection`` keeps the listed 1-based joints, in the given order.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"no such file: {path}")
    rows: list[list[float]] = []
    width = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            cells = line.split(",")
            if width is None:
                width = len(cells)
                if width % 3 != 0:
                    raise DataError(
                        f"{path}: line {lineno}: {width} columns is not a multiple of 3"
                    )
            elif len(cells) != width:
                raise DataError(
                    f"{path}: line {lineno}: expected {width} columns, got {len(cells)}"
                )
            row = []
            for colno, cell in enumerate(cells, start=1):
                try:
                    row.append(float(cell))
                except ValueError:
                    raise DataError(
                        f"{path}: line {lineno}, column {colno}: not a number: {cell!r}"
                    ) from None
            rows.append(row)
    if not rows:
        raise DataError(f"{path}: file holds no frames")
    frames = np.array(rows, dtype=np.float64)
    total_joints = frames.shape[1] // 3
    if joint_selection is not None:
        for k in joint_selection:
            if not 1 <= k <= total_joints:
                raise DataError(
                    f"{path}: joint selection index {k} out of range 1..{total_joints}"
                )
        cols = [c for k in joint_selection for c in range(3 * (k - 1), 3 * k)]
        frames = frames[:, cols]
        total_joints = len(joint_selection)
    return SkeletonSequence(frames, total_joints, frame_interval_ms)


def save_csv(seq: SkeletonSequence, path) -> None:
    """Write a sequence as CSV with 17 significant digits (lossless for float64)."""
    path = Path(path)
    with open(path, "w", encoding="utf-8") as fh:
        for row in seq.frames:
            fh.write(",".join(f"{x:.17g}" for x in row) + "\n")


# -- synthetic data -----------------------------------------------------------


@dataclass(frozen=True)
class SinusoidParams:
    """Per-joint oscillation drawn deterministically from a seed."""

    amplitude: np.ndarray  # (K,)
    period_frames: np.ndarray  # (K,) integer frame periods
    phase: np.ndarray  # (K,)
    noise_sigma: float


def synth_params(kind: str, joint_count: int, seed: int) -> SinusoidParams:
    """Deterministic per-joint parameters for a synthetic sequence kind."""
    if kind not in ("sinusoid", "walk_like"):
        raise ConfigError(f"unknown synthetic kind {kind!r}; valid: sinusoid, walk_like")
    if joint_count < 2:
        raise ConfigError(f"need at least 2 joints, got {joint_count}")
    rng = np.random.default_rng(seed)
    if kind == "sinusoid":
        amp = rng.uniform(0.3, 1.2, size=joint_count)
        period = rng.integers(8, 33, size=joint_count).astype(np.float64)
        phase = rng.uniform(0.0, 2.0 * math.pi, size=joint_count)
        return SinusoidParams(amp, period, phase, 0.0)
    # walk_like: joints k and k + K//2 move in antiphase, like opposite limbs.
    half = joint_count // 2
    amp = np.empty(joint_count)
    period = np.empty(joint_count)
    phase = np.empty(joint_count)
    amp[:half] = rng.uniform(0.4, 1.0, size=half)
    period[:half] = rng.integers(10, 21, size=half).astype(np.float64)
    phase[:half] = rng.uniform(0.0, 2.0 * math.pi, size=half)
    amp[half: 2 * half] = amp[:half]
    period[half: 2 * half] = period[:half]
    phase[half: 2 * half] = phase[:half] + math.pi
    if joint_count % 2:
        amp[-1] = rng.uniform(0.4, 1.0)
        period[-1] = float(rng.integers(10, 21))
        phase[-1] = rng.uniform(0.0, 2.0 * math.pi)
    return SinusoidParams(amp, period, phase, 0.03)


def synth_generate(
    kind: str,
    joint_count: int,
    total_frames: int,
    seed: int,
    frame_interval_ms: float = 40.0,
) -> SkeletonSequence:
    """Deterministic synthetic sequence; identical seeds give identical frames."""
    if total_frames < 4:
        raise ConfigError(f"need at least 4 frames, got {total_frames}")
    p = synth_params(kind, joint_count, seed)
    t = np.arange(1, total_frames + 1, dtype=np.float64)
    frames = np.empty((total_frames, 3 * joint_count))
    for k in range(joint_count):
        wave = p.amplitude[k] * np.sin(2.0 * math.pi * t / p.period_frames[k] + p.phase[k])
        frames[:, 3 * k: 3 * k + 3] = wave[:, None]
    if p.noise_sigma > 0:
        rng = np.random.default_rng(seed + 1)
        frames += p.noise_sigma * rng.standard_normal(frames.shape)
    return SkeletonSequence(frames, joint_count, frame_interval_ms)
