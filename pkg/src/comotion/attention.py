"""Temporal (skeleton) and spatial (joint) attention, and their co-attention
combination.

All functions compose tape primitives so the whole pipeline stays
differentiable. Feature maps are plain d x T (or d x (T+1)) nodes whose rows
group by joint in consecutive coordinate triples.

Forcing a factor set to ones (``alpha_override``) routes the constant
weights through the exact same scaling arithmetic as learned weights, so an
ablated model is bitwise identical to the full pipeline with substituted
factors.
"""

from __future__ import annotations

import numpy as np

from .autodiff import Node, Tape
from .errors import ShapeError
from .params import JointAttentionParams, SkeletonAttentionParams


def skeleton_attention(
    tape: Tape,
    f_obs: Node,
    h_prev: Node,
    p: SkeletonAttentionParams,
    tau1: float,
    alpha_override: np.ndarray | None = None,
):
    """Attention over observed time steps.

    Scores each column j of the d x T map against the previous motion state,
    softmaxes them at temperature tau1, scales the columns, and averages the
    scaled map into a context vector.

    Returns (alpha 1 x T, weighted map d x T, context d x 1).
    """
    d, T = f_obs.value.shape
    if h_prev.value.shape != (d, 1):
        raise ShapeError(f"state shape {h_prev.value.shape} != ({d}, 1)")
    if alpha_override is None:
        ones_row = tape.ones(1, T)
        pre = tape.matmul(p.U_eh, h_prev) @ ones_row
        pre = pre + tape.matmul(p.U_ef, f_obs)
        pre = pre + p.b_e @ ones_row
        scores = tape.transpose(p.w_e) @ tape.tanh(pre)
        alpha = tape.softmax_temp(scores, tau1)
    else:
        override = np.asarray(alpha_override, dtype=np.float64).reshape(1, -1)
        if override.shape != (1, T):
            raise ShapeError(f"alpha override shape {override.shape} != (1, {T})")
        alpha = tape.constant(override)
    weights = tape.ones(d, 1) @ alpha  # broadcast the row over all coordinates
    f_a = tape.mul(f_obs, weights)
    h_a = tape.mean_columns(f_a)
    return alpha, f_a, h_a


def joint_attention(
    tape: Tape,
    f_tp: Node,
    k: int,
    p: JointAttentionParams,
    tau2: float,
    alpha_override: np.ndarray | None = None,
) -> dict[int, Node]:
    """Attention of joint k over the other joints of a d x (T+1) map.

    Each score compares the time row-sums of joint k's coordinate block with
    joint l's. Returns {l: scalar weight node} for every l != k, summing
    to 1.
    """
    d, t1 = f_tp.value.shape
    joints = d // 3
    if joints < 2:
        raise ShapeError(f"need at least 2 joints, map has {joints}")
    if not 1 <= k <= joints:
        raise ShapeError(f"joint {k} out of range 1..{joints}")
    others = [l for l in range(1, joints + 1) if l != k]
    if alpha_override is not None:
        override = np.asarray(alpha_override, dtype=np.float64).reshape(1, -1)
        if override.shape != (1, len(others)):
            raise ShapeError(
                f"alpha override shape {override.shape} != (1, {len(others)})"
            )
        row = tape.constant(override)
    else:
        ones_col = tape.ones(t1, 1)
        row_sum_k = tape.row_block(f_tp, 3 * (k - 1), 3 * k) @ ones_col
        anchor = tape.matmul(p.U_cb, row_sum_k)
        scores = []
        for l in others:
            row_sum_l = tape.row_block(f_tp, 3 * (l - 1), 3 * l) @ ones_col
            pre = anchor + tape.matmul(p.U_cm, row_sum_l) + p.b_c
            scores.append(tape.transpose(p.w_c) @ tape.tanh(pre))
        row = tape.softmax_temp(tape.hstack(scores), tau2)
    return {l: tape.col_block(row, i, i + 1) for i, l in enumerate(others)}


def coattention_map(
    tape: Tape,
    f_a: Node,
    f_tp: Node,
    k: int,
    alphas: dict[int, Node],
) -> Node:
    """Co-attention feature map for target joint k, shape d x (T+1).

    Joint l's rows are alpha_l times [weighted history columns, current
    state column], so interior entries carry a temporal factor times a
    spatial factor. Joint k's own rows pass through unscaled.
    """
    d, T = f_a.value.shape
    if f_tp.value.shape != (d, T + 1):
        raise ShapeError(
            f"map shapes disagree: {f_a.value.shape} history vs {f_tp.value.shape} appended"
        )
    joints = d // 3
    missing = [l for l in range(1, joints + 1) if l != k and l not in alphas]
    if missing:
        raise ShapeError(f"missing attention weights for joints {missing}")
    base = tape.hstack([f_a, tape.col_block(f_tp, T, T + 1)])
    blocks = []
    for l in range(1, joints + 1):
        rows = tape.row_block(base, 3 * (l - 1), 3 * l)
        blocks.append(rows if l == k else tape.smul(alphas[l], rows))
    return tape.vstack(blocks)


def coattention_context(tape: Tape, f_co: Node, k: int) -> Node:
    """Motion context for joint k: per-coordinate mean over the other joints'
    rows of the co-attention map, shape 3 x (T+1).
    """
    d = f_co.value.shape[0]
    joints = d // 3
    if joints < 2:
        raise ShapeError(f"need at least 2 joints, map has {joints}")
    acc = None
    for l in range(1, joints + 1):
        if l == k:
            continue
        block = tape.row_block(f_co, 3 * (l - 1), 3 * l)
        acc = block if acc is None else acc + block
    return tape.scale(acc, 1.0 / (joints - 1))
