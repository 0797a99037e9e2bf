"""Recurrent cells and the combined co-attention prediction step.

One prediction step runs, in order: temporal attention over the observed
map, the skeleton-state GRU, appending the new state as an extra column,
a traversal of the joints through the spatial GRU (with joint attention and
co-attention context per visited joint), the confidence gate, and the final
blend of the skeleton stream with the gated joint stream.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .attention import (
    coattention_context,
    coattention_map,
    joint_attention,
    skeleton_attention,
)
from .autodiff import Node, Tape
from .config import TrainConfig
from .data import SkeletonSequence, builtin_traversal
from .errors import ConfigError, ShapeError
from .params import (
    GateParams,
    ParameterSet,
    SkeletonGruParams,
    SpatialGruParams,
    bind,
)


@dataclass
class StepState:
    """Recurrent state between prediction steps.

    ``h`` is the skeleton motion state (hidden width), ``q`` maps each joint
    to its latest 3 x (T+1) motion state, ``x_tilde`` is the last prediction
    (the next step's input). Fields hold arrays or tape nodes depending on
    context.
    """

    h: object
    x_tilde: object
    q: dict[int, object]


def skeleton_gru_step(tape: Tape, x_t: Node, h_prev: Node, h_a: Node, p: SkeletonGruParams) -> Node:
    """One gated update of the skeleton motion state.

    The attention context enters the update and reset gates but not the
    memory candidate.
    """
    if p.W_in is not None:
        x_t = tape.matmul(p.W_in, x_t)
        h_a = tape.matmul(p.W_in, h_a)
    z = tape.sigmoid(tape.matmul(p.W_zx, x_t) + tape.matmul(p.W_zh, h_prev)
                     + tape.matmul(p.W_za, h_a) + p.b_z)
    r = tape.sigmoid(tape.matmul(p.W_rx, x_t) + tape.matmul(p.W_rh, h_prev)
                     + tape.matmul(p.W_ra, h_a) + p.b_r)
    c = tape.tanh(tape.matmul(p.W_cx, x_t) + tape.matmul(p.W_ch, tape.mul(r, h_prev)) + p.b_c)
    ones = tape.ones(*h_prev.value.shape)
    return tape.mul(ones - z, h_prev) + tape.mul(z, c)


def project_out(tape: Tape, h: Node, p: SkeletonGruParams) -> Node:
    """The d-dimensional view of the hidden state (identity when n == d)."""
    if p.W_out is None:
        return h
    return tape.matmul(p.W_out, h)


def spatial_gru_step(tape: Tape, m_s: Node, q_prev: Node, o_s: Node, p: SpatialGruParams) -> Node:
    """One gated update of a joint motion state, matrix-valued throughout."""
    if m_s.value.shape != q_prev.value.shape or m_s.value.shape != o_s.value.shape:
        raise ShapeError(
            f"spatial step operands disagree: {m_s.value.shape}, "
            f"{q_prev.value.shape}, {o_s.value.shape}"
        )
    z = tape.sigmoid(tape.matmul(p.W_zm, m_s) + tape.matmul(p.W_zq, q_prev)
                     + tape.matmul(p.W_zo, o_s) + p.B_z)
    r = tape.sigmoid(tape.matmul(p.W_rm, m_s) + tape.matmul(p.W_rq, q_prev)
                     + tape.matmul(p.W_ro, o_s) + p.B_r)
    c = tape.tanh(tape.matmul(p.W_cm, m_s) + tape.matmul(p.W_cq, tape.mul(r, q_prev)) + p.B_c)
    ones = tape.ones(*q_prev.value.shape)
    return tape.mul(ones - z, q_prev) + tape.mul(z, c)


def confidence_gate(tape: Tape, h_joint: Node, m_joint: Node, p: GateParams) -> Node:
    """Elementwise weight exp(-rho * (f_h - f_m)^2) in (0, 1].

    Entries where the joint-stream state disagrees with the input joint
    motion are pushed toward zero.
    """
    if h_joint.value.shape != m_joint.value.shape:
        raise ShapeError(
            f"gate operands disagree: {h_joint.value.shape} vs {m_joint.value.shape}"
        )
    f_h = tape.tanh(tape.matmul(p.W_fh, h_joint) + p.b_h)
    f_m = tape.tanh(tape.matmul(p.W_fm, m_joint) + p.b_m)
    return tape.exp(tape.scale(tape.square(f_h - f_m), -p.rho))


def traverse_joints(
    tape: Tape,
    f_a: Node,
    f_tp: Node,
    order,
    joint_attn_params,
    spatial_params: SpatialGruParams,
    tau2: float,
    q_init: Node | None = None,
    force_uniform_joint_attn: bool = False,
) -> dict[int, Node]:
    """Chain the spatial GRU along a joint visit order.

    The running state crosses joint boundaries: each visit starts from the
    previous visit's output no matter which joint produced it. A joint's
    reported state is the one from its last visit. ``order`` may be a
    JointTraversal or a bare list of 1-based joint ids.
    """
    order = tuple(getattr(order, "order", order))
    d, t1 = f_tp.value.shape
    joints = d // 3
    for k in order:
        if not 1 <= k <= joints:
            raise ShapeError(f"traversal visits joint {k}, map has 1..{joints}")
    q = q_init if q_init is not None else tape.constant(np.zeros((3, t1)))
    final: dict[int, Node] = {}
    for k in order:
        override = np.ones((1, joints - 1)) if force_uniform_joint_attn else None
        alphas = joint_attention(tape, f_tp, k, joint_attn_params, tau2, alpha_override=override)
        f_co = coattention_map(tape, f_a, f_tp, k, alphas)
        o_k = coattention_context(tape, f_co, k)
        m_s = tape.row_block(f_tp, 3 * (k - 1), 3 * k)
        q = spatial_gru_step(tape, m_s, q, o_k, spatial_params)
        final[k] = q
    return final


def _traversal_order(config: TrainConfig) -> tuple[int, ...]:
    return builtin_traversal(config.traversal, config.joint_count).order


def coattention_gru_step(
    tape: Tape,
    f_obs: Node,
    state: StepState,
    params: ParameterSet,
    config: TrainConfig,
    order: tuple[int, ...] | None = None,
) -> tuple[Node, StepState]:
    """One full prediction step; returns (next skeleton vector, new state).

    ``params`` must already be bound onto ``tape``; ``state`` fields must be
    nodes of the same tape.
    """
    d, T = f_obs.value.shape
    joints = d // 3
    if order is None:
        order = _traversal_order(config)
    force_skel = config.variant in ("no_sca", "no_skel_attn")
    force_joint = config.variant in ("no_sca", "no_joint_attn")

    h_prev_view = project_out(tape, state.h, params.skel_gru)
    _, f_a, h_a = skeleton_attention(
        tape, f_obs, h_prev_view, params.skel_attn, config.tau1,
        alpha_override=np.ones((1, T)) if force_skel else None,
    )
    h_new = skeleton_gru_step(tape, state.x_tilde, state.h, h_a, params.skel_gru)
    h_view = project_out(tape, h_new, params.skel_gru)
    f_tp = tape.hstack([f_obs, h_view])

    q_final = traverse_joints(
        tape, f_a, f_tp, order, params.joint_attn, params.spatial_gru,
        config.tau2, force_uniform_joint_attn=force_joint,
    )
    missing = [k for k in range(1, joints + 1) if k not in q_final]
    if missing:
        raise ConfigError(f"traversal never visits joints {missing}")

    h_joint = tape.vstack([tape.col_block(q_final[k], T, T + 1) for k in range(1, joints + 1)])
    m_joint = tape.vstack([
        tape.col_block(tape.row_block(f_tp, 3 * (k - 1), 3 * k), T, T + 1)
        for k in range(1, joints + 1)
    ])
    gamma = confidence_gate(tape, h_joint, m_joint, params.gate)
    x_next = tape.scale(h_view + tape.mul(gamma, h_joint), 0.5)
    return x_next, StepState(h=h_new, x_tilde=x_next, q=q_final)


def encode_initial_state(tape: Tape, f_obs: Node, params: ParameterSet, config: TrainConfig) -> Node:
    """Run the skeleton GRU over the observed frames to produce the initial
    motion state (h0_mode "encoder"); starts from zeros.
    """
    d, T = f_obs.value.shape
    n = config.hidden_size_value
    force_skel = config.variant in ("no_sca", "no_skel_attn")
    h = tape.constant(np.zeros((n, 1)))
    for t in range(T):
        h_view = project_out(tape, h, params.skel_gru)
        _, _, h_a = skeleton_attention(
            tape, f_obs, h_view, params.skel_attn, config.tau1,
            alpha_override=np.ones((1, T)) if force_skel else None,
        )
        x_t = tape.col_block(f_obs, t, t + 1)
        h = skeleton_gru_step(tape, x_t, h, h_a, params.skel_gru)
    return h


def initial_state(tape: Tape, f_obs: Node, params: ParameterSet, config: TrainConfig) -> StepState:
    """State before the first prediction: h0 per config, x_tilde = last frame."""
    d, T = f_obs.value.shape
    if config.h0_mode == "encoder":
        h0 = encode_initial_state(tape, f_obs, params, config)
    else:
        h0 = tape.constant(np.zeros((config.hidden_size_value, 1)))
    x0 = tape.col_block(f_obs, T - 1, T)
    return StepState(h=h0, x_tilde=x0, q={})


def rollout_on_tape(
    tape: Tape,
    obs_columns: np.ndarray,
    params: ParameterSet,
    config: TrainConfig,
    horizon: int,
) -> tuple[list[Node], StepState]:
    """Predict ``horizon`` frames on an existing tape; params already bound.

    The observed map stays fixed; every prediction is fed back as the next
    input. Returns the prediction nodes (each d x 1) and the final state.
    """
    if horizon < 1:
        raise ConfigError(f"horizon must be >= 1, got {horizon}")
    f_obs = tape.constant(obs_columns)
    order = _traversal_order(config)
    state = initial_state(tape, f_obs, params, config)
    preds: list[Node] = []
    for _ in range(horizon):
        x_next, state = coattention_gru_step(tape, f_obs, state, params, config, order)
        preds.append(x_next)
    return preds, state


def rollout(
    observed: SkeletonSequence,
    horizon: int,
    params: ParameterSet,
    config: TrainConfig,
) -> SkeletonSequence:
    """Predict ``horizon`` future frames after an observed sequence."""
    if observed.dim != config.dim:
        raise ShapeError(
            f"sequence has {observed.joint_count} joints, model expects {config.joint_count}"
        )
    if len(observed) != config.obs_len:
        raise ShapeError(
            f"observed window has {len(observed)} frames, model expects {config.obs_len}"
        )
    tape = Tape()
    bound = bind(tape, params)
    preds, _ = rollout_on_tape(tape, observed.frames.T, bound, config, horizon)
    frames = np.hstack([x.value for x in preds]).T
    return SkeletonSequence(frames, observed.joint_count, observed.frame_interval_ms)


def predict_step(
    f_columns: np.ndarray,
    state_h: np.ndarray,
    state_x: np.ndarray,
    params: ParameterSet,
    config: TrainConfig,
) -> tuple[np.ndarray, StepState]:
    """Array-level single step: build a throwaway tape, run one step, return
    the prediction plus the new state as arrays.
    """
    tape = Tape()
    bound = bind(tape, params)
    state = StepState(
        h=tape.constant(state_h),
        x_tilde=tape.constant(state_x),
        q={},
    )
    x_next, new_state = coattention_gru_step(
        tape, tape.constant(f_columns), state, bound, config
    )
    return x_next.value.copy(), StepState(
        h=new_state.h.value.copy(),
        x_tilde=new_state.x_tilde.value.copy(),
        q={k: v.value.copy() for k, v in new_state.q.items()},
    )
