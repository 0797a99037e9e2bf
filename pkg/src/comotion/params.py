"""Model parameters: shapes, initialization, tape binding, checkpoint io.

The checkpoint container is a small self-describing binary: a JSON header
listing key, shape and byte offsets, followed by raw little-endian float64
data. Writing is deterministic, so identical parameters produce identical
files byte for byte.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .autodiff import Tape
from .config import TrainConfig, config_from_dict
from .errors import DataError, ShapeError

_MAGIC = b"COMOTION1\n"


@dataclass
class SkeletonAttentionParams:
    """Temporal attention over observed frames: score(j) = w_e' tanh(U_eh h + U_ef F_j + b_e)."""

    U_eh: np.ndarray  # (a, d)
    U_ef: np.ndarray  # (a, d)
    w_e: np.ndarray  # (a, 1)
    b_e: np.ndarray  # (a, 1)


@dataclass
class JointAttentionParams:
    """Spatial attention across joints; the score bias is shared across joints."""

    U_cb: np.ndarray  # (a, 3)
    U_cm: np.ndarray  # (a, 3)
    w_c: np.ndarray  # (a, 1)
    b_c: np.ndarray  # (a, 1)


@dataclass
class SkeletonGruParams:
    """Gated update of the skeleton motion state.

    With hidden width n equal to d the cell matches the printed equations
    directly (W_in/W_out absent). With n != d, W_in projects the d-vector
    inputs into the hidden space and W_out projects the state back out.
    """

    W_zx: np.ndarray
    W_zh: np.ndarray
    W_za: np.ndarray
    W_rx: np.ndarray
    W_rh: np.ndarray
    W_ra: np.ndarray
    W_cx: np.ndarray
    W_ch: np.ndarray
    b_z: np.ndarray
    b_r: np.ndarray
    b_c: np.ndarray
    W_in: np.ndarray | None = None  # (n, d) when n != d
    W_out: np.ndarray | None = None  # (d, n) when n != d


@dataclass
class SpatialGruParams:
    """Gated update of one joint's 3 x (T+1) motion state along a traversal."""

    W_zm: np.ndarray  # (3, 3)
    W_zq: np.ndarray
    W_zo: np.ndarray
    W_rm: np.ndarray
    W_rq: np.ndarray
    W_ro: np.ndarray
    W_cm: np.ndarray
    W_cq: np.ndarray
    B_z: np.ndarray  # (3, T+1)
    B_r: np.ndarray
    B_c: np.ndarray


@dataclass
class GateParams:
    """Confidence gate comparing joint-stream and skeleton-stream states."""

    W_fh: np.ndarray  # (d, d)
    W_fm: np.ndarray  # (d, d)
    b_h: np.ndarray  # (d, 1)
    b_m: np.ndarray  # (d, 1)
    rho: float = 1.0  # bandwidth; not trained


_GROUPS = ("skel_attn", "joint_attn", "skel_gru", "spatial_gru", "gate")


@dataclass
class ParameterSet:
    """All trainable weights, grouped by sub-model."""

    skel_attn: SkeletonAttentionParams
    joint_attn: JointAttentionParams
    skel_gru: SkeletonGruParams
    spatial_gru: SpatialGruParams
    gate: GateParams

    def flat(self) -> dict[str, np.ndarray]:
        """Name -> value in a fixed iteration order ("group.symbol").

        Works both for raw arrays and for tape-bound node mirrors; the
        non-trained scalar (gate rho) is excluded.
        """
        out: dict[str, np.ndarray] = {}
        for group in _GROUPS:
            sub = getattr(self, group)
            for f in dataclasses.fields(sub):
                value = getattr(sub, f.name)
                if value is not None and not isinstance(value, (int, float)):
                    out[f"{group}.{f.name}"] = value
        return out

    def copy(self) -> "ParameterSet":
        def clone(sub):
            kwargs = {}
            for f in dataclasses.fields(sub):
                value = getattr(sub, f.name)
                kwargs[f.name] = value.copy() if isinstance(value, np.ndarray) else value
            return type(sub)(**kwargs)

        return ParameterSet(*(clone(getattr(self, g)) for g in _GROUPS))

    def set_flat(self, name: str, value: np.ndarray) -> None:
        group, _, field = name.partition(".")
        sub = getattr(self, group)
        current = getattr(sub, field)
        if current.shape != value.shape:
            raise ShapeError(f"{name}: shape {value.shape} != expected {current.shape}")
        setattr(sub, field, np.ascontiguousarray(value, dtype=np.float64))


def init_parameters(config: TrainConfig, seed: int | None = None) -> ParameterSet:
    """Seeded init: weights uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)],
    biases zero except update-gate biases, which start at +1 so the update
    gates begin mostly open.
    """
    d = config.dim
    a = config.attn_width_value
    n = config.hidden_size_value
    t1 = config.obs_len + 1
    rng = np.random.default_rng(config.seed if seed is None else seed)

    def w(rows, cols):
        bound = 1.0 / np.sqrt(cols)
        return rng.uniform(-bound, bound, size=(rows, cols))

    skel_attn = SkeletonAttentionParams(
        U_eh=w(a, d), U_ef=w(a, d), w_e=w(a, 1), b_e=np.zeros((a, 1))
    )
    joint_attn = JointAttentionParams(
        U_cb=w(a, 3), U_cm=w(a, 3), w_c=w(a, 1), b_c=np.zeros((a, 1))
    )
    skel_gru = SkeletonGruParams(
        W_zx=w(n, n), W_zh=w(n, n), W_za=w(n, n),
        W_rx=w(n, n), W_rh=w(n, n), W_ra=w(n, n),
        W_cx=w(n, n), W_ch=w(n, n),
        b_z=np.ones((n, 1)), b_r=np.zeros((n, 1)), b_c=np.zeros((n, 1)),
        W_in=w(n, d) if n != d else None,
        W_out=w(d, n) if n != d else None,
    )
    spatial_gru = SpatialGruParams(
        W_zm=w(3, 3), W_zq=w(3, 3), W_zo=w(3, 3),
        W_rm=w(3, 3), W_rq=w(3, 3), W_ro=w(3, 3),
        W_cm=w(3, 3), W_cq=w(3, 3),
        B_z=np.ones((3, t1)), B_r=np.zeros((3, t1)), B_c=np.zeros((3, t1)),
    )
    gate = GateParams(
        W_fh=w(d, d), W_fm=w(d, d), b_h=np.zeros((d, 1)), b_m=np.zeros((d, 1)),
        rho=config.rho,
    )
    return ParameterSet(skel_attn, joint_attn, skel_gru, spatial_gru, gate)


def bind(tape: Tape, params: ParameterSet) -> ParameterSet:
    """Mirror a parameter set onto a tape as variable nodes (same structure)."""

    def bind_sub(sub):
        kwargs = {}
        for f in dataclasses.fields(sub):
            value = getattr(sub, f.name)
            if isinstance(value, np.ndarray):
                kwargs[f.name] = tape.variable(value)
            else:
                kwargs[f.name] = value
        return type(sub)(**kwargs)

    return ParameterSet(*(bind_sub(getattr(params, g)) for g in _GROUPS))


# -- checkpoint container -------------------------------------------------


def save_checkpoint(path, params: ParameterSet, config: TrainConfig) -> None:
    """Write parameters plus the config snapshot; byte-deterministic."""
    arrays = params.flat()
    entries = []
    offset = 0
    blobs = []
    for name, arr in arrays.items():
        blob = np.ascontiguousarray(arr, dtype="<f8").tobytes()
        entries.append({"name": name, "shape": list(arr.shape), "offset": offset})
        blobs.append(blob)
        offset += len(blob)
    header = {
        "format": "comotion-checkpoint",
        "version": 1,
        "config": config.to_dict(),
        "gate_rho": params.gate.rho,
        "entries": entries,
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(len(header_bytes).to_bytes(8, "little"))
        fh.write(header_bytes)
        for blob in blobs:
            fh.write(blob)
    tmp.replace(path)


def load_checkpoint(path) -> tuple[ParameterSet, TrainConfig]:
    """Read a checkpoint written by save_checkpoint; round-trips bitwise."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"no such checkpoint: {path}")
    raw = path.read_bytes()
    if not raw.startswith(_MAGIC):
        raise DataError(f"{path}: not a recognized checkpoint file")
    hlen = int.from_bytes(raw[len(_MAGIC): len(_MAGIC) + 8], "little")
    hstart = len(_MAGIC) + 8
    try:
        header = json.loads(raw[hstart: hstart + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise DataError(f"{path}: corrupt checkpoint header: {exc}") from None
    config = config_from_dict(header["config"])
    params = init_parameters(config)
    params.gate.rho = float(header.get("gate_rho", config.rho))
    body = hstart + hlen
    flat = params.flat()
    seen = set()
    for entry in header["entries"]:
        name, shape, offset = entry["name"], tuple(entry["shape"]), entry["offset"]
        if name not in flat:
            raise DataError(f"{path}: unexpected checkpoint key {name!r}")
        count = int(np.prod(shape))
        arr = np.frombuffer(
            raw, dtype="<f8", count=count, offset=body + offset
        ).reshape(shape).astype(np.float64)
        params.set_flat(name, arr)
        seen.add(name)
    missing = set(flat) - seen
    if missing:
        raise DataError(f"{path}: checkpoint is missing keys {sorted(missing)}")
    return params, config
