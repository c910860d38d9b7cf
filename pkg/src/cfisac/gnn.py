"""Heterogeneous edge-GNN beamformer.

Three vertex types (AP, UE, ST) and two bidirectional edge types (AP-UE,
AP-ST). Edges start as the stacked real/imaginary parts of their channel
(h_mu) or steering vector (a(theta_m)); every layer updates vertices from
sum-aggregated edges, then edges from their endpoint vertices, with the
initial edge value re-appended after each layer. A per-type linear head maps
the final edge features to raw beams, which are scaled per AP to spend the
power budget exactly.

All learned maps depend only on (hidden width, depth, N_t), so a trained
model runs unchanged on any number of APs and UEs.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from . import autodiff as ad
from .system import (BeamformingSolution, ChannelSample, ConfigError,
                     SystemConfig, stack_complex, steering_vector,
                     unstack_complex)

NORM_EPS = 1e-12   # guards the power-normalization sqrt at all-zero outputs

EDGE_TYPES = ("ap_ue", "ap_st")
# (edge type, vertex type) incidence pairs that own a vertex-update map
VERTEX_PAIRS = (("ap_ue", "ap"), ("ap_ue", "ue"), ("ap_st", "ap"), ("ap_st", "st"))


@dataclass(frozen=True)
class GraphTopology:
    ap_count: int
    ue_count: int
    st_count: int = 1

    def __post_init__(self):
        if self.st_count != 1:
            raise ConfigError("exactly one sensing target is supported")

    @property
    def ap_ue_edges(self) -> List[Tuple[int, int]]:
        return [(m, u) for m in range(self.ap_count) for u in range(self.ue_count)]

    @property
    def ap_st_edges(self) -> List[Tuple[int, int]]:
        return [(m, 0) for m in range(self.ap_count)]


@dataclass(frozen=True)
class GnnHyperparams:
    depth: int = 4
    hidden: int = 256
    slope: float = 0.1

    def __post_init__(self):
        if self.depth < 1 or self.hidden < 1:
            raise ConfigError("depth and hidden width must be >= 1")
        if not 0 < self.slope < 1:
            raise ConfigError("leaky-ReLU slope must be in (0, 1)")


def param_shapes(hyper: GnnHyperparams, n_t: int) -> Dict[str, tuple]:
    """Ordered name -> shape map; this order is the checkpoint manifest order."""
    H = hyper.hidden
    e0 = 2 * n_t
    shapes: Dict[str, tuple] = {}
    for l in range(1, hyper.depth + 1):
        ew = e0 if l == 1 else H + e0
        for et, vt in VERTEX_PAIRS:
            shapes[f"layer{l}.vertex.{et}.{vt}.w"] = (ew + H, H)
            shapes[f"layer{l}.vertex.{et}.{vt}.b"] = (H,)
        for et in EDGE_TYPES:
            shapes[f"layer{l}.edge.{et}.w"] = (2 * H + ew, H)
            shapes[f"layer{l}.edge.{et}.b"] = (H,)
    for et in EDGE_TYPES:
        shapes[f"out.{et}.w"] = (H + e0, e0)
        shapes[f"out.{et}.b"] = (e0,)
    return shapes


@dataclass
class GnnParameters:
    """All typed layer weights, keyed by the manifest names."""

    hyper: GnnHyperparams
    n_t: int
    values: Dict[str, np.ndarray] = field(default_factory=dict)

    def validate(self):
        shapes = param_shapes(self.hyper, self.n_t)
        if list(self.values.keys()) != list(shapes.keys()):
            raise ConfigError("parameter names do not match the manifest")
        for name, shape in shapes.items():
            if self.values[name].shape != shape:
                raise ConfigError(f"parameter {name} has shape "
                                  f"{self.values[name].shape}, expected {shape}")

    def astype(self, dtype) -> "GnnParameters":
        return GnnParameters(self.hyper, self.n_t,
                             {k: v.astype(dtype) for k, v in self.values.items()})


def init_parameters(hyper: GnnHyperparams, n_t: int,
                    rng: np.random.Generator,
                    dtype=np.float32) -> GnnParameters:
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases."""
    values = {}
    for name, shape in param_shapes(hyper, n_t).items():
        if name.endswith(".w"):
            bound = 1.0 / np.sqrt(shape[0])
            values[name] = rng.uniform(-bound, bound, size=shape).astype(dtype)
        else:
            values[name] = np.zeros(shape, dtype=dtype)
    return GnnParameters(hyper=hyper, n_t=n_t, values=values)


# ---------------------------------------------------------------------------
# edge feature initialization
# ---------------------------------------------------------------------------

def init_edge_features(sample: ChannelSample) -> Dict[str, np.ndarray]:
    """Stacked channel per AP-UE edge, stacked steering vector per AP-ST edge."""
    n_t = sample.h.shape[-1]
    a = np.stack([steering_vector(t, n_t) for t in sample.theta])
    return {"ap_ue": stack_complex(sample.h), "ap_st": stack_complex(a)}


def batch_edge_features(h: np.ndarray, theta: np.ndarray,
                        dtype=np.float32) -> Dict[str, np.ndarray]:
    """Batched variant: h (B, M, U, N_t) complex, theta (B, M)."""
    n_t = h.shape[-1]
    phase = np.pi * np.arange(n_t) * np.sin(theta)[..., None]
    a = np.exp(1j * phase)
    return {"ap_ue": stack_complex(h).astype(dtype),
            "ap_st": stack_complex(a).astype(dtype)}


# ---------------------------------------------------------------------------
# tape-based forward pass
# ---------------------------------------------------------------------------

def _linear(x: ad.Tensor, w: ad.Tensor, b: ad.Tensor) -> ad.Tensor:
    lead = x.shape[:-1]
    flat = ad.reshape(x, (-1, x.shape[-1]))
    y = ad.add(ad.matmul(flat, w), b)
    return ad.reshape(y, lead + (w.shape[1],))


def _broadcast_to(tape: ad.Tape, x: ad.Tensor, shape, dtype) -> ad.Tensor:
    return ad.add(x, tape.constant(np.zeros(shape, dtype=dtype)))


def forward_graph(tape: ad.Tape, params: Dict[str, ad.Tensor],
                  hyper: GnnHyperparams, e0_cu: ad.Tensor, e0_cs: ad.Tensor
                  ) -> Tuple[ad.Tensor, ad.Tensor]:
    """Message passing on the tape; returns raw 2*N_t outputs per edge.

    e0_cu: (B, M, U, 2*N_t) AP-UE features, e0_cs: (B, M, 2*N_t) AP-ST features.
    """
    B, M, U, _ = e0_cu.shape
    H = hyper.hidden
    dtype = e0_cu.data.dtype

    zeros = lambda shape: tape.constant(np.zeros(shape, dtype=dtype))
    v_ap = zeros((B, M, H))
    v_ue = zeros((B, U, H))
    v_st = zeros((B, H))
    e_cu, e_cs = e0_cu, e0_cs

    for l in range(1, hyper.depth + 1):
        p = lambda stem: (params[f"layer{l}.{stem}.w"], params[f"layer{l}.{stem}.b"])

        # vertex updates from previous-layer edges
        agg_ap_ue = ad.sum_reduce(e_cu, axis=2)           # (B, M, ew)
        agg_ap_st = e_cs                                  # single target
        agg_ue = ad.sum_reduce(e_cu, axis=1)              # (B, U, ew)
        agg_st = ad.sum_reduce(e_cs, axis=1)              # (B, ew)
        v_ap_new = ad.add(
            _linear(ad.concat([agg_ap_ue, v_ap], axis=-1), *p("vertex.ap_ue.ap")),
            _linear(ad.concat([agg_ap_st, v_ap], axis=-1), *p("vertex.ap_st.ap")))
        v_ue_new = _linear(ad.concat([agg_ue, v_ue], axis=-1), *p("vertex.ap_ue.ue"))
        v_st_new = _linear(ad.concat([agg_st, v_st], axis=-1), *p("vertex.ap_st.st"))
        v_ap, v_ue, v_st = v_ap_new, v_ue_new, v_st_new

        # edge updates from the fresh vertices, then re-append e0
        v_ap_mu = _broadcast_to(tape, ad.reshape(v_ap, (B, M, 1, H)),
                                (B, M, U, H), dtype)
        v_ue_mu = _broadcast_to(tape, ad.reshape(v_ue, (B, 1, U, H)),
                                (B, M, U, H), dtype)
        e_cu = ad.leaky_relu(
            _linear(ad.concat([v_ap_mu, v_ue_mu, e_cu], axis=-1), *p("edge.ap_ue")),
            hyper.slope)
        e_cu = ad.concat([e_cu, e0_cu], axis=-1)

        v_st_m = _broadcast_to(tape, ad.reshape(v_st, (B, 1, H)),
                               (B, M, H), dtype)
        e_cs = ad.leaky_relu(
            _linear(ad.concat([v_ap, v_st_m, e_cs], axis=-1), *p("edge.ap_st")),
            hyper.slope)
        e_cs = ad.concat([e_cs, e0_cs], axis=-1)

    raw_cu = _linear(e_cu, params["out.ap_ue.w"], params["out.ap_ue.b"])
    raw_cs = _linear(e_cs, params["out.ap_st.w"], params["out.ap_st.b"])
    return raw_cu, raw_cs


def normalize_graph(tape: ad.Tape, raw_cu: ad.Tensor, raw_cs: ad.Tensor,
                    power: float) -> Tuple[ad.Tensor, ad.Tensor]:
    """Scale each AP's raw outputs so its total power equals the budget."""
    B, M, U, _ = raw_cu.shape
    dtype = raw_cu.data.dtype
    total = ad.add(ad.sum_reduce(ad.square(raw_cu), axis=(2, 3)),
                   ad.sum_reduce(ad.square(raw_cs), axis=2))      # (B, M)
    total = ad.add(total, tape.constant(np.full((B, M), NORM_EPS, dtype=dtype)))
    scale = ad.divide(tape.constant(np.full((B, M), np.sqrt(power), dtype=dtype)),
                      ad.sqrt(total))
    f_cu = ad.elementwise_mul(raw_cu, ad.reshape(scale, (B, M, 1, 1)))
    f_cs = ad.elementwise_mul(raw_cs, ad.reshape(scale, (B, M, 1)))
    return f_cu, f_cs


def register_parameters(tape: ad.Tape, params: GnnParameters) -> Dict[str, ad.Tensor]:
    return {name: tape.parameter(name, value)
            for name, value in params.values.items()}


# ---------------------------------------------------------------------------
# convenience single-sample / batched inference
# ---------------------------------------------------------------------------

def forward(params: GnnParameters, hyper: GnnHyperparams,
            topology: GraphTopology, sample: ChannelSample,
            dtype=np.float64) -> Dict[str, np.ndarray]:
    """Raw final edge features for one realization (no gradient tracking)."""
    if sample.h.shape[0] != topology.ap_count or sample.h.shape[1] != topology.ue_count:
        raise ConfigError(f"sample dimensions {sample.h.shape[:2]} do not match "
                          f"topology ({topology.ap_count}, {topology.ue_count})")
    feats = init_edge_features(sample)
    tape = ad.Tape()
    p = register_parameters(tape, params.astype(dtype))
    e0_cu = tape.constant(feats["ap_ue"][None].astype(dtype))
    e0_cs = tape.constant(feats["ap_st"][None].astype(dtype))
    raw_cu, raw_cs = forward_graph(tape, p, hyper, e0_cu, e0_cs)
    out = {"ap_ue": raw_cu.data[0], "ap_st": raw_cs.data[0]}
    tape.clear()
    return out


def normalize_to_beams(raw: Dict[str, np.ndarray],
                       config: SystemConfig) -> BeamformingSolution:
    """Power-normalized beams from raw edge outputs of one realization."""
    raw_cu, raw_cs = raw["ap_ue"], raw["ap_st"]
    M, U, _ = raw_cu.shape
    total = (np.sum(raw_cu.astype(np.float64) ** 2, axis=(1, 2))
             + np.sum(raw_cs.astype(np.float64) ** 2, axis=1)) + NORM_EPS
    scale = np.sqrt(config.P) / np.sqrt(total)
    f = np.zeros((M, U + 1, config.N_t), dtype=np.complex128)
    f[:, :U] = unstack_complex(raw_cu) * scale[:, None, None]
    f[:, U] = unstack_complex(raw_cs) * scale[:, None]
    return BeamformingSolution(f=f)


def beams_for_batch(params: GnnParameters, config: SystemConfig,
                    h: np.ndarray, theta: np.ndarray,
                    dtype=np.float32) -> np.ndarray:
    """(B, M, S, N_t) complex beams for a batch of realizations."""
    if config.Q != 1:
        raise ConfigError("the GNN emits exactly one sensing stream (Q=1)")
    feats = batch_edge_features(h, theta, dtype=dtype)
    tape = ad.Tape()
    p = register_parameters(tape, params if
                            params.values["out.ap_ue.b"].dtype == dtype
                            else params.astype(dtype))
    raw_cu, raw_cs = forward_graph(tape, p, params.hyper,
                                   tape.constant(feats["ap_ue"]),
                                   tape.constant(feats["ap_st"]))
    f_cu, f_cs = normalize_graph(tape, raw_cu, raw_cs, config.P)
    B, M, U, _ = f_cu.shape
    f = np.zeros((B, M, config.S, config.N_t), dtype=np.complex128)
    f[:, :, :U] = unstack_complex(f_cu.data.astype(np.float64))
    f[:, :, U] = unstack_complex(f_cs.data.astype(np.float64))
    tape.clear()
    return f


def beams_for_sample(params: GnnParameters, config: SystemConfig,
                     sample: ChannelSample, dtype=np.float32) -> BeamformingSolution:
    f = beams_for_batch(params, config, sample.h[None], sample.theta[None],
                        dtype=dtype)
    return BeamformingSolution(f=f[0])


# ---------------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------------

CKPT_MAGIC = b"CFCK"
CKPT_VERSION = 1
_CKPT_HEADER = struct.Struct("<4sIQ")


class CheckpointError(ValueError):
    pass


def save_checkpoint(path, params: GnnParameters,
                    extra: Optional[dict] = None) -> None:
    """Text manifest (JSON) followed by a flat little-endian f32 weight blob."""
    manifest = []
    offset = 0
    blobs = []
    for name, value in params.values.items():
        arr = np.ascontiguousarray(value, dtype="<f4")
        manifest.append({"name": name, "shape": list(arr.shape),
                         "offset": offset, "count": int(arr.size)})
        offset += arr.size
        blobs.append(arr.tobytes())
    meta = {
        "format_version": CKPT_VERSION,
        "hyper": {"depth": params.hyper.depth, "hidden": params.hyper.hidden,
                  "slope": params.hyper.slope},
        "n_t": params.n_t,
        "manifest": manifest,
        "extra": extra or {},
    }
    doc = json.dumps(meta, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(_CKPT_HEADER.pack(CKPT_MAGIC, CKPT_VERSION, len(doc)))
        fh.write(doc)
        for b in blobs:
            fh.write(b)


def load_checkpoint(path) -> Tuple[GnnParameters, dict]:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _CKPT_HEADER.size:
        raise CheckpointError("checkpoint truncated before header")
    magic, version, doc_len = _CKPT_HEADER.unpack_from(raw, 0)
    if magic != CKPT_MAGIC:
        raise CheckpointError(f"bad magic {magic!r}")
    if version != CKPT_VERSION:
        raise CheckpointError(f"unsupported version {version}")
    meta = json.loads(raw[_CKPT_HEADER.size:_CKPT_HEADER.size + doc_len])
    hyper = GnnHyperparams(**meta["hyper"])
    payload = raw[_CKPT_HEADER.size + doc_len:]
    if len(payload) % 4:
        raise CheckpointError("weight blob length is not a multiple of 4")
    blob = np.frombuffer(payload, dtype="<f4")
    values = {}
    for entry in meta["manifest"]:
        lo, n = entry["offset"], entry["count"]
        if lo + n > blob.size:
            raise CheckpointError(f"blob truncated at parameter {entry['name']}")
        values[entry["name"]] = blob[lo:lo + n].reshape(entry["shape"]).copy()
    params = GnnParameters(hyper=hyper, n_t=meta["n_t"], values=values)
    params.validate()
    return params, meta.get("extra", {})
