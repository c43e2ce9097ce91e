"""The attentive marker network.

Pipeline per example: marker gating (element-wise multiply of learned
argument/predicate/other vectors into the token vectors), a bidirectional
recurrent read, pairwise self-attention over the hidden states, then a
hierarchical head stack: an intermediate Likert-scale layer feeding
per-property output heads. Multilabel mode emits a probability pair per
property; regression mode emits a nonnegative Likert estimate.
"""

import json
import math
import struct
from dataclasses import asdict, dataclass

import numpy as np

from . import autodiff as ad
from .dataset import TAG_ARGUMENT, TAG_OTHER, TAG_PREDICATE
from .embeddings import MARKER_ARGUMENT, MARKER_OTHER, MARKER_PREDICATE, init_marker_table

MODES = ("multilabel", "regression")

_CKPT_MAGIC = b"SPRLCKP1"


class CheckpointError(ValueError):
    """Checkpoint file is malformed or inconsistent with its manifest."""


@dataclass
class ModelConfig:
    mode: str
    n_properties: int
    input_dim: int
    max_len: int = 30
    hidden_units: int = 64  # per direction
    attention_units: int = 64
    marker_width: int = 0  # 0 means gate the full input vector
    no_self_attention: bool = False
    no_markers: bool = False
    no_predicate_marker: bool = False
    no_argument_marker: bool = False
    no_hierarchy: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.marker_width == 0:
            self.marker_width = self.input_dim
        for name in ("n_properties", "input_dim", "max_len", "hidden_units", "attention_units", "marker_width"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.marker_width > self.input_dim:
            raise ValueError("marker_width cannot exceed input_dim")

    @property
    def state_width(self):
        return 2 * self.hidden_units

    @property
    def z_dim(self):
        return self.max_len * self.state_width

    @property
    def head_input_dim(self):
        return self.z_dim + (0 if self.no_hierarchy else self.n_properties)


def _uniform(rng, shape, fan_in):
    bound = 1.0 / math.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(np.float32)


class ModelParams:
    """All learnable arrays, keyed by name, in a fixed order."""

    def __init__(self, arrays):
        self.arrays = arrays

    @staticmethod
    def expected_shapes(config):
        c = config
        h4 = 4 * c.hidden_units
        shapes = {"marker": (3, c.marker_width)}
        for d in ("fw", "bw"):
            shapes[f"lstm_{d}_w"] = (h4, c.input_dim)
            shapes[f"lstm_{d}_u"] = (h4, c.hidden_units)
            shapes[f"lstm_{d}_b"] = (h4,)
        shapes["attn_q"] = (c.attention_units, c.state_width)
        shapes["attn_k"] = (c.attention_units, c.state_width)
        shapes["attn_beta"] = (c.attention_units,)
        shapes["attn_v"] = (c.attention_units,)
        shapes["attn_alpha"] = (1,)
        shapes["aux_w"] = (c.n_properties, c.z_dim)
        if c.mode == "multilabel":
            shapes["head_w"] = (c.n_properties, 2, c.head_input_dim)
        else:
            shapes["head_w"] = (c.n_properties, c.head_input_dim)
        return shapes

    @classmethod
    def initialize(cls, config, rng=None):
        """Draw all arrays in a fixed order so seeds reproduce exactly.

        Every array is created regardless of ablation flags; toggling a flag
        never shifts the draws of the remaining parameters.
        """
        if rng is None:
            rng = np.random.default_rng(config.seed)
        c = config
        arrays = {"marker": init_marker_table(c.marker_width, rng)}
        for d in ("fw", "bw"):
            arrays[f"lstm_{d}_w"] = _uniform(rng, (4 * c.hidden_units, c.input_dim), c.input_dim)
            arrays[f"lstm_{d}_u"] = _uniform(rng, (4 * c.hidden_units, c.hidden_units), c.hidden_units)
            arrays[f"lstm_{d}_b"] = np.zeros(4 * c.hidden_units, dtype=np.float32)
        arrays["attn_q"] = _uniform(rng, (c.attention_units, c.state_width), c.state_width)
        arrays["attn_k"] = _uniform(rng, (c.attention_units, c.state_width), c.state_width)
        arrays["attn_beta"] = np.zeros(c.attention_units, dtype=np.float32)
        arrays["attn_v"] = _uniform(rng, (c.attention_units,), c.attention_units)
        arrays["attn_alpha"] = np.zeros(1, dtype=np.float32)
        arrays["aux_w"] = _uniform(rng, (c.n_properties, c.z_dim), c.z_dim)
        shapes = cls.expected_shapes(config)
        arrays["head_w"] = _uniform(rng, shapes["head_w"], c.head_input_dim)
        return cls(arrays)

    def bind(self, graph):
        return {name: graph.parameter(arr, name) for name, arr in self.arrays.items()}

    def copy(self):
        return ModelParams({k: v.copy() for k, v in self.arrays.items()})

    def __getitem__(self, name):
        return self.arrays[name]

    def __eq__(self, other):
        return isinstance(other, ModelParams) and all(
            np.array_equal(self.arrays[k], other.arrays[k]) for k in self.arrays
        ) and self.arrays.keys() == other.arrays.keys()


def _marker_row(tag, config):
    if tag == TAG_ARGUMENT:
        return MARKER_OTHER if config.no_argument_marker else MARKER_ARGUMENT
    if tag == TAG_PREDICATE:
        return MARKER_OTHER if config.no_predicate_marker else MARKER_PREDICATE
    if tag == TAG_OTHER:
        return MARKER_OTHER
    return None  # PAD: stays a zero vector


def marker_gate(vectors, tags, marker, config):
    """Multiply each token vector by the marker vector its tag selects.

    vectors: Tensor (T, D); tags: int array (T,); marker: Tensor (3, marker_width).
    PAD rows stay zero. Under no_markers the input passes through untouched.
    """
    if len(tags) != vectors.shape[0]:
        raise ad.ShapeError(f"{len(tags)} tags for {vectors.shape[0]} vector rows")
    if config.no_markers:
        return vectors
    g = vectors.graph
    t_len = len(tags)
    onehot = np.zeros((t_len, 3), dtype=np.float32)
    for t, tag in enumerate(tags):
        row = _marker_row(tag, config)
        if row is not None:
            onehot[t, row] = 1.0
    selected = ad.matmul(g.constant(onehot), marker)  # (T, marker_width)
    d = vectors.shape[1]
    if config.marker_width < d:
        ones = g.constant(np.ones((t_len, d - config.marker_width), dtype=np.float32))
        gate = ad.concat([selected, ones], axis=1)
    else:
        gate = selected
    return ad.elementwise_mul(vectors, gate)


def encode(gated, params_t):
    """Bidirectional recurrent read: (T, D) -> hidden states (T, 2H)."""
    return ad.bilstm(
        gated,
        params_t["lstm_fw_w"],
        params_t["lstm_fw_u"],
        params_t["lstm_fw_b"],
        params_t["lstm_bw_w"],
        params_t["lstm_bw_u"],
        params_t["lstm_bw_b"],
    )


def self_attend(states, params_t):
    """Pairwise attention: every hidden state attends to every other one."""
    return ad.pairwise_attention(
        states,
        params_t["attn_q"],
        params_t["attn_k"],
        params_t["attn_beta"],
        params_t["attn_v"],
        params_t["attn_alpha"],
    )


def heads(z_seq, params_t, config):
    """Hierarchical output stack on the concatenated attended states.

    Returns (aux, out): aux is the (|P|,) intermediate Likert estimate
    (None under no_hierarchy); out is (|P|, 2) probability rows in multilabel
    mode or a (|P|,) nonnegative vector in regression mode.
    """
    p = config.n_properties
    z = ad.reshape(z_seq, (config.z_dim,))
    if config.no_hierarchy:
        aux = None
        head_in = z
    else:
        aux = ad.relu(ad.matmul(params_t["aux_w"], z))
        head_in = ad.concat([aux, z], axis=0)
    if config.mode == "multilabel":
        flat = ad.reshape(params_t["head_w"], (2 * p, config.head_input_dim))
        logits = ad.reshape(ad.matmul(flat, head_in), (p, 2))
        out = ad.softmax(logits, axis=1)
    else:
        out = ad.relu(ad.matmul(params_t["head_w"], head_in))
    return aux, out


def build_forward(prepared, params_t, config, graph):
    """Wire the full network on an existing graph; returns (aux, out) tensors."""
    if prepared.vectors.shape != (config.max_len, config.input_dim):
        raise ad.ShapeError(
            f"example {prepared.id!r}: vectors {prepared.vectors.shape} do not match "
            f"config ({config.max_len}, {config.input_dim})"
        )
    vectors = graph.constant(prepared.vectors)
    gated = marker_gate(vectors, prepared.tags, params_t["marker"], config)
    states = encode(gated, params_t)
    z_seq = states if config.no_self_attention else self_attend(states, params_t)
    return heads(z_seq, params_t, config)


@dataclass
class PredictionSet:
    """Per-example, per-property model outputs."""

    example_id: str
    mode: str
    probs: np.ndarray = None  # (|P|, 2) in multilabel mode
    scores: np.ndarray = None  # (|P|,) in regression mode
    aux: np.ndarray = None  # (|P|,) intermediate Likert estimates

    def labels(self):
        """Binary decisions; a 0.5/0.5 tie resolves to negative."""
        if self.mode != "multilabel":
            raise ValueError("labels are only defined in multilabel mode")
        return self.probs[:, 1] > self.probs[:, 0]


def forward(prepared, params, config):
    """Run the network on one prepared example; pure in (example, params)."""
    graph = ad.Graph()
    aux, out = build_forward(prepared, params.bind(graph), config, graph)
    aux_data = None if aux is None else aux.data.copy()
    if config.mode == "multilabel":
        return PredictionSet(prepared.id, config.mode, probs=out.data.copy(), aux=aux_data)
    return PredictionSet(prepared.id, config.mode, scores=out.data.copy(), aux=aux_data)


def save_checkpoint(path, params, config, inventory):
    """Write a text manifest plus named float32 little-endian arrays.

    Layout: magic "SPRLCKP1", uint32 little-endian header length, a UTF-8
    JSON header {"config", "inventory", "params": [{"name", "shape"}...]},
    then each array's raw values in header order.
    """
    if len(inventory) != config.n_properties:
        raise CheckpointError(
            f"inventory has {len(inventory)} properties, config says {config.n_properties}"
        )
    names = list(ModelParams.expected_shapes(config))
    header = {
        "config": asdict(config),
        "inventory": list(inventory.names),
        "params": [{"name": n, "shape": list(params[n].shape)} for n in names],
    }
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_CKPT_MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for n in names:
            fh.write(np.ascontiguousarray(params[n], dtype="<f4").tobytes())


def load_checkpoint(path):
    """Read a checkpoint; returns (params, config, inventory_names).

    Rejects any mismatch between the manifest and the config-implied shapes,
    the inventory size, or the payload length.
    """
    from .dataset import PropertyInventory

    try:
        raw = open(path, "rb").read()
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint from {path}: {exc}") from exc
    if raw[: len(_CKPT_MAGIC)] != _CKPT_MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint file (bad magic)")
    off = len(_CKPT_MAGIC)
    (hlen,) = struct.unpack_from("<I", raw, off)
    off += 4
    try:
        header = json.loads(raw[off : off + hlen].decode("utf-8"))
        config = ModelConfig(**header["config"])
        inventory = PropertyInventory(tuple(header["inventory"]))
        entries = [(e["name"], tuple(e["shape"])) for e in header["params"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise CheckpointError(f"{path}: malformed header ({exc})") from exc
    off += hlen
    expected = ModelParams.expected_shapes(config)
    if [n for n, _ in entries] != list(expected):
        raise CheckpointError(f"{path}: parameter names do not match the config")
    if len(inventory) != config.n_properties:
        raise CheckpointError(
            f"{path}: inventory has {len(inventory)} properties, config says {config.n_properties}"
        )
    arrays = {}
    for name, shape in entries:
        if shape != expected[name]:
            raise CheckpointError(
                f"{path}: parameter {name!r} has shape {shape}, expected {expected[name]}"
            )
        count = int(np.prod(shape))
        nbytes = count * 4
        if off + nbytes > len(raw):
            raise CheckpointError(f"{path}: truncated payload at parameter {name!r}")
        arrays[name] = np.frombuffer(raw, dtype="<f4", count=count, offset=off).reshape(shape).copy()
        off += nbytes
    if off != len(raw):
        raise CheckpointError(f"{path}: {len(raw) - off} trailing bytes after parameters")
    return ModelParams(arrays), config, inventory
