"""Pretrained word vectors, optional precomputed contextual vectors, and the
learnable three-way marker table.

Word vectors are frozen after load; only the marker table trains. Contextual
vectors are consumed from a file produced elsewhere — this package never runs
a language model.
"""

import hashlib
import struct

import numpy as np

MARKER_ARGUMENT = 0
MARKER_PREDICATE = 1
MARKER_OTHER = 2

MARKER_INIT_RANGE = 0.05

_CTX_MAGIC = b"SPRLCTX1"


class EmbeddingError(ValueError):
    """Bad embedding or contextual-vector input."""


class EmbeddingTable:
    """token -> float32 vector map with a fixed dimension and an OOV policy.

    Immutable after load; safe for concurrent readers. `oov_policy` is "zero"
    (default) or "random" (deterministic per (seed, token)).
    """

    def __init__(self, dim, vectors, oov_policy="zero", oov_seed=0):
        if oov_policy not in ("zero", "random"):
            raise EmbeddingError(f"unknown OOV policy {oov_policy!r}")
        self.dim = dim
        self.vectors = vectors
        self.oov_policy = oov_policy
        self.oov_seed = oov_seed

    def __contains__(self, token):
        return token in self.vectors

    def __len__(self):
        return len(self.vectors)

    def lookup(self, token):
        vec = self.vectors.get(token)
        if vec is not None:
            return vec
        if self.oov_policy == "zero":
            return np.zeros(self.dim, dtype=np.float32)
        return _oov_random(token, self.oov_seed, self.dim)


def _oov_random(token, seed, dim):
    # stable across processes: python's hash() is salted, blake2b is not
    digest = hashlib.blake2b(f"{seed}:{token}".encode("utf-8"), digest_size=8).digest()
    rng = np.random.default_rng(int.from_bytes(digest, "little"))
    return rng.uniform(-MARKER_INIT_RANGE, MARKER_INIT_RANGE, size=dim).astype(np.float32)


def load_word_vectors(path, expected_dim=None, oov_policy="zero", oov_seed=0):
    """Parse a text embedding file: one `token v_1 ... v_d` line per entry.

    Duplicate tokens keep their first occurrence. When expected_dim is None
    the first line fixes the dimension; every line must then match it.
    """
    vectors = {}
    try:
        fh = open(path, "r", encoding="utf-8")
    except OSError as exc:
        raise EmbeddingError(f"cannot read word vectors from {path}: {exc}") from exc
    with fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            token, values = parts[0], parts[1:]
            if expected_dim is None:
                expected_dim = len(values)
                if expected_dim == 0:
                    raise EmbeddingError(f"{path}:{lineno}: no vector values on first line")
            if len(values) != expected_dim:
                raise EmbeddingError(
                    f"{path}:{lineno}: expected {expected_dim} values, found {len(values)}"
                )
            if token in vectors:
                continue
            try:
                vectors[token] = np.array(values, dtype=np.float32)
            except ValueError as exc:
                raise EmbeddingError(f"{path}:{lineno}: non-numeric value ({exc})") from exc
    if expected_dim is None:
        raise EmbeddingError(f"{path}: file contains no vectors")
    return EmbeddingTable(expected_dim, vectors, oov_policy=oov_policy, oov_seed=oov_seed)


def lookup_sequence(tokens, table):
    """Map tokens to a (len(tokens), dim) float32 array; OOV per table policy."""
    out = np.zeros((len(tokens), table.dim), dtype=np.float32)
    for i, token in enumerate(tokens):
        out[i] = table.lookup(token)
    return out


def init_marker_table(dim, rng):
    """Three marker vectors (argument, predicate, other) from U(-0.05, 0.05)."""
    return rng.uniform(-MARKER_INIT_RANGE, MARKER_INIT_RANGE, size=(3, dim)).astype(np.float32)


class ContextualVectorFile:
    """Per-example, per-token float32 vectors keyed by example id."""

    def __init__(self, dim, records):
        self.dim = dim
        self.records = records  # id -> (n_tokens, dim) float32

    def __contains__(self, example_id):
        return example_id in self.records


def write_contextual(path, dim, records):
    """Write the binary container; see read_contextual for the layout."""
    with open(path, "wb") as fh:
        fh.write(_CTX_MAGIC)
        fh.write(struct.pack("<II", dim, len(records)))
        for example_id, arr in records.items():
            arr = np.ascontiguousarray(arr, dtype="<f4")
            if arr.ndim != 2 or arr.shape[1] != dim:
                raise EmbeddingError(
                    f"contextual record {example_id!r}: shape {arr.shape} does not match dim {dim}"
                )
            ident = example_id.encode("utf-8")
            fh.write(struct.pack("<I", len(ident)))
            fh.write(ident)
            fh.write(struct.pack("<I", arr.shape[0]))
            fh.write(arr.tobytes())


def read_contextual(path):
    """Read the binary container written by write_contextual.

    Layout: magic "SPRLCTX1", then uint32 dim, uint32 record count; each
    record is uint32 id length, the UTF-8 id, uint32 token count, then
    token_count*dim little-endian float32 values. All integers little-endian.
    """
    try:
        raw = open(path, "rb").read()
    except OSError as exc:
        raise EmbeddingError(f"cannot read contextual vectors from {path}: {exc}") from exc
    if raw[: len(_CTX_MAGIC)] != _CTX_MAGIC:
        raise EmbeddingError(f"{path}: not a contextual-vector file (bad magic)")
    off = len(_CTX_MAGIC)

    def take(fmt):
        nonlocal off
        size = struct.calcsize(fmt)
        if off + size > len(raw):
            raise EmbeddingError(f"{path}: truncated file")
        vals = struct.unpack_from(fmt, raw, off)
        off += size
        return vals

    dim, count = take("<II")
    records = {}
    for _ in range(count):
        (id_len,) = take("<I")
        ident = raw[off : off + id_len].decode("utf-8")
        off += id_len
        (n_tokens,) = take("<I")
        nbytes = n_tokens * dim * 4
        if off + nbytes > len(raw):
            raise EmbeddingError(f"{path}: truncated record {ident!r}")
        arr = np.frombuffer(raw, dtype="<f4", count=n_tokens * dim, offset=off)
        records[ident] = arr.reshape(n_tokens, dim).copy()
        off += nbytes
    return ContextualVectorFile(dim, records)


def attach_contextual(examples, base_vectors, ctx):
    """Concatenate contextual vectors onto each example's token vectors.

    base_vectors maps example id -> (n_tokens, d); the result maps to
    (n_tokens, d + ctx.dim). Every example must be present in ctx with a
    matching token count.
    """
    out = {}
    for ex in examples:
        rec = ctx.records.get(ex.id)
        if rec is None:
            raise EmbeddingError(f"contextual vectors missing for example {ex.id!r}")
        base = base_vectors[ex.id]
        if rec.shape[0] != len(ex.tokens):
            raise EmbeddingError(
                f"contextual vectors for example {ex.id!r} cover {rec.shape[0]} tokens, "
                f"example has {len(ex.tokens)}"
            )
        out[ex.id] = np.concatenate([base, rec], axis=1).astype(np.float32)
    return out
