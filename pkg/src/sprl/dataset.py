"""Proto-role dataset parsing, label transforms, and sequence clipping/padding.

Records are JSON objects, one per line:

    {"id": "ex1", "split": "train", "tokens": ["He", "opened", "it"],
     "predicate": [1], "argument": [2, 2],
     "annotations": {"volitional": [4], "sentient": ["NA", 5]}}

`argument` is an inclusive [start, end] span. Each property carries one
response (singly annotated data) or two (doubly annotated). A response is an
integer 1..5 or the literal "NA".
"""

import json
import logging
from dataclasses import dataclass

import numpy as np

log = logging.getLogger(__name__)

SPLITS = ("train", "dev", "test")

TAG_PAD = 0
TAG_ARGUMENT = 1
TAG_PREDICATE = 2
TAG_OTHER = 3

SPR1_PROPERTIES = (
    "awareness",
    "chg_location",
    "chg_state",
    "chg_possession",
    "created",
    "destroyed",
    "existed_after",
    "existed_before",
    "existed_during",
    "exists_as_physical",
    "instigated",
    "location",
    "makes_physical_contact",
    "manipulated",
    "pred_changed_arg",
    "sentient",
    "stationary",
    "volitional",
)

SPR2_PROPERTIES = (
    "awareness",
    "chg_location",
    "chg_possession",
    "chg_state",
    "chg_state_continuous",
    "existed_after",
    "existed_before",
    "existed_during",
    "instigated",
    "partitive",
    "sentient",
    "volitional",
    "was_for_benefit",
    "was_used",
)


class DatasetError(ValueError):
    """A record violates the dataset schema or its invariants."""


@dataclass(frozen=True)
class PropertyInventory:
    """Ordered property names; the order is positional for the output heads."""

    names: tuple

    def __post_init__(self):
        if not self.names:
            raise DatasetError("property inventory is empty")
        if len(set(self.names)) != len(self.names):
            raise DatasetError("property inventory contains duplicate names")

    def __len__(self):
        return len(self.names)

    def __iter__(self):
        return iter(self.names)

    @classmethod
    def builtin(cls, name):
        if name == "spr1":
            return cls(SPR1_PROPERTIES)
        if name == "spr2":
            return cls(SPR2_PROPERTIES)
        raise DatasetError(f"unknown builtin inventory {name!r}")


@dataclass
class SprExample:
    """One (sentence, predicate, argument, annotations) tuple."""

    id: str
    split: str
    tokens: list
    predicate_indices: tuple
    argument_span: tuple  # (start, end), inclusive
    annotations: dict  # property name -> tuple of responses (int 1..5 or None for NA)

    @property
    def argument_indices(self):
        start, end = self.argument_span
        return tuple(range(start, end + 1))


def _validate_example(ex, inventory):
    n = len(ex.tokens)
    if n == 0:
        raise DatasetError(f"record {ex.id!r}: empty token sequence")
    if ex.split not in SPLITS:
        raise DatasetError(f"record {ex.id!r}: split must be one of {SPLITS}, got {ex.split!r}")
    if not ex.predicate_indices:
        raise DatasetError(f"record {ex.id!r}: empty predicate index set")
    for i in ex.predicate_indices:
        if not 0 <= i < n:
            raise DatasetError(f"record {ex.id!r}: predicate index {i} outside 0..{n - 1}")
    start, end = ex.argument_span
    if not (0 <= start <= end < n):
        raise DatasetError(f"record {ex.id!r}: argument span [{start}, {end}] outside 0..{n - 1}")
    overlap = set(ex.predicate_indices) & set(ex.argument_indices)
    if overlap:
        log.warning("record %r: predicate and argument overlap at %s", ex.id, sorted(overlap))
    for prop in inventory:
        responses = ex.annotations.get(prop)
        if not responses:
            raise DatasetError(f"record {ex.id!r}: no response for property {prop!r}")
        if len(responses) > 2:
            raise DatasetError(f"record {ex.id!r}: property {prop!r} has {len(responses)} responses")
        for r in responses:
            if r is not None and (not isinstance(r, int) or not 1 <= r <= 5):
                raise DatasetError(f"record {ex.id!r}: bad response {r!r} for {prop!r}")
    for prop in ex.annotations:
        if prop not in inventory.names:
            raise DatasetError(f"record {ex.id!r}: unknown property {prop!r}")


def _parse_record(obj, inventory, where):
    try:
        ident = obj["id"]
        split = obj["split"]
        tokens = list(obj["tokens"])
        predicate = tuple(sorted(set(obj["predicate"])))
        argument = tuple(obj["argument"])
    except (KeyError, TypeError) as exc:
        raise DatasetError(f"{where}: missing or malformed field ({exc})") from exc
    if len(argument) != 2:
        raise DatasetError(f"record {ident!r}: argument span must be [start, end]")
    annotations = {}
    for prop, responses in obj.get("annotations", {}).items():
        parsed = []
        for r in responses:
            if r == "NA":
                parsed.append(None)
            elif isinstance(r, int) and not isinstance(r, bool):
                parsed.append(r)
            else:
                raise DatasetError(f"record {ident!r}: bad response {r!r} for {prop!r}")
        annotations[prop] = tuple(parsed)
    ex = SprExample(
        id=ident,
        split=split,
        tokens=tokens,
        predicate_indices=predicate,
        argument_span=(int(argument[0]), int(argument[1])),
        annotations=annotations,
    )
    _validate_example(ex, inventory)
    return ex


def parse_dataset(path, inventory):
    """Read and validate a JSONL dataset; returns a list of SprExample."""
    examples = []
    seen = set()
    try:
        fh = open(path, "r", encoding="utf-8")
    except OSError as exc:
        raise DatasetError(f"cannot read dataset from {path}: {exc}") from exc
    with fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetError(f"{path}:{lineno}: invalid JSON ({exc})") from exc
            ex = _parse_record(obj, inventory, f"{path}:{lineno}")
            if ex.id in seen:
                raise DatasetError(f"{path}:{lineno}: duplicate example id {ex.id!r}")
            seen.add(ex.id)
            examples.append(ex)
    return examples


def serialize_dataset(examples, path):
    """Inverse of parse_dataset (used for round-trip checks and converters)."""
    with open(path, "w", encoding="utf-8") as fh:
        for ex in examples:
            obj = {
                "id": ex.id,
                "split": ex.split,
                "tokens": list(ex.tokens),
                "predicate": list(ex.predicate_indices),
                "argument": list(ex.argument_span),
                "annotations": {
                    prop: ["NA" if r is None else r for r in responses]
                    for prop, responses in ex.annotations.items()
                },
            }
            fh.write(json.dumps(obj, sort_keys=True) + "\n")


def likert_target(responses):
    """Regression target in [1, 5]: NA maps to 1, multiple responses average."""
    mapped = [1.0 if r is None else float(r) for r in responses]
    return sum(mapped) / len(mapped)


def collapse_to_label(responses):
    """Binary label: averaged response (NA as 1) >= 4 means the property applies."""
    return likert_target(responses) >= 4.0


def to_multilabel(annotations, inventory):
    """Per-property {+,-} targets as a bool array aligned with the inventory."""
    return np.array([collapse_to_label(annotations[p]) for p in inventory], dtype=bool)


def to_regression_target(annotations, inventory):
    """Per-property Likert targets as a float32 array aligned with the inventory."""
    return np.array([likert_target(annotations[p]) for p in inventory], dtype=np.float32)


@dataclass
class ClipPlan:
    """Which original token indices survive clipping, and the padded tag row."""

    kept: list  # original indices, in order, len <= max_len
    pad: int  # number of leading PAD positions
    tags: np.ndarray  # (max_len,) int8 of TAG_* values


def clip_and_pad(tokens, predicate_indices, argument_span, max_len=30):
    """Clip to max_len keeping every predicate/argument token, then pre-pad.

    Clipping removes tokens left of the predicate/argument block first, then
    tokens right of it; if the sequence is still too long, remaining filler
    tokens go, farthest from the argument span first (ties: rightmost first).
    """
    n = len(tokens)
    start, end = argument_span
    arg = set(range(start, end + 1))
    core = set(predicate_indices) | arg
    if len(core) > max_len:
        raise DatasetError(
            f"{len(core)} predicate/argument tokens cannot fit in max_len={max_len}"
        )
    lo, hi = min(core), max(core)
    kept = list(range(n))
    while len(kept) > max_len and kept[0] < lo:
        kept.pop(0)
    while len(kept) > max_len and kept[-1] > hi:
        kept.pop()
    if len(kept) > max_len:
        filler = [m for m in kept if m not in core]
        filler.sort(key=lambda m: (-min(abs(m - j) for j in arg), -m))
        drop = set(filler[: len(kept) - max_len])
        kept = [m for m in kept if m not in drop]
    pad = max_len - len(kept)
    tags = np.full(max_len, TAG_PAD, dtype=np.int8)
    for pos, orig in enumerate(kept):
        if orig in arg:
            tags[pad + pos] = TAG_ARGUMENT  # argument wins predicate/argument overlap
        elif orig in core:
            tags[pad + pos] = TAG_PREDICATE
        else:
            tags[pad + pos] = TAG_OTHER
    return ClipPlan(kept=kept, pad=pad, tags=tags)


@dataclass
class PreparedExample:
    """Model-ready example: padded vectors, tag row, and both target kinds."""

    id: str
    vectors: np.ndarray  # (max_len, dim) float32, zero rows on the PAD prefix
    tags: np.ndarray  # (max_len,) int8
    labels: np.ndarray  # (|P|,) bool
    likert: np.ndarray  # (|P|,) float32


def prepare_example(example, token_vectors, inventory, max_len=30):
    """Combine clipping, padding, and both label transforms for one example."""
    if token_vectors.shape[0] != len(example.tokens):
        raise DatasetError(
            f"record {example.id!r}: {token_vectors.shape[0]} vectors for "
            f"{len(example.tokens)} tokens"
        )
    plan = clip_and_pad(example.tokens, example.predicate_indices, example.argument_span, max_len)
    vectors = np.zeros((max_len, token_vectors.shape[1]), dtype=np.float32)
    vectors[plan.pad :] = token_vectors[plan.kept]
    return PreparedExample(
        id=example.id,
        vectors=vectors,
        tags=plan.tags,
        labels=to_multilabel(example.annotations, inventory),
        likert=to_regression_target(example.annotations, inventory),
    )
