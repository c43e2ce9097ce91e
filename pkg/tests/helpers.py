"""Shared builders for synthetic corpora and tiny embedding files.

The synthetic task is constructed so the gold label is a pure function of the
marked spans: "arg_before_pred" is + iff the whole argument span precedes the
predicate. A model that cannot see the markers cannot separate the paired
examples, which reuse identical token sequences with different spans.
"""

import json

import numpy as np

import sprl.autodiff as ad
import sprl.model as M
from sprl.dataset import (
    TAG_ARGUMENT,
    TAG_OTHER,
    TAG_PREDICATE,
    PreparedExample,
    PropertyInventory,
    SprExample,
    prepare_example,
)
from sprl.embeddings import EmbeddingTable, lookup_sequence
from sprl.training import TrainConfig, build_loss

VEC_DIM = 16

SPAN_INVENTORY = PropertyInventory(("arg_before_pred",))

CONV_INVENTORY = PropertyInventory(("arg_before_pred", "long_argument", "arg_touches_pred"))


def toy_table(dim=VEC_DIM, vocab=30, seed=7):
    rng = np.random.default_rng(seed)
    vectors = {
        f"tok{i:02d}": rng.normal(scale=0.5, size=dim).astype(np.float32) for i in range(vocab)
    }
    return EmbeddingTable(dim, vectors)


def _annotate(label):
    return {"arg_before_pred": (5,) if label else (1,)}


def span_corpus(n_pairs=10, length=7, seed=3, split="train"):
    """Paired examples: identical tokens, one span order per label."""
    rng = np.random.default_rng(seed)
    examples = []
    for i in range(n_pairs):
        tokens = [f"tok{rng.integers(0, 30):02d}" for _ in range(length)]
        pred = length // 2
        examples.append(
            SprExample(
                id=f"{split}_pos{i}",
                split=split,
                tokens=tokens,
                predicate_indices=(pred,),
                argument_span=(0, 1),
                annotations=_annotate(True),
            )
        )
        examples.append(
            SprExample(
                id=f"{split}_neg{i}",
                split=split,
                tokens=list(tokens),
                predicate_indices=(pred,),
                argument_span=(length - 2, length - 1),
                annotations=_annotate(False),
            )
        )
    return examples


def convergence_corpus(n, seed=11, split="train", noise=0.1):
    """Span-dependent 3-property corpus with a little label noise."""
    rng = np.random.default_rng(seed)
    examples = []
    for i in range(n):
        length = int(rng.integers(6, 11))
        tokens = [f"tok{rng.integers(0, 30):02d}" for _ in range(length)]
        pred = int(rng.integers(0, length))
        remaining = [t for t in range(length) if t != pred]
        start = int(rng.choice(remaining))
        max_end = start
        while max_end + 1 < length and max_end + 1 != pred and max_end - start < 3:
            if rng.random() < 0.6:
                max_end += 1
            else:
                break
        span = (start, max_end)
        labels = {
            "arg_before_pred": span[1] < pred,
            "long_argument": span[1] - span[0] + 1 >= 2,
            "arg_touches_pred": min(abs(span[0] - pred), abs(span[1] - pred)) == 1,
        }
        annotations = {}
        for prop, value in labels.items():
            if rng.random() < noise:
                value = not value
            annotations[prop] = (5,) if value else (1,)
        examples.append(
            SprExample(
                id=f"c{split}{i}",
                split=split,
                tokens=tokens,
                predicate_indices=(pred,),
                argument_span=span,
                annotations=annotations,
            )
        )
    return examples


def prepare_all(examples, inventory, table=None, max_len=12):
    table = table or toy_table()
    return [
        prepare_example(ex, lookup_sequence(ex.tokens, table), inventory, max_len)
        for ex in examples
    ]


def write_vectors_file(path, table=None):
    table = table or toy_table()
    with open(path, "w", encoding="utf-8") as fh:
        for token, vec in table.vectors.items():
            fh.write(token + " " + " ".join(f"{x:.6f}" for x in vec) + "\n")
    return path


def write_dataset_file(path, examples):
    with open(path, "w", encoding="utf-8") as fh:
        for ex in examples:
            fh.write(
                json.dumps(
                    {
                        "id": ex.id,
                        "split": ex.split,
                        "tokens": ex.tokens,
                        "predicate": list(ex.predicate_indices),
                        "argument": list(ex.argument_span),
                        "annotations": {
                            p: ["NA" if r is None else r for r in rs]
                            for p, rs in ex.annotations.items()
                        },
                    }
                )
                + "\n"
            )
    return path


def write_inventory_file(path, inventory):
    with open(path, "w", encoding="utf-8") as fh:
        for name in inventory.names:
            fh.write(name + "\n")
    return path


# ---------------------------------------------------------------------------
# Gradient-check cases: small random configurations of the full network
# ---------------------------------------------------------------------------


def random_model_point(config, rng, dtype=np.float64, scale=0.5):
    """A well-conditioned random parameter point (the training initializer's
    tiny marker values would leave the whole net near every ReLU kink)."""
    shapes = M.ModelParams.expected_shapes(config)
    return {n: rng.uniform(-scale, scale, size=s).astype(dtype) for n, s in shapes.items()}


def _aux_preactivations(example, point, config, dtype):
    g = ad.Graph(dtype=dtype)
    leaves = {n: g.parameter(a, n) for n, a in point.items()}
    gated = M.marker_gate(g.constant(example.vectors), example.tags, leaves["marker"], config)
    states = M.encode(gated, leaves)
    z = states if config.no_self_attention else M.self_attend(states, leaves)
    return np.asarray(point["aux_w"]) @ z.data.reshape(-1)


def make_grad_case(seed, loss="joint", dtype=np.float64, kink_margin=0.05):
    """One randomized 3-6 token configuration, or None when the point sits too
    close to a ReLU kink for central differences to be meaningful."""
    rng = np.random.default_rng(seed)
    t_len = int(rng.integers(3, 7))
    config = M.ModelConfig(
        mode="multilabel",
        n_properties=2,
        input_dim=5,
        max_len=t_len,
        hidden_units=3,
        attention_units=3,
        seed=seed,
    )
    point = random_model_point(config, rng, dtype=dtype)
    tags = np.full(t_len, TAG_OTHER, dtype=np.int8)
    tags[int(rng.integers(0, t_len))] = TAG_PREDICATE
    arg_pos = int(rng.integers(0, t_len))
    tags[arg_pos] = TAG_ARGUMENT
    if not (tags == TAG_PREDICATE).any():  # argument overwrote the predicate slot
        tags[(arg_pos + 1) % t_len] = TAG_PREDICATE
    example = PreparedExample(
        id=f"gc{seed}",
        vectors=rng.normal(size=(t_len, 5)).astype(np.float32),
        tags=tags,
        labels=rng.random(2) > 0.5,
        likert=rng.uniform(1, 5, 2).astype(np.float32),
    )
    if np.abs(_aux_preactivations(example, point, config, dtype)).min() < kink_margin:
        return None
    train_config = TrainConfig(mode="multilabel", seed=seed)

    def build(leaves):
        graph = next(iter(leaves.values())).graph
        if loss == "joint":
            node, _ = build_loss(example, leaves, config, train_config, graph)
            return node
        aux, out = M.build_forward(example, leaves, config, graph)
        from sprl.training import multilabel_loss_node, squared_error_node

        if loss == "main":
            return multilabel_loss_node(out, example.labels, train_config.lambda_main, graph)
        return squared_error_node(aux, example.likert, train_config.lambda_aux, graph)

    return build, point


def grad_cases(n, loss="joint", dtype=np.float64, start_seed=0):
    """The first n kink-safe cases from a deterministic seed sequence."""
    cases = []
    seed = start_seed
    while len(cases) < n:
        case = make_grad_case(seed, loss=loss, dtype=dtype)
        seed += 1
        if case is not None:
            cases.append(case)
    return cases
