import json

import numpy as np
import pytest

from sprl import dataset as ds

INV = ds.PropertyInventory(("p1", "p2"))
ONE = ds.PropertyInventory(("p",))


def _record(**overrides):
    base = {
        "id": "r1",
        "split": "train",
        "tokens": ["a", "b", "c"],
        "predicate": [1],
        "argument": [2, 2],
        "annotations": {"p1": ["NA"], "p2": ["NA"]},
    }
    base.update(overrides)
    return base


def _write(tmp_path, records, name="data.jsonl"):
    path = tmp_path / name
    path.write_text("".join(json.dumps(r) + "\n" for r in records), encoding="utf-8")
    return path


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------


def test_parse_minimal_record(tmp_path):
    examples = ds.parse_dataset(_write(tmp_path, [_record()]), INV)
    assert len(examples) == 1
    ex = examples[0]
    assert ex.tokens == ["a", "b", "c"]
    assert ex.predicate_indices == (1,)
    assert ex.argument_indices == (2,)
    assert ex.annotations["p1"] == (None,)


def test_parse_rejects_out_of_range_argument(tmp_path):
    path = _write(tmp_path, [_record(id="bad", tokens=["a"] * 5, argument=[9, 9])])
    with pytest.raises(ds.DatasetError, match="bad"):
        ds.parse_dataset(path, INV)


def test_parse_rejects_unknown_property(tmp_path):
    path = _write(tmp_path, [_record(annotations={"p1": [1], "p2": [1], "mystery": [1]})])
    with pytest.raises(ds.DatasetError, match="mystery"):
        ds.parse_dataset(path, INV)


def test_parse_rejects_missing_property(tmp_path):
    path = _write(tmp_path, [_record(annotations={"p1": [1]})])
    with pytest.raises(ds.DatasetError, match="p2"):
        ds.parse_dataset(path, INV)


def test_parse_rejects_bad_split(tmp_path):
    path = _write(tmp_path, [_record(split="validation")])
    with pytest.raises(ds.DatasetError, match="split"):
        ds.parse_dataset(path, INV)


def test_parse_rejects_out_of_scale_response(tmp_path):
    path = _write(tmp_path, [_record(annotations={"p1": [6], "p2": [1]})])
    with pytest.raises(ds.DatasetError, match="p1"):
        ds.parse_dataset(path, INV)


def test_parse_warns_on_predicate_argument_overlap(tmp_path, caplog):
    path = _write(tmp_path, [_record(predicate=[2], argument=[1, 2])])
    with caplog.at_level("WARNING"):
        ds.parse_dataset(path, INV)
    assert any("overlap" in r.message for r in caplog.records)


def test_round_trip_parse_serialize_parse(tmp_path):
    records = [
        _record(id="a", annotations={"p1": [4, "NA"], "p2": [2, 3]}),
        _record(id="b", split="test", tokens=list("abcdef"), predicate=[0, 5], argument=[2, 4]),
    ]
    first = ds.parse_dataset(_write(tmp_path, records), INV)
    ds.serialize_dataset(first, tmp_path / "copy.jsonl")
    second = ds.parse_dataset(tmp_path / "copy.jsonl", INV)
    assert first == second


# ---------------------------------------------------------------------------
# label transforms
# ---------------------------------------------------------------------------


@pytest.mark.parametrize(
    "response,expected",
    [(None, False), (1, False), (2, False), (3, False), (4, True), (5, True)],
)
def test_single_response_collapse_truth_table(response, expected):
    assert ds.collapse_to_label((response,)) is expected


def test_doubly_annotated_collapse_averages():
    assert ds.collapse_to_label((4, 5)) is True  # mean 4.5
    assert ds.collapse_to_label((3, 4)) is False  # mean 3.5


@pytest.mark.parametrize("response,expected", [(None, 1.0), (5, 5.0), (2, 2.0)])
def test_single_response_likert_target(response, expected):
    assert ds.likert_target((response,)) == expected


def test_doubly_annotated_likert_averages_with_na_as_one():
    assert ds.likert_target((None, 5)) == 3.0


def test_to_multilabel_alignment():
    ann = {"p1": (5,), "p2": (1,)}
    assert np.array_equal(ds.to_multilabel(ann, INV), [True, False])


def test_label_and_likert_transforms_are_consistent():
    # binary target is + exactly when the regression target reaches 4
    rng = np.random.default_rng(0)
    for _ in range(300):
        n = int(rng.integers(1, 3))
        responses = tuple(
            None if rng.random() < 0.2 else int(rng.integers(1, 6)) for _ in range(n)
        )
        assert ds.collapse_to_label(responses) == (ds.likert_target(responses) >= 4.0)


# ---------------------------------------------------------------------------
# clipping and padding
# ---------------------------------------------------------------------------


def test_short_sequence_is_prepadded():
    plan = ds.clip_and_pad(list("abcdefghij"), (2,), (4, 5), max_len=30)
    assert plan.pad == 20
    assert plan.kept == list(range(10))
    assert (plan.tags[:20] == ds.TAG_PAD).all()
    assert plan.tags[22] == ds.TAG_PREDICATE
    assert plan.tags[24] == ds.TAG_ARGUMENT and plan.tags[25] == ds.TAG_ARGUMENT


def test_left_clipping_removes_left_tokens_first():
    tokens = [f"t{i}" for i in range(40)]
    plan = ds.clip_and_pad(tokens, (35,), (36, 38), max_len=30)
    assert plan.pad == 0 or len(plan.kept) == 30
    assert plan.kept == list(range(10, 40))
    assert 35 in plan.kept and all(i in plan.kept for i in (36, 37, 38))


def test_exact_length_is_unchanged():
    tokens = [f"t{i}" for i in range(30)]
    plan = ds.clip_and_pad(tokens, (0,), (29, 29), max_len=30)
    assert plan.pad == 0
    assert plan.kept == list(range(30))


def test_right_clipping_after_left():
    tokens = [f"t{i}" for i in range(40)]
    # core at the very start: only right clipping can help
    plan = ds.clip_and_pad(tokens, (0,), (1, 2), max_len=30)
    assert plan.kept == list(range(30))


def test_fallback_removes_filler_farthest_from_argument():
    # core tokens span the whole sequence: left/right clipping cannot fire
    tokens = [f"t{i}" for i in range(10)]
    plan = ds.clip_and_pad(tokens, (0,), (8, 9), max_len=5)
    assert set(plan.kept) >= {0, 8, 9}
    assert len(plan.kept) == 5
    # fillers nearest the argument span survive
    assert plan.kept == [0, 6, 7, 8, 9]


def test_unsatisfiable_retention_rejected():
    with pytest.raises(ds.DatasetError, match="max_len"):
        ds.clip_and_pad(list("abcdef"), (0, 1, 2), (3, 5), max_len=5)


def test_overlap_tags_argument_wins():
    plan = ds.clip_and_pad(list("abc"), (1,), (1, 2), max_len=3)
    assert plan.tags[1] == ds.TAG_ARGUMENT


@pytest.mark.parametrize("seed", range(40))
def test_clip_keeps_core_order_and_tags(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 80))
    max_len = int(rng.integers(1, 35))
    start = int(rng.integers(0, n))
    end = int(rng.integers(start, n))
    arg = set(range(start, end + 1))
    outside = [i for i in range(n) if i not in arg]
    if outside and rng.random() < 0.9:
        preds = tuple(
            sorted(rng.choice(outside, size=min(len(outside), int(rng.integers(1, 3))), replace=False))
        )
    else:
        preds = (start,)
    core = set(preds) | arg
    tokens = [f"t{i}" for i in range(n)]
    if len(core) > max_len:
        with pytest.raises(ds.DatasetError):
            ds.clip_and_pad(tokens, preds, (start, end), max_len=max_len)
        return
    plan = ds.clip_and_pad(tokens, preds, (start, end), max_len=max_len)
    assert plan.pad + len(plan.kept) == max_len
    assert core <= set(plan.kept)  # every predicate/argument token retained
    assert plan.kept == sorted(plan.kept)  # original order preserved
    assert (plan.tags[: plan.pad] == ds.TAG_PAD).all()
    assert (plan.tags[plan.pad :] != ds.TAG_PAD).all()
    assert (plan.tags == ds.TAG_ARGUMENT).sum() == len(arg)
    if not set(preds) <= arg:
        assert (plan.tags == ds.TAG_PREDICATE).any()


def test_prepare_example_assembles_vectors_and_targets():
    ex = ds.SprExample(
        "e", "train", ["a", "b", "c"], (0,), (2, 2), {"p1": (5,), "p2": (None,)}
    )
    vectors = np.arange(9, dtype=np.float32).reshape(3, 3)
    prep = ds.prepare_example(ex, vectors, INV, max_len=5)
    assert prep.vectors.shape == (5, 3)
    assert np.array_equal(prep.vectors[:2], np.zeros((2, 3)))
    assert np.array_equal(prep.vectors[2:], vectors)
    assert np.array_equal(prep.labels, [True, False])
    assert np.array_equal(prep.likert, [5.0, 1.0])
    assert prep.tags[2] == ds.TAG_PREDICATE
    assert prep.tags[4] == ds.TAG_ARGUMENT
