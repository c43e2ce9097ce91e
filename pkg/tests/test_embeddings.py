import numpy as np
import pytest

from sprl import embeddings as emb
from sprl.dataset import SprExample


def _write(path, lines):
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def test_load_stores_vector_under_token(tmp_path):
    vec = " ".join(str(0.1 * i) for i in range(300))
    table = emb.load_word_vectors(_write(tmp_path / "v.txt", [f"the {vec}"]), 300)
    assert len(table) == 1
    assert table.vectors["the"].shape == (300,)
    assert table.vectors["the"][1] == pytest.approx(0.1)


def test_load_rejects_wrong_width_naming_line(tmp_path):
    good = "a " + " ".join(["0.0"] * 300)
    bad = "b " + " ".join(["0.0"] * 299)
    path = _write(tmp_path / "v.txt", [good, bad])
    with pytest.raises(emb.EmbeddingError, match=r"v\.txt:2"):
        emb.load_word_vectors(path, 300)


def test_duplicate_token_keeps_first_vector(tmp_path):
    path = _write(tmp_path / "v.txt", ["a 1.0 2.0", "a 3.0 4.0"])
    table = emb.load_word_vectors(path, 2)
    assert np.array_equal(table.vectors["a"], [1.0, 2.0])


def test_load_infers_dimension_from_first_line(tmp_path):
    path = _write(tmp_path / "v.txt", ["a 1.0 2.0 3.0", "b 4.0 5.0 6.0"])
    assert emb.load_word_vectors(path).dim == 3


def test_load_missing_file_names_path(tmp_path):
    with pytest.raises(emb.EmbeddingError, match="nope.txt"):
        emb.load_word_vectors(tmp_path / "nope.txt", 3)


def test_lookup_known_tokens_in_order(tmp_path):
    path = _write(tmp_path / "v.txt", ["a 1.0 0.0", "b 0.0 1.0"])
    table = emb.load_word_vectors(path, 2)
    out = emb.lookup_sequence(["b", "a", "b"], table)
    assert np.array_equal(out, [[0.0, 1.0], [1.0, 0.0], [0.0, 1.0]])


def test_lookup_oov_zero_policy(tmp_path):
    table = emb.load_word_vectors(_write(tmp_path / "v.txt", ["a 1.0 0.0"]), 2)
    assert np.array_equal(emb.lookup_sequence(["missing"], table)[0], [0.0, 0.0])


def test_lookup_oov_random_policy_is_deterministic(tmp_path):
    path = _write(tmp_path / "v.txt", ["a 1.0 0.0"])
    t1 = emb.load_word_vectors(path, 2, oov_policy="random", oov_seed=9)
    t2 = emb.load_word_vectors(path, 2, oov_policy="random", oov_seed=9)
    first = emb.lookup_sequence(["zzz"], t1)[0]
    again = emb.lookup_sequence(["zzz"], t2)[0]
    assert np.array_equal(first, again)
    assert not np.array_equal(first, np.zeros(2))
    other_seed = emb.EmbeddingTable(2, t1.vectors, oov_policy="random", oov_seed=10)
    assert not np.array_equal(emb.lookup_sequence(["zzz"], other_seed)[0], first)


def test_marker_init_range():
    table = emb.init_marker_table(64, np.random.default_rng(0))
    assert table.shape == (3, 64)
    assert table.dtype == np.float32
    assert (table >= -0.05).all() and (table <= 0.05).all()


def _examples():
    ann = {"p": (5,)}
    return [
        SprExample("e1", "train", ["a", "b"], (0,), (1, 1), ann),
        SprExample("e2", "train", ["c", "d", "e"], (1,), (2, 2), ann),
    ]


def test_attach_contextual_concatenates(tmp_path):
    examples = _examples()
    base = {ex.id: np.ones((len(ex.tokens), 3), dtype=np.float32) for ex in examples}
    records = {
        "e1": np.full((2, 4), 2.0, dtype=np.float32),
        "e2": np.full((3, 4), 3.0, dtype=np.float32),
    }
    path = tmp_path / "ctx.bin"
    emb.write_contextual(path, 4, records)
    ctx = emb.read_contextual(path)
    out = emb.attach_contextual(examples, base, ctx)
    assert out["e1"].shape == (2, 7)
    assert np.array_equal(out["e1"][0], [1, 1, 1, 2, 2, 2, 2])


def test_attach_contextual_missing_example_names_id(tmp_path):
    examples = _examples()
    base = {ex.id: np.ones((len(ex.tokens), 3), dtype=np.float32) for ex in examples}
    path = tmp_path / "ctx.bin"
    emb.write_contextual(path, 4, {"e1": np.zeros((2, 4), dtype=np.float32)})
    with pytest.raises(emb.EmbeddingError, match="e2"):
        emb.attach_contextual(examples, base, emb.read_contextual(path))


def test_attach_contextual_token_count_mismatch_names_id(tmp_path):
    examples = _examples()
    base = {ex.id: np.ones((len(ex.tokens), 3), dtype=np.float32) for ex in examples}
    path = tmp_path / "ctx.bin"
    emb.write_contextual(
        path,
        4,
        {"e1": np.zeros((2, 4), dtype=np.float32), "e2": np.zeros((5, 4), dtype=np.float32)},
    )
    with pytest.raises(emb.EmbeddingError, match="e2"):
        emb.attach_contextual(examples, base, emb.read_contextual(path))


def test_attach_contextual_zero_width_is_identity(tmp_path):
    examples = _examples()
    base = {
        ex.id: np.arange(len(ex.tokens) * 3, dtype=np.float32).reshape(len(ex.tokens), 3)
        for ex in examples
    }
    path = tmp_path / "ctx.bin"
    emb.write_contextual(
        path, 0, {ex.id: np.zeros((len(ex.tokens), 0), dtype=np.float32) for ex in examples}
    )
    out = emb.attach_contextual(examples, base, emb.read_contextual(path))
    for ex in examples:
        assert np.array_equal(out[ex.id], base[ex.id])


def test_contextual_round_trip_preserves_values(tmp_path):
    rng = np.random.default_rng(4)
    records = {f"ex{i}": rng.normal(size=(i + 1, 6)).astype(np.float32) for i in range(3)}
    path = tmp_path / "ctx.bin"
    emb.write_contextual(path, 6, records)
    back = emb.read_contextual(path)
    assert back.dim == 6
    for k, arr in records.items():
        assert np.array_equal(back.records[k], arr)


def test_read_contextual_rejects_bad_magic(tmp_path):
    path = tmp_path / "ctx.bin"
    path.write_bytes(b"NOTMAGIC" + b"\0" * 16)
    with pytest.raises(emb.EmbeddingError, match="magic"):
        emb.read_contextual(path)
