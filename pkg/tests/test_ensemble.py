from dataclasses import replace

import numpy as np
import pytest

import sprl.model as M
import sprl.training
from helpers import CONV_INVENTORY, SPAN_INVENTORY, convergence_corpus, prepare_all, span_corpus
from sprl import ensemble as ens


def stacks_from(rows):
    return [np.array(r, dtype=bool).reshape(1, -1) for r in rows]


# ---------------------------------------------------------------------------
# vote / mean
# ---------------------------------------------------------------------------


def test_majority_vote():
    out = ens.vote(stacks_from([[True], [True], [False]]))
    assert out[0, 0]


def test_even_split_resolves_negative():
    out = ens.vote(stacks_from([[True]] * 25 + [[False]] * 25))
    assert not out[0, 0]


def test_unanimity():
    assert ens.vote(stacks_from([[True]] * 7))[0, 0]
    assert not ens.vote(stacks_from([[False]] * 7))[0, 0]


def test_odd_member_count_never_ties():
    rng = np.random.default_rng(0)
    for _ in range(50):
        n = int(rng.integers(1, 12)) * 2 + 1
        votes = rng.random((n, 4, 3)) > 0.5
        positives = votes.sum(axis=0)
        assert not (positives * 2 == n).any()


def test_vote_rejects_mismatched_shapes():
    with pytest.raises(ValueError, match="shapes"):
        ens.vote([np.zeros((2, 3), dtype=bool), np.zeros((2, 4), dtype=bool)])


def test_vote_rejects_empty_member_list():
    with pytest.raises(ValueError, match="no member"):
        ens.vote([])


def test_mean_scores_arithmetic():
    out = ens.mean_scores([np.array([[3.0]]), np.array([[5.0]])])
    assert out[0, 0] == pytest.approx(4.0)


def test_mean_scores_single_member_identity():
    scores = np.array([[1.5, 2.5]])
    assert np.array_equal(ens.mean_scores([scores]), scores)


def test_mean_scores_permutation_invariant():
    rng = np.random.default_rng(1)
    stacks = [rng.uniform(0, 5, size=(3, 2)) for _ in range(5)]
    a = ens.mean_scores(stacks)
    b = ens.mean_scores(stacks[::-1])
    np.testing.assert_allclose(a, b, rtol=0, atol=1e-12)


# ---------------------------------------------------------------------------
# training orchestration
# ---------------------------------------------------------------------------


def _tiny_training_setup():
    prepared = prepare_all(span_corpus(n_pairs=3, length=6, seed=0), SPAN_INVENTORY, max_len=8)
    config = M.ModelConfig(
        mode="multilabel", n_properties=1, input_dim=16, max_len=8,
        hidden_units=4, attention_units=4, seed=0,
    )
    tcfg = sprl.training.TrainConfig(
        mode="multilabel", batch_size=4, max_epochs=2, patience=2, seed=0
    )
    return prepared, config, tcfg


def test_duplicate_seeds_rejected():
    prepared, config, tcfg = _tiny_training_setup()
    with pytest.raises(ValueError, match="distinct"):
        ens.train_ensemble(tcfg, config, prepared, prepared, seeds=[3, 3, 4])


def test_empty_seed_list_rejected():
    prepared, config, tcfg = _tiny_training_setup()
    with pytest.raises(ValueError, match="at least one"):
        ens.train_ensemble(tcfg, config, prepared, prepared, seeds=[])


def test_single_member_ensemble_equals_its_member():
    prepared, config, tcfg = _tiny_training_setup()
    members = ens.train_ensemble(tcfg, config, prepared, prepared, seeds=[5])
    solo_params, _ = sprl.training.train(
        replace(tcfg, seed=5), replace(config, seed=5), prepared, prepared
    )
    stack = ens.member_labels(members[0].params, config, prepared)
    assert np.array_equal(ens.vote([stack]), stack)
    for name in solo_params.arrays:
        assert np.array_equal(members[0].params[name], solo_params[name])


def test_member_failure_names_the_seed(monkeypatch):
    prepared, config, tcfg = _tiny_training_setup()
    real_train = sprl.training.train

    def flaky(tc, mc, train_set, dev_set):
        if tc.seed == 8:
            raise sprl.training.TrainingError("boom")
        return real_train(tc, mc, train_set, dev_set)

    monkeypatch.setattr(sprl.training, "train", flaky)
    with pytest.raises(sprl.training.TrainingError, match="seed 8"):
        ens.train_ensemble(tcfg, config, prepared, prepared, seeds=[7, 8])


def test_undertrained_members_differ_pairwise():
    train_examples = convergence_corpus(120, seed=21, split="train", noise=0.2)
    eval_examples = convergence_corpus(60, seed=22, split="test", noise=0.2)
    ptrain = prepare_all(train_examples, CONV_INVENTORY)
    peval = prepare_all(eval_examples, CONV_INVENTORY)
    config = M.ModelConfig(
        mode="multilabel", n_properties=3, input_dim=16, max_len=12,
        hidden_units=8, attention_units=6, seed=0,
    )
    tcfg = sprl.training.TrainConfig(
        mode="multilabel", batch_size=16, max_epochs=1, patience=1, seed=0
    )
    members = ens.train_ensemble(tcfg, config, ptrain, ptrain[:20], seeds=[1, 2, 3, 4, 5])
    stacks = [ens.member_labels(m.params, config, peval) for m in members]
    for i in range(len(stacks)):
        for j in range(i + 1, len(stacks)):
            assert (stacks[i] != stacks[j]).sum() >= 1


def test_worker_pool_matches_sequential():
    prepared, config, tcfg = _tiny_training_setup()
    seq = ens.train_ensemble(tcfg, config, prepared, prepared, seeds=[1, 2])
    par = ens.train_ensemble(tcfg, config, prepared, prepared, seeds=[1, 2], workers=2)
    for a, b in zip(seq, par):
        assert a.seed == b.seed
        for name in a.params.arrays:
            assert np.array_equal(a.params[name], b.params[name])


# ---------------------------------------------------------------------------
# convergence curve
# ---------------------------------------------------------------------------


def test_identical_members_give_zero_deltas():
    rng = np.random.default_rng(2)
    labels = rng.random((6, 3)) > 0.5
    gold = rng.random((6, 3)) > 0.5
    points = ens.convergence_curve([labels.copy() for _ in range(8)], gold)
    assert len(points) == 7
    assert all(p.mean_delta == 0.0 and p.std_delta == 0.0 for p in points)


def test_curve_row_count_and_indexing():
    rng = np.random.default_rng(3)
    stacks = [rng.random((5, 2)) > 0.5 for _ in range(6)]
    gold = rng.random((5, 2)) > 0.5
    points = ens.convergence_curve(stacks, gold)
    assert [p.n for p in points] == [2, 3, 4, 5, 6]


def test_curve_requires_two_members():
    gold = np.zeros((2, 2), dtype=bool)
    with pytest.raises(ValueError, match="at least 2"):
        ens.convergence_curve([np.zeros((2, 2), dtype=bool)], gold)


def test_curve_is_deterministic(desk_ensemble):
    a = ens.convergence_curve(desk_ensemble["stacks"], desk_ensemble["gold"])
    b = ens.convergence_curve(desk_ensemble["stacks"], desk_ensemble["gold"])
    assert [(p.n, p.mean_delta, p.std_delta) for p in a] == [
        (p.n, p.mean_delta, p.std_delta) for p in b
    ]


def test_ensemble_accuracy_not_below_median_member(desk_ensemble):
    gold = desk_ensemble["gold"]
    accs = sorted(float((s == gold).mean()) for s in desk_ensemble["stacks"])
    median = accs[len(accs) // 2]
    combined = float((ens.vote(desk_ensemble["stacks"]) == gold).mean())
    assert combined >= median - 0.01
