import numpy as np
import pytest

from helpers import CONV_INVENTORY, convergence_corpus, prepare_all
from sprl import ensemble as ens
from sprl.model import ModelConfig
from sprl.training import TrainConfig


@pytest.fixture(scope="session")
def desk_ensemble():
    """Ten briefly trained members over a 200-example span-dependent corpus.

    Shared between the ensemble robustness tests and the acceptance suite;
    members stay deliberately under-trained so their votes still disagree.
    """
    train_examples = convergence_corpus(200, seed=11, split="train", noise=0.2)
    eval_examples = convergence_corpus(100, seed=12, split="test", noise=0.2)
    prepared_train = prepare_all(train_examples, CONV_INVENTORY)
    prepared_eval = prepare_all(eval_examples, CONV_INVENTORY)
    config = ModelConfig(
        mode="multilabel",
        n_properties=3,
        input_dim=16,
        max_len=12,
        hidden_units=6,
        attention_units=6,
        seed=0,
    )
    train_config = TrainConfig(
        mode="multilabel", batch_size=16, max_epochs=4, patience=4, seed=0
    )
    members = ens.train_ensemble(
        train_config, config, prepared_train, prepared_train[:30], seeds=list(range(10))
    )
    stacks = [ens.member_labels(m.params, config, prepared_eval) for m in members]
    gold = np.stack([ex.labels for ex in prepared_eval])
    return {
        "members": members,
        "stacks": stacks,
        "gold": gold,
        "config": config,
        "train_config": train_config,
        "eval_set": prepared_eval,
    }
