"""Seed ensembles: orchestrated member training, vote/mean aggregation, and
the voter-convergence analysis.

Members share one model configuration and differ only in the random seed.
Multilabel ensembles decide by simple majority vote (a tie is negative);
regression ensembles average the member scores per property.
"""

from dataclasses import dataclass, replace

import numpy as np

from . import model, training
from .evaluation import confusion_counts, per_property_prf


@dataclass
class EnsembleMember:
    seed: int
    params: model.ModelParams
    report: training.TrainReport


def _fit_member(payload):
    train_config, config, train_set, dev_set, seed = payload
    return training.train(
        replace(train_config, seed=seed), replace(config, seed=seed), train_set, dev_set
    )


def train_ensemble(train_config, config, train_set, dev_set, seeds, workers=1):
    """Train one member per seed; member order follows seed order.

    workers > 1 fans member training out over a process pool; results are
    identical either way since each member is deterministic in its seed.
    """
    seeds = list(seeds)
    if not seeds:
        raise ValueError("an ensemble needs at least one seed")
    if len(set(seeds)) != len(seeds):
        raise ValueError(f"ensemble seeds must be distinct, got {seeds}")
    payloads = [(train_config, config, train_set, dev_set, seed) for seed in seeds]
    members = []
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_fit_member, p) for p in payloads]
            for seed, future in zip(seeds, futures):
                try:
                    params, report = future.result()
                except training.TrainingError as exc:
                    raise training.TrainingError(f"member with seed {seed} failed: {exc}") from exc
                members.append(EnsembleMember(seed=seed, params=params, report=report))
        return members
    for seed, payload in zip(seeds, payloads):
        try:
            params, report = _fit_member(payload)
        except training.TrainingError as exc:
            raise training.TrainingError(f"member with seed {seed} failed: {exc}") from exc
        members.append(EnsembleMember(seed=seed, params=params, report=report))
    return members


def member_labels(params, config, prepared_set):
    """(N, |P|) bool decisions of one member over a prepared split."""
    return np.stack([model.forward(ex, params, config).labels() for ex in prepared_set])


def member_scores(params, config, prepared_set):
    """(N, |P|) float scores of one member over a prepared split."""
    return np.stack([model.forward(ex, params, config).scores for ex in prepared_set])


def _check_aligned(stacks):
    stacks = [np.asarray(s) for s in stacks]
    if not stacks:
        raise ValueError("no member predictions given")
    for s in stacks[1:]:
        if s.shape != stacks[0].shape:
            raise ValueError(f"member prediction shapes differ: {s.shape} vs {stacks[0].shape}")
    return stacks


def vote(label_stacks):
    """Majority vote over member (N, |P|) bool arrays; ties resolve negative."""
    stacks = _check_aligned(label_stacks)
    positives = np.sum([s.astype(np.int64) for s in stacks], axis=0)
    return positives * 2 > len(stacks)


def mean_scores(score_stacks):
    """Arithmetic mean of member (N, |P|) score arrays."""
    stacks = _check_aligned(score_stacks)
    return np.mean(np.stack([s.astype(np.float64) for s in stacks]), axis=0)


@dataclass
class ConvergencePoint:
    """Per-property F1 shift when voter n joins the first n-1 voters."""

    n: int
    mean_delta: float  # mean over properties of F1(n) - F1(n-1)
    std_delta: float  # population std over properties of the same differences


def _per_property_f1(labels, gold):
    _, _, f1 = per_property_prf(confusion_counts(labels, gold))
    return f1


def convergence_curve(label_stacks, gold):
    """Evaluate growing prefix sub-ensembles; returns points for n = 2..N."""
    stacks = _check_aligned(label_stacks)
    if len(stacks) < 2:
        raise ValueError("convergence analysis needs at least 2 members")
    gold = np.asarray(gold, dtype=bool)
    points = []
    prev_f1 = _per_property_f1(vote(stacks[:1]), gold)
    for n in range(2, len(stacks) + 1):
        f1 = _per_property_f1(vote(stacks[:n]), gold)
        delta = f1 - prev_f1
        points.append(
            ConvergencePoint(n=n, mean_delta=float(delta.mean()), std_delta=float(delta.std()))
        )
        prev_f1 = f1
    return points
