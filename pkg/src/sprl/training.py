"""Losses, the gradient-descent loop, early stopping, and seeding.

The per-example loss is the property-averaged cross entropy (multilabel) or
mean squared error (regression), plus the weighted auxiliary Likert loss
whenever the hierarchy is enabled. Training is fully deterministic given the
seed: one generator drives parameter init and every epoch shuffle.
"""

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from . import evaluation, model

MODES = model.MODES


class TrainingError(RuntimeError):
    """Training aborted: non-finite loss or gradient."""


@dataclass
class TrainConfig:
    mode: str = "multilabel"
    lambda_main: float = 1.0
    lambda_aux: float = 0.2
    learning_rate: float = 0.001
    batch_size: int = 32
    max_epochs: int = 100
    patience: int = 10
    seed: int = 0
    max_grad_norm: float = None  # global-norm clipping hook; off by default

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.lambda_main < 0 or self.lambda_aux < 0:
            raise ValueError("loss weights must be nonnegative")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.batch_size < 1 or self.max_epochs < 1 or self.patience < 1:
            raise ValueError("batch_size, max_epochs and patience must be >= 1")
        if self.max_grad_norm is not None and self.max_grad_norm <= 0:
            raise ValueError("max_grad_norm must be positive when set")


# ---------------------------------------------------------------------------
# Loss values (float64 reference implementations)
# ---------------------------------------------------------------------------


def multilabel_loss(probs, labels, main_weight=1.0):
    """Property-averaged cross entropy against one-hot (applies / not) golds.

    probs (|P|, 2) with column 1 = probability the property applies; labels
    (|P|,) bool. Log arguments are clamped below at 1e-12.
    """
    probs = np.asarray(probs, dtype=np.float64)
    labels = np.asarray(labels, dtype=bool)
    picked = np.where(labels, probs[:, 1], probs[:, 0])
    return float(-main_weight * np.mean(np.log(np.maximum(picked, ad.LOG_CLAMP))))


def aux_loss(aux, likert, aux_weight=0.2):
    """Weighted mean squared error of the intermediate Likert estimates."""
    aux = np.asarray(aux, dtype=np.float64)
    likert = np.asarray(likert, dtype=np.float64)
    return float(aux_weight * np.mean((likert - aux) ** 2))


def regression_loss(scores, likert):
    """Mean squared error over properties (the auxiliary formula at weight 1)."""
    return aux_loss(scores, likert, aux_weight=1.0)


# ---------------------------------------------------------------------------
# Loss nodes (recorded on the example's graph, float32 in production)
# ---------------------------------------------------------------------------


def multilabel_loss_node(out, labels, main_weight, graph):
    n_props = len(labels)
    gold = np.zeros((n_props, 2), dtype=np.float32)
    gold[np.arange(n_props), labels.astype(int)] = 1.0
    picked = ad.elementwise_mul(graph.constant(gold), ad.log(out))
    return ad.scale(ad.sum_(picked), -main_weight / n_props)


def squared_error_node(pred, target, weight, graph):
    residual = ad.sub(graph.constant(target.astype(np.float32)), pred)
    return ad.scale(ad.sum_(ad.square(residual)), weight / len(target))


def build_loss(prepared, params_t, config, train_config, graph):
    """Forward pass plus the combined loss node for one prepared example."""
    aux, out = model.build_forward(prepared, params_t, config, graph)
    if config.mode == "multilabel":
        loss = multilabel_loss_node(out, prepared.labels, train_config.lambda_main, graph)
    else:
        loss = squared_error_node(out, prepared.likert, 1.0, graph)
    if aux is not None:
        loss = ad.add(loss, squared_error_node(aux, prepared.likert, train_config.lambda_aux, graph))
    return loss, out


# ---------------------------------------------------------------------------
# Development metric and the training loop
# ---------------------------------------------------------------------------


def dev_metric(params, config, dev_set):
    """Macro F1 (multilabel) or macro Pearson (regression) on a prepared split."""
    gold_labels = np.stack([ex.labels for ex in dev_set])
    if config.mode == "multilabel":
        pred = np.stack([model.forward(ex, params, config).labels() for ex in dev_set])
        conf = evaluation.confusion_counts(pred, gold_labels)
        precision, recall, _ = evaluation.per_property_prf(conf)
        return evaluation.macro_f1(precision, recall)
    scores = np.stack([model.forward(ex, params, config).scores for ex in dev_set])
    gold = np.stack([ex.likert for ex in dev_set])
    rho, _ = evaluation.pearson_per_property(scores, gold)
    return float(np.mean(rho))


@dataclass
class TrainReport:
    dev_trace: list = field(default_factory=list)  # one dev metric per epoch
    train_trace: list = field(default_factory=list)  # mean per-example loss per epoch
    best_epoch: int = 0  # 1-based
    best_metric: float = float("-inf")
    wall_time: float = 0.0
    checkpoint_path: str = None

    def __post_init__(self):
        if self.dev_trace and self.best_metric != max(self.dev_trace):
            raise ValueError("best_metric must equal the maximum of the trace")


def _zero_grads(params):
    return {name: np.zeros_like(arr) for name, arr in params.arrays.items()}


def clip_gradients(grads, max_norm):
    """Scale grads in place so their global L2 norm is at most max_norm."""
    total = math.sqrt(sum(float((g.astype(np.float64) ** 2).sum()) for g in grads.values()))
    if total > max_norm:
        factor = max_norm / total
        for g in grads.values():
            g *= factor
    return grads


def train(train_config, config, train_set, dev_set, init_params=None):
    """Fit the model; returns (best_params, TrainReport).

    Stops after `patience` epochs without a dev improvement and restores the
    best-epoch parameters. Parameters start from init_params when given,
    otherwise from the seed-determined initializer; either way the run is a
    pure function of (config, seed, data).
    """
    if train_config.mode != config.mode:
        raise ValueError(
            f"train mode {train_config.mode!r} differs from model mode {config.mode!r}"
        )
    if not train_set or not dev_set:
        raise ValueError("train and dev splits must be non-empty")
    started = time.perf_counter()
    rng = np.random.default_rng(train_config.seed)
    params = model.ModelParams.initialize(config, rng) if init_params is None else init_params.copy()
    state = ad.AdamState(params.arrays)
    best_params = params.copy()
    best_metric = float("-inf")
    best_epoch = 0
    trace = []
    train_trace = []
    stale = 0
    for epoch in range(1, train_config.max_epochs + 1):
        order = rng.permutation(len(train_set))
        epoch_loss = 0.0
        for lo in range(0, len(order), train_config.batch_size):
            batch = order[lo : lo + train_config.batch_size]
            grad_sum = _zero_grads(params)
            for idx in batch:
                graph = ad.Graph()
                loss, _ = build_loss(
                    train_set[idx], params.bind(graph), config, train_config, graph
                )
                if not np.isfinite(loss.data):
                    raise TrainingError(
                        f"non-finite loss at epoch {epoch}, example {train_set[idx].id!r}"
                    )
                epoch_loss += float(loss.data)
                for name, grad in ad.backward(graph, loss).items():
                    grad_sum[name] += grad
            scale = 1.0 / len(batch)
            grads = {name: g * scale for name, g in grad_sum.items()}
            if train_config.max_grad_norm is not None:
                clip_gradients(grads, train_config.max_grad_norm)
            try:
                ad.adam_step(params.arrays, grads, state, train_config.learning_rate)
            except ad.GradientError as exc:
                raise TrainingError(f"epoch {epoch}: {exc}") from exc
        train_trace.append(epoch_loss / len(train_set))
        metric = dev_metric(params, config, dev_set)
        trace.append(metric)
        if metric > best_metric:
            best_metric = metric
            best_epoch = epoch
            best_params = params.copy()
            stale = 0
        else:
            stale += 1
            if stale >= train_config.patience:
                break
    report = TrainReport(
        dev_trace=trace,
        train_trace=train_trace,
        best_epoch=best_epoch,
        best_metric=best_metric,
        wall_time=time.perf_counter() - started,
    )
    return best_params, report
