"""Metrics and statistics: per-property and aggregate F1, Pearson correlation,
McNemar significance tests, and the leave-one-out ablation driver.

The aggregate "macro F1" here is the harmonic combination of the unweighted
means of precision and recall over properties — deliberately NOT the mean of
per-property F1 scores, which is a different number.
"""

import math
from dataclasses import dataclass

import numpy as np

ABLATIONS = (
    "full",
    "no_self_attention",
    "no_markers",
    "no_predicate_marker",
    "no_argument_marker",
    "no_hierarchy",
)


@dataclass
class PropertyConfusion:
    """Per-property TP/FP/FN/TN counts over an evaluated example set."""

    tp: np.ndarray
    fp: np.ndarray
    fn: np.ndarray
    tn: np.ndarray

    @property
    def n_examples(self):
        return int((self.tp + self.fp + self.fn + self.tn)[0])


def confusion_counts(pred, gold):
    """pred, gold: (N, |P|) bool -> PropertyConfusion with (|P|,) count arrays."""
    pred = np.asarray(pred, dtype=bool)
    gold = np.asarray(gold, dtype=bool)
    if pred.shape != gold.shape:
        raise ValueError(f"prediction shape {pred.shape} does not match gold {gold.shape}")
    return PropertyConfusion(
        tp=(pred & gold).sum(axis=0),
        fp=(pred & ~gold).sum(axis=0),
        fn=(~pred & gold).sum(axis=0),
        tn=(~pred & ~gold).sum(axis=0),
    )


def _safe_div(num, den):
    num = np.asarray(num, dtype=np.float64)
    den = np.asarray(den, dtype=np.float64)
    out = np.zeros_like(num)
    np.divide(num, den, out=out, where=den > 0)
    return out


def per_property_prf(conf):
    """(precision, recall, f1) per property; zero denominators yield 0."""
    precision = _safe_div(conf.tp, conf.tp + conf.fp)
    recall = _safe_div(conf.tp, conf.tp + conf.fn)
    f1 = _safe_div(2.0 * precision * recall, precision + recall)
    return precision, recall, f1


def macro_f1(precision, recall):
    """Harmonic combination of the unweighted precision and recall means."""
    p = float(np.mean(precision))
    r = float(np.mean(recall))
    return 2.0 * p * r / (p + r) if p + r > 0 else 0.0


def micro_f1(conf):
    """F1 from TP/FP/FN pooled over all properties."""
    tp = float(conf.tp.sum())
    fp = float(conf.fp.sum())
    fn = float(conf.fn.sum())
    p = tp / (tp + fp) if tp + fp > 0 else 0.0
    r = tp / (tp + fn) if tp + fn > 0 else 0.0
    return 2.0 * p * r / (p + r) if p + r > 0 else 0.0


def pearson(x, y):
    """Sample Pearson correlation; (rho, zero_variance_flag).

    Either vector having zero variance makes the coefficient undefined; it is
    reported as 0.0 with the flag set.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError(f"pearson expects equal-length vectors, got {x.shape} and {y.shape}")
    xc = x - x.mean()
    yc = y - y.mean()
    sx = math.sqrt(float(xc @ xc))
    sy = math.sqrt(float(yc @ yc))
    if sx == 0.0 or sy == 0.0:
        return 0.0, True
    return float(xc @ yc) / (sx * sy), False


def pearson_per_property(pred, gold):
    """Column-wise correlation for (N, |P|) score matrices; returns (rho, flags)."""
    pred = np.asarray(pred, dtype=np.float64)
    gold = np.asarray(gold, dtype=np.float64)
    if pred.shape != gold.shape:
        raise ValueError(f"prediction shape {pred.shape} does not match gold {gold.shape}")
    rho = np.zeros(pred.shape[1])
    flags = np.zeros(pred.shape[1], dtype=bool)
    for j in range(pred.shape[1]):
        rho[j], flags[j] = pearson(pred[:, j], gold[:, j])
    return rho, flags


def macro_pearson(rho):
    return float(np.mean(rho))


def chi2_sf_1df(x):
    """Upper tail probability of the chi-squared distribution with 1 dof."""
    return math.erfc(math.sqrt(x / 2.0))


@dataclass
class McNemarResult:
    property: str
    b: int  # first system correct, second wrong
    c: int  # first system wrong, second correct
    chi2: float
    p: float
    bucket: str
    degenerate: bool  # b + c == 0: statistic undefined


def _bucket(b, c, p):
    if b + c == 0 or p >= 0.05:
        return "not_significant"
    direction = "first_better" if b > c else "second_better"
    return f"{direction}_p<0.005" if p < 0.005 else f"{direction}_p<0.05"


def mcnemar(pred_a, pred_b, gold, property_names=None):
    """Paired significance test per property, on the discordant counts.

    pred_a, pred_b, gold: (N, |P|) bool. Uses the uncorrected statistic
    (b - c)^2 / (b + c) with one degree of freedom. b + c = 0 is reported as
    not significant with the degenerate flag set.
    """
    pred_a = np.asarray(pred_a, dtype=bool)
    pred_b = np.asarray(pred_b, dtype=bool)
    gold = np.asarray(gold, dtype=bool)
    if not (pred_a.shape == pred_b.shape == gold.shape):
        raise ValueError(
            f"shapes differ: {pred_a.shape}, {pred_b.shape}, gold {gold.shape}"
        )
    n_props = gold.shape[1]
    if property_names is None:
        property_names = [str(j) for j in range(n_props)]
    correct_a = pred_a == gold
    correct_b = pred_b == gold
    results = []
    for j in range(n_props):
        b = int((correct_a[:, j] & ~correct_b[:, j]).sum())
        c = int((~correct_a[:, j] & correct_b[:, j]).sum())
        if b + c == 0:
            results.append(McNemarResult(property_names[j], 0, 0, 0.0, 1.0, "not_significant", True))
            continue
        chi2 = (b - c) ** 2 / (b + c)
        p = chi2_sf_1df(chi2)
        results.append(McNemarResult(property_names[j], b, c, chi2, p, _bucket(b, c, p), False))
    return results


def ablation_suite(train_config, config, train_set, dev_set, eval_set, seeds, ablations=ABLATIONS):
    """Train one ensemble per leave-one-out configuration and score each.

    Returns a list of {"configuration", "macro_f1", "micro_f1"} rows, one per
    entry in `ablations` ("full" means no switch set).
    """
    from dataclasses import replace

    from . import ensemble as ens

    for name in ablations:
        if name not in ABLATIONS:
            raise ValueError(f"unknown ablation {name!r}")
    gold = np.stack([ex.labels for ex in eval_set])
    rows = []
    for name in ablations:
        cfg = config if name == "full" else replace(config, **{name: True})
        members = ens.train_ensemble(train_config, cfg, train_set, dev_set, seeds)
        labels = ens.vote([ens.member_labels(m.params, cfg, eval_set) for m in members])
        conf = confusion_counts(labels, gold)
        precision, recall, _ = per_property_prf(conf)
        rows.append(
            {
                "configuration": name,
                "macro_f1": macro_f1(precision, recall),
                "micro_f1": micro_f1(conf),
            }
        )
    return rows
