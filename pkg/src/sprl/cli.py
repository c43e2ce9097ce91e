"""Command-line surface: train, ensemble, predict, evaluate, significance,
ablate, convergence.

Exit codes: 0 success, 1 usage error, 2 data validation error, 3 numeric
failure. Every command writes a manifest.json into its output directory
listing resolved configuration, inputs, produced files and their sha256
checksums. Environment variables are never consulted for run configuration.
"""

import argparse
import csv
import hashlib
import json
import sys
import time
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from . import ensemble as ens
from . import evaluation, model, training
from .autodiff import GradientError
from .dataset import DatasetError, PropertyInventory, parse_dataset, prepare_example
from .embeddings import (
    EmbeddingError,
    attach_contextual,
    load_word_vectors,
    lookup_sequence,
    read_contextual,
)
from .model import CheckpointError, ModelConfig, load_checkpoint, save_checkpoint
from .training import TrainConfig, TrainingError

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3

_ABLATE_CHOICES = {
    "self-attention": "no_self_attention",
    "markers": "no_markers",
    "predicate-marker": "no_predicate_marker",
    "argument-marker": "no_argument_marker",
    "hierarchy": "no_hierarchy",
}


class UsageError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit code 2; usage is 1 here
        self.print_usage(sys.stderr)
        raise SystemExit(EXIT_USAGE)


# ---------------------------------------------------------------------------
# Shared plumbing
# ---------------------------------------------------------------------------


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_manifest(out_dir, command, config, inputs, outputs, seeds, started):
    manifest = {
        "command": command,
        "config": config,
        "inputs": {name: {"path": str(p), "sha256": _sha256(p)} for name, p in inputs.items()},
        "outputs": {
            name: {"path": str(p), "sha256": _sha256(p)} for name, p in outputs.items()
        },
        "seeds": list(seeds),
        "wall_time": time.perf_counter() - started,
    }
    path = Path(out_dir) / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def _write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _fmt(value):
    return "" if value is None else repr(float(value))


def _resolve_inventory(name_or_path):
    if name_or_path in ("spr1", "spr2"):
        return PropertyInventory.builtin(name_or_path)
    try:
        names = [
            line.strip()
            for line in Path(name_or_path).read_text(encoding="utf-8").splitlines()
            if line.strip()
        ]
    except OSError as exc:
        raise DatasetError(f"cannot read property inventory from {name_or_path}: {exc}") from exc
    return PropertyInventory(tuple(names))


def _load_splits(args, inventory):
    """Parse the dataset, embed every token, and prepare all three splits."""
    examples = parse_dataset(args.dataset, inventory)
    table = load_word_vectors(
        args.vectors, args.vector_dim, oov_policy=args.oov_policy, oov_seed=args.oov_seed
    )
    base = {ex.id: lookup_sequence(ex.tokens, table) for ex in examples}
    word_dim = table.dim
    if args.contextual:
        ctx = read_contextual(args.contextual)
        vectors_by_id = attach_contextual(examples, base, ctx)
        input_dim = word_dim + ctx.dim
    else:
        vectors_by_id = base
        input_dim = word_dim
    splits = {"train": [], "dev": [], "test": []}
    for ex in examples:
        splits[ex.split].append(
            prepare_example(ex, vectors_by_id[ex.id], inventory, args.max_len)
        )
    return splits, input_dim, word_dim


def _model_config(args, input_dim, word_dim, n_properties):
    kwargs = dict(
        mode=args.mode,
        n_properties=n_properties,
        input_dim=input_dim,
        max_len=args.max_len,
        hidden_units=args.hidden_units,
        attention_units=args.attention_units,
        seed=args.seed,
    )
    if getattr(args, "gate_word_only", False):
        kwargs["marker_width"] = word_dim
    if getattr(args, "ablate", None):
        kwargs[_ABLATE_CHOICES[args.ablate]] = True
    return ModelConfig(**kwargs)


def _parse_config_file(path):
    """Flat `key = value` text; '#' starts a comment."""
    values = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise DatasetError(f"cannot read training config from {path}: {exc}") from exc
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise DatasetError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        values[key] = value
    return values


_TRAIN_FIELD_TYPES = {
    "mode": str,
    "lambda_main": float,
    "lambda_aux": float,
    "learning_rate": float,
    "batch_size": int,
    "max_epochs": int,
    "patience": int,
    "seed": int,
    "max_grad_norm": float,
}


def _train_config(args):
    """Config file values override defaults; explicit CLI flags win over both."""
    values = {}
    if args.config:
        for key, raw in _parse_config_file(args.config).items():
            if key not in _TRAIN_FIELD_TYPES:
                raise DatasetError(f"{args.config}: unknown training option {key!r}")
            try:
                values[key] = _TRAIN_FIELD_TYPES[key](raw)
            except ValueError as exc:
                raise DatasetError(f"{args.config}: bad value for {key!r} ({exc})") from exc
    for key in ("mode", "seed", "patience", "batch_size", "max_epochs", "learning_rate"):
        cli_value = getattr(args, key, None)
        if cli_value is not None:
            values[key] = cli_value
    try:
        config = TrainConfig(**values)
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from exc
    args.mode = config.mode
    args.seed = config.seed
    return config


# ---------------------------------------------------------------------------
# Predictions file (JSONL with a header record)
# ---------------------------------------------------------------------------


def write_predictions(path, mode, inventory, rows):
    """rows: iterable of (example_id, per-property values)."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps({"mode": mode, "properties": list(inventory.names)}) + "\n")
        for example_id, values in rows:
            if mode == "multilabel":
                payload = {p: ("+" if v else "-") for p, v in zip(inventory.names, values)}
                fh.write(json.dumps({"id": example_id, "labels": payload}) + "\n")
            else:
                payload = {p: float(v) for p, v in zip(inventory.names, values)}
                fh.write(json.dumps({"id": example_id, "scores": payload}) + "\n")


def read_predictions(path):
    """Returns (mode, PropertyInventory, list of (id, np.ndarray))."""
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise DatasetError(f"cannot read predictions from {path}: {exc}") from exc
    if not lines:
        raise DatasetError(f"{path}: empty predictions file")
    try:
        header = json.loads(lines[0])
        mode = header["mode"]
        inventory = PropertyInventory(tuple(header["properties"]))
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise DatasetError(f"{path}: malformed predictions header ({exc})") from exc
    if mode not in model.MODES:
        raise DatasetError(f"{path}: unknown mode {mode!r}")
    rows = []
    key = "labels" if mode == "multilabel" else "scores"
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            values = obj[key]
            if mode == "multilabel":
                arr = np.array([values[p] == "+" for p in inventory.names], dtype=bool)
            else:
                arr = np.array([float(values[p]) for p in inventory.names], dtype=np.float64)
            rows.append((obj["id"], arr))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise DatasetError(f"{path}:{lineno}: malformed prediction record ({exc})") from exc
    return mode, inventory, rows


def _align(pred_rows, gold_examples, what):
    """Ordered id alignment; returns gold indices matching pred_rows order."""
    gold_ids = [ex.id for ex in gold_examples]
    pred_ids = [r[0] for r in pred_rows]
    if pred_ids != gold_ids:
        for i, (p, g) in enumerate(zip(pred_ids, gold_ids)):
            if p != g:
                raise DatasetError(f"{what}: id mismatch at row {i}: {p!r} vs gold {g!r}")
        raise DatasetError(
            f"{what}: {len(pred_ids)} predictions for {len(gold_ids)} gold examples"
        )
    return gold_examples


# ---------------------------------------------------------------------------
# Checkpoint/ensemble loading for predict-like commands
# ---------------------------------------------------------------------------


def _load_members(path):
    """A checkpoint or an ensemble manifest -> (members, config, inventory).

    members is a list of (seed, ModelParams); all members must agree on the
    configuration (up to seed) and on the property inventory.
    """
    path = Path(path)
    if path.suffix == ".json":
        try:
            manifest = json.loads(path.read_text(encoding="utf-8"))
            entries = manifest["members"]
        except (OSError, json.JSONDecodeError, KeyError, TypeError) as exc:
            raise CheckpointError(f"{path}: malformed ensemble manifest ({exc})") from exc
        members = []
        config = inventory = None
        for entry in entries:
            params, cfg, inv = load_checkpoint(path.parent / entry["path"])
            if config is None:
                config, inventory = cfg, inv
            elif replace(cfg, seed=config.seed) != config or inv != inventory:
                raise CheckpointError(
                    f"{path}: member {entry['path']} disagrees on config or inventory"
                )
            members.append((entry["seed"], params))
        if not members:
            raise CheckpointError(f"{path}: ensemble manifest lists no members")
        return members, config, inventory
    params, config, inventory = load_checkpoint(path)
    return [(config.seed, params)], config, inventory


def _prepare_for_model(args, config, inventory):
    examples = [ex for ex in parse_dataset(args.dataset, inventory) if ex.split == args.split]
    if not examples:
        raise DatasetError(f"{args.dataset}: no examples in split {args.split!r}")
    table = load_word_vectors(
        args.vectors, args.vector_dim, oov_policy=args.oov_policy, oov_seed=args.oov_seed
    )
    base = {ex.id: lookup_sequence(ex.tokens, table) for ex in examples}
    if args.contextual:
        ctx = read_contextual(args.contextual)
        vectors_by_id = attach_contextual(examples, base, ctx)
    else:
        vectors_by_id = base
    prepared = [
        prepare_example(ex, vectors_by_id[ex.id], inventory, config.max_len) for ex in examples
    ]
    for ex in prepared:
        if ex.vectors.shape[1] != config.input_dim:
            raise DatasetError(
                f"example {ex.id!r}: vector width {ex.vectors.shape[1]} does not match "
                f"the checkpoint input width {config.input_dim}"
            )
    return prepared


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_train(args):
    started = time.perf_counter()
    train_config = _train_config(args)
    inventory = _resolve_inventory(args.inventory)
    splits, input_dim, word_dim = _load_splits(args, inventory)
    config = _model_config(args, input_dim, word_dim, len(inventory))
    if not splits["train"] or not splits["dev"]:
        raise DatasetError(f"{args.dataset}: train and dev splits must be non-empty")
    params, report = training.train(train_config, config, splits["train"], splits["dev"])
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ckpt = out / "checkpoint.ckpt"
    save_checkpoint(ckpt, params, config, inventory)
    report.checkpoint_path = str(ckpt)
    report_csv = out / "train_report.csv"
    _write_csv(
        report_csv,
        ["epoch", "train_loss", "dev_metric"],
        [
            [e + 1, _fmt(tl), _fmt(m)]
            for e, (tl, m) in enumerate(zip(report.train_trace, report.dev_trace))
        ],
    )
    inputs = {"dataset": args.dataset, "vectors": args.vectors}
    if args.contextual:
        inputs["contextual"] = args.contextual
    _write_manifest(
        out,
        "train",
        {"train": asdict(train_config), "model": asdict(config)},
        inputs,
        {"checkpoint": ckpt, "train_report": report_csv},
        [train_config.seed],
        started,
    )
    print(
        f"trained {config.mode} model: best dev metric {report.best_metric:.4f} "
        f"at epoch {report.best_epoch} ({len(report.dev_trace)} epochs run)"
    )
    print(f"checkpoint written to {ckpt}")
    return EXIT_OK


def _member_seeds(args):
    if args.seeds:
        try:
            seeds = [int(s) for s in args.seeds.split(",") if s.strip()]
        except ValueError as exc:
            raise UsageError(f"bad --seeds list: {exc}") from exc
        if args.n_voters is not None and len(seeds) != args.n_voters:
            raise UsageError(
                f"--seeds lists {len(seeds)} seeds but --n-voters is {args.n_voters}"
            )
    elif args.n_voters is not None:
        seeds = [args.seed + i for i in range(args.n_voters)]
    else:
        raise UsageError("provide --n-voters or --seeds")
    if len(seeds) < 1:
        raise UsageError("an ensemble needs at least one voter")
    if len(set(seeds)) != len(seeds):
        raise UsageError(f"ensemble seeds must be distinct, got {seeds}")
    return seeds


def cmd_ensemble(args):
    started = time.perf_counter()
    if args.n_voters is not None and args.n_voters < 1:
        raise UsageError("--n-voters must be >= 1")
    train_config = _train_config(args)
    seeds = _member_seeds(args)
    inventory = _resolve_inventory(args.inventory)
    splits, input_dim, word_dim = _load_splits(args, inventory)
    config = _model_config(args, input_dim, word_dim, len(inventory))
    if not splits["train"] or not splits["dev"]:
        raise DatasetError(f"{args.dataset}: train and dev splits must be non-empty")
    members = ens.train_ensemble(
        train_config, config, splits["train"], splits["dev"], seeds, workers=args.workers
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    outputs = {}
    entries = []
    for member in members:
        name = f"member_{member.seed}.ckpt"
        save_checkpoint(out / name, member.params, replace(config, seed=member.seed), inventory)
        outputs[name] = out / name
        entries.append({"seed": member.seed, "path": name})
    manifest_path = out / "ensemble.json"
    manifest_path.write_text(
        json.dumps({"mode": config.mode, "members": entries}, indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    outputs["ensemble"] = manifest_path
    inputs = {"dataset": args.dataset, "vectors": args.vectors}
    if args.contextual:
        inputs["contextual"] = args.contextual
    _write_manifest(
        out,
        "ensemble",
        {"train": asdict(train_config), "model": asdict(config)},
        inputs,
        outputs,
        seeds,
        started,
    )
    print(f"trained {len(members)} ensemble members into {out}")
    return EXIT_OK


def cmd_predict(args):
    started = time.perf_counter()
    members, config, inventory = _load_members(args.model)
    prepared = _prepare_for_model(args, config, inventory)
    if config.mode == "multilabel":
        combined = ens.vote([ens.member_labels(p, config, prepared) for _, p in members])
    else:
        combined = ens.mean_scores([ens.member_scores(p, config, prepared) for _, p in members])
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    pred_path = out / "predictions.jsonl"
    write_predictions(
        pred_path, config.mode, inventory, [(ex.id, combined[i]) for i, ex in enumerate(prepared)]
    )
    _write_manifest(
        out,
        "predict",
        {"model": asdict(config), "split": args.split, "voters": len(members)},
        {"model_file": args.model, "dataset": args.dataset, "vectors": args.vectors},
        {"predictions": pred_path},
        [seed for seed, _ in members],
        started,
    )
    print(f"wrote {len(prepared)} predictions ({len(members)} voter(s)) to {pred_path}")
    return EXIT_OK


def _gold_for(args, inventory):
    examples = [ex for ex in parse_dataset(args.dataset, inventory) if ex.split == args.split]
    if not examples:
        raise DatasetError(f"{args.dataset}: no examples in split {args.split!r}")
    return examples


def cmd_evaluate(args):
    started = time.perf_counter()
    mode, inventory, pred_rows = read_predictions(args.predictions)
    if mode != args.mode:
        raise UsageError(
            f"--mode {args.mode} does not match the predictions file mode {mode!r}"
        )
    gold_examples = _align(pred_rows, _gold_for(args, inventory), args.predictions)
    pred = np.stack([r[1] for r in pred_rows])
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    metrics_path = out / "metrics.csv"
    rows = []
    if mode == "multilabel":
        from .dataset import to_multilabel

        gold = np.stack([to_multilabel(ex.annotations, inventory) for ex in gold_examples])
        conf = evaluation.confusion_counts(pred, gold)
        precision, recall, f1 = evaluation.per_property_prf(conf)
        for j, prop in enumerate(inventory.names):
            rows.append([prop, _fmt(precision[j]), _fmt(recall[j]), _fmt(f1[j]), "", ""])
        macro = evaluation.macro_f1(precision, recall)
        micro = evaluation.micro_f1(conf)
        rows.append(["macro", _fmt(np.mean(precision)), _fmt(np.mean(recall)), _fmt(macro), "", ""])
        rows.append(["micro", "", "", _fmt(micro), "", ""])
        summary = f"macro F1 = {macro:.4f} | micro F1 = {micro:.4f}"
    else:
        from .dataset import to_regression_target

        gold = np.stack(
            [to_regression_target(ex.annotations, inventory) for ex in gold_examples]
        )
        rho, flags = evaluation.pearson_per_property(pred, gold)
        for j, prop in enumerate(inventory.names):
            rows.append(
                [prop, "", "", "", _fmt(rho[j]), "zero_variance" if flags[j] else ""]
            )
        macro = evaluation.macro_pearson(rho)
        rows.append(["macro", "", "", "", _fmt(macro), ""])
        summary = f"macro Pearson = {macro:.4f}"
    _write_csv(metrics_path, ["property", "precision", "recall", "f1", "pearson", "flags"], rows)
    _write_manifest(
        out,
        "evaluate",
        {"mode": mode, "split": args.split},
        {"predictions": args.predictions, "dataset": args.dataset},
        {"metrics": metrics_path},
        [],
        started,
    )
    print(summary)
    print(f"metrics written to {metrics_path}")
    return EXIT_OK


def cmd_significance(args):
    started = time.perf_counter()
    mode_a, inv_a, rows_a = read_predictions(args.predictions_a)
    mode_b, inv_b, rows_b = read_predictions(args.predictions_b)
    if mode_a != "multilabel" or mode_b != "multilabel":
        raise UsageError("significance testing compares multilabel predictions")
    if inv_a.names != inv_b.names:
        raise DatasetError("prediction files disagree on the property inventory")
    gold_examples = _align(rows_a, _gold_for(args, inv_a), args.predictions_a)
    _align(rows_b, gold_examples, args.predictions_b)
    from .dataset import to_multilabel

    gold = np.stack([to_multilabel(ex.annotations, inv_a) for ex in gold_examples])
    results = evaluation.mcnemar(
        np.stack([r[1] for r in rows_a]),
        np.stack([r[1] for r in rows_b]),
        gold,
        property_names=list(inv_a.names),
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    sig_path = out / "significance.csv"
    _write_csv(
        sig_path,
        ["property", "b", "c", "chi2", "p", "bucket"],
        [[r.property, r.b, r.c, _fmt(r.chi2), _fmt(r.p), r.bucket] for r in results],
    )
    _write_manifest(
        out,
        "significance",
        {"split": args.split},
        {
            "predictions_a": args.predictions_a,
            "predictions_b": args.predictions_b,
            "dataset": args.dataset,
        },
        {"significance": sig_path},
        [],
        started,
    )
    n_sig = sum(r.bucket != "not_significant" for r in results)
    print(f"{n_sig}/{len(results)} properties significant at p < 0.05")
    print(f"significance report written to {sig_path}")
    return EXIT_OK


def cmd_ablate(args):
    started = time.perf_counter()
    if args.n_voters is not None and args.n_voters < 1:
        raise UsageError("--n-voters must be >= 1")
    train_config = _train_config(args)
    seeds = _member_seeds(args)
    inventory = _resolve_inventory(args.inventory)
    splits, input_dim, word_dim = _load_splits(args, inventory)
    config = _model_config(args, input_dim, word_dim, len(inventory))
    if config.mode != "multilabel":
        raise UsageError("the ablation table is defined for multilabel mode")
    eval_set = splits[args.split]
    if not splits["train"] or not splits["dev"] or not eval_set:
        raise DatasetError(f"{args.dataset}: train, dev and {args.split} splits must be non-empty")
    rows = evaluation.ablation_suite(
        train_config, config, splits["train"], splits["dev"], eval_set, seeds
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    table_path = out / "ablation.csv"
    _write_csv(
        table_path,
        ["configuration", "macro_f1", "micro_f1"],
        [[r["configuration"], _fmt(r["macro_f1"]), _fmt(r["micro_f1"])] for r in rows],
    )
    _write_manifest(
        out,
        "ablate",
        {"train": asdict(train_config), "model": asdict(config), "split": args.split},
        {"dataset": args.dataset, "vectors": args.vectors},
        {"ablation": table_path},
        seeds,
        started,
    )
    for r in rows:
        print(f"{r['configuration']:>22}: macro F1 {r['macro_f1']:.4f}")
    print(f"ablation table written to {table_path}")
    return EXIT_OK


def cmd_convergence(args):
    started = time.perf_counter()
    members, config, inventory = _load_members(args.model)
    if config.mode != "multilabel":
        raise UsageError("the convergence analysis is defined for multilabel mode")
    if len(members) < 2:
        raise UsageError("convergence analysis needs an ensemble of at least 2 members")
    prepared = _prepare_for_model(args, config, inventory)
    gold = np.stack([ex.labels for ex in prepared])
    stacks = [ens.member_labels(p, config, prepared) for _, p in members]
    points = ens.convergence_curve(stacks, gold)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    curve_path = out / "convergence.csv"
    _write_csv(
        curve_path,
        ["n", "mean_delta", "std_delta"],
        [[p.n, _fmt(p.mean_delta), _fmt(p.std_delta)] for p in points],
    )
    _write_manifest(
        out,
        "convergence",
        {"split": args.split, "voters": len(members)},
        {"model_file": args.model, "dataset": args.dataset, "vectors": args.vectors},
        {"convergence": curve_path},
        [seed for seed, _ in members],
        started,
    )
    print(f"convergence curve ({len(points)} points) written to {curve_path}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------


def _add_data_options(p):
    p.add_argument("--dataset", required=True, help="JSONL dataset file")
    p.add_argument("--vectors", required=True, help="word-vector text file")
    p.add_argument("--inventory", default="spr1", help="spr1, spr2, or a file of property names")
    p.add_argument("--vector-dim", type=int, default=None, dest="vector_dim")
    p.add_argument("--contextual", default=None, help="contextual-vector file")
    p.add_argument("--oov-policy", choices=("zero", "random"), default="zero", dest="oov_policy")
    p.add_argument("--oov-seed", type=int, default=0, dest="oov_seed")


def _add_model_options(p):
    p.add_argument("--mode", choices=model.MODES, default=None)
    p.add_argument("--max-len", type=int, default=30, dest="max_len")
    p.add_argument("--hidden-units", type=int, default=64, dest="hidden_units")
    p.add_argument("--attention-units", type=int, default=64, dest="attention_units")
    p.add_argument("--ablate", choices=sorted(_ABLATE_CHOICES), default=None)
    p.add_argument(
        "--gate-word-only",
        action="store_true",
        dest="gate_word_only",
        help="apply markers to the word-vector portion only, not contextual dims",
    )


def _add_train_options(p):
    p.add_argument("--config", default=None, help="flat key=value training config file")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--patience", type=int, default=None)
    p.add_argument("--batch-size", type=int, default=None, dest="batch_size")
    p.add_argument("--max-epochs", type=int, default=None, dest="max_epochs")
    p.add_argument("--learning-rate", type=float, default=None, dest="learning_rate")


def build_parser():
    parser = _Parser(prog="sprl", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a single model")
    _add_data_options(p)
    _add_model_options(p)
    _add_train_options(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("ensemble", help="train a seed ensemble")
    _add_data_options(p)
    _add_model_options(p)
    _add_train_options(p)
    p.add_argument("--n-voters", type=int, default=None, dest="n_voters")
    p.add_argument("--seeds", default=None, help="comma-separated member seeds")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ensemble)

    p = sub.add_parser("predict", help="predict with a checkpoint or ensemble")
    p.add_argument("--model", required=True, help="checkpoint file or ensemble.json")
    _add_data_options(p)
    p.add_argument("--split", choices=("train", "dev", "test"), default="test")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="score a predictions file against gold data")
    p.add_argument("--predictions", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--mode", choices=model.MODES, required=True)
    p.add_argument("--split", choices=("train", "dev", "test"), default="test")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("significance", help="McNemar tests between two prediction files")
    p.add_argument("--predictions-a", required=True, dest="predictions_a")
    p.add_argument("--predictions-b", required=True, dest="predictions_b")
    p.add_argument("--dataset", required=True)
    p.add_argument("--split", choices=("train", "dev", "test"), default="test")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_significance)

    p = sub.add_parser("ablate", help="leave-one-out component ablation table")
    _add_data_options(p)
    _add_model_options(p)
    _add_train_options(p)
    p.add_argument("--n-voters", type=int, default=None, dest="n_voters")
    p.add_argument("--seeds", default=None)
    p.add_argument("--split", choices=("train", "dev", "test"), default="test")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("convergence", help="voter-convergence curve for an ensemble")
    p.add_argument("--model", required=True, help="ensemble.json")
    _add_data_options(p)
    p.add_argument("--split", choices=("train", "dev", "test"), default="test")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_convergence)

    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if exc.code is not None else EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DatasetError, EmbeddingError, CheckpointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (TrainingError, GradientError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
