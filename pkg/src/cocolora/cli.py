"""Command-line interface.

Verbs: generate-data, train, eval, compare, grad-check. Every command takes
--config PATH, --seed N, --out DIR, and any number of dotted overrides like
--train.epochs=20. Every run writes its fully resolved configuration next to
its outputs, and reruns with identical configuration produce byte-identical
files.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numeric
failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import config as cfgmod
from .checkpoint import load_checkpoint, save_checkpoint
from .data import Dataset, generate_synthetic, kfold_split, load_jsonl, save_jsonl
from .errors import ConfigError, DataError, NumericError
from .evaluation import evaluate_model, heteroscedasticity_report
from .model import Model
from .numerics import SeededRng
from .training import gradient_check, train

GRAD_CHECK_TOLERANCE = 1e-4


def _write_text(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _write_config_echo(config: dict, out: Path):
    _write_text(out / "resolved-config.txt", cfgmod.format_config(config))


def _write_json(path: Path, payload):
    _write_text(path, json.dumps(payload, sort_keys=True, indent=2) + "\n")


def _write_csv(path: Path, header, rows):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _load_dataset(config: dict) -> Dataset:
    if config["data.path"] is not None:
        return load_jsonl(config["data.path"], config["data.meta_path"])
    return generate_synthetic(cfgmod.synthetic_spec(config))


def _model_inputs(dataset: Dataset):
    """Feature arrays for the model; datasets without audio get a zero column."""
    if dataset.audio.shape[1] == 0:
        return dataset.text, np.zeros((len(dataset), 1))
    return dataset.text, dataset.audio


def _n_classes(config: dict, dataset: Dataset) -> int:
    if config["data.path"] is None:
        return config["data.n_classes"]
    if len(dataset) == 0:
        raise DataError("loaded dataset is empty")
    return int(dataset.labels.max()) + 1


def _build_model(config: dict, dataset: Dataset, family: str, seed: int) -> Model:
    text, audio = _model_inputs(dataset)
    if family in ("coco", "fusion") and dataset.audio.shape[1] == 0:
        raise DataError(f"family '{family}' requires audio features")
    mc = cfgmod.model_config(
        dict(config, **{"model.family": family}),
        text_dim=text.shape[1],
        audio_dim=audio.shape[1],
        n_classes=_n_classes(config, dataset),
    )
    return Model(mc, seed)


def cmd_generate_data(config: dict, out: Path, args) -> int:
    dataset = generate_synthetic(cfgmod.synthetic_spec(config))
    out.mkdir(parents=True, exist_ok=True)
    save_jsonl(dataset, out / "dataset.jsonl", out / "dataset.meta.json")
    _write_config_echo(config, out)
    print(f"wrote {len(dataset)} samples to {out / 'dataset.jsonl'}")
    return 0


def cmd_train(config: dict, out: Path, args) -> int:
    dataset = _load_dataset(config)
    if len(dataset) == 0:
        raise DataError("cannot train on an empty dataset")
    seed = config["seed"]
    model = _build_model(config, dataset, config["model.family"], seed)
    text, audio = _model_inputs(dataset)
    history = train(
        model,
        text,
        audio,
        dataset.labels,
        cfgmod.train_config(config),
        SeededRng(seed).derive("train"),
        log=print,
    )
    out.mkdir(parents=True, exist_ok=True)
    save_checkpoint(model, out / "model.cclr")
    _write_csv(
        out / "history.csv",
        ["epoch", "loss", "nll", "kl"],
        [[r["epoch"], _fmt(r["loss"]), _fmt(r["nll"]), _fmt(r["kl"])] for r in history],
    )
    _write_config_echo(config, out)
    print(f"wrote {out / 'model.cclr'}")
    return 0


def _eval_summary(config: dict, model: Model, dataset: Dataset, rng: SeededRng) -> dict:
    text, audio = _model_inputs(dataset)
    eval_set = Dataset(text, audio, dataset.labels, dataset.noise_levels)
    metrics = evaluate_model(model, eval_set, config["eval.n_draws"], rng.derive("metrics"))
    summary = {
        "family": model.config.family,
        "seed": config["seed"],
        "spearman": None,
        "per_bucket": [],
        **metrics,
    }
    if dataset.noise_levels is not None:
        report = heteroscedasticity_report(
            model, eval_set, config["eval.n_draws"], rng.derive("hetero")
        )
        summary["spearman"] = report["spearman"]
        summary["per_bucket"] = report["buckets"]
    return summary


def cmd_eval(config: dict, out: Path, args) -> int:
    model = load_checkpoint(args.checkpoint)
    dataset = _load_dataset(config)
    if len(dataset) == 0:
        raise DataError("cannot evaluate on an empty dataset")
    text, audio = _model_inputs(dataset)
    if text.shape[1] != model.config.text_dim or audio.shape[1] != model.config.audio_dim:
        raise DataError(
            f"dataset features ({text.shape[1]}, {audio.shape[1]}) do not match "
            f"checkpoint ({model.config.text_dim}, {model.config.audio_dim})"
        )
    if int(dataset.labels.max()) >= model.config.n_classes:
        raise DataError(
            f"dataset has label {int(dataset.labels.max())} but checkpoint "
            f"expects {model.config.n_classes} classes"
        )
    summary = _eval_summary(config, model, dataset, SeededRng(config["seed"]).derive("eval"))
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "eval.json", summary)
    _write_csv(
        out / "metrics.csv",
        ["family", "seed", "auc", "nll", "ece", "accuracy", "spearman"],
        [[
            summary["family"], summary["seed"], _fmt(summary["auc"]), _fmt(summary["nll"]),
            _fmt(summary["ece"]), _fmt(summary["accuracy"]), _fmt(summary["spearman"]),
        ]],
    )
    _write_config_echo(config, out)
    print(
        f"family={summary['family']} auc={summary['auc']:.4f} "
        f"nll={summary['nll']:.4f} ece={summary['ece']:.4f} "
        f"spearman={summary['spearman'] if summary['spearman'] is None else round(summary['spearman'], 4)}"
    )
    return 0


def _mean_sd(values):
    present = [v for v in values if v is not None]
    if not present:
        return None, None
    mean = float(np.mean(present))
    sd = float(np.std(present))
    return mean, sd


def cmd_compare(config: dict, out: Path, args) -> int:
    dataset = _load_dataset(config)
    folds = kfold_split(len(dataset), config["eval.folds"], config["seed"])
    families = config["compare.families"]
    seeds = config["compare.seeds"]
    metric_names = ("auc", "nll", "ece", "spearman")
    rows = []
    for family in families:
        for seed in seeds:
            for fold_index, (train_idx, test_idx) in enumerate(folds):
                train_set = dataset.subset(train_idx)
                test_set = dataset.subset(test_idx)
                model = _build_model(config, dataset, family, seed)
                text, audio = _model_inputs(train_set)
                train(
                    model,
                    text,
                    audio,
                    train_set.labels,
                    cfgmod.train_config(config),
                    SeededRng(seed).derive("train", family, fold_index),
                )
                run_config = dict(config, seed=seed)
                summary = _eval_summary(
                    run_config,
                    model,
                    test_set,
                    SeededRng(seed).derive("eval", family, fold_index),
                )
                row = {"family": family, "seed": seed, "fold": fold_index}
                row.update({m: summary[m] for m in metric_names})
                rows.append(row)
                print(
                    f"{family} seed={seed} fold={fold_index} "
                    f"auc={row['auc']:.4f} nll={row['nll']:.4f}"
                )
    csv_rows = [
        [r["family"], r["seed"], r["fold"]] + [_fmt(r[m]) for m in metric_names]
        for r in rows
    ]
    summaries = {}
    for family in families:
        family_rows = [r for r in rows if r["family"] == family]
        stats = {}
        for m in metric_names:
            stats[m] = _mean_sd([r[m] for r in family_rows])
        summaries[family] = stats
        for kind, pick in (("mean", 0), ("sd", 1)):
            csv_rows.append(
                [family, "all", kind]
                + [_fmt(stats[m][pick]) for m in metric_names]
            )
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(out / "compare.csv", ["family", "seed", "fold"] + list(metric_names), csv_rows)
    table = _format_table(families, metric_names, summaries)
    _write_text(out / "compare.txt", table)
    _write_config_echo(config, out)
    print(table, end="")
    return 0


def _format_table(families, metric_names, summaries) -> str:
    def cell(stat):
        mean, sd = stat
        if mean is None:
            return "-"
        return f"{mean:.4f} ± {sd:.4f}"

    header = ["family"] + list(metric_names)
    body = [
        [family] + [cell(summaries[family][m]) for m in metric_names]
        for family in families
    ]
    widths = [
        max(len(row[i]) for row in [header] + body) for i in range(len(header))
    ]
    lines = [
        "  ".join(h.ljust(w) for h, w in zip(header, widths)).rstrip(),
        "  ".join("-" * w for w in widths),
    ]
    for row in body:
        lines.append("  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip())
    return "\n".join(lines) + "\n"


def cmd_grad_check(config: dict, out: Path, args) -> int:
    dataset = _load_dataset(config)
    batch = dataset.subset(np.arange(min(len(dataset), config["train.batch_size"])))
    seed = config["seed"]
    results = {}
    all_pass = True
    for family in config["compare.families"]:
        model = _build_model(config, dataset, family, seed)
        text, audio = _model_inputs(batch)
        report = gradient_check(
            model,
            text,
            audio,
            batch.labels,
            cfgmod.train_config(config),
            SeededRng(seed).derive("grad-check", family),
            n_coordinates=args.coordinates,
        )
        passed = report["max_rel_error"] < args.tolerance
        all_pass = all_pass and passed
        results[family] = {
            "max_rel_error": report["max_rel_error"],
            "n_coordinates": report["n_coordinates"],
            "worst": report["worst"],
            "pass": passed,
        }
        worst = report["worst"]
        print(
            f"{family}: max_rel_error={report['max_rel_error']:.3e} "
            f"over {report['n_coordinates']} coordinates "
            f"(worst {worst['tensor']}[{worst['index']}]) "
            f"{'PASS' if passed else 'FAIL'}"
        )
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        _write_json(out / "grad-check.json", {"tolerance": args.tolerance, "families": results})
        _write_config_echo(config, out)
    if not all_pass:
        raise NumericError(f"gradient check exceeded tolerance {args.tolerance}")
    return 0


COMMANDS = {
    "generate-data": cmd_generate_data,
    "train": cmd_train,
    "eval": cmd_eval,
    "compare": cmd_compare,
    "grad-check": cmd_grad_check,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cocolora",
        description="Context-conditioned Bayesian low-rank adapters: "
        "data generation, training, evaluation, and comparison.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", default=None, help="key = value config file")
        p.add_argument("--seed", type=int, default=None, help="master seed override")
        p.add_argument("--out", default="cocolora-out", help="output directory")
        if name == "eval":
            p.add_argument("--checkpoint", required=True, help="CCLR checkpoint to evaluate")
        if name == "grad-check":
            p.add_argument("--tolerance", type=float, default=GRAD_CHECK_TOLERANCE)
            p.add_argument("--coordinates", type=int, default=200)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args, extras = parser.parse_known_args(argv)
    overrides = []
    for item in extras:
        if item.startswith("--") and "=" in item:
            overrides.append(item[2:])
        else:
            print(f"error: unrecognized argument '{item}'", file=sys.stderr)
            return 2
    try:
        file_values = cfgmod.load_config_file(args.config) if args.config else None
        config = cfgmod.resolve(file_values, overrides, args.seed)
        return COMMANDS[args.command](config, Path(args.out), args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 4
    except OSError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
