"""Command-line entry point: ``blackbox-ranking {verify,bench,landscape,bias,train}``.

Every command accepts ``--seed``, ``--out``, ``--format {csv,json}`` and
``--config FILE``.  The config file holds ``key = value`` lines (``#`` starts
a comment); keys are the long option names of the command, with dashes or
underscores.  Explicit flags override the file.

Exit codes: 0 success, 1 verification failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from pathlib import Path

from . import bench as bench_mod
from .harness import LossKind, SynthParams, TrainConfig, TrainingDiverged, generate, train
from .landscape import LandscapeProblem, sample_landscape
from .oracle import batch_bias_experiment, make_bias_dataset
from .verification import SUITES, run_suites

EXIT_OK, EXIT_FAILED, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _floats(text: str) -> list[float]:
    return [float(x) for x in str(text).split(",") if x.strip()]


def _ints(text: str) -> list[int]:
    return [int(float(x)) for x in str(text).split(",") if x.strip()]


def _optional_int(text):
    if text is None or str(text).strip().lower() in ("none", ""):
        return None
    return int(text)


def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    value = str(text).strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"not a boolean: {text}")


# name -> (type, default, help); shared by flag parsing and config-file parsing
COMMON = {
    "seed": (int, 0, "random seed"),
    "out": (str, None, "output file (directory for landscape); stdout if omitted"),
    "format": (str, "csv", "output format: csv or json"),
}

COMMANDS = {
    "verify": {
        "suite": (str, "", f"comma-separated subset of: {', '.join(SUITES)}"),
        "trials": (_optional_int, None, "override the per-suite trial count"),
    },
    "bench": {
        "lengths": (_ints, list(bench_mod.DEFAULT_LENGTHS), "comma-separated sequence lengths"),
        "repeats": (int, 5, "timed repetitions per length"),
        "positives_fraction": (float, 0.01, "fraction of relevant items"),
        "alpha": (float, 0.15, "margin of the timed loss; the zero-margin variant is always reported too"),
        "lam": (float, 0.5, "interpolation strength"),
    },
    "landscape": {
        "n_dims": (int, 20, "length of the score vector"),
        "lambdas": (_floats, [0.001, 0.003, 0.01, 0.03], "comma-separated interpolation strengths"),
        "grid": (int, 101, "points per axis"),
        "extent": (float, 1.0, "half-width of the section in score units"),
    },
    "bias": {
        "items": (int, 1000, "dataset size"),
        "classes": (int, 10, "number of classes"),
        "separation": (float, 1.0, "mean score shift of positives"),
        "batch_sizes": (_ints, [2, 4, 8, 16, 32, 64, 128, 256, 500], "comma-separated batch sizes"),
        "trials": (int, 100, "sampled batches per size"),
    },
    "train": {
        "loss": (str, TrainConfig.loss.value, "one of: " + ", ".join(k.value for k in LossKind)),
        "alpha": (float, TrainConfig.alpha, "margin"),
        "lam": (float, TrainConfig.lam, "interpolation strength"),
        "memory": (int, TrainConfig.memory, "number of past batches kept in score memory"),
        "batch_size": (int, TrainConfig.batch_size, "batch size"),
        "samples_per_class": (int, TrainConfig.samples_per_class, "items per class in a batch"),
        "embed_dim": (int, TrainConfig.embed_dim, "embedding dimension"),
        "learning_rate": (float, TrainConfig.learning_rate, "Adam step size"),
        "steps": (int, TrainConfig.steps, "optimisation steps"),
        "eval_every": (int, TrainConfig.eval_every, "evaluation cadence in steps"),
        "lr_decay_step": (_optional_int, TrainConfig.lr_decay_step, "step after which the learning rate is decayed"),
        "lr_decay_factor": (float, TrainConfig.lr_decay_factor, "learning-rate decay factor"),
        "weight_decay": (float, TrainConfig.weight_decay, "L2 weight decay"),
        "differentiate_relevant_rank": (_bool, False, "also differentiate the within-relevant rank in the recall loss"),
        "classes": (int, SynthParams.num_classes, "synthetic classes"),
        "per_class": (int, SynthParams.per_class, "items per class"),
        "input_dim": (int, SynthParams.input_dim, "input dimension"),
        "spread": (float, SynthParams.cluster_spread, "cluster noise level"),
        "data_seed": (_optional_int, None, "dataset seed (defaults to --seed)"),
    },
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="blackbox-ranking", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, options in COMMANDS.items():
        p = sub.add_parser(name)
        p.add_argument("--config", help="key = value config file")
        for key, (typ, _, help_) in {**COMMON, **options}.items():
            kwargs = dict(dest=key, default=argparse.SUPPRESS, help=help_)
            if key == "format":
                kwargs["choices"] = ["csv", "json"]
            p.add_argument("--" + key.replace("_", "-"), type=typ, **kwargs)
    return parser


def read_config(path: str, command: str) -> dict:
    """Parse a ``key = value`` file, converting values with the command's option types."""
    options = {**COMMON, **COMMANDS[command]}
    values = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc}") from exc
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in options:
            raise UsageError(f"{path}:{lineno}: unknown key '{key}' for command '{command}'")
        try:
            values[key] = options[key][0](value)
        except (ValueError, argparse.ArgumentTypeError) as exc:
            raise UsageError(f"{path}:{lineno}: bad value for '{key}': {exc}") from exc
    return values


def resolve(args: argparse.Namespace) -> dict:
    options = {**COMMON, **COMMANDS[args.command]}
    settings = {key: default for key, (_, default, _) in options.items()}
    if getattr(args, "config", None):
        settings.update(read_config(args.config, args.command))
    settings.update({k: v for k, v in vars(args).items() if k in options})
    if settings["format"] not in ("csv", "json"):
        raise UsageError(f"unknown format {settings['format']!r}")
    return settings


def _emit(settings, header, rows, extra=None, preamble=None):
    """Write rows as CSV (optional preamble rows first) or as JSON."""
    if settings["format"] == "json":
        doc = dict(extra or {})
        doc["rows"] = [dict(zip(header, row)) for row in rows]
        text = json.dumps(doc, indent=2) + "\n"
    else:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        for row in preamble or ():
            writer.writerow(row)
        writer.writerow(header)
        writer.writerows(rows)
        text = buf.getvalue()
    out = settings["out"]
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def cmd_verify(settings) -> int:
    names = [s.strip() for s in settings["suite"].split(",") if s.strip()]
    unknown = [n for n in names if n not in SUITES]
    if unknown:
        raise UsageError(f"unknown suite(s): {', '.join(unknown)}; choose from {', '.join(SUITES)}")
    results = run_suites(names, seed=settings["seed"], trials=settings["trials"])
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        print(f"{status} {r.name:<8} {r.trials - r.failures}/{r.trials} ok  max_error={r.max_error:.3g}  ({r.seconds:.2f}s)",
              file=sys.stderr)
    if settings["out"] is not None or settings["format"] == "json":
        header = ["suite", "passed", "trials", "failures", "max_error"]
        rows = [[r.name, r.passed, r.trials, r.failures, r.max_error] for r in results]
        _emit(settings, header, rows, {"passed": all(r.passed for r in results)})
    return EXIT_OK if all(r.passed for r in results) else EXIT_FAILED


def cmd_bench(settings) -> int:
    alphas = [settings["alpha"]] if settings["alpha"] == 0 else [settings["alpha"], 0.0]
    rows = bench_mod.run_bench(
        settings["lengths"], settings["repeats"], settings["positives_fraction"],
        alphas, settings["lam"], settings["seed"],
    )
    header = ["length", "median_ms", "p10_ms", "p90_ms", "alpha"]
    _emit(settings, header, [[r.length, round(r.median_ms, 3), round(r.p10_ms, 3), round(r.p90_ms, 3), r.alpha] for r in rows])
    return EXIT_OK


def cmd_landscape(settings) -> int:
    problem = LandscapeProblem.random(settings["n_dims"], settings["seed"])
    out_dir = Path(settings["out"] or ".")
    out_dir.mkdir(parents=True, exist_ok=True)
    header = ["u", "v", "true_loss", "surrogate_loss"]
    for lam in settings["lambdas"]:
        grid = sample_landscape(problem, lam, settings["grid"], settings["extent"])
        path = out_dir / f"landscape_lambda_{lam:g}.{settings['format']}"
        rows = [[float(u), float(v), float(t), float(s)] for u, v, t, s in grid.rows()]
        _emit({**settings, "out": path}, header, rows, {"lambda": lam, "n_dims": settings["n_dims"], "seed": settings["seed"]})
        print(f"wrote {path}", file=sys.stderr)
    return EXIT_OK


def cmd_bias(settings) -> int:
    scores, labels = make_bias_dataset(settings["items"], settings["classes"], settings["separation"], settings["seed"])
    sizes = settings["batch_sizes"]
    if any(b < 1 or b > settings["items"] for b in sizes):
        raise UsageError(f"batch sizes must lie in 1..{settings['items']}")
    curve = batch_bias_experiment(scores, labels, sizes, settings["trials"], settings["seed"])
    rows = [[int(b), float(m), float(s)] for b, m, s in zip(curve.batch_sizes, curve.mean_map, curve.std_map)]
    _emit(settings, ["batch_size", "mean_map", "std_map"], rows,
          {"dataset_map": curve.dataset_map}, preamble=[["dataset_map", curve.dataset_map]])
    return EXIT_OK


def cmd_train(settings) -> int:
    try:
        loss = LossKind(settings["loss"])
    except ValueError:
        raise UsageError(f"unknown loss {settings['loss']!r}") from None
    data_seed = settings["seed"] if settings["data_seed"] is None else settings["data_seed"]
    params = SynthParams(settings["classes"], settings["per_class"], settings["input_dim"], settings["spread"], data_seed)
    try:
        config = TrainConfig(
            loss=loss, alpha=settings["alpha"], lam=settings["lam"], memory=settings["memory"],
            batch_size=settings["batch_size"], samples_per_class=settings["samples_per_class"],
            embed_dim=settings["embed_dim"], learning_rate=settings["learning_rate"], steps=settings["steps"],
            seed=settings["seed"], weight_decay=settings["weight_decay"], lr_decay_step=settings["lr_decay_step"],
            lr_decay_factor=settings["lr_decay_factor"], eval_every=settings["eval_every"],
            differentiate_relevant_rank=settings["differentiate_relevant_rank"],
        )
        dataset = generate(params)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    try:
        result = train(config, dataset)
    except TrainingDiverged as exc:
        print(f"training diverged: {exc}", file=sys.stderr)
        return EXIT_FAILED
    header = ["step", "loss", "r_at_1", "r_at_4", "map"]
    rows = [[h.step, h.loss, h.r_at_1, h.r_at_4, h.map] for h in result.history]
    best = result.best
    _emit(settings, header, rows, {"best": dict(zip(header, [best.step, best.loss, best.r_at_1, best.r_at_4, best.map]))})
    final = result.history[-1]
    print(f"final step {final.step}: R@1 {final.r_at_1:.4f}  R@4 {final.r_at_4:.4f}  mAP {final.map:.4f}", file=sys.stderr)
    print(f"best  step {best.step}: R@1 {best.r_at_1:.4f}  R@4 {best.r_at_4:.4f}  mAP {best.map:.4f}", file=sys.stderr)
    return EXIT_OK


HANDLERS = {
    "verify": cmd_verify,
    "bench": cmd_bench,
    "landscape": cmd_landscape,
    "bias": cmd_bias,
    "train": cmd_train,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        settings = resolve(args)
        return HANDLERS[args.command](settings)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
