"""Command-line pipeline: prepare, synth, train, predict, cross-validate,
benchmark, grid-search, report.

Exit codes: 0 success, 1 runtime failure (config / data / numeric / io,
stated in the message), 2 usage error.  Results go to files and stdout;
progress lines go to stderr.  Every command that writes outputs also
drops a ``manifest.json`` (config echo, seed, versions, wall time) next
to them.  ``QSCALE_SEED`` supplies the default seed.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__, data, experiments, models
from .errors import ConfigurationError, DataError, TrainingDivergedError

_CONFIG_FIELDS = set(models.TrainConfig.__dataclass_fields__)


def _log(message: str) -> None:
    print(message, file=sys.stderr)


def _env_seed() -> Optional[int]:
    raw = os.environ.get("QSCALE_SEED")
    if raw is None or raw == "":
        return None
    try:
        return int(raw)
    except ValueError:
        raise ConfigurationError(f"QSCALE_SEED must be an integer, got {raw!r}")


def _read_json(path_str: str, what: str) -> dict:
    path = Path(path_str)
    if not path.exists():
        raise DataError(f"{what} file not found: {path}")
    try:
        payload = json.loads(path.read_text())
    except json.JSONDecodeError as err:
        raise ConfigurationError(f"{what} file {path} is not valid JSON: {err}")
    if not isinstance(payload, dict):
        raise ConfigurationError(f"{what} file {path} must hold a JSON object")
    return payload


def _load_dataset(path_str: str) -> data.CalibrationDataset:
    path = Path(path_str)
    if not path.exists():
        raise DataError(f"dataset file not found: {path}")
    return data.dataset_from_csv(path)


def _split_settings(payload: dict) -> tuple[dict, dict]:
    """Split a flat settings dict into TrainConfig fields and model options."""
    config = {k: v for k, v in payload.items() if k in _CONFIG_FIELDS}
    options = {k: v for k, v in payload.items() if k not in _CONFIG_FIELDS}
    if "features" in options:
        options["features"] = tuple(options["features"])
    if "hidden_sizes" in options:
        options["hidden_sizes"] = tuple(options["hidden_sizes"])
    return config, options


def _gather_settings(args) -> tuple[dict, dict]:
    """Config file first, then command-line overrides on top."""
    payload = _read_json(args.config, "config") if getattr(args, "config", None) else {}
    config, options = _split_settings(payload)
    for field, flag in (
        ("epochs", "epochs"),
        ("learning_rate", "learning_rate"),
        ("optimizer", "optimizer"),
        ("loss", "loss"),
        ("batch_size", "batch_size"),
        ("window", "window"),
    ):
        value = getattr(args, flag, None)
        if value is not None:
            config[field] = value
    if getattr(args, "features", None):
        options["features"] = tuple(
            name.strip() for name in args.features.split(",") if name.strip()
        )
    return config, options


def _resolve_seed(args, config: dict) -> int:
    if getattr(args, "seed", None) is not None:
        return int(args.seed)
    if "seed" in config:
        return int(config["seed"])
    env = _env_seed()
    return env if env is not None else 0


def _write_manifest(
    out_dir: Path, command: str, settings: dict, seed: int, started: float
) -> Path:
    manifest = {
        "command": command,
        "settings": models._jsonable(settings),
        "seed": seed,
        "versions": {
            "python": sys.version.split()[0],
            "numpy": np.__version__,
            "qscale": __version__,
        },
        "wall_time_s": time.monotonic() - started,
    }
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n")
    return path


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---------------------------------------------------------------------------
# command handlers


def _cmd_prepare(args) -> int:
    started = time.monotonic()
    out = _out_dir(args)
    dataset, report, malformed = data.prepare_dataset(
        args.sensors, args.reference, granularity=args.granularity
    )
    data.dataset_to_csv(dataset, out / "dataset.csv")
    _log(
        f"prepared {report.n_hours} hours "
        f"({report.interpolated_cells} interpolated cells, "
        f"{report.dropped_rows} dropped rows, {malformed} malformed input rows)"
    )
    _write_manifest(
        out,
        "prepare",
        {
            "sensors": list(args.sensors),
            "reference": args.reference,
            "granularity": args.granularity,
            "n_hours": report.n_hours,
            "interpolated_cells": report.interpolated_cells,
            "dropped_rows": report.dropped_rows,
            "malformed_rows": malformed,
        },
        seed=0,
        started=started,
    )
    return 0


def _cmd_synth(args) -> int:
    started = time.monotonic()
    out = _out_dir(args)
    seed = _resolve_seed(args, {})
    profile_payload = (
        _read_json(args.profile, "profile") if args.profile else {}
    )
    try:
        profile = data.SynthProfile(**profile_payload)
    except TypeError as err:
        raise ConfigurationError(f"bad profile field: {err}")
    campaign = data.synthesize(seed, args.hours, profile)
    paths = data.write_campaign(campaign, out)
    dataset, report, _ = data.prepare_dataset(
        [paths["sensors"]], paths["reference"]
    )
    data.dataset_to_csv(dataset, out / "dataset.csv")
    _log(
        f"synthesized {args.hours} hours -> {out} "
        f"({report.n_hours} prepared rows)"
    )
    _write_manifest(
        out,
        "synth",
        {"hours": args.hours, "profile": models._jsonable(profile_payload)},
        seed=seed,
        started=started,
    )
    return 0


def _cmd_train(args) -> int:
    started = time.monotonic()
    out = _out_dir(args)
    dataset = _load_dataset(args.data)
    config_fields, options = _gather_settings(args)
    seed = _resolve_seed(args, config_fields)
    config_fields["seed"] = seed
    config = models.config_from_dict(config_fields, kind=args.model)
    train_set, test_set = data.chronological_split(dataset, args.train_fraction)
    _log(
        f"training {args.model} on {len(train_set)} hours "
        f"({config.epochs} epochs), testing on {len(test_set)} hours"
    )
    model, history = models.fit_model(args.model, train_set, config, options)
    sub = test_set.select_features(model.feature_names)
    x, y, _ = data.make_windows(sub, config.window)
    if y.size == 0:
        raise DataError("test partition has no full windows; lower --window")
    losses = models.evaluate_losses(model, x, y)
    models.save_model(model, out / "model.json")
    report = experiments.MetricsReport(
        model_kind=args.model,
        config=models.config_to_dict(config),
        options=models._jsonable(model.options),
        seed=seed,
        param_count=model.param_count(),
        test_losses=losses,
        series=models.predictions_rows(model, test_set),
        train_history=history,
    )
    experiments.emit_report(report, out)
    settings = dict(models.config_to_dict(config))
    settings.update(models._jsonable(model.options))
    settings["train_fraction"] = args.train_fraction
    settings["model"] = args.model
    settings["data"] = args.data
    _write_manifest(out, "train", settings, seed=seed, started=started)
    print(json.dumps(losses, sort_keys=True))
    return 0


def _cmd_predict(args) -> int:
    started = time.monotonic()
    out = _out_dir(args)
    model_path = Path(args.model_file)
    if not model_path.exists():
        raise DataError(f"model checkpoint not found: {model_path}")
    model = models.load_model(model_path)
    dataset = _load_dataset(args.data)
    rows = models.predictions_rows(model, dataset)
    if not rows:
        raise DataError("no prediction windows fit in the dataset")
    data.predictions_to_csv(rows, out / "predictions.csv")
    _log(f"wrote {len(rows)} predictions to {out / 'predictions.csv'}")
    _write_manifest(
        out,
        "predict",
        {"model_file": str(model_path), "data": args.data, "rows": len(rows)},
        seed=0,
        started=started,
    )
    return 0


def _cmd_cross_validate(args) -> int:
    started = time.monotonic()
    out = _out_dir(args)
    dataset = _load_dataset(args.data)
    config_fields, options = _gather_settings(args)
    seed = _resolve_seed(args, config_fields)
    config_fields["seed"] = seed
    config = models.config_from_dict(config_fields, kind=args.model)
    default_spec = experiments.protocol_fold_spec(args.model, seed)
    spec = experiments.FoldSpec(
        args.folds if args.folds is not None else default_spec.k,
        args.fold_mode if args.fold_mode is not None else default_spec.mode,
        args.fold_seed if args.fold_seed is not None else seed,
    )
    _log(
        f"cross-validating {args.model}: {spec.k} {spec.mode} folds over "
        f"{len(dataset)} hours"
    )
    report = experiments.cross_validate(
        args.model, dataset, config, spec, options=options, n_threads=args.threads
    )
    if args.benchmark_draws > 0:
        sample_size = len(dataset) // spec.k
        bench = experiments.benchmark_uncalibrated(
            dataset,
            config.loss,
            sample_size=sample_size,
            n_draws=args.benchmark_draws,
            seed=seed,
        )
        report.benchmark = bench.summary()
    experiments.emit_report(report, out)
    settings = dict(models.config_to_dict(config))
    settings.update(models._jsonable(options))
    settings.update(
        {
            "model": args.model,
            "data": args.data,
            "fold_spec": report.fold_spec,
            "benchmark_draws": args.benchmark_draws,
        }
    )
    _write_manifest(out, "cross-validate", settings, seed=seed, started=started)
    if report.fold_average is not None:
        print(json.dumps(report.fold_average, sort_keys=True))
    else:
        print(json.dumps({"error": "all folds failed"}, sort_keys=True))
    return 0


def _cmd_benchmark(args) -> int:
    started = time.monotonic()
    dataset = _load_dataset(args.data)
    seed = _resolve_seed(args, {})
    result = experiments.benchmark_uncalibrated(
        dataset,
        args.loss,
        sample_size=args.sample_size,
        n_draws=args.draws,
        seed=seed,
    )
    print(repr(result.full_loss))
    if args.out:
        out = _out_dir(args)
        report = experiments.MetricsReport(
            model_kind="uncalibrated",
            config={"loss": args.loss},
            options={},
            seed=seed,
            benchmark=result.summary(),
        )
        experiments.emit_report(report, out)
        _write_manifest(
            out,
            "benchmark",
            {
                "data": args.data,
                "loss": args.loss,
                "sample_size": result.sample_size,
                "draws": args.draws,
            },
            seed=seed,
            started=started,
        )
    return 0


def _cmd_grid_search(args) -> int:
    started = time.monotonic()
    out = _out_dir(args)
    dataset = _load_dataset(args.data)
    grid_payload = _read_json(args.grid, "grid")
    for axis, values in grid_payload.items():
        if not isinstance(values, list):
            raise ConfigurationError(f"grid axis {axis!r} must be a JSON list")
    grid = {
        axis: [tuple(v) if isinstance(v, list) else v for v in values]
        for axis, values in grid_payload.items()
    }
    config_fields, options = _gather_settings(args)
    seed = _resolve_seed(args, config_fields)
    config_fields["seed"] = seed
    base_config = models.config_from_dict(config_fields, kind=args.model)
    _log(f"grid search over {experiments.grid_size(grid)} configurations")
    result = experiments.grid_search(
        args.model,
        dataset,
        grid,
        base_config=base_config,
        options=options,
        train_fraction=args.train_fraction,
        rank_loss=args.rank_loss,
        seed=seed,
        n_threads=args.threads,
    )
    (out / "grid.json").write_text(
        json.dumps(result.to_dict(), sort_keys=True, indent=2) + "\n"
    )
    settings = {
        "model": args.model,
        "data": args.data,
        "grid": models._jsonable(grid),
        "train_fraction": args.train_fraction,
        "rank_loss": args.rank_loss,
    }
    _write_manifest(out, "grid-search", settings, seed=seed, started=started)
    best = result.best
    print(json.dumps(best if best is not None else {"error": "no config succeeded"},
                     sort_keys=True))
    return 0


def _cmd_report(args) -> int:
    payload = _read_json(args.report_file, "report")
    lines = [
        f"model: {payload.get('model_kind', '?')}",
        f"schema: {payload.get('schema_version', '?')}",
        f"seed: {payload.get('seed', '?')}",
        f"trainable parameters: {payload.get('param_count', 'n/a')}",
    ]
    for fold in payload.get("folds") or []:
        if "error" in fold:
            lines.append(f"fold {fold['fold']}: FAILED ({fold['error']})")
        else:
            lines.append(
                f"fold {fold['fold']}: l1={fold['l1']:.6g} "
                f"mse={fold['mse']:.6g} rmse={fold['rmse']:.6g}"
            )
    average = payload.get("fold_average")
    if average:
        lines.append(
            f"fold average: l1={average['l1']:.6g} "
            f"mse={average['mse']:.6g} rmse={average['rmse']:.6g}"
        )
    test_losses = payload.get("test_losses")
    if test_losses:
        lines.append(
            f"test: l1={test_losses['l1']:.6g} "
            f"mse={test_losses['mse']:.6g} rmse={test_losses['rmse']:.6g}"
        )
    bench = payload.get("benchmark")
    if bench:
        lines.append(
            f"benchmark ({bench['loss_kind']}): mean={bench['mean']:.6g} "
            f"std={bench['std']:.6g} full={bench['full_loss']:.6g}"
        )
    print("\n".join(lines))
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qscale",
        description="PM2.5 sensor calibration with classical and quantum models.",
    )
    parser.add_argument("--version", action="version", version=f"qscale {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prepare", help="ingest raw sensor/reference CSVs")
    p.add_argument("--sensors", nargs="+", required=True, help="raw sample CSV paths")
    p.add_argument("--reference", required=True, help="reference instrument CSV")
    p.add_argument("--granularity", choices=("hour", "minute"), default="hour")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(handler=_cmd_prepare)

    p = sub.add_parser("synth", help="generate a synthetic campaign")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--hours", type=int, default=720)
    p.add_argument("--profile", default=None, help="JSON file of distortion fields")
    p.add_argument("--out", required=True)
    p.set_defaults(handler=_cmd_synth)

    def add_train_flags(p):
        p.add_argument("--model", required=True, choices=models.MODEL_KINDS)
        p.add_argument("--data", required=True, help="prepared dataset CSV")
        p.add_argument("--config", default=None, help="JSON settings file")
        p.add_argument("--epochs", type=int, default=None)
        p.add_argument("--learning-rate", dest="learning_rate", type=float, default=None)
        p.add_argument("--optimizer", choices=("sgd", "adam", "rmsprop"), default=None)
        p.add_argument("--loss", choices=("l1", "mse"), default=None)
        p.add_argument("--batch-size", dest="batch_size", type=int, default=None)
        p.add_argument("--window", type=int, default=None)
        p.add_argument("--features", default=None, help="comma-separated feature names")
        p.add_argument("--seed", type=int, default=None)

    p = sub.add_parser("train", help="train one model on a chronological split")
    add_train_flags(p)
    p.add_argument("--train-fraction", type=float, default=0.75)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=_cmd_train)

    p = sub.add_parser("predict", help="run a saved model over a dataset")
    p.add_argument("--model-file", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=_cmd_predict)

    p = sub.add_parser("cross-validate", help="k-fold evaluation protocol")
    add_train_flags(p)
    p.add_argument("--folds", type=int, default=None)
    p.add_argument("--fold-mode", choices=experiments.FOLD_MODES, default=None)
    p.add_argument("--fold-seed", type=int, default=None)
    p.add_argument("--benchmark-draws", type=int, default=1000)
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=_cmd_cross_validate)

    p = sub.add_parser("benchmark", help="uncalibrated sensor-vs-reference loss")
    p.add_argument("--data", required=True)
    p.add_argument("--loss", choices=("l1", "mse", "rmse"), default="l1")
    p.add_argument("--sample-size", dest="sample_size", type=int, default=None)
    p.add_argument("--draws", type=int, default=1000)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(handler=_cmd_benchmark)

    p = sub.add_parser("grid-search", help="exhaustive hyperparameter search")
    add_train_flags(p)
    p.add_argument("--grid", required=True, help="JSON file: axis -> value list")
    p.add_argument("--train-fraction", type=float, default=0.75)
    p.add_argument("--rank-loss", choices=("l1", "mse", "rmse"), default="l1")
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=_cmd_grid_search)

    p = sub.add_parser("report", help="print a saved report")
    p.add_argument("--report-file", required=True)
    p.set_defaults(handler=_cmd_report)

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exit_request:  # --help (0) or usage error (2)
        return int(exit_request.code or 0)
    try:
        return args.handler(args)
    except ConfigurationError as err:
        _log(f"config error: {err}")
        return 1
    except DataError as err:
        _log(f"data error: {err}")
        return 1
    except TrainingDivergedError as err:
        _log(f"numeric error: {err}")
        return 1
    except OSError as err:
        _log(f"io error: {err}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
