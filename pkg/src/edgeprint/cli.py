"""Command-line entry point: ``edgeprint <subcommand>``.

Exit codes: 0 success, 2 configuration error, 3 data error.
"""
import argparse
import logging
import os
import sys

from . import __version__, capture, classify, ids, pipeline
from .config import RunManifest, load_config
from .features import (
    DISPLAY_NAMES,
    FEATURE_NAMES,
    InsufficientDataError,
    check_names,
    read_feature_table,
    relief_f,
    write_feature_table,
)
from .physim import ConfigError
from .util import atomic_write_text, sha256_file

log = logging.getLogger("edgeprint")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3


class DataError(Exception):
    pass


def _config(args, required=False):
    if args.config is None:
        if required:
            raise ConfigError(f"{args.command} needs --config")
        return None
    return load_config(args.config)


def _seed(args, default):
    return args.seed if args.seed is not None else default


def _manifest(args, cfg, seeds, inputs, outputs):
    m = RunManifest(
        command=args.command,
        config_sha256=cfg.digest if cfg else "",
        seeds=seeds,
        inputs={os.path.basename(p): sha256_file(p) for p in inputs},
        outputs={os.path.basename(p): sha256_file(p) for p in outputs},
    )
    path = outputs[0] + ".manifest.json"
    atomic_write_text(path, m.to_json())
    return path


def _out(args, cfg, key, default):
    if args.output:
        return args.output
    if cfg and key in cfg.outputs:
        return cfg.outputs[key]
    return default


def _read(fn, path):
    try:
        return fn(path)
    except FileNotFoundError:
        raise DataError(f"no such file: {path}") from None
    except (ValueError, classify.ModelError, capture.CaptureLogError) as exc:
        raise DataError(f"{path}: {exc}") from None


def _read_text(path):
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def cmd_simulate(args):
    cfg = _config(args, required=True)
    seed = _seed(args, cfg.seed)
    count = args.per_id_count or cfg.per_id_count
    caps = pipeline.simulate(cfg.bus, count, seed)
    out = _out(args, cfg, "capture_log", "capture.bin")
    capture.write_capture_log(out, pipeline.capture_log(caps, cfg.bus))
    _manifest(args, cfg, {"simulate": seed}, [], [out])
    log.info("wrote %d messages to %s", len(caps), out)
    return EXIT_OK


def cmd_extract(args):
    cfg = _config(args)
    data = _read(capture.read_capture_log, args.log)
    rows = pipeline.rows_from_log(data)
    out = _out(args, cfg, "features", "features.csv")
    write_feature_table(out, rows)
    _manifest(args, cfg, {}, [args.log], [out])
    log.info("wrote %d feature rows to %s", len(rows), out)
    return EXIT_OK


def format_weights(weights):
    lines = ["rank\tfeature\tweight"]
    for i, name in enumerate(weights.ranked(), start=1):
        lines.append(f"{i}\t{DISPLAY_NAMES[name]}\t{weights[name]:.6f}")
    return "\n".join(lines) + "\n"


def cmd_rank(args):
    cfg = _config(args)
    seed = _seed(args, cfg.seed if cfg else 0)
    k = args.relief_k or (cfg.relief_k if cfg else 10)
    rows = _read(read_feature_table, args.features)
    x, labels = pipeline.dataset(rows, FEATURE_NAMES)
    try:
        weights = relief_f(x, labels, k, args.iterations, seed)
    except InsufficientDataError as exc:
        raise DataError(str(exc)) from None
    out = _out(args, cfg, "weights", "weights.txt")
    text = format_weights(weights)
    atomic_write_text(out, text)
    _manifest(args, cfg, {"relief_f": seed}, [args.features], [out])
    sys.stdout.write(text)
    return EXIT_OK


def _feature_names(args, cfg):
    if getattr(args, "all_features", False):
        return FEATURE_NAMES
    if getattr(args, "feature_names", None):
        return check_names(args.feature_names.split(","))
    return cfg.features if cfg else check_names(("mean", "rms", "max"))


def format_crossval(cv, n_folds, k, names):
    lines = [
        f"folds={n_folds}",
        f"k={k}",
        f"features={','.join(names)}",
    ]
    lines += [f"fold_{i}_accuracy={a!r}" for i, a in enumerate(cv.fold_accuracies, start=1)]
    lines.append(f"mean_accuracy={cv.mean_accuracy!r}")
    lines.append("")
    lines.append("pooled confusion matrix (rows actual, columns predicted, row-normalised):")
    lines.append(cv.pooled.format())
    for i, m in enumerate(cv.matrices, start=1):
        lines.append("")
        lines.append(f"fold {i} counts:")
        lines.append(m.format(normalized=False))
    return "\n".join(lines) + "\n"


def cmd_crossval(args):
    cfg = _config(args)
    seed = _seed(args, cfg.seed if cfg else 0)
    n_folds = args.folds or (cfg.folds if cfg else 5)
    k = args.k or (cfg.k if cfg else 5)
    names = _feature_names(args, cfg)
    rows = _read(read_feature_table, args.features)
    x, labels = pipeline.dataset(rows, names)
    try:
        cv = classify.kfold_cv(x, labels, n_folds, k, seed, names)
    except classify.ModelError as exc:
        raise DataError(str(exc)) from None
    out = _out(args, cfg, "crossval", "crossval.txt")
    text = format_crossval(cv, n_folds, k, names)
    atomic_write_text(out, text)
    outputs = [out]
    if args.model_out:
        classify.save_model(args.model_out, classify.train(x, labels, k, names))
        outputs.append(args.model_out)
    _manifest(args, cfg, {"folds": seed}, [args.features], outputs)
    sys.stdout.write(text)
    return EXIT_OK


def _table_path(path):
    stem, _ = os.path.splitext(path)
    return stem + ".table.txt"


def cmd_detect(args):
    cfg = _config(args, required=True)
    sc = cfg.scenario
    kind = args.scenario or sc.kind
    seed = _seed(args, sc.seed)
    if sc.spoofed_id is None:
        raise ConfigError("scenario.spoofed_id is required for detect")
    if args.model:
        model = _read(classify.read_model, args.model)
        inputs = [args.model]
    elif args.features:
        names = _feature_names(args, cfg)
        rows = _read(read_feature_table, args.features)
        x, labels = pipeline.dataset(rows, names)
        model = classify.train(x, labels, cfg.k, names)
        inputs = [args.features]
    else:
        raise ConfigError("detect needs --model or --features")
    registry = ids.SenderRegistry.from_config(cfg.bus)
    try:
        if kind == "compromised":
            if sc.attacker is None:
                raise ConfigError("scenario.attacker is required for the compromised scenario")
            stream = ids.scenario_compromised(cfg.bus, sc.attacker, sc.spoofed_id,
                                              sc.attack_count, sc.normal_count, seed)
        else:
            if sc.foreign is None:
                raise ConfigError("scenario.foreign is required for the unmonitored scenario")
            stream = ids.scenario_unmonitored(cfg.bus, sc.foreign, sc.spoofed_id,
                                              sc.attack_count, sc.normal_count, seed,
                                              trained_labels=model.classes)
    except ids.ScenarioError as exc:
        raise ConfigError(str(exc)) from None
    rep = ids.evaluate(model, registry, stream, cfg.bus, sc.on_unregistered)
    out = _out(args, cfg, "report", "report.txt")
    atomic_write_text(out, rep.to_text())
    table = _table_path(out)
    atomic_write_text(table, rep.to_table())
    _manifest(args, cfg, {"scenario": seed}, inputs, [out, table])
    sys.stdout.write(rep.to_table())
    return EXIT_OK


def cmd_report(args):
    cfg = _config(args)
    chunks = []
    for path in args.reports:
        try:
            rep = ids.DetectionReport.from_text(_read(_read_text, path))
        except ValueError as exc:
            raise DataError(f"{path}: {exc}") from None
        chunks.append(f"{os.path.basename(path)}\n{rep.to_table()}")
    text = "\n".join(chunks)
    if args.output:
        atomic_write_text(args.output, text)
        _manifest(args, cfg, {}, args.reports, [args.output])
    sys.stdout.write(text)
    return EXIT_OK


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="experiment configuration (YAML)")
    common.add_argument("--seed", type=int, help="override the configured seed")
    common.add_argument("-o", "--output", help="output path")

    p = argparse.ArgumentParser(prog="edgeprint", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", parents=[common], help="synthesize traffic and write a capture log")
    s.add_argument("--per-id-count", type=int, help="messages per arbitration id")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("extract", parents=[common], help="capture log -> feature table")
    s.add_argument("log")
    s.set_defaults(func=cmd_extract)

    s = sub.add_parser("rank", parents=[common], help="Relief-F feature ranking")
    s.add_argument("features")
    s.add_argument("--relief-k", type=int, help="neighbours per class (default 10)")
    s.add_argument("--iterations", type=int, help="sampled instances (default all)")
    s.set_defaults(func=cmd_rank)

    s = sub.add_parser("crossval", parents=[common], help="stratified K-fold k-NN evaluation")
    s.add_argument("features")
    s.add_argument("-K", "--folds", type=int)
    s.add_argument("-k", type=int)
    s.add_argument("--feature-names", help="comma separated subset (default mean,rms,max)")
    s.add_argument("--all-features", action="store_true", help="use all eight statistics")
    s.add_argument("--model-out", help="also train on all rows and save the model")
    s.set_defaults(func=cmd_crossval)

    s = sub.add_parser("detect", parents=[common], help="run an attack scenario against a model")
    s.add_argument("--model")
    s.add_argument("--features", help="train the model from this feature table")
    s.add_argument("--scenario", choices=("compromised", "unmonitored"))
    s.add_argument("--feature-names")
    s.add_argument("--all-features", action="store_true")
    s.set_defaults(func=cmd_detect)

    s = sub.add_parser("report", parents=[common], help="render detection reports as tables")
    s.add_argument("reports", nargs="+")
    s.set_defaults(func=cmd_report)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
