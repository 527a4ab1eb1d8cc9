"""Command-line subcommands: train, eval, attack, certify, ensemble, bound, gap, gradcheck"""

import argparse
import json
import os
import sys

import numpy as np

from dataio.class_gap import class_gap, gap_values
from dataio.dataset_cache import load_dataset
from dataio.idx_format import load_idx
from dataio.synthetic import synth_corners
from ensemble.ensemble_format import is_manifest, load_ensemble, save_ensemble
from ensemble.ensemble_manager import EnsembleManager
from ensemble.ensemble_model import EnsembleModel
from layers.grad_suite import run_grad_suite
from layers.model_format import load_model, read_model_bytes, read_model_tags, save_model
from robustness.attack import AttackConfig
from robustness.bounds import parse_delta_grid, theorem2_margin_bound, theorem3_bound
from robustness.certify import radius_matrix, sample_margins
from robustness.evaluate import EvalManager
from training.train_manager import TrainManager
from utils.config import apply_overrides, format_defaults, load_config, parse_set_flags
from utils.errors import ConfigError, DataError, LinfError
from utils.logger import setup_logger
from utils.net_types import EXIT_CODES
from utils.parallel import resolve_threads

COMMANDS = ["train", "eval", "attack", "certify", "ensemble", "bound", "gap", "gradcheck"]

# Dedicated flags and the config keys they set
FLAG_KEYS = {
    "out": "out",
    "seed": "seed",
    "epsilon": "epsilon",
    "threads": "threads",
    "model": "model",
    "report": "report",
    "metrics": "metrics",
    "log_level": "log_level",
    "theorem": "theorem",
    "t": "bound_t",
    "r": "bound_r",
    "C": "bound_C",
    "rho": "rho_file",
    "margins": "margins_file",
    "delta_grid": "delta_grid",
    "m": "ensemble_m",
    "mode": "ensemble_mode",
    "base_seed": "base_seed",
    "limit": "gap_limit",
    "units": "gap_units",
    "configs": "gradcheck_configs",
}


class ArgumentParser(argparse.ArgumentParser):
    """argparse that reports bad usage as a ConfigError instead of exiting"""

    def error(self, message):
        raise ConfigError(message)


def build_parser():
    epilog = "exit codes:\n" + "\n".join(f"  {code}  {text}" for code, text in EXIT_CODES.items())
    parser = ArgumentParser(prog="linfcert", description="Certified l_inf-distance networks", epilog=epilog,
                            formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--print-defaults", action="store_true", help="Print every config key and exit")
    sub = parser.add_subparsers(dest="command", parser_class=ArgumentParser)

    common = ArgumentParser(add_help=False)
    common.add_argument("--config", help="key=value config file")
    common.add_argument("--set", action="append", metavar="KEY=VALUE", help="Override any config key")
    common.add_argument("--out")
    common.add_argument("--seed", type=int)
    common.add_argument("--epsilon", type=float)
    common.add_argument("--threads", type=int)
    common.add_argument("--model", help="Model file or ensemble manifest")
    common.add_argument("--report", help="JSON report path")
    common.add_argument("--metrics", help="Metrics JSON Lines path")
    common.add_argument("--log-level", dest="log_level")

    sub.add_parser("train", parents=[common], help="Train one network")
    for name in ("eval", "attack", "certify"):
        sub.add_parser(name, parents=[common], help=f"{name.capitalize()} a model on the test set")
    ens = sub.add_parser("ensemble", parents=[common], help="Train an ensemble")
    ens.add_argument("--m", type=int)
    ens.add_argument("--mode", choices=["fusion", "voting"])
    ens.add_argument("--base-seed", dest="base_seed", type=int)
    bound = sub.add_parser("bound", parents=[common], help="Evaluate a certified-error bound")
    bound.add_argument("--theorem", type=int, choices=[2, 3])
    bound.add_argument("--t", type=float)
    bound.add_argument("--r", type=float)
    bound.add_argument("--C", type=float)
    bound.add_argument("--rho", help="JSON n x m radius matrix")
    bound.add_argument("--margins", help="JSON list of margins")
    bound.add_argument("--delta-grid", dest="delta_grid", help="start:stop:count or a comma list")
    gap = sub.add_parser("gap", parents=[common], help="Class gap of the training set")
    gap.add_argument("--limit", type=int)
    gap.add_argument("--full", action="store_true", help="Use every sample (quadratic cost)")
    gap.add_argument("--units", choices=["auto", "raw", "features"])
    grad = sub.add_parser("gradcheck", parents=[common], help="Randomized gradient checks")
    grad.add_argument("--configs", type=int)
    return parser


def resolve_config(args):
    """Config file first, then --set pairs, then dedicated flags"""
    cfg = load_config(args.config)
    cfg = apply_overrides(cfg, parse_set_flags(args.set))
    flags = {key: getattr(args, flag) for flag, key in FLAG_KEYS.items() if getattr(args, flag, None) is not None}
    if getattr(args, "full", False):
        flags["gap_full"] = True
    cfg = apply_overrides(cfg, flags)
    return cfg.validate()


def load_datasets(cfg):
    """(train, test) datasets; test is None when not configured"""
    if cfg.dataset == "corners":
        train = synth_corners(cfg.corners_k, cfg.corners_d, cfg.corners_gap, cfg.corners_n, seed=cfg.data_seed)
        test = synth_corners(cfg.corners_k, cfg.corners_d, cfg.corners_gap, cfg.corners_test_n,
                             seed=cfg.data_seed + 1)
    elif cfg.dataset == "cache":
        if not cfg.train_cache:
            raise ConfigError("train_cache is not set")
        train = load_dataset(cfg.train_cache)
        test = load_dataset(cfg.test_cache) if cfg.test_cache else None
    else:
        if not cfg.train_images or not cfg.train_labels:
            raise ConfigError("train_images and train_labels must be set for dataset=idx")
        train = load_idx(cfg.train_images, cfg.train_labels, k=10, name="train")
        test = None
        if cfg.test_images and cfg.test_labels:
            test = load_idx(cfg.test_images, cfg.test_labels, k=10, name="test")
    train = train.head(cfg.train_limit)
    if test is not None:
        test = test.head(cfg.test_limit)
    return train, test


def load_any_model(path, threads=1):
    """A Network, or an EnsembleModel when path is a manifest"""
    if not path:
        raise ConfigError("No model given; use --model")
    if is_manifest(path):
        return load_ensemble(path, threads=threads)
    return load_model(path)


def _sibling(path, name):
    return os.path.join(os.path.dirname(os.path.abspath(path)), name)


def _write_json(path, data):
    with open(path, "w", encoding="utf-8") as f:
        f.write(json.dumps(data, indent=2) + "\n")


def cmd_train(cfg, logger, threads):
    train_set, test_set = load_datasets(cfg)
    metrics_path = cfg.metrics or _sibling(cfg.out, "metrics.jsonl")
    result = TrainManager(cfg.to_train_config(), logger=logger, metrics_path=metrics_path).train(train_set, test_set)
    tags = {"seed": cfg.seed, "epsilon": cfg.epsilon, "ema": "false"}
    save_model(result.network, cfg.out, tags=tags)
    logger.info(f"Saved model to {cfg.out}")
    if result.ema is not None:
        stem, ext = os.path.splitext(cfg.out)
        ema_path = f"{stem}.ema{ext or '.lnfc'}"
        save_model(result.evaluation_network(), ema_path, tags=dict(tags, ema="true"))
        logger.info(f"Saved EMA shadow model to {ema_path}")
    last = result.metrics[-1]
    print(f"epochs={len(result.metrics)} loss={last['loss']:.4f} clean={100 * last['clean']:.2f} "
          f"certified={100 * last['certified']:.2f} ema={str(last['ema']).lower()}")
    return 0


def cmd_eval_certify(cfg, logger, threads, command="eval"):
    """eval runs PGD and certification, certify only certification, attack only PGD"""
    model = load_any_model(cfg.model, threads)
    train_set, test_set = load_datasets(cfg)
    dataset = test_set if test_set is not None else train_set

    metadata = {"epsilon": cfg.epsilon, "seed": cfg.seed, "command": command}
    if not isinstance(model, EnsembleModel):
        tags = read_model_tags(read_model_bytes(cfg.model))
        metadata["ema"] = tags.get("ema") == "true"
    attack_cfg = None
    if command != "certify":
        attack_cfg = AttackConfig(cfg.epsilon, steps=cfg.attack_steps,
                                  step_size=cfg.attack_step_size or None,
                                  restarts=cfg.attack_restarts, seed=cfg.attack_seed)
    report = EvalManager(logger, threads).evaluate(model, dataset, cfg.epsilon, attack_cfg,
                                                   certify=command != "attack",
                                                   attack=command != "certify", metadata=metadata)
    report_path = cfg.report or "report.json"
    report.save(report_path)
    print(report.format_table())
    logger.info(f"Wrote report to {report_path}")
    return 0


def cmd_ensemble(cfg, logger, threads):
    train_set, test_set = load_datasets(cfg)
    metrics_dir = os.path.dirname(os.path.abspath(cfg.metrics or cfg.out))
    manager = EnsembleManager(cfg.to_train_config(), logger=logger, threads=threads, metrics_dir=metrics_dir)
    ensemble, _ = manager.train(train_set, cfg.ensemble_m, cfg.resolved_base_seed(), test_set, cfg.ensemble_mode)
    save_ensemble(ensemble, cfg.out)
    logger.info(f"Saved ensemble manifest to {cfg.out}")

    dataset = test_set if test_set is not None else train_set
    evaluator = EvalManager(logger, threads)
    rows = []
    for idx, base in enumerate(ensemble.bases):
        report = evaluator.evaluate(base, dataset, cfg.epsilon, attack=False)
        rows.append((f"base{idx}", report))
    rows.append((f"{ensemble.mode}", evaluator.evaluate(ensemble, dataset, cfg.epsilon, attack=False)))
    print(f"{'model':>8} {'Standard':>9} {'Certified':>9}")
    for name, report in rows:
        certified = "-" if report.certified is None else f"{100 * report.certified:.2f}"
        print(f"{name:>8} {100 * report.clean:>9.2f} {certified:>9}")
    if cfg.report:
        _write_json(cfg.report, {name: report.to_dict() for name, report in rows})
    return 0


def _read_json_array(path, what):
    try:
        with open(path, "r", encoding="utf-8") as f:
            return np.asarray(json.load(f), dtype=np.float64)
    except (OSError, ValueError) as e:
        raise DataError(f"Cannot read {what} file {path}: {e}") from e


def cmd_bound(cfg, logger, threads):
    if cfg.theorem == 3:
        if cfg.rho_file:
            rho = _read_json_array(cfg.rho_file, "rho")
        else:
            model = load_any_model(cfg.model, threads)
            if not isinstance(model, EnsembleModel):
                raise ConfigError("Ensemble bound needs --rho or an ensemble manifest as --model")
            train_set, _ = load_datasets(cfg)
            rho = radius_matrix(model.bases, train_set.features, train_set.labels, threads)
        report = theorem3_bound(rho, cfg.bound_r, cfg.bound_t)
    else:
        grid = parse_delta_grid(cfg.delta_grid)
        if cfg.margins_file:
            margins = _read_json_array(cfg.margins_file, "margins")
            width = max(cfg.hidden_widths, default=1)
            depth = len(cfg.hidden_widths) + 1
        else:
            model = load_any_model(cfg.model, threads)
            train_set, _ = load_datasets(cfg)
            margins = sample_margins(model, train_set.features, train_set.labels, threads)
            nets = model.bases if isinstance(model, EnsembleModel) else [model]
            width, depth = max(net.width for net in nets), max(net.depth for net in nets)
        report = theorem2_margin_bound(margins, cfg.bound_r, grid, width, depth, t=cfg.bound_t, C=cfg.bound_C)

    report_path = cfg.report or "bound.json"
    report.save(report_path)
    print(report.format_table())
    logger.info(f"Wrote bound report to {report_path}")
    return 0


def cmd_gap(cfg, logger, threads):
    train_set, _ = load_datasets(cfg)
    limit = 0 if cfg.gap_full else cfg.gap_limit
    _, units = gap_values(train_set, cfg.gap_units)
    gap = class_gap(train_set, limit=limit, units=cfg.gap_units, threads=threads)
    raw_gap, unit_gap = (gap, gap / 255.0) if units == "raw" else (gap * 255.0, gap)
    n = train_set.n if not limit else min(limit, train_set.n)
    print(f"samples={n} gap_raw={raw_gap:.4g} gap_unit={unit_gap:.6f}")
    if cfg.report:
        _write_json(cfg.report, {"samples": n, "units": units, "gap": gap,
                                 "gap_raw": raw_gap, "gap_unit": unit_gap})
    logger.info(f"Class gap over {n} samples: {gap} ({units} units)")
    return 0


def cmd_gradcheck(cfg, logger, threads):
    results = run_grad_suite(cfg.gradcheck_configs, seed=cfg.seed, tol=cfg.gradcheck_tol)
    failed = 0
    print(f"{'case':>16} {'max_rel_err':>12} {'checked':>8} {'pass':>5}")
    for kind, report in results:
        failed += not report.passed
        print(f"{kind:>16} {report.max_rel_err:>12.3e} {report.checked:>8} {str(report.passed).lower():>5}")
    logger.info(f"Gradient check: {len(results) - failed}/{len(results)} passed")
    return 0 if failed == 0 else 1


HANDLERS = {
    "train": cmd_train,
    "ensemble": cmd_ensemble,
    "bound": cmd_bound,
    "gap": cmd_gap,
    "gradcheck": cmd_gradcheck,
}


def run(argv=None):
    """Parse argv, run one subcommand, return its exit code"""
    logger = None
    try:
        args = build_parser().parse_args(argv)
        if args.print_defaults:
            print(format_defaults())
            return 0
        if args.command is None:
            raise ConfigError(f"Missing subcommand; expected one of {', '.join(COMMANDS)}")
        cfg = resolve_config(args)
        logger = setup_logger(cfg.log_level, cfg.log_dir)
        threads = resolve_threads(cfg.threads)
        logger.info(f"Running '{args.command}' with {threads} thread(s)")
        if args.command in ("eval", "attack", "certify"):
            return cmd_eval_certify(cfg, logger, threads, args.command)
        return HANDLERS[args.command](cfg, logger, threads)
    except LinfError as e:
        message = " ".join(str(e).split())
        print(f"error code={e.exit_code} kind={type(e).__name__} message={message}", file=sys.stderr)
        if logger is not None:
            logger.error(f"{type(e).__name__}: {message}")
        return e.exit_code
    except Exception as e:  # noqa: BLE001
        message = " ".join(str(e).split())
        print(f"error code=1 kind={type(e).__name__} message={message}", file=sys.stderr)
        if logger is not None:
            logger.exception("Unexpected failure")
        return 1
