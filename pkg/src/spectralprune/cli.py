"""Command-line interface.

Subcommands: train, prune, recover, ablate, eval, run, inspect.
Exit codes: 0 success, 2 config error, 3 numeric error, 4 IO error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import ablation as ablation_mod
from . import data as data_mod
from . import experiment, graphs, nn, pruning, spectral
from .config import ExperimentConfig
from .errors import ConfigError, DataIOError, NumericError


def _load_cfg(args):
    cfg = ExperimentConfig.from_file(args.config)
    return cfg


def _seed(cfg, args):
    return args.seed if args.seed is not None else cfg.seed


def _out_dir(cfg, args):
    out = args.out or cfg.output_dir
    os.makedirs(out, exist_ok=True)
    return out


def cmd_run(args):
    cfg = _load_cfg(args)
    report = experiment.run_experiment(cfg, seed_override=args.seed, out_dir=args.out)
    print(json.dumps(report["metrics"], indent=2, sort_keys=True))
    return 0


def cmd_train(args):
    cfg = _load_cfg(args)
    seed = _seed(cfg, args)
    out = _out_dir(cfg, args)
    dataset = experiment.build_dataset(cfg, seed)
    network = nn.init_network(
        cfg.model_sizes(),
        activations=cfg.model_activations(),
        head=cfg.values["model.head"],
        seed=seed,
    )
    trained, metrics = nn.train(network, dataset.split("train"), cfg.train_config(seed))
    test_metric = nn.evaluate(trained, dataset.split("test"))
    path = os.path.join(out, "baseline.spnet")
    nn.save_checkpoint(trained, path, metadata={"seed": seed, "history": metrics})
    print(f"saved {path}; test metric {test_metric:.4f}")
    return 0


def cmd_eval(args):
    cfg = _load_cfg(args)
    seed = _seed(cfg, args)
    network = nn.load_checkpoint(args.checkpoint)
    dataset = experiment.build_dataset(cfg, seed)
    metric = nn.evaluate(network, dataset.split(args.split))
    print(f"{args.split} metric: {metric:.6f}")
    return 0


def cmd_prune(args):
    cfg = _load_cfg(args)
    seed = _seed(cfg, args)
    out = _out_dir(cfg, args)
    network = nn.load_checkpoint(args.checkpoint)
    dataset = experiment.build_dataset(cfg, seed)
    prune_cfg = experiment.prune_config_from(cfg, dataset, seed)
    compact, history = pruning.prune(network, prune_cfg)
    experiment.write_score_csvs(history, out)
    nn.save_checkpoint(
        compact,
        os.path.join(out, "pruned.spnet"),
        metadata={"seed": seed, "rho_final": history.rho_trajectory[-1]},
    )
    report = {
        "prune_history": experiment.history_as_dict(history),
        "rho_trajectory": history.rho_trajectory,
        "config": cfg.to_text(),
    }
    experiment.write_report(report, os.path.join(out, "prune_report.json"))
    print(f"rho trajectory: {[round(r, 4) for r in history.rho_trajectory]}")
    return 0


def cmd_recover(args):
    cfg = _load_cfg(args)
    seed = _seed(cfg, args)
    out = _out_dir(cfg, args)
    network = nn.load_checkpoint(args.checkpoint)
    dataset = experiment.build_dataset(cfg, seed)
    recovered, metrics = pruning.recover(
        network, dataset.split("train"), cfg.recover_config(seed)
    )
    metric = nn.evaluate(recovered, dataset.split("test"))
    path = os.path.join(out, "recovered.spnet")
    nn.save_checkpoint(recovered, path, metadata={"seed": seed, "history": metrics})
    print(f"saved {path}; test metric {metric:.4f}")
    return 0


def cmd_ablate(args):
    cfg = _load_cfg(args)
    seed = _seed(cfg, args)
    out = _out_dir(cfg, args)
    network = nn.load_checkpoint(args.checkpoint)
    dataset = experiment.build_dataset(cfg, seed)
    calib = dataset.calibration(n=cfg.get_int("prune.calibration_n", 512), seed=seed)
    dataset.audit_split_hygiene(calib.indices)
    protocol = cfg.ablation_protocol(seed)
    scores = experiment.score_all_hidden_layers(network, calib, cfg)
    record = ablation_mod.ablate_and_measure(
        network, protocol, scores, dataset.split("validation")
    )
    experiment.write_ablation_csvs(record, out)
    with open(os.path.join(out, "ablation_summary.json"), "w") as f:
        json.dump(record.summary, f, indent=2, sort_keys=True)
        f.write("\n")
    print(json.dumps(record.summary, indent=2, sort_keys=True))
    return 0


def cmd_inspect(args):
    cfg = _load_cfg(args)
    seed = _seed(cfg, args)
    out = _out_dir(cfg, args)
    network = nn.load_checkpoint(args.checkpoint)
    dataset = experiment.build_dataset(cfg, seed)
    calib = dataset.calibration(n=cfg.get_int("prune.calibration_n", 512), seed=seed)
    from . import collect

    eps = cfg.get_float("prune.epsilon", 1e-8)
    for l in range(network.num_hidden):
        pre, post = collect.collect_observations(network, calib, l)
        pre_std = collect.standardize(pre, epsilon=eps)
        post_std = collect.standardize(post, epsilon=eps)
        scores, dist, graph_in, graph_out = spectral.score_layer(
            pre_std, post_std, k=cfg.get_int("prune.k", None), s=cfg.get_int("prune.s", None)
        )
        spectral.save_scores_csv(scores, os.path.join(out, f"scores_layer{l}.csv"))
        graphs.save_edge_list(graph_in, os.path.join(out, f"graph_in_layer{l}.txt"))
        graphs.save_edge_list(graph_out, os.path.join(out, f"graph_out_layer{l}.txt"))
        print(
            f"layer {l}: {scores.node_scores.size} units, "
            f"top eigenvalue {dist.eigenvalues[0]:.4g}, gamma {dist.gamma:.3g}"
        )
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="spectralprune")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, needs_checkpoint=False, extra=None):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", default=None)
        if needs_checkpoint:
            p.add_argument("--checkpoint", required=True)
        if extra:
            extra(p)
        p.set_defaults(func=func)
        return p

    add("run", cmd_run)
    add("train", cmd_train)
    add("prune", cmd_prune, needs_checkpoint=True)
    add("recover", cmd_recover, needs_checkpoint=True)
    add("ablate", cmd_ablate, needs_checkpoint=True)
    add(
        "eval",
        cmd_eval,
        needs_checkpoint=True,
        extra=lambda p: p.add_argument("--split", default="test"),
    )
    add("inspect", cmd_inspect, needs_checkpoint=True)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 3
    except (DataIOError, OSError) as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
