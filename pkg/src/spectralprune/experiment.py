"""Experiment orchestration: train -> prune -> recover -> report."""

from __future__ import annotations

import csv
import json
import os
import time

import numpy as np

from . import ablation as ablation_mod
from . import data as data_mod
from . import nn, pruning, spectral
from .errors import ConfigError


def resolve_data_path(path):
    """Relative dataset paths resolve against SPECTRALPRUNE_DATA_DIR if set."""
    cache = os.environ.get("SPECTRALPRUNE_DATA_DIR")
    if cache and not os.path.isabs(path) and not os.path.exists(path):
        return os.path.join(cache, path)
    return path


def build_dataset(cfg, seed):
    source = cfg.values["dataset.source"]
    if source == "idx-files":
        images = resolve_data_path(cfg.values.get("dataset.images", ""))
        labels = resolve_data_path(cfg.values.get("dataset.labels", ""))
        if not images or not labels:
            raise ConfigError("idx-files source needs dataset.images and dataset.labels")
        ds = data_mod.load_idx(images, labels)
    elif source == "csv":
        path = resolve_data_path(cfg.values.get("dataset.path", ""))
        if not path:
            raise ConfigError("csv source needs dataset.path")
        ds = load_csv(path, cfg.values.get("dataset.task", "classification"))
    elif source == "synthetic-blobs":
        ds = data_mod.generate_blobs(
            classes=cfg.get_int("dataset.classes", 2),
            dim=cfg.get_int("dataset.dim", 2),
            separation=cfg.get_float("dataset.separation", 6.0),
            n=cfg.get_int("dataset.n", 1000),
            seed=seed,
        )
    else:
        ds = data_mod.generate_regression(
            dim=cfg.get_int("dataset.dim", 4),
            out_dim=cfg.get_int("dataset.out_dim", 1),
            n=cfg.get_int("dataset.n", 1000),
            noise=cfg.get_float("dataset.noise", 0.0),
            seed=seed,
        )
    if cfg.values.get("model.head", "classification") == "reconstruction":
        splits = ds.splits
        ds = data_mod.as_reconstruction(ds)
        ds.splits = splits
    ds.make_splits(
        test_fraction=cfg.get_float("dataset.test_fraction", 0.2),
        validation_fraction=cfg.get_float("dataset.validation_fraction", 0.1),
        seed=seed,
    )
    return ds


def load_csv(path, task):
    """CSV dataset: last column is the integer label for classification,
    every column is a feature (and its own target) for reconstruction."""
    try:
        raw = np.loadtxt(path, delimiter=",", ndmin=2)
    except OSError as exc:
        raise ConfigError(f"cannot read csv {path}: {exc}") from exc
    if task == "classification":
        return data_mod.Dataset(raw[:, :-1], raw[:, -1].astype(np.intp), task=task)
    return data_mod.Dataset(raw, raw, task="reconstruction")


def prune_config_from(cfg, dataset, seed):
    calib = dataset.calibration(n=cfg.get_int("prune.calibration_n", 512), seed=seed)
    dataset.audit_split_hygiene(calib.indices)
    return pruning.PruneConfig(
        rho_target=cfg.get_float("prune.rho_target"),
        iterations=cfg.get_int("prune.iterations"),
        k=cfg.get_int("prune.k", None),
        s=cfg.get_int("prune.s", None),
        gamma=cfg.get_float("prune.gamma", None),
        epsilon=cfg.get_float("prune.epsilon", 1e-8),
        policy=cfg.values.get("prune.policy", "proportional"),
        rng_seed=seed,
        resample_calibration=cfg.get_bool("prune.resample_calibration"),
        calibration=calib,
        calibration_source=dataset,
    )


def history_as_dict(history):
    return {
        "original_params": history.original_params,
        "iterations": [
            {
                "iteration": rec.iteration,
                "removed": {str(l): ids for l, ids in rec.removed.items()},
                "rho": rec.rho,
                "param_count": rec.param_count,
                "scored_units": {
                    str(l): int(v.size) for l, v in rec.score_snapshots.items()
                },
            }
            for rec in history.iterations
        ],
    }


def write_score_csvs(history, out_dir):
    for rec in history.iterations:
        for l, snapshot in rec.score_snapshots.items():
            scores = spectral.ImportanceScores(l, {}, snapshot)
            path = os.path.join(out_dir, f"scores_iter{rec.iteration}_layer{l}.csv")
            spectral.save_scores_csv(scores, path)


def write_ablation_csvs(record, out_dir):
    with open(os.path.join(out_dir, "ablation_trials.csv"), "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["trial", "group", "layer", "unit_ids", "baseline", "ablated", "drop"])
        for idx, t in enumerate(record.trials):
            writer.writerow(
                [idx, t.group, t.layer, " ".join(map(str, t.unit_ids)),
                 repr(t.baseline), repr(t.ablated), repr(t.drop)]
            )
    with open(os.path.join(out_dir, "ablation_long.csv"), "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["group", "trial", "drop"])
        counters = {}
        for t in record.trials:
            j = counters.get(t.group, 0)
            counters[t.group] = j + 1
            writer.writerow([t.group, j, repr(t.drop)])


def score_all_hidden_layers(network, calib, cfg):
    from . import collect

    scores = {}
    eps = cfg.get_float("prune.epsilon", 1e-8)
    for l in ablation_mod.analyzable_layers(network, cfg.get_int("ablation.group_size")):
        pre, post = collect.collect_observations(network, calib, l)
        pre_std = collect.standardize(pre, epsilon=eps)
        post_std = collect.standardize(post, epsilon=eps)
        layer_scores, _, _, _ = spectral.score_layer(
            pre_std, post_std, k=cfg.get_int("prune.k", None), s=cfg.get_int("prune.s", None)
        )
        scores[l] = layer_scores
    return scores


def run_experiment(cfg, seed_override=None, out_dir=None):
    """Full pipeline; returns the report dict and writes artifacts to out_dir."""
    seed = cfg.seed if seed_override is None else seed_override
    out_dir = out_dir or cfg.output_dir
    os.makedirs(out_dir, exist_ok=True)

    dataset = build_dataset(cfg, seed)
    train_split = dataset.split("train")
    test_split = dataset.split("test")

    network = nn.init_network(
        cfg.model_sizes(),
        activations=cfg.model_activations(),
        head=cfg.values["model.head"],
        seed=seed,
    )
    trained, train_metrics = nn.train(network, train_split, cfg.train_config(seed))
    baseline_metric = nn.evaluate(trained, test_split)

    prune_cfg = prune_config_from(cfg, dataset, seed)
    compact, history = pruning.prune(trained, prune_cfg)
    pre_recovery_metric = nn.evaluate(compact, test_split)

    recovered, recovery_metrics = pruning.recover(
        compact, train_split, cfg.recover_config(seed), history
    )
    final_metric = nn.evaluate(recovered, test_split)

    report = {
        "config": cfg.to_text(),
        "seed": seed,
        "dataset": {
            "n": dataset.n,
            "splits": {k: int(v.size) for k, v in dataset.splits.items()},
        },
        "metrics": {
            "baseline": baseline_metric,
            "pre_recovery": pre_recovery_metric,
            "final": final_metric,
        },
        "train_metrics": train_metrics,
        "recovery_metrics": recovery_metrics,
        "params": {
            "original": history.original_params,
            "final": nn.param_count(recovered),
        },
        "rho_trajectory": history.rho_trajectory,
        "rho_final": history.rho_trajectory[-1],
        "prune_history": history_as_dict(history),
    }

    if cfg.get_bool("ablation.enabled"):
        protocol = cfg.ablation_protocol(seed)
        scores = score_all_hidden_layers(trained, prune_cfg.calibration, cfg)
        record = ablation_mod.ablate_and_measure(
            trained, protocol, scores, dataset.split("validation")
        )
        report["ablation"] = record.summary
        write_ablation_csvs(record, out_dir)

    write_score_csvs(history, out_dir)
    nn.save_checkpoint(
        recovered,
        os.path.join(out_dir, "final.spnet"),
        metadata={"seed": seed, "rho_final": history.rho_trajectory[-1]},
    )
    write_report(report, os.path.join(out_dir, "report.json"))
    return report


def write_report(report, path):
    payload = dict(report)
    payload["timestamp"] = time.strftime("%Y-%m-%dT%H:%M:%S", time.gmtime())
    with open(path, "w") as f:
        json.dump(payload, f, indent=2, sort_keys=True)
        f.write("\n")


def report_without_timestamps(report):
    return {k: v for k, v in report.items() if k != "timestamp"}
