"""Iterative pruning controller.

Schedules per-layer unit budgets toward a target parameter-reduction
ratio, re-scores surviving units under the current architecture at every
iteration, removes the lowest-scoring units with no intermediate weight
updates, and runs the single recovery fine-tuning stage at the end.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import collect, nn, spectral
from .errors import ConfigError


def default_floor(original_units):
    return max(2, int(np.ceil(0.05 * original_units)))


@dataclass
class PruneConfig:
    rho_target: float
    iterations: int = 5
    prunable_layers: list | None = None  # None -> all hidden layers
    per_layer_floor: dict | None = None  # layer -> min surviving units
    calibration: object = None  # CalibrationSet
    k: int | None = None
    s: int | None = None
    gamma: float | None = None
    epsilon: float = collect.DEFAULT_EPSILON
    policy: str = "proportional"  # | "global-pool"
    rng_seed: int = 0
    resample_calibration: bool = False
    calibration_source: object = None  # Dataset, used when resampling

    def __post_init__(self):
        if not 0.0 < self.rho_target < 1.0:
            raise ConfigError("rho_target must lie in (0, 1)")
        if self.iterations < 1:
            raise ConfigError("iterations must be >= 1")
        if self.policy not in ("proportional", "global-pool"):
            raise ConfigError(f"unknown allocation policy {self.policy!r}")

    def resolved_layers(self, network):
        layers = self.prunable_layers
        if layers is None:
            layers = list(range(network.num_hidden))
        if not layers:
            raise ConfigError("prunable_layers must be nonempty")
        for l in layers:
            if not 0 <= l < network.num_hidden:
                raise ConfigError(f"layer {l} is not a hidden layer")
        return list(layers)

    def resolved_floors(self, network, layers):
        floors = {}
        for l in layers:
            m = network.layers[l].out_units
            floor = default_floor(m) if self.per_layer_floor is None else self.per_layer_floor[l]
            if floor < 2:
                raise ConfigError("per-layer floor must be >= 2")
            floors[l] = floor
        return floors


@dataclass
class IterationRecord:
    iteration: int
    removed: dict  # layer -> list of unit ids (indices in the pre-surgery model)
    score_snapshots: dict  # layer -> node-score array
    rho: float
    param_count: int


@dataclass
class PruneHistory:
    original_params: int
    iterations: list = field(default_factory=list)
    recovery_metrics: list | None = None

    @property
    def rho_trajectory(self):
        return [rec.rho for rec in self.iterations]


def effective_reduction(original, current):
    """rho = 1 - P(current) / P(original)."""
    return 1.0 - nn.param_count(current) / nn.param_count(original)


def _params_after_removal(sizes, removal_counts, prunable):
    """Parameter count of the architecture after removing units per layer.

    sizes = [input, hidden..., output]; removal_counts maps hidden layer
    index -> units removed.
    """
    dims = list(sizes)
    for l in prunable:
        dims[l + 1] -= removal_counts.get(l, 0)
    return sum(o * i + o for i, o in zip(dims, dims[1:]))


def plan_iteration_budgets(config, network):
    """Per-iteration, per-layer removal counts under the proportional policy.

    Every prunable layer loses the same fraction of its original units;
    the fraction is found by bisection so the final rho is the smallest
    achievable value >= rho_target. Totals are split across iterations as
    evenly as possible, earlier iterations taking the remainder.
    """
    layers = config.resolved_layers(network)
    floors = config.resolved_floors(network, layers)
    sizes = [network.input_dim] + [l.out_units for l in network.layers]
    orig_units = {l: network.layers[l].out_units for l in layers}
    p0 = nn.param_count(network)

    def counts_for(frac):
        return {
            l: min(int(np.floor(frac * orig_units[l] + 1e-9)), orig_units[l] - floors[l])
            for l in layers
        }

    def rho_for(counts):
        return 1.0 - _params_after_removal(sizes, counts, layers) / p0

    max_rho = rho_for(counts_for(1.0))
    if max_rho < config.rho_target:
        raise ConfigError(
            f"rho_target {config.rho_target} unreachable under floors; "
            f"maximum achievable rho is {max_rho:.4f}"
        )
    lo, hi = 0.0, 1.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if rho_for(counts_for(mid)) >= config.rho_target:
            hi = mid
        else:
            lo = mid
    totals = counts_for(hi)

    budgets = []
    for t in range(config.iterations):
        budgets.append({})
    for l in layers:
        q, r = divmod(totals[l], config.iterations)
        for t in range(config.iterations):
            budgets[t][l] = q + (1 if t < r else 0)
    return budgets


def select_prune_set(scores, count):
    """The `count` lowest node-score units; ties by ascending unit index."""
    n = scores.node_scores.size
    if count < 0 or count >= n:
        raise ConfigError(f"cannot remove {count} of {n} units")
    return set(int(i) for i in scores.ranking[:count])


def _score_all_layers(network, calib, layers, config):
    scored = {}
    for l in layers:
        pre, post = collect.collect_observations(network, calib, l)
        pre_std = collect.standardize(pre, epsilon=config.epsilon)
        post_std = collect.standardize(post, epsilon=config.epsilon)
        scores, dist, graph_in, graph_out = spectral.score_layer(
            pre_std, post_std, k=config.k, s=config.s, gamma=config.gamma
        )
        scored[l] = scores
    return scored


def prune(network, config):
    """Run the full iterative pruning loop; weights are never updated.

    Returns (compact_network, PruneHistory). Unit ids in the history are
    indices into the model as it stood at the start of that iteration.
    """
    layers = config.resolved_layers(network)
    floors = config.resolved_floors(network, layers)
    calib = config.calibration
    if calib is None:
        raise ConfigError("PruneConfig.calibration is required")
    original = network
    current = network.copy()
    history = PruneHistory(original_params=nn.param_count(original))

    if config.policy == "proportional":
        budgets = plan_iteration_budgets(config, network)
    else:
        budgets = None

    for t in range(1, config.iterations + 1):
        if config.resample_calibration and config.calibration_source is not None:
            calib = config.calibration_source.calibration(
                n=calib.n, seed=config.rng_seed + t
            )
        scored = _score_all_layers(current, calib, layers, config)
        if config.policy == "proportional":
            removal = {
                l: select_prune_set(scored[l], budgets[t - 1][l]) for l in layers
            }
        else:
            removal = _global_pool_selection(
                history.original_params, current, scored, layers, floors, config, t
            )
        snapshots = {l: scored[l].node_scores.copy() for l in layers}
        for l in layers:
            if removal[l]:
                current = nn.surgery_remove_units(current, l, removal[l])
        history.iterations.append(
            IterationRecord(
                iteration=t,
                removed={l: sorted(removal[l]) for l in layers},
                score_snapshots=snapshots,
                rho=effective_reduction(original, current),
                param_count=nn.param_count(current),
            )
        )
    return current, history


def _global_pool_selection(original_params, network, scored, layers, floors, config, t):
    """Pool min-max-normalized scores across layers and cut the globally
    lowest units until this iteration's rho milestone is met.

    The milestone is rho_target * t / T measured against the run's
    original model; floors bound how far any single layer can shrink.
    """
    milestone = config.rho_target * t / config.iterations
    pool = []
    for l in layers:
        v = scored[l].node_scores
        span = v.max() - v.min()
        norm = (v - v.min()) / span if span > 0 else np.zeros_like(v)
        for i in range(norm.size):
            pool.append((float(norm[i]), l, i))
    pool.sort()
    sizes = [network.input_dim] + [l.out_units for l in network.layers]
    removal = {l: set() for l in layers}
    for _, l, i in pool:
        counts = {l2: len(removal[l2]) for l2 in layers}
        rho = 1.0 - _params_after_removal(sizes, counts, layers) / original_params
        if rho >= milestone:
            break
        if network.layers[l].out_units - len(removal[l]) - 1 < floors[l]:
            continue
        removal[l].add(i)
    return removal


def recover(network, data, train_config, history=None):
    """Single post-pruning fine-tuning stage; never part of the prune loop."""
    recovered, metrics = nn.train(network, data, train_config)
    if history is not None:
        history.recovery_metrics = metrics
    return recovered, metrics
