"""Score-vs-damage ablation analysis.

Units are grouped by within-layer score percentile; small groups are
temporarily removed (no recovery training anywhere) and the immediate
validation-metric drop is recorded, followed by a paired comparison of
high- versus low-score damage.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from . import nn
from .errors import ConfigError


@dataclass
class AblationProtocol:
    low_upper: float = 30.0
    high_lower: float = 70.0
    group_size: int = 5
    trials_per_group: int = 30
    rng_seed: int = 0

    def __post_init__(self):
        if not 0 < self.low_upper < self.high_lower < 100:
            raise ConfigError("need 0 < low_upper < high_lower < 100")
        if self.group_size < 1 or self.trials_per_group < 1:
            raise ConfigError("group_size and trials_per_group must be >= 1")


@dataclass
class Trial:
    group: str
    layer: int
    unit_ids: list
    baseline: float
    ablated: float

    @property
    def drop(self):
        # percentage points for accuracy metrics; raw delta otherwise
        return self.baseline - self.ablated


@dataclass
class DamageRecord:
    trials: list
    summary: dict = field(default_factory=dict)

    def drops(self, group):
        return np.array([t.drop for t in self.trials if t.group == group])


def group_units(scores, cuts):
    """Partition units into (low, mid, high) sets by score percentile.

    Percentile rank uses the ascending score order with index tie-break,
    so the sets always partition the layer.
    """
    low_upper, high_lower = cuts
    if not 0 < low_upper < high_lower < 100:
        raise ConfigError("need 0 < low_upper < high_lower < 100")
    n = scores.node_scores.size
    percentile = np.empty(n)
    percentile[scores.ranking] = 100.0 * np.arange(n) / n
    low = {i for i in range(n) if percentile[i] < low_upper}
    high = {i for i in range(n) if percentile[i] >= high_lower}
    mid = set(range(n)) - low - high
    if not (low and mid and high):
        raise ConfigError(
            f"cuts {cuts} leave an empty group for {n} units; widen the cuts"
        )
    return low, mid, high


def analyzable_layers(network, group_size):
    """Hidden layers with enough units for stable group-level ablation."""
    return [
        l
        for l in range(network.num_hidden)
        if network.layers[l].out_units >= 3 * group_size
    ]


def ablate_and_measure(network, protocol, scores_per_layer, validation):
    """Run the grouped ablation trials against a frozen source network.

    scores_per_layer maps hidden-layer index -> ImportanceScores computed
    on this exact architecture. Every trial removes a seeded random
    subset of one group from a copy of the network and evaluates the
    validation metric; accuracy drops are recorded in percentage points.
    """
    layers = sorted(scores_per_layer)
    if not layers:
        raise ConfigError("no layers to ablate")
    scale = 100.0 if network.head == "classification" else 1.0
    baseline = nn.evaluate(network, validation) * scale
    groups = {}
    for l in layers:
        low, mid, high = group_units(
            scores_per_layer[l], (protocol.low_upper, protocol.high_lower)
        )
        for name, members in (("low", low), ("mid", mid), ("high", high)):
            if len(members) < protocol.group_size:
                raise ConfigError(
                    f"group {name!r} of layer {l} has {len(members)} units, "
                    f"need >= {protocol.group_size}"
                )
            groups[(l, name)] = np.array(sorted(members))

    trials = []
    for j in range(protocol.trials_per_group):
        layer = layers[j % len(layers)]
        for gi, name in enumerate(("low", "mid", "high")):
            rng = np.random.default_rng((protocol.rng_seed, j, gi))
            chosen = rng.choice(
                groups[(layer, name)], size=protocol.group_size, replace=False
            )
            surgered = nn.surgery_remove_units(network, layer, chosen)
            metric = nn.evaluate(surgered, validation) * scale
            trials.append(
                Trial(name, layer, sorted(int(i) for i in chosen), baseline, metric)
            )

    record = DamageRecord(trials)
    summary = {}
    for name in ("low", "mid", "high"):
        d = record.drops(name)
        summary[name] = {"mean_drop": float(d.mean()), "std_drop": float(d.std())}
    diff, p, degenerate = paired_comparison(record.drops("low"), record.drops("high"))
    summary["paired_mean_difference"] = diff
    summary["p_value"] = p
    summary["degenerate_variance"] = degenerate
    record.summary = summary
    return record


def paired_comparison(low_drops, high_drops):
    """One-sided paired t-test of H1: high-score damage exceeds low-score.

    Returns (mean_difference, p_value, degenerate_flag) where the mean
    difference is mean(high) - mean(low). Zero variance in the paired
    differences is flagged and p is forced to 0 (all positive) or 1.
    """
    low = np.asarray(low_drops, dtype=np.float64)
    high = np.asarray(high_drops, dtype=np.float64)
    if low.shape != high.shape or low.size < 5:
        raise ConfigError("need equally sized paired samples of length >= 5")
    diffs = high - low
    mean_diff = float(diffs.mean())
    if np.allclose(diffs.std(ddof=1), 0.0):
        p = 0.0 if np.all(diffs > 0) else 1.0
        return mean_diff, p, True
    result = stats.ttest_rel(high, low, alternative="greater")
    return mean_diff, float(result.pvalue), False
