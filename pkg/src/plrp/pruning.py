"""Per-layer pruning of relevance propagation.

Each parameterized layer step first computes the ordinary (unpruned)
attribution, splits it into positive and negative parts, chooses a
threshold per sign (either from a fixed proportion of the mass or from the
sparsity gain), zeroes everything at or below the threshold, and
redistributes the removed mass before the walk continues:

* the lambda variant rescales the surviving entries by a common factor so
  each sign channel keeps its total mass exactly and no sign ever flips;
* the matrix variant re-applies the layer's propagation rule with the
  masked activations, so the mass flows to the survivors in the usual
  proportions (which can flip signs).

The step producing the input attribution is never pruned: thresholding
the input directly would be plain masking rather than a change to the
propagation.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptySupportError, ModelFormatError
from .layers import Conv2D, Dense, is_parameterized
from .lrp import PruneRecord, RelevanceTrace, initial_relevance, propagate_step
from .model import ActivationTrace, Model, forward
from .rules import propagate_pruned_matrix  # noqa: F401  (re-exported as part of the pruning API)

VARIANTS = ("lambda", "matrix")
MODES = ("fixed", "gain")


@dataclass(frozen=True)
class PruningConfig:
    """How much to prune per layer and how to redistribute.

    ``p`` is the proportion of each sign channel's relevance mass removed
    per layer (``p_pos``/``p_neg`` override it per sign, ``p_per_layer``
    per layer index). In ``gain`` mode the proportion is instead derived
    per layer from ``min_gain``, the smallest acceptable sparsity gain.
    ``last_step_unpruned`` is always true; the field only documents it.
    """

    variant: str = "lambda"
    mode: str = "fixed"
    p: float = 0.0
    p_pos: float = None
    p_neg: float = None
    p_per_layer: dict = None
    min_gain: float = 1.0
    fallback_epsilon: float = 1e-9
    last_step_unpruned: bool = True

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        for name, value in (("p", self.p), ("p_pos", self.p_pos), ("p_neg", self.p_neg)):
            if value is not None and not 0.0 <= value < 1.0:
                raise ValueError(f"{name} must lie in [0, 1), got {value}")
        if self.p_per_layer:
            for k, v in self.p_per_layer.items():
                if not 0.0 <= v < 1.0:
                    raise ValueError(f"p_per_layer[{k}] must lie in [0, 1), got {v}")
        if self.min_gain <= 0.0:
            raise ValueError(f"min_gain must be > 0, got {self.min_gain}")
        if not self.last_step_unpruned:
            raise ValueError("the input attribution step is never pruned")

    def sign_p(self, layer_index: int, positive: bool) -> float:
        base = self.p
        if self.p_per_layer and layer_index in self.p_per_layer:
            base = self.p_per_layer[layer_index]
        override = self.p_pos if positive else self.p_neg
        return base if override is None else override


@dataclass
class ThresholdResult:
    """Threshold selection over one nonnegative relevance vector.

    ``pruned_indices`` are the support entries that get zeroed (value in
    (0, theta]); zero entries are untouched either way. ``pruned_mass`` and
    ``total_mass`` use the same ascending summation, so
    ``pruned_mass <= p * total_mass`` holds by construction in fixed mode.
    """

    theta: float
    implied_p: float
    pruned_indices: np.ndarray
    total_mass: float
    pruned_mass: float
    gains: np.ndarray = None

    def keep_mask(self, r) -> np.ndarray:
        return np.asarray(r) > self.theta


def _check_nonnegative(r) -> np.ndarray:
    r = np.asarray(r, dtype=np.float64).ravel()
    if r.size and float(np.min(r)) < 0.0:
        raise ValueError("expected a nonnegative relevance vector")
    return r


def split_signs(r):
    """Split into (positive part, magnitude of negative part).

    ``r == pos - neg`` holds exactly and the two supports are disjoint.
    """
    r = np.asarray(r, dtype=np.float64)
    return np.maximum(r, 0.0), np.maximum(-r, 0.0)


def threshold_for_mass(r, p: float) -> ThresholdResult:
    """Largest threshold whose pruned mass stays within ``p`` of the total.

    Sorting ascending, theta is the largest value v such that the sum of
    all entries <= v (whole tie groups, since keeping is strictly
    ``> theta``) stays within ``p`` times the total. If no value qualifies,
    theta is 0 and nothing is pruned. The kept mass is therefore always at
    least ``(1 - p)`` of the total, and the kept set is never empty for a
    nonzero vector.
    """
    r = _check_nonnegative(r)
    if not 0.0 <= p < 1.0:
        raise ValueError(f"p must lie in [0, 1), got {p}")
    if r.size == 0:
        return ThresholdResult(0.0, 0.0, np.empty(0, dtype=np.int64), 0.0, 0.0)
    v = np.sort(r)
    prefix = np.cumsum(v)
    total = float(prefix[-1])
    if total == 0.0:
        return ThresholdResult(0.0, 0.0, np.empty(0, dtype=np.int64), 0.0, 0.0)
    budget = p * total
    group_end = np.empty(v.size, dtype=bool)
    group_end[:-1] = v[:-1] < v[1:]
    group_end[-1] = True
    feasible = np.nonzero(group_end & (prefix <= budget))[0]
    if feasible.size:
        cut = int(feasible[-1])
        theta = float(v[cut])
        pruned_mass = float(prefix[cut])
    else:
        theta = 0.0
        pruned_mass = 0.0
    pruned_idx = np.nonzero((r > 0.0) & (r <= theta))[0]
    return ThresholdResult(theta, pruned_mass / total, pruned_idx, total, pruned_mass)


def threshold_for_gain(r, min_gain: float) -> ThresholdResult:
    """Adaptive threshold from the sparsity gain of zeroing entries.

    Entries are zeroed one at a time in ascending order. Zeroing an entry
    of value v trades one additional zero (1/n of the zero-fraction
    sparsity measure) for v of relative mass, a gain of ``total / (n v)``;
    the gain sequence is therefore nonincreasing. Zeroing stops before the
    first step whose gain falls below ``min_gain``. The maximal tie group
    is never zeroed, so the pruned proportion always stays below 1.
    """
    r = _check_nonnegative(r)
    if min_gain <= 0.0:
        raise ValueError(f"min_gain must be > 0, got {min_gain}")
    empty = np.empty(0, dtype=np.int64)
    if r.size == 0:
        return ThresholdResult(0.0, 0.0, empty, 0.0, 0.0, gains=np.empty(0))
    v = np.sort(r)
    prefix = np.cumsum(v)
    total = float(prefix[-1])
    if total == 0.0:
        return ThresholdResult(0.0, 0.0, empty, 0.0, 0.0, gains=np.empty(0))
    vp = v[v > 0.0]
    gains = total / (r.size * vp)
    accepted = int(np.count_nonzero(gains >= min_gain))
    top_group = int(np.count_nonzero(vp == vp[-1]))
    accepted = min(accepted, vp.size - top_group)
    if accepted == 0:
        return ThresholdResult(0.0, 0.0, empty, total, 0.0, gains=gains)
    theta = float(vp[accepted - 1])
    pruned_mass = float(np.cumsum(vp)[accepted - 1])
    pruned_idx = np.nonzero((r > 0.0) & (r <= theta))[0]
    return ThresholdResult(theta, pruned_mass / total, pruned_idx, total, pruned_mass, gains=gains)


def prune_lambda(r, theta: float):
    """Zero all entries at or below ``theta`` and rescale the survivors.

    The common factor total/kept restores the channel's total mass, so the
    step conserves mass exactly (up to rounding) and never changes a sign.
    When nothing lies in (0, theta] the input is returned unchanged. If the
    vector carries mass but no entry exceeds theta, the mass has nowhere to
    go and EmptySupportError is raised; the caller must lower the pruned
    proportion.
    """
    r = _check_nonnegative(np.asarray(r, dtype=np.float64))
    if theta < 0.0:
        raise ValueError(f"theta must be >= 0, got {theta}")
    to_zero = (r > 0.0) & (r <= theta)
    if not np.any(to_zero):
        return r.copy()
    keep = r > theta
    total = float(r.sum())
    kept = float(r[keep].sum())
    if kept == 0.0:
        raise EmptySupportError("no entry above theta; cannot conserve mass onto empty support")
    return np.where(keep, (total / kept) * r, 0.0)


def _layer_matrix(layer, in_shape):
    if isinstance(layer, Dense):
        return layer.weights
    if isinstance(layer, Conv2D):
        return layer.unfolded(in_shape)
    raise TypeError(f"layer kind {type(layer).__name__!r} has no propagation matrix")


def _select_threshold(channel, config: PruningConfig, layer_index: int, positive: bool):
    if config.mode == "fixed":
        return threshold_for_mass(channel, config.sign_p(layer_index, positive))
    return threshold_for_gain(channel, config.min_gain)


def explain_plrp(model: Model, x, assignment, config: PruningConfig) -> RelevanceTrace:
    """Backward attribution with per-layer pruning; see the module docstring."""
    trace = forward(model, x)
    return backward_plrp(model, trace, assignment, config)


def backward_plrp(
    model: Model, trace: ActivationTrace, assignment, config: PruningConfig
) -> RelevanceTrace:
    r = initial_relevance(trace, model.num_classes)
    per_layer = [r]
    records = []
    first_param = model.parameterized_indices[0]
    for i in range(len(model.layers) - 1, -1, -1):
        layer = model.layers[i]
        in_shape = model.layer_input_shape(i)
        a_in = trace.per_layer[i]
        active = config.mode == "gain" or (
            config.sign_p(i, True) > 0.0 or config.sign_p(i, False) > 0.0
        )
        if is_parameterized(layer) and i != first_param and active:
            rule = assignment.rule_for(i)
            r_tilde = propagate_step(layer, in_shape, a_in, r, rule)
            flat = r_tilde.ravel()
            pos, neg = split_signs(flat)
            th_pos = _select_threshold(pos, config, i, positive=True)
            th_neg = _select_threshold(neg, config, i, positive=False)
            pruned_count = int(th_pos.pruned_indices.size + th_neg.pruned_indices.size)
            undeliverable = 0
            if pruned_count == 0:
                r_new = r_tilde
            elif config.variant == "lambda":
                try:
                    new_pos = prune_lambda(pos, th_pos.theta)
                    new_neg = prune_lambda(neg, th_neg.theta)
                except EmptySupportError as e:
                    raise EmptySupportError(f"layer {i}: {e}") from e
                r_new = (new_pos - new_neg).reshape(r_tilde.shape)
            else:
                keep = (pos > th_pos.theta) | (neg > th_neg.theta)
                flat_new, undeliverable = rule.propagate_masked(
                    _layer_matrix(layer, in_shape),
                    a_in.ravel(),
                    r.ravel(),
                    keep,
                    config.fallback_epsilon,
                )
                r_new = flat_new.reshape(in_shape)
            records.append(
                PruneRecord(
                    layer_index=i,
                    theta_pos=th_pos.theta,
                    theta_neg=th_neg.theta,
                    implied_p_pos=th_pos.implied_p,
                    implied_p_neg=th_neg.implied_p,
                    pruned_count=pruned_count,
                    undeliverable_columns=undeliverable,
                )
            )
            r = r_new
        else:
            rule = assignment.rule_for(i) if is_parameterized(layer) else None
            r = propagate_step(layer, in_shape, a_in, r, rule)
        per_layer.append(r)
    per_layer.reverse()
    records.reverse()
    return RelevanceTrace(
        per_layer=per_layer,
        target_class=trace.winning_class,
        target_score=trace.winning_score,
        prune_records=records,
    )


def config_to_dict(config: PruningConfig) -> dict:
    return {
        "variant": config.variant,
        "mode": config.mode,
        "p": config.p,
        "pPos": config.p_pos,
        "pNeg": config.p_neg,
        "pPerLayer": {str(k): v for k, v in (config.p_per_layer or {}).items()} or None,
        "minGain": config.min_gain,
        "fallbackEpsilon": config.fallback_epsilon,
    }


def config_from_dict(doc: dict) -> PruningConfig:
    if not isinstance(doc, dict):
        raise ModelFormatError("pruning config: expected an object")
    try:
        per_layer = doc.get("pPerLayer")
        return PruningConfig(
            variant=doc.get("variant", "lambda"),
            mode=doc.get("mode", "fixed"),
            p=doc.get("p", 0.0),
            p_pos=doc.get("pPos"),
            p_neg=doc.get("pNeg"),
            p_per_layer={int(k): float(v) for k, v in per_layer.items()} if per_layer else None,
            min_gain=doc.get("minGain", 1.0),
            fallback_epsilon=doc.get("fallbackEpsilon", 1e-9),
        )
    except (TypeError, ValueError) as e:
        raise ModelFormatError(f"pruning config: {e}") from e


def save_config(config: PruningConfig, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(config_to_dict(config), f, allow_nan=False)
        f.write("\n")


def load_config(path) -> PruningConfig:
    with open(path, "r", encoding="utf-8") as f:
        try:
            doc = json.load(f)
        except json.JSONDecodeError as e:
            raise ModelFormatError(
                f"invalid JSON at line {e.lineno}, column {e.colno}: {e.msg}"
            ) from e
    return config_from_dict(doc)
